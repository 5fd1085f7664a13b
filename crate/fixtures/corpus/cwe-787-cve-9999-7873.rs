pub fn fill(dst: &mut Vec<u8>, src: &[u8], at: usize) {
    unsafe {
        let p = dst.as_mut_ptr().add(at);
        ptr::copy(src.as_ptr(), p, src.len());
    }
}
