fn drop(&mut self) {
    // self.head undefined -- struct not present
    let hix = self.head.load(Ordering::Relaxed)
              & (self.one_lap - 1);
    for i in 0..self.len() {
        let index = if hix + i < self.cap {
            hix + i
        } else { hix + i - self.cap };
        unsafe {
            let slot = &mut *self.buffer.add(index);
            let value = &mut *slot.value.get();
            value.as_mut_ptr().drop_in_place();
        }
    }
    // BUG: length=0 causes incorrect deallocation
    unsafe { Vec::from_raw_parts(self.buffer, 0, self.cap); }
}
