// Mirrors CVE unsafe block + raw pointer dereference
#[no_mangle]
pub extern "C" fn buffer_overflow_write(
    buffer: *mut u8, offset: usize, value: u8) -> i32 {
    unsafe { *buffer.add(offset) = value; } // no bounds check
    0
}

// Mirrors Vec::from_raw_parts deallocation path
#[no_mangle]
pub extern "C" fn use_after_free_access(
    ptr: *mut u8, size: usize) -> i32 {
    unsafe {
        let layout = std::alloc::Layout
            ::from_size_align_unchecked(size, 1);
        std::alloc::dealloc(ptr, layout); // free the buffer
        *ptr = 42; // write after free -- UAF
    }
    0
}

// Mirrors root-cause: incorrect size arithmetic
#[no_mangle]
pub extern "C" fn integer_overflow_allocation(
    base_size: usize, multiplier: usize) -> i32 {
    unsafe {
        let size = base_size * multiplier; // unchecked: overflow risk
        let layout = std::alloc::Layout
            ::from_size_align_unchecked(size, 8);
        let ptr = std::alloc::alloc(layout);
        *ptr = 0xAA;
        std::alloc::dealloc(ptr, layout);
    }
    0
}
