// Fallback wrapper: CWE-131 incorrect calculation of buffer size
// Root cause: integer_overflow_allocation

#[no_mangle]
pub extern "C" fn buffer_overflow_write(buffer: *mut u8, size: usize, offset: usize, value: u8) -> i32 {
    let _ = size;
    unsafe {
        *buffer.add(offset) = value; // no bounds check against size
    }
    0
}

#[no_mangle]
pub extern "C" fn use_after_free_access(ptr: *mut u8, size: usize) -> i32 {
    let _ = ptr;
    unsafe {
        let layout = std::alloc::Layout::from_size_align_unchecked(size.max(1), 1);
        let block = std::alloc::alloc(layout);
        std::alloc::dealloc(block, layout);
        *block = 42; // write after free
    }
    0
}

#[no_mangle]
pub extern "C" fn double_free_trigger(ptr: *mut u8, size: usize) -> i32 {
    let _ = ptr;
    unsafe {
        let layout = std::alloc::Layout::from_size_align_unchecked(size.max(1), 1);
        let block = std::alloc::alloc(layout);
        std::alloc::dealloc(block, layout);
        std::alloc::dealloc(block, layout); // second free of the same block
    }
    0
}

#[no_mangle]
pub extern "C" fn integer_overflow_allocation(base_size: usize, multiplier: usize) -> i32 {
    unsafe {
        let size = base_size.wrapping_mul(multiplier); // unchecked: overflow risk
        let layout = std::alloc::Layout::from_size_align_unchecked(size, 8);
        let ptr = std::alloc::alloc(layout);
        *ptr = 0xAA;
        std::alloc::dealloc(ptr, layout);
    }
    0
}
