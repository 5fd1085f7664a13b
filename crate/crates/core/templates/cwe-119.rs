// Fallback wrapper: CWE-119 improper restriction of operations within buffer bounds
// Root cause: buffer_overflow_copy

#[no_mangle]
pub extern "C" fn buffer_overflow_copy(buffer: *mut u8, size: usize, offset: usize, value: u8) -> i32 {
    unsafe {
        let mut i = 0;
        while i < size {
            *buffer.add(offset + i) = value; // length never checked against capacity
            i += 1;
        }
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
