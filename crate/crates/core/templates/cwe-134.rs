// Fallback wrapper: CWE-134 uncontrolled format string
// Root cause: format_string_read

#[no_mangle]
pub extern "C" fn format_string_read(buffer: *mut u8, size: usize, arg_count: usize) -> i32 {
    let _ = size;
    let mut acc: i32 = 0;
    unsafe {
        // each specifier consumes one 8-byte argument slot with no count check
        let mut i = 0;
        while i < arg_count {
            acc = acc.wrapping_add(*buffer.add(i * 8) as i32);
            i += 1;
        }
    }
    acc
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
