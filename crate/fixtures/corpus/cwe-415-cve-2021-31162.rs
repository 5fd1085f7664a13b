impl<T> Drop for Slab<T> {
    fn drop(&mut self) {
        for entry in self.entries.iter_mut() {
            unsafe { ptr::drop_in_place(entry.value.as_mut_ptr()) };
        }
        unsafe { dealloc(self.base as *mut u8, self.layout) };
    }
}
