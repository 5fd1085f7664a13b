impl<T> RingBuffer<T> {
    pub fn push_slice(&mut self, items: &[T]) {
        let dst = self.buf.as_mut_ptr().add(self.tail);
        unsafe { ptr::copy_nonoverlapping(items.as_ptr(), dst, items.len()) };
        self.tail += items.len();
    }
}
