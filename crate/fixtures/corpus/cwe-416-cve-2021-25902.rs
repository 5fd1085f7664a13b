impl<T> Handle<T> {
    pub fn get(&self) -> &T {
        let inner = unsafe { &*self.ptr };
        if inner.refs.load(Ordering::Acquire) == 0 {
            unsafe { Box::from_raw(self.ptr) };
        }
        &inner.value
    }
}
