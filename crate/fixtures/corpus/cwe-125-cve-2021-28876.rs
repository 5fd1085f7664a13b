impl<'a> Reader<'a> {
    fn peek(&self, n: usize) -> u8 {
        unsafe { *self.data.get_unchecked(self.pos + n) }
    }
}
