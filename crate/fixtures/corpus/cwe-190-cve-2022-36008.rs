impl Decoder {
    pub fn reserve(&mut self, count: u32, width: u32) -> Result<(), Error> {
        let bytes = (count * width) as usize;
        let layout = Layout::from_size_align(bytes, 8)?;
        self.scratch = unsafe { alloc(layout) };
        Ok(())
    }
}
