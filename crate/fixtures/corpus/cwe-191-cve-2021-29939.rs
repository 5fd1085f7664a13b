fn rewind(&mut self, by: usize) {
    let start = self.cursor - by;
    unsafe { self.window.set_len(start) };
}
