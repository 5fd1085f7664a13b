fn read_header(&self) -> Header {
    let hdr: Header = unsafe { MaybeUninit::uninit().assume_init() };
    if hdr.magic != MAGIC { self.reset() }
    hdr
}
