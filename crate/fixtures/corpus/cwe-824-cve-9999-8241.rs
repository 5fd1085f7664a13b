fn init_table(&mut self) {
    let slot: *mut Entry = MaybeUninit::uninit().as_mut_ptr();
    unsafe { (*slot).key = self.next_key };
}
