pub fn log_line(fmt: &CStr, args: &[Arg]) -> usize {
    let mut out = Formatter::new();
    unsafe { out.write_raw(fmt.as_ptr(), args.as_ptr()) }
}
