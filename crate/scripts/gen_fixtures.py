#!/usr/bin/env python3
"""Regenerates fixtures/corpus: 31 snippets, recorded executor output for
each, and fixtures/baseline.json. Output is deterministic."""

import json
import random
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "fixtures" / "corpus"
KLEE = CORPUS / "klee_output"
LISTING_ONE = ROOT / "crates" / "core" / "testdata" / "cwe-131-cve-2020-35904.rs"

# (cve, cwe, {kind: count}, baseline warnings)
FILES = [
    ("CVE-2021-28875", 119, {"ptr": 8}, 1),
    ("CVE-9999-1191", 119, {"ptr": 1}, 1),
    ("CVE-9999-1192", 119, {"ptr": 1}, 3),
    ("CVE-9999-1193", 119, {"ptr": 1}, 0),
    ("CVE-9999-1194", 119, {"ptr": 1}, 0),
    ("CVE-2021-28878", 125, {"ptr": 4, "external": 1}, 2),
    ("CVE-2021-28877", 125, {"ptr": 3}, 1),
    ("CVE-2021-28876", 125, {"ptr": 3}, 0),
    ("CVE-2020-35904", 131, {"ptr": 48, "external": 704}, 0),
    ("CVE-9999-1341", 134, {"ptr": 1}, 2),
    ("CVE-2022-36008", 190, {"ptr": 12, "external": 369}, 0),
    ("CVE-9999-1901", 190, {"abort": 1}, 0),
    ("CVE-9999-1902", 190, {"div": 1, "overflow": 2}, 0),
    ("CVE-2021-29939", 191, {"ptr": 5, "external": 1}, 0),
    ("CVE-2021-31162", 415, {"ptr": 9, "external": 2}, 0),
    ("CVE-9999-4151", 415, {"ptr": 6, "external": 1}, 1),
    ("CVE-2021-25902", 416, {"ptr": 5, "external": 1}, 0),
    ("CVE-2020-35861", 416, {"ptr": 5, "external": 1}, 0),
    ("CVE-9999-4161", 416, {"ptr": 2}, 4),
    ("CVE-9999-4162", 416, {"ptr": 2}, 0),
    ("CVE-9999-4163", 416, {"ptr": 2}, 0),
    ("CVE-9999-4164", 416, {"ptr": 1}, 0),
    ("CVE-9999-4165", 416, {"abort": 1}, 0),
    ("CVE-9999-4166", 416, {}, 0),
    ("CVE-9999-4167", 416, {}, 0),
    ("CVE-9999-7871", 787, {"ptr": 1}, 1),
    ("CVE-9999-7872", 787, {"ptr": 1}, 2),
    ("CVE-9999-7873", 787, {"ptr": 1}, 0),
    ("CVE-9999-8241", 824, {"external": 1}, 0),
    ("CVE-9999-9081", 908, {"ptr": 1}, 1),
    ("CVE-9999-9082", 908, {"external": 1}, 0),
]

# exported functions of each CWE's wrapper, with parameter names
FUNCS = {
    119: ["buffer_overflow_copy", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    125: ["out_of_bounds_read", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    131: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    134: ["format_string_read", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    190: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    191: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_underflow_offset"],
    415: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    416: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    787: ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation"],
    824: ["buffer_overflow_write", "uninitialized_pointer_write", "double_free_trigger", "integer_overflow_allocation"],
    908: ["buffer_overflow_write", "uninitialized_resource_read", "double_free_trigger", "integer_overflow_allocation"],
}
ARGS = {
    "buffer_overflow_write": ["buffer", "size", "offset", "value"],
    "buffer_overflow_copy": ["buffer", "size", "offset", "len"],
    "out_of_bounds_read": ["buffer", "size", "index"],
    "format_string_read": ["buffer", "size", "count"],
    "use_after_free_access": ["ptr", "size"],
    "uninitialized_pointer_write": ["ptr", "size"],
    "uninitialized_resource_read": ["ptr", "size"],
    "double_free_trigger": ["ptr", "size"],
    "integer_overflow_allocation": ["base_size", "multiplier"],
    "integer_underflow_offset": ["buffer", "size", "delta"],
}

SNIPPETS = {
    119: """impl<T> RingBuffer<T> {
    pub fn push_slice(&mut self, items: &[T]) {
        let dst = self.buf.as_mut_ptr().add(self.tail);
        unsafe { ptr::copy_nonoverlapping(items.as_ptr(), dst, items.len()) };
        self.tail += items.len();
    }
}
""",
    125: """impl<'a> Reader<'a> {
    fn peek(&self, n: usize) -> u8 {
        unsafe { *self.data.get_unchecked(self.pos + n) }
    }
}
""",
    134: """pub fn log_line(fmt: &CStr, args: &[Arg]) -> usize {
    let mut out = Formatter::new();
    unsafe { out.write_raw(fmt.as_ptr(), args.as_ptr()) }
}
""",
    190: """impl Decoder {
    pub fn reserve(&mut self, count: u32, width: u32) -> Result<(), Error> {
        let bytes = (count * width) as usize;
        let layout = Layout::from_size_align(bytes, 8)?;
        self.scratch = unsafe { alloc(layout) };
        Ok(())
    }
}
""",
    191: """fn rewind(&mut self, by: usize) {
    let start = self.cursor - by;
    unsafe { self.window.set_len(start) };
}
""",
    415: """impl<T> Drop for Slab<T> {
    fn drop(&mut self) {
        for entry in self.entries.iter_mut() {
            unsafe { ptr::drop_in_place(entry.value.as_mut_ptr()) };
        }
        unsafe { dealloc(self.base as *mut u8, self.layout) };
    }
}
""",
    416: """impl<T> Handle<T> {
    pub fn get(&self) -> &T {
        let inner = unsafe { &*self.ptr };
        if inner.refs.load(Ordering::Acquire) == 0 {
            unsafe { Box::from_raw(self.ptr) };
        }
        &inner.value
    }
}
""",
    787: """pub fn fill(dst: &mut Vec<u8>, src: &[u8], at: usize) {
    unsafe {
        let p = dst.as_mut_ptr().add(at);
        ptr::copy(src.as_ptr(), p, src.len());
    }
}
""",
    824: """fn init_table(&mut self) {
    let slot: *mut Entry = MaybeUninit::uninit().as_mut_ptr();
    unsafe { (*slot).key = self.next_key };
}
""",
    908: """fn read_header(&self) -> Header {
    let hdr: Header = unsafe { MaybeUninit::uninit().assume_init() };
    if hdr.magic != MAGIC { self.reset() }
    hdr
}
""",
}

MESSAGES = {
    "ptr": "memory error: out of bound pointer",
    "external": "failed external call: __rust_dealloc",
    "abort": "abort failure",
    "div": "divide by zero",
    "overflow": "overflow on addition",
}


def dir_name(cve, cwe):
    return f"cwe-{cwe}-{cve.lower()}"


def err_text(rng, kind, func, line):
    base = rng.randrange(0x5600_0000_0000, 0x5700_0000_0000, 16)
    args = []
    for name in ARGS[func]:
        if name in ("buffer", "ptr"):
            args.append(f"{name}={base}")
        else:
            args.append(f"{name}=symbolic")
    lines = [
        f"Error: {MESSAGES[kind]}",
        "File: src/wrapper.rs",
        f"Line: {line}",
        f"assembly.ll line: {200 + line * 7}",
        f"State: {rng.randrange(1, 5000)}",
        "Stack: ",
        f"\t#{200 + line * 7:09d} in {func}({', '.join(args)}) at src/wrapper.rs:{line}",
        "\t#100000031 in main() at harness.c:31",
    ]
    if kind == "ptr":
        width = rng.randrange(1, 10_000)
        example = base + rng.randrange(0, width)
        lines += [
            "Info: ",
            f"\taddress: (Add w64 {base} (ReadLSB w64 0 idx1))",
            f"\texample: {example}",
            f"\trange: [{base}, {base + width - 1}]",
        ]
    return "\n".join(lines) + "\n"


def main():
    if CORPUS.exists():
        shutil.rmtree(CORPUS)
    KLEE.mkdir(parents=True)
    baseline = {}
    for index, (cve, cwe, counts, warnings) in enumerate(FILES):
        rng = random.Random(f"{cve}/{cwe}")
        name = dir_name(cve, cwe)
        if cve == "CVE-2020-35904":
            text = LISTING_ONE.read_text()
        else:
            text = SNIPPETS[cwe]
        (CORPUS / f"{name}.rs").write_text(text)
        baseline[cve] = warnings

        out = KLEE / name
        out.mkdir()
        funcs = FUNCS[cwe]
        kinds = [k for k, n in counts.items() for _ in range(n)]
        rng.shuffle(kinds)
        test = 0
        for kind in kinds:
            test += 1
            # a few passing paths between errors
            if rng.random() < 0.1:
                (out / f"test{test:06d}.ktest").write_bytes(b"KTEST\x00\x00\x00\x03")
                test += 1
            if kind == "ptr":
                func = funcs[0] if rng.random() < 0.8 else funcs[1]
            elif kind == "external":
                func = rng.choice(funcs[1:3])
            elif kind == "div" or kind == "overflow":
                func = funcs[3]
            else:
                func = funcs[2]
            (out / f"test{test:06d}.ktest").write_bytes(b"KTEST\x00\x00\x00\x03")
            (out / f"test{test:06d}.{kind}.err").write_text(err_text(rng, kind, func, 5 + funcs.index(func) * 12))
        (out / "info").write_text(f"klee --output-dir={name} linked.bc\nKLEE: done: generated tests = {test}\n")
        (out / "run.stats").write_text("('Instructions','FullBranches','PartialBranches','NumBranches','UserTime')\n")
    (ROOT / "fixtures" / "baseline.json").write_text(json.dumps(baseline, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
