#![no_main]

use clap::Parser;
use gosched_cli::Cli;
use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated; only parsing is exercised, never dispatch.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("gosched").chain(text.split('\0'));
    let _ = Cli::try_parse_from(args);
});
