#![no_main]

use libfuzzer_sys::fuzz_target;
use slotalloc::scenario::formats::parse_movements;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_movements("movements.csv", text);
    }
});
