#![no_main]

use libfuzzer_sys::fuzz_target;
use slotalloc::scenario::output::read_allocation_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = read_allocation_json(text) {
            assert_eq!(file.allocation().len(), file.movements.len());
        }
    }
});
