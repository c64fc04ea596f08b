#![no_main]

use libfuzzer_sys::fuzz_target;
use slotalloc::scenario::formats::{format_config, parse_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config("config.txt", text) {
        let again =
            parse_config("config.txt", &format_config(&cfg)).expect("formatted config parses");
        assert_eq!(again, cfg);
    }
});
