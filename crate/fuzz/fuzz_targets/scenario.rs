//! Whole-scenario loading. Input is the file contents separated by NUL bytes
//! in the order slots, cities, movements, valuations, current, config.

#![no_main]

use libfuzzer_sys::fuzz_target;
use slotalloc::scenario::{build_scenario, ScenarioTexts};

const MAX_INPUT: usize = 16 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut parts = text.split('\0').map(str::to_string);
    let texts = ScenarioTexts {
        slots: parts.next().unwrap_or_default(),
        cities: parts.next().unwrap_or_default(),
        movements: parts.next().unwrap_or_default(),
        valuations: parts.next(),
        histograms: None,
        current: parts.next(),
        config: parts.next(),
    };
    if let Ok(s) = build_scenario(&texts) {
        if s.instance.num_movements() <= 8 {
            let res = slotalloc::run_mechanism(&s.instance);
            assert!(res.payment_numerators.iter().all(|&p| p >= 0));
        }
    }
});
