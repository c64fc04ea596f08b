#![no_main]

use libfuzzer_sys::fuzz_target;
use slotalloc::scenario::output::{format_payment_records, read_payments_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = read_payments_csv(text) {
        let again =
            read_payments_csv(&format_payment_records(&records)).expect("formatted records parse");
        assert_eq!(again, records);
    }
});
