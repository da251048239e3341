#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::pattern::PatternBank;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(bank) = PatternBank::from_json(text) {
        for i in 0..bank.slot_count {
            bank.patterns(i).expect("validated bank yields patterns");
        }
        assert_eq!(PatternBank::from_json(&bank.to_json()).expect("re-parse"), bank);
    }
});
