#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::io::{map_csv, parse_map_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_map_csv(text) {
        let out = map_csv(&rows).expect("serialize");
        let again = parse_map_csv(std::str::from_utf8(&out).expect("utf-8")).expect("re-parse");
        assert_eq!(again.len(), rows.len());
    }
});
