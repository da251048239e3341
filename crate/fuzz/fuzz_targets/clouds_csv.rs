#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::io::{clouds_csv, parse_clouds_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(clouds) = parse_clouds_csv(text) {
        let out = clouds_csv(&clouds).expect("serialize");
        let again = parse_clouds_csv(std::str::from_utf8(&out).expect("utf-8")).expect("re-parse");
        assert_eq!(again.len(), clouds.len());
    }
});
