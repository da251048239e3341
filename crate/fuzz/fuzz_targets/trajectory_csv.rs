#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::io::{parse_trajectory_csv, trajectory_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_trajectory_csv(text) {
        let out = trajectory_csv(&rows).expect("serialize");
        let again = parse_trajectory_csv(std::str::from_utf8(&out).expect("utf-8")).expect("re-parse");
        assert_eq!(again.len(), rows.len());
    }
});
