#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // Anything accepted must survive its own serialization.
        let again = RunConfig::from_json(&cfg.to_json()).expect("re-parse of serialized config");
        assert_eq!(cfg, again);
    }
});
