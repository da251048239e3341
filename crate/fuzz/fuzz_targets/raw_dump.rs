#![no_main]

use libfuzzer_sys::fuzz_target;
use rhs_slam::io::RawDump;

// Input layout: u16 LE sidecar length, sidecar JSON, then the binary payload.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if rest.len() < n {
        return;
    }
    let Ok(sidecar) = std::str::from_utf8(&rest[..n]) else { return };
    let bin = &rest[n..];
    if let Ok(dump) = RawDump::decode(bin, sidecar) {
        let (b, s) = dump.encode();
        assert_eq!(b, bin);
        let again = RawDump::decode(&b, &s).expect("re-decode");
        assert_eq!(again.header, dump.header);
    }
});
