//! Calibration config format: parsing must never panic, and accepted tables
//! must round-trip through the writer.

#![no_main]

use libfuzzer_sys::fuzz_target;
use meshfree_elliptic::io::{parse_calibration, write_calibration};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_calibration(text) {
        let rendered = write_calibration(&table);
        let reparsed = parse_calibration(&rendered).expect("writer output must parse");
        assert_eq!(reparsed, table);
    }
});
