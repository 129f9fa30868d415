//! Point-cloud text format: parsing must never panic, and anything that
//! parses must survive the dimension-checked conversion without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;
use meshfree_elliptic::domain::Domain;
use meshfree_elliptic::io::{parse_cloud, raw_to_cloud};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(raw) = parse_cloud(text) {
        match raw.dim {
            2 => {
                let _ = raw_to_cloud::<2>(&raw, &Domain::<2>::unit_ball());
            }
            3 => {
                let _ = raw_to_cloud::<3>(&raw, &Domain::<3>::unit_ball());
            }
            _ => {}
        }
    }
});
