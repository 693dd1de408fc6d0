#![no_main]

use espkit_core::states::{esp_weighting, WeightingId};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(id) = s.parse::<WeightingId>() {
            assert_eq!(id.to_string().parse::<WeightingId>().unwrap(), id);
            let _ = esp_weighting(id, 0.01);
        }
    }
});
