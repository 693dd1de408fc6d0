#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = espkit::parse_config(text) {
            let _ = cfg.initial_state();
            let _ = cfg.evolution_spec().validate();
        }
    }
});
