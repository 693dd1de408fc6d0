#![no_main]

use espkit::commands::analyse_trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = espkit::parse_trajectory_csv(data, "fuzz") {
        let _ = analyse_trajectory(&traj, 1e-9, None, 1.5, None);
    }
});
