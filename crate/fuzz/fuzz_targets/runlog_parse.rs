#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::train::RunLog;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(log) = RunLog::from_csv(text) {
        let _ = log.to_csv();
    }
});
