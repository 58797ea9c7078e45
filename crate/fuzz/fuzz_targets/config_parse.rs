#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        let again = RunConfig::parse(&cfg.resolved()).expect("resolved config parses");
        assert_eq!(again.resolved(), cfg.resolved());
    }
});
