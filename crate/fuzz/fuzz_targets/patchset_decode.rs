#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::data::PatchSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = PatchSet::from_bytes(data) {
        assert_eq!(set.origins.len(), set.len());
        let again = PatchSet::from_bytes(&set.to_bytes()).expect("re-encoded patch set decodes");
        assert_eq!(again.len(), set.len());
    }
});
