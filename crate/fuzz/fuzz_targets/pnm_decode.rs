#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::data::pnm;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = pnm::decode(data) {
        assert_eq!(img.data.len(), img.width * img.height * img.channels);
        assert_eq!(pnm::decode(&pnm::encode(&img)).expect("round trip"), img);
    }
});
