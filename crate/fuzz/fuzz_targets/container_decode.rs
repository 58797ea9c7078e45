#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::container::{parse_header, Container};
use r2unet::model::CHECKPOINT_MAGIC;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = Container::decode(data, CHECKPOINT_MAGIC) {
        let bytes = c.encode(CHECKPOINT_MAGIC);
        let again = Container::decode(&bytes, CHECKPOINT_MAGIC).expect("re-encoded container decodes");
        assert_eq!(again.encode(CHECKPOINT_MAGIC), bytes);
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_header(text);
    }
});
