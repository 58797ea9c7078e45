#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::data::decode_image;

fuzz_target!(|data: &[u8]| {
    for ext in ["png", "bmp", "pgm"] {
        if let Ok(img) = decode_image(data, ext) {
            assert_eq!(img.data.len(), img.width * img.height * img.channels);
            let _ = img.to_tensor();
        }
    }
});
