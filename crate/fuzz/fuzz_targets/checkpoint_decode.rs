#![no_main]

use libfuzzer_sys::fuzz_target;
use r2unet::model::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::<f32>::from_bytes(data) {
        let again = Checkpoint::<f32>::from_bytes(&ck.to_bytes()).expect("re-encoded checkpoint decodes");
        assert_eq!(again.model.spec(), ck.model.spec());
    }
    let _ = Checkpoint::<f64>::from_bytes(data);
});
