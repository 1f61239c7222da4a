#![no_main]

use carbon_svr::persist::{decode_model, encode_fitted, encode_svc, StoredModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(stored) = decode_model(text) {
        let encoded = match &stored {
            StoredModel::Fitted(m) => encode_fitted(m),
            StoredModel::Svc(m) => encode_svc(m),
        };
        assert_eq!(
            decode_model(&encoded).expect("re-encoded record decodes"),
            stored
        );
    }
});
