#![no_main]

use carbon_svr::notation::{format_model, parse_model_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_model_string(text) {
        // Canonical output must parse back to the same spec.
        let canon = format_model(&spec);
        let again = parse_model_string(&canon).expect("canonical form parses");
        assert_eq!(again, spec, "{canon}");
    }
});
