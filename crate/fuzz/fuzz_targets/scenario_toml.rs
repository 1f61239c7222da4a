#![no_main]

use carbon_svr::series::parse_scenarios;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenarios) = parse_scenarios(text) {
        for s in &scenarios {
            s.validate().expect("parsed scenario is valid");
        }
    }
});
