#![no_main]

use carbon_svr::series::{parse_series_csv, series_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(series) = parse_series_csv("fuzz", text) {
        series.validate().expect("parsed series is valid");
        let back =
            parse_series_csv("fuzz", &series_to_csv(&series)).expect("written series parses");
        assert_eq!(back.years(), series.years());
    }
});
