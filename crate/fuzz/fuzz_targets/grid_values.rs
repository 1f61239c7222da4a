#![no_main]

use carbon_svr::notation::{parse_c_grid, parse_cv, parse_epsilons, parse_gammas, parse_kernels};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = parse_c_grid(text) {
        assert!(!grid.values.is_empty());
        assert!(grid.values.iter().all(|c| c.is_finite() && *c > 0.0));
        assert!(grid.skipped.iter().all(|c| *c <= 0.0));
    }
    let _ = parse_epsilons(text);
    let _ = parse_gammas(text);
    let _ = parse_kernels(text);
    let _ = parse_cv(text);
});
