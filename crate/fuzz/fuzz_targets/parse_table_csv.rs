#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spline) = strata_core::config::parse_table_csv(data) {
        let (a, b) = spline.domain();
        let _ = spline.eval(0.5 * (a + b));
    }
});
