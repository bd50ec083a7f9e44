#![no_main]

use libfuzzer_sys::fuzz_target;
use strata_core::io::{read_curve_csv, write_curve_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_curve_csv(data) {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        let again = read_curve_csv(&buf).unwrap();
        // NaN fields compare unequal, so compare the rewritten text instead
        let mut buf2 = Vec::new();
        write_curve_csv(&mut buf2, &again).unwrap();
        assert_eq!(buf, buf2);
    }
});
