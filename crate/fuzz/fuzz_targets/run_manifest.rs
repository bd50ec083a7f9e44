#![no_main]

use libfuzzer_sys::fuzz_target;
use strata_cli::manifest::RunManifest;

fuzz_target!(|data: &[u8]| {
    let _ = RunManifest::parse(data);
});
