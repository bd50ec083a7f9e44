#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;
use strata_core::profiles::{compute_background, normalize_shear, BackgroundFlow, Profile, StratifiedConfig};

fn background() -> &'static BackgroundFlow {
    static BG: OnceLock<BackgroundFlow> = OnceLock::new();
    BG.get_or_init(|| {
        let cfg = StratifiedConfig::semi_lagrangian(Profile::Constant { value: 1.0 }, Profile::Constant { value: 1.0 }, 32);
        compute_background(&normalize_shear(&cfg).unwrap()).unwrap()
    })
}

// Input is the state CSV and its JSON sidecar separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (csv, json) = (&data[..split], data.get(split + 1..).unwrap_or(&[]));
    if let Ok((state, grid, _)) = strata_core::io::read_state(csv, json, background()) {
        assert_eq!(state.w.dim(), (grid.nq + 1, grid.np + 1));
        assert_eq!(state.ghost.len(), grid.nq + 1);
    }
});
