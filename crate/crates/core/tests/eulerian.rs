mod common;

use common::{constant_wave, linear_wave, problem, solve_small};
use strata_core::eulerian::{eulerian_flow_force, mass_flux, mass_flux_trapezoid, reconstruct, roundtrip_check};
use strata_core::height_solver::{FarField, StripGrid, WaveState};

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn uniform_laminar_flow_is_hydrostatic() {
    let p = problem(0.0, 32);
    let grid = StripGrid::new(20.0, 40, &p.bg, FarField::DirichletZero).unwrap();
    let froude = 1.3;
    let mu = 1.0 / (froude * froude);
    let f = reconstruct(&WaveState::laminar(&grid, froude), &p.bg, &grid).unwrap();
    for ((i, j), &u) in f.u.indexed_iter() {
        let y = f.streamline_y[[i, j]];
        assert!((u - f.c + 1.0).abs() < 1e-14);
        assert_eq!(f.v[[i, j]], 0.0);
        assert!((f.pressure[[i, j]] + mu * y).abs() < 1e-14);
        assert!((y - f.p_nodes[j]).abs() < 1e-14);
        assert!((f.psi[[i, j]] + f.p_nodes[j]).abs() < 1e-14);
    }
    assert!(f.max_surface_pressure() < 1e-14);
    assert!(f.q_bern_mismatch() < 1e-14);
    assert!(sup(f.eta.iter().copied()) < 1e-14);
}

#[test]
fn reference_wave_fields_are_consistent() {
    for wave in [constant_wave(), linear_wave()] {
        let (p, g, s) = (&wave.problem, &wave.grid, &wave.state);
        let f = reconstruct(s, &p.bg, g).unwrap();
        assert!(f.max_surface_pressure() < 1e-8);
        assert!(f.q_bern_mismatch() < 1e-8);
        assert!(roundtrip_check(&f, &p.bg) < 1e-10);
        assert!(f.eta[0] > 0.0);
        assert!(f.eta.windows(2).all(|e| e[1] <= e[0]));
        let n = p.bg.np();
        for i in 1..g.nq / 2 {
            for j in 1..=n {
                assert!(f.v[[i, j]] > 0.0, "v({i}, {j}) = {}", f.v[[i, j]]);
            }
        }
        assert!((0..=n).all(|j| f.v[[0, j]].abs() < 1e-14));
        assert!(f.u.iter().all(|&u| u < f.c));
        for m in mass_flux(&f, &p.bg) {
            assert!((m - 1.0).abs() < 1e-8, "{m}");
        }
    }
}

#[test]
fn roundtrip_detects_a_velocity_perturbation() {
    let wave = constant_wave();
    let mut f = reconstruct(&wave.state, &wave.problem.bg, &wave.grid).unwrap();
    f.u.mapv_inplace(|u| u + 1e-3);
    let dev = roundtrip_check(&f, &wave.problem.bg);
    assert!((2e-4..=2e-3).contains(&dev), "{dev:e}");
}

#[test]
fn eulerian_flow_force_matches_the_semi_lagrangian_value() {
    for wave in [constant_wave(), linear_wave()] {
        let (p, g, s) = (&wave.problem, &wave.grid, &wave.state);
        let f = reconstruct(s, &p.bg, g).unwrap();
        let s_h = p.bg.s_h(s.froude);
        let dev = sup(eulerian_flow_force(&f, &p.bg).into_iter().map(|e| (e - s_h) / s_h));
        assert!(dev < 1e-3, "{dev:e}");
    }
}

#[test]
fn trapezoid_quadratures_converge_at_second_order() {
    let errs: Vec<(f64, f64)> = [(32, 1.0), (64, 0.5), (128, 0.25)]
        .iter()
        .map(|&(np, dq)| {
            let wave = solve_small(-0.3, 0.04, np, dq);
            let (p, g, s) = (&wave.problem, &wave.grid, &wave.state);
            let f = reconstruct(s, &p.bg, g).unwrap();
            let s_h = p.bg.s_h(s.froude);
            let ff = sup(eulerian_flow_force(&f, &p.bg).into_iter().map(|e| e - s_h));
            let m = sup(mass_flux_trapezoid(&f, &p.bg).into_iter().map(|m| m - 1.0));
            (ff, m)
        })
        .collect();
    for k in 0..2 {
        let order_ff = (errs[k].0 / errs[k + 1].0).log2();
        let order_m = (errs[k].1 / errs[k + 1].1).log2();
        assert!(order_ff >= 1.5, "flow force order {order_ff}: {errs:?}");
        assert!(order_m >= 1.5, "mass flux order {order_m}: {errs:?}");
    }
}
