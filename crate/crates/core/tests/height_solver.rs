mod common;

use common::{background, constant_wave, linear_wave, problem, strip};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use strata_core::error::Error;
use strata_core::height_solver::{
    jacobian, jacobian_packed, newton_solve, newton_solve_report, refine_grid, residual, residual_packed, FarField,
    NewtonOptions, StripGrid, Symmetry, WaveState,
};
use strata_core::profiles::BackgroundFlow;
use strata_core::small_amplitude::build_guess;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Smooth elevation plus node noise; `h_p` stays well away from zero.
fn random_state(rng: &mut StdRng, bg: &BackgroundFlow, grid: &StripGrid) -> WaveState {
    let amp = rng.gen_range(0.0..0.2);
    let width = rng.gen_range(2.0..6.0);
    let w = Array2::from_shape_fn((grid.nq + 1, grid.np + 1), |(i, j)| {
        if j == 0 {
            return 0.0;
        }
        let q = grid.q_nodes[i];
        let p = grid.p_nodes[j];
        let base = amp * (std::f64::consts::FRAC_PI_2 * (p + 1.0)).sin() * (-(q / width).powi(2)).exp();
        base + 0.002 * rng.gen_range(-1.0..1.0)
    });
    let mut s = WaveState::with_consistent_ghost(w, rng.gen_range(1.05..1.6), bg, grid);
    for g in s.ghost.iter_mut() {
        *g += 0.002 * rng.gen_range(-1.0..1.0);
    }
    s
}

fn grids(bg: &BackgroundFlow) -> Vec<StripGrid> {
    vec![
        StripGrid::new(12.0, 24, bg, FarField::DirichletZero).unwrap(),
        StripGrid::new(12.0, 24, bg, FarField::RobinDecay { rate: 0.3 }).unwrap(),
        StripGrid::full_strip(12.0, 12, bg, FarField::DirichletZero).unwrap(),
        StripGrid::full_strip(12.0, 12, bg, FarField::RobinDecay { rate: 0.3 }).unwrap(),
    ]
}

#[test]
fn jacobian_vector_products_match_central_differences() {
    let mut rng = StdRng::seed_from_u64(7);
    let bg = background(-0.3, 32);
    let gs = grids(&bg);
    for k in 0..20 {
        let grid = &gs[k % gs.len()];
        let state = random_state(&mut rng, &bg, grid);
        let x = state.pack(grid);
        let v: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jac = jacobian_packed(&x, state.froude, &bg, grid).unwrap();
        let jv = jac.apply(&v);
        let h = 1e-6;
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let rp = residual_packed(&plus, state.froude, &bg, grid).unwrap().values;
        let rm = residual_packed(&minus, state.froude, &bg, grid).unwrap().values;
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: Vec<f64> = jv.iter().zip(&fd).map(|(a, b)| a - b).collect();
        assert!(sup(&err) / sup(&jv) < 1e-6, "state {k}: {:e}", sup(&err) / sup(&jv));

        let f = state.froude;
        let rp = residual_packed(&x, f + h, &bg, grid).unwrap().values;
        let rm = residual_packed(&x, f - h, &bg, grid).unwrap().values;
        let err: Vec<f64> = jac
            .d_froude
            .iter()
            .zip(rp.iter().zip(&rm))
            .map(|(d, (a, b))| d - (a - b) / (2.0 * h))
            .collect();
        assert!(sup(&err) <= 1e-6 * sup(&jac.d_froude).max(1e-3), "state {k}: d/dF {:e}", sup(&err));
    }
}

/// Linearization at `w = 0` written out node by node.
fn linear_operator(bg: &BackgroundFlow, grid: &StripGrid, froude: f64, v: &[f64]) -> Vec<f64> {
    let mu = 1.0 / (froude * froude);
    let (n, dq, dp) = (grid.np, grid.dq, grid.dp);
    let at = |i: usize, j: usize| v[grid.idx(i, j)];
    let mut out = vec![0.0; v.len()];
    for i in 0..=grid.nq {
        let surface = -(at(i, n + 1) - at(i, n - 1)) / (2.0 * dp) / bg.height_p[n].powi(3) + mu * bg.rho[n] * at(i, n);
        if grid.is_far(i) {
            for j in 0..=n + 1 {
                out[grid.idx(i, j)] = if j == n {
                    surface
                } else {
                    match grid.farfield {
                        FarField::DirichletZero => at(i, j),
                        FarField::RobinDecay { rate } => {
                            let (a, b) = if i == 0 { (1, 2) } else { (i - 1, i - 2) };
                            rate * at(i, j) + (3.0 * at(i, j) - 4.0 * at(a, j) + at(b, j)) / (2.0 * dq)
                        }
                    }
                };
            }
            continue;
        }
        let (l, r) = if i == 0 && grid.symmetry == Symmetry::Even { (1, 1) } else { (i - 1, i + 1) };
        out[grid.idx(i, 0)] = at(i, 0);
        for j in 1..=n {
            let (hp, hpp) = (bg.height_p[j], bg.height_pp[j]);
            let wpp = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (dp * dp);
            let wqq = (at(r, j) - 2.0 * at(i, j) + at(l, j)) / (dq * dq);
            let wp = (at(i, j + 1) - at(i, j - 1)) / (2.0 * dp);
            out[grid.idx(i, j)] = wpp + hp * hp * wqq - 3.0 * hpp / hp * wp - mu * bg.rho_p[j] * hp.powi(3) * at(i, j);
        }
        out[grid.idx(i, n + 1)] = surface;
    }
    out
}

#[test]
fn jacobian_at_rest_is_the_linear_operator() {
    let p = problem(-0.3, 32);
    // sheared background so that the H_pp term is exercised
    let sheared = strata_core::profiles::compute_background(
        &strata_core::profiles::normalize_shear(&strata_core::profiles::StratifiedConfig::semi_lagrangian(
            strata_core::profiles::Profile::Linear { value: 1.0, slope: -0.3 },
            strata_core::profiles::Profile::Exponential { value: 1.0, rate: 0.7 },
            32,
        ))
        .unwrap(),
    )
    .unwrap();
    for bg in [&p.bg, &sheared] {
        for grid in grids(bg) {
            let state = WaveState::laminar(&grid, p.spec.f_cr);
            let jac = jacobian(&state, bg, &grid).unwrap();
            let v: Vec<f64> = (0..grid.unknowns())
                .map(|k| {
                    let (i, j) = (k / grid.stride(), (k % grid.stride()).min(grid.np));
                    let q = grid.q_nodes[i];
                    let cutoff = (-(q / 6.0).powi(2)).exp();
                    (0.8 * q).cos() * p.spec.phi_cr[j] * cutoff
                })
                .collect();
            let got = jac.apply(&v);
            let want = linear_operator(bg, &grid, state.froude, &v);
            let err: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(sup(&err) <= 1e-12 * sup(&want), "{:?}: {:e}", grid.farfield, sup(&err));
        }
    }
}

#[test]
fn residual_is_quadratic_along_the_critical_mode() {
    let p = problem(-0.3, 64);
    let grid = StripGrid::new(40.0, 80, &p.bg, FarField::DirichletZero).unwrap();
    let laminar = WaveState::laminar(&grid, p.spec.f_cr);
    let jac = jacobian(&laminar, &p.bg, &grid).unwrap();
    let mode = Array2::from_shape_fn((grid.nq + 1, grid.np + 1), |(i, j)| {
        let q = grid.q_nodes[i];
        let bump = if q < 20.0 { 0.5 * (1.0 + (std::f64::consts::PI * q / 20.0).cos()) } else { 0.0 };
        p.spec.phi_cr[j] * bump
    });
    let remainder = |delta: f64| {
        let s = WaveState::with_consistent_ghost(&mode * delta, p.spec.f_cr, &p.bg, &grid);
        let x = s.pack(&grid);
        let r = residual_packed(&x, s.froude, &p.bg, &grid).unwrap().values;
        let lin = jac.apply(&x);
        sup(&r.iter().zip(&lin).map(|(a, b)| a - b).collect::<Vec<_>>())
    };
    let (r1, r2) = (remainder(1e-2), remainder(1e-3));
    let slope = (r1 / r2).log10();
    assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn laminar_guess_needs_no_iterations() {
    let p = problem(0.0, 32);
    let grid = strip(&p, 0.02, 0.5);
    let (out, rep) = newton_solve_report(&WaveState::laminar(&grid, 1.2), &p.bg, &grid, &NewtonOptions::default()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert!(out.converged && out.w.iter().all(|&v| v == 0.0));
}

#[test]
fn crushed_guess_reports_stagnation() {
    let p = problem(0.0, 32);
    let grid = strip(&p, 0.02, 0.5);
    let mut guess = WaveState::laminar(&grid, 1.2);
    guess.w[[5, 20]] = 0.5;
    guess.w[[5, 18]] = 0.6;
    match newton_solve(&guess, &p.bg, &grid, &NewtonOptions::default()) {
        Err(Error::Stagnation { i: 5, j: 19, value }) => assert!(value <= 0.0),
        other => panic!("expected stagnation, got {other:?}"),
    }
}

#[test]
fn reference_waves_converge_quickly() {
    for wave in [constant_wave(), linear_wave()] {
        assert!(wave.iterations <= 8, "{} iterations", wave.iterations);
        assert!(wave.state.converged);
        assert!(wave.state.residual_norm < 1e-10);
        assert!(wave.state.froude > wave.problem.spec.f_cr);
        let grid = &wave.grid;
        for i in 0..grid.nq {
            for j in 1..=grid.np {
                assert!(wave.state.w[[i, j]] > 0.0, "w({i},{j}) = {}", wave.state.w[[i, j]]);
            }
        }
    }
}

#[test]
fn refine_grid_requires_converged_input_and_matching_background() {
    let p = problem(0.0, 32);
    let grid = strip(&p, 0.04, 1.0);
    let guess = build_guess(&p.bg, &p.spec, &p.consts, 0.04, &grid).unwrap().into_state(&p.bg, &grid);
    let fine_bg = background(0.0, 64);
    assert!(matches!(
        refine_grid(&guess, &grid, &fine_bg, 2, &NewtonOptions::default()),
        Err(Error::Precondition(_))
    ));
    let state = newton_solve(&guess, &p.bg, &grid, &NewtonOptions::default()).unwrap();
    assert!(matches!(
        refine_grid(&state, &grid, &p.bg, 2, &NewtonOptions::default()),
        Err(Error::Precondition(_))
    ));
    let laminar = WaveState::laminar(&grid, 1.1);
    let (fine, fgrid) = refine_grid(&laminar, &grid, &fine_bg, 2, &NewtonOptions::default()).unwrap();
    assert_eq!(fgrid.nq, 2 * grid.nq);
    assert!(fine.w.iter().all(|&v| v == 0.0));
}

#[test]
fn crest_height_converges_at_second_order() {
    let eps = 0.04;
    let p = problem(0.0, 32);
    let grid = strip(&p, eps, 1.0);
    let guess = build_guess(&p.bg, &p.spec, &p.consts, eps, &grid).unwrap().into_state(&p.bg, &grid);
    let opts = NewtonOptions::default();
    let s0 = newton_solve(&guess, &p.bg, &grid, &opts).unwrap();
    let bg1 = background(0.0, 64);
    let (s1, g1) = refine_grid(&s0, &grid, &bg1, 2, &opts).unwrap();
    let bg2 = background(0.0, 128);
    let (s2, g2) = refine_grid(&s1, &g1, &bg2, 2, &opts).unwrap();
    let (a0, a1, a2) = (s0.amplitude(&grid), s1.amplitude(&g1), s2.amplitude(&g2));
    let ratio = (a1 - a0) / (a2 - a1);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}: {a0} {a1} {a2}");
}

#[test]
fn full_strip_solution_is_even_and_matches_half_strip() {
    let eps = 0.04;
    let p = problem(-0.3, 32);
    let half = strip(&p, eps, 0.5);
    let full = StripGrid::full_strip(half.q_max(), half.nq, &p.bg, FarField::DirichletZero).unwrap();
    let opts = NewtonOptions::default();
    let solve = |g: &StripGrid| {
        let guess = build_guess(&p.bg, &p.spec, &p.consts, eps, g).unwrap().into_state(&p.bg, g);
        newton_solve(&guess, &p.bg, g, &opts).unwrap()
    };
    let (sh, sf) = (solve(&half), solve(&full));
    let c = full.crest_index();
    assert_eq!(c, half.nq);
    let mut asym = 0.0f64;
    let mut diff = 0.0f64;
    for k in 0..=half.nq {
        for j in 0..=full.np {
            asym = asym.max((sf.w[[c + k, j]] - sf.w[[c - k, j]]).abs());
            diff = diff.max((sf.w[[c + k, j]] - sh.w[[k, j]]).abs());
        }
    }
    assert!(asym < 1e-8, "{asym:e}");
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn mismatched_shapes_are_input_errors() {
    let p = problem(0.0, 32);
    let grid = strip(&p, 0.04, 1.0);
    let other = background(0.0, 64);
    let state = WaveState::laminar(&grid, 1.1);
    assert!(matches!(residual(&state, &other, &grid), Err(Error::Input(_))));
    let mut bad = state.clone();
    bad.ghost.pop();
    assert!(matches!(residual(&bad, &p.bg, &grid), Err(Error::Input(_))));
}
