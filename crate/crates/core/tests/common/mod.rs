#![allow(dead_code)]

use std::sync::OnceLock;

use strata_core::height_solver::{newton_solve_report, FarField, NewtonOptions, StripGrid, WaveState, MIN_Q_MAX};
use strata_core::profiles::{compute_background, normalize_shear, BackgroundFlow, Profile, StratifiedConfig};
use strata_core::small_amplitude::{build_guess, compute_constants, ReducedConstants, DECAY_LENGTHS};
use strata_core::sturm_liouville::{critical_spectrum, SpectrumOptions, SpectrumReport};

/// Reference resolution.
pub const NP: usize = 40;
pub const DQ: f64 = 0.5;

pub struct Problem {
    pub bg: BackgroundFlow,
    pub spec: SpectrumReport,
    pub consts: ReducedConstants,
}

/// `ρ = 1 + slope·p`, `H_p ≡ 1` after normalization.
pub fn background(slope: f64, np: usize) -> BackgroundFlow {
    let cfg = StratifiedConfig::semi_lagrangian(Profile::Linear { value: 1.0, slope }, Profile::Constant { value: 1.0 }, np);
    compute_background(&normalize_shear(&cfg).unwrap()).unwrap()
}

pub fn problem(slope: f64, np: usize) -> Problem {
    let bg = background(slope, np);
    let spec = critical_spectrum(&bg, &SpectrumOptions::default()).unwrap();
    let consts = compute_constants(&bg, &spec).unwrap();
    Problem { bg, spec, consts }
}

pub fn strip(p: &Problem, epsilon: f64, dq: f64) -> StripGrid {
    let q_max = (DECAY_LENGTHS / p.consts.decay_rate(epsilon)).max(MIN_Q_MAX);
    StripGrid::with_spacing(q_max, dq, &p.bg, FarField::DirichletZero).unwrap()
}

pub struct Wave {
    pub problem: Problem,
    pub grid: StripGrid,
    pub state: WaveState,
    pub iterations: usize,
}

pub fn solve_small(slope: f64, epsilon: f64, np: usize, dq: f64) -> Wave {
    let problem = problem(slope, np);
    let grid = strip(&problem, epsilon, dq);
    let guess = build_guess(&problem.bg, &problem.spec, &problem.consts, epsilon, &grid)
        .unwrap()
        .into_state(&problem.bg, &grid);
    let (state, rep) = newton_solve_report(&guess, &problem.bg, &grid, &NewtonOptions::default()).unwrap();
    Wave {
        problem,
        grid,
        state,
        iterations: rep.iterations,
    }
}

/// Converged ε = 0.01 wave on the constant-density reference problem.
pub fn constant_wave() -> &'static Wave {
    static W: OnceLock<Wave> = OnceLock::new();
    W.get_or_init(|| solve_small(0.0, 0.01, NP, DQ))
}

/// Converged ε = 0.01 wave on the linear-density reference problem.
pub fn linear_wave() -> &'static Wave {
    static W: OnceLock<Wave> = OnceLock::new();
    W.get_or_init(|| solve_small(-0.3, 0.01, NP, DQ))
}

/// Bisection on a sign change, independent of the library's root finders.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Trapezoid rule on `n` uniform intervals.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for k in 1..n {
        s += f(a + k as f64 * h);
    }
    s * h
}
