//! Pseudo-arclength continuation of the solitary-wave branch from small
//! amplitude toward stagnation.
//!
//! The branch is traced in `(w, F)` with the weighted inner product
//! `<a, b> = ∫∫ a b dq dp + σ² a_F b_F` over the computational strip. Each
//! step predicts along the unit tangent and corrects with Newton on the
//! bordered system (height residual + arclength constraint).

use crate::diagnostics::{check_flow_force, nodal_properties, NodalFlags};
use crate::error::{Error, Result};
use crate::height_solver::{
    jacobian_packed, newton_solve, residual_packed, slopes, FarField, JacobianMatrix, NewtonOptions,
    StripGrid, WaveState,
};
use crate::numerics::quadrature_weights;
use crate::profiles::BackgroundFlow;
use crate::small_amplitude::{build_guess, ReducedConstants, DECAY_LENGTHS};
use crate::sturm_liouville::{decay_rate, SpectrumReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarFieldChoice {
    DirichletZero,
    /// Robin condition with the decay rate of the starting point.
    RobinDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationOptions {
    pub epsilon_start: f64,
    pub dq: f64,
    pub farfield: FarFieldChoice,
    pub sigma: f64,
    pub ds_initial: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub hp_threshold: f64,
    pub max_points: usize,
    /// Extend the strip when `|w(Q_max - tail_probe, 0)|` exceeds this.
    pub tail_tol: f64,
    pub tail_probe: f64,
    pub extension: f64,
    pub q_max_limit: f64,
    pub corrector_max_iter: usize,
    /// Reject a step when `max h_p` changes by more than this factor.
    pub max_hp_growth: f64,
    pub newton: NewtonOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            epsilon_start: 0.005,
            dq: 0.5,
            farfield: FarFieldChoice::DirichletZero,
            sigma: 1.0,
            ds_initial: 0.02,
            ds_min: 1e-6,
            ds_max: 0.25,
            hp_threshold: 50.0,
            max_points: 1000,
            tail_tol: 1e-8,
            tail_probe: 5.0,
            extension: 10.0,
            q_max_limit: 1000.0,
            corrector_max_iter: 10,
            max_hp_growth: 1.5,
            newton: NewtonOptions::default(),
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must be positive, got {v}")))
            }
        };
        pos("epsilon_start", self.epsilon_start)?;
        pos("dq", self.dq)?;
        pos("sigma", self.sigma)?;
        pos("ds_initial", self.ds_initial)?;
        pos("ds_min", self.ds_min)?;
        pos("ds_max", self.ds_max)?;
        pos("hp_threshold", self.hp_threshold)?;
        pos("tail_tol", self.tail_tol)?;
        pos("extension", self.extension)?;
        if !(self.max_hp_growth > 1.0) {
            return Err(Error::Input("max_hp_growth must exceed 1".into()));
        }
        if !(self.ds_min <= self.ds_initial && self.ds_initial <= self.ds_max) {
            return Err(Error::Input("need ds_min <= ds_initial <= ds_max".into()));
        }
        if self.max_points == 0 {
            return Err(Error::Input("max_points must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// `sup|w| + sup|w_q| + sup|w_p|`.
    pub norm_w: f64,
    pub min_hp: f64,
    pub max_hp: f64,
    pub froude: f64,
    pub f_minus_fcr: f64,
    /// `norm_w + 1/min_hp + F + 1/(F - F_cr)`.
    pub n_s: f64,
    pub amplitude: f64,
    pub flow_force_drift: f64,
}

pub fn monitors(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid, f_cr: f64) -> Monitors {
    let sl = slopes(state, bg, grid);
    let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
    let mut wp = sl.h_p.clone();
    for mut row in wp.rows_mut() {
        for (v, h) in row.iter_mut().zip(&bg.height_p) {
            *v -= h;
        }
    }
    let norm_w = sup(&mut state.w.iter().copied()) + sup(&mut sl.h_q.iter().copied()) + sup(&mut wp.iter().copied());
    let min_hp = sl.h_p.iter().copied().fold(f64::INFINITY, f64::min);
    let max_hp = sl.h_p.iter().copied().fold(0.0, f64::max);
    let f = state.froude;
    Monitors {
        norm_w,
        min_hp,
        max_hp,
        froude: f,
        f_minus_fcr: f - f_cr,
        n_s: norm_w + 1.0 / min_hp + f + 1.0 / (f - f_cr),
        amplitude: state.amplitude(grid),
        flow_force_drift: check_flow_force(state, bg, grid),
    }
}

/// Sign used to keep the tangent direction continuous across restarts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub froude: f64,
    pub amplitude: f64,
}

/// An accepted branch point with everything needed to resume from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPoint {
    pub index: usize,
    pub s: f64,
    pub state: WaveState,
    pub grid: StripGrid,
    pub monitors: Monitors,
    pub nodal: NodalFlags,
    /// Supercritical, elevation and all nodal flags.
    pub gate_passed: bool,
    pub ds: f64,
    pub streak: usize,
    pub orientation: Orientation,
    /// Tangent the next step starts from. Stored so that a resumed run takes
    /// bit-identical steps.
    pub tangent: Option<Tangent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    StagnationThreshold,
    NewtonFailure,
    StepUnderflow,
    UserLimit,
    ShelfDetected,
    BranchPoint,
    DomainLimit,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::StagnationThreshold => "stagnation_threshold",
            Self::NewtonFailure => "newton_failure",
            Self::StepUnderflow => "step_underflow",
            Self::UserLimit => "user_limit",
            Self::ShelfDetected => "shelf_detected",
            Self::BranchPoint => "branch_point",
            Self::DomainLimit => "domain_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub index: usize,
    pub s: f64,
    #[serde(rename = "F")]
    pub froude: f64,
    pub amplitude: f64,
    pub min_hp: f64,
    pub max_hp: f64,
    #[serde(rename = "N_s")]
    pub n_s: f64,
    pub flow_force_drift: f64,
    pub norm_w: f64,
    pub f_minus_fcr: f64,
    pub q_max: f64,
    pub gate_passed: bool,
}

impl From<&ContinuationPoint> for CurveRow {
    fn from(p: &ContinuationPoint) -> Self {
        let m = &p.monitors;
        Self {
            index: p.index,
            s: p.s,
            froude: m.froude,
            amplitude: m.amplitude,
            min_hp: m.min_hp,
            max_hp: m.max_hp,
            n_s: m.n_s,
            flow_force_drift: m.flow_force_drift,
            norm_w: m.norm_w,
            f_minus_fcr: m.f_minus_fcr,
            q_max: p.grid.q_max(),
            gate_passed: p.gate_passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveLog {
    pub rows: Vec<CurveRow>,
    pub termination_reason: Option<TerminationReason>,
    /// Human-readable detail for the termination.
    pub detail: String,
}

impl CurveLog {
    pub fn flagged_points(&self) -> usize {
        self.rows.iter().filter(|r| !r.gate_passed).count()
    }
}

/// Packed-vector weights of the `w` part of the arclength inner product.
pub fn norm_weights(bg: &BackgroundFlow, grid: &StripGrid) -> Vec<f64> {
    let wq = quadrature_weights(grid.nq, grid.dq, 2);
    let wp = bg.weights();
    let mut out = vec![0.0; grid.unknowns()];
    for i in 0..=grid.nq {
        for j in 0..=grid.np {
            out[grid.idx(i, j)] = wq[i] * wp[j];
        }
    }
    out
}

/// A direction in `(w, F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub x: Vec<f64>,
    pub froude: f64,
}

fn inner(a: &[f64], b: &[f64], wt: &[f64]) -> f64 {
    a.iter().zip(b).zip(wt).map(|((x, y), w)| x * y * w).sum()
}

fn amplitude_component(t: &Tangent, grid: &StripGrid) -> f64 {
    t.x[grid.idx(grid.crest_index(), grid.np)]
}

/// Solves `[J J_F; cᵀ c_F] (dx, dF) = (r, r_F)` by block elimination.
fn bordered_solve(
    jac: &JacobianMatrix,
    c: &[f64],
    c_f: f64,
    r: &[f64],
    r_f: f64,
    index: usize,
) -> Result<(Vec<f64>, f64)> {
    let lu = jac.factorize()?;
    let a = lu.solve(&jac.d_froude).map_err(|e| Error::Consistency(e.to_string()))?;
    let b = lu.solve(r).map_err(|e| Error::Consistency(e.to_string()))?;
    let ca: f64 = a.iter().zip(c).map(|(x, y)| x * y).sum();
    let cb: f64 = b.iter().zip(c).map(|(x, y)| x * y).sum();
    let denom = c_f - ca;
    let scale = c_f.abs() + ca.abs();
    if !(denom.abs() > 1e-12 * scale) {
        return Err(Error::BranchPoint(index));
    }
    let df = (r_f - cb) / denom;
    let dx = b.iter().zip(&a).map(|(bi, ai)| bi - ai * df).collect();
    Ok((dx, df))
}

/// Unit tangent at a converged state. Oriented by `prev` when given (same
/// grid), else by `orient`, else toward growing amplitude.
pub fn tangent(
    state: &WaveState,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    sigma: f64,
    prev: Option<&Tangent>,
    orient: Option<Orientation>,
) -> Result<Tangent> {
    let x = state.pack(grid);
    let jac = jacobian_packed(&x, state.froude, bg, grid)?;
    let wt = norm_weights(bg, grid);
    let zero = vec![0.0; x.len()];
    // Border with the previous tangent when available, else with e_F.
    let (c, c_f) = match prev {
        Some(p) => (p.x.iter().zip(&wt).map(|(a, w)| a * w).collect::<Vec<_>>(), sigma * sigma * p.froude),
        None => (zero.clone(), 1.0),
    };
    let (dx, df) = bordered_solve(&jac, &c, c_f, &zero, 1.0, 0)?;
    let norm = (inner(&dx, &dx, &wt) + sigma * sigma * df * df).sqrt();
    let mut t = Tangent {
        x: dx.iter().map(|v| v / norm).collect(),
        froude: df / norm,
    };
    let flip = match (prev, orient) {
        (Some(p), _) => inner(&t.x, &p.x, &wt) + sigma * sigma * t.froude * p.froude < 0.0,
        (None, Some(o)) => {
            let a = amplitude_component(&t, grid);
            if t.froude.abs() > 1e-8 && o.froude.abs() > 1e-8 {
                t.froude * o.froude < 0.0
            } else {
                a * o.amplitude < 0.0
            }
        }
        (None, None) => amplitude_component(&t, grid) < 0.0,
    };
    if flip {
        t.x.iter_mut().for_each(|v| *v = -*v);
        t.froude = -t.froude;
    }
    Ok(t)
}

/// Predictor along `t` followed by the bordered corrector.
pub fn step(
    state: &WaveState,
    t: &Tangent,
    ds: f64,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    opts: &ContinuationOptions,
) -> Result<WaveState> {
    let x0 = state.pack(grid);
    let wt = norm_weights(bg, grid);
    let s2 = opts.sigma * opts.sigma;
    let mut x: Vec<f64> = x0.iter().zip(&t.x).map(|(a, b)| a + ds * b).collect();
    let mut f = state.froude + ds * t.froude;
    let c: Vec<f64> = t.x.iter().zip(&wt).map(|(a, w)| a * w).collect();
    let c_f = s2 * t.froude;
    let constraint = |x: &[f64], f: f64| -> f64 {
        let dx: f64 = x.iter().zip(&x0).zip(&c).map(|((a, b), ci)| (a - b) * ci).sum();
        dx + c_f * (f - state.froude) - ds
    };
    let mut history = Vec::new();
    for it in 0..=opts.corrector_max_iter {
        if !(f > 0.0) {
            return Err(Error::Nonconvergence { iterations: it, history });
        }
        let r = residual_packed(&x, f, bg, grid)?;
        let n = constraint(&x, f);
        let norm = r.sup_norm();
        history.push(norm);
        if norm < opts.newton.tol.max(r.floor) && n.abs() < 1e-12 * ds.max(1.0) {
            let mut out = WaveState::unpack(&x, f, grid);
            out.converged = true;
            out.residual_norm = norm;
            return Ok(out);
        }
        if it == opts.corrector_max_iter {
            break;
        }
        let jac = jacobian_packed(&x, f, bg, grid)?;
        let rhs: Vec<f64> = r.values.iter().map(|v| -v).collect();
        let (dx, df) = bordered_solve(&jac, &c, c_f, &rhs, -n, it)?;
        // halve into the admissible region if the full step stagnates
        let mut lambda = 1.0;
        loop {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let ft = f + lambda * df;
            match residual_packed(&xt, ft, bg, grid) {
                Ok(_) => {
                    x = xt;
                    f = ft;
                    break;
                }
                Err(Error::Stagnation { .. }) if lambda > 1.0 / 64.0 => lambda *= 0.5,
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::Nonconvergence {
        iterations: opts.corrector_max_iter,
        history,
    })
}

/// `w` on the surface at `Q_max - probe`.
fn tail_value(state: &WaveState, grid: &StripGrid, probe: f64) -> f64 {
    let q = grid.q_max() - probe;
    let i = ((q - grid.q_nodes[0]) / grid.dq).round().clamp(0.0, grid.nq as f64) as usize;
    state.w[[i, grid.np]]
}

/// Pads `state` with zeros onto the extended grid.
pub fn pad_state(state: &WaveState, from: &StripGrid, to: &StripGrid, bg: &BackgroundFlow) -> WaveState {
    let mut w = ndarray::Array2::zeros((to.nq + 1, to.np + 1));
    let offset = match to.symmetry {
        crate::height_solver::Symmetry::Even => 0,
        crate::height_solver::Symmetry::Full => (to.nq - from.nq) / 2,
    };
    for i in 0..=from.nq {
        for j in 0..=from.np {
            w[[i + offset, j]] = state.w[[i, j]];
        }
    }
    WaveState::with_consistent_ghost(w, state.froude, bg, to)
}

/// Largest positive `w_q` on `q > 0` above the slack, if any: the shelf
/// sentinel for a monotone tail.
pub fn shelf_violation(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid, slack: f64) -> Option<(usize, usize, f64)> {
    let sl = slopes(state, bg, grid);
    let c = grid.crest_index();
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in c + 1..=grid.nq {
        for j in 1..=grid.np {
            let v = sl.h_q[[i, j]];
            if v > slack && worst.map_or(true, |(_, _, m)| v > m) {
                worst = Some((i, j, v));
            }
        }
    }
    worst
}

fn accept(
    index: usize,
    s: f64,
    state: WaveState,
    grid: StripGrid,
    bg: &BackgroundFlow,
    f_cr: f64,
    ds: f64,
    streak: usize,
    t: &Tangent,
    tol: f64,
) -> ContinuationPoint {
    let orientation = Orientation {
        froude: t.froude,
        amplitude: amplitude_component(t, &grid),
    };
    let mut p = ContinuationPoint::restore(index, s, state, grid, bg, f_cr, ds, streak, orientation, tol);
    p.tangent = Some(t.clone());
    p
}

impl ContinuationPoint {
    /// Rebuilds a point from stored data, recomputing monitors and flags.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        index: usize,
        s: f64,
        state: WaveState,
        grid: StripGrid,
        bg: &BackgroundFlow,
        f_cr: f64,
        ds: f64,
        streak: usize,
        orientation: Orientation,
        tol: f64,
    ) -> Self {
        let monitors = monitors(&state, bg, &grid, f_cr);
        let nodal = nodal_properties(&state, bg, &grid, tol);
        let gate_passed = monitors.froude > f_cr && nodal.all_pass();
        Self {
            index,
            s,
            state,
            grid,
            monitors,
            nodal,
            gate_passed,
            ds,
            streak,
            orientation,
            tangent: None,
        }
    }
}

/// Converged starting point: `build_guess(ε_start)` followed by Newton on a
/// strip spanning the required number of decay lengths.
pub fn start_point(
    bg: &BackgroundFlow,
    spec: &SpectrumReport,
    consts: &ReducedConstants,
    opts: &ContinuationOptions,
) -> Result<(ContinuationPoint, Tangent)> {
    opts.validate()?;
    let eps = opts.epsilon_start;
    let q_max = (DECAY_LENGTHS / consts.decay_rate(eps)).max(crate::height_solver::MIN_Q_MAX);
    let froude = 1.0 / (spec.mu_cr - eps).sqrt();
    let farfield = match opts.farfield {
        FarFieldChoice::DirichletZero => FarField::DirichletZero,
        FarFieldChoice::RobinDecay => FarField::RobinDecay { rate: decay_rate(bg, froude)? },
    };
    let grid = StripGrid::with_spacing(q_max, opts.dq, bg, farfield)?;
    let guess = build_guess(bg, spec, consts, eps, &grid)?.into_state(bg, &grid);
    let state = newton_solve(&guess, bg, &grid, &opts.newton)?;
    let t = tangent(&state, bg, &grid, opts.sigma, None, None)?;
    let p = accept(0, 0.0, state, grid, bg, spec.f_cr, opts.ds_initial, 0, &t, opts.newton.tol);
    Ok((p, t))
}

/// Drives the branch from `start`, calling `on_point` for every accepted
/// point (including `start` when `emit_start`).
pub struct Tracer<'a> {
    pub bg: &'a BackgroundFlow,
    pub f_cr: f64,
    pub opts: &'a ContinuationOptions,
}

impl Tracer<'_> {
    pub fn run(
        &self,
        start: ContinuationPoint,
        start_tangent: Option<Tangent>,
        emit_start: bool,
        on_point: &mut dyn FnMut(&ContinuationPoint) -> Result<()>,
    ) -> Result<(TerminationReason, String)> {
        let opts = self.opts;
        let bg = self.bg;
        let slack = 10.0 * opts.newton.tol;
        if emit_start {
            on_point(&start)?;
        }
        let mut accepted = start.index + 1;
        let mut cur = start;
        let mut t = match start_tangent.or_else(|| cur.tangent.clone()) {
            Some(t) => t,
            None => match tangent(&cur.state, bg, &cur.grid, opts.sigma, None, Some(cur.orientation)) {
                Ok(t) => t,
                Err(e) => return Ok((TerminationReason::BranchPoint, e.to_string())),
            },
        };
        let mut ds = cur.ds;
        let mut streak = cur.streak;
        loop {
            if cur.monitors.max_hp > opts.hp_threshold {
                return Ok((
                    TerminationReason::StagnationThreshold,
                    format!("max h_p = {} exceeds {}", cur.monitors.max_hp, opts.hp_threshold),
                ));
            }
            if let Some((i, j, v)) = shelf_violation(&cur.state, bg, &cur.grid, slack) {
                return Ok((
                    TerminationReason::ShelfDetected,
                    format!("w_q = {v:e} > 0 at q = {}, node ({i}, {j})", cur.grid.q_nodes[i]),
                ));
            }
            if accepted >= opts.max_points {
                return Ok((TerminationReason::UserLimit, format!("{accepted} points")));
            }
            let next = match step(&cur.state, &t, ds, bg, &cur.grid, opts) {
                Ok(s) => s,
                Err(Error::BranchPoint(_)) | Err(Error::SingularJacobian(_)) if ds / 2.0 < opts.ds_min => {
                    return Ok((TerminationReason::BranchPoint, "singular bordered system".into()));
                }
                Err(Error::Nonconvergence { .. })
                | Err(Error::Stagnation { .. })
                | Err(Error::SingularJacobian(_))
                | Err(Error::BranchPoint(_)) => {
                    ds *= 0.5;
                    streak = 0;
                    if ds < opts.ds_min {
                        return Ok((TerminationReason::StepUnderflow, format!("ds = {ds:e} below ds_min")));
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let hp_new = slopes(&next, bg, &cur.grid).h_p.iter().copied().fold(0.0, f64::max);
            let ratio = hp_new / cur.monitors.max_hp;
            if ratio > opts.max_hp_growth || ratio < 1.0 / opts.max_hp_growth {
                ds *= 0.5;
                streak = 0;
                if ds < opts.ds_min {
                    return Ok((TerminationReason::StepUnderflow, format!("ds = {ds:e} below ds_min")));
                }
                continue;
            }
            let mut state = next;
            let mut grid = cur.grid.clone();
            let mut new_t = match tangent(&state, bg, &grid, opts.sigma, Some(&t), None) {
                Ok(nt) => nt,
                Err(_) => {
                    ds *= 0.5;
                    streak = 0;
                    if ds < opts.ds_min {
                        return Ok((TerminationReason::BranchPoint, "singular bordered system".into()));
                    }
                    continue;
                }
            };
            // widen the strip while the tail has not decayed
            while tail_value(&state, &grid, opts.tail_probe).abs() > opts.tail_tol {
                let wider = grid.extended(opts.extension, bg)?;
                if wider.q_max() > opts.q_max_limit {
                    return Ok((
                        TerminationReason::DomainLimit,
                        format!("Q_max would exceed {}", opts.q_max_limit),
                    ));
                }
                let padded = pad_state(&state, &grid, &wider, bg);
                state = match newton_solve(&padded, bg, &wider, &opts.newton) {
                    Ok(s) => s,
                    Err(e) => return Ok((TerminationReason::NewtonFailure, e.to_string())),
                };
                let orient = Orientation {
                    froude: new_t.froude,
                    amplitude: amplitude_component(&new_t, &grid),
                };
                grid = wider;
                new_t = match tangent(&state, bg, &grid, opts.sigma, None, Some(orient)) {
                    Ok(nt) => nt,
                    Err(e) => return Ok((TerminationReason::BranchPoint, e.to_string())),
                };
            }
            streak += 1;
            let used = ds;
            if streak >= 2 {
                ds = (ds * 1.3).min(opts.ds_max);
                streak = 0;
            }
            let point = accept(accepted, cur.s + used, state, grid, bg, self.f_cr, ds, streak, &new_t, opts.newton.tol);
            on_point(&point)?;
            accepted += 1;
            cur = point;
            t = new_t;
        }
    }
}

/// Full run from `build_guess(ε_start)`; returns the curve log and the last
/// accepted point.
pub fn run(
    bg: &BackgroundFlow,
    spec: &SpectrumReport,
    consts: &ReducedConstants,
    opts: &ContinuationOptions,
) -> Result<(CurveLog, ContinuationPoint)> {
    let mut rows = Vec::new();
    let (start, t) = start_point(bg, spec, consts, opts)?;
    let mut last = start.clone();
    let tracer = Tracer {
        bg,
        f_cr: spec.f_cr,
        opts,
    };
    let (reason, detail) = tracer.run(start, Some(t), true, &mut |p| {
        rows.push(CurveRow::from(p));
        last = p.clone();
        Ok(())
    })?;
    Ok((
        CurveLog {
            rows,
            termination_reason: Some(reason),
            detail,
        },
        last,
    ))
}
