//! A-posteriori checks on converged waves: flow-force conservation, the two
//! Froude identities, the Froude upper bound, nodal sign properties,
//! pressure/velocity bounds and the conjugate-flow scan.

use crate::error::{Error, Result};
use crate::eulerian::{reconstruct, EulerianField};
use crate::height_solver::{slopes, StripGrid, Symmetry, WaveState};
use crate::numerics::{bisect, quadrature_weights};
use crate::profiles::{flow_force_excess, BackgroundFlow};
use crate::sturm_liouville::{solve_phi, SpectrumReport};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    NotComputed,
}

impl Flag {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Flag::Pass
        } else {
            Flag::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Flag::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsOptions {
    pub tol_flow_force: f64,
    pub tol_identity: f64,
    pub tol_bound: f64,
    /// Newton tolerance; nodal signs are ignored below ten times this.
    pub tol_newton: f64,
    pub conjugate_seeds: usize,
    pub conjugate_tol: f64,
    /// Identities need `|η(Q_max - 5)|` below this fraction of the crest.
    pub tail_fraction: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            tol_flow_force: 1e-4,
            tol_identity: 5e-3,
            tol_bound: 1e-8,
            tol_newton: 1e-10,
            conjugate_seeds: 200,
            conjugate_tol: 1e-8,
            tail_fraction: 1e-6,
        }
    }
}

fn q_weights(grid: &StripGrid) -> Vec<f64> {
    let mut w = quadrature_weights(grid.nq, grid.dq, 2);
    if grid.symmetry == Symmetry::Even {
        // mirror the half strip onto the full line
        w.iter_mut().for_each(|v| *v *= 2.0);
    }
    w
}

/// `max_q |𝒮(q) - S_H| / |S_H|`.
pub fn check_flow_force(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> f64 {
    let sl = slopes(state, bg, grid);
    let wts = bg.weights();
    let s_h = bg.s_h(state.froude);
    let n1 = grid.np + 1;
    (0..=grid.nq)
        .map(|i| {
            let h: Vec<f64> = (0..n1).map(|j| bg.height[j] + state.w[[i, j]]).collect();
            let hp = sl.h_p.row(i).to_vec();
            let hq = sl.h_q.row(i).to_vec();
            (flow_force_excess(&h, &hp, &hq, state.froude, bg, &wts) / s_h).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FroudeIdentity {
    /// `∫∫ [H_p³w_q² + (H_p+2h_p)w_p²]/(2h_p²H_p³) Φ_p dp dq`.
    pub energy: f64,
    /// `A(1/F²)`.
    pub a_value: f64,
    /// `∫ η dq` over the full line.
    pub eta_integral: f64,
    /// `|energy + A ∫η| / energy`.
    pub residual: f64,
    /// Truncation term `∫ (h_q/h_p) Φ dp` at both far ends.
    pub boundary_term: f64,
}

fn tails_decayed(state: &WaveState, grid: &StripGrid, fraction: f64) -> bool {
    let amp = state.amplitude(grid).abs();
    let probe = grid.q_max() - 5.0;
    let i = ((probe - grid.q_nodes[0]) / grid.dq).round().clamp(0.0, grid.nq as f64) as usize;
    let mut tail = state.w[[i, grid.np]].abs();
    if grid.symmetry == Symmetry::Full {
        tail = tail.max(state.w[[grid.nq - i, grid.np]].abs());
    }
    amp > 0.0 && tail <= fraction * amp
}

/// Full-line Froude identity on a decayed solitary wave; `None` when the
/// tails have not decayed.
pub fn froude_identity(
    state: &WaveState,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    tail_fraction: f64,
) -> Option<FroudeIdentity> {
    if !tails_decayed(state, grid, tail_fraction) {
        return None;
    }
    let mu = 1.0 / (state.froude * state.froude);
    let shot = solve_phi(bg, mu);
    let sl = slopes(state, bg, grid);
    let wp_w = bg.weights();
    let wq_w = q_weights(grid);
    let n = grid.np;
    let mut energy = 0.0;
    for i in 0..=grid.nq {
        for j in 0..=n {
            let hp_bg = bg.height_p[j];
            let hp = sl.h_p[[i, j]];
            let wq = sl.h_q[[i, j]];
            let wp = hp - hp_bg;
            let e = (hp_bg.powi(3) * wq * wq + (hp_bg + 2.0 * hp) * wp * wp) / (2.0 * hp * hp * hp_bg.powi(3));
            energy += wq_w[i] * wp_w[j] * e * shot.phi_p[j];
        }
    }
    let eta_integral: f64 = (0..=grid.nq).map(|i| wq_w[i] * state.w[[i, n]]).sum();
    let column_term = |i: usize| -> f64 { (0..=n).map(|j| wp_w[j] * sl.h_q[[i, j]] / sl.h_p[[i, j]] * shot.phi[j]).sum() };
    let boundary_term = match grid.symmetry {
        Symmetry::Even => 2.0 * column_term(grid.nq).abs(),
        Symmetry::Full => column_term(grid.nq).abs() + column_term(0).abs(),
    };
    let residual = if energy > 0.0 {
        (energy + shot.a_value * eta_integral).abs() / energy
    } else {
        0.0
    };
    Some(FroudeIdentity {
        energy,
        a_value: shot.a_value,
        eta_integral,
        residual,
        boundary_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrestIdentity {
    /// `(1/F²)[∫|ρ_p| w(0,p)² dp + ρ(0)η(0)²]`.
    pub lhs: f64,
    /// `∫ w_p²/(H_p² h_p)(0,p) dp`.
    pub rhs: f64,
    pub residual: f64,
}

pub fn crest_identity(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> CrestIdentity {
    let mu = 1.0 / (state.froude * state.froude);
    let sl = slopes(state, bg, grid);
    let c = grid.crest_index();
    let n = grid.np;
    let wts = bg.weights();
    let mut gravity = 0.0;
    let mut rhs = 0.0;
    for j in 0..=n {
        let w = state.w[[c, j]];
        let hp = sl.h_p[[c, j]];
        let wp = hp - bg.height_p[j];
        gravity += wts[j] * bg.rho_p[j].abs() * w * w;
        rhs += wts[j] * wp * wp / (bg.height_p[j].powi(2) * hp);
    }
    let eta = state.w[[c, n]];
    let lhs = mu * (gravity + bg.rho[n] * eta * eta);
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    CrestIdentity { lhs, rhs, residual }
}

/// Constant in `F² <= k ‖H_p‖² ‖ρ‖ ‖h_p(0,·)‖` that follows from the crest
/// identity with the sharp Poincaré inequality on `(-1, 0)`.
pub const FROUDE_UPPER_CONSTANT: f64 = 4.0 / PI;

/// Constant as printed alongside the bound in the literature; reported only.
pub const FROUDE_UPPER_CONSTANT_LITERAL: f64 = 1.0 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FroudeUpper {
    /// `‖H_p‖∞² ‖ρ‖∞ ‖h_p(0,·)‖∞`.
    pub stagnation_measure: f64,
    pub margin: f64,
    pub margin_literal: f64,
}

pub fn froude_upper_bound(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> FroudeUpper {
    let sl = slopes(state, bg, grid);
    let c = grid.crest_index();
    let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0f64, |m, x| m.max(x.abs()));
    let hp_bg = sup(&mut bg.height_p.iter().copied());
    let rho = sup(&mut bg.rho.iter().copied());
    let hp_crest = sup(&mut sl.h_p.row(c).iter().copied());
    let measure = hp_bg * hp_bg * rho * hp_crest;
    let f2 = state.froude * state.froude;
    FroudeUpper {
        stagnation_measure: measure,
        margin: FROUDE_UPPER_CONSTANT * measure - f2,
        margin_literal: FROUDE_UPPER_CONSTANT_LITERAL * measure - f2,
    }
}

/// Discrete sign checks for a symmetric monotone wave of elevation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalFlags {
    /// `w_q < 0` in the interior and on the surface for `q > 0`.
    pub hq: Flag,
    /// `w_qq < 0` on the crest line.
    pub hqq: Flag,
    /// `w_qp < 0` on the bed for `q > 0`.
    pub hqp: Flag,
    /// `w_qqp < 0` at the bed below the crest.
    pub corner_hqqp: Flag,
    /// `w_qq < 0` at the crest.
    pub corner_hqq: Flag,
    /// `w > 0` in the interior and on the surface.
    pub elevation: Flag,
}

impl NodalFlags {
    pub fn all_pass(&self) -> bool {
        [self.hq, self.hqq, self.hqp, self.corner_hqqp, self.corner_hqq, self.elevation]
            .iter()
            .all(|f| f.passed())
    }
}

pub fn nodal_properties(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid, tol_newton: f64) -> NodalFlags {
    let slack = 10.0 * tol_newton;
    let sl = slopes(state, bg, grid);
    let w = &state.w;
    let (c, n, dq, dp) = (grid.crest_index(), grid.np, grid.dq, grid.dp);
    let (l, r) = if c == 0 { (1, 1) } else { (c - 1, c + 1) };
    let wqq = |j: usize| (w[[r, j]] - 2.0 * w[[c, j]] + w[[l, j]]) / (dq * dq);
    let right = c + 1..=grid.nq;

    let hq = right.clone().all(|i| (1..=n).all(|j| sl.h_q[[i, j]] <= slack));
    let hqq = (1..n).all(|j| wqq(j) <= slack);
    let hqp = right
        .clone()
        .all(|i| (4.0 * sl.h_q[[i, 1]] - sl.h_q[[i, 2]]) / (2.0 * dp) <= slack);
    let corner_hqqp = (4.0 * wqq(1) - wqq(2)) / (2.0 * dp) <= slack;
    let corner_hqq = wqq(n) <= slack;
    let inner = w.rows().into_iter().flat_map(|row| row.into_iter().skip(1).copied().collect::<Vec<_>>());
    let (mut max_w, mut min_w) = (f64::NEG_INFINITY, f64::INFINITY);
    for v in inner {
        max_w = max_w.max(v);
        min_w = min_w.min(v);
    }
    let elevation = max_w > slack && min_w >= -slack;
    NodalFlags {
        hq: Flag::from_bool(hq),
        hqq: Flag::from_bool(hqq),
        hqp: Flag::from_bool(hqp),
        corner_hqqp: Flag::from_bool(corner_hqqp),
        corner_hqq: Flag::from_bool(corner_hqq),
        elevation: Flag::from_bool(elevation),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub m1: f64,
    pub m2: f64,
    /// `M = max(M1, M2)`.
    pub m_pressure: f64,
    /// `C = 2M + 2/F_cr² + 2‖E‖∞`.
    pub c_velocity: f64,
    pub e_norm_laminar: f64,
    pub e_norm_field: f64,
    pub pressure_bound_min: f64,
    pub velocity_bound_margin: f64,
}

pub fn pressure_velocity_bounds(field: &EulerianField, bg: &BackgroundFlow, f_cr: f64) -> Bounds {
    let f = field.froude;
    let n = bg.np();
    let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0f64, |m, x| m.max(x.abs()));
    let beta_plus = bg.beta(f).iter().fold(0.0f64, |m, b| m.max(*b));
    let rho_p = sup(&mut bg.rho_p.iter().copied());
    let hp0 = bg.height_p[n];
    let m1 = 0.5 * beta_plus + rho_p / (4.0 * hp0 * hp0);
    let min_hp = field.h_p.iter().copied().fold(f64::INFINITY, f64::min);
    let m2 = (1.0 / f_cr) * (1.0 / min_hp).sqrt() * rho_p.sqrt();
    let m = m1.max(m2);
    let e_norm_laminar = sup(&mut bg.bernoulli_head(f).into_iter());
    let e_norm_field = sup(&mut field.bernoulli.iter().copied());
    let c_velocity = 2.0 * m + 2.0 / (f_cr * f_cr) + 2.0 * e_norm_laminar.max(e_norm_field);
    let mut pressure_bound_min = f64::INFINITY;
    let mut speed_max = 0.0f64;
    for ((i, j), &p) in field.pressure.indexed_iter() {
        pressure_bound_min = pressure_bound_min.min(p + m * field.psi[[i, j]]);
        let rel = field.u[[i, j]] - field.c;
        let v = field.v[[i, j]];
        speed_max = speed_max.max(rel * rel + v * v);
    }
    Bounds {
        m1,
        m2,
        m_pressure: m,
        c_velocity,
        e_norm_laminar,
        e_norm_field,
        pressure_bound_min,
        velocity_bound_margin: c_velocity - speed_max,
    }
}

/// A `q`-independent solution `K` of the height equation shot from the bed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateFlowCandidate {
    pub k: Vec<f64>,
    pub k_p: Vec<f64>,
    /// `K_p(-1)`.
    pub shooting_parameter: f64,
    /// Surface condition defect.
    pub top_residual: f64,
    /// `𝒮(K) - 𝒮(H)`.
    pub s_difference: f64,
    pub s_k: f64,
    /// `∫ (K_p - H_p)³/(H_p² K_p²) dp`.
    pub cubic_residual: f64,
    /// `sup |K - H|`.
    pub sup_difference: f64,
    pub one_signed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateVerdict {
    /// `K ≡ H`.
    Trivial,
    NotConjugate,
    NotOneSigned,
    /// Conjugate and one-signed but violating the cubic condition.
    Rejected,
    /// Conjugate, one-signed, nontrivial and satisfying the cubic
    /// condition: a monotone bore.
    Counterexample,
}

impl ConjugateFlowCandidate {
    pub fn verdict(&self, tol: f64) -> ConjugateVerdict {
        if self.sup_difference < tol && self.cubic_residual.abs() < tol {
            ConjugateVerdict::Trivial
        } else if self.s_difference.abs() >= tol {
            ConjugateVerdict::NotConjugate
        } else if !self.one_signed {
            ConjugateVerdict::NotOneSigned
        } else if self.cubic_residual.abs() > tol {
            ConjugateVerdict::Rejected
        } else {
            ConjugateVerdict::Counterexample
        }
    }
}

/// Integrates `V_p = -H_pp/H_p³ - μρ_p(K - H)`, `K_p = 1/√(2V)` from the bed
/// with `K_p(-1) = seed`. `None` if `V` reaches zero.
fn shoot_k(bg: &BackgroundFlow, mu: f64, seed: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = bg.np();
    let f = &bg.fine;
    let dp = bg.dp();
    let rhs = |k: usize, kk: f64, v: f64| -> Option<(f64, f64)> {
        if !(v > 0.0) {
            return None;
        }
        let hp = f.height_p[k];
        Some((
            1.0 / (2.0 * v).sqrt(),
            -f.height_pp[k] / (hp * hp * hp) - mu * f.rho_p[k] * (kk - f.height[k]),
        ))
    };
    let mut k = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    v[0] = 0.5 / (seed * seed);
    for j in 0..n {
        let (i0, i1, i2) = (2 * j, 2 * j + 1, 2 * j + 2);
        let (a1, b1) = rhs(i0, k[j], v[j])?;
        let (a2, b2) = rhs(i1, k[j] + 0.5 * dp * a1, v[j] + 0.5 * dp * b1)?;
        let (a3, b3) = rhs(i1, k[j] + 0.5 * dp * a2, v[j] + 0.5 * dp * b2)?;
        let (a4, b4) = rhs(i2, k[j] + dp * a3, v[j] + dp * b3)?;
        k[j + 1] = k[j] + dp / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        v[j + 1] = v[j] + dp / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if !(v[j + 1] > 0.0) || !v[j + 1].is_finite() {
            return None;
        }
    }
    let k_p = v.iter().map(|x| 1.0 / (2.0 * x).sqrt()).collect();
    Some((k, k_p))
}

fn top_defect(bg: &BackgroundFlow, mu: f64, k: &[f64], k_p: &[f64]) -> f64 {
    let n = bg.np();
    let hp0 = bg.height_p[n];
    -0.5 / (k_p[n] * k_p[n]) + 0.5 / (hp0 * hp0) - mu * bg.rho[n] * (k[n] - bg.height[n])
}

/// Shoots one candidate; rejects non-positive seeds and trajectories
/// that lose `K_p > 0`.
pub fn conjugate_candidate(bg: &BackgroundFlow, froude: f64, seed: f64) -> Result<ConjugateFlowCandidate> {
    if !(seed > 0.0) || !seed.is_finite() {
        return Err(Error::Precondition(format!("seed K_p(-1) must be positive, got {seed}")));
    }
    if !(froude > 0.0) {
        return Err(Error::Precondition(format!("F must be positive, got {froude}")));
    }
    let mu = 1.0 / (froude * froude);
    let (k, k_p) = shoot_k(bg, mu, seed).ok_or_else(|| Error::Domain(format!("K_p blows up for seed {seed}")))?;
    let wts = bg.weights();
    let zeros = vec![0.0; k.len()];
    let s_difference = flow_force_excess(&k, &k_p, &zeros, froude, bg, &wts);
    let mut cubic = 0.0;
    let mut sup = 0.0f64;
    let (mut above, mut below) = (true, true);
    for j in 0..k.len() {
        let hp = bg.height_p[j];
        cubic += wts[j] * (k_p[j] - hp).powi(3) / (hp * hp * k_p[j] * k_p[j]);
        let d = k[j] - bg.height[j];
        sup = sup.max(d.abs());
        above &= d >= 0.0;
        below &= d <= 0.0;
    }
    Ok(ConjugateFlowCandidate {
        top_residual: top_defect(bg, mu, &k, &k_p),
        s_difference,
        s_k: bg.s_h(froude) + s_difference,
        cubic_residual: cubic,
        sup_difference: sup,
        one_signed: above || below,
        shooting_parameter: seed,
        k,
        k_p,
    })
}

/// Scans `K_p(-1)` over `[0.2, 5]·H_p(-1)` for roots of the surface defect.
/// The trivial root `K = H` is returned first; the scan runs on the defect
/// divided by `K_p(-1) - H_p(-1)` so that nearby nontrivial roots are not
/// masked by it.
pub fn conjugate_flow_scan(bg: &BackgroundFlow, froude: f64, n_seeds: usize) -> Result<Vec<ConjugateFlowCandidate>> {
    if !(froude > 0.0) {
        return Err(Error::Precondition(format!("F must be positive, got {froude}")));
    }
    if n_seeds < 2 {
        return Err(Error::Input("need at least 2 seeds".into()));
    }
    let mu = 1.0 / (froude * froude);
    let base = bg.height_p[0];
    let (lo, hi) = (0.2 * base, 5.0 * base);
    let deflated = |s: f64| {
        shoot_k(bg, mu, s)
            .map(|(k, kp)| top_defect(bg, mu, &k, &kp) / (s - base))
            .filter(|v| v.is_finite())
    };
    let seeds: Vec<f64> = (0..n_seeds)
        .map(|i| lo + (hi - lo) * i as f64 / (n_seeds - 1) as f64)
        .collect();
    let values: Vec<Option<f64>> = seeds.iter().map(|&s| deflated(s)).collect();
    let mut out = vec![conjugate_candidate(bg, froude, base)?];
    for i in 0..n_seeds - 1 {
        let (Some(a), Some(b)) = (values[i], values[i + 1]) else {
            continue;
        };
        let root = if a == 0.0 {
            seeds[i]
        } else if a * b < 0.0 {
            bisect(|s| deflated(s).unwrap_or(f64::NAN), seeds[i], seeds[i + 1], 0.0)
        } else {
            continue;
        };
        if (root - base).abs() > 1e-12 * base {
            if let Ok(c) = conjugate_candidate(bg, froude, root) {
                out.push(c);
            }
        }
    }
    if values[n_seeds - 1] == Some(0.0) {
        out.push(conjugate_candidate(bg, froude, seeds[n_seeds - 1])?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub froude: f64,
    pub amplitude: f64,
    pub flow_force_drift: f64,
    pub flow_force: Flag,
    pub froude_identity_residual: Option<f64>,
    pub froude_identity_boundary_term: Option<f64>,
    /// `A(1/F²)`, negative for waves of elevation.
    pub a_value: Option<f64>,
    pub froude_identity: Flag,
    pub crest_identity_residual: f64,
    pub crest_identity: Flag,
    pub froude_upper_margin: f64,
    pub froude_upper_margin_literal: f64,
    pub froude_upper: Flag,
    pub supercritical: Flag,
    pub nodal_flags: NodalFlags,
    pub elevation: Flag,
    pub pressure_bound_min: Option<f64>,
    pub pressure_bound: Flag,
    pub velocity_bound_margin: Option<f64>,
    pub velocity_bound: Flag,
    pub m_pressure: Option<f64>,
    pub c_velocity: Option<f64>,
    /// Smallest `|cubic residual|` among nontrivial one-signed conjugate
    /// candidates, if any.
    pub conjugate_residual: Option<f64>,
    pub conjugate_candidates: usize,
    pub conjugate: Flag,
    /// `Q` surface/upstream mismatch and surface pressure, from the
    /// reconstructed field.
    pub q_bern_mismatch: Option<f64>,
    pub max_surface_pressure: Option<f64>,
}

impl DiagnosticsReport {
    /// Flags that gate an accepted branch point.
    pub fn gate(&self) -> bool {
        self.supercritical.passed() && self.nodal_flags.all_pass()
    }

    pub fn all_pass(&self) -> bool {
        [
            self.flow_force,
            self.froude_identity,
            self.crest_identity,
            self.froude_upper,
            self.supercritical,
            self.elevation,
            self.pressure_bound,
            self.velocity_bound,
            self.conjugate,
        ]
        .iter()
        .all(|f| f.passed())
            && self.nodal_flags.all_pass()
    }
}

/// Runs every check on a converged state.
pub fn diagnose(
    state: &WaveState,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    spec: &SpectrumReport,
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    state.check_shape(grid)?;
    let (field, scan) = rayon::join(
        || reconstruct(state, bg, grid),
        || conjugate_flow_scan(bg, state.froude, opts.conjugate_seeds),
    );
    let field = field.ok();
    let scan = scan?;
    let drift = check_flow_force(state, bg, grid);
    let fi = froude_identity(state, bg, grid, opts.tail_fraction);
    let ci = crest_identity(state, bg, grid);
    let fu = froude_upper_bound(state, bg, grid);
    let nodal = nodal_properties(state, bg, grid, opts.tol_newton);
    let bounds = field.as_ref().map(|f| pressure_velocity_bounds(f, bg, spec.f_cr));
    let tol_c = opts.conjugate_tol;
    let mut conj_res: Option<f64> = None;
    let mut counterexample = false;
    for c in &scan {
        match c.verdict(tol_c) {
            ConjugateVerdict::Rejected | ConjugateVerdict::Counterexample => {
                let r = c.cubic_residual.abs();
                conj_res = Some(conj_res.map_or(r, |m: f64| m.min(r)));
                counterexample |= c.verdict(tol_c) == ConjugateVerdict::Counterexample;
            }
            _ => {}
        }
    }
    let opt_flag = |v: Option<bool>| v.map_or(Flag::NotComputed, Flag::from_bool);
    Ok(DiagnosticsReport {
        froude: state.froude,
        amplitude: state.amplitude(grid),
        flow_force_drift: drift,
        flow_force: Flag::from_bool(drift < opts.tol_flow_force),
        froude_identity_residual: fi.map(|f| f.residual),
        froude_identity_boundary_term: fi.map(|f| f.boundary_term),
        a_value: fi.map(|f| f.a_value),
        froude_identity: opt_flag(fi.map(|f| f.residual < opts.tol_identity)),
        crest_identity_residual: ci.residual,
        crest_identity: Flag::from_bool(ci.residual < opts.tol_identity),
        froude_upper_margin: fu.margin,
        froude_upper_margin_literal: fu.margin_literal,
        froude_upper: Flag::from_bool(fu.margin >= 0.0),
        supercritical: Flag::from_bool(state.froude > spec.f_cr),
        nodal_flags: nodal,
        elevation: nodal.elevation,
        pressure_bound_min: bounds.map(|b| b.pressure_bound_min),
        pressure_bound: opt_flag(bounds.map(|b| b.pressure_bound_min >= -opts.tol_bound)),
        velocity_bound_margin: bounds.map(|b| b.velocity_bound_margin),
        velocity_bound: opt_flag(bounds.map(|b| b.velocity_bound_margin >= 0.0)),
        m_pressure: bounds.map(|b| b.m_pressure),
        c_velocity: bounds.map(|b| b.c_velocity),
        conjugate_residual: conj_res,
        conjugate_candidates: scan.len(),
        conjugate: Flag::from_bool(!counterexample),
        q_bern_mismatch: field.as_ref().map(|f| f.q_bern_mismatch()),
        max_surface_pressure: field.as_ref().map(|f| f.max_surface_pressure()),
    })
}
