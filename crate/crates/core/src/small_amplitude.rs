//! Reduced constants of the small-amplitude expansion and the leading-order
//! KdV solitary-wave guess.

use crate::error::{Error, Result};
use crate::height_solver::{StripGrid, WaveState};
use crate::profiles::BackgroundFlow;
use crate::sturm_liouville::SpectrumReport;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Largest `ε = μ_cr - 1/F²` accepted by [`build_guess`].
pub const EPSILON_GUESS_MAX: f64 = 0.05;

/// Minimum number of KdV decay lengths the strip must span.
pub const DECAY_LENGTHS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedConstants {
    /// `∫ Φ_cr²/H_p dp`
    pub c0: f64,
    /// `ρ(0)Φ_cr(0)² - ∫ ρ_p Φ_cr² dp`
    pub c1: f64,
    /// `∫ (Φ_cr,p)³/H_p⁴ dp`
    pub c2: f64,
}

impl ReducedConstants {
    /// Spatial decay rate `√(ε c1/c0)` of the leading-order wave.
    pub fn decay_rate(&self, epsilon: f64) -> f64 {
        (epsilon * self.c1 / self.c0).sqrt()
    }
}

pub fn compute_constants(bg: &BackgroundFlow, spec: &SpectrumReport) -> Result<ReducedConstants> {
    let n = bg.np();
    if spec.phi_cr.len() != n + 1 || spec.phi_cr_p.len() != n + 1 {
        return Err(Error::Precondition(
            "critical eigenfunction is not sampled on the background grid".into(),
        ));
    }
    constants_from(bg, &spec.phi_cr, &spec.phi_cr_p)
}

/// Constants for an arbitrary normalization of the critical eigenfunction.
pub fn constants_from(bg: &BackgroundFlow, phi: &[f64], phi_p: &[f64]) -> Result<ReducedConstants> {
    let n = bg.np();
    let w = bg.weights();
    let mut c0 = 0.0;
    let mut c1_int = 0.0;
    let mut c2 = 0.0;
    for j in 0..=n {
        let hp = bg.height_p[j];
        c0 += w[j] * phi[j] * phi[j] / hp;
        c1_int += w[j] * bg.rho_p[j] * phi[j] * phi[j];
        c2 += w[j] * phi_p[j].powi(3) / hp.powi(4);
    }
    let c1 = bg.rho[n] * phi[n] * phi[n] - c1_int;
    if !(c0 > 0.0 && c1 > 0.0 && c2 > 0.0) {
        return Err(Error::StratificationAssumption(format!(
            "reduced constants must be positive, got c0 = {c0}, c1 = {c1}, c2 = {c2}"
        )));
    }
    Ok(ReducedConstants { c0, c1, c2 })
}

/// `sech²(Q/2)`, the homoclinic orbit of `Z'' = Z - (3/2) Z²`.
pub fn kdv_profile(q: f64) -> f64 {
    let c = (0.5 * q).cosh();
    1.0 / (c * c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallWaveGuess {
    pub epsilon: f64,
    pub froude: f64,
    pub w: Array2<f64>,
    pub predicted_amplitude: f64,
}

impl SmallWaveGuess {
    pub fn into_state(self, bg: &BackgroundFlow, grid: &StripGrid) -> WaveState {
        WaveState::with_consistent_ghost(self.w, self.froude, bg, grid)
    }
}

/// Leading-order lift `w = ε (c1/c2) sech²(√(ε c1/c0) q / 2) Φ_cr(p)` with
/// `F = (μ_cr - ε)^(-1/2)`.
pub fn build_guess(
    bg: &BackgroundFlow,
    spec: &SpectrumReport,
    consts: &ReducedConstants,
    epsilon: f64,
    grid: &StripGrid,
) -> Result<SmallWaveGuess> {
    if !(epsilon > 0.0 && epsilon <= EPSILON_GUESS_MAX) {
        return Err(Error::GuessQuality(format!(
            "epsilon must lie in (0, {EPSILON_GUESS_MAX}], got {epsilon}"
        )));
    }
    if grid.np != bg.np() || spec.phi_cr.len() != bg.np() + 1 {
        return Err(Error::Precondition("grid and background disagree on Np".into()));
    }
    let rate = consts.decay_rate(epsilon);
    let extent = grid.q_max() * rate;
    if extent < DECAY_LENGTHS {
        return Err(Error::DomainTruncation(format!(
            "strip spans {extent:.3} decay lengths, need {DECAY_LENGTHS}"
        )));
    }
    let (c0, c1, c2) = (consts.c0, consts.c1, consts.c2);
    let z_scale = epsilon * c0.sqrt() * c1 / c2;
    let lift = 1.0 / c0.sqrt();
    let mut w = Array2::zeros((grid.nq + 1, grid.np + 1));
    for (i, &q) in grid.q_nodes.iter().enumerate() {
        let z1 = z_scale * kdv_profile(rate * q);
        for j in 0..=grid.np {
            w[[i, j]] = lift * z1 * spec.phi_cr[j];
        }
    }
    grid.apply_farfield_zero(&mut w);
    let froude = 1.0 / (spec.mu_cr - epsilon).sqrt();
    let predicted_amplitude = w[[grid.crest_index(), grid.np]];
    Ok(SmallWaveGuess {
        epsilon,
        froude,
        w,
        predicted_amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdv_profile_solves_the_reduced_ode() {
        for k in 0..=100 {
            let q = -10.0 + 0.2 * k as f64;
            let z = kdv_profile(q);
            let t = (0.5 * q).tanh();
            let s2 = 1.0 - t * t;
            // d²/dQ² sech²(Q/2) = s2 (3 t² - 1) / 2 ... written in terms of s2
            let zpp = 0.5 * s2 * (2.0 * t * t - s2);
            assert!((-z + 1.5 * z * z + zpp).abs() < 1e-14);
        }
        assert_eq!(kdv_profile(0.0), 1.0);
        assert_eq!(kdv_profile(2000.0), 0.0);
    }
}
