//! Physical-plane fields reconstructed from a height function.
//!
//! Fields live on the streamline nodes `(q_i, p_j)`: row `j` is the
//! streamline `ψ = -p_j` at heights `y = h - 1`.

use crate::error::{Error, Result};
use crate::height_solver::{slopes, StripGrid, WaveState};
use crate::profiles::BackgroundFlow;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct EulerianField {
    pub x_nodes: Vec<f64>,
    pub p_nodes: Vec<f64>,
    pub streamline_y: Array2<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub psi: Array2<f64>,
    pub pressure: Array2<f64>,
    pub eta: Vec<f64>,
    /// Bernoulli head on each streamline.
    pub bernoulli: Array2<f64>,
    pub froude: f64,
    /// Dimensionless wave speed.
    pub c: f64,
    /// `Q` from upstream data, `ρ(0)(Ů(0)-c)² + 2ρ(0)/F²`.
    pub q_bern_upstream: f64,
    /// `Q` evaluated on the surface of every column.
    pub q_bern_surface: Vec<f64>,
    /// `h_p` used for the reconstruction, kept for flow-force quadrature.
    pub h_p: Array2<f64>,
}

impl EulerianField {
    /// Largest `|Q_surface - Q_upstream|`.
    pub fn q_bern_mismatch(&self) -> f64 {
        self.q_bern_surface
            .iter()
            .fold(0.0f64, |m, q| m.max((q - self.q_bern_upstream).abs()))
    }

    pub fn max_surface_pressure(&self) -> f64 {
        let n = self.p_nodes.len() - 1;
        self.pressure.column(n).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerianSummary {
    pub q_bern_upstream: f64,
    pub q_bern_mismatch: f64,
    pub max_surface_pressure: f64,
    pub froude: f64,
    pub c: f64,
}

impl From<&EulerianField> for EulerianSummary {
    fn from(f: &EulerianField) -> Self {
        Self {
            q_bern_upstream: f.q_bern_upstream,
            q_bern_mismatch: f.q_bern_mismatch(),
            max_surface_pressure: f.max_surface_pressure(),
            froude: f.froude,
            c: f.c,
        }
    }
}

pub fn reconstruct(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> Result<EulerianField> {
    state.check_shape(grid)?;
    let (nq, n) = (grid.nq, grid.np);
    let f = state.froude;
    let mu = 1.0 / (f * f);
    let sl = slopes(state, bg, grid);
    for ((i, j), &hp) in sl.h_p.indexed_iter() {
        if !(hp > 0.0) {
            return Err(Error::Stagnation { i, j, value: hp });
        }
    }
    let c = bg.scales.wave_speed / bg.scales.velocity(f);
    let head = bg.bernoulli_head(f);
    let shape = (nq + 1, n + 1);
    let mut y = Array2::zeros(shape);
    let mut u = Array2::zeros(shape);
    let mut v = Array2::zeros(shape);
    let mut psi = Array2::zeros(shape);
    let mut pressure = Array2::zeros(shape);
    let mut bernoulli = Array2::zeros(shape);
    for i in 0..=nq {
        for j in 0..=n {
            let rho = bg.rho[j];
            let hp = sl.h_p[[i, j]];
            let hq = sl.h_q[[i, j]];
            let rel = -1.0 / (rho.sqrt() * hp);
            let yy = bg.height[j] + state.w[[i, j]] - 1.0;
            let vv = hq * rel;
            y[[i, j]] = yy;
            u[[i, j]] = c + rel;
            v[[i, j]] = vv;
            psi[[i, j]] = -bg.p_nodes[j];
            bernoulli[[i, j]] = head[j];
            pressure[[i, j]] = head[j] - 0.5 * rho * (rel * rel + vv * vv) - mu * rho * yy;
        }
    }
    let hp0 = bg.height_p[n];
    let q_bern_upstream = 1.0 / (hp0 * hp0) + 2.0 * mu * bg.rho[n];
    let q_bern_surface = (0..=nq)
        .map(|i| {
            let (hq, hp) = (sl.h_q[[i, n]], sl.h_p[[i, n]]);
            (1.0 + hq * hq) / (hp * hp) + 2.0 * mu * bg.rho[n] * (1.0 + state.w[[i, n]])
        })
        .collect();
    Ok(EulerianField {
        x_nodes: grid.q_nodes.clone(),
        p_nodes: bg.p_nodes.clone(),
        streamline_y: y,
        u,
        v,
        psi,
        pressure,
        eta: state.w.column(n).to_vec(),
        bernoulli,
        froude: f,
        c,
        q_bern_upstream,
        q_bern_surface,
        h_p: sl.h_p,
    })
}

/// Recovers `w` in one column from the increments `d_j = w_p(p_j)` of the
/// solver's difference stencils (one-sided at the bed, central above).
fn integrate_column(d: &[f64], dp: f64) -> Vec<f64> {
    let n = d.len() - 1;
    let mut w = vec![0.0; n + 1];
    w[2] = 2.0 * dp * d[1];
    w[1] = (2.0 * dp * d[0] + w[2]) / 4.0;
    for j in 2..n {
        w[j + 1] = w[j - 1] + 2.0 * dp * d[j];
    }
    w
}

/// Sup deviation of `h` recomputed from `(u, ρ)` against the field's own
/// streamline heights.
pub fn roundtrip_check(field: &EulerianField, bg: &BackgroundFlow) -> f64 {
    let (nq1, n1) = field.u.dim();
    let dp = bg.dp();
    let mut worst = 0.0f64;
    for i in 0..nq1 {
        let d: Vec<f64> = (0..n1)
            .map(|j| 1.0 / (bg.rho[j].sqrt() * (field.c - field.u[[i, j]])) - bg.height_p[j])
            .collect();
        let w = integrate_column(&d, dp);
        for j in 0..n1 {
            let h = bg.height[j] + w[j];
            worst = worst.max((h - (field.streamline_y[[i, j]] + 1.0)).abs());
        }
    }
    worst
}

/// Per-column `∫ (P + ρ(u-c)²) dy` by the trapezoid rule in `y` over the
/// streamline nodes.
pub fn eulerian_flow_force(field: &EulerianField, bg: &BackgroundFlow) -> Vec<f64> {
    let (nq1, n1) = field.u.dim();
    (0..nq1)
        .map(|i| {
            let g = |j: usize| {
                let rel = field.u[[i, j]] - field.c;
                field.pressure[[i, j]] + bg.rho[j] * rel * rel
            };
            (0..n1 - 1)
                .map(|j| 0.5 * (g(j) + g(j + 1)) * (field.streamline_y[[i, j + 1]] - field.streamline_y[[i, j]]))
                .sum()
        })
        .collect()
}

/// Per-column mass flux `∫ √ρ (c - u) dy`, with `dy = h_p dp` and the
/// background quadrature.
pub fn mass_flux(field: &EulerianField, bg: &BackgroundFlow) -> Vec<f64> {
    let wts = bg.weights();
    let (nq1, n1) = field.u.dim();
    (0..nq1)
        .map(|i| {
            (0..n1)
                .map(|j| wts[j] * bg.rho[j].sqrt() * (field.c - field.u[[i, j]]) * field.h_p[[i, j]])
                .sum()
        })
        .collect()
}

/// Per-column mass flux by the trapezoid rule in `y` over streamline nodes.
pub fn mass_flux_trapezoid(field: &EulerianField, bg: &BackgroundFlow) -> Vec<f64> {
    let (nq1, n1) = field.u.dim();
    (0..nq1)
        .map(|i| {
            let g = |j: usize| bg.rho[j].sqrt() * (field.c - field.u[[i, j]]);
            (0..n1 - 1)
                .map(|j| 0.5 * (g(j) + g(j + 1)) * (field.streamline_y[[i, j + 1]] - field.streamline_y[[i, j]]))
                .sum()
        })
        .collect()
}
