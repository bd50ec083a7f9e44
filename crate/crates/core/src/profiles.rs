//! Density and shear input, non-dimensionalization, and the laminar
//! background flow `(H, ρ, β)` on the `p`-grid.
//!
//! All internal quantities are dimensionless: depth 1, surface streamline
//! `p = 0`, bed `p = -1`, `ρ(0) = 1` and `μ = 1/F²`. The background height
//! `H(p)` solves `H_p = 1/(√ρ̊ (c - ů))` at `y = H - 1`, which is independent of
//! the Froude number once the relative velocity is normalized.

use crate::error::{Error, Result};
use crate::numerics::{derivative, integrate, quadrature_weights, CubicSpline};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// `ρ̊(y)` and `u*(y)` given in physical units on `[-d, 0]`.
    Eulerian,
    /// `ρ(p)` and `H_p(p)` given directly on `[-1, 0]`.
    SemiLagrangian,
}

/// A scalar profile: analytic family or tabulated samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant { value: f64 },
    Linear { value: f64, slope: f64 },
    Exponential { value: f64, rate: f64 },
    Tanh { value: f64, jump: f64, center: f64, width: f64 },
    Table(CubicSpline),
}

impl Profile {
    /// Value and first two derivatives.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Profile::Constant { value } => (*value, 0.0, 0.0),
            Profile::Linear { value, slope } => (value + slope * x, *slope, 0.0),
            Profile::Exponential { value, rate } => {
                let e = value * (rate * x).exp();
                (e, rate * e, rate * rate * e)
            }
            Profile::Tanh {
                value,
                jump,
                center,
                width,
            } => {
                let t = ((x - center) / width).tanh();
                let s2 = 1.0 - t * t;
                (
                    value + jump * t,
                    jump * s2 / width,
                    -2.0 * jump * t * s2 / (width * width),
                )
            }
            Profile::Table(s) => s.eval(x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// The profile multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Profile {
        match self {
            Profile::Constant { value } => Profile::Constant { value: value * k },
            Profile::Linear { value, slope } => Profile::Linear {
                value: value * k,
                slope: slope * k,
            },
            Profile::Exponential { value, rate } => Profile::Exponential {
                value: value * k,
                rate: *rate,
            },
            Profile::Tanh {
                value,
                jump,
                center,
                width,
            } => Profile::Tanh {
                value: value * k,
                jump: jump * k,
                center: *center,
                width: *width,
            },
            Profile::Table(s) => Profile::Table(s.scaled(k)),
        }
    }

    fn check_table_domain(&self, what: &str, lo: f64, hi: f64) -> Result<()> {
        if let Profile::Table(s) = self {
            let (a, b) = s.domain();
            let slack = 1e-9 * (hi - lo);
            if a < lo - slack || b > hi + slack {
                return Err(Error::Domain(format!(
                    "{what} table spans [{a}, {b}], outside the declared domain [{lo}, {hi}]"
                )));
            }
            if a > lo + slack || b < hi - slack {
                return Err(Error::Domain(format!(
                    "{what} table spans [{a}, {b}] but must cover [{lo}, {hi}]"
                )));
            }
        }
        if let Profile::Tanh { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::Input(format!("{what}: tanh width must be positive")));
            }
        }
        Ok(())
    }

    /// Sample points used for positivity and monotonicity checks: a fine
    /// uniform grid plus table knots.
    fn samples(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = 2048;
        let mut xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        if let Profile::Table(s) = self {
            xs.extend(s.knots().iter().copied().filter(|x| *x >= lo && *x <= hi));
        }
        xs
    }
}

/// Inputs for one stratified configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedConfig {
    pub density_mode: DensityMode,
    /// `ρ̊(y)` (eulerian) or `ρ(p)` (semi-Lagrangian).
    pub density: Profile,
    /// `u*(y)` in velocity units (eulerian) or `H_p(p)` (semi-Lagrangian).
    pub shear: Profile,
    pub gravity: f64,
    pub depth: f64,
    pub wave_speed: f64,
    pub p_grid_size: usize,
    pub quadrature_order: u8,
    /// Cumulative factor applied to `u*` by [`normalize_shear`].
    pub shear_scale: f64,
    /// Relative tolerance on `H(0) = 1`.
    pub tol_h: f64,
}

pub const DEFAULT_P_NODES: usize = 200;
pub const DEFAULT_TOL_H: f64 = 1e-8;

impl StratifiedConfig {
    /// Semi-Lagrangian configuration with unit physical scales.
    pub fn semi_lagrangian(density: Profile, height_p: Profile, p_grid_size: usize) -> Self {
        Self {
            density_mode: DensityMode::SemiLagrangian,
            density,
            shear: height_p,
            gravity: 9.81,
            depth: 1.0,
            wave_speed: 1.0,
            p_grid_size,
            quadrature_order: 4,
            shear_scale: 1.0,
            tol_h: DEFAULT_TOL_H,
        }
    }

    /// Coordinate interval on which both profiles are defined.
    pub fn coordinate_domain(&self) -> (f64, f64) {
        match self.density_mode {
            DensityMode::Eulerian => (-self.depth, 0.0),
            DensityMode::SemiLagrangian => (-1.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gravity", self.gravity),
            ("depth", self.depth),
            ("wave_speed", self.wave_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.p_grid_size < 32 {
            return Err(Error::Input(format!(
                "p_grid_size must be at least 32, got {}",
                self.p_grid_size
            )));
        }
        if !matches!(self.quadrature_order, 2 | 4) {
            return Err(Error::Input(format!(
                "quadrature_order must be 2 or 4, got {}",
                self.quadrature_order
            )));
        }
        if self.quadrature_order == 4 && self.p_grid_size % 2 != 0 {
            return Err(Error::Input(
                "quadrature_order 4 needs an even p_grid_size".into(),
            ));
        }
        if !(self.tol_h > 0.0) || !(self.shear_scale > 0.0) {
            return Err(Error::Input("tol_h and shear_scale must be positive".into()));
        }
        let (lo, hi) = self.coordinate_domain();
        self.density.check_table_domain("density", lo, hi)?;
        self.shear.check_table_domain("shear", lo, hi)?;
        let rho_scale = self.density.value(hi).abs().max(f64::MIN_POSITIVE);
        for x in self.density.samples(lo, hi) {
            let (r, rp, _) = self.density.eval(x);
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!("density {r} is not positive at {x}")));
            }
            if rp > 1e-12 * rho_scale {
                return Err(Error::Domain(format!(
                    "density increases upward at {x} (slope {rp}); unstable stratification is not supported"
                )));
            }
        }
        for x in self.shear.samples(lo, hi) {
            let u = self.shear.value(x);
            if !(u > 0.0) || !u.is_finite() {
                return Err(Error::Domain(format!("shear profile {u} is not positive at {x}")));
            }
        }
        Ok(())
    }
}

/// Composite 5-point Gauss–Legendre quadrature on `[a, b]`.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        let mut s = 0.0;
        for (x, w) in X.iter().zip(W) {
            s += w * f(c + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Rescales the shear so that `∫√ρ̊ u* dy = √(g ρ0 d³)` (eulerian) or
/// `∫H_p dp = 1` (semi-Lagrangian); both say `H(0) = 1`.
pub fn normalize_shear(config: &StratifiedConfig) -> Result<StratifiedConfig> {
    let (lo, hi) = config.coordinate_domain();
    for x in config.shear.samples(lo, hi) {
        let u = config.shear.value(x);
        if !(u > 0.0) {
            return Err(Error::Domain(format!("shear sample {u} at {x} is not positive")));
        }
    }
    for x in config.density.samples(lo, hi) {
        let r = config.density.value(x);
        if !(r > 0.0) {
            return Err(Error::Domain(format!("density sample {r} at {x} is not positive")));
        }
    }
    let mut out = config.clone();
    match config.density_mode {
        DensityMode::Eulerian => {
            let rho0 = config.density.value(0.0);
            let integral = gauss_legendre(
                |y| config.density.value(y).sqrt() * config.shear.value(y),
                lo,
                hi,
                512,
            );
            if !(integral > 0.0) || !integral.is_finite() {
                return Err(Error::Degenerate(format!("normalization integral is {integral}")));
            }
            let target = (config.gravity * rho0 * config.depth.powi(3)).sqrt();
            let k = snap_to_one(target / integral);
            out.shear = config.shear.scaled(k);
            out.shear_scale = config.shear_scale * k;
        }
        DensityMode::SemiLagrangian => {
            let integral = gauss_legendre(|p| config.shear.value(p), lo, hi, 512);
            if !(integral > 0.0) || !integral.is_finite() {
                return Err(Error::Degenerate(format!("normalization integral is {integral}")));
            }
            let k = snap_to_one(1.0 / integral);
            // H_p is inversely proportional to u*
            out.shear = config.shear.scaled(k);
            out.shear_scale = config.shear_scale / k;
        }
    }
    Ok(out)
}

/// Factors within quadrature rounding of one are treated as exactly one so
/// that normalization is idempotent.
fn snap_to_one(k: f64) -> f64 {
    if (k - 1.0).abs() <= 1e-12 {
        1.0
    } else {
        k
    }
}

/// Dimensional scales recorded for export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub depth: f64,
    pub rho0: f64,
    pub gravity: f64,
    pub wave_speed: f64,
    pub shear_scale: f64,
}

impl Scales {
    /// Pseudo-volumetric mass flux `m = F √(g ρ0 d³)`.
    pub fn mass_flux(&self, froude: f64) -> f64 {
        froude * (self.gravity * self.rho0 * self.depth.powi(3)).sqrt()
    }

    /// Velocity unit `m / (d √ρ0)`.
    pub fn velocity(&self, froude: f64) -> f64 {
        self.mass_flux(froude) / (self.depth * self.rho0.sqrt())
    }
}

/// Background samples on the refined grid of `2 Np + 1` nodes, so that RK4
/// steps over the node grid can use exact midpoint values.
#[derive(Debug, Clone, PartialEq)]
pub struct FineBackground {
    pub p: Vec<f64>,
    pub height: Vec<f64>,
    pub height_p: Vec<f64>,
    pub height_pp: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_p: Vec<f64>,
}

/// Laminar state on the `p`-grid. Immutable after construction.
///
/// The Bernoulli function and flow force depend on `μ = 1/F²` linearly; the
/// `F`-free and gravity parts are stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFlow {
    pub p_nodes: Vec<f64>,
    pub height: Vec<f64>,
    pub height_p: Vec<f64>,
    pub height_pp: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_p: Vec<f64>,
    /// `-H_pp/H_p³`, the shear part of `β(-p)`.
    pub beta_shear: Vec<f64>,
    /// `(H - 1) ρ_p`, the coefficient of `μ` in `β(-p)`.
    pub beta_gravity: Vec<f64>,
    /// `∫ 1/H_p dp`, the `F`-free part of the laminar flow force.
    pub flow_force_shear: f64,
    /// `∫ ρ H H_p dp`, the coefficient of `μ` in the laminar flow force.
    pub flow_force_gravity: f64,
    pub quadrature_order: u8,
    pub scales: Scales,
    pub fine: FineBackground,
}

impl BackgroundFlow {
    /// Number of p-intervals.
    pub fn np(&self) -> usize {
        self.p_nodes.len() - 1
    }

    pub fn dp(&self) -> f64 {
        1.0 / self.np() as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        quadrature_weights(self.np(), self.dp(), self.quadrature_order)
    }

    /// `β(-p)` at the nodes for Froude number `froude`.
    pub fn beta(&self, froude: f64) -> Vec<f64> {
        let mu = 1.0 / (froude * froude);
        self.beta_shear
            .iter()
            .zip(&self.beta_gravity)
            .map(|(s, g)| s + mu * g)
            .collect()
    }

    /// Laminar flow force `S_H`.
    pub fn s_h(&self, froude: f64) -> f64 {
        self.flow_force_shear + self.flow_force_gravity / (froude * froude)
    }

    /// Laminar Bernoulli head `E(p) = μ∫_p^0 ρH_p + 1/(2H_p²) + μρ(H-1)`.
    pub fn bernoulli_head(&self, froude: f64) -> Vec<f64> {
        let mu = 1.0 / (froude * froude);
        let n = self.np();
        let f = &self.fine;
        let h = 0.5 * self.dp();
        // cumulative Simpson from the surface down on the fine grid
        let mut above = vec![0.0; n + 1];
        for j in (0..n).rev() {
            let k = 2 * j;
            let g = |i: usize| f.rho[i] * f.height_p[i];
            above[j] = above[j + 1] + h / 3.0 * (g(k) + 4.0 * g(k + 1) + g(k + 2));
        }
        (0..=n)
            .map(|j| {
                mu * above[j]
                    + 0.5 / (self.height_p[j] * self.height_p[j])
                    + mu * self.rho[j] * (self.height[j] - 1.0)
            })
            .collect()
    }

    /// Checks the structural invariants; used after deserialization and in
    /// property tests.
    pub fn check_invariants(&self, tol_h: f64) -> Result<()> {
        if self.height[0] != 0.0 {
            return Err(Error::Consistency("H(-1) != 0".into()));
        }
        let h0 = self.height[self.np()];
        if (h0 - 1.0).abs() > tol_h {
            return Err(Error::NormalizationInconsistency { h0, tol: tol_h });
        }
        for (j, &v) in self.height_p.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::StagnantBackground { node: j, value: v });
            }
        }
        for (j, &v) in self.rho_p.iter().enumerate() {
            if v > 0.0 {
                return Err(Error::UnstableStratification { node: j, value: v });
            }
        }
        if self.rho[self.np()] != 1.0 {
            return Err(Error::Consistency("rho(0) != 1".into()));
        }
        if self.p_nodes.windows(2).any(|s| s[1] <= s[0]) {
            return Err(Error::Consistency("p-nodes not increasing".into()));
        }
        Ok(())
    }
}

/// Integrates the background height equation and fills `BackgroundFlow`.
pub fn compute_background(config: &StratifiedConfig) -> Result<BackgroundFlow> {
    config.validate()?;
    let np = config.p_grid_size;
    let nf = 2 * np;
    let dpf = 1.0 / nf as f64;
    let p: Vec<f64> = (0..=nf).map(|k| -1.0 + k as f64 / nf as f64).collect();
    let (height, height_p, height_pp, rho, rho_p) = match config.density_mode {
        DensityMode::Eulerian => eulerian_background(config, &p, dpf),
        DensityMode::SemiLagrangian => semi_lagrangian_background(config, &p, dpf),
    };
    let h0 = height[nf];
    if !((h0 - 1.0).abs() <= config.tol_h) {
        return Err(Error::NormalizationInconsistency {
            h0,
            tol: config.tol_h,
        });
    }
    for (k, &v) in height_p.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::StagnantBackground { node: k / 2, value: v });
        }
    }
    let rho_scale = 1.0;
    let mut rho_p = rho_p;
    for (k, v) in rho_p.iter_mut().enumerate() {
        if *v > 1e-12 * rho_scale {
            return Err(Error::UnstableStratification { node: k / 2, value: *v });
        }
        *v = v.min(0.0);
    }
    let fine = FineBackground {
        p,
        height,
        height_p,
        height_pp,
        rho,
        rho_p,
    };
    let pick = |v: &Vec<f64>| v.iter().step_by(2).copied().collect::<Vec<f64>>();
    let mut p_nodes = pick(&fine.p);
    p_nodes[np] = 0.0;
    let height = pick(&fine.height);
    let height_p = pick(&fine.height_p);
    let height_pp = pick(&fine.height_pp);
    let rho = pick(&fine.rho);
    let rho_p = pick(&fine.rho_p);
    let beta_shear = height_p
        .iter()
        .zip(&height_pp)
        .map(|(hp, hpp)| -hpp / (hp * hp * hp))
        .collect();
    let beta_gravity = height
        .iter()
        .zip(&rho_p)
        .map(|(h, rp)| (h - 1.0) * rp)
        .collect();
    let w = quadrature_weights(np, 1.0 / np as f64, config.quadrature_order);
    let flow_force_shear = height_p.iter().zip(&w).map(|(hp, wj)| wj / hp).sum();
    let flow_force_gravity = (0..=np).map(|j| w[j] * rho[j] * height[j] * height_p[j]).sum();
    let rho0 = match config.density_mode {
        DensityMode::Eulerian => config.density.value(0.0),
        DensityMode::SemiLagrangian => 1.0,
    };
    Ok(BackgroundFlow {
        p_nodes,
        height,
        height_p,
        height_pp,
        rho,
        rho_p,
        beta_shear,
        beta_gravity,
        flow_force_shear,
        flow_force_gravity,
        quadrature_order: config.quadrature_order,
        scales: Scales {
            depth: config.depth,
            rho0,
            gravity: config.gravity,
            wave_speed: config.wave_speed,
            shear_scale: config.shear_scale,
        },
        fine,
    })
}

type Columns = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// One explicit Runge–Kutta step of order 2 (Heun) or 4.
fn rk_step<F: Fn(f64, f64) -> f64>(f: &F, x: f64, y: f64, h: f64, order: u8) -> f64 {
    if order == 4 {
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(x + h, y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    } else {
        let k1 = f(x, y);
        let k2 = f(x + h, y + h * k1);
        y + 0.5 * h * (k1 + k2)
    }
}

fn eulerian_background(config: &StratifiedConfig, p: &[f64], dpf: f64) -> Columns {
    let d = config.depth;
    let rho0 = config.density.value(0.0);
    let ref_speed = (config.gravity * d).sqrt();
    // H_p as a function of H alone
    let slope = |_: f64, h: f64| {
        let y = d * (h - 1.0);
        let r = config.density.value(y) / rho0;
        let u = config.shear.value(y) / ref_speed;
        1.0 / (r.sqrt() * u)
    };
    let n = p.len();
    let mut height = vec![0.0; n];
    for k in 1..n {
        height[k] = rk_step(&slope, p[k - 1], height[k - 1], dpf, config.quadrature_order);
    }
    let mut height_p = vec![0.0; n];
    let mut height_pp = vec![0.0; n];
    let mut rho = vec![0.0; n];
    let mut rho_p = vec![0.0; n];
    for k in 0..n {
        // the surface streamline sits at y = 0 by definition
        let y = if k == n - 1 { 0.0 } else { d * (height[k] - 1.0) };
        let (r, r_y, _) = config.density.eval(y);
        let (u, u_y, _) = config.shear.eval(y);
        let f = 1.0 / ((r / rho0).sqrt() * (u / ref_speed));
        let df_dh = -f * d * (0.5 * r_y / r + u_y / u);
        height_p[k] = f;
        height_pp[k] = df_dh * f;
        rho[k] = r / rho0;
        rho_p[k] = r_y * d * f / rho0;
    }
    rho[n - 1] = 1.0;
    (height, height_p, height_pp, rho, rho_p)
}

fn semi_lagrangian_background(config: &StratifiedConfig, p: &[f64], dpf: f64) -> Columns {
    let slope = |x: f64, _: f64| config.shear.value(x);
    let n = p.len();
    let mut height = vec![0.0; n];
    for k in 1..n {
        height[k] = rk_step(&slope, p[k - 1], height[k - 1], dpf, config.quadrature_order);
    }
    let rho_top = config.density.value(0.0);
    let mut height_p = vec![0.0; n];
    let mut height_pp = vec![0.0; n];
    let mut rho = vec![0.0; n];
    let mut rho_p = vec![0.0; n];
    for k in 0..n {
        let (hp, hpp, _) = config.shear.eval(p[k]);
        let (r, rp, _) = config.density.eval(p[k]);
        height_p[k] = hp;
        height_pp[k] = hpp;
        rho[k] = r / rho_top;
        rho_p[k] = rp / rho_top;
    }
    rho[n - 1] = 1.0;
    (height, height_p, height_pp, rho, rho_p)
}

/// `𝒮 - S_H` for one column, given its discrete slopes. Integrating the
/// nested gravity term by parts makes the terms linear in `w` cancel
/// pointwise, so the difference is evaluated without cancellation.
pub fn flow_force_excess(
    h: &[f64],
    h_p: &[f64],
    h_q: &[f64],
    froude: f64,
    bg: &BackgroundFlow,
    weights: &[f64],
) -> f64 {
    let mu = 1.0 / (froude * froude);
    let mut total = 0.0;
    for j in 0..h.len() {
        let hp_bg = bg.height_p[j];
        let w = h[j] - bg.height[j];
        let wp = h_p[j] - hp_bg;
        let integrand = wp * wp / (2.0 * h_p[j] * hp_bg * hp_bg)
            - h_q[j] * h_q[j] / (2.0 * h_p[j])
            - mu * bg.rho[j] * w * wp;
        total += weights[j] * integrand;
    }
    total
}

fn check_column(h: &[f64], h_p: &[f64]) -> Result<()> {
    for j in 0..h.len() {
        if !(h_p[j] > 0.0) {
            return Err(Error::Stagnation { i: 0, j, value: h_p[j] });
        }
        if j > 0 && !(h[j] > h[j - 1]) {
            return Err(Error::Stagnation { i: 0, j, value: 0.0 });
        }
    }
    Ok(())
}

/// Flow force `𝒮` of a column with slope `h_q`, using the caller's discrete
/// `h_p`.
pub fn flow_force_column(
    h: &[f64],
    h_p: &[f64],
    h_q: &[f64],
    froude: f64,
    bg: &BackgroundFlow,
) -> Result<f64> {
    let n = bg.np() + 1;
    if h.len() != n || h_p.len() != n || h_q.len() != n {
        return Err(Error::Input(format!("column length must be {n}")));
    }
    check_column(h, h_p)?;
    Ok(bg.s_h(froude) + flow_force_excess(h, h_p, h_q, froude, bg, &bg.weights()))
}

/// Flow force of a `q`-independent column `h(p)`.
pub fn flow_force(h: &[f64], froude: f64, bg: &BackgroundFlow) -> Result<f64> {
    let n = bg.np() + 1;
    if h.len() != n {
        return Err(Error::Input(format!("column length must be {n}")));
    }
    let w: Vec<f64> = h.iter().zip(&bg.height).map(|(a, b)| a - b).collect();
    let dw = derivative(&w, bg.dp(), bg.quadrature_order);
    let h_p: Vec<f64> = dw.iter().zip(&bg.height_p).map(|(a, b)| a + b).collect();
    flow_force_column(h, &h_p, &vec![0.0; n], froude, bg)
}

/// Integral of nodal values with the background's quadrature.
pub fn integrate_nodes(values: &[f64], bg: &BackgroundFlow) -> f64 {
    integrate(values, &bg.weights())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_bg(slope: f64, np: usize) -> BackgroundFlow {
        let cfg = StratifiedConfig::semi_lagrangian(
            Profile::Linear { value: 1.0, slope },
            Profile::Constant { value: 1.0 },
            np,
        );
        compute_background(&cfg).unwrap()
    }

    #[test]
    fn constant_data_gives_linear_height() {
        let bg = linear_bg(0.0, 64);
        for (p, h) in bg.p_nodes.iter().zip(&bg.height) {
            assert!((h - (p + 1.0)).abs() < 1e-14);
        }
        assert!(bg.height_p.iter().all(|&v| v == 1.0));
        assert!(bg.beta(1.3).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn laminar_flow_force_closed_form() {
        let bg = linear_bg(0.0, 64);
        for f in [0.7, 1.0, 1.5] {
            let s = flow_force(&bg.height, f, &bg).unwrap();
            assert!((s - (1.0 + 0.5 / (f * f))).abs() < 1e-13);
            assert_eq!(s, bg.s_h(f));
        }
    }

    #[test]
    fn non_monotone_column_is_stagnation() {
        let bg = linear_bg(0.0, 64);
        let mut h = bg.height.clone();
        h[10] = h[9];
        assert!(matches!(flow_force(&h, 1.0, &bg), Err(Error::Stagnation { .. })));
    }

    #[test]
    fn eulerian_constant_data_matches_semi_lagrangian() {
        let cfg = StratifiedConfig {
            density_mode: DensityMode::Eulerian,
            density: Profile::Constant { value: 1000.0 },
            shear: Profile::Constant { value: 1.0 },
            gravity: 9.81,
            depth: 2.0,
            wave_speed: 3.0,
            p_grid_size: 64,
            quadrature_order: 4,
            shear_scale: 1.0,
            tol_h: DEFAULT_TOL_H,
        };
        let norm = normalize_shear(&cfg).unwrap();
        let bg = compute_background(&norm).unwrap();
        for (p, h) in bg.p_nodes.iter().zip(&bg.height) {
            assert!((h - (p + 1.0)).abs() < 1e-12);
        }
        assert!(compute_background(&cfg).is_err());
    }
}
