//! Shooting solvers for the linearized problems at the background flow:
//! the critical parameter `μ_cr = 1/F_cr²`, the Neumann and Dirichlet
//! parameters `μ_N`, `μ_D`, and the Robin spectrum `ν_j` at `μ_cr`.
//!
//! Both problems have the form `(Φ_p/H_p³)_p = b(p) Φ`, integrated with RK4
//! on the pair `(Φ, Φ_p/H_p³)` using the background's midpoint samples.

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::profiles::BackgroundFlow;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOptions {
    pub tol_root: f64,
    pub mu_max: f64,
    pub modes: usize,
    pub nu_step: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tol_root: 1e-10,
            mu_max: 1e4,
            modes: 5,
            nu_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingSolution {
    pub mu: f64,
    pub phi: Vec<f64>,
    pub phi_p: Vec<f64>,
    /// `A(μ) = -Φ_p(0)/H_p(0)³ + μ ρ(0) Φ(0)`.
    pub a_value: f64,
}

/// Integrates `(Φ_p/H_p³)_p = b Φ` with `Φ(-1) = 0`, `Φ_p(-1) = 1`; `b` is
/// sampled on the fine grid. Returns `(Φ, Φ_p/H_p³)` at the nodes.
fn shoot<B: Fn(usize) -> f64>(bg: &BackgroundFlow, b: B) -> (Vec<f64>, Vec<f64>) {
    let n = bg.np();
    let f = &bg.fine;
    let dp = bg.dp();
    let a = |k: usize| f.height_p[k].powi(3);
    let mut phi = vec![0.0; n + 1];
    let mut flux = vec![0.0; n + 1];
    flux[0] = 1.0 / a(0);
    for j in 0..n {
        let (k0, k1, k2) = (2 * j, 2 * j + 1, 2 * j + 2);
        let (y, z) = (phi[j], flux[j]);
        let (f1, g1) = (a(k0) * z, b(k0) * y);
        let (y2, z2) = (y + 0.5 * dp * f1, z + 0.5 * dp * g1);
        let (f2, g2) = (a(k1) * z2, b(k1) * y2);
        let (y3, z3) = (y + 0.5 * dp * f2, z + 0.5 * dp * g2);
        let (f3, g3) = (a(k1) * z3, b(k1) * y3);
        let (y4, z4) = (y + dp * f3, z + dp * g3);
        let (f4, g4) = (a(k2) * z4, b(k2) * y4);
        phi[j + 1] = y + dp / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
        flux[j + 1] = z + dp / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
    }
    (phi, flux)
}

pub fn solve_phi(bg: &BackgroundFlow, mu: f64) -> ShootingSolution {
    let (phi, flux) = shoot(bg, |k| mu * bg.fine.rho_p[k]);
    let n = bg.np();
    let phi_p: Vec<f64> = flux
        .iter()
        .zip(&bg.height_p)
        .map(|(z, hp)| z * hp * hp * hp)
        .collect();
    let a_value = -flux[n] + mu * bg.rho[n] * phi[n];
    ShootingSolution {
        mu,
        phi,
        phi_p,
        a_value,
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Precondition(format!("mu must be finite and >= 0, got {mu}")));
    }
    Ok(())
}

/// `A(μ)` alone.
pub fn a_function(bg: &BackgroundFlow, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(solve_phi(bg, mu).a_value)
}

const GROWTH: f64 = 1.25;

/// Smallest `μ > 0` with `A(μ) = 0`.
pub fn find_mu_cr(bg: &BackgroundFlow, opts: &SpectrumOptions) -> Result<f64> {
    let n = bg.np();
    let a0 = solve_phi(bg, 0.0).a_value;
    if !(a0 < 0.0) {
        return Err(Error::NotFound(format!(
            "critical parameter (A(0) = {a0} is not negative)"
        )));
    }
    let positive = |mu: f64| {
        let s = solve_phi(bg, mu);
        s.phi[n].min(s.phi_p[n])
    };
    let mut lo = 0.0;
    let mut mu = 1e-2;
    let hi = loop {
        if mu > opts.mu_max {
            return Err(Error::NotFound(format!(
                "critical parameter below mu_max = {}",
                opts.mu_max
            )));
        }
        let s = solve_phi(bg, mu);
        if s.phi[n] > 0.0 && s.phi_p[n] > 0.0 {
            if s.a_value > 0.0 {
                break mu;
            }
            if s.a_value == 0.0 {
                return Ok(mu);
            }
            lo = mu;
            mu *= GROWTH;
        } else {
            // Stepped past the first zero of Φ_p(0) or Φ(0); A is positive
            // just below it.
            let edge = bisect(positive, lo, mu, 0.0);
            let mut below = edge;
            while below > lo && !(positive(below) > 0.0) {
                below = lo + 0.999 * (below - lo);
            }
            if !(solve_phi(bg, below).a_value > 0.0) {
                return Err(Error::NotFound(
                    "critical parameter (no sign change of A before the Neumann point)".into(),
                ));
            }
            break below;
        }
    };
    Ok(bisect(|m| solve_phi(bg, m).a_value, lo, hi, 0.0))
}

fn first_root_above<G: Fn(&ShootingSolution) -> f64>(
    bg: &BackgroundFlow,
    start: f64,
    opts: &SpectrumOptions,
    g: G,
) -> f64 {
    let mut lo = start;
    let mut mu = start * GROWTH;
    loop {
        if mu > opts.mu_max {
            return f64::INFINITY;
        }
        let v = g(&solve_phi(bg, mu));
        if v <= 0.0 {
            return bisect(|m| g(&solve_phi(bg, m)), lo, mu, 0.0);
        }
        lo = mu;
        mu *= GROWTH;
    }
}

/// Smallest root of `Φ_p(0; μ)` above `μ_cr`, or `+∞`.
pub fn find_mu_n(bg: &BackgroundFlow, mu_cr: f64, opts: &SpectrumOptions) -> f64 {
    let n = bg.np();
    first_root_above(bg, mu_cr, opts, |s| s.phi_p[n])
}

/// Smallest root of `Φ(0; μ)` above `μ_cr`, or `+∞`.
pub fn find_mu_d(bg: &BackgroundFlow, mu_cr: f64, opts: &SpectrumOptions) -> f64 {
    let n = bg.np();
    first_root_above(bg, mu_cr, opts, |s| s.phi[n])
}

/// Both parameters with the ordering check `μ_cr < μ_N <= μ_D`.
pub fn find_mu_n_d(bg: &BackgroundFlow, mu_cr: f64, opts: &SpectrumOptions) -> Result<(f64, f64)> {
    let mu_n = find_mu_n(bg, mu_cr, opts);
    let mu_d = find_mu_d(bg, mu_cr, opts);
    if mu_n > mu_d || mu_n <= mu_cr {
        return Err(Error::Consistency(format!(
            "parameter ordering violated: mu_cr = {mu_cr}, mu_N = {mu_n}, mu_D = {mu_d}"
        )));
    }
    Ok((mu_n, mu_d))
}

/// Solution of the `M` problem at spectral parameter `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinShot {
    pub nu: f64,
    pub m: Vec<f64>,
    /// `M_p / H_p³` at the nodes.
    pub flux: Vec<f64>,
}

impl RobinShot {
    pub fn top(&self) -> f64 {
        self.m[self.m.len() - 1]
    }

    /// `B(ν) = M_p(0)/M(0)`.
    pub fn b_value(&self, bg: &BackgroundFlow) -> f64 {
        let n = bg.np();
        self.flux[n] * bg.height_p[n].powi(3) / self.m[n]
    }

    /// Sign changes of `M` on `(-1, 0]`.
    pub fn zero_count(&self) -> usize {
        let mut count = 0;
        let mut prev = self.m[1];
        for &v in &self.m[2..] {
            if (v <= 0.0 && prev > 0.0) || (v >= 0.0 && prev < 0.0) {
                count += 1;
            }
            if v != 0.0 {
                prev = v;
            }
        }
        count
    }
}

pub fn solve_m(bg: &BackgroundFlow, mu_cr: f64, nu: f64) -> RobinShot {
    let f = &bg.fine;
    let (m, flux) = shoot(bg, |k| mu_cr * f.rho_p[k] - nu / f.height_p[k]);
    RobinShot { nu, m, flux }
}

/// Robin condition defect `M_p(0)/H_p(0)³ - μ_cr ρ(0) M(0)`; its zeros are
/// the Robin eigenvalues and it has no poles.
pub fn robin_defect(bg: &BackgroundFlow, mu_cr: f64, nu: f64) -> f64 {
    let s = solve_m(bg, mu_cr, nu);
    let n = bg.np();
    s.flux[n] - mu_cr * bg.rho[n] * s.m[n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub mu_cr: f64,
    pub f_cr: f64,
    #[serde(with = "infinite_as_null")]
    pub mu_n: f64,
    #[serde(with = "infinite_as_null")]
    pub mu_d: f64,
    /// `1/√μ_N`, zero when `μ_N = ∞`.
    pub f_n: f64,
    /// `1/√μ_D`, zero when `μ_D = ∞`.
    pub f_d: f64,
    pub nu: Vec<f64>,
    pub nu_dirichlet: Vec<f64>,
    #[serde(skip)]
    pub p_nodes: Vec<f64>,
    #[serde(skip)]
    pub phi_cr: Vec<f64>,
    #[serde(skip)]
    pub phi_cr_p: Vec<f64>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn froude_of(mu: f64) -> f64 {
    if mu.is_finite() {
        1.0 / mu.sqrt()
    } else {
        0.0
    }
}

/// Dirichlet eigenvalues `ν_D^(1..=count)` of the `M` problem: the values
/// where a zero of `M(·; ν)` enters through the surface.
fn dirichlet_eigenvalues(
    bg: &BackgroundFlow,
    mu_cr: f64,
    count: usize,
    nu_max: f64,
    step0: f64,
) -> Result<Vec<f64>> {
    let zeros = |nu: f64| solve_m(bg, mu_cr, nu).zero_count();
    if zeros(0.0) > 0 {
        return Err(Error::StabilityAssumption(
            "a Dirichlet eigenvalue of the M problem is not positive".into(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut lo = 0.0;
    let mut z_lo = 0;
    let mut step = step0;
    while out.len() < count {
        let nu = lo + step;
        if nu > nu_max {
            return Err(Error::NotFound(format!(
                "{} Dirichlet eigenvalues below nu_max = {nu_max}",
                count
            )));
        }
        let z = zeros(nu);
        if z > z_lo + 1 {
            // two poles in one step: refine
            step *= 0.5;
            continue;
        }
        if z == z_lo + 1 {
            let target = z;
            let root = bisect(
                |v| if zeros(v) >= target { 1.0 } else { -1.0 },
                lo,
                nu,
                0.0,
            );
            out.push(root);
            z_lo = z;
            step = step0;
        }
        lo = nu;
    }
    Ok(out)
}

/// Robin spectrum at `μ_cr`: `ν_0` (checked against 0) and `ν_1..=ν_J`.
pub fn robin_spectrum(
    bg: &BackgroundFlow,
    mu_cr: f64,
    modes: usize,
    opts: &SpectrumOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if modes < 1 {
        return Err(Error::Precondition("at least one Robin mode is required".into()));
    }
    let nu_max = (modes as f64 * std::f64::consts::PI).powi(2) + 1e3;
    let dirichlet = dirichlet_eigenvalues(bg, mu_cr, modes + 1, nu_max, opts.nu_step)?;
    let g = |nu: f64| robin_defect(bg, mu_cr, nu);
    let mut left = -1.0;
    while !(g(left) > 0.0) {
        left *= 2.0;
        if left < -1e8 {
            return Err(Error::Consistency("no lower bracket for the ground Robin mode".into()));
        }
    }
    let nu0 = bisect(g, left, dirichlet[0], 0.0);
    if nu0.abs() > 100.0 * opts.tol_root {
        return Err(Error::Consistency(format!(
            "ground Robin eigenvalue is {nu0}, expected 0"
        )));
    }
    let mut nu = vec![nu0];
    for j in 0..modes {
        nu.push(bisect(g, dirichlet[j], dirichlet[j + 1], 0.0));
    }
    Ok((nu, dirichlet))
}

/// Full spectral analysis of a background flow.
pub fn critical_spectrum(bg: &BackgroundFlow, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let mu_cr = find_mu_cr(bg, opts)?;
    let (mu_n, mu_d) = find_mu_n_d(bg, mu_cr, opts)?;
    let (nu, nu_dirichlet) = robin_spectrum(bg, mu_cr, opts.modes, opts)?;
    let sol = solve_phi(bg, mu_cr);
    Ok(SpectrumReport {
        mu_cr,
        f_cr: froude_of(mu_cr),
        mu_n,
        mu_d,
        f_n: froude_of(mu_n),
        f_d: froude_of(mu_d),
        nu,
        nu_dirichlet,
        p_nodes: bg.p_nodes.clone(),
        phi_cr: sol.phi,
        phi_cr_p: sol.phi_p,
    })
}

/// Lowest Robin eigenvalue of the `M` problem at `μ = 1/F²`; its square
/// root is the slow spatial decay rate of the linearized flow at Froude
/// number `F` (zero at `F = F_cr`).
pub fn decay_rate(bg: &BackgroundFlow, froude: f64) -> Result<f64> {
    let mu = 1.0 / (froude * froude);
    let g = |nu: f64| robin_defect(bg, mu, nu);
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NotFound("decay rate bracket".into()));
        }
    }
    let mut lo = hi;
    while !(g(lo) > 0.0) {
        lo -= hi.abs().max(1.0);
        if lo < -1e6 {
            return Err(Error::NotFound("decay rate bracket".into()));
        }
    }
    let nu0 = bisect(g, lo, hi, 0.0);
    Ok(nu0.max(0.0).sqrt())
}
