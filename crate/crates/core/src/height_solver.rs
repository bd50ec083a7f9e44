//! Finite-difference discretization of the height equation on a truncated
//! half-strip and its Newton solver.
//!
//! Unknowns are `w = h - H` at the nodes `(q_i, p_j)`, `j = 0..=Np`, plus a
//! ghost value `w(q_i, p_{Np+1})` above the surface, stored `p`-fastest with
//! stride `Np + 2`. The interior equation in non-divergence form is
//! collocated at every node with `0 < p <= 0` including the surface, where
//! it uses the ghost; the surface condition supplies the extra row. This
//! keeps surface slopes central even when `h_p` grows large near stagnation.
//!
//! Row layout per column `i` (not far-field):
//! `j = 0` bed (`w = 0`), `1 <= j <= Np` interior equation, `j = Np + 1`
//! surface condition. Far-field columns carry the far-field condition in
//! every row except the surface node, which keeps the surface condition.

use crate::banded::{BandLu, BandMatrix, BandRows, BandedError};
use crate::error::{Error, Result};
use crate::profiles::BackgroundFlow;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// Half strip `q >= 0` with even images across `q = 0`.
    Even,
    /// Full strip `[-Q_max, Q_max]`, far-field conditions at both ends.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FarField {
    DirichletZero,
    /// `w_q + κ w = 0` with decay rate `κ`.
    RobinDecay { rate: f64 },
}

pub const MIN_Q_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StripGrid {
    pub q_nodes: Vec<f64>,
    pub p_nodes: Vec<f64>,
    pub nq: usize,
    pub np: usize,
    pub dq: f64,
    pub dp: f64,
    pub symmetry: Symmetry,
    pub farfield: FarField,
}

impl StripGrid {
    /// Half strip `[0, q_max]` with `nq` uniform intervals.
    pub fn new(q_max: f64, nq: usize, bg: &BackgroundFlow, farfield: FarField) -> Result<Self> {
        Self::build(0.0, q_max, nq, bg, Symmetry::Even, farfield)
    }

    /// Half strip with spacing `dq`; `q_max` is rounded up to a multiple.
    pub fn with_spacing(q_max: f64, dq: f64, bg: &BackgroundFlow, farfield: FarField) -> Result<Self> {
        if !(dq > 0.0) {
            return Err(Error::Input(format!("dq must be positive, got {dq}")));
        }
        let nq = (q_max / dq - 1e-9).ceil().max(1.0) as usize;
        Self::build(0.0, nq as f64 * dq, nq, bg, Symmetry::Even, farfield)
    }

    /// Full strip `[-q_max, q_max]` with `2 nq_half` intervals.
    pub fn full_strip(q_max: f64, nq_half: usize, bg: &BackgroundFlow, farfield: FarField) -> Result<Self> {
        Self::build(-q_max, q_max, 2 * nq_half, bg, Symmetry::Full, farfield)
    }

    fn build(
        q0: f64,
        q1: f64,
        nq: usize,
        bg: &BackgroundFlow,
        symmetry: Symmetry,
        farfield: FarField,
    ) -> Result<Self> {
        if !(q1 >= MIN_Q_MAX) || !q1.is_finite() {
            return Err(Error::Input(format!("Q_max must be at least {MIN_Q_MAX}, got {q1}")));
        }
        if nq < 4 {
            return Err(Error::Input("at least 4 q-intervals are required".into()));
        }
        if let FarField::RobinDecay { rate } = farfield {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Input(format!("Robin decay rate must be >= 0, got {rate}")));
            }
        }
        let dq = (q1 - q0) / nq as f64;
        let q_nodes = (0..=nq)
            .map(|i| if i == nq { q1 } else { q0 + i as f64 * dq })
            .collect();
        Ok(Self {
            q_nodes,
            p_nodes: bg.p_nodes.clone(),
            nq,
            np: bg.np(),
            dq,
            dp: bg.dp(),
            symmetry,
            farfield,
        })
    }

    pub fn q_max(&self) -> f64 {
        self.q_nodes[self.nq]
    }

    /// Column index of `q = 0`.
    pub fn crest_index(&self) -> usize {
        match self.symmetry {
            Symmetry::Even => 0,
            Symmetry::Full => self.nq / 2,
        }
    }

    pub fn stride(&self) -> usize {
        self.np + 2
    }

    pub fn unknowns(&self) -> usize {
        (self.nq + 1) * self.stride()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.stride() + j
    }

    pub fn is_far(&self, i: usize) -> bool {
        i == self.nq || (self.symmetry == Symmetry::Full && i == 0)
    }

    /// Left and right neighbour columns of a non-far column, with the even
    /// image at `q = 0`.
    #[inline]
    fn neighbours(&self, i: usize) -> (usize, usize) {
        if i == 0 {
            (1, 1)
        } else {
            (i - 1, i + 1)
        }
    }

    /// Outward one-sided second-order `q`-difference used by Robin rows.
    fn far_stencil(&self, i: usize) -> ([usize; 3], [f64; 3]) {
        let s = 1.0 / (2.0 * self.dq);
        if i == 0 {
            ([0, 1, 2], [3.0 * s, -4.0 * s, s])
        } else {
            ([i, i - 1, i - 2], [3.0 * s, -4.0 * s, s])
        }
    }

    /// Stencil for `w_q` at a far-field column. Under the Robin condition
    /// the condition itself gives `w_q`; otherwise a two-point difference
    /// keeps the surface row inside the band.
    fn far_slope(&self, i: usize) -> ([(usize, f64); 2], usize) {
        let left = i == 0;
        match self.farfield {
            FarField::DirichletZero => {
                let a = 1.0 / self.dq;
                if left {
                    ([(1, a), (0, -a)], 2)
                } else {
                    ([(i, a), (i - 1, -a)], 2)
                }
            }
            FarField::RobinDecay { rate } => {
                let k = if left { rate } else { -rate };
                ([(i, k), (0, 0.0)], 1)
            }
        }
    }

    /// The same strip extended by `extra` at the far end (half strip) or at
    /// both ends (full strip), keeping `dq`.
    pub fn extended(&self, extra: f64, bg: &BackgroundFlow) -> Result<Self> {
        let add = (extra / self.dq).round().max(1.0) as usize;
        match self.symmetry {
            Symmetry::Even => {
                Self::build(0.0, (self.nq + add) as f64 * self.dq, self.nq + add, bg, self.symmetry, self.farfield)
            }
            Symmetry::Full => {
                let half = self.nq / 2 + add;
                let q = half as f64 * self.dq;
                Self::build(-q, q, 2 * half, bg, self.symmetry, self.farfield)
            }
        }
    }

    /// Zeroes the far-field columns for the Dirichlet condition.
    pub fn apply_farfield_zero(&self, w: &mut Array2<f64>) {
        if self.farfield == FarField::DirichletZero {
            for i in 0..=self.nq {
                if self.is_far(i) {
                    w.row_mut(i).fill(0.0);
                }
            }
        }
    }

    fn bandwidth(&self) -> usize {
        match self.farfield {
            FarField::DirichletZero => self.stride() + 1,
            FarField::RobinDecay { .. } => 2 * self.stride(),
        }
    }
}

/// Grid values of `w` and the Froude number.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    /// `(Nq+1) x (Np+1)` streamline displacement.
    pub w: Array2<f64>,
    /// Ghost values above the surface, one per column.
    pub ghost: Vec<f64>,
    pub froude: f64,
    pub converged: bool,
    pub residual_norm: f64,
}

impl WaveState {
    pub fn laminar(grid: &StripGrid, froude: f64) -> Self {
        Self {
            w: Array2::zeros((grid.nq + 1, grid.np + 1)),
            ghost: vec![0.0; grid.nq + 1],
            froude,
            converged: true,
            residual_norm: 0.0,
        }
    }

    /// Wraps grid values, choosing ghost values that satisfy the surface
    /// condition where it is solvable and extrapolating otherwise.
    pub fn with_consistent_ghost(
        w: Array2<f64>,
        froude: f64,
        bg: &BackgroundFlow,
        grid: &StripGrid,
    ) -> Self {
        let ghost = consistent_ghost(&w, froude, bg, grid);
        Self {
            w,
            ghost,
            froude,
            converged: false,
            residual_norm: f64::NAN,
        }
    }

    /// Crest elevation `w(0, 0)`.
    pub fn amplitude(&self, grid: &StripGrid) -> f64 {
        self.w[[grid.crest_index(), grid.np]]
    }

    pub fn pack(&self, grid: &StripGrid) -> Vec<f64> {
        let s = grid.stride();
        let mut x = vec![0.0; grid.unknowns()];
        for i in 0..=grid.nq {
            for j in 0..=grid.np {
                x[i * s + j] = self.w[[i, j]];
            }
            x[i * s + grid.np + 1] = self.ghost[i];
        }
        x
    }

    pub fn unpack(x: &[f64], froude: f64, grid: &StripGrid) -> Self {
        let s = grid.stride();
        let mut w = Array2::zeros((grid.nq + 1, grid.np + 1));
        let mut ghost = vec![0.0; grid.nq + 1];
        for i in 0..=grid.nq {
            for j in 0..=grid.np {
                w[[i, j]] = x[i * s + j];
            }
            ghost[i] = x[i * s + grid.np + 1];
        }
        Self {
            w,
            ghost,
            froude,
            converged: false,
            residual_norm: f64::NAN,
        }
    }

    pub fn check_shape(&self, grid: &StripGrid) -> Result<()> {
        if self.w.dim() != (grid.nq + 1, grid.np + 1) || self.ghost.len() != grid.nq + 1 {
            return Err(Error::Input(format!(
                "state shape {:?} does not match grid ({}, {})",
                self.w.dim(),
                grid.nq + 1,
                grid.np + 1
            )));
        }
        if !(self.froude > 0.0) || !self.froude.is_finite() {
            return Err(Error::Input(format!("Froude number must be positive, got {}", self.froude)));
        }
        Ok(())
    }
}

fn q_slope(w: &Array2<f64>, grid: &StripGrid, i: usize, j: usize) -> f64 {
    if grid.is_far(i) {
        let (st, len) = grid.far_slope(i);
        st[..len].iter().map(|&(c, a)| a * w[[c, j]]).sum()
    } else {
        let (l, r) = grid.neighbours(i);
        (w[[r, j]] - w[[l, j]]) / (2.0 * grid.dq)
    }
}

fn consistent_ghost(w: &Array2<f64>, froude: f64, bg: &BackgroundFlow, grid: &StripGrid) -> Vec<f64> {
    let n = grid.np;
    let mu = 1.0 / (froude * froude);
    let hp0 = bg.height_p[n];
    (0..=grid.nq)
        .map(|i| {
            if grid.is_far(i) && grid.farfield == FarField::DirichletZero {
                return 0.0;
            }
            let hq = q_slope(w, grid, i, n);
            let denom = 1.0 / (hp0 * hp0) - 2.0 * mu * bg.rho[n] * w[[i, n]];
            let hp = if denom > 0.0 {
                (1.0 + hq * hq).sqrt() / denom.sqrt()
            } else {
                hp0 + (3.0 * w[[i, n]] - 4.0 * w[[i, n - 1]] + w[[i, n - 2]]) / (2.0 * grid.dp)
            };
            w[[i, n - 1]] + 2.0 * grid.dp * (hp - hp0)
        })
        .collect()
}

/// Discrete slopes `h_q`, `h_p` at every node, using the solver's stencils
/// (central inside, ghost at the surface, one-sided at the bed and at
/// far-field columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Slopes {
    pub h_q: Array2<f64>,
    pub h_p: Array2<f64>,
}

pub fn slopes(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> Slopes {
    let (nq, n) = (grid.nq, grid.np);
    let w = &state.w;
    let mut h_q = Array2::zeros((nq + 1, n + 1));
    let mut h_p = Array2::zeros((nq + 1, n + 1));
    for i in 0..=nq {
        for j in 0..=n {
            h_q[[i, j]] = q_slope(w, grid, i, j);
            let dw = if j == 0 {
                (-3.0 * w[[i, 0]] + 4.0 * w[[i, 1]] - w[[i, 2]]) / (2.0 * grid.dp)
            } else if j == n {
                (state.ghost[i] - w[[i, n - 1]]) / (2.0 * grid.dp)
            } else {
                (w[[i, j + 1]] - w[[i, j - 1]]) / (2.0 * grid.dp)
            };
            h_p[[i, j]] = bg.height_p[j] + dw;
        }
    }
    Slopes { h_q, h_p }
}

/// One residual row: value, magnitude of its largest term (for the rounding
/// floor), and its sparse derivative.
#[derive(Debug, Clone, Copy)]
struct Row {
    value: f64,
    scale: f64,
    entries: [(usize, f64); 10],
    len: usize,
    d_froude: f64,
}

impl Row {
    fn new(value: f64, scale: f64, d_froude: f64) -> Self {
        Self {
            value,
            scale,
            entries: [(0, 0.0); 10],
            len: 0,
            d_froude,
        }
    }

    #[inline]
    fn push(&mut self, col: usize, v: f64) {
        self.entries[self.len] = (col, v);
        self.len += 1;
    }
}

struct Ctx<'a> {
    bg: &'a BackgroundFlow,
    grid: &'a StripGrid,
    x: &'a [f64],
    mu: f64,
    froude: f64,
}

impl Ctx<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.x[self.grid.idx(i, j)]
    }

    fn interior(&self, i: usize, j: usize) -> Result<Row> {
        let g = self.grid;
        let (l, r) = g.neighbours(i);
        let (dq, dp) = (g.dq, g.dp);
        let bg = self.bg;
        let (hp_bg, hpp_bg, rho_p) = (bg.height_p[j], bg.height_pp[j], bg.rho_p[j]);
        let w0 = self.at(i, j);
        let (wn, ws) = (self.at(i, j + 1), self.at(i, j - 1));
        let (we, ww) = (self.at(r, j), self.at(l, j));
        let (wne, wse, wnw, wsw) = (
            self.at(r, j + 1),
            self.at(r, j - 1),
            self.at(l, j + 1),
            self.at(l, j - 1),
        );
        let hq = (we - ww) / (2.0 * dq);
        let hp = hp_bg + (wn - ws) / (2.0 * dp);
        if !(hp > 0.0) {
            return Err(Error::Stagnation { i, j, value: hp });
        }
        let hqq = (we - 2.0 * w0 + ww) / (dq * dq);
        let hpp = hpp_bg + (wn - 2.0 * w0 + ws) / (dp * dp);
        let hqp = (wne - wse - wnw + wsw) / (4.0 * dq * dp);
        let k = -hpp_bg / (hp_bg * hp_bg * hp_bg);
        let mu = self.mu;
        let hp2 = hp * hp;
        let hp3 = hp2 * hp;
        let t = [
            (1.0 + hq * hq) * hpp,
            -2.0 * hq * hp * hqp,
            hp2 * hqq,
            k * hp3,
            -mu * rho_p * w0 * hp3,
        ];
        let value = t.iter().sum();
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f3 = self.froude.powi(3);
        let mut row = Row::new(value, scale, 2.0 / f3 * rho_p * w0 * hp3);
        let fq = 2.0 * hq * hpp - 2.0 * hp * hqp;
        let fp = -2.0 * hq * hqp + 2.0 * hp * hqq + 3.0 * k * hp2 - 3.0 * mu * rho_p * w0 * hp2;
        let fpp = 1.0 + hq * hq;
        let fqq = hp2;
        let fqp = -2.0 * hq * hp;
        let fw = -mu * rho_p * hp3;
        let (a, b) = (1.0 / (dq * dq), 1.0 / (dp * dp));
        let e = 1.0 / (4.0 * dq * dp);
        row.push(g.idx(i, j), -2.0 * fqq * a - 2.0 * fpp * b + fw);
        row.push(g.idx(i, j + 1), fp / (2.0 * dp) + fpp * b);
        row.push(g.idx(i, j - 1), -fp / (2.0 * dp) + fpp * b);
        row.push(g.idx(r, j), fq / (2.0 * dq) + fqq * a);
        row.push(g.idx(l, j), -fq / (2.0 * dq) + fqq * a);
        row.push(g.idx(r, j + 1), fqp * e);
        row.push(g.idx(r, j - 1), -fqp * e);
        row.push(g.idx(l, j + 1), -fqp * e);
        row.push(g.idx(l, j - 1), fqp * e);
        Ok(row)
    }

    fn surface(&self, i: usize) -> Result<Row> {
        let g = self.grid;
        let n = g.np;
        let bg = self.bg;
        let hp_bg = bg.height_p[n];
        let rho0 = bg.rho[n];
        let w0 = self.at(i, n);
        let hp = hp_bg + (self.at(i, n + 1) - self.at(i, n - 1)) / (2.0 * g.dp);
        if !(hp > 0.0) {
            return Err(Error::Stagnation { i, j: n, value: hp });
        }
        let (stencil, len) = if g.is_far(i) {
            g.far_slope(i)
        } else {
            let (l, r) = g.neighbours(i);
            ([(r, 1.0 / (2.0 * g.dq)), (l, -1.0 / (2.0 * g.dq))], 2)
        };
        let hq: f64 = stencil[..len].iter().map(|&(c, wt)| wt * self.at(c, n)).sum();
        let mu = self.mu;
        let kinetic = (1.0 + hq * hq) / (2.0 * hp * hp);
        let base = 1.0 / (2.0 * hp_bg * hp_bg);
        let value = kinetic - base + mu * rho0 * w0;
        let scale = kinetic.max(base).max((mu * rho0 * w0).abs());
        let mut row = Row::new(value, scale, -2.0 / self.froude.powi(3) * rho0 * w0);
        let gq = hq / (hp * hp);
        let gp = -(1.0 + hq * hq) / (hp * hp * hp);
        row.push(g.idx(i, n), mu * rho0);
        row.push(g.idx(i, n + 1), gp / (2.0 * g.dp));
        row.push(g.idx(i, n - 1), -gp / (2.0 * g.dp));
        for &(c, wt) in &stencil[..len] {
            row.push(g.idx(c, n), gq * wt);
        }
        Ok(row)
    }

    fn farfield(&self, i: usize, j: usize) -> Row {
        let g = self.grid;
        match g.farfield {
            FarField::DirichletZero => {
                let mut row = Row::new(self.at(i, j), self.at(i, j).abs(), 0.0);
                row.push(g.idx(i, j), 1.0);
                row
            }
            FarField::RobinDecay { rate } => {
                let (cols, wts) = g.far_stencil(i);
                let mut value = rate * self.at(i, j);
                let mut row = Row::new(0.0, 0.0, 0.0);
                row.push(g.idx(i, j), rate);
                for k in 0..3 {
                    value += wts[k] * self.at(cols[k], j);
                    row.push(g.idx(cols[k], j), wts[k]);
                }
                row.value = value;
                row.scale = value.abs();
                row
            }
        }
    }

    fn bed(&self, i: usize) -> Row {
        let v = self.at(i, 0);
        let mut row = Row::new(v, v.abs(), 0.0);
        row.push(self.grid.idx(i, 0), 1.0);
        row
    }

    /// Rows of column `i`, in storage order.
    fn column(&self, i: usize) -> Result<Vec<Row>> {
        let n = self.grid.np;
        let mut rows = Vec::with_capacity(n + 2);
        if self.grid.is_far(i) {
            for j in 0..=n + 1 {
                rows.push(if j == n { self.surface(i)? } else { self.farfield(i, j) });
            }
        } else {
            rows.push(self.bed(i));
            for j in 1..=n {
                rows.push(self.interior(i, j)?);
            }
            rows.push(self.surface(i)?);
        }
        Ok(rows)
    }
}

fn context<'a>(x: &'a [f64], froude: f64, bg: &'a BackgroundFlow, grid: &'a StripGrid) -> Ctx<'a> {
    Ctx {
        bg,
        grid,
        x,
        mu: 1.0 / (froude * froude),
        froude,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    /// Rounding level of the residual: a small multiple of machine epsilon
    /// times the largest individual term.
    pub floor: f64,
}

impl ResidualVector {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_grid(bg: &BackgroundFlow, grid: &StripGrid) -> Result<()> {
    if grid.np != bg.np() {
        return Err(Error::Input(format!(
            "grid has Np = {} but background has Np = {}",
            grid.np,
            bg.np()
        )));
    }
    Ok(())
}

/// Residual at packed unknowns `x`.
pub fn residual_packed(x: &[f64], froude: f64, bg: &BackgroundFlow, grid: &StripGrid) -> Result<ResidualVector> {
    check_grid(bg, grid)?;
    let ctx = context(x, froude, bg, grid);
    let s = grid.stride();
    let mut values = vec![0.0; grid.unknowns()];
    let scales: Vec<f64> = values
        .par_chunks_mut(s)
        .enumerate()
        .map(|(i, chunk)| -> Result<f64> {
            let rows = ctx.column(i)?;
            let mut m = 0.0f64;
            for (slot, row) in chunk.iter_mut().zip(&rows) {
                *slot = row.value;
                m = m.max(row.scale);
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scale = scales.into_iter().fold(0.0f64, f64::max);
    Ok(ResidualVector {
        values,
        floor: 64.0 * f64::EPSILON * scale,
    })
}

pub fn residual(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> Result<ResidualVector> {
    state.check_shape(grid)?;
    residual_packed(&state.pack(grid), state.froude, bg, grid)
}

/// Banded Jacobian with respect to the packed unknowns, plus the derivative
/// of the residual with respect to `F`.
#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    pub band: BandMatrix,
    pub d_froude: Vec<f64>,
}

impl JacobianMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.band.matvec(v)
    }

    pub fn factorize(&self) -> Result<BandLu> {
        self.band.clone().factorize().map_err(|e| match e {
            BandedError::Singular(k) => Error::SingularJacobian(k),
            BandedError::Dimension { .. } => Error::Consistency(e.to_string()),
        })
    }
}

pub fn jacobian_packed(x: &[f64], froude: f64, bg: &BackgroundFlow, grid: &StripGrid) -> Result<JacobianMatrix> {
    check_grid(bg, grid)?;
    let ctx = context(x, froude, bg, grid);
    let s = grid.stride();
    let k = grid.bandwidth();
    let mut band = BandMatrix::zeros(grid.unknowns(), k, k);
    let mut d_froude = vec![0.0; grid.unknowns()];
    let blocks: Vec<BandRows<'_>> = band.row_blocks_mut(s);
    blocks
        .into_par_iter()
        .zip(d_froude.par_chunks_mut(s))
        .enumerate()
        .try_for_each(|(i, (mut block, df))| -> Result<()> {
            let rows = ctx.column(i)?;
            let r0 = block.first_row();
            for (jj, row) in rows.iter().enumerate() {
                for &(c, v) in &row.entries[..row.len] {
                    block.add(r0 + jj, c, v);
                }
                df[jj] = row.d_froude;
            }
            Ok(())
        })?;
    Ok(JacobianMatrix { band, d_froude })
}

pub fn jacobian(state: &WaveState, bg: &BackgroundFlow, grid: &StripGrid) -> Result<JacobianMatrix> {
    state.check_shape(grid)?;
    jacobian_packed(&state.pack(grid), state.froude, bg, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried by the line search.
    pub min_damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            min_damping: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual sup-norm before each iteration and at exit.
    pub history: Vec<f64>,
}

fn converged(r: &ResidualVector, tol: f64) -> bool {
    r.sup_norm() < tol.max(r.floor)
}

/// Damped Newton iteration at fixed `F`.
pub fn newton_solve_report(
    guess: &WaveState,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    opts: &NewtonOptions,
) -> Result<(WaveState, NewtonReport)> {
    guess.check_shape(grid)?;
    let froude = guess.froude;
    let mut x = guess.pack(grid);
    let mut r = residual_packed(&x, froude, bg, grid)?;
    let mut history = vec![r.sup_norm()];
    let mut iterations = 0;
    while !converged(&r, opts.tol) {
        if iterations >= opts.max_iter {
            return Err(Error::Nonconvergence { iterations, history });
        }
        let jac = jacobian_packed(&x, froude, bg, grid)?;
        let lu = jac.factorize()?;
        let mut dx: Vec<f64> = r.values.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut dx).map_err(|e| Error::Consistency(e.to_string()))?;
        let merit = r.l2_norm();
        let mut lambda = 1.0;
        let (x_new, r_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            match residual_packed(&trial, froude, bg, grid) {
                Ok(rt) if rt.l2_norm() < (1.0 - 1e-4 * lambda) * merit || converged(&rt, opts.tol) => {
                    break (trial, rt)
                }
                Ok(_) | Err(Error::Stagnation { .. }) => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
            if lambda < opts.min_damping {
                history.push(r.sup_norm());
                return Err(Error::Nonconvergence {
                    iterations: iterations + 1,
                    history,
                });
            }
        };
        x = x_new;
        r = r_new;
        iterations += 1;
        history.push(r.sup_norm());
    }
    let mut state = WaveState::unpack(&x, froude, grid);
    state.converged = true;
    state.residual_norm = r.sup_norm();
    Ok((state, NewtonReport { iterations, history }))
}

pub fn newton_solve(
    guess: &WaveState,
    bg: &BackgroundFlow,
    grid: &StripGrid,
    opts: &NewtonOptions,
) -> Result<WaveState> {
    newton_solve_report(guess, bg, grid, opts).map(|(s, _)| s)
}

/// Bilinear prolongation of `state` onto the grid refined by `factor` in
/// both directions, followed by Newton. `fine_bg` must have
/// `factor * Np` intervals.
pub fn refine_grid(
    state: &WaveState,
    grid: &StripGrid,
    fine_bg: &BackgroundFlow,
    factor: usize,
    opts: &NewtonOptions,
) -> Result<(WaveState, StripGrid)> {
    if !state.converged {
        return Err(Error::Precondition("refine_grid needs a converged state".into()));
    }
    if factor < 1 || fine_bg.np() != factor * grid.np {
        return Err(Error::Precondition(format!(
            "fine background must have {} p-intervals",
            factor * grid.np
        )));
    }
    let fine = StripGrid::build(
        grid.q_nodes[0],
        grid.q_max(),
        factor * grid.nq,
        fine_bg,
        grid.symmetry,
        grid.farfield,
    )?;
    let w = prolong(&state.w, factor);
    let guess = WaveState::with_consistent_ghost(w, state.froude, fine_bg, &fine);
    let out = newton_solve(&guess, fine_bg, &fine, opts)?;
    Ok((out, fine))
}

/// Bilinear interpolation onto a grid refined by `factor` in both indices.
pub fn prolong(w: &Array2<f64>, factor: usize) -> Array2<f64> {
    let (nq1, np1) = w.dim();
    let (nq, np) = (nq1 - 1, np1 - 1);
    let f = factor as f64;
    Array2::from_shape_fn((factor * nq + 1, factor * np + 1), |(i, j)| {
        let (ic, jc) = (i / factor, j / factor);
        let (a, b) = ((i % factor) as f64 / f, (j % factor) as f64 / f);
        let (i1, j1) = ((ic + 1).min(nq), (jc + 1).min(np));
        (1.0 - a) * (1.0 - b) * w[[ic, jc]]
            + a * (1.0 - b) * w[[i1, jc]]
            + (1.0 - a) * b * w[[ic, j1]]
            + a * b * w[[i1, j1]]
    })
}
