//! CSV and JSON import/export.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so files
//! are byte-identical across identical runs and re-read exactly.

use crate::continuation::{CurveLog, CurveRow, Orientation, Tangent};
use crate::error::{Error, Result};
use crate::eulerian::EulerianField;
use crate::height_solver::{FarField, StripGrid, Symmetry, WaveState};
use crate::profiles::{BackgroundFlow, Scales};
use crate::sturm_liouville::SpectrumReport;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut wtr = csv_writer(out);
    wtr.write_record(header).map_err(|e| Error::parse("csv", e))?;
    for row in rows {
        wtr.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(|e| Error::parse("csv", e))?;
    }
    wtr.flush().map_err(|e| Error::io("csv", e))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::parse("json", e))?;
    v.push(b'\n');
    Ok(v)
}

/// Background columns `p, H, H_p, rho, rho_p, beta` with `β` at `froude`.
pub fn write_background_csv<W: Write>(out: W, bg: &BackgroundFlow, froude: f64) -> Result<()> {
    let beta = bg.beta(froude);
    write_rows(
        out,
        &["p", "H", "H_p", "rho", "rho_p", "beta"],
        (0..=bg.np()).map(|j| {
            vec![
                bg.p_nodes[j],
                bg.height[j],
                bg.height_p[j],
                bg.rho[j],
                bg.rho_p[j],
                beta[j],
            ]
        }),
    )
}

/// Critical eigenfunction columns `p, phi, phi_p`.
pub fn write_phi_csv<W: Write>(out: W, spec: &SpectrumReport) -> Result<()> {
    write_rows(
        out,
        &["p", "phi", "phi_p"],
        (0..spec.phi_cr.len()).map(|j| vec![spec.p_nodes[j], spec.phi_cr[j], spec.phi_cr_p[j]]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    pub symmetry: Symmetry,
    pub farfield: FarField,
    pub q_max: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridMeta {
    pub fn of(grid: &StripGrid) -> Self {
        Self {
            symmetry: grid.symmetry,
            farfield: grid.farfield,
            q_max: grid.q_max(),
            nq: grid.nq,
            np: grid.np,
        }
    }

    pub fn build(&self, bg: &BackgroundFlow) -> Result<StripGrid> {
        if self.np != bg.np() {
            return Err(Error::Input(format!(
                "state has Np = {} but the background has Np = {}",
                self.np,
                bg.np()
            )));
        }
        match self.symmetry {
            Symmetry::Even => StripGrid::new(self.q_max, self.nq, bg, self.farfield),
            Symmetry::Full => {
                if self.nq % 2 != 0 {
                    return Err(Error::Input("full strip needs an even Nq".into()));
                }
                StripGrid::full_strip(self.q_max, self.nq / 2, bg, self.farfield)
            }
        }
    }
}

/// Continuation bookkeeping stored next to a branch point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMeta {
    pub index: usize,
    pub s: f64,
    pub ds: f64,
    pub streak: usize,
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<Tangent>,
}

/// JSON sidecar of a WaveState CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSidecar {
    #[serde(rename = "F")]
    pub froude: f64,
    /// `None` when never evaluated.
    pub residual_norm: Option<f64>,
    pub converged: bool,
    pub grid: GridMeta,
    pub ghost: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PointMeta>,
}

impl StateSidecar {
    pub fn of(state: &WaveState, grid: &StripGrid, point: Option<PointMeta>) -> Self {
        Self {
            froude: state.froude,
            residual_norm: state.residual_norm.is_finite().then_some(state.residual_norm),
            converged: state.converged,
            grid: GridMeta::of(grid),
            ghost: state.ghost.clone(),
            point,
        }
    }
}

/// Long-format `q, p, w`, column-major in `q`.
pub fn write_state_csv<W: Write>(out: W, state: &WaveState, grid: &StripGrid) -> Result<()> {
    state.check_shape(grid)?;
    write_rows(
        out,
        &["q", "p", "w"],
        (0..=grid.nq).flat_map(|i| (0..=grid.np).map(move |j| vec![grid.q_nodes[i], grid.p_nodes[j], state.w[[i, j]]])),
    )
}

/// Reads a state exported by [`write_state_csv`] and its sidecar. The grid is
/// rebuilt from the sidecar and every row's coordinates are checked.
pub fn read_state(csv_bytes: &[u8], json_bytes: &[u8], bg: &BackgroundFlow) -> Result<(WaveState, StripGrid, Option<PointMeta>)> {
    let meta: StateSidecar = serde_json::from_slice(json_bytes).map_err(|e| Error::parse("state sidecar", e))?;
    if !meta.froude.is_finite() || meta.froude <= 0.0 {
        return Err(Error::parse("state sidecar", format!("F must be positive, got {}", meta.froude)));
    }
    if meta.grid.nq > 1_000_000 || meta.grid.np > 100_000 {
        return Err(Error::parse("state sidecar", "grid is implausibly large"));
    }
    let grid = meta.grid.build(bg)?;
    if meta.ghost.len() != grid.nq + 1 || meta.ghost.iter().any(|g| !g.is_finite()) {
        return Err(Error::parse("state sidecar", "ghost values do not match the grid"));
    }
    if let Some(t) = meta.point.as_ref().and_then(|p| p.tangent.as_ref()) {
        if t.x.len() != grid.unknowns() || !t.froude.is_finite() || t.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse("state sidecar", "tangent does not match the grid"));
        }
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_bytes);
    let header = rdr.headers().map_err(|e| Error::parse("state csv", e))?;
    if header.iter().collect::<Vec<_>>() != ["q", "p", "w"] {
        return Err(Error::parse("state csv", "header must be q,p,w"));
    }
    let mut w = Array2::zeros((grid.nq + 1, grid.np + 1));
    let expected = (grid.nq + 1) * (grid.np + 1);
    let mut count = 0usize;
    for rec in rdr.deserialize::<(f64, f64, f64)>() {
        let (q, p, v) = rec.map_err(|e| Error::parse("state csv", e))?;
        if count >= expected {
            return Err(Error::parse("state csv", "too many rows"));
        }
        let (i, j) = (count / (grid.np + 1), count % (grid.np + 1));
        let tol = 1e-9 * (1.0 + grid.q_max());
        if !((q - grid.q_nodes[i]).abs() <= tol && (p - grid.p_nodes[j]).abs() <= 1e-9) || !v.is_finite() {
            return Err(Error::parse(
                "state csv",
                format!("row {} = ({q}, {p}, {v}) does not match node ({i}, {j})", count + 1),
            ));
        }
        w[[i, j]] = v;
        count += 1;
    }
    if count != expected {
        return Err(Error::parse("state csv", format!("expected {expected} rows, got {count}")));
    }
    let state = WaveState {
        w,
        ghost: meta.ghost,
        froude: meta.froude,
        converged: meta.converged,
        residual_norm: meta.residual_norm.unwrap_or(f64::NAN),
    };
    Ok((state, grid, meta.point))
}

pub fn save_state(dir: &Path, stem: &str, state: &WaveState, grid: &StripGrid, point: Option<PointMeta>) -> Result<()> {
    let mut buf = Vec::new();
    write_state_csv(&mut buf, state, grid)?;
    write_atomic(&dir.join(format!("{stem}.csv")), &buf)?;
    write_atomic(&dir.join(format!("{stem}.json")), &to_json(&StateSidecar::of(state, grid, point))?)
}

pub fn load_state(dir: &Path, stem: &str, bg: &BackgroundFlow) -> Result<(WaveState, StripGrid, Option<PointMeta>)> {
    let cp = dir.join(format!("{stem}.csv"));
    let jp = dir.join(format!("{stem}.json"));
    let c = std::fs::read(&cp).map_err(|e| Error::io(&cp, e))?;
    let j = std::fs::read(&jp).map_err(|e| Error::io(&jp, e))?;
    read_state(&c, &j, bg)
}

pub const CURVE_HEADER: [&str; 12] = [
    "index",
    "s",
    "F",
    "amplitude",
    "min_hp",
    "max_hp",
    "N_s",
    "flow_force_drift",
    "norm_w",
    "f_minus_fcr",
    "q_max",
    "gate_passed",
];

pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow]) -> Result<()> {
    let mut wtr = csv_writer(out);
    wtr.write_record(CURVE_HEADER).map_err(|e| Error::parse("curve csv", e))?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.index.to_string()];
        rec.extend(
            [
                r.s,
                r.froude,
                r.amplitude,
                r.min_hp,
                r.max_hp,
                r.n_s,
                r.flow_force_drift,
                r.norm_w,
                r.f_minus_fcr,
                r.q_max,
            ]
            .iter()
            .map(|v| fmt_f64(*v)),
        );
        rec.push(r.gate_passed.to_string());
        wtr.write_record(&rec).map_err(|e| Error::parse("curve csv", e))?;
    }
    wtr.flush().map_err(|e| Error::io("curve csv", e))
}

/// Reads a curve CSV; indices must count up from 0.
pub fn read_curve_csv(bytes: &[u8]) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr.headers().map_err(|e| Error::parse("curve csv", e))?;
    if header.iter().collect::<Vec<_>>() != CURVE_HEADER {
        return Err(Error::parse("curve csv", "unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<CurveRow>() {
        let row = rec.map_err(|e| Error::parse("curve csv", e))?;
        if row.index != rows.len() {
            return Err(Error::parse(
                "curve csv",
                format!("row {} has index {}", rows.len(), row.index),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Terminal status written next to the curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveStatus {
    pub termination_reason: Option<crate::continuation::TerminationReason>,
    pub detail: String,
    pub points: usize,
    pub flagged_points: usize,
}

impl From<&CurveLog> for CurveStatus {
    fn from(log: &CurveLog) -> Self {
        Self {
            termination_reason: log.termination_reason,
            detail: log.detail.clone(),
            points: log.rows.len(),
            flagged_points: log.flagged_points(),
        }
    }
}

/// Long format `x, p, y, u, v, P, psi, E` over every streamline node.
pub fn write_eulerian_csv<W: Write>(out: W, f: &EulerianField) -> Result<()> {
    let (nq1, n1) = f.u.dim();
    write_rows(
        out,
        &["x", "p", "y", "u", "v", "P", "psi", "E"],
        (0..nq1).flat_map(|i| {
            (0..n1).map(move |j| {
                vec![
                    f.x_nodes[i],
                    f.p_nodes[j],
                    f.streamline_y[[i, j]],
                    f.u[[i, j]],
                    f.v[[i, j]],
                    f.pressure[[i, j]],
                    f.psi[[i, j]],
                    f.bernoulli[[i, j]],
                ]
            })
        }),
    )
}

/// Surface profile `x, eta`.
pub fn write_surface_csv<W: Write>(out: W, f: &EulerianField) -> Result<()> {
    write_rows(out, &["x", "eta"], f.x_nodes.iter().zip(&f.eta).map(|(x, e)| vec![*x, *e]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianSidecar {
    pub q_bern: f64,
    pub q_bern_mismatch: f64,
    #[serde(rename = "F")]
    pub froude: f64,
    pub c: f64,
    pub max_surface_pressure: f64,
    pub scales: Scales,
}

impl EulerianSidecar {
    pub fn of(f: &EulerianField, bg: &BackgroundFlow) -> Self {
        Self {
            q_bern: f.q_bern_upstream,
            q_bern_mismatch: f.q_bern_mismatch(),
            froude: f.froude,
            c: f.c,
            max_surface_pressure: f.max_surface_pressure(),
            scales: bg.scales,
        }
    }
}
