//! TOML run configuration and CSV profile tables.
//!
//! ```toml
//! [physics]
//! gravity = 9.81
//! depth = 1.0
//! wave_speed = 1.0
//!
//! [density]
//! mode = "semi_lagrangian"   # or "eulerian"
//! profile = "linear"
//! value = 1.0
//! slope = -0.3
//!
//! [shear]
//! profile = "table"
//! file = "shear.csv"         # relative to the config file
//!
//! [grid]
//! p_nodes = 40
//! dq = 0.5
//! farfield = "dirichlet_zero"
//! ```
//!
//! Optional sections `[solver]`, `[continuation]`, `[spectrum]` and
//! `[diagnostics]` override the library defaults field by field.

use crate::continuation::{ContinuationOptions, FarFieldChoice};
use crate::diagnostics::DiagnosticsOptions;
use crate::error::{Error, Result};
use crate::height_solver::NewtonOptions;
use crate::numerics::CubicSpline;
use crate::profiles::{DensityMode, Profile, StratifiedConfig, DEFAULT_P_NODES, DEFAULT_TOL_H};
use crate::sturm_liouville::SpectrumOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub gravity: f64,
    pub depth: f64,
    pub wave_speed: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            depth: 1.0,
            wave_speed: 1.0,
        }
    }
}

/// One profile: an analytic family or a two-column CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    Linear { value: f64, slope: f64 },
    Exponential { value: f64, rate: f64 },
    Tanh { value: f64, jump: f64, center: f64, width: f64 },
    Table { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySection {
    #[serde(default = "default_mode")]
    pub mode: DensityMode,
    #[serde(flatten)]
    pub spec: ProfileSpec,
}

fn default_mode() -> DensityMode {
    DensityMode::SemiLagrangian
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub p_nodes: usize,
    pub quadrature_order: u8,
    pub tol_h: f64,
    pub dq: f64,
    pub farfield: FarFieldChoice,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            p_nodes: DEFAULT_P_NODES,
            quadrature_order: 4,
            tol_h: DEFAULT_TOL_H,
            dq: 0.5,
            farfield: FarFieldChoice::DirichletZero,
        }
    }
}

/// The file as written. `[continuation]` may not set `dq` or `farfield`;
/// those belong to `[grid]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub physics: PhysicsSection,
    pub density: DensitySection,
    pub shear: ProfileSpec,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: NewtonOptions,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
}

/// A parsed configuration with its tables loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub stratified: StratifiedConfig,
    /// Resolved paths of the CSV tables that were read.
    pub table_files: Vec<PathBuf>,
}

impl LoadedConfig {
    /// Continuation options with the `[grid]` and `[solver]` settings applied.
    pub fn continuation_options(&self) -> ContinuationOptions {
        let mut c = self.run.continuation.clone();
        c.dq = self.run.grid.dq;
        c.farfield = self.run.grid.farfield;
        c.newton = self.run.solver;
        c
    }
}

/// Parses the TOML text without touching the file system.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::parse("config", e.message()))?;
    if let Some(toml::Value::Table(c)) = table.get("continuation") {
        for key in ["dq", "farfield", "newton"] {
            if c.contains_key(key) {
                return Err(Error::parse(
                    "config",
                    format!("[continuation] may not set `{key}`; use [grid] or [solver]"),
                ));
            }
        }
    }
    let run: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::parse("config", e.message()))?;
    if !(run.grid.dq > 0.0 && run.grid.dq.is_finite()) {
        return Err(Error::Input(format!("grid.dq must be positive, got {}", run.grid.dq)));
    }
    Ok(run)
}

/// Reads `(coordinate, value)` rows from CSV bytes with a header row.
pub fn parse_table_csv(bytes: &[u8]) -> Result<CubicSpline> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr.headers().map_err(|e| Error::parse("table", e))?;
    if headers.len() != 2 {
        return Err(Error::parse("table", format!("expected 2 columns, header has {}", headers.len())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
        let (a, b) = rec.map_err(|e| Error::parse("table", format!("row {}: {e}", k + 1)))?;
        x.push(a);
        y.push(b);
    }
    CubicSpline::new(x, y).map_err(|e| Error::parse("table", e))
}

fn resolve_profile(spec: &ProfileSpec, base: &Path, files: &mut Vec<PathBuf>) -> Result<Profile> {
    Ok(match spec {
        ProfileSpec::Constant { value } => Profile::Constant { value: *value },
        ProfileSpec::Linear { value, slope } => Profile::Linear {
            value: *value,
            slope: *slope,
        },
        ProfileSpec::Exponential { value, rate } => Profile::Exponential {
            value: *value,
            rate: *rate,
        },
        ProfileSpec::Tanh {
            value,
            jump,
            center,
            width,
        } => Profile::Tanh {
            value: *value,
            jump: *jump,
            center: *center,
            width: *width,
        },
        ProfileSpec::Table { file } => {
            let path = base.join(file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let spline = parse_table_csv(&bytes).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(&path, message),
                other => other,
            })?;
            files.push(path);
            Profile::Table(spline)
        }
    })
}

/// Builds and validates the stratified configuration; table paths are
/// resolved against `base`.
pub fn resolve(run: RunConfig, base: &Path) -> Result<LoadedConfig> {
    let mut files = Vec::new();
    let density = resolve_profile(&run.density.spec, base, &mut files)?;
    let shear = resolve_profile(&run.shear, base, &mut files)?;
    let stratified = StratifiedConfig {
        density_mode: run.density.mode,
        density,
        shear,
        gravity: run.physics.gravity,
        depth: run.physics.depth,
        wave_speed: run.physics.wave_speed,
        p_grid_size: run.grid.p_nodes,
        quadrature_order: run.grid.quadrature_order,
        shear_scale: 1.0,
        tol_h: run.grid.tol_h,
    };
    stratified.validate()?;
    let loaded = LoadedConfig {
        run,
        stratified,
        table_files: files,
    };
    loaded.continuation_options().validate()?;
    Ok(loaded)
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let run = parse_run_config(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(run, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let run = parse_run_config(
            "[density]\nprofile = \"constant\"\nvalue = 1.0\n[shear]\nprofile = \"constant\"\nvalue = 1.0\n",
        )
        .unwrap();
        assert_eq!(run.grid.p_nodes, DEFAULT_P_NODES);
        assert_eq!(run.density.mode, DensityMode::SemiLagrangian);
        assert_eq!(run.solver, NewtonOptions::default());
    }

    #[test]
    fn continuation_may_not_shadow_grid_keys() {
        let e = parse_run_config(
            "[density]\nprofile = \"constant\"\nvalue = 1.0\n[shear]\nprofile = \"constant\"\nvalue = 1.0\n[continuation]\ndq = 0.25\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("[grid]"));
    }

    #[test]
    fn table_needs_header_and_two_columns() {
        let ok = parse_table_csv(b"p,rho\n-1,1.3\n-0.5,1.15\n-0.25,1.075\n0,1\n").unwrap();
        assert_eq!(ok.domain(), (-1.0, 0.0));
        assert!(parse_table_csv(b"p,rho,x\n-1,1,1\n").is_err());
        assert!(parse_table_csv(b"p,rho\n-1,abc\n").is_err());
    }
}
