//! Subcommands behind the `strata` binary.
//!
//! Every command that writes files does so into a run directory holding one
//! `manifest.json` (config snapshot, input and output digests) and guarded
//! by `run.lock` while the command runs. Data files never contain
//! timestamps, so identical inputs give byte-identical outputs.

pub mod manifest;

use manifest::{file_digest, RunLock, RunManifest, MANIFEST_FILE};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use strata_core::config::{self, LoadedConfig};
use strata_core::continuation::{
    start_point, ContinuationPoint, CurveLog, CurveRow, TerminationReason, Tracer,
};
use strata_core::diagnostics::{diagnose, DiagnosticsReport};
use strata_core::eulerian::reconstruct;
use strata_core::height_solver::{newton_solve_report, FarField, StripGrid, WaveState, MIN_Q_MAX};
use strata_core::io::{self as sio, CurveStatus, EulerianSidecar, PointMeta};
use strata_core::profiles::{compute_background, normalize_shear, BackgroundFlow};
use strata_core::small_amplitude::{build_guess, compute_constants, ReducedConstants, DECAY_LENGTHS, EPSILON_GUESS_MAX};
use strata_core::sturm_liouville::{critical_spectrum, decay_rate, SpectrumReport};
use strata_core::{Category, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SETUP: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.category() {
            Category::Input => EXIT_INPUT,
            Category::Setup => EXIT_SETUP,
            Category::Nonconvergence => EXIT_NONCONVERGENCE,
            Category::Internal => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Result of a command: exit code, machine summary and human text.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub summary: Value,
    pub text: String,
}

/// Exit code for a continuation stop.
pub fn termination_exit_code(reason: TerminationReason) -> i32 {
    match reason {
        TerminationReason::StagnationThreshold | TerminationReason::UserLimit => EXIT_OK,
        TerminationReason::DomainLimit => EXIT_SETUP,
        TerminationReason::NewtonFailure
        | TerminationReason::StepUnderflow
        | TerminationReason::ShelfDetected
        | TerminationReason::BranchPoint => EXIT_NONCONVERGENCE,
    }
}

/// Loaded configuration, background and spectrum.
pub struct Setup {
    pub config_path: PathBuf,
    pub config_text: String,
    pub loaded: LoadedConfig,
    pub bg: BackgroundFlow,
    pub spec: SpectrumReport,
}

impl Setup {
    pub fn load(config_path: &Path) -> Result<Self, CliError> {
        let config_path = config_path
            .canonicalize()
            .map_err(|e| CliError::input(format!("cannot open config {}: {e}", config_path.display())))?;
        let config_text = std::fs::read_to_string(&config_path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", config_path.display())))?;
        let loaded = config::load(&config_path)?;
        let normalized = normalize_shear(&loaded.stratified)?;
        let bg = compute_background(&normalized)?;
        let spec = critical_spectrum(&bg, &loaded.run.spectrum)?;
        Ok(Self {
            config_path,
            config_text,
            loaded,
            bg,
            spec,
        })
    }

    pub fn constants(&self) -> Result<ReducedConstants, CliError> {
        Ok(compute_constants(&self.bg, &self.spec)?)
    }

    /// Config file and tables with their digests.
    pub fn input_digests(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut out = BTreeMap::new();
        out.insert(self.config_path.display().to_string(), file_digest(&self.config_path)?);
        for t in &self.loaded.table_files {
            let p = t.canonicalize().unwrap_or_else(|_| t.clone());
            out.insert(p.display().to_string(), file_digest(&p)?);
        }
        Ok(out)
    }

    fn manifest(&self, command: &str) -> Result<RunManifest, CliError> {
        Ok(RunManifest::new(
            command,
            &self.config_path,
            self.config_text.clone(),
            self.input_digests()?,
        ))
    }
}

/// An open run directory: lock held, manifest in memory.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
    _lock: RunLock,
}

impl RunDir {
    /// Creates `path` for a new run; refuses a directory that already holds one.
    pub fn create(path: &Path, manifest: RunManifest) -> Result<Self, CliError> {
        std::fs::create_dir_all(path).map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
        let lock = RunLock::acquire(path)?;
        if path.join(MANIFEST_FILE).exists() {
            return Err(CliError::input(format!(
                "{} already contains a run; use --resume or another --out",
                path.display()
            )));
        }
        let dir = Self {
            path: path.to_path_buf(),
            manifest,
            _lock: lock,
        };
        dir.manifest.save(&dir.path)?;
        Ok(dir)
    }

    /// Opens an existing run and verifies every recorded output digest.
    pub fn open(path: &Path) -> Result<Self, CliError> {
        if !path.is_dir() {
            return Err(CliError::input(format!("{} is not a directory", path.display())));
        }
        let manifest = RunManifest::load(path)?;
        let lock = RunLock::acquire(path)?;
        manifest.verify_outputs(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            manifest,
            _lock: lock,
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let full = self.path.join(rel);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
        }
        sio::write_atomic(&full, bytes)?;
        self.manifest.record(&self.path, rel)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let bytes = sio::to_json(value)?;
        self.write(rel, &bytes)
    }

    pub fn write_state(&mut self, stem: &str, state: &WaveState, grid: &StripGrid, point: Option<PointMeta>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        sio::write_state_csv(&mut buf, state, grid)?;
        self.write(&format!("{stem}.csv"), &buf)?;
        self.write_json(&format!("{stem}.json"), &sio::StateSidecar::of(state, grid, point))
    }

    pub fn finish(&mut self) -> Result<(), CliError> {
        self.manifest.finished_unix = Some(manifest::now_unix());
        self.manifest.save(&self.path)
    }

    /// State stems in the run: continuation points in order, else the single wave.
    pub fn state_stems(&self) -> Vec<String> {
        let mut pts: Vec<String> = self
            .manifest
            .outputs
            .keys()
            .filter(|k| k.starts_with("points/point_") && k.ends_with(".csv"))
            .map(|k| k.trim_end_matches(".csv").to_string())
            .collect();
        pts.sort();
        if pts.is_empty() && self.manifest.outputs.contains_key("wave.csv") {
            pts.push("wave".into());
        }
        pts
    }
}

fn spectrum_outputs(dir: &mut RunDir, s: &Setup, froude: f64) -> Result<(), CliError> {
    dir.write_json("spectrum.json", &s.spec)?;
    let mut buf = Vec::new();
    sio::write_phi_csv(&mut buf, &s.spec)?;
    dir.write("phi_cr.csv", &buf)?;
    buf.clear();
    sio::write_background_csv(&mut buf, &s.bg, froude)?;
    dir.write("background.csv", &buf)
}

fn froude_text(f: f64) -> String {
    if f > 0.0 {
        format!("{f:.6}")
    } else {
        "none".into()
    }
}

pub fn cmd_critical(config_path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let s = Setup::load(config_path)?;
    let sp = &s.spec;
    if let Some(out) = out {
        let mut dir = RunDir::create(out, s.manifest("critical")?)?;
        spectrum_outputs(&mut dir, &s, sp.f_cr)?;
        dir.finish()?;
    }
    let text = format!(
        "F_cr = {:.6}\nmu_cr = {:.9}\nF_N = {}\nF_D = {}\nnu = {:?}\n",
        sp.f_cr,
        sp.mu_cr,
        froude_text(sp.f_n),
        froude_text(sp.f_d),
        sp.nu
    );
    Ok(Outcome {
        code: EXIT_OK,
        summary: serde_json::to_value(sp).map_err(|e| CliError::internal(e.to_string()))?,
        text,
    })
}

/// Strip half-width used for a wave at `epsilon`.
pub fn strip_for(s: &Setup, consts: &ReducedConstants, epsilon: f64) -> Result<StripGrid, CliError> {
    let q_max = (DECAY_LENGTHS / consts.decay_rate(epsilon)).max(MIN_Q_MAX);
    let froude = 1.0 / (s.spec.mu_cr - epsilon).sqrt();
    let grid = &s.loaded.run.grid;
    let farfield = match grid.farfield {
        strata_core::continuation::FarFieldChoice::DirichletZero => FarField::DirichletZero,
        strata_core::continuation::FarFieldChoice::RobinDecay => FarField::RobinDecay {
            rate: decay_rate(&s.bg, froude)?,
        },
    };
    Ok(StripGrid::with_spacing(q_max, grid.dq, &s.bg, farfield)?)
}

pub fn cmd_solve(config_path: &Path, epsilon: f64, out: Option<&Path>) -> Result<Outcome, CliError> {
    if !(epsilon > 0.0 && epsilon <= EPSILON_GUESS_MAX) {
        return Err(CliError::input(format!(
            "--epsilon must lie in (0, {EPSILON_GUESS_MAX}], got {epsilon}"
        )));
    }
    let s = Setup::load(config_path)?;
    let consts = s.constants()?;
    let grid = strip_for(&s, &consts, epsilon)?;
    let guess = build_guess(&s.bg, &s.spec, &consts, epsilon, &grid)?.into_state(&s.bg, &grid);
    let (state, newton) = newton_solve_report(&guess, &s.bg, &grid, &s.loaded.run.solver)?;
    let report = diagnose(&state, &s.bg, &grid, &s.spec, &s.loaded.run.diagnostics)?;
    if let Some(out) = out {
        let mut dir = RunDir::create(out, s.manifest("solve")?)?;
        spectrum_outputs(&mut dir, &s, state.froude)?;
        dir.write_state("wave", &state, &grid, None)?;
        dir.write_json("diagnostics.json", &report)?;
        dir.finish()?;
    }
    let text = format!(
        "epsilon = {epsilon}\nF = {:.9}\namplitude = {:.6e}\nnewton iterations = {}\nresidual = {:.3e}\ndiagnostics: {}\n",
        state.froude,
        state.amplitude(&grid),
        newton.iterations,
        state.residual_norm,
        if report.all_pass() { "all pass" } else { "some checks failed" }
    );
    Ok(Outcome {
        code: EXIT_OK,
        summary: json!({
            "epsilon": epsilon,
            "F": state.froude,
            "amplitude": state.amplitude(&grid),
            "newton_iterations": newton.iterations,
            "residual_norm": state.residual_norm,
            "all_pass": report.all_pass(),
            "diagnostics": report,
        }),
        text,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ContinueArgs {
    pub max_points: Option<usize>,
    pub resume: bool,
}

fn point_stem(index: usize) -> String {
    format!("points/point_{index:05}")
}

fn curve_csv(rows: &[CurveRow]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    sio::write_curve_csv(&mut buf, rows)?;
    Ok(buf)
}

pub fn cmd_continue(
    config_path: &Path,
    out: &Path,
    args: &ContinueArgs,
    progress: &mut dyn FnMut(&CurveRow),
) -> Result<Outcome, CliError> {
    let s = Setup::load(config_path)?;
    let consts = s.constants()?;
    let mut opts = s.loaded.continuation_options();
    if let Some(n) = args.max_points {
        if n == 0 {
            return Err(CliError::input("--max-points must be at least 1"));
        }
        opts.max_points = n;
    }
    opts.validate()?;
    let tracer = Tracer {
        bg: &s.bg,
        f_cr: s.spec.f_cr,
        opts: &opts,
    };

    let (mut dir, mut rows, start, start_tangent, emit_start) = if args.resume {
        let dir = RunDir::open(out)?;
        if dir.manifest.command != "continue" {
            return Err(CliError::input(format!("{} is not a continuation run", out.display())));
        }
        if dir.manifest.inputs != s.input_digests()? {
            return Err(CliError::input("config or table digests differ from the run being resumed"));
        }
        let curve = std::fs::read(out.join("curve.csv")).map_err(|e| CliError::input(format!("cannot read curve.csv: {e}")))?;
        let rows = sio::read_curve_csv(&curve)?;
        let last = rows.len().checked_sub(1).ok_or_else(|| CliError::input("curve.csv has no points"))?;
        let (state, grid, meta) = sio::load_state(out, &point_stem(last), &s.bg)?;
        let meta = meta.filter(|m| m.index == last).ok_or_else(|| CliError::input("last point has no continuation metadata"))?;
        let mut start = ContinuationPoint::restore(
            meta.index,
            meta.s,
            state,
            grid,
            &s.bg,
            s.spec.f_cr,
            meta.ds,
            meta.streak,
            meta.orientation,
            opts.newton.tol,
        );
        start.tangent = meta.tangent;
        (dir, rows, start, None, false)
    } else {
        let dir = RunDir::create(out, s.manifest("continue")?)?;
        let (start, t) = start_point(&s.bg, &s.spec, &consts, &opts)?;
        (dir, Vec::new(), start, Some(t), true)
    };
    if emit_start {
        spectrum_outputs(&mut dir, &s, s.spec.f_cr)?;
    }

    let mut io_error: Option<CliError> = None;
    let mut on_point = |p: &ContinuationPoint| -> strata_core::Result<()> {
        let row = CurveRow::from(p);
        let meta = PointMeta {
            index: p.index,
            s: p.s,
            ds: p.ds,
            streak: p.streak,
            orientation: p.orientation,
            tangent: p.tangent.clone(),
        };
        rows.push(row.clone());
        let res = (|| {
            dir.write_state(&point_stem(p.index), &p.state, &p.grid, Some(meta))?;
            dir.write("curve.csv", &curve_csv(&rows)?)?;
            dir.manifest.save(&dir.path)
        })();
        if let Err(e) = res {
            let msg = e.message.clone();
            io_error = Some(e);
            return Err(Error::Consistency(msg));
        }
        progress(&row);
        Ok(())
    };
    let outcome = tracer.run(start, start_tangent, emit_start, &mut on_point);
    if let Some(e) = io_error {
        return Err(e);
    }
    let (reason, detail) = outcome?;
    let log = CurveLog {
        rows,
        termination_reason: Some(reason),
        detail,
    };
    let status = CurveStatus::from(&log);
    dir.write_json("curve.json", &status)?;
    dir.finish()?;
    let last = log.rows.last();
    let text = format!(
        "termination: {} ({})\npoints: {}\nflagged points: {}\nlast F = {}\nlast max h_p = {}\n",
        reason.as_str(),
        log.detail,
        log.rows.len(),
        status.flagged_points,
        last.map_or(f64::NAN, |r| r.froude),
        last.map_or(f64::NAN, |r| r.max_hp),
    );
    Ok(Outcome {
        code: termination_exit_code(reason),
        summary: json!({ "status": status, "last": last }),
        text,
    })
}

/// Reloads the setup a run was made with. `config_override` must match the
/// stored snapshot.
fn setup_for_run(dir: &RunDir, config_override: Option<&Path>) -> Result<Setup, CliError> {
    let path = config_override.map_or_else(|| PathBuf::from(&dir.manifest.config_path), Path::to_path_buf);
    let s = Setup::load(&path)?;
    if s.config_text != dir.manifest.config_snapshot {
        return Err(CliError::input(format!(
            "{} differs from the config snapshot in the manifest",
            path.display()
        )));
    }
    if config_override.is_none() {
        dir.manifest.verify_inputs()?;
    }
    Ok(s)
}

pub fn cmd_diagnose(run_dir: &Path, config_override: Option<&Path>) -> Result<Outcome, CliError> {
    let mut dir = RunDir::open(run_dir)?;
    let stems = dir.state_stems();
    if stems.is_empty() {
        return Err(CliError::input(format!("{} contains no wave states", run_dir.display())));
    }
    let s = setup_for_run(&dir, config_override)?;
    let opts = s.loaded.run.diagnostics;
    let reports: Vec<DiagnosticsReport> = stems
        .par_iter()
        .map(|stem| -> Result<DiagnosticsReport, CliError> {
            let (state, grid, _) = sio::load_state(&dir.path, stem, &s.bg)?;
            Ok(diagnose(&state, &s.bg, &grid, &s.spec, &opts)?)
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from(
        "state,F,amplitude,flow_force_drift,froude_identity_residual,crest_identity_residual,froude_upper_margin,pressure_bound_min,velocity_bound_margin,gate,all_pass\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(String::new, sio::fmt_f64);
    let f = sio::fmt_f64;
    for (stem, r) in stems.iter().zip(&reports) {
        let name = stem.rsplit('/').next().unwrap_or(stem);
        dir.write_json(&format!("diagnostics/{name}.json"), r)?;
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{},{},{}\n",
            f(r.froude),
            f(r.amplitude),
            f(r.flow_force_drift),
            opt(r.froude_identity_residual),
            f(r.crest_identity_residual),
            f(r.froude_upper_margin),
            opt(r.pressure_bound_min),
            opt(r.velocity_bound_margin),
            r.gate(),
            r.all_pass()
        ));
    }
    dir.write("diagnostics/summary.csv", csv.as_bytes())?;
    dir.manifest.save(&dir.path)?;
    let passing = reports.iter().filter(|r| r.all_pass()).count();
    Ok(Outcome {
        code: EXIT_OK,
        summary: json!({ "reports": reports.len(), "all_pass": passing }),
        text: format!("{} reports written, {} pass every check\n", reports.len(), passing),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
struct JsonExport<'a> {
    x: &'a [f64],
    eta: &'a [f64],
    #[serde(flatten)]
    sidecar: EulerianSidecar,
}

/// Writes the Eulerian fields of one state under `export/`.
pub fn export_state(
    dir: &mut RunDir,
    name: &str,
    state: &WaveState,
    grid: &StripGrid,
    bg: &BackgroundFlow,
    format: ExportFormat,
) -> Result<(), CliError> {
    let field = reconstruct(state, bg, grid)?;
    let sidecar = EulerianSidecar::of(&field, bg);
    match format {
        ExportFormat::Csv => {
            let mut buf = Vec::new();
            sio::write_eulerian_csv(&mut buf, &field)?;
            dir.write(&format!("export/{name}_eulerian.csv"), &buf)?;
            buf.clear();
            sio::write_surface_csv(&mut buf, &field)?;
            dir.write(&format!("export/{name}_surface.csv"), &buf)?;
            dir.write_json(&format!("export/{name}_eulerian.json"), &sidecar)
        }
        ExportFormat::Json => dir.write_json(
            &format!("export/{name}.json"),
            &JsonExport {
                x: &field.x_nodes,
                eta: &field.eta,
                sidecar,
            },
        ),
    }
}

pub fn cmd_export(run_dir: &Path, format: ExportFormat, config_override: Option<&Path>) -> Result<Outcome, CliError> {
    let mut dir = RunDir::open(run_dir)?;
    let stems = dir.state_stems();
    if stems.is_empty() {
        return Err(CliError::input(format!("{} contains no wave states", run_dir.display())));
    }
    let s = setup_for_run(&dir, config_override)?;
    for stem in &stems {
        let (state, grid, _) = sio::load_state(&dir.path, stem, &s.bg)?;
        let name = stem.rsplit('/').next().unwrap_or(stem).to_string();
        export_state(&mut dir, &name, &state, &grid, &s.bg, format)?;
    }
    dir.manifest.save(&dir.path)?;
    Ok(Outcome {
        code: EXIT_OK,
        summary: json!({ "exported": stems.len() }),
        text: format!("{} states exported to {}\n", stems.len(), run_dir.join("export").display()),
    })
}
