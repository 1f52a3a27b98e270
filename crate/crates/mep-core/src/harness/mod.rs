//! Batch front end: configuration files, presets, run orchestration,
//! CSV/snapshot artifacts, and the property-check and experiment drivers
//! behind the command-line interface.
//!
//! Error handling is split by exit code. Problems with the inputs or the
//! environment (bad configuration, unreadable files) are *errors* in the
//! usual sense and map to exit code 1. A run that starts correctly but
//! ends in a detected blow-up, a structural breakdown, or a quantitative
//! criterion failure is a *finding*; artifacts are still written and the
//! process exits with code 2 so scripts can tell the outcomes apart.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod preset;
pub mod snapshot;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostics::{DiagnosticsRecord, Event};
use crate::eulerian::{evolve, SolverConfig, SolverError, State};
use crate::lagrangian::{
    cross_validate, evolve_lagrangian, FlowState, LagrangianError,
};
use crate::spectral::Grid;

use config::{ConfigError, RunConfig, SolverChoice};
use snapshot::{Snapshot, SnapshotError};

/// Exact column order of `diagnostics.csv`.
pub const CSV_HEADER: &str = "t,H1,H2,mass,momentum,sobolev_v,sobolev_n,sigma_n,sigma_v,event";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Snapshot(#[from] SnapshotError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
    /// The run stopped on a detected event; artifacts are on disk.
    #[error("run stopped at t={:.6}: {event}", event.time())]
    RunEnded { event: Event },
    #[error("solver gap {max_gap:.3e} exceeds tolerance {tolerance:.3e}")]
    CompareExceeded { max_gap: f64, tolerance: f64 },
    /// A check suite or experiment completed but missed its criterion.
    #[error("{detail}")]
    OutOfTolerance {
        what: &'static str,
        detail: String,
    },
}

impl HarnessError {
    /// First token of the machine-readable `error: <category>: <detail>`
    /// line printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Snapshot(_) => "snapshot",
            HarnessError::Io { .. } => "io",
            HarnessError::Internal(_) => "internal",
            HarnessError::RunEnded { event } => match event {
                Event::BlowUp { .. } => "blowup",
                Event::Breakdown { .. } => "breakdown",
            },
            HarnessError::CompareExceeded { .. } => "compare",
            HarnessError::OutOfTolerance { what, .. } => what,
        }
    }

    /// 1 for input or environment problems, 2 for runs that completed the
    /// pipeline but ended in a detected event or missed criterion.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Snapshot(_)
            | HarnessError::Io { .. }
            | HarnessError::Internal(_) => 1,
            HarnessError::RunEnded { .. }
            | HarnessError::CompareExceeded { .. }
            | HarnessError::OutOfTolerance { .. } => 2,
        }
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        // Mid-run failures are converted to events by the solvers
        // themselves; anything surfacing here is a setup problem.
        HarnessError::Internal(e.to_string())
    }
}

impl From<LagrangianError> for HarnessError {
    fn from(e: LagrangianError) -> Self {
        HarnessError::Internal(e.to_string())
    }
}

/// Summary of a finished (non-event) run, for the CLI to print.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub csv: PathBuf,
    pub records: usize,
    pub snapshots: usize,
    pub t_final: f64,
    pub max_cfl: f64,
    /// Largest cross-solver gap, present for `solver = compare` runs.
    pub max_gap: Option<f64>,
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        model: cfg.model,
        blowup_threshold: cfg.blowup_threshold,
        stride: cfg.stride,
        ..SolverConfig::default()
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Create the output directory and remove artifacts of a previous run so
/// the directory afterwards holds exactly this run's files. Only the
/// harness's own file names are touched.
fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    let io = |source: std::io::Error| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let stale = matches!(
            name.as_ref(),
            "diagnostics.csv" | "compare.csv" | "config.resolved" | "report.txt"
        ) || (name.starts_with("snapshot_") && name.ends_with(".txt"));
        if stale {
            std::fs::remove_file(entry.path()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        r.t,
        r.h1,
        r.h2,
        r.mass,
        r.momentum,
        r.sobolev_v,
        r.sobolev_n,
        r.sigma_n,
        r.sigma_v,
        r.event
    )
}

/// Streams diagnostics rows and per-record snapshots into the output
/// directory. Write failures inside solver callbacks are parked and
/// re-raised once the solver returns.
struct ArtifactSink {
    dir: PathBuf,
    csv: BufWriter<File>,
    csv_path: PathBuf,
    index: usize,
    deferred: Option<HarnessError>,
}

impl ArtifactSink {
    fn new(dir: &Path) -> Result<Self, HarnessError> {
        let csv_path = dir.join("diagnostics.csv");
        let file = File::create(&csv_path).map_err(|source| HarnessError::Io {
            path: csv_path.clone(),
            source,
        })?;
        let mut csv = BufWriter::new(file);
        writeln!(csv, "{CSV_HEADER}").map_err(|source| HarnessError::Io {
            path: csv_path.clone(),
            source,
        })?;
        Ok(ArtifactSink {
            dir: dir.to_path_buf(),
            csv,
            csv_path,
            index: 0,
            deferred: None,
        })
    }

    fn push(&mut self, snap: Snapshot, rec: &DiagnosticsRecord) {
        if self.deferred.is_some() {
            return;
        }
        if let Err(source) = writeln!(self.csv, "{}", csv_row(rec)) {
            self.deferred = Some(HarnessError::Io {
                path: self.csv_path.clone(),
                source,
            });
            return;
        }
        let path = self.dir.join(format!("snapshot_{:06}.txt", self.index));
        if let Err(e) = snap.write_to(&path) {
            self.deferred = Some(e.into());
            return;
        }
        self.index += 1;
    }

    /// Flush and hand back the snapshot count, or the first parked error.
    fn finish(mut self) -> Result<usize, HarnessError> {
        if let Some(e) = self.deferred {
            return Err(e);
        }
        self.csv.flush().map_err(|source| HarnessError::Io {
            path: self.csv_path,
            source,
        })?;
        Ok(self.index)
    }
}

fn outcome(
    cfg: &RunConfig,
    records: usize,
    snapshots: usize,
    t_final: f64,
    max_cfl: f64,
) -> RunOutcome {
    RunOutcome {
        output_dir: cfg.output_dir.clone(),
        csv: cfg.output_dir.join("diagnostics.csv"),
        records,
        snapshots,
        t_final,
        max_cfl,
        max_gap: None,
    }
}

fn run_eulerian(cfg: &RunConfig, s0: &State) -> Result<RunOutcome, HarnessError> {
    let scfg = solver_config(cfg);
    let mut sink = ArtifactSink::new(&cfg.output_dir)?;
    let traj = evolve(s0, &scfg, |state, rec| {
        sink.push(Snapshot::from_state(state), rec);
    })?;
    let snapshots = sink.finish()?;
    if let Some(event) = traj.event {
        return Err(HarnessError::RunEnded { event });
    }
    Ok(outcome(
        cfg,
        traj.records.len(),
        snapshots,
        traj.final_state.t,
        traj.max_cfl,
    ))
}

fn run_lagrangian(cfg: &RunConfig, f0: &FlowState) -> Result<RunOutcome, HarnessError> {
    let scfg = solver_config(cfg);
    let mut sink = ArtifactSink::new(&cfg.output_dir)?;
    let traj = evolve_lagrangian(f0, &scfg, |flow, _, rec| {
        sink.push(Snapshot::from_flow(flow), rec);
    })?;
    let snapshots = sink.finish()?;
    if let Some(event) = traj.event {
        return Err(HarnessError::RunEnded { event });
    }
    Ok(outcome(
        cfg,
        traj.records.len(),
        snapshots,
        traj.final_flow.t,
        traj.max_cfl,
    ))
}

fn run_compare(cfg: &RunConfig, s0: &State) -> Result<RunOutcome, HarnessError> {
    let scfg = solver_config(cfg);
    let report = cross_validate(s0, &scfg)?;

    let mut table = String::from("t,n_gap,v_gap\n");
    for i in 0..report.times.len() {
        table.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            report.times[i], report.n_gap[i], report.v_gap[i]
        ));
    }
    write_text(&cfg.output_dir.join("compare.csv"), &table)?;

    let pass = report.max_gap <= cfg.compare_tolerance
        && report.eulerian_event.is_none()
        && report.lagrangian_event.is_none();
    let mut summary = String::new();
    summary.push_str(&format!("max_gap = {:.16e}\n", report.max_gap));
    summary.push_str(&format!("tolerance = {:.16e}\n", cfg.compare_tolerance));
    summary.push_str(&format!("compared_records = {}\n", report.times.len()));
    summary.push_str(&format!(
        "eulerian_event = {}\n",
        report
            .eulerian_event
            .as_ref()
            .map_or("none".to_string(), |e| e.to_string())
    ));
    summary.push_str(&format!(
        "lagrangian_event = {}\n",
        report
            .lagrangian_event
            .as_ref()
            .map_or("none".to_string(), |e| e.to_string())
    ));
    summary.push_str(&format!("pass = {pass}\n"));
    write_text(&cfg.output_dir.join("report.txt"), &summary)?;

    if let Some(event) = report.eulerian_event.or(report.lagrangian_event) {
        return Err(HarnessError::RunEnded { event });
    }
    if report.max_gap > cfg.compare_tolerance {
        return Err(HarnessError::CompareExceeded {
            max_gap: report.max_gap,
            tolerance: cfg.compare_tolerance,
        });
    }
    let records = report.times.len();
    let t_final = report.times.last().copied().unwrap_or(s0.t);
    let mut out = outcome(cfg, records, 0, t_final, f64::NAN);
    out.max_gap = Some(report.max_gap);
    Ok(out)
}

/// Write an experiment report plus the resolved-config echo into the
/// output directory, leaving any existing run artifacts alone. Returns
/// the report path.
pub fn write_report(cfg: &RunConfig, text: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| HarnessError::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    write_text(&cfg.output_dir.join("config.resolved"), &cfg.resolved_text())?;
    let path = cfg.output_dir.join("report.txt");
    write_text(&path, text)?;
    Ok(path)
}

/// Execute one configured run from its preset initial state. The output
/// directory receives `config.resolved`, `diagnostics.csv` (or `compare.csv` plus
/// `report.txt`), and one numbered snapshot per diagnostics record.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    write_text(&cfg.output_dir.join("config.resolved"), &cfg.resolved_text())?;

    let grid = Grid::new(cfg.dimension, cfg.grid_n)
        .map_err(|e| HarnessError::Internal(e.to_string()))?;
    let s0 = preset::initial_state(grid, cfg.preset, cfg.amplitude_n, cfg.amplitude_v)?;

    match cfg.solver {
        SolverChoice::Eulerian => run_eulerian(cfg, &s0),
        SolverChoice::Lagrangian => {
            let f0 = FlowState::from_eulerian(&s0)?;
            run_lagrangian(cfg, &f0)
        }
        SolverChoice::Compare => run_compare(cfg, &s0),
    }
}

/// Continue a run from a stored snapshot up to the configured end time.
/// The snapshot must match the configured solver kind and grid; output
/// artifacts are written to the configured directory as a fresh run.
pub fn resume(cfg: &RunConfig, snapshot_path: &Path) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    if cfg.solver == SolverChoice::Compare {
        return Err(ConfigError::Invalid(
            "resume supports solver = eulerian or lagrangian, not compare".to_string(),
        )
        .into());
    }
    let snap = Snapshot::read_from(snapshot_path)?;
    prepare_dir(&cfg.output_dir)?;
    write_text(&cfg.output_dir.join("config.resolved"), &cfg.resolved_text())?;
    let grid = Grid::new(cfg.dimension, cfg.grid_n)
        .map_err(|e| HarnessError::Internal(e.to_string()))?;

    match cfg.solver {
        SolverChoice::Eulerian => {
            let s0 = snap.to_state(grid)?;
            run_eulerian(cfg, &s0)
        }
        SolverChoice::Lagrangian => {
            let f0 = snap.to_flow(grid)?;
            run_lagrangian(cfg, &f0)
        }
        SolverChoice::Compare => unreachable!("rejected above"),
    }
}
