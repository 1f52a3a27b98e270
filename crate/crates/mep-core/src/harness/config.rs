//! Flat key=value run configuration: parsing, validation, defaults, and
//! the resolved echo written into every output directory.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment
//! anywhere; blank lines ignored. Unknown and duplicate keys are
//! rejected so a typo cannot silently fall back to a default. The
//! resolved echo lists every key with its effective value and parses
//! back to the identical configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eulerian::Model;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected key = value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {detail}")]
    BadValue {
        line: usize,
        key: String,
        detail: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Which solver the run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Eulerian,
    Lagrangian,
    /// Run both and compare the recovered fields.
    Compare,
}

/// Built-in initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    /// n = 1, v = 0: fixed point of both models.
    Steady,
    /// n = 1 + a_n cos x, v = a_v sin x (tensorized for dimension 2).
    Analytic,
    /// Periodized bump: n = 1 + a_n (e^{cos x} - mean)/(peak - mean).
    Gaussian,
    /// Analytic profile with default a_n = 5: drives the blow-up guard.
    Large,
}

/// Fully resolved run configuration. Field defaults are documented on
/// the keys below and applied by `parse_str`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `dimension`: 1 or 2 (default 1).
    pub dimension: usize,
    /// `grid.n`: points per axis, power of two >= 8 (default 128).
    pub grid_n: usize,
    /// `dt`: time step (default 1e-3).
    pub dt: f64,
    /// `t_end`: final time (default 1.0).
    pub t_end: f64,
    /// `model`: `mep` or `euler_poisson` (default mep).
    pub model: Model,
    /// `solver`: `eulerian`, `lagrangian`, or `compare` (default eulerian).
    pub solver: SolverChoice,
    /// `preset`: `steady`, `analytic`, `gaussian`, `large` (default analytic).
    pub preset: PresetName,
    /// `preset.amplitude_n`: density perturbation amplitude
    /// (default 0.2; 5.0 when the preset is `large`).
    pub amplitude_n: f64,
    /// `preset.amplitude_v`: velocity amplitude (default 0.1).
    pub amplitude_v: f64,
    /// `output.dir`: artifact directory (default `out`).
    pub output_dir: PathBuf,
    /// `output.stride`: steps between diagnostics records (default 100).
    pub stride: usize,
    /// `seed`: RNG seed for randomized check suites (default 0).
    pub seed: u64,
    /// `blowup.threshold`: Sobolev-norm level declaring blow-up (default 1e6).
    pub blowup_threshold: f64,
    /// `gevrey.s`: norm scale in (0,1) (default 0.5).
    pub gevrey_s: f64,
    /// `gevrey.sigma`: Sobolev index of the diagnostics (default 2.0).
    pub gevrey_sigma: f64,
    /// `gevrey.jmax`: derivative-order cap (default 24).
    pub gevrey_jmax: usize,
    /// `compare.tolerance`: solver-gap bound for `compare` exit 0 (default 1e-6).
    pub compare_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 1,
            grid_n: 128,
            dt: 1e-3,
            t_end: 1.0,
            model: Model::Modified,
            solver: SolverChoice::Eulerian,
            preset: PresetName::Analytic,
            amplitude_n: 0.2,
            amplitude_v: 0.1,
            output_dir: PathBuf::from("out"),
            stride: 100,
            seed: 0,
            blowup_threshold: 1e6,
            gevrey_s: 0.5,
            gevrey_sigma: 2.0,
            gevrey_jmax: 24,
            compare_tolerance: 1e-6,
        }
    }
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        detail: format!("cannot parse `{value}`"),
    })
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut amplitude_n_set = false;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: stripped.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    detail: "empty value".to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            let bad = |detail: &str| ConfigError::BadValue {
                line,
                key: key.to_string(),
                detail: detail.to_string(),
            };
            match key {
                "dimension" => cfg.dimension = parse_num(line, key, value)?,
                "grid.n" => cfg.grid_n = parse_num(line, key, value)?,
                "dt" => cfg.dt = parse_num(line, key, value)?,
                "t_end" => cfg.t_end = parse_num(line, key, value)?,
                "model" => {
                    cfg.model = match value {
                        "mep" => Model::Modified,
                        "euler_poisson" => Model::EulerPoisson,
                        _ => return Err(bad("expected mep or euler_poisson")),
                    }
                }
                "solver" => {
                    cfg.solver = match value {
                        "eulerian" => SolverChoice::Eulerian,
                        "lagrangian" => SolverChoice::Lagrangian,
                        "compare" => SolverChoice::Compare,
                        _ => return Err(bad("expected eulerian, lagrangian, or compare")),
                    }
                }
                "preset" => {
                    cfg.preset = match value {
                        "steady" => PresetName::Steady,
                        "analytic" => PresetName::Analytic,
                        "gaussian" => PresetName::Gaussian,
                        "large" => PresetName::Large,
                        _ => return Err(bad("expected steady, analytic, gaussian, or large")),
                    }
                }
                "preset.amplitude_n" => {
                    cfg.amplitude_n = parse_num(line, key, value)?;
                    amplitude_n_set = true;
                }
                "preset.amplitude_v" => cfg.amplitude_v = parse_num(line, key, value)?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                "output.stride" => cfg.stride = parse_num(line, key, value)?,
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "blowup.threshold" => cfg.blowup_threshold = parse_num(line, key, value)?,
                "gevrey.s" => cfg.gevrey_s = parse_num(line, key, value)?,
                "gevrey.sigma" => cfg.gevrey_sigma = parse_num(line, key, value)?,
                "gevrey.jmax" => cfg.gevrey_jmax = parse_num(line, key, value)?,
                "compare.tolerance" => cfg.compare_tolerance = parse_num(line, key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        if cfg.preset == PresetName::Large && !amplitude_n_set {
            cfg.amplitude_n = 5.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reject value combinations no run can execute. Called by the
    /// parsers; also the entry point for programmatically built configs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.dimension != 1 && self.dimension != 2 {
            return fail(format!("dimension must be 1 or 2, got {}", self.dimension));
        }
        if self.grid_n < 8 || !self.grid_n.is_power_of_two() {
            return fail(format!(
                "grid.n must be a power of two >= 8, got {}",
                self.grid_n
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return fail(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return fail(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if self.stride == 0 {
            return fail("output.stride must be >= 1".to_string());
        }
        if !(self.blowup_threshold > 0.0) {
            return fail(format!(
                "blowup.threshold must be positive, got {}",
                self.blowup_threshold
            ));
        }
        if !(self.gevrey_s > 0.0 && self.gevrey_s < 1.0) {
            return fail(format!("gevrey.s must lie in (0,1), got {}", self.gevrey_s));
        }
        if !(self.gevrey_sigma > 1.5) {
            return fail(format!(
                "gevrey.sigma must exceed 1.5, got {}",
                self.gevrey_sigma
            ));
        }
        if self.gevrey_jmax == 0 || self.gevrey_jmax > 200 {
            return fail(format!(
                "gevrey.jmax must lie in 1..=200, got {}",
                self.gevrey_jmax
            ));
        }
        if !(self.compare_tolerance > 0.0) {
            return fail(format!(
                "compare.tolerance must be positive, got {}",
                self.compare_tolerance
            ));
        }
        if !self.amplitude_n.is_finite() || !self.amplitude_v.is_finite() {
            return fail("preset amplitudes must be finite".to_string());
        }
        if self.solver != SolverChoice::Eulerian {
            // The flow-map solver implements the modified one-dimensional
            // system only; anything else must fail loudly at config time.
            if self.dimension != 1 {
                return fail(format!(
                    "solver `{}` requires dimension = 1",
                    solver_name(self.solver)
                ));
            }
            if self.model != Model::Modified {
                return fail(format!(
                    "solver `{}` requires model = mep",
                    solver_name(self.solver)
                ));
            }
        }
        Ok(())
    }
}

fn solver_name(s: SolverChoice) -> &'static str {
    match s {
        SolverChoice::Eulerian => "eulerian",
        SolverChoice::Lagrangian => "lagrangian",
        SolverChoice::Compare => "compare",
    }
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Modified => "mep",
        Model::EulerPoisson => "euler_poisson",
    }
}

fn preset_name(p: PresetName) -> &'static str {
    match p {
        PresetName::Steady => "steady",
        PresetName::Analytic => "analytic",
        PresetName::Gaussian => "gaussian",
        PresetName::Large => "large",
    }
}

impl RunConfig {
    /// Canonical echo with every key and its effective value; parses
    /// back to the same configuration.
    pub fn resolved_text(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("dimension", self.dimension.to_string());
        kv("grid.n", self.grid_n.to_string());
        kv("dt", format!("{}", self.dt));
        kv("t_end", format!("{}", self.t_end));
        kv("model", model_name(self.model).to_string());
        kv("solver", solver_name(self.solver).to_string());
        kv("preset", preset_name(self.preset).to_string());
        kv("preset.amplitude_n", format!("{}", self.amplitude_n));
        kv("preset.amplitude_v", format!("{}", self.amplitude_v));
        kv("output.dir", self.output_dir.display().to_string());
        kv("output.stride", self.stride.to_string());
        kv("seed", self.seed.to_string());
        kv("blowup.threshold", format!("{}", self.blowup_threshold));
        kv("gevrey.s", format!("{}", self.gevrey_s));
        kv("gevrey.sigma", format!("{}", self.gevrey_sigma));
        kv("gevrey.jmax", self.gevrey_jmax.to_string());
        kv("compare.tolerance", format!("{}", self.compare_tolerance));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_echo() {
        let cfg = RunConfig::parse_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let echoed = RunConfig::parse_str(&cfg.resolved_text()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn comments_blanks_and_spacing_are_tolerated() {
        let text = "
            # leading comment
            grid.n = 64   # trailing comment
            dt=5e-4
            preset = gaussian
        ";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.grid_n, 64);
        assert_eq!(cfg.dt, 5e-4);
        assert_eq!(cfg.preset, PresetName::Gaussian);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse_str("grd.n = 64"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse_str("dt = 1e-3\ndt = 2e-3"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse_str("just some words"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn values_are_validated() {
        assert!(RunConfig::parse_str("grid.n = 100").is_err(), "not a power of two");
        assert!(RunConfig::parse_str("dt = -1").is_err());
        assert!(RunConfig::parse_str("dt = nan").is_err());
        assert!(RunConfig::parse_str("gevrey.s = 1.5").is_err());
        assert!(RunConfig::parse_str("solver = trapezoid").is_err());
        assert!(RunConfig::parse_str("output.stride = 0").is_err());
    }

    #[test]
    fn flow_map_solver_is_gated_to_its_domain() {
        assert!(RunConfig::parse_str("solver = lagrangian\ndimension = 2").is_err());
        assert!(RunConfig::parse_str("solver = compare\nmodel = euler_poisson").is_err());
        assert!(RunConfig::parse_str("solver = lagrangian").is_ok());
        assert!(RunConfig::parse_str("solver = eulerian\ndimension = 2").is_ok());
    }

    #[test]
    fn large_preset_changes_the_amplitude_default_only_when_unset() {
        assert_eq!(RunConfig::parse_str("preset = large").unwrap().amplitude_n, 5.0);
        assert_eq!(
            RunConfig::parse_str("preset = large\npreset.amplitude_n = 2.0")
                .unwrap()
                .amplitude_n,
            2.0
        );
        assert_eq!(RunConfig::parse_str("").unwrap().amplitude_n, 0.2);
    }

    #[test]
    fn nondefault_config_round_trips_through_the_echo() {
        let text = "
            dimension = 2
            grid.n = 32
            dt = 2.5e-3
            t_end = 0.125
            model = euler_poisson
            preset = large
            preset.amplitude_n = 0.7
            preset.amplitude_v = 0.05
            output.dir = scratch/run1
            output.stride = 7
            seed = 42
            blowup.threshold = 1e4
            gevrey.s = 0.25
            gevrey.sigma = 3
            gevrey.jmax = 12
            compare.tolerance = 1e-8
        ";
        let cfg = RunConfig::parse_str(text).unwrap();
        let echoed = RunConfig::parse_str(&cfg.resolved_text()).unwrap();
        assert_eq!(echoed, cfg);
    }
}
