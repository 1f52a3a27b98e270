//! Quantitative experiments behind the CLI: the linear dispersion relation
//! of a small density perturbation, and self-convergence orders of the
//! time stepper and the spatial discretization.

use crate::eulerian::{evolve, model_rhs, SolverConfig, State};
use crate::integrate::{rk4_step, step_count};
use crate::spectral::{to_spectral, Grid, RealField, TAU};

use super::config::{ConfigError, RunConfig};
use super::preset::initial_state;
use super::{solver_config, HarnessError};

/// Normalized fit residual above which a dispersion measurement is
/// reported as a failed fit rather than a frequency.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;

/// Linearizing either model about the unit rest state turns the density
/// fluctuation into a wave equation whose x-Fourier mode k oscillates at
/// k / sqrt(1 + k^2): the second time derivative couples through one
/// spatial derivative of the velocity and one smoothed gradient of the
/// density, giving the symbol k^2 / (1 + k^2).
pub fn predicted_frequency(k: i64) -> f64 {
    let kk = k as f64;
    kk / (1.0 + kk * kk).sqrt()
}

#[derive(Debug, Clone)]
pub struct DispersionReport {
    pub k: i64,
    pub amplitude: f64,
    pub measured: f64,
    pub predicted: f64,
    /// Normalized root residual of the sinusoid fit at the measured
    /// frequency; near zero for a clean oscillation.
    pub fit_residual: f64,
    pub samples: usize,
}

fn internal(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Internal(e.to_string())
}

fn invalid(detail: String) -> HarnessError {
    HarnessError::Config(ConfigError::Invalid(detail))
}

/// Least-squares residual of fitting A cos(wt) + B sin(wt) + C through
/// the samples, from the 3x3 normal equations.
fn sinusoid_residual_sq(times: &[f64], values: &[f64], omega: f64) -> f64 {
    let mut g = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&t, &y) in times.iter().zip(values) {
        let basis = [(omega * t).cos(), (omega * t).sin(), 1.0];
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] += basis[r] * basis[c];
            }
            rhs[r] += basis[r] * y;
        }
    }
    let Some(coeff) = solve3(g, rhs) else {
        return f64::INFINITY;
    };
    times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let fit = coeff[0] * (omega * t).cos() + coeff[1] * (omega * t).sin() + coeff[2];
            (y - fit) * (y - fit)
        })
        .sum()
}

/// Gaussian elimination with partial pivoting for the tiny normal system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite")
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for c in row + 1..3 {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Golden-section minimization of the fit residual over a frequency
/// bracket; returns the frequency and its normalized residual.
fn fit_frequency(times: &[f64], values: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = sinusoid_residual_sq(times, values, c);
    let mut fd = sinusoid_residual_sq(times, values, d);
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = sinusoid_residual_sq(times, values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = sinusoid_residual_sq(times, values, d);
        }
    }
    let omega = 0.5 * (a + b);
    let res_sq = sinusoid_residual_sq(times, values, omega);
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let var: f64 = values.iter().map(|y| (y - mean) * (y - mean)).sum();
    (omega, (res_sq / var.max(1e-300)).sqrt())
}

/// Evolve n = 1 + a cos(kx), v = 0 over three predicted periods and fit
/// the oscillation frequency of density mode k.
pub fn measure_dispersion(
    cfg: &RunConfig,
    k: i64,
    amplitude: f64,
) -> Result<DispersionReport, HarnessError> {
    cfg.validate()?;
    if k < 1 {
        return Err(invalid(format!("dispersion mode must be >= 1, got {k}")));
    }
    let grid = Grid::new(cfg.dimension, cfg.grid_n).map_err(internal)?;
    if k > grid.dealias_cutoff() {
        return Err(invalid(format!(
            "dispersion mode {k} exceeds the dealiased band of grid.n = {}",
            cfg.grid_n
        )));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(invalid(format!(
            "dispersion amplitude must be positive and finite, got {amplitude}"
        )));
    }

    let n = RealField::scalar_from_fn(grid, |p| 1.0 + amplitude * ((k as f64) * p[0]).cos());
    let v = RealField::zeros(grid, grid.dim());
    let mut state = State::new(0.0, n, v)?;

    let predicted = predicted_frequency(k);
    let t_end = 3.0 * TAU / predicted;
    // Enough samples per period for the fit even under a coarse config dt.
    let dt = cfg.dt.min(t_end / 512.0);
    let steps = step_count(0.0, t_end, dt);
    let scfg = solver_config(cfg);

    let coeff_of = |s: &State| -> Result<f64, HarnessError> {
        Ok(to_spectral(&s.n).map_err(internal)?.coeff(0, [k, 0]).re)
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(coeff_of(&state)?);

    let mut rhs = |s: &State| model_rhs(s, &scfg);
    for i in 1..=steps {
        let t_next = if i == steps { t_end } else { i as f64 * dt };
        let mut next = rk4_step(&state, t_next - state.t, &mut rhs)?;
        next.t = t_next;
        state = next;
        times.push(t_next);
        values.push(coeff_of(&state)?);
    }

    let (measured, fit_residual) = fit_frequency(&times, &values, 0.8 * predicted, 1.2 * predicted);
    if !(fit_residual < FIT_RESIDUAL_LIMIT) {
        return Err(HarnessError::OutOfTolerance {
            what: "dispersion",
            detail: format!(
                "sinusoid fit failed for mode {k}: normalized residual {fit_residual:.3e}"
            ),
        });
    }
    Ok(DispersionReport {
        k,
        amplitude,
        measured,
        predicted,
        fit_residual,
        samples: values.len(),
    })
}

pub fn dispersion_report_text(r: &DispersionReport) -> String {
    format!(
        "experiment = dispersion\nk = {}\namplitude = {:.16e}\nmeasured = {:.16e}\n\
         predicted = {:.16e}\nabs_error = {:.16e}\nfit_residual = {:.16e}\nsamples = {}\n",
        r.k,
        r.amplitude,
        r.measured,
        r.predicted,
        (r.measured - r.predicted).abs(),
        r.fit_residual,
        r.samples
    )
}

// --- convergence ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    Temporal,
    Spatial,
}

impl std::str::FromStr for ConvergenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(ConvergenceMode::Temporal),
            "spatial" => Ok(ConvergenceMode::Spatial),
            other => Err(format!(
                "unknown convergence mode `{other}` (expected temporal or spatial)"
            )),
        }
    }
}

/// Errors below this are treated as exactly converged (steady preset).
pub const DEGENERATE_FLOOR: f64 = 1e-13;
/// Temporal pass band around the stepper's formal order.
pub const TEMPORAL_ORDER_BAND: (f64, f64) = (3.7, 4.3);
/// Finest-level error a spatial study must reach on a smooth preset.
pub const SPATIAL_ERROR_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub mode: ConvergenceMode,
    /// dt values (temporal) or grid sizes (spatial), coarsest first.
    pub parameters: Vec<f64>,
    /// Max-norm end-state error of each level against the reference run.
    pub errors: Vec<f64>,
    /// Mean order over consecutive refinement pairs; NaN when degenerate.
    pub observed_order: f64,
    /// True when every level already sits at round-off.
    pub degenerate: bool,
    pub pass: bool,
}

fn end_state(cfg: &RunConfig, scfg: &SolverConfig, grid_n: usize) -> Result<State, HarnessError> {
    let grid = Grid::new(cfg.dimension, grid_n).map_err(internal)?;
    let s0 = initial_state(grid, cfg.preset, cfg.amplitude_n, cfg.amplitude_v)?;
    let traj = evolve(&s0, scfg, |_, _| {})?;
    if let Some(event) = traj.event {
        return Err(HarnessError::RunEnded { event });
    }
    Ok(traj.final_state)
}

fn state_gap(a: &State, b: &State) -> f64 {
    a.n.max_diff(&b.n).max(a.v.max_diff(&b.v))
}

/// Max-norm gap between a coarse state and the reference sampled at the
/// coarse run's nodes; power-of-two grids share those nodes exactly.
fn nested_gap(coarse: &State, fine: &State) -> f64 {
    let cg = coarse.grid();
    let fg = fine.grid();
    let ratio = fg.n() / cg.n();
    let fine_flat = |flat: usize| -> usize {
        match cg.dim() {
            1 => flat * ratio,
            _ => (flat / cg.n()) * ratio * fg.n() + (flat % cg.n()) * ratio,
        }
    };
    let mut worst: f64 = 0.0;
    for flat in 0..cg.len() {
        let j = fine_flat(flat);
        worst = worst.max((coarse.n.data()[flat] - fine.n.data()[j]).abs());
        for c in 0..cg.dim() {
            worst = worst.max((coarse.v.component(c)[flat] - fine.v.component(c)[j]).abs());
        }
    }
    worst
}

fn mean_order(parameters: &[f64], errors: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..errors.len() - 1 {
        let shrink = errors[i] / errors[i + 1];
        let refine = parameters[i] / parameters[i + 1];
        if shrink > 0.0 && shrink.is_finite() {
            total += shrink.ln() / refine.ln();
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    }
}

fn temporal_study(cfg: &RunConfig) -> Result<ConvergenceReport, HarnessError> {
    let mut scfg = solver_config(cfg);
    scfg.stride = usize::MAX;

    scfg.dt = cfg.dt / 16.0;
    let reference = end_state(cfg, &scfg, cfg.grid_n)?;

    let dts = [4.0 * cfg.dt, 2.0 * cfg.dt, cfg.dt];
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in &dts {
        scfg.dt = dt;
        errors.push(state_gap(&end_state(cfg, &scfg, cfg.grid_n)?, &reference));
    }

    let degenerate = errors.iter().all(|&e| e <= DEGENERATE_FLOOR);
    let observed_order = if degenerate {
        f64::NAN
    } else {
        mean_order(&dts, &errors)
    };
    let (lo, hi) = TEMPORAL_ORDER_BAND;
    let pass = degenerate || (observed_order >= lo && observed_order <= hi);
    Ok(ConvergenceReport {
        mode: ConvergenceMode::Temporal,
        parameters: dts.to_vec(),
        errors,
        observed_order,
        degenerate,
        pass,
    })
}

fn spatial_study(cfg: &RunConfig) -> Result<ConvergenceReport, HarnessError> {
    if cfg.grid_n < 32 {
        return Err(invalid(format!(
            "spatial convergence needs grid.n >= 32 so the coarsest level is a valid grid, got {}",
            cfg.grid_n
        )));
    }
    let mut scfg = solver_config(cfg);
    scfg.stride = usize::MAX;

    let reference = end_state(cfg, &scfg, 2 * cfg.grid_n)?;
    let sizes = [cfg.grid_n / 4, cfg.grid_n / 2, cfg.grid_n];
    let mut errors = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        errors.push(nested_gap(&end_state(cfg, &scfg, n)?, &reference));
    }

    let degenerate = errors.iter().all(|&e| e <= DEGENERATE_FLOOR);
    let observed_order = if degenerate {
        f64::NAN
    } else {
        mean_order(&sizes.map(|n| n as f64), &errors)
    };
    let shrinking = errors.windows(2).all(|w| w[1] < w[0] || w[1] <= DEGENERATE_FLOOR);
    let pass = degenerate || (shrinking && *errors.last().expect("nonempty") <= SPATIAL_ERROR_LIMIT);
    Ok(ConvergenceReport {
        mode: ConvergenceMode::Spatial,
        parameters: sizes.iter().map(|&n| n as f64).collect(),
        errors,
        observed_order,
        degenerate,
        pass,
    })
}

/// Self-convergence study against a refined reference run. Temporal:
/// dt halvings {4dt, 2dt, dt} against a dt/16 reference on one grid.
/// Spatial: grids {N/4, N/2, N} against a 2N reference at the shared
/// nodes, all at the configured dt.
pub fn measure_convergence(
    cfg: &RunConfig,
    mode: ConvergenceMode,
) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    match mode {
        ConvergenceMode::Temporal => temporal_study(cfg),
        ConvergenceMode::Spatial => spatial_study(cfg),
    }
}

pub fn convergence_report_text(r: &ConvergenceReport) -> String {
    let list = |xs: &[f64]| -> String {
        xs.iter()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "experiment = convergence\nmode = {}\nparameters = {}\nerrors = {}\n\
         observed_order = {:.16e}\ndegenerate = {}\npass = {}\n",
        match r.mode {
            ConvergenceMode::Temporal => "temporal",
            ConvergenceMode::Spatial => "spatial",
        },
        list(&r.parameters),
        list(&r.errors),
        r.observed_order,
        r.degenerate,
        r.pass
    )
}
