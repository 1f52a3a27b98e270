//! Grid-based time evolution. Two right-hand sides share one integrator:
//! the modified system closes the potential with the smoothing inverse
//! (I - Lap)^{-1}, the full system solves the nonlinear elliptic balance
//! Lap(phi) - e^phi + n = 0 by Newton iteration. Fixed-step RK4 marches
//! the state; blow-up detection stops a run that leaves the resolvable
//! regime instead of letting it silently corrupt.

use thiserror::Error;

use crate::diagnostics::{record, BlowUpKind, DiagnosticsRecord, Event};
use crate::integrate::{rk4_step, step_count, RkVector};
use crate::spectral::{
    dealiased_product, divergence, filter, gradient, quadrature, sobolev_norm, to_spectral,
    Grid, MultiplierSymbol, RealField, SpectralError, TAU,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite field data at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },
    #[error("density must stay positive, min n = {min_n:.6e}")]
    PositivityLost { min_n: f64 },
    #[error("elliptic Newton solve failed: residual {residual:.3e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },
    #[error("smoothing solve residual {residual:.3e} exceeds bound {bound:.3e}")]
    ResidualCheck { residual: f64, bound: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Density and velocity on a shared grid at one instant.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    /// Scalar density; signed values are legal for the modified system.
    pub n: RealField,
    /// Velocity with one component per dimension.
    pub v: RealField,
}

impl State {
    pub fn new(t: f64, n: RealField, v: RealField) -> Result<Self, SolverError> {
        if n.grid() != v.grid() {
            return Err(SpectralError::GridMismatch.into());
        }
        if n.components() != 1 {
            return Err(SpectralError::ComponentMismatch {
                expected: 1,
                got: n.components(),
            }
            .into());
        }
        let dim = n.grid().dim();
        if v.components() != dim {
            return Err(SpectralError::ComponentMismatch {
                expected: dim,
                got: v.components(),
            }
            .into());
        }
        Ok(State { t, n, v })
    }

    pub fn grid(&self) -> Grid {
        self.n.grid()
    }

    pub fn min_density(&self) -> f64 {
        self.n.data().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

// Tendencies are packed as States; the clock is advanced by the marcher,
// not by stage arithmetic.
impl RkVector for State {
    fn axpy(&mut self, a: f64, other: &Self) {
        self.n.axpy(a, &other.n);
        self.v.axpy(a, &other.v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Potential from the smoothing inverse: u = (I - Lap)^{-1} n.
    Modified,
    /// Potential from the nonlinear balance Lap(phi) - e^phi + n = 0.
    EulerPoisson,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub model: Model,
    /// Relative nonlinear-residual target of the elliptic Newton solve.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Sobolev-norm level that declares blow-up.
    pub blowup_threshold: f64,
    /// Fluctuation-energy fraction in the top third of retained modes
    /// that declares resolution loss.
    pub tail_fraction_limit: f64,
    /// Steps between diagnostics records.
    pub stride: usize,
    /// Sobolev index for the velocity diagnostics norm (density uses one
    /// order lower).
    pub sigma: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            model: Model::Modified,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            blowup_threshold: 1e6,
            tail_fraction_limit: 0.1,
            stride: 100,
            sigma: 2.0,
        }
    }
}

fn non_finite(t: f64, err: SpectralError) -> SolverError {
    match err {
        SpectralError::NonFinite { .. } => SolverError::NonFinite {
            t,
            detail: err.to_string(),
        },
        other => SolverError::Spectral(other),
    }
}

/// Pointwise product as a new scalar field (no dealiasing).
fn pointwise(a: &RealField, b: &RealField) -> RealField {
    let mut out = a.clone();
    for (x, y) in out.data_mut().iter_mut().zip(b.data()) {
        *x *= y;
    }
    out
}

/// Shared advection and continuity terms: dn = -div(n v) and the
/// advection part of dv, both with dealiased products. The potential
/// gradient is added by the caller.
fn transport_tendency(s: &State) -> Result<(RealField, RealField), SolverError> {
    let grid = s.grid();
    let dim = grid.dim();

    let mut flux = RealField::zeros(grid, dim);
    for c in 0..dim {
        let vc = s.v.extract_component(c);
        let nv = dealiased_product(&s.n, &vc).map_err(|e| non_finite(s.t, e))?;
        flux.component_mut(c).copy_from_slice(nv.component(0));
    }
    let mut dn = divergence(&flux).map_err(|e| non_finite(s.t, e))?;
    dn.scale(-1.0);

    let mut dv = RealField::zeros(grid, dim);
    for i in 0..dim {
        let vi = s.v.extract_component(i);
        for j in 0..dim {
            let dvi = filter(&vi, MultiplierSymbol::Derivative(j)).map_err(|e| non_finite(s.t, e))?;
            let vj = s.v.extract_component(j);
            let adv = dealiased_product(&vj, &dvi).map_err(|e| non_finite(s.t, e))?;
            for (o, a) in dv.component_mut(i).iter_mut().zip(adv.component(0)) {
                *o -= a;
            }
        }
    }
    Ok((dn, dv))
}

/// Tendency of the modified system:
/// dn = -div(n v), dv = -(v . grad) v - grad (I - Lap)^{-1} n.
pub fn mep_rhs(s: &State) -> Result<State, SolverError> {
    let (dn, mut dv) = transport_tendency(s)?;
    let u = filter(&s.n, MultiplierSymbol::BesselPower(-2.0)).map_err(|e| non_finite(s.t, e))?;
    let gu = gradient(&u).map_err(|e| non_finite(s.t, e))?;
    dv.axpy(-1.0, &gu);
    State::new(0.0, dn, dv)
}

/// Potential of the modified system with an explicit residual audit:
/// phi = (I - Lap)^{-1} n solves Lap(phi) - phi + n = 0, which is the
/// local form of the nonlocal forcing term.
pub fn local_potential_solve(n: &RealField) -> Result<RealField, SolverError> {
    let phi = filter(n, MultiplierSymbol::BesselPower(-2.0))?;
    let mut residual = filter(&phi, MultiplierSymbol::Laplacian)?;
    residual.axpy(-1.0, &phi);
    residual.axpy(1.0, n);
    let r = sobolev_norm(&residual, 0.0)?;
    let bound = 1e-11 * sobolev_norm(n, 0.0)?;
    if r > bound {
        return Err(SolverError::ResidualCheck {
            residual: r,
            bound,
        });
    }
    Ok(phi)
}

/// Newton solve of the nonlinear elliptic balance Lap(phi) - e^phi + n = 0.
///
/// Each Newton step solves (Lap - e^phi) delta = -G with a residual
/// correction loop preconditioned by the constant-coefficient operator
/// Lap - c, c = mean of e^phi, which is diagonal in Fourier space and
/// exact for constant states.
pub fn ep_potential_solve(
    n: &RealField,
    tol: f64,
    max_iter: usize,
) -> Result<RealField, SolverError> {
    let min_n = n.data().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_n > 0.0) {
        return Err(SolverError::PositivityLost { min_n });
    }
    let grid = n.grid();
    let norm_n = sobolev_norm(n, 0.0)?;
    let measure = TAU.powi(grid.dim() as i32);

    // Linearization about phi = 0 gives (Lap - 1) phi = 1 - n, i.e. the
    // smoothing inverse applied to the fluctuation. Quadratic remainder
    // only, so Newton starts deep in its convergence basin.
    let fluct = RealField::new(
        grid,
        1,
        n.data().iter().map(|x| x - 1.0).collect(),
    )?;
    let mut phi = filter(&fluct, MultiplierSymbol::BesselPower(-2.0))?;

    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let e_phi = RealField::new(grid, 1, phi.data().iter().map(|x| x.exp()).collect())?;
        let mut g = filter(&phi, MultiplierSymbol::Laplacian)?;
        g.axpy(-1.0, &e_phi);
        g.axpy(1.0, n);
        residual = sobolev_norm(&g, 0.0)?;
        if residual <= tol * norm_n {
            return Ok(phi);
        }

        let c = quadrature(&e_phi)? / measure;
        let precondition = |r: &RealField| -> Result<RealField, SpectralError> {
            let mut rs = to_spectral(r)?;
            for j in 0..grid.len() {
                let k = grid.wavevector(j);
                let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
                let d = -(k2 + c);
                let v = rs.coeff(0, k);
                rs.set_coeff(0, k, v / d);
            }
            Ok(crate::spectral::to_grid(&rs))
        };
        let apply = |d: &RealField| -> Result<RealField, SpectralError> {
            let mut out = filter(d, MultiplierSymbol::Laplacian)?;
            out.axpy(-1.0, &pointwise(&e_phi, d));
            Ok(out)
        };

        // Residual-correction loop: rho starts at -G (delta = 0) and must
        // shrink below a tenth of the nonlinear residual.
        let mut delta = RealField::zeros(grid, 1);
        let mut rho = g.clone();
        rho.scale(-1.0);
        let target = 0.1 * residual;
        let mut inner_ok = false;
        for _ in 0..60 {
            delta.axpy(1.0, &precondition(&rho)?);
            rho = g.clone();
            rho.scale(-1.0);
            rho.axpy(-1.0, &apply(&delta)?);
            if sobolev_norm(&rho, 0.0)? <= target {
                inner_ok = true;
                break;
            }
        }
        if !inner_ok {
            return Err(SolverError::NewtonFailed {
                residual,
                iterations: max_iter,
            });
        }
        phi.axpy(1.0, &delta);
        if !phi.is_finite() {
            return Err(SolverError::NewtonFailed {
                residual: f64::INFINITY,
                iterations: max_iter,
            });
        }
    }
    Err(SolverError::NewtonFailed {
        residual,
        iterations: max_iter,
    })
}

/// Tendency of the full system: as [`mep_rhs`] but the potential comes
/// from the nonlinear elliptic solve. Requires min n > 0.
pub fn ep_rhs(s: &State, tol: f64, max_iter: usize) -> Result<State, SolverError> {
    let (dn, mut dv) = transport_tendency(s)?;
    let phi = ep_potential_solve(&s.n, tol, max_iter)?;
    let gp = gradient(&phi).map_err(|e| non_finite(s.t, e))?;
    dv.axpy(-1.0, &gp);
    State::new(0.0, dn, dv)
}

/// Tendency dispatch for a configured model.
pub fn model_rhs(s: &State, cfg: &SolverConfig) -> Result<State, SolverError> {
    match cfg.model {
        Model::Modified => mep_rhs(s),
        Model::EulerPoisson => ep_rhs(s, cfg.newton_tol, cfg.newton_max_iter),
    }
}

/// Fraction of fluctuation energy a field carries in the top third of the
/// retained (dealiased) band, maximized over components. Returns 0 for
/// fields too small to matter (absolute floor on the tail energy), so a
/// steady state never trips the detector on round-off noise.
fn tail_energy_fraction(f: &RealField) -> Result<f64, SpectralError> {
    let grid = f.grid();
    let cutoff = grid.dealias_cutoff();
    let tail_lo = 2.0 * cutoff as f64 / 3.0;
    let floor = 1e-12 * (1.0 + f.max_norm());
    let spectrum = to_spectral(f)?;
    let mut worst: f64 = 0.0;
    for c in 0..f.components() {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (j, value) in spectrum.component(c).iter().enumerate() {
            let k = grid.wavevector(j);
            let sup = k[0].abs().max(k[1].abs());
            if sup == 0 || sup > cutoff {
                continue;
            }
            let e = value.norm_sqr();
            total += e;
            if sup as f64 > tail_lo {
                tail += e;
            }
        }
        if total > 0.0 && tail > floor * floor {
            worst = worst.max(tail / total);
        }
    }
    Ok(worst)
}

/// Inspect one state for the three loss-of-validity signatures:
/// non-finite samples, a monitored norm past the threshold, or spectral
/// energy piling into the top third of retained modes.
pub fn blowup_detect(s: &State, cfg: &SolverConfig) -> Result<Option<Event>, SolverError> {
    if !s.n.is_finite() || !s.v.is_finite() {
        return Ok(Some(Event::BlowUp {
            t: s.t,
            kind: BlowUpKind::NonFinite,
        }));
    }
    let nv = sobolev_norm(&s.v, cfg.sigma)?;
    let nn = sobolev_norm(&s.n, cfg.sigma - 1.0)?;
    let norm = nv.max(nn);
    if norm > cfg.blowup_threshold {
        return Ok(Some(Event::BlowUp {
            t: s.t,
            kind: BlowUpKind::NormThreshold { norm },
        }));
    }
    let fraction = tail_energy_fraction(&s.n)?.max(tail_energy_fraction(&s.v)?);
    if fraction > cfg.tail_fraction_limit {
        return Ok(Some(Event::BlowUp {
            t: s.t,
            kind: BlowUpKind::TailEnergy { fraction },
        }));
    }
    Ok(None)
}

/// A completed (possibly truncated) run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
    /// Set when the run stopped before t_end.
    pub event: Option<Event>,
    /// Largest observed dt * max|v| / dx, the advective step ratio.
    pub max_cfl: f64,
}

/// March a state to t_end with fixed-step RK4, recording diagnostics
/// every `stride` steps (plus the initial and final states). A blow-up
/// or breakdown ends the run early with the event recorded; hard errors
/// (shape mismatches, bad configuration) are returned as errors.
pub fn evolve(
    s0: &State,
    cfg: &SolverConfig,
    mut on_record: impl FnMut(&State, &DiagnosticsRecord),
) -> Result<Trajectory, SolverError> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(SolverError::BadTimeStep(cfg.dt));
    }
    let stride = cfg.stride.max(1);
    let steps = step_count(s0.t, cfg.t_end, cfg.dt);
    let dx = s0.grid().spacing();

    let mut records = Vec::new();
    let push = |state: &State,
                    event: Option<&Event>,
                    records: &mut Vec<DiagnosticsRecord>,
                    on_record: &mut dyn FnMut(&State, &DiagnosticsRecord)|
     -> Result<(), SolverError> {
        let rec = record(state.t, &state.n, &state.v, cfg.sigma, event)?;
        on_record(state, &rec);
        records.push(rec);
        Ok(())
    };

    let mut state = s0.clone();
    push(&state, None, &mut records, &mut on_record)?;
    let mut max_cfl: f64 = cfg.dt * state.v.max_norm() / dx;
    let t0 = s0.t;

    let mut rhs = |s: &State| model_rhs(s, cfg);
    for i in 1..=steps {
        let t_next = if i == steps {
            cfg.t_end
        } else {
            t0 + i as f64 * cfg.dt
        };
        let dt = t_next - state.t;
        let next = match rk4_step(&state, dt, &mut rhs) {
            Ok(mut s) => {
                s.t = t_next;
                s
            }
            Err(err) => {
                // The step itself failed: classify, stamp the current
                // time, record, and stop.
                let event = match err {
                    SolverError::NonFinite { t, .. } => Event::BlowUp {
                        t,
                        kind: BlowUpKind::NonFinite,
                    },
                    SolverError::PositivityLost { .. } | SolverError::NewtonFailed { .. } => {
                        Event::Breakdown {
                            t: state.t,
                            detail: err.to_string(),
                        }
                    }
                    hard => return Err(hard),
                };
                push(&state, Some(&event), &mut records, &mut on_record)?;
                return Ok(Trajectory {
                    records,
                    final_state: state,
                    event: Some(event),
                    max_cfl,
                });
            }
        };
        state = next;
        max_cfl = max_cfl.max(cfg.dt * state.v.max_norm() / dx);

        if let Some(event) = blowup_detect(&state, cfg)? {
            push(&state, Some(&event), &mut records, &mut on_record)?;
            return Ok(Trajectory {
                records,
                final_state: state,
                event: Some(event),
                max_cfl,
            });
        }
        if i % stride == 0 || i == steps {
            push(&state, None, &mut records, &mut on_record)?;
        }
    }

    Ok(Trajectory {
        records,
        final_state: state,
        event: None,
        max_cfl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::synth::random_band_limited;
    use rand::SeedableRng;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    fn steady(g: Grid) -> State {
        State::new(
            0.0,
            RealField::scalar_from_fn(g, |_| 1.0),
            RealField::zeros(g, g.dim()),
        )
        .unwrap()
    }

    #[test]
    fn steady_state_has_zero_tendency() {
        let s = steady(grid1(64));
        let d = mep_rhs(&s).unwrap();
        assert!(d.n.max_norm() <= 1e-14);
        assert!(d.v.max_norm() <= 1e-14);
        let d = ep_rhs(&s, 1e-12, 50).unwrap();
        assert!(d.n.max_norm() <= 1e-13);
        assert!(d.v.max_norm() <= 1e-13);
    }

    #[test]
    fn single_mode_density_forces_half_sine() {
        // n = eps cos x, v = 0: the potential is (eps/2) cos x, so
        // dv = -d/dx potential = (eps/2) sin x and dn = 0.
        let g = grid1(64);
        let eps = 0.3;
        let s = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| eps * p[0].cos()),
            RealField::zeros(g, 1),
        )
        .unwrap();
        let d = mep_rhs(&s).unwrap();
        let want = RealField::scalar_from_fn(g, |p| 0.5 * eps * p[0].sin());
        assert!(d.n.max_norm() <= 1e-14);
        assert!(d.v.max_diff(&want) <= 1e-14);
    }

    #[test]
    fn pure_advection_term() {
        // n = 0, v = sin x: dn = 0 and dv = -sin x cos x.
        let g = grid1(64);
        let s = State::new(
            0.0,
            RealField::zeros(g, 1),
            RealField::scalar_from_fn(g, |p| p[0].sin()),
        )
        .unwrap();
        let d = mep_rhs(&s).unwrap();
        let want = RealField::scalar_from_fn(g, |p| -p[0].sin() * p[0].cos());
        assert!(d.n.max_norm() <= 1e-14);
        assert!(d.v.max_diff(&want) <= 1e-14);
    }

    #[test]
    fn local_potential_matches_smoothing_inverse() {
        let g = grid1(64);
        let one = RealField::scalar_from_fn(g, |_| 1.0);
        let phi = local_potential_solve(&one).unwrap();
        assert!(phi.max_diff(&one) <= 1e-14, "constant balance");

        let n = RealField::scalar_from_fn(g, |p| p[0].cos());
        let phi = local_potential_solve(&n).unwrap();
        let want = RealField::scalar_from_fn(g, |p| 0.5 * p[0].cos());
        assert!(phi.max_diff(&want) <= 1e-14, "single mode halves");

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = random_band_limited(g, &mut rng, 12, 0.4, 1.0);
        assert!(local_potential_solve(&n).is_ok(), "residual audit passes");
    }

    #[test]
    fn elliptic_solve_constant_balances() {
        let g = grid1(64);
        // n = 1 balances at phi = 0 (e^0 = 1).
        let one = RealField::scalar_from_fn(g, |_| 1.0);
        let phi = ep_potential_solve(&one, 1e-12, 50).unwrap();
        assert!(phi.max_norm() <= 1e-12);
        // n = e balances at phi = 1.
        let e = RealField::scalar_from_fn(g, |_| std::f64::consts::E);
        let phi = ep_potential_solve(&e, 1e-12, 50).unwrap();
        let want = RealField::scalar_from_fn(g, |_| 1.0);
        assert!(phi.max_diff(&want) <= 1e-12);
    }

    #[test]
    fn elliptic_solve_agrees_with_linearization_to_quadratic_order() {
        let g = grid1(128);
        // phi and the linearized potential differ by a quadratic-in-a
        // remainder; measure the remainder at two amplitudes and check
        // the decay rate instead of assuming a constant.
        let remainder = |a: f64| -> f64 {
            let n = RealField::scalar_from_fn(g, |p| 1.0 + a * p[0].cos());
            let phi = ep_potential_solve(&n, 1e-13, 50).unwrap();
            let lin = RealField::scalar_from_fn(g, |p| 0.5 * a * p[0].cos());
            phi.max_diff(&lin)
        };
        let r1 = remainder(0.1);
        let r2 = remainder(0.05);
        assert!(r1 <= 1e-2, "remainder should be O(a^2), got {r1}");
        let order = (r1 / r2).log2();
        assert!(
            (1.7..=2.3).contains(&order),
            "remainder decay order {order}"
        );
    }

    #[test]
    fn elliptic_solve_rejects_nonpositive_density() {
        let g = grid1(32);
        let n = RealField::scalar_from_fn(g, |p| p[0].cos());
        assert!(matches!(
            ep_potential_solve(&n, 1e-12, 50),
            Err(SolverError::PositivityLost { .. })
        ));
    }

    #[test]
    fn full_and_modified_tendencies_agree_to_quadratic_order() {
        // At v = 0, ep_rhs(1 + a cos) and mep_rhs(a cos) differ only in
        // the potential slot; the difference must shrink like a^2.
        let g = grid1(128);
        let gap = |a: f64| -> f64 {
            let ep = State::new(
                0.0,
                RealField::scalar_from_fn(g, |p| 1.0 + a * p[0].cos()),
                RealField::zeros(g, 1),
            )
            .unwrap();
            let mep = State::new(
                0.0,
                RealField::scalar_from_fn(g, |p| a * p[0].cos()),
                RealField::zeros(g, 1),
            )
            .unwrap();
            let de = ep_rhs(&ep, 1e-13, 50).unwrap();
            let dm = mep_rhs(&mep).unwrap();
            de.v.max_diff(&dm.v)
        };
        let pairs: [(f64, f64); 3] = [(0.2, gap(0.2)), (0.1, gap(0.1)), (0.05, gap(0.05))];
        for w in pairs.windows(2) {
            let slope = (w[0].1 / w[1].1).log2() / (w[0].0 / w[1].0).log2();
            assert!(
                (1.7..=2.3).contains(&slope),
                "expected quadratic gap, slope {slope}"
            );
        }
    }

    #[test]
    fn evolve_keeps_steady_state_fixed() {
        let s = steady(grid1(64));
        let cfg = SolverConfig {
            t_end: 0.5,
            dt: 1e-2,
            stride: 10,
            ..SolverConfig::default()
        };
        let out = evolve(&s, &cfg, |_, _| {}).unwrap();
        assert!(out.event.is_none());
        assert!(out.final_state.n.max_diff(&s.n) <= 1e-13);
        assert!(out.final_state.v.max_norm() <= 1e-13);
        assert_eq!(out.records.first().unwrap().t, 0.0);
        assert!((out.records.last().unwrap().t - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn evolve_conserves_mass_and_mean_velocity() {
        let g = grid1(128);
        let s = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| 1.0 + 0.2 * p[0].cos()),
            RealField::scalar_from_fn(g, |p| 0.1 * p[0].sin()),
        )
        .unwrap();
        let cfg = SolverConfig {
            t_end: 0.5,
            dt: 2e-3,
            stride: 50,
            ..SolverConfig::default()
        };
        let out = evolve(&s, &cfg, |_, _| {}).unwrap();
        assert!(out.event.is_none());
        let first = &out.records[0];
        for r in &out.records {
            assert!((r.mass - first.mass).abs() <= 1e-10 * first.mass.abs());
            assert!((r.momentum - first.momentum).abs() <= 1e-10);
        }
    }

    #[test]
    fn reversibility_within_integrator_error() {
        let g = grid1(128);
        let s = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| 1.0 + 0.2 * p[0].cos()),
            RealField::scalar_from_fn(g, |p| 0.1 * p[0].sin()),
        )
        .unwrap();
        let dt = 1e-2;
        let steps = 20;
        let mut rhs = |x: &State| mep_rhs(x);
        let mut fwd = s.clone();
        for _ in 0..steps {
            fwd = rk4_step(&fwd, dt, &mut rhs).unwrap();
        }
        let mut back = fwd.clone();
        for _ in 0..steps {
            back = rk4_step(&back, -dt, &mut rhs).unwrap();
        }
        let err = back.n.max_diff(&s.n).max(back.v.max_diff(&s.v));
        assert!(err <= 1e-8, "round trip error {err}");
    }

    #[test]
    fn blowup_detector_classifies_states() {
        let g = grid1(64);
        let cfg = SolverConfig::default();
        assert!(blowup_detect(&steady(g), &cfg).unwrap().is_none());

        // Injected NaN trips the finiteness check.
        let mut bad = steady(g);
        bad.v.data_mut()[3] = f64::NAN;
        assert!(matches!(
            blowup_detect(&bad, &cfg).unwrap(),
            Some(Event::BlowUp {
                kind: BlowUpKind::NonFinite,
                ..
            })
        ));

        // A huge smooth field trips the norm threshold.
        let big = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| 1e7 * p[0].cos()),
            RealField::zeros(g, 1),
        )
        .unwrap();
        assert!(matches!(
            blowup_detect(&big, &cfg).unwrap(),
            Some(Event::BlowUp {
                kind: BlowUpKind::NormThreshold { .. },
                ..
            })
        ));

        // Energy parked at the top of the retained band trips the tail
        // detector: cutoff is 21 at N = 64, so k = 20 is in the top third.
        let spiky = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| 1.0 + 0.5 * (20.0 * p[0]).cos()),
            RealField::zeros(g, 1),
        )
        .unwrap();
        assert!(matches!(
            blowup_detect(&spiky, &cfg).unwrap(),
            Some(Event::BlowUp {
                kind: BlowUpKind::TailEnergy { .. },
                ..
            })
        ));
    }

    #[test]
    fn evolve_reports_blowup_as_event_not_error() {
        let g = grid1(64);
        let s = State::new(
            0.0,
            RealField::scalar_from_fn(g, |p| 1.0 + 5.0 * p[0].cos()),
            RealField::zeros(g, 1),
        )
        .unwrap();
        let cfg = SolverConfig {
            t_end: 3.0,
            dt: 1e-3,
            stride: 100,
            ..SolverConfig::default()
        };
        let out = evolve(&s, &cfg, |_, _| {}).unwrap();
        let event = out.event.expect("amplitude-5 run must stop early");
        assert!(event.time() < 3.0);
        let last = out.records.last().unwrap();
        assert!(last.event.starts_with("blowup:"), "event = {}", last.event);
    }

    #[test]
    fn two_dimensional_tendency_matches_axis_aligned_profile() {
        // Data varying along x alone evolves identically in 1-D and 2-D.
        let g2 = Grid::new(2, 32).unwrap();
        let g1 = Grid::new(1, 32).unwrap();
        let n2 = RealField::scalar_from_fn(g2, |p| 1.0 + 0.2 * p[0].cos());
        let mut v2 = RealField::zeros(g2, 2);
        for (i, x) in RealField::scalar_from_fn(g2, |p| 0.1 * p[0].sin())
            .component(0)
            .iter()
            .enumerate()
        {
            v2.component_mut(0)[i] = *x;
        }
        let s2 = State::new(0.0, n2, v2).unwrap();
        let d2 = mep_rhs(&s2).unwrap();

        let s1 = State::new(
            0.0,
            RealField::scalar_from_fn(g1, |p| 1.0 + 0.2 * p[0].cos()),
            RealField::scalar_from_fn(g1, |p| 0.1 * p[0].sin()),
        )
        .unwrap();
        let d1 = mep_rhs(&s1).unwrap();

        // Compare along the x-axis row (second index 0).
        let n = g2.n();
        for j in 0..n {
            let flat = j * n;
            let dn2 = d2.n.component(0)[flat];
            let dn1 = d1.n.component(0)[j];
            assert!((dn2 - dn1).abs() <= 1e-13, "row {j}");
            let dv2 = d2.v.component(0)[flat];
            let dv1 = d1.v.component(0)[j];
            assert!((dv2 - dv1).abs() <= 1e-13, "row {j}");
            assert!(d2.v.component(1)[flat].abs() <= 1e-13, "y-tendency stays 0");
        }
    }

    #[test]
    fn spatial_resolution_refinement_converges_spectrally() {
        // Fixed analytic data, fixed short time: error against a finer
        // grid must collapse by orders of magnitude with each doubling.
        let run = |nn: usize| -> State {
            let g = grid1(nn);
            let s = State::new(
                0.0,
                RealField::scalar_from_fn(g, |p| 1.0 + 0.2 * p[0].cos()),
                RealField::scalar_from_fn(g, |p| 0.1 * p[0].sin()),
            )
            .unwrap();
            let cfg = SolverConfig {
                t_end: 0.1,
                dt: 1e-3,
                stride: 1000,
                ..SolverConfig::default()
            };
            evolve(&s, &cfg, |_, _| {}).unwrap().final_state
        };
        // Sample the coarse solution against the fine one on shared
        // physical points (every refinement keeps the coarse nodes).
        let coarse = run(32);
        let fine = run(64);
        let mut err32 = 0.0f64;
        for j in 0..32 {
            let d = (coarse.n.component(0)[j] - fine.n.component(0)[2 * j]).abs();
            err32 = err32.max(d);
        }
        let finer = run(128);
        let mut err64 = 0.0f64;
        for j in 0..64 {
            let d = (fine.n.component(0)[j] - finer.n.component(0)[2 * j]).abs();
            err64 = err64.max(d);
        }
        assert!(
            err32 <= 1e-10,
            "analytic data at N=32 already resolves to round-off, got {err32}"
        );
        assert!(err64 <= 1e-12, "N=64 error {err64}");
    }
}
