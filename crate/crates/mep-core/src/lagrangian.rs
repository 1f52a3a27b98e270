//! Flow-map form of the modified system in one dimension. Instead of
//! fields on a fixed grid, evolve the particle map gamma(x) = x + p(x)
//! together with Lagrangian density zeta and velocity eta:
//!
//!   dp/dt    = eta
//!   dzeta/dt = -((zeta o gamma^{-1}) d/dx (eta o gamma^{-1})) o gamma
//!   deta/dt  = -(d/dx (I - Lap)^{-1} (zeta o gamma^{-1})) o gamma
//!
//! and recover the grid fields as n = zeta o gamma^{-1}, v = eta o
//! gamma^{-1}. The map itself is not periodic but p is, so p carries the
//! spectral representation. Composition evaluates truncated Fourier
//! series at displaced points, which is spectrally exact; inversion is a
//! per-node safeguarded Newton solve. Losing injectivity of gamma (the
//! Jacobian 1 + p' touching zero) is the flow-map signature of losing
//! the solution, and stops a run as a breakdown event.

use num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{record, BlowUpKind, DiagnosticsRecord, Event};
use crate::eulerian::{SolverConfig, SolverError, State};
use crate::integrate::{rk4_step, step_count, RkVector};
use crate::spectral::{
    dealiased_product, filter, to_spectral, MultiplierSymbol, RealField, SpectralError,
};

/// Jacobian floor: inversion conditioning degrades long before the
/// Jacobian reaches zero, so fail early and loudly.
pub const JACOBIAN_GUARD: f64 = 0.1;
/// Required accuracy of gamma(gamma^{-1}(x)) = x at every node.
pub const INVERSION_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LagrangianError {
    #[error("flow map stopped being a diffeomorphism: min Jacobian {min_jacobian:.6e}")]
    DiffeoBreakdown { min_jacobian: f64 },
    #[error("flow inversion stalled: worst residual {residual:.3e}")]
    InversionFailed { residual: f64 },
    #[error("flow-map machinery is one-dimensional, field has dim {0}")]
    NotOneDimensional(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Flow map and Lagrangian fields at one instant.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    /// Periodic displacement, gamma(x) = x + p(x).
    pub p: RealField,
    /// Density along particles.
    pub zeta: RealField,
    /// Velocity along particles.
    pub eta: RealField,
}

impl FlowState {
    pub fn new(
        t: f64,
        p: RealField,
        zeta: RealField,
        eta: RealField,
    ) -> Result<Self, LagrangianError> {
        for f in [&p, &zeta, &eta] {
            if f.grid().dim() != 1 {
                return Err(LagrangianError::NotOneDimensional(f.grid().dim()));
            }
            if f.components() != 1 {
                return Err(SpectralError::ComponentMismatch {
                    expected: 1,
                    got: f.components(),
                }
                .into());
            }
        }
        if p.grid() != zeta.grid() || p.grid() != eta.grid() {
            return Err(SpectralError::GridMismatch.into());
        }
        Ok(FlowState { t, p, zeta, eta })
    }

    /// Identity flow carrying the given grid data.
    pub fn from_eulerian(s: &State) -> Result<Self, LagrangianError> {
        FlowState::new(
            s.t,
            RealField::zeros(s.grid(), 1),
            s.n.clone(),
            s.v.extract_component(0),
        )
    }
}

impl RkVector for FlowState {
    fn axpy(&mut self, a: f64, other: &Self) {
        self.p.axpy(a, &other.p);
        self.zeta.axpy(a, &other.zeta);
        self.eta.axpy(a, &other.eta);
    }
}

/// Truncated Fourier interpolant of a real 1-D grid field, evaluable at
/// arbitrary points. The Nyquist bin is read as a pure cosine, the
/// symmetric real interpolant.
struct Interpolant {
    /// Mean.
    c0: f64,
    /// Coefficients for k = 1 .. N/2 - 1.
    coeffs: Vec<Complex64>,
    /// Real Nyquist coefficient (zero for odd-length grids, which do not
    /// occur: grids are powers of two).
    nyquist: f64,
    half: usize,
}

impl Interpolant {
    fn build(f: &RealField) -> Result<Self, SpectralError> {
        let spectrum = to_spectral(f)?;
        let n = f.grid().n();
        let half = n / 2;
        let coeffs: Vec<Complex64> = (1..half)
            .map(|k| spectrum.coeff(0, [k as i64, 0]))
            .collect();
        Ok(Interpolant {
            c0: spectrum.coeff(0, [0, 0]).re,
            coeffs,
            nyquist: spectrum.coeff(0, [half as i64, 0]).re,
            half,
        })
    }

    /// Upper bound on sup |f| over the whole circle (not just the grid
    /// nodes): the l1 norm of the coefficients.
    fn sup_bound(&self) -> f64 {
        self.c0.abs()
            + 2.0 * self.coeffs.iter().map(|c| c.norm()).sum::<f64>()
            + self.nyquist.abs()
    }

    /// Value and derivative at y, sharing one sin/cos call and one walk
    /// up the powers of e^{iy}.
    fn eval(&self, y: f64) -> (f64, f64) {
        let (s, c) = y.sin_cos();
        let z = Complex64::new(c, s);
        let mut w = z;
        let mut value = self.c0;
        let mut slope = 0.0;
        for (i, f) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            // 2 Re(f w) and 2 Re(i k f w).
            let re = f.re * w.re - f.im * w.im;
            let im = f.re * w.im + f.im * w.re;
            value += 2.0 * re;
            slope -= 2.0 * k * im;
            w *= z;
        }
        // w = z^{N/2} after the loop.
        let m = self.half as f64;
        value += self.nyquist * w.re;
        slope -= self.nyquist * m * w.im;
        (value, slope)
    }
}

/// Sample f(x_j + p(x_j)) on the grid: composition of a grid field with
/// the map given by displacement p. Spectrally exact for band-limited f.
pub fn compose(f: &RealField, p: &RealField) -> Result<RealField, LagrangianError> {
    if f.grid() != p.grid() {
        return Err(SpectralError::GridMismatch.into());
    }
    if f.grid().dim() != 1 {
        return Err(LagrangianError::NotOneDimensional(f.grid().dim()));
    }
    let series = Interpolant::build(f)?;
    let grid = f.grid();
    let data = (0..grid.len())
        .map(|j| {
            let x = grid.point(j)[0];
            series.eval(x + p.component(0)[j]).0
        })
        .collect();
    Ok(RealField::new(grid, 1, data)?)
}

/// Smallest grid value of the Jacobian 1 + p'.
pub fn min_jacobian(p: &RealField) -> Result<f64, LagrangianError> {
    let dp = filter(p, MultiplierSymbol::Derivative(0))?;
    Ok(1.0 + dp.data().iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Displacement q of the inverse map: gamma^{-1}(x) = x + q(x), found at
/// each node by Newton iteration on gamma(y) = x with a bisection
/// fallback on the bracketing interval. The residual
/// |gamma(gamma^{-1}(x_j)) - x_j| is verified at every node.
pub fn invert_flow(p: &RealField) -> Result<RealField, LagrangianError> {
    let jac = min_jacobian(p)?;
    if jac < JACOBIAN_GUARD {
        return Err(LagrangianError::DiffeoBreakdown { min_jacobian: jac });
    }
    let series = Interpolant::build(p)?;
    let grid = p.grid();
    // The root y of y + p(y) = x satisfies |y - x| <= sup |p| over the
    // circle, which the grid max can undershoot; the l1 bound cannot.
    let bound = series.sup_bound() + 1e-9;
    let mut q = vec![0.0; grid.len()];
    for j in 0..grid.len() {
        let x = grid.point(j)[0];
        // gamma(y) - x is increasing in y and changes sign on this bracket.
        let mut lo = x - bound;
        let mut hi = x + bound;
        let (p0, _) = series.eval(x);
        let mut y = x - p0;
        let mut residual = f64::INFINITY;
        for _ in 0..100 {
            let (val, dval) = series.eval(y);
            let g = y + val - x;
            residual = g.abs();
            if residual <= 0.5 * INVERSION_RESIDUAL {
                break;
            }
            if g > 0.0 {
                hi = hi.min(y);
            } else {
                lo = lo.max(y);
            }
            let slope = 1.0 + dval;
            let newton = y - g / slope;
            y = if slope > JACOBIAN_GUARD / 2.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        if residual > INVERSION_RESIDUAL {
            return Err(LagrangianError::InversionFailed { residual });
        }
        q[j] = y - x;
    }
    Ok(RealField::new(grid, 1, q)?)
}

/// Recover the grid fields: n = zeta o gamma^{-1}, v = eta o gamma^{-1}.
pub fn to_eulerian(f: &FlowState) -> Result<State, LagrangianError> {
    let q = invert_flow(&f.p)?;
    let n = compose(&f.zeta, &q)?;
    let v = compose(&f.eta, &q)?;
    Ok(State::new(f.t, n, v)?)
}

/// Tendency of the flow-map system. One inversion is shared by all
/// pull-backs; the nonlinear product is dealiased exactly as in the
/// grid-based solver so the two formulations discretize the same flow.
pub fn lagrangian_rhs(f: &FlowState) -> Result<FlowState, LagrangianError> {
    let q = invert_flow(&f.p)?;
    let n_grid = compose(&f.zeta, &q)?;
    let v_grid = compose(&f.eta, &q)?;

    let dv = filter(&v_grid, MultiplierSymbol::Derivative(0))?;
    let stretch = dealiased_product(&n_grid, &dv)?;
    let mut dzeta = compose(&stretch, &f.p)?;
    dzeta.scale(-1.0);

    let potential = filter(&n_grid, MultiplierSymbol::BesselPower(-2.0))?;
    let force = filter(&potential, MultiplierSymbol::Derivative(0))?;
    let mut deta = compose(&force, &f.p)?;
    deta.scale(-1.0);

    FlowState::new(0.0, f.eta.clone(), dzeta, deta)
}

/// A completed (possibly truncated) flow-map run.
#[derive(Debug, Clone)]
pub struct LagrangianTrajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub final_flow: FlowState,
    /// Eulerian recovery of the final flow state.
    pub final_state: State,
    pub event: Option<Event>,
    pub max_cfl: f64,
}

/// March a flow state with fixed-step RK4, recording diagnostics of the
/// recovered grid fields every `stride` steps. The configured model is
/// ignored: the flow-map form implements the modified system.
pub fn evolve_lagrangian(
    f0: &FlowState,
    cfg: &SolverConfig,
    mut on_record: impl FnMut(&FlowState, &State, &DiagnosticsRecord),
) -> Result<LagrangianTrajectory, LagrangianError> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(SolverError::BadTimeStep(cfg.dt).into());
    }
    let initial_jac = min_jacobian(&f0.p)?;
    if initial_jac < JACOBIAN_GUARD {
        return Err(LagrangianError::DiffeoBreakdown {
            min_jacobian: initial_jac,
        });
    }
    let stride = cfg.stride.max(1);
    let steps = step_count(f0.t, cfg.t_end, cfg.dt);
    let dx = f0.p.grid().spacing();
    let t0 = f0.t;

    let mut records = Vec::new();
    let push = |flow: &FlowState,
                event: Option<&Event>,
                records: &mut Vec<DiagnosticsRecord>,
                on_record: &mut dyn FnMut(&FlowState, &State, &DiagnosticsRecord)|
     -> Result<State, LagrangianError> {
        let state = to_eulerian(flow)?;
        let rec = record(flow.t, &state.n, &state.v, cfg.sigma, event)?;
        on_record(flow, &state, &rec);
        records.push(rec);
        Ok(state)
    };

    let mut flow = f0.clone();
    let mut recovered = push(&flow, None, &mut records, &mut on_record)?;
    let mut max_cfl: f64 = cfg.dt * flow.eta.max_norm() / dx;

    let mut rhs = lagrangian_rhs;
    for i in 1..=steps {
        let t_next = if i == steps {
            cfg.t_end
        } else {
            t0 + i as f64 * cfg.dt
        };
        let dt = t_next - flow.t;
        let next = match rk4_step(&flow, dt, &mut rhs) {
            Ok(mut f) => {
                f.t = t_next;
                f
            }
            Err(err) => {
                let event = match err {
                    LagrangianError::DiffeoBreakdown { .. }
                    | LagrangianError::InversionFailed { .. } => Event::Breakdown {
                        t: flow.t,
                        detail: err.to_string(),
                    },
                    LagrangianError::Spectral(SpectralError::NonFinite { .. }) => Event::BlowUp {
                        t: flow.t,
                        kind: BlowUpKind::NonFinite,
                    },
                    hard => return Err(hard),
                };
                // The pre-step flow is still invertible, so the terminal
                // record can be taken there.
                recovered = push(&flow, Some(&event), &mut records, &mut on_record)?;
                return Ok(LagrangianTrajectory {
                    records,
                    final_state: recovered,
                    final_flow: flow,
                    event: Some(event),
                    max_cfl,
                });
            }
        };
        flow = next;
        max_cfl = max_cfl.max(cfg.dt * flow.eta.max_norm() / dx);

        let finite = flow.p.is_finite() && flow.zeta.is_finite() && flow.eta.is_finite();
        let jac = if finite { min_jacobian(&flow.p)? } else { 0.0 };
        if !finite || jac <= JACOBIAN_GUARD {
            let event = if finite {
                Event::Breakdown {
                    t: flow.t,
                    detail: format!("min Jacobian {jac:.6e} at guard {JACOBIAN_GUARD}"),
                }
            } else {
                Event::BlowUp {
                    t: flow.t,
                    kind: BlowUpKind::NonFinite,
                }
            };
            // The flow may already be past inversion; record from the
            // last good recovery time only if inversion still works.
            if let Ok(state) = to_eulerian(&flow) {
                let rec = record(flow.t, &state.n, &state.v, cfg.sigma, Some(&event))?;
                on_record(&flow, &state, &rec);
                records.push(rec);
                recovered = state;
            }
            return Ok(LagrangianTrajectory {
                records,
                final_state: recovered,
                final_flow: flow,
                event: Some(event),
                max_cfl,
            });
        }
        if i % stride == 0 || i == steps {
            recovered = push(&flow, None, &mut records, &mut on_record)?;
        }
    }
    Ok(LagrangianTrajectory {
        records,
        final_state: recovered,
        final_flow: flow,
        event: None,
        max_cfl,
    })
}

/// Max-norm gaps between the two formulations at shared output times.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub times: Vec<f64>,
    pub n_gap: Vec<f64>,
    pub v_gap: Vec<f64>,
    /// Largest gap over all compared times and both fields.
    pub max_gap: f64,
    pub eulerian_event: Option<Event>,
    pub lagrangian_event: Option<Event>,
}

/// Run the grid-based and flow-map solvers from the same initial data
/// and compare the recovered fields at every shared record time.
pub fn cross_validate(s0: &State, cfg: &SolverConfig) -> Result<CompareReport, LagrangianError> {
    let mut euler_states: Vec<State> = Vec::new();
    let etraj = crate::eulerian::evolve(s0, cfg, |s, _| euler_states.push(s.clone()))?;

    let f0 = FlowState::from_eulerian(s0)?;
    let mut flow_states: Vec<State> = Vec::new();
    let ltraj = evolve_lagrangian(&f0, cfg, |_, s, _| flow_states.push(s.clone()))?;

    let shared = euler_states.len().min(flow_states.len());
    let mut times = Vec::with_capacity(shared);
    let mut n_gap = Vec::with_capacity(shared);
    let mut v_gap = Vec::with_capacity(shared);
    let mut max_gap: f64 = 0.0;
    for i in 0..shared {
        let (a, b) = (&euler_states[i], &flow_states[i]);
        let gn = a.n.max_diff(&b.n);
        let gv = a.v.max_diff(&b.v.extract_component(0));
        max_gap = max_gap.max(gn).max(gv);
        times.push(a.t);
        n_gap.push(gn);
        v_gap.push(gv);
    }
    Ok(CompareReport {
        times,
        n_gap,
        v_gap,
        max_gap,
        eulerian_event: etraj.event,
        lagrangian_event: ltraj.event,
    })
}
