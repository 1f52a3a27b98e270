//! Classical fixed-step RK4 over anything with vector-space operations.
//! The PDE states implement [`RkVector`]; a scalar implementation exists
//! so the integrator itself can be checked against e^{lambda t}.

/// Vector-space operations the steppers need. Implementations combine
/// state components only; bookkeeping like the clock stays out.
pub trait RkVector: Clone {
    /// self += a * other
    fn axpy(&mut self, a: f64, other: &Self);
}

/// One RK4 step of an autonomous system ds/dt = rhs(s).
///
/// The right-hand side may fail (elliptic solve divergence, non-finite
/// samples); the error passes straight through.
pub fn rk4_step<S, E>(
    s: &S,
    dt: f64,
    rhs: &mut impl FnMut(&S) -> Result<S, E>,
) -> Result<S, E>
where
    S: RkVector,
{
    let k1 = rhs(s)?;
    let mut stage = s.clone();
    stage.axpy(0.5 * dt, &k1);
    let k2 = rhs(&stage)?;
    stage = s.clone();
    stage.axpy(0.5 * dt, &k2);
    let k3 = rhs(&stage)?;
    stage = s.clone();
    stage.axpy(dt, &k3);
    let k4 = rhs(&stage)?;
    let mut out = s.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    Ok(out)
}

/// Number of uniform steps covering [t0, t_end]; the last step is clipped
/// when the interval is not an exact multiple of dt. Robust to the usual
/// floating-point shortfall (0.999... * dt counts as one step).
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    assert!(dt > 0.0, "dt must be positive");
    let span = t_end - t0;
    if span <= 0.0 {
        return 0;
    }
    let raw = span / dt;
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

impl RkVector for f64 {
    fn axpy(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
}
