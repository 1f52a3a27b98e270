//! Per-record observables of a solver state: conserved quantities, Sobolev
//! norms, radius-of-analyticity fits, and the terminal event taxonomy.
//!
//! The formulas here are deliberately independent of the variational
//! machinery in [`crate::hamiltonian`]; a test pins the two against each
//! other where both apply.

use std::fmt;

use crate::gevrey::analyticity_radius;
use crate::spectral::{
    filter, gradient, quadrature, sobolev_norm, MultiplierSymbol, RealField, SpectralError,
};

/// Reason a run stopped before its end time.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// A norm or spectral-tail criterion tripped: the numerical solution
    /// stopped being trustworthy, consistent with loss of regularity.
    BlowUp { t: f64, kind: BlowUpKind },
    /// A structural precondition failed (positivity, diffeomorphism
    /// property, an inner solve), independent of field size.
    Breakdown { t: f64, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowUpKind {
    /// A sample went NaN or infinite.
    NonFinite,
    /// A monitored Sobolev norm crossed the configured threshold.
    NormThreshold { norm: f64 },
    /// The top third of retained wavenumbers holds more than the allowed
    /// fraction of fluctuation energy: resolution is exhausted.
    TailEnergy { fraction: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::BlowUp { t, .. } | Event::Breakdown { t, .. } => *t,
        }
    }
}

// The rendering is used inside one CSV cell, so it must stay comma-free.
impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::BlowUp { kind, .. } => match kind {
                BlowUpKind::NonFinite => write!(f, "blowup:non_finite"),
                BlowUpKind::NormThreshold { norm } => write!(f, "blowup:norm={norm:.3e}"),
                BlowUpKind::TailEnergy { fraction } => write!(f, "blowup:tail={fraction:.3e}"),
            },
            Event::Breakdown { detail, .. } => {
                write!(f, "breakdown:{}", detail.replace(',', ";"))
            }
        }
    }
}

/// One diagnostics row. Field order matches the CSV column order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Energy of the modified system,
    /// H1 = integral of (n |v|^2 + |grad (I-Lap)^{-1} n|^2 + ((I-Lap)^{-1} n)^2) / 2.
    pub h1: f64,
    /// Cross Hamiltonian, sum_i integral of n v_i.
    pub h2: f64,
    /// integral of n.
    pub mass: f64,
    /// sum_i integral of v_i.
    pub momentum: f64,
    /// H^sigma norm of v (all components).
    pub sobolev_v: f64,
    /// H^{sigma-1} norm of n.
    pub sobolev_n: f64,
    /// Fitted decay rate of n's spectrum; NaN when inconclusive.
    pub sigma_n: f64,
    /// Fitted decay rate of v's spectrum (least decaying component);
    /// NaN when inconclusive.
    pub sigma_v: f64,
    /// Rendered event, empty for an ordinary row.
    pub event: String,
}

/// Decay-rate fit of a possibly-vector field: the smallest conclusive
/// per-component rate, NaN when no component concludes.
fn radius_of(field: &RealField) -> Result<f64, SpectralError> {
    let mut best = f64::NAN;
    for c in 0..field.components() {
        let scalar = field.extract_component(c);
        // Only dimension/shape errors are possible here and the extract
        // guarantees a scalar, so the fit cannot fail.
        let fit = analyticity_radius(&scalar).expect("scalar component fits");
        if fit.conclusive && !(fit.sigma >= best) {
            best = fit.sigma;
        }
    }
    Ok(best)
}

/// Evaluate every observable of one state. `sigma` is the Sobolev index
/// used for the velocity norm; the density norm uses `sigma - 1`.
pub fn record(
    t: f64,
    n: &RealField,
    v: &RealField,
    sigma: f64,
    event: Option<&Event>,
) -> Result<DiagnosticsRecord, SpectralError> {
    let grid = n.grid();
    let dim = grid.dim();
    let u = filter(n, MultiplierSymbol::BesselPower(-2.0))?;
    let gu = gradient(&u)?;

    let mut integrand = RealField::zeros(grid, 1);
    {
        let out = integrand.data_mut();
        let nn = n.data();
        let uu = u.data();
        for i in 0..grid.len() {
            let mut speed_sq = 0.0;
            let mut grad_sq = 0.0;
            for c in 0..dim {
                speed_sq += v.component(c)[i] * v.component(c)[i];
                grad_sq += gu.component(c)[i] * gu.component(c)[i];
            }
            out[i] = 0.5 * (nn[i] * speed_sq + grad_sq + uu[i] * uu[i]);
        }
    }
    let h1 = quadrature(&integrand)?;

    let mut h2 = 0.0;
    let mut momentum = 0.0;
    for c in 0..dim {
        let vc = v.extract_component(c);
        let mut nv = vc.clone();
        for (a, b) in nv.data_mut().iter_mut().zip(n.data()) {
            *a *= b;
        }
        h2 += quadrature(&nv)?;
        momentum += quadrature(&vc)?;
    }

    Ok(DiagnosticsRecord {
        t,
        h1,
        h2,
        mass: quadrature(n)?,
        momentum,
        sobolev_v: sobolev_norm(v, sigma)?,
        sobolev_n: sobolev_norm(n, sigma - 1.0)?,
        sigma_n: radius_of(n)?,
        sigma_v: radius_of(v)?,
        event: event.map(|e| e.to_string()).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid, TAU};

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn steady_state_observables() {
        let grid = Grid::new(1, 64).unwrap();
        let n = RealField::scalar_from_fn(grid, |_| 1.0);
        let v = RealField::zeros(grid, 1);
        let r = record(0.0, &n, &v, 2.0, None).unwrap();
        // (I-Lap)^{-1} 1 = 1, so H1 = integral of 1/2 = pi.
        assert!((r.h1 - PI).abs() <= 1e-13);
        assert_eq!(r.h2, 0.0);
        assert!((r.mass - TAU).abs() <= 1e-12);
        assert_eq!(r.momentum, 0.0);
        assert!((r.sobolev_n - TAU.sqrt()).abs() <= 1e-13);
        assert_eq!(r.sobolev_v, 0.0);
        assert!(r.sigma_n.is_nan(), "constant density has no fit band");
        assert_eq!(r.event, "");
    }

    #[test]
    fn single_mode_energy_matches_hand_computation() {
        // n = cos x, v = 0: u = cos/2, u' = -sin/2, so
        // H1 = (1/2) integral (sin^2 + cos^2)/4 = pi/4.
        let grid = Grid::new(1, 64).unwrap();
        let n = RealField::scalar_from_fn(grid, |p| p[0].cos());
        let v = RealField::zeros(grid, 1);
        let r = record(0.0, &n, &v, 2.0, None).unwrap();
        assert!((r.h1 - PI / 4.0).abs() <= 1e-13, "h1 = {}", r.h1);
    }

    #[test]
    fn cross_terms_on_analytic_preset() {
        // n = 1 + 0.2 cos x, v = 0.1 sin x:
        //   H2 = integral n v = 0 (orthogonality), momentum = 0, mass = 2 pi.
        let grid = Grid::new(1, 128).unwrap();
        let n = RealField::scalar_from_fn(grid, |p| 1.0 + 0.2 * p[0].cos());
        let v = RealField::scalar_from_fn(grid, |p| 0.1 * p[0].sin());
        let r = record(0.0, &n, &v, 2.0, None).unwrap();
        assert!(r.h2.abs() <= 1e-14);
        assert!(r.momentum.abs() <= 1e-14);
        assert!((r.mass - TAU).abs() <= 1e-12);
        // v = 0.1 sin has ||v||_{H^2}^2 = 0.01 * 2 pi * 2 (1+1)^2 / 4 = 0.04 pi.
        let want = 0.2 * PI.sqrt();
        assert!((r.sobolev_v - want).abs() <= 1e-13);
    }

    #[test]
    fn two_dimensional_energy_reduces_to_axis_profile() {
        // Fields depending on x alone reproduce the 1-D energy times 2 pi.
        let g1 = Grid::new(1, 64).unwrap();
        let g2 = Grid::new(2, 64).unwrap();
        let n1 = RealField::scalar_from_fn(g1, |p| 1.0 + 0.3 * p[0].cos());
        let v1 = RealField::scalar_from_fn(g1, |p| 0.2 * p[0].sin());
        let n2 = RealField::scalar_from_fn(g2, |p| 1.0 + 0.3 * p[0].cos());
        let mut v2 = RealField::zeros(g2, 2);
        let vx = RealField::scalar_from_fn(g2, |p| 0.2 * p[0].sin());
        v2.data_mut()[..g2.len()].copy_from_slice(vx.component(0));
        let r1 = record(0.0, &n1, &v1, 2.0, None).unwrap();
        let r2 = record(0.0, &n2, &v2, 2.0, None).unwrap();
        assert!((r2.h1 - TAU * r1.h1).abs() <= 1e-12 * r2.h1.abs());
        assert!((r2.mass - TAU * r1.mass).abs() <= 1e-12 * r2.mass.abs());
        assert!((r2.h2 - TAU * r1.h2).abs() <= 1e-12);
    }

    #[test]
    fn radius_columns_follow_spectrum_decay() {
        let grid = Grid::new(1, 128).unwrap();
        let n = crate::spectral::synth::exponential_spectrum(grid, 0.5);
        let v = crate::spectral::synth::exponential_spectrum(grid, 1.0);
        let r = record(0.0, &n, &v, 2.0, None).unwrap();
        assert!((r.sigma_n - 0.5).abs() <= 1e-3);
        assert!((r.sigma_v - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn event_rendering_is_comma_free() {
        let e = Event::BlowUp {
            t: 0.25,
            kind: BlowUpKind::NormThreshold { norm: 2.0e7 },
        };
        assert_eq!(e.to_string(), "blowup:norm=2.000e7");
        let e = Event::Breakdown {
            t: 0.1,
            detail: "jacobian, min 0.05".into(),
        };
        assert!(!e.to_string().contains(','));
        let r = record(
            0.5,
            &RealField::zeros(Grid::new(1, 16).unwrap(), 1),
            &RealField::zeros(Grid::new(1, 16).unwrap(), 1),
            2.0,
            Some(&e),
        )
        .unwrap();
        assert!(r.event.starts_with("breakdown:"));
    }
}
