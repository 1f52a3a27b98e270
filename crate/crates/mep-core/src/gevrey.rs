//! Analyticity diagnostics: a scale-graded family of norms built from
//! weighted derivative sums, empirical bound constants for the operators
//! appearing in the evolution equations, the combinatorial inequality the
//! scale calculus rests on, and least-squares radius-of-analyticity fits.
//!
//! The graded norm of a zero-mean field u at scale s > 0 is
//!
//!     |||u|||_s = sup_{0 <= j <= j_max} ||d^j u||_{H^sigma} s^j (j+1)^2 / j!
//!
//! evaluated in log space so large j and steep spectra cannot overflow.
//! All graded-norm machinery is one-dimensional; radius fits also accept
//! two-dimensional fields.

use thiserror::Error;

use crate::spectral::{
    filter, to_spectral, MultiplierSymbol, RealField, SpectralError, TAU,
};

/// Modes with magnitude at or below this floor are treated as numerical
/// zero by the radius fit.
pub const RADIUS_FIT_FLOOR: f64 = 1e-13;
/// Smallest |k| admitted to the radius fit; modes 0 and 1 carry too much
/// profile information and too little decay information.
pub const RADIUS_FIT_KMIN: i64 = 2;
/// Fewest usable modes for a conclusive radius fit.
pub const RADIUS_FIT_MIN_MODES: usize = 8;

#[derive(Debug, Error)]
pub enum GevreyError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("sobolev index must exceed 1 + dim/2, got sigma = {sigma} at dim {dim}")]
    BadSigma { sigma: f64, dim: usize },
    #[error("scales must satisfy 0 < narrower < wider, got {narrower} >= {wider}")]
    ScalesOutOfOrder { narrower: f64, wider: f64 },
    #[error("graded norms are one-dimensional, field has dim {0}")]
    NotOneDimensional(usize),
    #[error("expected a scalar field, got {0} components")]
    NotScalar(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Parameters of the graded norm family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    /// Scale s > 0 grading the derivative weights.
    pub s: f64,
    /// Sobolev index of the underlying norm; must exceed 1 + dim/2.
    pub sigma: f64,
    /// Largest derivative order inspected by the sup.
    pub j_max: usize,
}

impl ScaleParams {
    pub fn new(s: f64, sigma: f64, j_max: usize) -> Result<Self, GevreyError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(GevreyError::BadScale(s));
        }
        if sigma <= 1.5 {
            return Err(GevreyError::BadSigma { sigma, dim: 1 });
        }
        Ok(ScaleParams { s, sigma, j_max })
    }

    /// Same family at another scale.
    pub fn at_scale(&self, s: f64) -> Result<Self, GevreyError> {
        ScaleParams::new(s, self.sigma, self.j_max)
    }
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            s: 0.5,
            sigma: 2.0,
            j_max: 24,
        }
    }
}

/// Result of a graded-norm evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EsNorm {
    pub value: f64,
    /// Derivative order where the sup was attained.
    pub attained_at: usize,
    /// False when the sup sat at j_max, i.e. the reported value is a
    /// truncation of a still-growing sequence.
    pub attained_interior: bool,
    /// Mean subtracted from the field before evaluation.
    pub subtracted_mean: f64,
}

fn ln_factorial(j: usize) -> f64 {
    (1..=j).map(|i| (i as f64).ln()).sum()
}

fn check_one_dim_scalar(u: &RealField) -> Result<(), GevreyError> {
    if u.grid().dim() != 1 {
        return Err(GevreyError::NotOneDimensional(u.grid().dim()));
    }
    if u.components() != 1 {
        return Err(GevreyError::NotScalar(u.components()));
    }
    Ok(())
}

/// Graded analyticity norm |||u|||_s. The mean is subtracted first and
/// reported; the weight of mode k at derivative order j is
/// |k|^{2j} (1+k^2)^sigma, every resolved mode included.
pub fn es_norm(u: &RealField, params: &ScaleParams) -> Result<EsNorm, GevreyError> {
    check_one_dim_scalar(u)?;
    let spectrum = to_spectral(u)?;
    let grid = u.grid();
    let mean = spectrum.coeff(0, [0, 0]).re;

    // ln |uhat_k|^2 per nonzero mode, skipping exact zeros.
    let mut ln_mode_sq: Vec<(f64, f64)> = Vec::new(); // (ln |k|, ln |uhat|^2 + sigma ln(1+k^2))
    for j in 0..grid.len() {
        let k = grid.wavevector(j)[0];
        if k == 0 {
            continue;
        }
        let mag_sq = spectrum.component(0)[j].norm_sqr();
        if mag_sq > 0.0 {
            let k2 = (k * k) as f64;
            ln_mode_sq.push((
                (k.abs() as f64).ln(),
                mag_sq.ln() + params.sigma * (1.0 + k2).ln(),
            ));
        }
    }

    if ln_mode_sq.is_empty() {
        return Ok(EsNorm {
            value: 0.0,
            attained_at: 0,
            attained_interior: true,
            subtracted_mean: mean,
        });
    }

    let ln_s = params.s.ln();
    let ln_measure = TAU.ln();
    let mut best = f64::NEG_INFINITY;
    let mut best_j = 0usize;
    let mut scratch = Vec::with_capacity(ln_mode_sq.len());
    for j in 0..=params.j_max {
        // ln ||d^j u||_{H^sigma}^2 via log-sum-exp over modes.
        scratch.clear();
        let mut top = f64::NEG_INFINITY;
        for &(ln_k, base) in &ln_mode_sq {
            let term = 2.0 * j as f64 * ln_k + base;
            scratch.push(term);
            top = top.max(term);
        }
        let sum: f64 = scratch.iter().map(|t| (t - top).exp()).sum();
        let ln_norm = 0.5 * (ln_measure + top + sum.ln());
        let ln_term = ln_norm + j as f64 * ln_s + 2.0 * ((j + 1) as f64).ln() - ln_factorial(j);
        if ln_term > best {
            best = ln_term;
            best_j = j;
        }
    }

    Ok(EsNorm {
        value: best.exp(),
        attained_at: best_j,
        attained_interior: best_j < params.j_max,
        subtracted_mean: mean,
    })
}

/// Pointwise product check for the graded norms: reports the observed
/// ratio |||uv|||_s / (|||u|||_s |||v|||_s). Factors and product are
/// re-centered inside `es_norm`; the subtracted means come back too.
#[derive(Debug, Clone, Copy)]
pub struct ProductCheck {
    pub ratio: f64,
    pub product_norm: f64,
    pub factor_norms: (f64, f64),
    pub subtracted_means: (f64, f64, f64),
}

pub fn product_lemma_check(
    u: &RealField,
    v: &RealField,
    params: &ScaleParams,
) -> Result<ProductCheck, GevreyError> {
    check_one_dim_scalar(u)?;
    check_one_dim_scalar(v)?;
    if u.grid() != v.grid() {
        return Err(GevreyError::Spectral(SpectralError::GridMismatch));
    }
    let nu = es_norm(u, params)?;
    let nv = es_norm(v, params)?;
    let prod = RealField::new(
        u.grid(),
        1,
        u.data().iter().zip(v.data()).map(|(a, b)| a * b).collect(),
    )
    .map_err(GevreyError::Spectral)?;
    let np = es_norm(&prod, params)?;
    let denom = nu.value * nv.value;
    Ok(ProductCheck {
        ratio: if denom > 0.0 { np.value / denom } else { f64::NAN },
        product_norm: np.value,
        factor_norms: (nu.value, nv.value),
        subtracted_means: (nu.subtracted_mean, nv.subtracted_mean, np.subtracted_mean),
    })
}

/// Implied constant for the scale-loss bound of the (negated) gradient:
/// c = |||-du/dx|||_{s'} (s - s') / |||u|||_s with s' < s.
pub fn gradient_bound_constant(
    u: &RealField,
    wider: &ScaleParams,
    narrower_s: f64,
) -> Result<f64, GevreyError> {
    scale_loss_constant(u, wider, narrower_s)
}

/// Same bound for the (negated) divergence; in one dimension the single
/// component makes this the same computation as the gradient bound, kept
/// as its own entry point because the two operators play different roles.
pub fn divergence_bound_constant(
    v: &RealField,
    wider: &ScaleParams,
    narrower_s: f64,
) -> Result<f64, GevreyError> {
    scale_loss_constant(v, wider, narrower_s)
}

fn scale_loss_constant(
    u: &RealField,
    wider: &ScaleParams,
    narrower_s: f64,
) -> Result<f64, GevreyError> {
    if !(narrower_s > 0.0) || narrower_s >= wider.s {
        return Err(GevreyError::ScalesOutOfOrder {
            narrower: narrower_s,
            wider: wider.s,
        });
    }
    check_one_dim_scalar(u)?;
    let narrower = wider.at_scale(narrower_s)?;
    let du = filter(u, MultiplierSymbol::Derivative(0))?;
    let mut ndu = du;
    ndu.scale(-1.0);
    let lhs = es_norm(&ndu, &narrower)?.value;
    let rhs = es_norm(u, wider)?.value;
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs * (wider.s - narrower_s) / rhs)
}

/// Contraction ratio of the smoothing inverse (I - Lap)^{-1} at one scale:
/// |||(I-Lap)^{-1} u|||_s / |||u|||_s, which must never exceed 1.
pub fn smoothing_contraction_ratio(
    u: &RealField,
    params: &ScaleParams,
) -> Result<f64, GevreyError> {
    check_one_dim_scalar(u)?;
    let smoothed = filter(u, MultiplierSymbol::BesselPower(-2.0))?;
    let num = es_norm(&smoothed, params)?.value;
    let den = es_norm(u, params)?.value;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Implied constant for the advection operator u -> -(v du/dx):
/// c = |||-(v du/dx)|||_{s'} (s - s') / (|||v|||_{s'} |||u|||_s), s' < s.
pub fn advection_bound_constant(
    u: &RealField,
    v: &RealField,
    wider: &ScaleParams,
    narrower_s: f64,
) -> Result<f64, GevreyError> {
    if !(narrower_s > 0.0) || narrower_s >= wider.s {
        return Err(GevreyError::ScalesOutOfOrder {
            narrower: narrower_s,
            wider: wider.s,
        });
    }
    check_one_dim_scalar(u)?;
    check_one_dim_scalar(v)?;
    if u.grid() != v.grid() {
        return Err(GevreyError::Spectral(SpectralError::GridMismatch));
    }
    let narrower = wider.at_scale(narrower_s)?;
    let du = filter(u, MultiplierSymbol::Derivative(0))?;
    let transported = RealField::new(
        u.grid(),
        1,
        v.data()
            .iter()
            .zip(du.data())
            .map(|(a, b)| -(a * b))
            .collect(),
    )
    .map_err(GevreyError::Spectral)?;
    let lhs = es_norm(&transported, &narrower)?.value;
    let den = es_norm(v, &narrower)?.value * es_norm(u, wider)?.value;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs * (wider.s - narrower_s) / den)
}

/// Both sides of the combinatorial inequality
///
///     s'^k / s^{k+1} ((k+1)/(k+2))^2 (k+1)  <=  1 / (s - s'),
///
/// for 0 < s' < s, evaluated in log space.
#[derive(Debug, Clone, Copy)]
pub struct AlgCheck {
    pub lhs_log: f64,
    pub rhs_log: f64,
    pub holds: bool,
}

pub fn alg_inequality_check(k: usize, s: f64, s_prime: f64) -> Result<AlgCheck, GevreyError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(GevreyError::BadScale(s));
    }
    if !(s_prime > 0.0) || s_prime >= s {
        return Err(GevreyError::ScalesOutOfOrder {
            narrower: s_prime,
            wider: s,
        });
    }
    let kf = k as f64;
    let lhs_log = kf * s_prime.ln() - (kf + 1.0) * s.ln()
        + 2.0 * ((kf + 1.0).ln() - (kf + 2.0).ln())
        + (kf + 1.0).ln();
    let rhs_log = -(s - s_prime).ln();
    Ok(AlgCheck {
        lhs_log,
        rhs_log,
        holds: lhs_log <= rhs_log,
    })
}

/// Least-squares radius-of-analyticity fit.
#[derive(Debug, Clone, Copy)]
pub struct RadiusFit {
    /// Fitted decay rate, clamped at 0; NaN when inconclusive.
    pub sigma: f64,
    pub modes_used: usize,
    /// R^2 of the log-magnitude fit; NaN when inconclusive.
    pub fit_quality: f64,
    /// |k| range that entered the fit (0, 0) when inconclusive.
    pub band: (f64, f64),
    /// False when fewer than [`RADIUS_FIT_MIN_MODES`] modes rose above
    /// the floor, i.e. the decay is too steep to measure on this grid.
    pub conclusive: bool,
}

impl RadiusFit {
    fn inconclusive() -> Self {
        RadiusFit {
            sigma: f64::NAN,
            modes_used: 0,
            fit_quality: f64::NAN,
            band: (0.0, 0.0),
            conclusive: false,
        }
    }
}

/// Fit ln |uhat_k| against |k| over modes with |k| >= 2 and magnitude
/// above the floor; the radius estimate is minus the slope, clamped at 0.
pub fn analyticity_radius(u: &RealField) -> Result<RadiusFit, GevreyError> {
    if u.components() != 1 {
        return Err(GevreyError::NotScalar(u.components()));
    }
    let spectrum = to_spectral(u)?;
    let grid = u.grid();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for j in 0..grid.len() {
        let k = grid.wavevector(j);
        let kn = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        if kn < RADIUS_FIT_KMIN as f64 {
            continue;
        }
        // Each Hermitian pair enters once, through its non-negative half.
        if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
            continue;
        }
        let mag = spectrum.component(0)[j].norm();
        if mag > RADIUS_FIT_FLOOR {
            pts.push((kn, mag.ln()));
        }
    }
    if pts.len() < RADIUS_FIT_MIN_MODES {
        return Ok(RadiusFit::inconclusive());
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let pred = mean_y + slope * (p.0 - mean_x);
            (p.1 - pred).powi(2)
        })
        .sum();
    let quality = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    Ok(RadiusFit {
        sigma: (-slope).max(0.0),
        modes_used: pts.len(),
        fit_quality: quality,
        band: (lo, hi),
        conclusive: true,
    })
}

/// Radius estimates along a time series of fields.
pub fn radius_track<'a>(
    series: impl IntoIterator<Item = (f64, &'a RealField)>,
) -> Result<Vec<(f64, RadiusFit)>, GevreyError> {
    series
        .into_iter()
        .map(|(t, f)| analyticity_radius(f).map(|fit| (t, fit)))
        .collect()
}
