//! Seeded property-check suites: each check exercises one structural
//! identity of the library on randomized inputs and reports a residual
//! against a fixed tolerance. The suites are deterministic in the seed,
//! so a failure is reproducible from its command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eulerian::State;
use crate::gevrey::{
    alg_inequality_check, analyticity_radius, es_norm, product_lemma_check,
    smoothing_contraction_ratio, ScaleParams,
};
use crate::hamiltonian::{
    apply_d1, apply_d2, fd_var_deriv, jacobi_residual, pair, rhs_consistency, var_deriv, Covector,
    Functional, PoissonOp, RESOLVED_SIGN,
};
use crate::spectral::synth::{exponential_spectrum, random_band_limited};
use crate::spectral::{
    filter, quadrature, sobolev_norm, to_spectral, Grid, MultiplierSymbol, RealField,
};

use super::HarnessError;

/// One property verdict. `residual` is dimensionless (normalized inside
/// each check) and passes when at most `tolerance`.
#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl PropertyResult {
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        // NaN must fail, so compare through the negation.
        let pass = !(residual > tolerance) && residual.is_finite();
        PropertyResult {
            name,
            residual,
            tolerance,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Spectral,
    Gevrey,
    Hamiltonian,
    All,
}

impl std::str::FromStr for SuiteName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(SuiteName::Spectral),
            "gevrey" => Ok(SuiteName::Gevrey),
            "hamiltonian" => Ok(SuiteName::Hamiltonian),
            "all" => Ok(SuiteName::All),
            other => Err(format!(
                "unknown suite `{other}` (expected spectral, gevrey, hamiltonian, or all)"
            )),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Internal(e.to_string())
}

fn validate_n(n: usize) -> Result<(), HarnessError> {
    Grid::new(1, n).map(|_| ()).map_err(internal)
}

/// Scalar field with samples `f` squared, for quadrature-based norms.
fn squared(f: &RealField) -> RealField {
    let mut out = f.clone();
    for x in out.data_mut() {
        *x *= *x;
    }
    out
}

fn scaled_to_max(mut f: RealField, target: f64) -> RealField {
    let peak = f.max_norm();
    if peak > 0.0 {
        f.scale(target / peak);
    }
    f
}

/// Random density/velocity pair with density bounded away from zero.
fn random_state(grid: Grid, rng: &mut ChaCha8Rng) -> State {
    let band = grid.dealias_cutoff() / 2;
    let mut n = scaled_to_max(random_band_limited(grid, rng, band, 0.4, 1.0), 0.4);
    for x in n.data_mut() {
        *x += 1.0;
    }
    let v = scaled_to_max(random_band_limited(grid, rng, band, 0.4, 1.0), 0.5);
    State::new(0.0, n, v).expect("finite fields on one grid")
}

fn random_covector(grid: Grid, rng: &mut ChaCha8Rng, band: i64) -> Covector {
    Covector::new(
        random_band_limited(grid, rng, band, 0.3, 1.0),
        random_band_limited(grid, rng, band, 0.3, 1.0),
    )
    .expect("scalar fields on one grid")
}

// --- spectral -----------------------------------------------------------

pub fn spectral_suite(n: usize, seed: u64) -> Result<Vec<PropertyResult>, HarnessError> {
    validate_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // Transform round trip, both dimensions.
    let mut roundtrip_worst: f64 = 0.0;
    for dim in [1, 2] {
        let grid = Grid::new(dim, n.min(if dim == 2 { 128 } else { n })).map_err(internal)?;
        let f = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 0.2, 1.0);
        let back = crate::spectral::to_grid(&to_spectral(&f).map_err(internal)?);
        roundtrip_worst = roundtrip_worst.max(f.max_diff(&back) / f.max_norm().max(1e-300));
    }
    out.push(PropertyResult::new("transform_round_trip", roundtrip_worst, 1e-12));

    // Parseval: the quadrature of u^2 equals the squared spectral L2 norm.
    let grid = Grid::new(1, n).map_err(internal)?;
    let mut parseval_worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 0.1, 1.0);
        let physical = quadrature(&squared(&u)).map_err(internal)?;
        let spectral = sobolev_norm(&u, 0.0).map_err(internal)?.powi(2);
        parseval_worst =
            parseval_worst.max((physical - spectral).abs() / physical.abs().max(1e-300));
    }
    out.push(PropertyResult::new("parseval_identity", parseval_worst, 1e-12));

    // Product rule for the spectral derivative on band-limited factors
    // whose product still fits the grid (band <= N/4 each, sum < N/2).
    let mut product_rule_worst: f64 = 0.0;
    for _ in 0..5 {
        let band = (n as i64 / 4 - 1).max(1);
        let u = random_band_limited(grid, &mut rng, band, 0.3, 1.0);
        let v = random_band_limited(grid, &mut rng, band, 0.3, 1.0);
        let du = filter(&u, MultiplierSymbol::Derivative(0)).map_err(internal)?;
        let dv = filter(&v, MultiplierSymbol::Derivative(0)).map_err(internal)?;
        let mut uv = u.clone();
        for (a, b) in uv.data_mut().iter_mut().zip(v.data()) {
            *a *= b;
        }
        let duv = filter(&uv, MultiplierSymbol::Derivative(0)).map_err(internal)?;
        let mut want = RealField::zeros(grid, 1);
        for i in 0..grid.len() {
            want.data_mut()[i] = u.data()[i] * dv.data()[i] + v.data()[i] * du.data()[i];
        }
        let scale = duv.max_norm().max(1e-300);
        product_rule_worst = product_rule_worst.max(duv.max_diff(&want) / scale);
    }
    out.push(PropertyResult::new(
        "derivative_product_rule",
        product_rule_worst,
        1e-11,
    ));

    // Dealiased products are exact when the combined bandwidth fits the
    // retained band, and never leave energy beyond the cutoff.
    let mut dealias_exact_worst: f64 = 0.0;
    let mut dealias_leak_worst: f64 = 0.0;
    for _ in 0..5 {
        let half_band = grid.dealias_cutoff() / 2;
        let u = random_band_limited(grid, &mut rng, half_band, 0.2, 1.0);
        let v = random_band_limited(grid, &mut rng, half_band, 0.2, 1.0);
        let mut plain = u.clone();
        for (a, b) in plain.data_mut().iter_mut().zip(v.data()) {
            *a *= b;
        }
        let clean = crate::spectral::dealiased_product(&u, &v).map_err(internal)?;
        dealias_exact_worst = dealias_exact_worst
            .max(clean.max_diff(&plain) / plain.max_norm().max(1e-300));

        let wide = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 0.05, 1.0);
        let product = crate::spectral::dealiased_product(&wide, &wide).map_err(internal)?;
        let spectrum = to_spectral(&product).map_err(internal)?;
        for j in 0..grid.len() {
            let k = grid.wavevector(j);
            if k[0].abs() > grid.dealias_cutoff() {
                dealias_leak_worst = dealias_leak_worst.max(spectrum.component(0)[j].norm());
            }
        }
    }
    out.push(PropertyResult::new(
        "dealiased_product_exactness",
        dealias_exact_worst,
        1e-12,
    ));
    out.push(PropertyResult::new(
        "dealiased_product_band",
        dealias_leak_worst,
        1e-13,
    ));

    // The smoothing operator is inverted by its reciprocal multiplier and
    // shifts Sobolev indices by exactly two.
    let mut inverse_worst: f64 = 0.0;
    let mut shift_worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 0.2, 1.0);
        let smoothed = filter(&u, MultiplierSymbol::BesselPower(-2.0)).map_err(internal)?;
        let back = filter(&smoothed, MultiplierSymbol::BesselPower(2.0)).map_err(internal)?;
        inverse_worst = inverse_worst.max(u.max_diff(&back) / u.max_norm().max(1e-300));

        let lifted = sobolev_norm(&smoothed, 2.0).map_err(internal)?;
        let base = sobolev_norm(&u, 0.0).map_err(internal)?;
        shift_worst = shift_worst.max((lifted - base).abs() / base.max(1e-300));
    }
    out.push(PropertyResult::new("smoothing_inverse", inverse_worst, 1e-11));
    out.push(PropertyResult::new(
        "smoothing_sobolev_shift",
        shift_worst,
        1e-12,
    ));

    Ok(out)
}

// --- graded norms -------------------------------------------------------

/// Scale pairs (wider, narrower) drawn for inequality sweeps.
fn scale_pairs(rng: &mut ChaCha8Rng, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| {
            let s: f64 = rng.gen_range(0.05..1.5);
            let s_prime = s * rng.gen_range(0.05..0.95);
            (s, s_prime)
        })
        .collect()
}

/// Worst signed log-margin of the combinatorial inequality over
/// k = 1..=k_max and the given scale pairs; any positive value is a
/// counterexample.
pub fn alg_inequality_margin(k_max: usize, pairs: &[(f64, f64)]) -> Result<f64, HarnessError> {
    let mut worst = f64::NEG_INFINITY;
    for &(s, s_prime) in pairs {
        for k in 1..=k_max {
            let check = alg_inequality_check(k, s, s_prime).map_err(internal)?;
            worst = worst.max(check.lhs_log - check.rhs_log);
        }
    }
    Ok(worst)
}

pub fn gevrey_suite(n: usize, seed: u64) -> Result<Vec<PropertyResult>, HarnessError> {
    validate_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(1, n).map_err(internal)?;
    let params = ScaleParams::default();
    let mut out = Vec::new();

    // Combinatorial inequality sweep; the margin is a log, so require it
    // nonpositive up to round-off.
    let pairs = scale_pairs(&mut rng, 50);
    let margin = alg_inequality_margin(200, &pairs)?;
    out.push(PropertyResult::new(
        "alg_inequality_sweep",
        margin.max(0.0),
        1e-12,
    ));

    // The graded norm grows with its scale parameter.
    let mut monotone_worst: f64 = 0.0;
    let profile = exponential_spectrum(grid, 1.2);
    let mut previous = f64::NEG_INFINITY;
    for s in [0.2, 0.4, 0.6, 0.8] {
        let value = es_norm(&profile, &params.at_scale(s).map_err(internal)?)
            .map_err(internal)?
            .value;
        monotone_worst = monotone_worst.max((previous - value).max(0.0) / value.max(1e-300));
        previous = value;
    }
    out.push(PropertyResult::new(
        "graded_norm_scale_monotone",
        monotone_worst,
        1e-12,
    ));

    // Observed product ratios stay at or below the algebra constant 1.
    let mut ratio_worst: f64 = 0.0;
    for _ in 0..50 {
        let u = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 1.0, 1.0);
        let v = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 1.0, 1.0);
        let check = product_lemma_check(&u, &v, &params).map_err(internal)?;
        if check.ratio.is_finite() {
            ratio_worst = ratio_worst.max((check.ratio - 1.0).max(0.0));
        }
    }
    out.push(PropertyResult::new("product_ratio_bound", ratio_worst, 0.0));

    // Smoothing contracts the graded norm.
    let mut contraction_worst: f64 = 0.0;
    for _ in 0..10 {
        let u = random_band_limited(grid, &mut rng, grid.dealias_cutoff(), 0.8, 1.0);
        let ratio = smoothing_contraction_ratio(&u, &params).map_err(internal)?;
        contraction_worst = contraction_worst.max((ratio - 1.0).max(0.0));
    }
    out.push(PropertyResult::new(
        "smoothing_contraction",
        contraction_worst,
        0.0,
    ));

    // Radius fits recover planted exponential decay rates.
    let mut recovery_worst: f64 = 0.0;
    for sigma0 in [0.2, 0.5, 1.0] {
        let u = exponential_spectrum(grid, sigma0);
        let fit = analyticity_radius(&u).map_err(internal)?;
        let err = if fit.conclusive {
            (fit.sigma - sigma0).abs()
        } else {
            f64::INFINITY
        };
        recovery_worst = recovery_worst.max(err);
    }
    out.push(PropertyResult::new(
        "radius_fit_recovery",
        recovery_worst,
        1e-3,
    ));

    Ok(out)
}

// --- variational structure ----------------------------------------------

pub fn hamiltonian_suite(n: usize, seed: u64) -> Result<Vec<PropertyResult>, HarnessError> {
    validate_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(1, n).map_err(internal)?;
    let mut out = Vec::new();

    // Skew-adjointness of both operators over random state/covector pairs.
    let mut skew_worst: f64 = 0.0;
    for _ in 0..10 {
        let s = random_state(grid, &mut rng);
        let a = random_covector(grid, &mut rng, grid.dealias_cutoff());
        let b = random_covector(grid, &mut rng, grid.dealias_cutoff());
        let scale = pair(&a, &a).map_err(internal)?.sqrt()
            * pair(&b, &b).map_err(internal)?.sqrt()
            * (1.0 + s.n.max_norm() + s.v.max_norm());
        let (d1a_v, d1a_n) = apply_d1(&a).map_err(internal)?;
        let (d1b_v, d1b_n) = apply_d1(&b).map_err(internal)?;
        let d1a = Covector::new(d1a_v, d1a_n).map_err(internal)?;
        let d1b = Covector::new(d1b_v, d1b_n).map_err(internal)?;
        let sym1 = pair(&a, &d1b).map_err(internal)? + pair(&d1a, &b).map_err(internal)?;
        let (d2a_v, d2a_n) = apply_d2(&s, &a, RESOLVED_SIGN).map_err(internal)?;
        let (d2b_v, d2b_n) = apply_d2(&s, &b, RESOLVED_SIGN).map_err(internal)?;
        let d2a = Covector::new(d2a_v, d2a_n).map_err(internal)?;
        let d2b = Covector::new(d2b_v, d2b_n).map_err(internal)?;
        let sym2 = pair(&a, &d2b).map_err(internal)? + pair(&d2a, &b).map_err(internal)?;
        skew_worst = skew_worst.max(sym1.abs().max(sym2.abs()) / scale.max(1e-300));
    }
    out.push(PropertyResult::new("operator_skew_adjoint", skew_worst, 1e-12));

    // Analytic variational derivatives against centered differences.
    let mut gradient_worst: f64 = 0.0;
    for _ in 0..3 {
        let s = random_state(grid, &mut rng);
        for f in [Functional::H1, Functional::H2] {
            let exact = var_deriv(f, &s).map_err(internal)?;
            let approx = fd_var_deriv(f, &s, 1e-5).map_err(internal)?;
            let scale = pair(&exact, &exact).map_err(internal)?.sqrt().max(1e-300);
            let gap_v = exact.theta_v.max_diff(&approx.theta_v);
            let gap_n = exact.theta_n.max_diff(&approx.theta_n);
            gradient_worst = gradient_worst.max(gap_v.max(gap_n) / scale);
        }
    }
    out.push(PropertyResult::new(
        "variational_gradient",
        gradient_worst,
        1e-6,
    ));

    // Both Hamiltonian forms reproduce the solver tendency.
    let mut triple_worst: f64 = 0.0;
    for _ in 0..5 {
        let s = random_state(grid, &mut rng);
        let report = rhs_consistency(&s).map_err(internal)?;
        triple_worst = triple_worst
            .max(report.gap_d1.max(report.gap_d2).max(report.gap_cross) / report.scale);
    }
    out.push(PropertyResult::new(
        "hamiltonian_triple_consistency",
        triple_worst,
        1e-10,
    ));

    // The constant operator satisfies the Jacobi identity to round-off.
    let s = random_state(grid, &mut rng);
    let band = grid.dealias_cutoff() / 2;
    let triples: Vec<_> = (0..5)
        .map(|_| {
            (
                random_covector(grid, &mut rng, band),
                random_covector(grid, &mut rng, band),
                random_covector(grid, &mut rng, band),
            )
        })
        .collect();
    let jac = jacobi_residual(&s, &triples, PoissonOp::D1).map_err(internal)?;
    out.push(PropertyResult::new("constant_operator_jacobi", jac, 1e-13));

    Ok(out)
}

pub fn run_suite(which: SuiteName, n: usize, seed: u64) -> Result<Vec<PropertyResult>, HarnessError> {
    let mut out = Vec::new();
    if matches!(which, SuiteName::Spectral | SuiteName::All) {
        out.extend(spectral_suite(n, seed)?);
    }
    if matches!(which, SuiteName::Gevrey | SuiteName::All) {
        out.extend(gevrey_suite(n, seed)?);
    }
    if matches!(which, SuiteName::Hamiltonian | SuiteName::All) {
        out.extend(hamiltonian_suite(n, seed)?);
    }
    Ok(out)
}
