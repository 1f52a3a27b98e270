//! Deterministic field synthesis for tests, check suites, and diagnostics:
//! seeded band-limited noise and closed-form analytic profiles whose
//! spectra are known exactly.

use num_complex::Complex64;
use rand::Rng;

use super::{to_grid, Grid, RealField, SpectralField};

/// Random real scalar field with Hermitian coefficients supported on
/// 0 < |k_i| <= band, damped by e^{-decay |k|}. Zero mean by construction.
pub fn random_band_limited(
    grid: Grid,
    rng: &mut impl Rng,
    band: i64,
    decay: f64,
    amplitude: f64,
) -> RealField {
    let band = band.min((grid.n() / 2 - 1) as i64);
    let mut fs = SpectralField::zeros(grid, 1);
    let put = |fs: &mut SpectralField, k: [i64; 2], rng: &mut dyn rand::RngCore| {
        let norm = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        let mag = amplitude * (-decay * norm).exp();
        let re = rng.gen_range(-1.0..1.0);
        let im = rng.gen_range(-1.0..1.0);
        let c = Complex64::new(mag * re, mag * im);
        fs.set_coeff(0, k, c);
        fs.set_coeff(0, [-k[0], -k[1]], c.conj());
    };
    match grid.dim() {
        1 => {
            for k in 1..=band {
                put(&mut fs, [k, 0], rng);
            }
        }
        _ => {
            // Half-space k0 > 0, plus the k0 = 0, k1 > 0 line, fixes the
            // Hermitian partner of every generated mode.
            for k0 in 1..=band {
                for k1 in -band..=band {
                    put(&mut fs, [k0, k1], rng);
                }
            }
            for k1 in 1..=band {
                put(&mut fs, [0, k1], rng);
            }
        }
    }
    to_grid(&fs)
}

/// Real profile with coefficients exactly r^{|k|} e^{-i k x0} (m = 1),
/// i.e. the Poisson kernel centered at x0. Analytic with radius ln(1/r),
/// so spectral truncation errors scale like r^{cutoff}.
pub fn poisson_profile(grid: Grid, r: f64, x0: f64) -> RealField {
    assert_eq!(grid.dim(), 1, "poisson_profile is one-dimensional");
    assert!((0.0..1.0).contains(&r));
    let mut fs = SpectralField::zeros(grid, 1);
    fs.set_coeff(0, [0, 0], Complex64::new(1.0, 0.0));
    let half = (grid.n() / 2) as i64;
    for k in 1..half {
        let c = Complex64::from_polar(r.powi(k as i32), -(k as f64) * x0);
        fs.set_coeff(0, [k, 0], c);
        fs.set_coeff(0, [-k, 0], c.conj());
    }
    to_grid(&fs)
}

/// Real field whose coefficient magnitudes are exactly e^{-sigma |k|}
/// (m = 1), the calibration target for radius-of-analyticity fits.
pub fn exponential_spectrum(grid: Grid, sigma: f64) -> RealField {
    assert_eq!(grid.dim(), 1, "exponential_spectrum is one-dimensional");
    let mut fs = SpectralField::zeros(grid, 1);
    let half = (grid.n() / 2) as i64;
    for k in 1..half {
        let c = Complex64::new((-sigma * k as f64).exp(), 0.0);
        fs.set_coeff(0, [k, 0], c);
        fs.set_coeff(0, [-k, 0], c);
    }
    to_grid(&fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{quadrature, to_spectral};
    use rand::SeedableRng;

    #[test]
    fn random_fields_are_zero_mean_and_band_limited() {
        for grid in [Grid::new(1, 32).unwrap(), Grid::new(2, 16).unwrap()] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let f = random_band_limited(grid, &mut rng, 4, 0.5, 1.0);
            assert!(quadrature(&f).unwrap().abs() <= 1e-13);
            let fs = to_spectral(&f).unwrap();
            for j in 0..grid.len() {
                let k = grid.wavevector(j);
                if k[0].abs() > 4 || k[1].abs() > 4 {
                    assert!(fs.component(0)[j].norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn poisson_profile_matches_closed_form() {
        let grid = Grid::new(1, 64).unwrap();
        let (r, x0) = (0.5, 1.0);
        let f = poisson_profile(grid, r, x0);
        // sum_k r^{|k|} e^{ik(x-x0)} = (1 - r^2) / (1 - 2 r cos(x-x0) + r^2),
        // up to truncation at |k| = N/2 which is r^{32} ~ 2e-10 here.
        let want = RealField::scalar_from_fn(grid, |p| {
            let c = (p[0] - x0).cos();
            (1.0 - r * r) / (1.0 - 2.0 * r * c + r * r)
        });
        assert!(f.max_diff(&want) <= 1e-9);
    }

    #[test]
    fn exponential_spectrum_has_prescribed_decay() {
        let grid = Grid::new(1, 64).unwrap();
        let f = exponential_spectrum(grid, 0.3);
        let fs = to_spectral(&f).unwrap();
        for k in 1..31 {
            let got = fs.coeff(0, [k, 0]).norm();
            let want = (-0.3 * k as f64).exp();
            // Round-trip noise is absolute (relative to the largest mode).
            assert!((got - want).abs() <= 1e-12 * want + 1e-14);
        }
    }
}
