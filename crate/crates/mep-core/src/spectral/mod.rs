//! Spectral core: periodic grids, Fourier transforms, multipliers,
//! dealiased products, and Sobolev norms.
//!
//! Conventions fixed here and relied on by every other module:
//! - Domain [0, 2pi)^m, m in {1, 2}, N equispaced points per axis,
//!   N a power of two, N >= 8.
//! - Coefficient convention u(x) = sum_k uhat_k e^{i k.x} with integer
//!   wavenumbers -N/2 < k_i <= N/2; `to_spectral` therefore normalizes
//!   the forward DFT by 1/N^m and `to_grid` applies no scaling.
//! - Real fields keep Hermitian symmetry uhat_{-k} = conj(uhat_k); the
//!   Nyquist coefficient k = N/2 is real and is read as a cosine mode.
//! - Odd derivative multipliers (i k) zero the Nyquist mode so that
//!   derivatives of real data stay real. Even symbols (laplacian,
//!   bessel powers) keep it, so (I - Lap)^{-1} composed with (I - Lap)
//!   is the identity on every mode.
//! - Quadratic products are dealiased with the 2/3 rule: both factors
//!   and the product are truncated to |k_i| <= floor(N/3).

use num_complex::Complex64;
use thiserror::Error;

pub mod fft;
pub mod synth;

pub use fft::Transformer;

pub const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("points per axis must be a power of two >= 8, got {0}")]
    BadSize(usize),
    #[error("non-finite sample {value} at flat index {index} of component {component}")]
    NonFinite {
        component: usize,
        index: usize,
        value: f64,
    },
    #[error("data length {got} does not match {expected} (components x grid points)")]
    LengthMismatch { got: usize, expected: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("expected {expected} components, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
}

/// Equispaced periodic grid on [0, 2pi)^m.
///
/// Flat indexing is row-major with axis 0 slowest: for m = 2 the sample
/// at flat index `j` sits at (x, y) = (2pi/N) * (j / N, j % N).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self, SpectralError> {
        if dim != 1 && dim != 2 {
            return Err(SpectralError::BadDimension(dim));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::BadSize(n));
        }
        Ok(Grid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, N^m.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Volume of one grid cell, spacing^m.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Integer wavenumber of FFT bin `bin` along one axis: bins 0..=N/2
    /// map to 0..=N/2, the rest to negative wavenumbers.
    pub fn wavenumber(&self, bin: usize) -> i64 {
        debug_assert!(bin < self.n);
        if bin <= self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    /// Wavevector (k_0, k_1) of a flat spectral index; k_1 = 0 for m = 1.
    pub fn wavevector(&self, flat: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.wavenumber(flat), 0],
            _ => [self.wavenumber(flat / self.n), self.wavenumber(flat % self.n)],
        }
    }

    /// Flat spectral index of a wavevector with -N/2 < k_i <= N/2.
    pub fn flat_of_wavevector(&self, k: [i64; 2]) -> usize {
        let half = (self.n / 2) as i64;
        let bin = |ki: i64| -> usize {
            assert!(-half < ki && ki <= half, "wavenumber {ki} out of range");
            if ki >= 0 {
                ki as usize
            } else {
                (ki + self.n as i64) as usize
            }
        };
        match self.dim {
            1 => bin(k[0]),
            _ => bin(k[0]) * self.n + bin(k[1]),
        }
    }

    /// Coordinates of a flat sample index; second entry is 0 for m = 1.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [flat as f64 * h, 0.0],
            _ => [(flat / self.n) as f64 * h, (flat % self.n) as f64 * h],
        }
    }

    /// Largest |k_i| retained by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }
}

/// Real-valued samples of a scalar (1 component) or vector (m components)
/// field, stored component-major. Construction rejects non-finite samples.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Grid,
    components: usize,
    data: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, components: usize, data: Vec<f64>) -> Result<Self, SpectralError> {
        let expected = components * grid.len();
        if data.len() != expected {
            return Err(SpectralError::LengthMismatch {
                got: data.len(),
                expected,
            });
        }
        let len = grid.len();
        for (i, &x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(SpectralError::NonFinite {
                    component: i / len,
                    index: i % len,
                    value: x,
                });
            }
        }
        Ok(RealField {
            grid,
            components,
            data,
        })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        RealField {
            grid,
            components,
            data: vec![0.0; components * grid.len()],
        }
    }

    /// Scalar field sampled from a closure of the grid point.
    pub fn scalar_from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        RealField {
            grid,
            components: 1,
            data,
        }
    }

    /// Vector field with m components sampled from a closure.
    pub fn vector_from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let len = grid.len();
        let mut data = vec![0.0; grid.dim() * len];
        for j in 0..len {
            let v = f(grid.point(j));
            for c in 0..grid.dim() {
                data[c * len + j] = v[c];
            }
        }
        RealField {
            grid,
            components: grid.dim(),
            data,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_scalar(&self) -> bool {
        self.components == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    /// View of one component as a scalar field (copies the samples).
    pub fn extract_component(&self, c: usize) -> RealField {
        RealField {
            grid: self.grid,
            components: 1,
            data: self.component(c).to_vec(),
        }
    }

    /// self += a * other. Grids and component counts must match.
    pub fn axpy(&mut self, a: f64, other: &RealField) {
        assert_eq!(self.grid, other.grid, "axpy across different grids");
        assert_eq!(self.components, other.components);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Largest |difference| against another field of the same shape.
    pub fn max_diff(&self, other: &RealField) -> f64 {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.components, other.components);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&x, &y)| m.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Fourier coefficients of a [`RealField`], same component layout.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        SpectralField {
            grid,
            components,
            data: vec![Complex64::new(0.0, 0.0); components * grid.len()],
        }
    }

    pub(crate) fn from_raw(grid: Grid, components: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), components * grid.len());
        SpectralField {
            grid,
            components,
            data,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    /// Coefficient at wavevector `k` of component `c`.
    pub fn coeff(&self, c: usize, k: [i64; 2]) -> Complex64 {
        self.component(c)[self.grid.flat_of_wavevector(k)]
    }

    pub fn set_coeff(&mut self, c: usize, k: [i64; 2], value: Complex64) {
        let flat = self.grid.flat_of_wavevector(k);
        self.component_mut(c)[flat] = value;
    }
}

/// Diagonal Fourier symbols used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierSymbol {
    /// i k_axis, with the Nyquist mode zeroed (keeps real data real).
    Derivative(usize),
    /// -|k|^2 on every mode, Nyquist included.
    Laplacian,
    /// (1 + |k|^2)^{p/2}; p = -2 is the smoothing inverse (I - Lap)^{-1}.
    BesselPower(f64),
}

impl MultiplierSymbol {
    /// Symbol value at integer wavevector `k` on a grid with N points
    /// per axis (N fixes which mode is the Nyquist mode).
    pub fn eval(&self, k: [i64; 2], n: usize) -> Complex64 {
        let nyquist = (n / 2) as i64;
        match *self {
            MultiplierSymbol::Derivative(axis) => {
                debug_assert!(axis < 2);
                let ka = k[axis];
                if ka == nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, ka as f64)
                }
            }
            MultiplierSymbol::Laplacian => {
                let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
                Complex64::new(-k2, 0.0)
            }
            MultiplierSymbol::BesselPower(p) => {
                let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
                Complex64::new((1.0 + k2).powf(p / 2.0), 0.0)
            }
        }
    }
}

/// Forward transform with a per-call transformer. Solvers that transform
/// in a loop should hold a [`Transformer`] instead.
pub fn to_spectral(f: &RealField) -> Result<SpectralField, SpectralError> {
    Transformer::new(f.grid()).forward(f)
}

/// Inverse transform; takes the real part, so callers are responsible
/// for passing Hermitian data when they expect a faithful round trip.
pub fn to_grid(f: &SpectralField) -> RealField {
    Transformer::new(f.grid()).inverse(f)
}

/// Multiply every coefficient by a diagonal symbol.
pub fn apply_multiplier(f: &SpectralField, symbol: MultiplierSymbol) -> SpectralField {
    let grid = f.grid();
    let len = grid.len();
    let mut out = f.clone();
    for c in 0..out.components() {
        let comp = out.component_mut(c);
        for (j, value) in comp.iter_mut().enumerate().take(len) {
            *value *= symbol.eval(grid.wavevector(j), grid.n());
        }
    }
    out
}

/// Grid-to-grid multiplier application: transform, multiply, transform back.
pub fn filter(f: &RealField, symbol: MultiplierSymbol) -> Result<RealField, SpectralError> {
    let t = Transformer::new(f.grid());
    Ok(t.inverse(&apply_multiplier(&t.forward(f)?, symbol)))
}

/// Gradient of a scalar field as an m-component vector field.
pub fn gradient(f: &RealField) -> Result<RealField, SpectralError> {
    expect_components(f, 1)?;
    let grid = f.grid();
    let t = Transformer::new(grid);
    let fs = t.forward(f)?;
    let len = grid.len();
    let mut out = RealField::zeros(grid, grid.dim());
    for axis in 0..grid.dim() {
        let d = t.inverse(&apply_multiplier(&fs, MultiplierSymbol::Derivative(axis)));
        out.data_mut()[axis * len..(axis + 1) * len].copy_from_slice(d.data());
    }
    Ok(out)
}

/// Divergence of an m-component vector field.
pub fn divergence(v: &RealField) -> Result<RealField, SpectralError> {
    let grid = v.grid();
    expect_components(v, grid.dim())?;
    let t = Transformer::new(grid);
    let mut acc = SpectralField::zeros(grid, 1);
    for axis in 0..grid.dim() {
        let comp = v.extract_component(axis);
        let cs = apply_multiplier(&t.forward(&comp)?, MultiplierSymbol::Derivative(axis));
        for (a, b) in acc.data_mut().iter_mut().zip(cs.data()) {
            *a += b;
        }
    }
    Ok(t.inverse(&acc))
}

/// Zero every coefficient with |k_i| > k_max on some axis.
pub fn truncate_to_band(f: &mut SpectralField, k_max: i64) {
    let grid = f.grid();
    let len = grid.len();
    for c in 0..f.components() {
        let comp = f.component_mut(c);
        for (j, value) in comp.iter_mut().enumerate().take(len) {
            let k = grid.wavevector(j);
            if k[0].abs() > k_max || k[1].abs() > k_max {
                *value = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Pointwise product of two scalar fields with 2/3-rule dealiasing:
/// both factors and the product are truncated to |k_i| <= floor(N/3).
/// Exact whenever the factors' combined bandwidth fits the retained band.
pub fn dealiased_product(f: &RealField, g: &RealField) -> Result<RealField, SpectralError> {
    let t = Transformer::new(f.grid());
    dealiased_product_with(&t, f, g)
}

/// [`dealiased_product`] reusing a caller-held transformer.
pub fn dealiased_product_with(
    t: &Transformer,
    f: &RealField,
    g: &RealField,
) -> Result<RealField, SpectralError> {
    if f.grid() != g.grid() || f.grid() != t.grid() {
        return Err(SpectralError::GridMismatch);
    }
    expect_components(f, 1)?;
    expect_components(g, 1)?;
    let cutoff = f.grid().dealias_cutoff();
    let mut fs = t.forward(f)?;
    truncate_to_band(&mut fs, cutoff);
    let mut gs = t.forward(g)?;
    truncate_to_band(&mut gs, cutoff);
    let fg = t.inverse(&fs);
    let gg = t.inverse(&gs);
    let prod = RealField {
        grid: f.grid(),
        components: 1,
        data: fg.data().iter().zip(gg.data()).map(|(a, b)| a * b).collect(),
    };
    let mut ps = t.forward(&prod)?;
    truncate_to_band(&mut ps, cutoff);
    Ok(t.inverse(&ps))
}

/// Sobolev H^sigma norm, (2pi)^m sum_k (1+|k|^2)^sigma |uhat_k|^2 under
/// the square root; vector fields contribute the root sum of squares of
/// their component norms. With sigma = 0 this is the L^2 norm.
pub fn sobolev_norm(f: &RealField, sigma: f64) -> Result<f64, SpectralError> {
    Ok(sobolev_norm_spectral(&to_spectral(f)?, sigma))
}

pub fn sobolev_norm_spectral(f: &SpectralField, sigma: f64) -> f64 {
    let grid = f.grid();
    let measure = TAU.powi(grid.dim() as i32);
    let mut total = 0.0;
    for c in 0..f.components() {
        for (j, value) in f.component(c).iter().enumerate() {
            let k = grid.wavevector(j);
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            total += (1.0 + k2).powf(sigma) * value.norm_sqr();
        }
    }
    (measure * total).sqrt()
}

/// Integral over the box: cell volume times the sample sum. Exact for
/// trigonometric polynomials resolved by the grid.
pub fn quadrature(f: &RealField) -> Result<f64, SpectralError> {
    expect_components(f, 1)?;
    Ok(f.grid().cell_volume() * f.data().iter().sum::<f64>())
}

/// L^2 inner product of two fields of the same shape (sum over components).
pub fn inner_product(f: &RealField, g: &RealField) -> Result<f64, SpectralError> {
    if f.grid() != g.grid() {
        return Err(SpectralError::GridMismatch);
    }
    if f.components() != g.components() {
        return Err(SpectralError::ComponentMismatch {
            expected: f.components(),
            got: g.components(),
        });
    }
    let dot: f64 = f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
    Ok(f.grid().cell_volume() * dot)
}

fn expect_components(f: &RealField, expected: usize) -> Result<(), SpectralError> {
    if f.components() != expected {
        return Err(SpectralError::ComponentMismatch {
            expected,
            got: f.components(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 16;

    fn grid1() -> Grid {
        Grid::new(1, N).unwrap()
    }

    fn grid2() -> Grid {
        Grid::new(2, N).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    /// Slow direct DFT, the oracle for the transform convention:
    /// uhat_k = (1/N^m) sum_j u(x_j) e^{-i k.x_j}, summed with explicit
    /// trigonometric evaluation and no FFT machinery.
    fn direct_dft(f: &RealField) -> Vec<Complex64> {
        let grid = f.grid();
        let len = grid.len();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (flat, coeff) in out.iter_mut().enumerate() {
            let k = grid.wavevector(flat);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..len {
                let x = grid.point(j);
                let phase = -(k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                acc += f.data()[j] * Complex64::new(phase.cos(), phase.sin());
            }
            *coeff = acc / len as f64;
        }
        out
    }

    #[test]
    fn grid_validation_rejects_bad_shapes() {
        assert_eq!(Grid::new(3, 16).unwrap_err(), SpectralError::BadDimension(3));
        assert_eq!(Grid::new(1, 12).unwrap_err(), SpectralError::BadSize(12));
        assert_eq!(Grid::new(1, 4).unwrap_err(), SpectralError::BadSize(4));
        assert!(Grid::new(2, 8).is_ok());
    }

    #[test]
    fn forward_matches_direct_dft_oracle() {
        for grid in [grid1(), grid2()] {
            let f = RealField::scalar_from_fn(grid, |p| {
                (p[0]).sin() + 0.3 * (2.0 * p[0] + p[1]).cos() + 0.1 * (3.0 * p[1]).sin()
            });
            let fs = to_spectral(&f).unwrap();
            let oracle = direct_dft(&f);
            let max_diff = fs
                .data()
                .iter()
                .zip(&oracle)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(max_diff <= 1e-13, "dim {}: {max_diff}", grid.dim());
        }
    }

    #[test]
    fn constant_field_transforms_to_pure_zero_mode() {
        for grid in [grid1(), grid2()] {
            let f = RealField::scalar_from_fn(grid, |_| 1.0);
            let fs = to_spectral(&f).unwrap();
            assert_close(fs.coeff(0, [0, 0]).re, 1.0, 1e-14, "zero mode");
            for j in 1..grid.len() {
                assert!(fs.component(0)[j].norm() <= 1e-14, "leak at {j}");
            }
        }
    }

    #[test]
    fn cosine_lands_on_conjugate_mode_pair() {
        let f = RealField::scalar_from_fn(grid1(), |p| p[0].cos());
        let fs = to_spectral(&f).unwrap();
        assert!((fs.coeff(0, [1, 0]) - Complex64::new(0.5, 0.0)).norm() <= 1e-14);
        assert!((fs.coeff(0, [-1, 0]) - Complex64::new(0.5, 0.0)).norm() <= 1e-14);
        let fsin = RealField::scalar_from_fn(grid1(), |p| p[0].sin());
        let ss = to_spectral(&fsin).unwrap();
        // sin x = (e^{ix} - e^{-ix}) / (2i), so uhat_{+-1} = -+ i/2.
        assert!((ss.coeff(0, [1, 0]) - Complex64::new(0.0, -0.5)).norm() <= 1e-14);
        assert!((ss.coeff(0, [-1, 0]) - Complex64::new(0.0, 0.5)).norm() <= 1e-14);
    }

    #[test]
    fn round_trip_is_identity() {
        for grid in [grid1(), grid2()] {
            let f = RealField::scalar_from_fn(grid, |p| {
                (3.0 * p[0]).sin() * (1.0 + 0.5 * (p[1] - 1.0).cos()) + p[0].cos()
            });
            let back = to_grid(&to_spectral(&f).unwrap());
            assert!(f.max_diff(&back) <= 1e-13);
        }
    }

    #[test]
    fn bessel_inverse_smooths_single_modes() {
        let grid = grid1();
        let one = RealField::scalar_from_fn(grid, |_| 1.0);
        let out = filter(&one, MultiplierSymbol::BesselPower(-2.0)).unwrap();
        assert!(out.max_diff(&one) <= 1e-14, "(I - Lap)^{{-1}} 1 = 1");

        let cosx = RealField::scalar_from_fn(grid, |p| p[0].cos());
        let want = RealField::scalar_from_fn(grid, |p| 0.5 * p[0].cos());
        let out = filter(&cosx, MultiplierSymbol::BesselPower(-2.0)).unwrap();
        assert!(out.max_diff(&want) <= 1e-14, "(I - Lap)^{{-1}} cos = cos/2");
    }

    #[test]
    fn bessel_powers_compose_to_identity() {
        let f = RealField::scalar_from_fn(grid1(), |p| (2.0 * p[0]).sin() + 0.4 * (5.0 * p[0]).cos());
        let smoothed = filter(&f, MultiplierSymbol::BesselPower(-2.0)).unwrap();
        let back = filter(&smoothed, MultiplierSymbol::BesselPower(2.0)).unwrap();
        assert!(f.max_diff(&back) <= 1e-12);
    }

    #[test]
    fn smoothing_shifts_sobolev_index_exactly() {
        // || (I-Lap)^{-1} f ||_{H^{s+2}} = || f ||_{H^s} mode by mode.
        let f = RealField::scalar_from_fn(grid1(), |p| (4.0 * p[0]).cos() - 2.0 * p[0].sin());
        let smoothed = filter(&f, MultiplierSymbol::BesselPower(-2.0)).unwrap();
        let lhs = sobolev_norm(&smoothed, 3.0).unwrap();
        let rhs = sobolev_norm(&f, 1.0).unwrap();
        assert_close(lhs, rhs, 1e-12 * rhs.abs(), "smoothing identity");
    }

    #[test]
    fn derivative_rotates_sine_to_cosine() {
        let f = RealField::scalar_from_fn(grid1(), |p| p[0].sin());
        let d = filter(&f, MultiplierSymbol::Derivative(0)).unwrap();
        let want = RealField::scalar_from_fn(grid1(), |p| p[0].cos());
        assert!(d.max_diff(&want) <= 1e-13);
    }

    #[test]
    fn derivative_kills_nyquist_mode() {
        let grid = grid1();
        let nyq = (N / 2) as f64;
        let f = RealField::scalar_from_fn(grid, |p| (nyq * p[0]).cos());
        let d = filter(&f, MultiplierSymbol::Derivative(0)).unwrap();
        assert!(d.max_norm() <= 1e-13, "d/dx of the Nyquist cosine is dropped");
    }

    #[test]
    fn gradient_of_univariate_function_has_one_active_component() {
        let f = RealField::scalar_from_fn(grid2(), |p| p[0].cos());
        let g = gradient(&f).unwrap();
        let want0 = RealField::scalar_from_fn(grid2(), |p| -p[0].sin());
        assert!(g.extract_component(0).max_diff(&want0) <= 1e-13);
        assert!(g.extract_component(1).max_norm() <= 1e-13);
    }

    #[test]
    fn divergence_of_shear_field() {
        let grid = grid2();
        let v = RealField::vector_from_fn(grid, |p| [p[0].sin(), 0.0]);
        let d = divergence(&v).unwrap();
        let want = RealField::scalar_from_fn(grid, |p| p[0].cos());
        assert!(d.max_diff(&want) <= 1e-13);
    }

    #[test]
    fn div_grad_equals_laplacian_below_nyquist() {
        for grid in [grid1(), grid2()] {
            // Band limited so the Nyquist mode (zeroed by Derivative) is absent.
            let f = RealField::scalar_from_fn(grid, |p| {
                (2.0 * p[0]).cos() + 0.7 * (p[0] + 3.0 * p[1]).sin()
            });
            let lhs = divergence(&gradient(&f).unwrap()).unwrap();
            let rhs = filter(&f, MultiplierSymbol::Laplacian).unwrap();
            let scale = rhs.max_norm().max(1.0);
            assert!(lhs.max_diff(&rhs) <= 1e-12 * scale, "dim {}", grid.dim());
        }
    }

    #[test]
    fn dealiased_product_of_low_modes_is_exact() {
        let grid = grid1();
        let f = RealField::scalar_from_fn(grid, |p| p[0].cos());
        let prod = dealiased_product(&f, &f).unwrap();
        let want = RealField::scalar_from_fn(grid, |p| 0.5 * (1.0 + (2.0 * p[0]).cos()));
        assert!(prod.max_diff(&want) <= 1e-15, "cos^2 = (1 + cos 2x)/2");
    }

    #[test]
    fn dealiased_product_with_one_truncates_the_other_factor() {
        let grid = grid1();
        let one = RealField::scalar_from_fn(grid, |_| 1.0);
        // Content above the cutoff floor(16/3) = 5 must be dropped.
        let g = RealField::scalar_from_fn(grid, |p| (2.0 * p[0]).cos() + (7.0 * p[0]).sin());
        let prod = dealiased_product(&one, &g).unwrap();
        let want = RealField::scalar_from_fn(grid, |p| (2.0 * p[0]).cos());
        assert!(prod.max_diff(&want) <= 1e-13);
    }

    #[test]
    fn dealiased_product_matches_pointwise_oracle_when_bandwidth_fits() {
        use rand::Rng;
        use rand::SeedableRng;
        let grid = Grid::new(1, 64).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // Bandwidth <= N/6 each, so the product's bandwidth <= N/3 fits the
        // retained band and dealiasing must change nothing.
        let band = (grid.n() / 6) as i64;
        let mut sample = || {
            let mut fs = SpectralField::zeros(grid, 1);
            for k in 1..=band {
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                fs.set_coeff(0, [k, 0], c);
                fs.set_coeff(0, [-k, 0], c.conj());
            }
            to_grid(&fs)
        };
        let f = sample();
        let g = sample();
        let oracle = RealField::new(
            grid,
            1,
            f.data().iter().zip(g.data()).map(|(a, b)| a * b).collect(),
        )
        .unwrap();
        let prod = dealiased_product(&f, &g).unwrap();
        assert!(prod.max_diff(&oracle) <= 1e-12);
    }

    #[test]
    fn dealiased_product_agrees_with_oversampled_oracle_on_retained_band() {
        use rand::Rng;
        use rand::SeedableRng;
        let grid = Grid::new(1, 32).unwrap();
        let fine = Grid::new(1, 128).unwrap();
        let cutoff = grid.dealias_cutoff();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // Full retained band in both factors: the product then overflows the
        // band and the retained part must match an alias-free computation.
        let mut pair = || {
            let mut coarse = SpectralField::zeros(grid, 1);
            let mut refined = SpectralField::zeros(fine, 1);
            for k in 1..=cutoff {
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                coarse.set_coeff(0, [k, 0], c);
                coarse.set_coeff(0, [-k, 0], c.conj());
                refined.set_coeff(0, [k, 0], c);
                refined.set_coeff(0, [-k, 0], c.conj());
            }
            (to_grid(&coarse), to_grid(&refined))
        };
        let (f, f_fine) = pair();
        let (g, g_fine) = pair();
        // On the 4x grid the pointwise product is alias-free.
        let prod_fine = RealField::new(
            fine,
            1,
            f_fine
                .data()
                .iter()
                .zip(g_fine.data())
                .map(|(a, b)| a * b)
                .collect(),
        )
        .unwrap();
        let ps_fine = to_spectral(&prod_fine).unwrap();
        let got = to_spectral(&dealiased_product(&f, &g).unwrap()).unwrap();
        for k in -cutoff..=cutoff {
            let diff = (got.coeff(0, [k, 0]) - ps_fine.coeff(0, [k, 0])).norm();
            assert!(diff <= 1e-12, "retained mode {k}: {diff}");
        }
        for j in 0..grid.len() {
            let k = grid.wavevector(j);
            if k[0].abs() > cutoff {
                assert!(got.component(0)[j].norm() <= 1e-13, "mode {} kept", k[0]);
            }
        }
    }

    #[test]
    fn sobolev_norm_frozen_values() {
        let f = RealField::scalar_from_fn(grid1(), |p| p[0].sin());
        // ||sin||_{L^2}^2 = pi; H^1 doubles each |k| = 1 weight.
        assert_close(
            sobolev_norm(&f, 0.0).unwrap(),
            std::f64::consts::PI.sqrt(),
            1e-13,
            "H^0 of sin",
        );
        assert_close(
            sobolev_norm(&f, 1.0).unwrap(),
            TAU.sqrt(),
            1e-13,
            "H^1 of sin",
        );
        assert_eq!(sobolev_norm(&RealField::zeros(grid1(), 1), 2.0).unwrap(), 0.0);
        // Vector norm is the root sum of squares of component norms.
        let v = RealField::vector_from_fn(grid2(), |p| [p[0].sin(), 0.0]);
        let per_component = sobolev_norm(&v.extract_component(0), 0.0).unwrap();
        assert_close(
            sobolev_norm(&v, 0.0).unwrap(),
            per_component,
            1e-13,
            "vector H^0",
        );
    }

    #[test]
    fn parseval_ties_h0_norm_to_quadrature() {
        let f = RealField::scalar_from_fn(grid1(), |p| {
            1.2 + (3.0 * p[0]).cos() - 0.4 * p[0].sin()
        });
        let sq = RealField::new(
            f.grid(),
            1,
            f.data().iter().map(|x| x * x).collect(),
        )
        .unwrap();
        let l2 = sobolev_norm(&f, 0.0).unwrap();
        let integral = quadrature(&sq).unwrap();
        assert_close(l2 * l2, integral, 1e-12 * integral.abs(), "Parseval");
    }

    #[test]
    fn derivative_is_skew_adjoint_in_quadrature() {
        let f = RealField::scalar_from_fn(grid1(), |p| (2.0 * p[0]).sin() + 0.3 * p[0].cos());
        let g = RealField::scalar_from_fn(grid1(), |p| (3.0 * p[0]).cos() - 0.8 * p[0].sin());
        let df = filter(&f, MultiplierSymbol::Derivative(0)).unwrap();
        let dg = filter(&g, MultiplierSymbol::Derivative(0)).unwrap();
        let lhs = inner_product(&df, &g).unwrap();
        let rhs = -inner_product(&f, &dg).unwrap();
        assert_close(lhs, rhs, 1e-12 * (lhs.abs() + rhs.abs() + 1.0), "skewness");
    }

    #[test]
    fn non_finite_samples_are_rejected_with_location() {
        let grid = grid1();
        let mut data = vec![0.0; grid.len()];
        data[5] = f64::NAN;
        match RealField::new(grid, 1, data) {
            Err(SpectralError::NonFinite {
                component: 0,
                index: 5,
                ..
            }) => {}
            other => panic!("expected NonFinite at index 5, got {other:?}"),
        }
        // Same check on the transform path, where solver arithmetic can
        // poison samples after construction.
        let mut f = RealField::zeros(grid, 1);
        f.data_mut()[3] = f64::INFINITY;
        assert!(matches!(
            to_spectral(&f),
            Err(SpectralError::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let grid = grid1();
        assert!(matches!(
            RealField::new(grid, 1, vec![0.0; 3]),
            Err(SpectralError::LengthMismatch { got: 3, .. })
        ));
        let v = RealField::zeros(grid2(), 2);
        assert!(matches!(
            quadrature(&v),
            Err(SpectralError::ComponentMismatch { expected: 1, got: 2 })
        ));
        let f = RealField::zeros(grid, 1);
        let g = RealField::zeros(Grid::new(1, 32).unwrap(), 1);
        assert!(matches!(
            dealiased_product(&f, &g),
            Err(SpectralError::GridMismatch)
        ));
    }
}
