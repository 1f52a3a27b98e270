//! Transform plumbing. A [`Transformer`] owns the FFT plans for one grid
//! shape; all scratch lives in locals, so a shared instance stays safe to
//! use from several call sites and transforms are pure functions of their
//! input.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, RealField, SpectralError, SpectralField};

pub struct Transformer {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transformer {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Transformer {
            grid,
            fwd: planner.plan_fft_forward(grid.n()),
            inv: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Forward transform, normalized so coefficients follow the
    /// u(x) = sum uhat_k e^{ik.x} convention. Rejects non-finite samples
    /// (solver arithmetic can poison a field after construction).
    pub fn forward(&self, f: &RealField) -> Result<SpectralField, SpectralError> {
        assert_eq!(f.grid(), self.grid, "transformer planned for another grid");
        let len = self.grid.len();
        for (i, &x) in f.data().iter().enumerate() {
            if !x.is_finite() {
                return Err(SpectralError::NonFinite {
                    component: i / len,
                    index: i % len,
                    value: x,
                });
            }
        }
        let scale = 1.0 / len as f64;
        let mut out = Vec::with_capacity(f.components() * len);
        for c in 0..f.components() {
            let mut buf: Vec<Complex64> = f
                .component(c)
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
            self.run_axes(&mut buf, &self.fwd);
            out.extend(buf.into_iter().map(|z| z * scale));
        }
        Ok(SpectralField::from_raw(self.grid, f.components(), out))
    }

    /// Inverse transform onto the grid; returns the real part.
    pub fn inverse(&self, f: &SpectralField) -> RealField {
        assert_eq!(f.grid(), self.grid, "transformer planned for another grid");
        let len = self.grid.len();
        let mut out = Vec::with_capacity(f.components() * len);
        for c in 0..f.components() {
            let mut buf: Vec<Complex64> = f.component(c).to_vec();
            self.run_axes(&mut buf, &self.inv);
            out.extend(buf.into_iter().map(|z| z.re));
        }
        RealField::new(self.grid, f.components(), out)
            .expect("inverse transform of finite coefficients is finite")
    }

    fn run_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        match self.grid.dim() {
            1 => fft.process(data),
            _ => {
                // Axis 1 is contiguous; axis 0 goes through a column buffer.
                for row in data.chunks_exact_mut(n) {
                    fft.process(row);
                }
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    fft.process(&mut col);
                    for i in 0..n {
                        data[i * n + j] = col[i];
                    }
                }
            }
        }
    }
}
