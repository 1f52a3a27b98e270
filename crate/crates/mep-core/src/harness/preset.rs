//! Built-in initial conditions. Every preset keeps mean density 1 so
//! mass is the same across runs, and uses gradient velocity fields so
//! the two-dimensional flows stay irrotational.

use crate::eulerian::{SolverError, State};
use crate::harness::config::PresetName;
use crate::spectral::{quadrature, Grid, RealField};

/// Construct the preset state at t = 0.
pub fn initial_state(
    grid: Grid,
    preset: PresetName,
    a_n: f64,
    a_v: f64,
) -> Result<State, SolverError> {
    let n = match preset {
        PresetName::Steady => RealField::scalar_from_fn(grid, |_| 1.0),
        PresetName::Analytic | PresetName::Large => match grid.dim() {
            1 => RealField::scalar_from_fn(grid, |p| 1.0 + a_n * p[0].cos()),
            _ => RealField::scalar_from_fn(grid, |p| 1.0 + a_n * p[0].cos() * p[1].cos()),
        },
        PresetName::Gaussian => bump_density(grid, a_n)?,
    };
    let v = match preset {
        PresetName::Steady => RealField::zeros(grid, grid.dim()),
        _ => match grid.dim() {
            1 => RealField::scalar_from_fn(grid, |p| a_v * p[0].sin()),
            _ => RealField::vector_from_fn(grid, |p| [a_v * p[0].sin(), a_v * p[1].sin()]),
        },
    };
    State::new(0.0, n, v)
}

/// Smooth periodized bump, normalized on the grid so the perturbation
/// has zero mean and unit peak: n = 1 + a (B - mean B)/(max B - mean B)
/// with B = exp(sum_i cos x_i). The peak sits at the origin, a node.
fn bump_density(grid: Grid, a_n: f64) -> Result<RealField, SolverError> {
    let bump = match grid.dim() {
        1 => RealField::scalar_from_fn(grid, |p| p[0].cos().exp()),
        _ => RealField::scalar_from_fn(grid, |p| (p[0].cos() + p[1].cos()).exp()),
    };
    let volume = (crate::spectral::TAU).powi(grid.dim() as i32);
    let mean = quadrature(&bump)? / volume;
    let peak = bump.data().iter().cloned().fold(f64::MIN, f64::max);
    let scale = a_n / (peak - mean);
    Ok(RealField::new(
        grid,
        1,
        bump.data().iter().map(|b| 1.0 + scale * (b - mean)).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = crate::spectral::TAU;

    #[test]
    fn presets_share_unit_mean_density() {
        for dim in [1usize, 2] {
            let grid = Grid::new(dim, 64).unwrap();
            let volume = TAU.powi(dim as i32);
            for preset in [
                PresetName::Steady,
                PresetName::Analytic,
                PresetName::Gaussian,
                PresetName::Large,
            ] {
                let s = initial_state(grid, preset, 0.3, 0.1).unwrap();
                let mass = quadrature(&s.n).unwrap();
                assert!(
                    (mass - volume).abs() <= 1e-12 * volume,
                    "{preset:?} dim {dim}: mass {mass}"
                );
            }
        }
    }

    #[test]
    fn analytic_preset_matches_closed_form() {
        let grid = Grid::new(1, 32).unwrap();
        let s = initial_state(grid, PresetName::Analytic, 0.2, 0.1).unwrap();
        let n_want = RealField::scalar_from_fn(grid, |p| 1.0 + 0.2 * p[0].cos());
        let v_want = RealField::scalar_from_fn(grid, |p| 0.1 * p[0].sin());
        assert!(s.n.max_diff(&n_want) == 0.0);
        assert!(s.v.max_diff(&v_want) == 0.0);
    }

    #[test]
    fn bump_peaks_at_origin_with_unit_height() {
        let grid = Grid::new(1, 128).unwrap();
        let s = initial_state(grid, PresetName::Gaussian, 0.3, 0.0).unwrap();
        // Peak value 1 + a_n at x = 0 (flat index 0).
        assert!((s.n.data()[0] - 1.3).abs() <= 1e-12);
        let low = s.n.data().iter().cloned().fold(f64::MAX, f64::min);
        assert!(low > 0.0, "bump stays positive at this amplitude");
    }

    #[test]
    fn two_dimensional_velocity_is_curl_free() {
        let grid = Grid::new(2, 64).unwrap();
        let s = initial_state(grid, PresetName::Analytic, 0.2, 0.1).unwrap();
        let dy_vx = crate::spectral::filter(
            &s.v.extract_component(0),
            crate::spectral::MultiplierSymbol::Derivative(1),
        )
        .unwrap();
        let dx_vy = crate::spectral::filter(
            &s.v.extract_component(1),
            crate::spectral::MultiplierSymbol::Derivative(0),
        )
        .unwrap();
        assert!(dy_vx.max_diff(&dx_vy) <= 1e-13);
    }
}
