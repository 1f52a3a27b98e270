//! Pseudo-spectral laboratory for the modified Euler-Poisson equation
//!
//!   dn/dt + div(n v)               = 0
//!   dv/dt + (v . grad) v + grad u  = 0,   (I - Lap) u = n
//!
//! posed on the periodic box [0, 2pi)^m with m in {1, 2}. The smoothing
//! inverse (I - Lap)^{-1} is diagonal in Fourier space, which makes the
//! whole right-hand side a composition of multipliers and pointwise
//! products; everything here is built on that observation.
//!
//! Module map:
//! - [`spectral`]: grids, transforms, multipliers, dealiased products, norms
//! - [`eulerian`]: grid-based solver for the modified and full equations
//! - [`lagrangian`]: flow-map solver (m = 1) with composition operators
//! - [`hamiltonian`]: functionals, variational derivatives, the two
//!   Hamiltonian operators, and structural checks (m = 1)
//! - [`gevrey`]: scale-of-analyticity norms and radius-of-analyticity fits
//! - [`harness`]: run configuration, presets, snapshots, CLI drivers

pub mod diagnostics;
pub mod eulerian;
pub mod gevrey;
pub mod hamiltonian;
pub mod harness;
pub mod integrate;
pub mod lagrangian;
pub mod spectral;
