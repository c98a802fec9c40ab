//! Reconstruction of radial, time-dependent memory kernels `k(t, r)` in
//! parabolic integro-differential equations posed on an annulus (2D) or a
//! spherical corona (3D).
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: radial, time and angular grids, quadrature, finite differences.
//! * [`coefficients`]: admissible diffusion tensors and their spherical form.
//! * [`operators`]: divergence-form and first-order operators on angular fields.
//! * [`functionals`]: the measurement functionals `Φ`, `Ψ` and their corrections.
//! * [`kernel_init`]: the closed-form initial kernel `k₀` and data validation.
//! * [`reduction`]: fixed-point operators of the general (angular) problem.
//! * [`forward`]: radial forward solver and data manufacture.
//! * [`inverse_radial`]: Green-function / Volterra solver for the radial problem.
//! * [`manufactured`]: analytic test problems with known kernels.
//! * [`checks`]: the invariant suite behind `radkernel verify`.
//!
//! Parallel loops go through [`exec::Exec`]; building without the `parallel`
//! feature turns every loop sequential.

pub mod checks;
pub mod coefficients;
pub mod error;
pub mod exec;
pub mod forward;
pub mod functionals;
pub mod grid;
pub mod inverse_radial;
pub mod kernel_init;
pub mod manufactured;
pub mod operators;
pub mod reduction;

pub use error::{Error, Result};
pub use exec::Exec;
