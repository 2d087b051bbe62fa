//! Chart-local numerics for plurisubharmonic functions on almost complex
//! manifolds.
//!
//! The crate works on a single coordinate chart (a ball in `C^n` identified
//! with `R^{2n}` through `z_j = x_{2j-1} + i x_{2j}`) and provides:
//!
//! * scalar fields given by closed-form expressions, with exact and
//!   finite-difference derivatives ([`expr`], [`field`]);
//! * the regularized max-function `M_theta` built from a smooth bump with
//!   support in `[0,1]` and unit mass ([`regmax`]);
//! * almost complex structures as real `2n x 2n` operator fields or complex
//!   `n x n` matrix fields, with conversions and coordinate changes
//!   ([`almost_complex`]);
//! * the complex Hessian (Levi form) `H_J(u)(p,V) = -(d J*du)_p(X, JX)` and
//!   strict plurisubharmonicity sweeps ([`levi`]);
//! * adapted coordinate normalizations `A(0) = 0`, `d_z A(0) = 0`
//!   ([`adapted`]);
//! * a Picard / Cauchy-Green solver for small J-complex discs used as an
//!   independent Hessian oracle ([`disc`]);
//! * scenario-driven verification of the smoothing estimate and the Hessian
//!   lower bound ([`verify`], [`scenario`]).
//!
//! Everything is pure and immutable after construction; grid sweeps may run
//! data-parallel.

pub mod adapted;
pub mod almost_complex;
pub mod disc;
pub mod error;
pub mod expr;
pub mod field;
pub mod grid;
pub mod levi;
pub mod quad;
pub mod regmax;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
