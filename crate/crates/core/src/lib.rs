//! Exact and numerical machinery for self-adjoint extensions of the
//! fourth-order radial operators arising from the transverse vector Laplacian.
//!
//! The crate is organized around a closed term algebra
//! ([`radialfn`]): finite sums `Σ c·r^k·e^{a r}` that stay in the class
//! under differentiation, products, the radial operators, and closed-form
//! integration.  On top of it sit the spectral constructions
//! ([`spectral`], [`scalarext`]), resolvent and inverse kernels
//! ([`kernels`]), vector spherical harmonics ([`vsh`]), renormalized
//! quadratic forms ([`quadform`]), and validated numerical quadrature and
//! differentiation ([`numerics`]).

pub mod kernels;
pub mod numerics;
pub mod quadform;
pub mod radialfn;
pub mod scalarext;
pub mod spectral;
pub mod vsh;

pub use radialfn::{RadialError, RadialFunction, RadialResult, SeriesAtZero, Term};
pub use scalarext::Sign;
