//! Numerical laboratory for quantitative stability of Young's convolution inequality on the
//! Heisenberg group.
//!
//! The building blocks are exact Gaussian-polynomial integration ([`gausspoly`]), nested
//! Gauss–Hermite and Monte Carlo evaluation of the deformed trilinear functional
//! ([`quadrature`]), the symmetry group and orbit distance ([`symmetry`]), the expansion
//! verifiers and balancing solver ([`expansion`]) and batch experiments ([`lab`]).

pub mod error;
pub mod expansion;
pub mod gausspoly;
pub mod group;
pub mod lab;
pub mod linalg;
pub mod optim;
pub mod quadrature;
pub mod symmetry;

pub use error::{Error, Result};
pub use gausspoly::{GaussTerm, GaussianPolynomial, Poly};
pub use group::{
    group_mul, optimal_constant, standard_gaussians, symplectic, symplectic_defect_norm,
    AttachedParams, ExponentTriple, HPoint,
};
