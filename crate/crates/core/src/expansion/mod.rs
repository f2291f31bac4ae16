//! Expansion of `Φ` near the Gaussians: the sharp/flat split, the group-shift and twist
//! difference terms, the Hermite orthogonality system and the balancing solver.

mod balance;
mod hermite;
mod terms;

pub use balance::{balance, max_norm, perturbed_gaussians, BalanceConfig, BalanceDiagnostics, BalanceOutcome};
pub use hermite::{
    hermite_system, index_set, mode, orthogonality_residuals, orthogonality_residuals_quadrature, HermiteSystem,
    OrthogonalityResidual, Part, ResidualEntry, MAX_DEGREE,
};
pub use terms::{
    sharp_flat_split, tdoubleprime, tdoubleprime_gaussian_expansion, tprime, tprime_gaussian_expansion,
    DifferenceValue, Engine, SharpFlatSplit, ShiftExpansion, TwistExpansion, DEFAULT_ETA,
};
