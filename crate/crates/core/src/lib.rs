//! Agler kernel machinery for two-variable rational Schur functions.
//!
//! The crate decomposes rational Schur functions on the bidisk into pairs of
//! positive kernels, builds the canonical coisometric transfer-function
//! realization, and numerically verifies the identities and orderings that
//! relate the canonical kernels. The pipeline is organized as:
//!
//! * [`bipoly`] — bivariate complex polynomials and matrix rational functions
//!   over a common scalar denominator, with stability/inner certificates;
//! * [`torus`] — Taylor/Fourier coefficient extraction and H²(𝔻²) inner
//!   products, including an exact residue-based pairing for rational data;
//! * [`modelspace`] — the finite-dimensional residual subspaces and the
//!   canonical max/min kernels of a rational inner function;
//! * [`kernelcalc`] — finite-rank Hermitian kernel algebra: evaluation,
//!   positivity, the Agler identity residual, and the kernel calculus used by
//!   the verification suite;
//! * [`sdpsplit`] — semidefinite feasibility (Dykstra alternating projections)
//!   producing some Agler pair for a square rational Schur function;
//! * [`realization`] — the canonical coisometric colligation, Gleason block
//!   operators and transfer-function evaluation;
//! * [`extension`] — evaluation outside the closed bidisk and boundary
//!   unitarity scans.

pub mod bipoly;
pub mod corpus;
pub mod error;
pub mod extension;
pub mod kernelcalc;
pub mod linalg;
pub mod modelspace;
pub mod realization;
pub mod sample;
pub mod sdpsplit;
pub mod torus;

pub use bipoly::{BiPoly, RationalSchurFn};
pub use error::CoreError;
pub use kernelcalc::FiniteKernel;
pub use modelspace::{CanonicalKernels, Subspace};
pub use realization::Colligation;

use serde::{Deserialize, Serialize};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Numerical tolerances shared by the pipeline. All defaults are overridable;
/// certificates record the values actually used.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Points with |p(z)| below this are treated as poles.
    pub tol_pole: f64,
    /// Sup-norm residual below which a square function is accepted as inner.
    pub tol_inner: f64,
    /// Slack allowed on the boundary Schur bound sup ||Phi|| <= 1.
    pub tol_schur: f64,
    /// Boundary unitarity tolerance at radius 1 - 1e-4.
    pub tol_boundary: f64,
    /// Singular-value cutoff for nullspaces, ranks and orthogonal complements.
    pub rank_tol: f64,
    /// Residual tolerance for identity checks (Agler identity, Gleason).
    pub tol_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_pole: 1e-10,
            tol_inner: 1e-8,
            tol_schur: 1e-8,
            tol_boundary: 1e-2,
            rank_tol: 1e-9,
            tol_residual: 1e-8,
        }
    }
}

/// Default seed for all seeded samplers, published in every report.
pub const DEFAULT_SEED: u64 = 0x5EED;
