//! Error type shared by the pipeline modules.

use thiserror::Error;

/// Errors produced by the decomposition / realization pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Evaluation requested at (or too close to) a zero of the denominator.
    #[error("pole at evaluation point: |p(z)| = {abs_p:.3e} < tol_pole = {tol:.3e}")]
    PoleAtPoint { abs_p: f64, tol: f64 },

    /// Reflection envelope smaller than the polynomial degree.
    #[error("reflection envelope ({0}, {1}) is smaller than deg p = ({2}, {3})")]
    EnvelopeTooSmall(usize, usize, usize, usize),

    /// Denominator has a zero in the open bidisk.
    #[error(
        "unstable denominator: approximate zero at ({re1}+{im1}i, {re2}+{im2}i), |p| = {abs_p:.3e}"
    )]
    UnstableDenominator {
        re1: f64,
        im1: f64,
        re2: f64,
        im2: f64,
        abs_p: f64,
    },

    /// Operation requires a square matrix function.
    #[error("matrix function is not square: dims {0}x{1}")]
    NotSquare(usize, usize),

    /// Operation requires an inner function.
    #[error("function is not inner: sup ||Phi*Phi - I|| = {residual:.3e} > tol = {tol:.3e}")]
    NotInner { residual: f64, tol: f64 },

    /// Kernels live over different envelopes/denominators and cannot be compared.
    #[error("incompatible kernel bases: {0}")]
    IncompatibleBasis(String),

    /// Least-squares misfit in a kernel characterization exceeded tolerance.
    #[error("residual too large: {residual:.3e} > tol = {tol:.3e} ({context})")]
    ResidualTooLarge {
        residual: f64,
        tol: f64,
        context: String,
    },

    /// Element is not in the column space of the kernel factors.
    #[error("element not in the kernel sum space: residual {residual:.3e}")]
    NotInSpace { residual: f64 },

    /// The sampled isometry has a defect exceeding what the Agler residual allows.
    #[error("isometry defect {defect:.3e} exceeds bound {bound:.3e}")]
    IsometryDefect { defect: f64, bound: f64 },

    /// The sampled colligation domain never reached full rank.
    #[error("colligation domain rank stalled at {rank} of {expected}")]
    RankDeficientDomain { rank: usize, expected: usize },

    /// Slice interpolation points are rank deficient.
    #[error("uniqueness slice is degenerate: rank {rank} of {expected}")]
    UniquenessSliceDegenerate { rank: usize, expected: usize },

    /// (I - E_z A) is numerically singular at the evaluation point.
    #[error("singular resolvent at evaluation point")]
    SingularResolvent,

    /// Exterior point too close to the exceptional set S.
    #[error("point too close to the exceptional set: smallest singular value {margin:.3e}")]
    NearSingularSet { margin: f64 },

    /// Projection iteration ran out of iterations; residual trace attached.
    #[error("max iterations ({max_iter}) exceeded: affine residual {residual:.3e}")]
    MaxIterExceeded {
        max_iter: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    /// A torus inner product failed to converge (non-integrable or too slow).
    #[error("torus pairing did not converge: {detail}")]
    PairingDivergent { detail: String },

    /// Input data malformed (dimension mismatches and the like).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
