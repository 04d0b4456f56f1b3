//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, validation, and the numerical pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor invariant or operation precondition failed.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Root extraction did not converge or produced the wrong root count.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// A critical point is degenerate (second derivative below tolerance).
    #[error("degenerate critical point at {point}: |second derivative| = {second_derivative:.3e} below 1e-8")]
    DegenerateCritical { point: f64, second_derivative: f64 },

    /// A polynomial root expected to be real has a large imaginary part.
    #[error("non-real roots: largest imaginary component {imaginary:.3e}")]
    NonRealRoots { imaginary: f64 },

    /// A spectral-measure weight came out non-positive.
    #[error("negative weight {weight:.3e} at node {node}")]
    NegativeWeight { node: f64, weight: f64 },

    /// Two measure nodes are closer than the resolvable gap.
    #[error("node collision: gap {gap:.3e} below 1e-10")]
    NodeCollision { gap: f64 },

    /// Two windows share no common index range.
    #[error("windows have no overlapping index range")]
    EmptyOverlap,

    /// A window does not cover the index range an operation needs.
    #[error("window [{have_lo}, {have_hi}] does not cover required [{need_lo}, {need_hi}]")]
    WindowTooShort {
        need_lo: i64,
        need_hi: i64,
        have_lo: i64,
        have_hi: i64,
    },

    /// A tower level's window cannot supply the level above it.
    #[error("level {level} window [{have_lo}, {have_hi}] cannot produce required [{need_lo}, {need_hi}]")]
    InsufficientWindow {
        level: usize,
        need_lo: i64,
        need_hi: i64,
        have_lo: i64,
        have_hi: i64,
    },

    /// The evaluation point is too close to the (section) spectrum.
    #[error("evaluation point too close to spectrum: distance {distance:.3e}")]
    NearSpectrum { distance: f64 },

    /// Mixed-radix addition carried past the stored digit prefix.
    #[error("digit carry {carry} overflows beyond the stored adic prefix")]
    DigitOverflowBeyondPrefix { carry: i64 },

    /// The reconstructed block's leading diagonal entry missed its anchor.
    #[error("block anchor mismatch: got {got:.12e}, expected {expected:.12e} (tolerance {tolerance:.1e})")]
    AnchorMismatch {
        got: f64,
        expected: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
