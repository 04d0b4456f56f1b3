//! Almost periodic Jacobi matrices with a prescribed mixed-radix hull.
//!
//! The library constructs semi-infinite families of Jacobi coefficients by
//! renormalizing a seed operator through a tower of expanding polynomials:
//! each level groups `d` consecutive sites of the unknown operator into one
//! block whose spectral data is dictated by the coarser operator evaluated
//! through the polynomial. Iterating the block solve from the innermost seed
//! outward produces coefficient windows whose translation structure follows
//! mixed-radix (adic) integer arithmetic on the digit offsets.
//!
//! Module map:
//! * [`poly`] — monic expanding polynomials, preimage bands, composition;
//! * [`jacobi`] — finite coefficient windows, shifts, sections, resolvents;
//! * [`inverse_spectral`] — block characteristic polynomials, discrete
//!   measures, Stieltjes reconstruction (Lanczos);
//! * [`renorm`] — the one-level block solve and its verification checks;
//! * [`tower`] — adic digit arithmetic, window sizing, multi-level iteration;
//! * [`analysis`] — shift metrics, spectral band geometry, contraction probe.

pub mod analysis;
pub mod error;
pub mod inverse_spectral;
pub mod jacobi;
pub(crate) mod linalg;
pub mod poly;
pub mod renorm;
pub mod tower;

pub use error::{Error, Result};
