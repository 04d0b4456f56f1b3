//! Finite coefficient windows of one-dimensional Jacobi matrices.
//!
//! A window stores diagonal entries `q_k` over an inclusive integer index
//! range `[start, end]` (the base index may be negative) and positive
//! off-diagonal entries `p_k` for `start < k <= end`, with `p_k` coupling
//! sites `k - 1` and `k`. Windows are value types: shifting, slicing, and
//! comparing them never touches the underlying operator semantics beyond
//! re-indexing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Distance below which an evaluation point counts as on the spectrum.
const SPECTRUM_GAP: f64 = 1e-8;

/// A finite window of Jacobi coefficients over `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiWindow {
    start: i64,
    /// `q_k` for `k` in `start..=end`.
    q: Vec<f64>,
    /// `p_k` for `k` in `start+1..=end`; `p[i]` couples local sites `i` and `i+1`.
    p: Vec<f64>,
}

impl JacobiWindow {
    /// Build a window from raw coefficient vectors.
    pub fn new(start: i64, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Validation("window must contain at least one site".into()));
        }
        if p.len() + 1 != q.len() {
            return Err(Error::Validation(format!(
                "off-diagonal count {} must be one less than diagonal count {}",
                p.len(),
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite diagonal entry".into()));
        }
        for &v in &p {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "off-diagonal entries must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { start, q, p })
    }

    /// Constant-coefficient window of `len` sites starting at `start`.
    pub fn constant(start: i64, len: usize, q: f64, p: f64) -> Result<Self> {
        Self::new(start, vec![q; len], vec![p; len.saturating_sub(1)])
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.q.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a validated window always has at least one site
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.start && hi <= self.end() && lo <= hi
    }

    /// Diagonal entry at absolute index `k`. Panics outside the window.
    pub fn q_at(&self, k: i64) -> f64 {
        assert!(
            k >= self.start && k <= self.end(),
            "index {k} outside window [{}, {}]",
            self.start,
            self.end()
        );
        self.q[(k - self.start) as usize]
    }

    /// Off-diagonal entry at absolute index `k` (couples sites `k-1`, `k`).
    /// Panics unless `start < k <= end`.
    pub fn p_at(&self, k: i64) -> f64 {
        assert!(
            k > self.start && k <= self.end(),
            "off-diagonal index {k} outside ({}, {}]",
            self.start,
            self.end()
        );
        self.p[(k - self.start - 1) as usize]
    }

    pub fn q_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn p_slice(&self) -> &[f64] {
        &self.p
    }

    /// `max |q| + 2 max p`, an upper bound for the section operator norm.
    pub fn norm_bound(&self) -> f64 {
        let qmax = self.q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pmax = self.p.iter().fold(0.0f64, |m, v| m.max(*v));
        qmax + 2.0 * pmax
    }

    /// The sub-window over `[lo, hi]`.
    pub fn section(&self, lo: i64, hi: i64) -> Result<Self> {
        if !self.covers(lo, hi) {
            return Err(Error::WindowTooShort {
                need_lo: lo,
                need_hi: hi,
                have_lo: self.start,
                have_hi: self.end(),
            });
        }
        let a = (lo - self.start) as usize;
        let b = (hi - self.start) as usize;
        Ok(Self {
            start: lo,
            q: self.q[a..=b].to_vec(),
            p: self.p[a..b].to_vec(),
        })
    }

    /// Conjugation by the shift: the result at index `k` equals `self` at `k + m`.
    pub fn shift_conjugate(&self, m: i64) -> Self {
        Self {
            start: self.start - m,
            q: self.q.clone(),
            p: self.p.clone(),
        }
    }

    /// Intersection of the two index ranges, if any.
    pub fn overlap(&self, other: &Self) -> Option<(i64, i64)> {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo <= hi).then_some((lo, hi))
    }

    /// Supremum over `[lo, hi]` of the coefficient deviations
    /// `max(|q_k - q'_k|, |p_k - p'_k|)` (the `p` comparison starts at `lo + 1`).
    pub fn coef_sup_dist(&self, other: &Self, lo: i64, hi: i64) -> Result<f64> {
        if self.overlap(other).is_none() {
            return Err(Error::EmptyOverlap);
        }
        if !self.covers(lo, hi) || !other.covers(lo, hi) {
            return Err(Error::WindowTooShort {
                need_lo: lo,
                need_hi: hi,
                have_lo: self.start.max(other.start),
                have_hi: self.end().min(other.end()),
            });
        }
        let mut sup = 0.0f64;
        for k in lo..=hi {
            sup = sup.max((self.q_at(k) - other.q_at(k)).abs());
            if k > lo {
                sup = sup.max((self.p_at(k) - other.p_at(k)).abs());
            }
        }
        Ok(sup)
    }

    /// Eigenvalues of the finite section over `[lo, hi]`, ascending.
    pub fn section_spectrum(&self, lo: i64, hi: i64) -> Result<Vec<f64>> {
        let section = self.section(lo, hi)?;
        Ok(linalg::eigenvalues(&section.q, &section.p))
    }

    /// Operator norm (spectral radius) of the difference of the two sections
    /// over `[lo, hi]`.
    pub fn section_opnorm_diff(&self, other: &Self, lo: i64, hi: i64) -> Result<f64> {
        if self.overlap(other).is_none() {
            return Err(Error::EmptyOverlap);
        }
        if !self.covers(lo, hi) || !other.covers(lo, hi) {
            return Err(Error::WindowTooShort {
                need_lo: lo,
                need_hi: hi,
                have_lo: self.start.max(other.start),
                have_hi: self.end().min(other.end()),
            });
        }
        let n = (hi - lo + 1) as usize;
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n - 1);
        for k in lo..=hi {
            diag.push(self.q_at(k) - other.q_at(k));
            if k > lo {
                off.push(self.p_at(k) - other.p_at(k));
            }
        }
        Ok(linalg::spectral_radius(&diag, &off))
    }

    /// `<first|(z - J)^{-1}|first>` of the whole window treated as a finite
    /// block, by the bottom-up continued fraction. `z` must stay at distance
    /// >= 1e-8 from the section spectrum.
    pub fn resolvent_00(&self, z: f64) -> Result<f64> {
        let spectrum = linalg::eigenvalues(&self.q, &self.p);
        let distance = spectrum
            .iter()
            .fold(f64::INFINITY, |m, &lambda| m.min((z - lambda).abs()));
        if distance < SPECTRUM_GAP {
            return Err(Error::NearSpectrum { distance });
        }
        let n = self.q.len();
        let mut g = 1.0 / (z - self.q[n - 1]);
        for i in (0..n - 1).rev() {
            g = 1.0 / (z - self.q[i] - self.p[i] * self.p[i] * g);
        }
        Ok(g)
    }

    /// Complex-energy variant of [`Self::resolvent_00`].
    pub fn resolvent_00_complex(&self, z: Complex64) -> Result<Complex64> {
        let spectrum = linalg::eigenvalues(&self.q, &self.p);
        let distance = spectrum
            .iter()
            .fold(f64::INFINITY, |m, &lambda| m.min((z - lambda).norm()));
        if distance < SPECTRUM_GAP {
            return Err(Error::NearSpectrum { distance });
        }
        let n = self.q.len();
        let mut g = Complex64::new(1.0, 0.0) / (z - self.q[n - 1]);
        for i in (0..n - 1).rev() {
            g = Complex64::new(1.0, 0.0) / (z - self.q[i] - self.p[i] * self.p[i] * g);
        }
        Ok(g)
    }
}

/// The central portion of an inclusive range: keeps `fraction` of the length
/// (at least one index), centered.
pub fn central_subrange(lo: i64, hi: i64, fraction: f64) -> (i64, i64) {
    debug_assert!(lo <= hi && fraction > 0.0 && fraction <= 1.0);
    let len = hi - lo + 1;
    let keep = ((len as f64 * fraction).floor() as i64).clamp(1, len);
    let a = lo + (len - keep) / 2;
    (a, a + keep - 1)
}
