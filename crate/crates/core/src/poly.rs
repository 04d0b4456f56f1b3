//! Monic expanding polynomials over a reference interval `[-xi, xi]`.
//!
//! A polynomial `T` of degree `d >= 2` is *expanding over* `[-xi, xi]` when
//! every critical value exceeds `xi` in magnitude and the full preimage
//! `T^{-1}([-xi, xi])` (a union of `d` disjoint closed bands, one per
//! monotone branch) lies inside `[-xi, xi]`. The ratio of the smallest
//! critical-value magnitude to `xi` is the *margin*; quantitative
//! contraction statements downstream require margin >= 10, while any
//! margin > 1 yields a structurally valid polynomial.

use serde::Serialize;

use crate::error::{Error, Result};

// --- dense polynomial coefficient helpers (low-to-high order) ---

/// Evaluate by Horner's rule.
pub(crate) fn poly_eval(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

/// Coefficients of the derivative.
pub(crate) fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Product of two coefficient vectors.
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `a + s * b`, padded to the longer length.
pub(crate) fn poly_add_scaled(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (o, &ai) in out.iter_mut().zip(a.iter()) {
        *o = ai;
    }
    for (o, &bi) in out.iter_mut().zip(b.iter()) {
        *o += s * bi;
    }
    out
}

/// Composition `outer(inner(z))` by Horner's rule in coefficient arithmetic.
pub(crate) fn poly_compose(outer: &[f64], inner: &[f64]) -> Vec<f64> {
    let mut acc = vec![*outer.last().expect("non-empty polynomial")];
    for &c in outer.iter().rev().skip(1) {
        acc = poly_mul(&acc, inner);
        acc[0] += c;
    }
    acc
}

/// Synthetic division by `(z - root)`: returns `(quotient, remainder)`.
pub(crate) fn poly_divide_linear(coeffs: &[f64], root: f64) -> (Vec<f64>, f64) {
    let n = coeffs.len();
    debug_assert!(n >= 2);
    let mut quotient = vec![0.0; n - 1];
    let mut carry = coeffs[n - 1];
    for k in (0..n - 1).rev() {
        quotient[k] = carry;
        carry = coeffs[k] + root * carry;
    }
    (quotient, carry)
}

// --- intervals ---

/// A closed interval `[lo, hi]` on the spectral axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Containment with an absolute tolerance pad on both ends.
    pub fn contains(&self, x: f64, pad: f64) -> bool {
        x >= self.lo - pad && x <= self.hi + pad
    }

    /// Whether `self` lies inside `other`, padded by `pad`.
    pub fn within(&self, other: &Interval, pad: f64) -> bool {
        self.lo >= other.lo - pad && self.hi <= other.hi + pad
    }
}

// --- expanding polynomials ---

/// Tolerance for `T'(c) = 0` at an accepted critical point.
const CRITICAL_RESIDUAL_TOL: f64 = 1e-10;
/// Minimum allowed `|T''(c)|`: critical points must be simple.
const SECOND_DERIVATIVE_MIN: f64 = 1e-8;
/// Preimage band endpoints solve `T(z) = v` to this tolerance.
const ENDPOINT_TOL: f64 = 1e-12;

/// A validated monic expanding polynomial together with its critical data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandingPolynomial {
    /// Monic coefficients, low-to-high; `coeffs[degree] == 1`.
    coeffs: Vec<f64>,
    /// Derivative coefficients, cached.
    deriv: Vec<f64>,
    /// Reference half-width of the expansion interval.
    xi: f64,
    /// Critical points, strictly ascending.
    critical_points: Vec<f64>,
    /// `T(c_i)` aligned with `critical_points`.
    critical_values: Vec<f64>,
    /// `T''(c_i)` aligned with `critical_points`.
    second_derivatives: Vec<f64>,
    /// `min_i |T(c_i)| / xi`.
    margin: f64,
}

impl ExpandingPolynomial {
    /// Validate monic coefficients (low-to-high) as expanding over `[-xi, xi]`.
    pub fn from_coeffs(coeffs: &[f64], xi: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Validation(format!(
                "reference half-width must be positive and finite, got {xi}"
            )));
        }
        if coeffs.len() < 3 {
            return Err(Error::Validation(format!(
                "degree must be at least 2, got {}",
                coeffs.len().saturating_sub(1)
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite coefficient".into()));
        }
        let lead = *coeffs.last().expect("non-empty");
        if (lead - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "polynomial must be monic, leading coefficient {lead}"
            )));
        }

        let deriv = poly_derivative(coeffs);
        let critical_points = real_simple_roots(&deriv).map_err(|failure| match failure {
            RootFailure::NonReal { real, imaginary } => Error::Validation(format!(
                "critical points are not all real: root {real} + {imaginary}i"
            )),
            RootFailure::Unconverged { near } => {
                Error::RootFinding(format!("critical-point polish did not converge near {near}"))
            }
        })?;
        let degree = coeffs.len() - 1;
        if critical_points.len() != degree - 1 {
            return Err(Error::Validation(format!(
                "expected {} real critical points, found {}",
                degree - 1,
                critical_points.len()
            )));
        }

        let second = poly_derivative(&deriv);
        let mut critical_values = Vec::with_capacity(critical_points.len());
        let mut second_derivatives = Vec::with_capacity(critical_points.len());
        for &c in &critical_points {
            let residual = poly_eval(&deriv, c);
            // 1e-10 at unit coefficient scale; the sum bounds evaluation roundoff
            // for large-coefficient composites.
            let eval_scale = deriv
                .iter()
                .enumerate()
                .fold(0.0f64, |s, (k, a)| s + a.abs() * c.abs().powi(k as i32))
                .max(1.0);
            if residual.abs() > CRITICAL_RESIDUAL_TOL * eval_scale {
                return Err(Error::RootFinding(format!(
                    "critical point {c} has derivative residual {residual:.3e}"
                )));
            }
            let dd = poly_eval(&second, c);
            if dd.abs() <= SECOND_DERIVATIVE_MIN {
                return Err(Error::DegenerateCritical {
                    point: c,
                    second_derivative: dd,
                });
            }
            critical_values.push(poly_eval(coeffs, c));
            second_derivatives.push(dd);
        }

        let min_abs_value = critical_values
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let margin = min_abs_value / xi;
        if margin <= 1.0 {
            return Err(Error::Validation(format!(
                "critical value of magnitude {min_abs_value} lies inside [-{xi}, {xi}]: \
                 not expanding (margin {margin:.6})"
            )));
        }
        for w in critical_values.windows(2) {
            if w[0] * w[1] >= 0.0 {
                return Err(Error::Validation(
                    "consecutive critical values do not alternate in sign: \
                     some branch misses [-xi, xi]"
                        .into(),
                ));
            }
        }

        let poly = Self {
            coeffs: coeffs.to_vec(),
            deriv,
            xi,
            critical_points,
            critical_values,
            second_derivatives,
            margin,
        };

        let pad = 1e-9 * (1.0 + xi);
        let reference = Interval::new(-xi, xi);
        for band in poly.preimage_intervals(-xi, xi)? {
            if !band.within(&reference, pad) {
                return Err(Error::Validation(format!(
                    "preimage band [{}, {}] escapes [-{xi}, {xi}]",
                    band.lo, band.hi
                )));
            }
        }
        Ok(poly)
    }

    /// The scaled Chebyshev family `(a^d / 2^{d-1}) C_d(z / a)`: monic, with
    /// all critical values of magnitude `a^d / 2^{d-1}`.
    pub fn chebyshev_family(degree: usize, a: f64, xi: f64) -> Result<Self> {
        if degree < 2 {
            return Err(Error::Validation(format!(
                "degree must be at least 2, got {degree}"
            )));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Validation(format!(
                "family scale must be positive and finite, got {a}"
            )));
        }
        // Chebyshev coefficients by the three-term recurrence; integers, exact in f64
        // for the degrees used here.
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 1.0];
        if degree == 0 {
            cur = prev.clone();
        }
        for _ in 1..degree {
            let mut next = vec![0.0; cur.len() + 1];
            for (k, &c) in cur.iter().enumerate() {
                next[k + 1] += 2.0 * c;
            }
            for (k, &c) in prev.iter().enumerate() {
                next[k] -= c;
            }
            prev = cur;
            cur = next;
        }
        // T(z) = s * C_d(z / a) with s = a^d / 2^{d-1}: coeff_j = s * c_j / a^j.
        let scale = a.powi(degree as i32) / 2f64.powi(degree as i32 - 1);
        let coeffs: Vec<f64> = cur
            .iter()
            .enumerate()
            .map(|(j, &c)| scale * c / a.powi(j as i32))
            .collect();
        Self::from_coeffs(&coeffs, xi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Monic coefficients, low-to-high.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// The coefficient of `z^{d-1}`, the trace-per-block shift of the family.
    /// Coefficients of the derivative, ascending powers.
    pub(crate) fn derivative_coefficients(&self) -> &[f64] {
        &self.deriv
    }

    pub fn subleading_coefficient(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 2]
    }

    pub fn critical_points(&self) -> &[f64] {
        &self.critical_points
    }

    pub fn critical_values(&self) -> &[f64] {
        &self.critical_values
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.second_derivatives
    }

    /// `min_i |T(c_i)| / xi`; quantitative contraction needs >= 10.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn eval(&self, z: f64) -> f64 {
        poly_eval(&self.coeffs, z)
    }

    pub fn eval_derivative(&self, z: f64) -> f64 {
        poly_eval(&self.deriv, z)
    }

    /// `self(inner(z))`: the composite is re-validated from scratch.
    pub fn compose(&self, inner: &ExpandingPolynomial) -> Result<Self> {
        if (self.xi - inner.xi).abs() > 0.0 {
            return Err(Error::Validation(format!(
                "composition requires matching reference intervals, got {} and {}",
                self.xi, inner.xi
            )));
        }
        let coeffs = poly_compose(&self.coeffs, &inner.coeffs);
        Self::from_coeffs(&coeffs, self.xi)
    }

    /// The `d` closed bands of `T^{-1}([lo, hi])`, ascending and disjoint.
    ///
    /// Requires `[lo, hi]` inside `[-xi, xi]`; each endpoint solves
    /// `T(z) = lo` or `T(z) = hi` to absolute tolerance 1e-12.
    pub fn preimage_intervals(&self, lo: f64, hi: f64) -> Result<Vec<Interval>> {
        let pad = 1e-9 * (1.0 + self.xi);
        if !(lo <= hi) {
            return Err(Error::Validation(format!(
                "empty target interval [{lo}, {hi}]"
            )));
        }
        if lo < -self.xi - pad || hi > self.xi + pad {
            return Err(Error::Validation(format!(
                "target interval [{lo}, {hi}] not inside [-{0}, {0}]",
                self.xi
            )));
        }

        let target_mag = lo.abs().max(hi.abs());
        let left = self.outer_bracket(Side::Left, target_mag)?;
        let right = self.outer_bracket(Side::Right, target_mag)?;
        let mut boundaries = Vec::with_capacity(self.degree() + 1);
        boundaries.push(left);
        boundaries.extend_from_slice(&self.critical_points);
        boundaries.push(right);

        let mut bands = Vec::with_capacity(self.degree());
        for w in boundaries.windows(2) {
            let (a, b) = (w[0], w[1]);
            let increasing = self.eval(a) < self.eval(b);
            let (v_first, v_second) = if increasing { (lo, hi) } else { (hi, lo) };
            let z_lo = self.solve_on_branch(a, b, v_first)?;
            let z_hi = self.solve_on_branch(a, b, v_second)?;
            if z_lo > z_hi {
                return Err(Error::RootFinding(format!(
                    "preimage endpoints out of order on branch [{a}, {b}]"
                )));
            }
            bands.push(Interval::new(z_lo, z_hi));
        }
        for w in bands.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(Error::RootFinding(
                    "preimage bands overlap: branch solves inconsistent".into(),
                ));
            }
        }
        Ok(bands)
    }

    /// A point beyond the outermost critical point where `|T|` already exceeds
    /// the target magnitude, bracketing the outer monotone branch.
    fn outer_bracket(&self, side: Side, target_mag: f64) -> Result<f64> {
        let anchor = match side {
            Side::Left => self.critical_points[0].min(-self.xi),
            Side::Right => (*self.critical_points.last().expect("non-empty")).max(self.xi),
        };
        let mut step = 1.0 + self.xi;
        for _ in 0..200 {
            let x = match side {
                Side::Left => anchor - step,
                Side::Right => anchor + step,
            };
            if self.eval(x).abs() > target_mag * (1.0 + 1e-9) + 1e-9 {
                return Ok(x);
            }
            step *= 2.0;
        }
        Err(Error::RootFinding(
            "could not bracket the outer monotone branch".into(),
        ))
    }

    /// Solve `T(z) = v` on the monotone branch `[a, b]` by safeguarded
    /// Newton-bisection.
    fn solve_on_branch(&self, a: f64, b: f64, v: f64) -> Result<f64> {
        let fa = self.eval(a) - v;
        let fb = self.eval(b) - v;
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        if fa.signum() == fb.signum() {
            return Err(Error::RootFinding(format!(
                "no sign change for T(z) = {v} on branch [{a}, {b}]"
            )));
        }
        let (mut lo, mut hi) = (a, b);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.eval(x) - v;
            if f == 0.0 {
                return Ok(x);
            }
            if f.signum() == fa.signum() {
                lo = x;
            } else {
                hi = x;
            }
            let df = self.eval_derivative(x);
            let newton = x - f / df;
            let next = if df != 0.0 && newton > lo.min(hi) && newton < lo.max(hi) {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 0.5 * ENDPOINT_TOL * (1.0 + x.abs()) {
                return Ok(next);
            }
            x = next;
        }
        // Bisection alone halves the bracket 200 times; tolerance is long met.
        Ok(x)
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// Why [`real_simple_roots`] could not produce a full real root list.
pub(crate) enum RootFailure {
    /// Some root has a non-negligible imaginary part.
    NonReal { real: f64, imaginary: f64 },
    /// Newton polish failed to converge near the given estimate.
    Unconverged { near: f64 },
}

/// All real roots of the coefficient polynomial, sorted ascending and polished
/// by Newton iteration. Fails if any root has a non-negligible imaginary part.
pub(crate) fn real_simple_roots(coeffs: &[f64]) -> std::result::Result<Vec<f64>, RootFailure> {
    // Trim (exactly) zero leading coefficients defensively.
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let m = c.len() - 1;
    if m == 0 {
        return Ok(Vec::new());
    }
    if m == 1 {
        return Ok(vec![-c[0] / c[1]]);
    }
    let lead = c[m];
    let mut companion = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        companion[(i, m - 1)] = -c[i] / lead;
        if i + 1 < m {
            companion[(i + 1, i)] = 1.0;
        }
    }
    let eigen = companion.complex_eigenvalues();
    let scale: f64 = c.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let deriv = poly_derivative(&c);
    let mut roots = Vec::with_capacity(m);
    for lambda in eigen.iter() {
        if lambda.im.abs() > 1e-6 * (1.0 + lambda.re.abs()) {
            return Err(RootFailure::NonReal {
                real: lambda.re,
                imaginary: lambda.im,
            });
        }
        let mut x = lambda.re;
        // Newton polish; simple roots converge quadratically from the
        // companion-matrix estimate.
        for _ in 0..50 {
            let f = poly_eval(&c, x);
            let df = poly_eval(&deriv, x);
            if df == 0.0 {
                break;
            }
            let step = f / df;
            x -= step;
            if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        if !x.is_finite() || poly_eval(&c, x).abs() > 1e-8 * (1.0 + scale) {
            return Err(RootFailure::Unconverged { near: lambda.re });
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    Ok(roots)
}
