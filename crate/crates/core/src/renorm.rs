//! One renormalization step: from a coefficient window with spectrum inside
//! the reference interval, construct the window whose resolvent, compressed
//! onto every d-th site, reproduces the input resolvent evaluated through the
//! expanding polynomial. The construction is block-wise and explicit; the
//! defining operator identity and its polynomial corollaries are implemented
//! as standalone verifiers.

use rayon::prelude::*;

use crate::inverse_spectral::{block_and_measure, BlockCharPoly};
use crate::jacobi::{central_subrange, JacobiWindow};
use crate::linalg::TridiagonalLu;
use crate::poly::ExpandingPolynomial;
use crate::{Error, Result};

/// Default truncation depth of the left continued fraction.
const DEFAULT_CF_DEPTH: usize = 32;
/// Default tolerance for the head-entry (first-moment) assertion on
/// reconstructed blocks, relative to the block's largest eigenvalue.
const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Relative stand-off required between a continued-fraction evaluation point
/// and the norm reach of the window section it recurses through.
const CF_STANDOFF: f64 = 1e-3;
/// Dilation applied to the preimage bands when checking that block
/// eigenvalues land inside them.
const BAND_PAD: f64 = 1e-8;

/// Options for a renormalization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormOptions {
    cf_depth: usize,
    epsilon: usize,
    tolerance: f64,
}

impl RenormOptions {
    /// Options with offset digit `epsilon`, default continued-fraction depth
    /// (32) and default head-entry tolerance (1e-10). `epsilon` is validated
    /// against the polynomial degree when the step runs.
    pub fn new(epsilon: usize) -> Self {
        Self {
            cf_depth: DEFAULT_CF_DEPTH,
            epsilon,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    /// Override the continued-fraction truncation depth (at least 8).
    pub fn with_cf_depth(mut self, cf_depth: usize) -> Result<Self> {
        if cf_depth < 8 {
            return Err(Error::Validation(format!(
                "continued-fraction depth must be at least 8, got {cf_depth}"
            )));
        }
        self.cf_depth = cf_depth;
        Ok(self)
    }

    /// Override the head-entry assertion tolerance (positive, finite).
    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::Validation(format!(
                "tolerance must be positive and finite, got {tolerance}"
            )));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn cf_depth(&self) -> usize {
        self.cf_depth
    }

    pub fn epsilon(&self) -> usize {
        self.epsilon
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Floor division for signed block arithmetic (divisor always positive here).
fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Ceiling division for signed block arithmetic (divisor always positive).
fn div_ceil(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// Truncated left continued fraction: the uninverted value
/// `w - q_s - p_s^2 / (w - q_{s-1} - ...)`, recursing `depth` levels with the
/// tail initialized to `w - q_{s-depth}`.
fn cf_block_value(jt: &JacobiWindow, s: i64, w: f64, depth: usize) -> Result<f64> {
    let n = depth as i64;
    if !jt.covers(s - n, s) {
        return Err(Error::WindowTooShort {
            need_lo: s - n,
            need_hi: s,
            have_lo: jt.start(),
            have_hi: jt.end(),
        });
    }
    // Stability guard: `w` must stand off from the norm reach of the section
    // the recursion runs through, so every partial denominator stays bounded
    // away from zero.
    let mut q_max = 0.0f64;
    let mut p_max = 0.0f64;
    for k in (s - n)..=s {
        q_max = q_max.max(jt.q_at(k).abs());
        if k > s - n {
            p_max = p_max.max(jt.p_at(k));
        }
    }
    let reach = q_max + 2.0 * p_max;
    if w.abs() < reach * (1.0 + CF_STANDOFF) {
        return Err(Error::NearSpectrum {
            distance: w.abs() - reach,
        });
    }
    let mut t = w - jt.q_at(s - n);
    for k in (s - n + 1)..=s {
        let p = jt.p_at(k);
        t = w - jt.q_at(k) - p * p / t;
    }
    Ok(t)
}

/// Diagonal resolvent entry of the half-line window ending at block `s`,
/// evaluated at `w` via a truncated continued fraction of the given depth.
/// Requires the window to cover indices `s-depth..s` and `|w|` to exceed the
/// norm reach of that section; the truncation error decays geometrically in
/// the depth with ratio `(max p / (|w| - reach))^2`.
pub fn left_resolvent_cf(jt: &JacobiWindow, s: i64, w: f64, depth: usize) -> Result<f64> {
    cf_block_value(jt, s, w, depth).map(|t| 1.0 / t)
}

/// One reconstructed block: `d` diagonal entries, `d-1` internal couplings,
/// and the coupling that closes the block into its right neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormedBlock {
    /// Diagonal entries, block-local order.
    pub q: Vec<f64>,
    /// Couplings internal to the block.
    pub p_inner: Vec<f64>,
    /// Coupling from the block's last site into the next block.
    pub p_close: f64,
}

/// Reconstruct block `s`: evaluate the shifted polynomial at the critical
/// points through the left continued fraction, assemble its characteristic
/// polynomial, invert the spectral data to coefficients, and close the block
/// so that the product of its couplings equals the input coupling `p_{s+1}`.
pub fn renorm_block(
    jt: &JacobiWindow,
    s: i64,
    t: &ExpandingPolynomial,
    cf_depth: usize,
) -> Result<RenormedBlock> {
    renorm_block_with(jt, s, t, cf_depth, DEFAULT_TOLERANCE)
}

fn renorm_block_with(
    jt: &JacobiWindow,
    s: i64,
    t: &ExpandingPolynomial,
    cf_depth: usize,
    tolerance: f64,
) -> Result<RenormedBlock> {
    let n = cf_depth as i64;
    if !jt.covers(s - n, s + 1) {
        return Err(Error::WindowTooShort {
            need_lo: s - n,
            need_hi: s + 1,
            have_lo: jt.start(),
            have_hi: jt.end(),
        });
    }
    let d = t.degree();
    let values = t
        .critical_points()
        .iter()
        .map(|&c| cf_block_value(jt, s, t.eval(c), cf_depth))
        .collect::<Result<Vec<f64>>>()?;
    // The head diagonal entry of the block is pinned by the large-z expansion
    // of the compressed resolvent: it equals minus the subleading coefficient
    // of the polynomial divided by its degree, independent of the input
    // window.
    let anchor = -t.subleading_coefficient() / d as f64;
    let bp = BlockCharPoly::new(t, anchor, values)?;
    let (block, mu) = block_and_measure(&bp, tolerance)?;

    // Block eigenvalues must land in the preimage of the reference interval.
    let bands = t.preimage_intervals(-t.xi(), t.xi())?;
    for &x in mu.nodes() {
        if !bands.iter().any(|band| band.contains(x, BAND_PAD)) {
            return Err(Error::Validation(format!(
                "block eigenvalue {x} escapes the polynomial preimage of the reference interval"
            )));
        }
    }

    let p_inner = block.p_slice().to_vec();
    let product: f64 = p_inner.iter().product();
    // The product of internal couplings is bounded below by the expansion
    // margin; equivalently the block's resolvent cannot be too small at the
    // critical points.
    if product * (1.0 + 1e-9) < t.margin() - 1.0 {
        return Err(Error::Validation(format!(
            "internal coupling product {product} falls below the margin bound {}",
            t.margin() - 1.0
        )));
    }
    let p_close = jt.p_at(s + 1) / product;
    Ok(RenormedBlock {
        q: block.q_slice().to_vec(),
        p_inner,
        p_close,
    })
}

/// Apply one full renormalization step: reconstruct every block whose
/// continued-fraction dependencies lie inside the input window and stitch
/// them into a window over indices `[epsilon + d*s_min, epsilon + d*s_max +
/// d - 1]`. The offset digit enters purely as an index shift of the centered
/// solution.
pub fn renorm_step(
    jt: &JacobiWindow,
    t: &ExpandingPolynomial,
    opts: &RenormOptions,
) -> Result<JacobiWindow> {
    let d = t.degree();
    if opts.epsilon >= d {
        return Err(Error::Validation(format!(
            "offset digit {} must be below the polynomial degree {d}",
            opts.epsilon
        )));
    }
    let n = opts.cf_depth as i64;
    let s_min = jt.start() + n;
    let s_max = jt.end() - 1;
    if s_min > s_max {
        return Err(Error::WindowTooShort {
            need_lo: jt.start(),
            need_hi: jt.start() + n + 1,
            have_lo: jt.start(),
            have_hi: jt.end(),
        });
    }
    let blocks = (s_min..s_max + 1)
        .into_par_iter()
        .map(|s| renorm_block_with(jt, s, t, opts.cf_depth, opts.tolerance))
        .collect::<Result<Vec<RenormedBlock>>>()?;

    let count = blocks.len();
    let mut q = Vec::with_capacity(count * d);
    let mut p = Vec::with_capacity(count * d - 1);
    for (i, block) in blocks.iter().enumerate() {
        q.extend_from_slice(&block.q);
        p.extend_from_slice(&block.p_inner);
        if i + 1 < count {
            p.push(block.p_close);
        }
    }
    let base = opts.epsilon as i64 + d as i64 * s_min;
    JacobiWindow::new(base, q, p)
}

/// Max entrywise residual of the defining resolvent identity on central
/// blocks: the big-window resolvent compressed onto every d-th site must
/// equal the input-window resolvent at the polynomial image point, scaled by
/// the polynomial derivative over the degree. Sections of `block_len` blocks
/// are cut from both windows; the central half is compared.
pub fn verify_renorm_identity(
    j: &JacobiWindow,
    jt: &JacobiWindow,
    t: &ExpandingPolynomial,
    epsilon: usize,
    z_samples: &[f64],
    block_len: usize,
) -> Result<f64> {
    if z_samples.is_empty() {
        return Err(Error::Validation(
            "at least one sample point is required".to_string(),
        ));
    }
    if block_len < 4 {
        return Err(Error::Validation(format!(
            "comparison needs at least 4 blocks, got {block_len}"
        )));
    }
    let xi = t.xi();
    for &z in z_samples {
        let distance = (z.abs() - xi).max(0.0);
        if distance < xi {
            return Err(Error::NearSpectrum { distance });
        }
    }
    let d = t.degree();
    let di = d as i64;
    let eps = epsilon as i64;
    let l = block_len as i64;
    let (s0, _) = align_block_range(j, jt, eps, di, l, 0)?;
    let jsec = j.section(eps + di * s0, eps + di * (s0 + l - 1) + di - 1)?;
    let tsec = jt.section(s0, s0 + l - 1)?;
    let (cl, ch) = central_subrange(0, l - 1, 0.5);
    let mut worst = 0.0f64;
    for &z in z_samples {
        let lu_big = TridiagonalLu::factor_shifted(z, jsec.q_slice(), jsec.p_slice());
        let lu_small = TridiagonalLu::factor_shifted(t.eval(z), tsec.q_slice(), tsec.p_slice());
        let scale = t.eval_derivative(z) / d as f64;
        for jb in cl..=ch {
            let col_big = lu_big.solve_unit((di * jb) as usize);
            let col_small = lu_small.solve_unit(jb as usize);
            for ib in cl..=ch {
                let lhs = col_big[(di * ib) as usize];
                let rhs = scale * col_small[ib as usize];
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Pick the centered run of `l` blocks that both windows can serve, with the
/// big window padded by `pad` sites on each side. Returns the first block
/// index and the number of available blocks.
fn align_block_range(
    j: &JacobiWindow,
    jt: &JacobiWindow,
    eps: i64,
    di: i64,
    l: i64,
    pad: i64,
) -> Result<(i64, i64)> {
    let a = div_ceil(j.start() + pad - eps, di);
    let b = div_floor(j.end() - pad - eps - (di - 1), di);
    let lo = a.max(jt.start());
    let hi = b.min(jt.end());
    if hi - lo + 1 < l {
        return Err(Error::WindowTooShort {
            need_lo: lo,
            need_hi: lo + l - 1,
            have_lo: lo,
            have_hi: hi,
        });
    }
    Ok((lo + (hi - lo + 1 - l) / 2, hi - lo + 1))
}

/// Dense symmetric tridiagonal section.
fn dense_symmetric(q: &[f64], p: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = q.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, &qi) in q.iter().enumerate() {
        m[(i, i)] = qi;
    }
    for (i, &pi) in p.iter().enumerate() {
        m[(i, i + 1)] = pi;
        m[(i + 1, i)] = pi;
    }
    m
}

/// Matrix Horner evaluation of a polynomial with ascending coefficients.
fn horner_matrix(m: &nalgebra::DMatrix<f64>, coeffs: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = m.nrows();
    let mut x = nalgebra::DMatrix::<f64>::identity(n, n) * *coeffs.last().expect("nonempty");
    for &c in coeffs.iter().rev().skip(1) {
        x *= m;
        for i in 0..n {
            x[(i, i)] += c;
        }
    }
    x
}

/// Residuals of the two polynomial corollaries of the resolvent identity on
/// central blocks: first, applying the polynomial to the big window and
/// compressing rows onto every d-th site must reproduce the input window's
/// rows; second, the divided difference of the polynomial at the big window,
/// compressed on both sides, must equal the scalar `T'(z)/d` on the diagonal.
/// The big-window section is padded by `d * degree` ghost sites so central
/// entries of the polynomial image are exact.
pub fn verify_polynomial_forms(
    j: &JacobiWindow,
    jt: &JacobiWindow,
    t: &ExpandingPolynomial,
    epsilon: usize,
    block_len: usize,
) -> Result<(f64, f64)> {
    if block_len < 4 {
        return Err(Error::Validation(format!(
            "comparison needs at least 4 blocks, got {block_len}"
        )));
    }
    let d = t.degree();
    let di = d as i64;
    let eps = epsilon as i64;
    let l = block_len as i64;
    let pad = (d * d) as i64;
    let (s0, _) = align_block_range(j, jt, eps, di, l, pad)?;
    let sec_lo = eps + di * s0 - pad;
    let sec_hi = eps + di * (s0 + l - 1) + (di - 1) + pad;
    let jsec = j.section(sec_lo, sec_hi)?;
    let dense = dense_symmetric(jsec.q_slice(), jsec.p_slice());
    let coeffs = t.coefficients();
    let tj = horner_matrix(&dense, coeffs);
    let (cl, ch) = central_subrange(0, l - 1, 0.5);
    let col_lo = (pad + di * cl) as usize;
    let col_hi = (pad + di * ch + di - 1) as usize;

    let mut residual1 = 0.0f64;
    for ib in cl..=ch {
        let row = (pad + di * ib) as usize;
        let sb = s0 + ib;
        for col in col_lo..=col_hi {
            let site = sec_lo + col as i64;
            let rel = site - eps;
            let expected = if rel.rem_euclid(di) == 0 {
                let k = rel.div_euclid(di);
                if k == sb {
                    jt.q_at(sb)
                } else if k == sb + 1 {
                    jt.p_at(sb + 1)
                } else if k == sb - 1 {
                    jt.p_at(sb)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            residual1 = residual1.max((tj[(row, col)] - expected).abs());
        }
    }

    let z_samples: Vec<f64> = [-2.2, -0.9, 0.1, 1.3, 2.6]
        .iter()
        .map(|m| m * t.xi())
        .collect();
    let mut residual2 = 0.0f64;
    for &z in &z_samples {
        // Ascending coefficients of the divided difference
        // (T(z) - T(x)) / (z - x) in x, by the backward Horner recurrence.
        let mut b = vec![0.0f64; d];
        b[d - 1] = coeffs[d];
        for k in (1..d).rev() {
            b[k - 1] = coeffs[k] + z * b[k];
        }
        let dz = horner_matrix(&dense, &b);
        let scale = t.eval_derivative(z) / d as f64;
        for ib in cl..=ch {
            let row = (pad + di * ib) as usize;
            for jb in cl..=ch {
                let col = (pad + di * jb) as usize;
                let expected = if ib == jb { scale } else { 0.0 };
                residual2 = residual2.max((dz[(row, col)] - expected).abs());
            }
        }
    }
    Ok((residual1, residual2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// z^2 - 132 over reference interval [-12, 12]; margin 11.
    fn degree_two_family() -> ExpandingPolynomial {
        ExpandingPolynomial::chebyshev_family(2, 264.0f64.sqrt(), 12.0).unwrap()
    }

    /// z^3 - 75 z over [-12, 12]; margin 250/12.
    fn degree_three_family() -> ExpandingPolynomial {
        ExpandingPolynomial::chebyshev_family(3, 10.0, 12.0).unwrap()
    }

    /// Constant chain q=0, p=6 over [lo, hi].
    fn constant_chain(lo: i64, hi: i64) -> JacobiWindow {
        JacobiWindow::constant(lo, (hi - lo + 1) as usize, 0.0, 6.0).unwrap()
    }

    /// Fixed-point block value for the constant chain under z^2 - 132:
    /// the large-magnitude root of t^2 + 132 t + 36 = 0.
    fn golden_value() -> f64 {
        (-132.0 - 17280.0f64.sqrt()) / 2.0
    }

    /// Random bounded chain with q in (-1, 1) and p in (2, 6).
    fn random_chain(lo: i64, hi: i64, seed: u64) -> JacobiWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = (hi - lo + 1) as usize;
        let q: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..len - 1).map(|_| rng.random_range(2.0..6.0)).collect();
        JacobiWindow::new(lo, q, p).unwrap()
    }

    #[test]
    fn cf_matches_quadratic_fixed_point() {
        let jt = JacobiWindow::constant(-40, 46, 0.0, 1.0).unwrap();
        let got = left_resolvent_cf(&jt, 0, -100.0, 30).unwrap();
        // Fixed point of t = w - p^2/t with w = -100, p = 1: the
        // large-magnitude root of t^2 + 100 t + 1 = 0.
        let t = (-100.0 - 9996.0f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(got, 1.0 / t, epsilon = 1e-14);
        assert_abs_diff_eq!(got, -0.01000100, epsilon = 1e-8);
    }

    #[test]
    fn cf_decoupled_chain_terminates_exactly() {
        // Near-zero couplings decouple the chain: the value is exactly
        // 1 / (w - q_s) for any depth.
        let mut q = vec![0.0; 46];
        q[40] = 1.0;
        let p = vec![1e-30; 45];
        let jt = JacobiWindow::new(-40, q, p).unwrap();
        let got = left_resolvent_cf(&jt, 0, 7.25, 12).unwrap();
        assert_eq!(got, 1.0 / 6.25);
    }

    #[test]
    fn cf_second_fixed_point_example() {
        let jt = constant_chain(-50, 2);
        let got = left_resolvent_cf(&jt, 0, -132.0, 40).unwrap();
        let t = golden_value();
        assert_abs_diff_eq!(got, 1.0 / t, epsilon = 1e-14);
        assert_abs_diff_eq!(got, -0.0075915, epsilon = 1e-7);
    }

    #[test]
    fn cf_requires_window_coverage() {
        let jt = constant_chain(-10, 2);
        let err = left_resolvent_cf(&jt, 0, -132.0, 32).unwrap_err();
        assert!(matches!(err, Error::WindowTooShort { .. }));
    }

    #[test]
    fn cf_rejects_point_inside_norm_reach() {
        let jt = constant_chain(-40, 2);
        // Norm reach is 12; 11 is inside it.
        let err = left_resolvent_cf(&jt, 0, 11.0, 32).unwrap_err();
        assert!(matches!(err, Error::NearSpectrum { .. }));
    }

    #[test]
    fn golden_block_closed_forms() {
        let t = degree_two_family();
        let jt = constant_chain(-40, 2);
        let block = renorm_block(&jt, 0, &t, 32).unwrap();
        let p_odd = (-golden_value()).sqrt();
        assert_abs_diff_eq!(block.q[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(block.q[1], 0.0, epsilon = 1e-10);
        assert_eq!(block.p_inner.len(), 1);
        assert_abs_diff_eq!(block.p_inner[0], p_odd, epsilon = 1e-9);
        assert_abs_diff_eq!(block.p_close, 6.0 / p_odd, epsilon = 1e-9);
        // Loose decimal cross-checks.
        assert_abs_diff_eq!(block.p_inner[0], 11.4772256, epsilon = 1e-4);
        assert_abs_diff_eq!(block.p_close, 0.5227752, epsilon = 1e-4);
        // The coupling product through the block reproduces the input
        // coupling exactly by construction.
        assert_abs_diff_eq!(block.p_inner[0] * block.p_close, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn golden_cubic_block_closed_forms() {
        let t = degree_three_family();
        let jt = constant_chain(-40, 2);
        let block = renorm_block(&jt, 0, &t, 32).unwrap();
        // Fixed point of t = w - p^2/t at w = 250 (critical value at -5):
        // root of t^2 - 250 t + 36 = 0 near 250.
        let tstar = (250.0 + 62356.0f64.sqrt()) / 2.0;
        let p1 = (0.2 * tstar).sqrt();
        assert_abs_diff_eq!(block.q[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(block.q[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(block.q[2], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(block.p_inner[0], p1, epsilon = 1e-9);
        assert_abs_diff_eq!(block.p_inner[1], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(block.p_close, 6.0 / (5.0 * p1), epsilon = 1e-12);
    }

    #[test]
    fn decoupled_block_head_entry_and_resolvent() {
        // Near-decoupled input with one nonzero diagonal entry at the block
        // head. The reconstructed head entry equals minus the subleading
        // coefficient over the degree (zero here), NOT the input diagonal;
        // that choice is forced by the large-z expansion of the identity,
        // and the block resolvent then matches the identity's right side.
        let t = degree_two_family();
        let mut q = vec![0.0; 43];
        q[40] = 1.0;
        let p = vec![1e-30; 42];
        let jt = JacobiWindow::new(-40, q, p).unwrap();
        let block = renorm_block(&jt, 0, &t, 32).unwrap();
        assert_abs_diff_eq!(block.q[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(block.q[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(block.p_inner[0], 133.0f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(
            block.p_close,
            1e-30 / 133.0f64.sqrt(),
            epsilon = 1e-40
        );
        // Both sides of the identity at z = 30: block resolvent head entry
        // vs (T'(z)/d) / (T(z) - 1).
        let window = JacobiWindow::new(0, block.q.clone(), block.p_inner.clone()).unwrap();
        let g = window.resolvent_00(30.0).unwrap();
        let rhs = 30.0 / (30.0 * 30.0 - 132.0 - 1.0);
        assert_abs_diff_eq!(g, rhs, epsilon = 1e-12);
        assert_abs_diff_eq!(g, 30.0 / 767.0, epsilon = 1e-12);
    }

    #[test]
    fn random_blocks_satisfy_product_rule_and_head_entry() {
        let t = degree_two_family();
        for seed in 0..20u64 {
            let jt = random_chain(-40, 3, seed);
            let block = renorm_block(&jt, 0, &t, 32).unwrap();
            let product: f64 = block.p_inner.iter().product::<f64>() * block.p_close;
            let expected = jt.p_at(1);
            assert_abs_diff_eq!(product / expected, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(block.q[0], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn step_output_layout_and_periodicity() {
        let t = degree_two_family();
        let jt = constant_chain(-40, 9);
        let opts = RenormOptions::new(0);
        let j = renorm_step(&jt, &t, &opts).unwrap();
        // Blocks -8..=8 produce sites -16..=17.
        assert_eq!(j.start(), -16);
        assert_eq!(j.end(), 17);
        assert_eq!(j.len(), 34);
        let p_odd = (-golden_value()).sqrt();
        let p_even = 6.0 / p_odd;
        for k in j.start()..=j.end() {
            assert_abs_diff_eq!(j.q_at(k), 0.0, epsilon = 1e-9);
            if k > j.start() {
                let expected = if k.rem_euclid(2) == 1 { p_odd } else { p_even };
                assert_abs_diff_eq!(j.p_at(k), expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn offset_step_is_shift_of_centered_step() {
        let t = degree_two_family();
        let jt = random_chain(-44, 8, 11);
        let j0 = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap();
        let j1 = renorm_step(&jt, &t, &RenormOptions::new(1)).unwrap();
        assert_eq!(j1, j0.shift_conjugate(-1));
    }

    #[test]
    fn step_commutes_with_input_translation() {
        let t = degree_two_family();
        let jt = random_chain(-44, 8, 23);
        let opts = RenormOptions::new(0);
        let shifted_then_step = renorm_step(&jt.shift_conjugate(2), &t, &opts).unwrap();
        let step_then_shifted = renorm_step(&jt, &t, &opts).unwrap().shift_conjugate(4);
        assert_eq!(shifted_then_step.start(), step_then_shifted.start());
        let dist = shifted_then_step
            .coef_sup_dist(
                &step_then_shifted,
                shifted_then_step.start(),
                shifted_then_step.end(),
            )
            .unwrap();
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn step_is_deterministic() {
        let t = degree_two_family();
        let jt = random_chain(-44, 8, 41);
        let opts = RenormOptions::new(0);
        let first = renorm_step(&jt, &t, &opts).unwrap();
        let second = renorm_step(&jt, &t, &opts).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn step_requires_enough_blocks() {
        let t = degree_two_family();
        let jt = constant_chain(-10, 9);
        let err = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap_err();
        assert!(matches!(err, Error::WindowTooShort { .. }));
    }

    #[test]
    fn step_rejects_offset_at_degree() {
        let t = degree_two_family();
        let jt = constant_chain(-40, 9);
        let err = renorm_step(&jt, &t, &RenormOptions::new(2)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn options_validate_depth_and_tolerance() {
        assert!(RenormOptions::new(0).with_cf_depth(7).is_err());
        assert!(RenormOptions::new(0).with_cf_depth(8).is_ok());
        assert!(RenormOptions::new(0).with_tolerance(0.0).is_err());
        assert!(RenormOptions::new(0).with_tolerance(1e-8).is_ok());
    }

    #[test]
    fn identity_residual_small_on_step_output() {
        let t = degree_two_family();
        let jt = constant_chain(-90, 60);
        let zs = [36.0, -40.0, 30.0, -36.0, 45.0];
        for epsilon in 0..2usize {
            let j = renorm_step(&jt, &t, &RenormOptions::new(epsilon)).unwrap();
            let residual = verify_renorm_identity(&j, &jt, &t, epsilon, &zs, 48).unwrap();
            assert!(
                residual <= 1e-6,
                "offset {epsilon}: residual {residual} above 1e-6"
            );
        }
    }

    #[test]
    fn identity_detects_coupling_tamper() {
        let t = degree_two_family();
        let jt = constant_chain(-90, 60);
        let j = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap();
        let mut p = j.p_slice().to_vec();
        // Perturb the internal coupling of the central block and probe at the
        // closest admissible point, where the resolvent is most sensitive.
        let mid = (1 - j.start() - 1) as usize;
        p[mid] += 0.05;
        let tampered = JacobiWindow::new(j.start(), j.q_slice().to_vec(), p).unwrap();
        let residual =
            verify_renorm_identity(&tampered, &jt, &t, 0, &[24.0], 48).unwrap();
        assert!(residual >= 1e-4, "residual {residual} below 1e-4");
    }

    #[test]
    fn identity_rejects_points_near_reference_interval() {
        let t = degree_two_family();
        let jt = constant_chain(-90, 60);
        let j = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap();
        for z in [5.0, 20.0, -23.9] {
            let err = verify_renorm_identity(&j, &jt, &t, 0, &[z], 48).unwrap_err();
            assert!(matches!(err, Error::NearSpectrum { .. }));
        }
    }

    #[test]
    fn polynomial_forms_residuals_small_on_step_output() {
        let t = degree_two_family();
        let jt = constant_chain(-90, 60);
        let j = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap();
        let (r1, r2) = verify_polynomial_forms(&j, &jt, &t, 0, 32).unwrap();
        assert!(r1 <= 1e-6, "compression residual {r1} above 1e-6");
        assert!(r2 <= 1e-6, "divided-difference residual {r2} above 1e-6");
    }

    #[test]
    fn polynomial_forms_detect_diagonal_shift() {
        let t = degree_two_family();
        let jt = constant_chain(-90, 60);
        let j = renorm_step(&jt, &t, &RenormOptions::new(0)).unwrap();
        let shifted = JacobiWindow::constant(-90, 151, 0.1, 6.0).unwrap();
        let (r1, _) = verify_polynomial_forms(&j, &shifted, &t, 0, 32).unwrap();
        assert_abs_diff_eq!(r1, 0.1, epsilon = 1e-6);
    }
}
