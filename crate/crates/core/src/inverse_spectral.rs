//! Inverse spectral reconstruction of finite Jacobi blocks.
//!
//! A block of the renormalized operator is determined by its resolvent
//! function `<0|(z - J_block)^{-1}|0> = (T'(z)/d) / T_block(z)` where
//! `T_block` is a monic polynomial of the family degree. This module turns
//! that rational function into a discrete measure (poles and residues), the
//! measure into Jacobi coefficients (Stieltjes/Lanczos), and hosts the
//! identity checks a valid block must satisfy: the Wronskian relation at
//! critical points and the weight-perturbation stability bound.

use crate::error::{Error, Result};
use crate::jacobi::JacobiWindow;
use crate::linalg;
use crate::poly::{
    poly_add_scaled, poly_derivative, poly_divide_linear, poly_eval, poly_mul, real_simple_roots,
    ExpandingPolynomial, RootFailure,
};

/// Minimum admissible gap between measure nodes.
const NODE_GAP_MIN: f64 = 1e-10;
/// Tolerance on the total mass of a probability measure before rescaling.
const WEIGHT_SUM_TOL: f64 = 1e-10;
/// Tolerance for the reconstructed `q` at the block head matching the anchor.
const ANCHOR_TOL: f64 = 1e-10;
/// A linear division of the family derivative must be this exact.
const DIVISION_REMAINDER_TOL: f64 = 1e-9;
/// Relative slack when enforcing the critical-value magnitude floor.
const VALUE_FLOOR_SLACK: f64 = 1e-9;

/// A finite positive measure with unit total mass, stored as nodes and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validate nodes (strictly increasing, gaps > 1e-10) and weights
    /// (positive, total mass within 1e-10 of 1). The weights are rescaled to
    /// sum to exactly 1 after the check.
    pub fn new(nodes: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Validation(format!(
                "measure needs matching non-empty nodes/weights, got {}/{}",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite measure node".into()));
        }
        for pair in nodes.windows(2) {
            let gap = pair[1] - pair[0];
            if !(gap > NODE_GAP_MIN) {
                return Err(Error::NodeCollision { gap });
            }
        }
        for (&x, &w) in nodes.iter().zip(&weights) {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::NegativeWeight { node: x, weight: w });
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Validation(format!(
                "measure mass {total} deviates from 1 by more than {WEIGHT_SUM_TOL}"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // validated measures always carry at least one node
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The data determining one block polynomial: the expanding family it lives
/// under, the head anchor (the forced value of the block's first diagonal
/// entry), and the block polynomial's values at the family's critical points.
#[derive(Debug, Clone)]
pub struct BlockCharPoly<'a> {
    family: &'a ExpandingPolynomial,
    anchor: f64,
    critical_values: Vec<f64>,
}

impl<'a> BlockCharPoly<'a> {
    /// Validate the critical values: one per critical point of the family,
    /// each at least `(margin - 1) * xi` in magnitude (the continued-fraction
    /// lower bound every legitimately produced block satisfies).
    pub fn new(
        family: &'a ExpandingPolynomial,
        anchor: f64,
        critical_values: Vec<f64>,
    ) -> Result<Self> {
        if !anchor.is_finite() {
            return Err(Error::Validation("non-finite block anchor".into()));
        }
        if critical_values.len() != family.critical_points().len() {
            return Err(Error::Validation(format!(
                "expected {} critical values, got {}",
                family.critical_points().len(),
                critical_values.len()
            )));
        }
        let floor = (family.margin() - 1.0) * family.xi() * (1.0 - VALUE_FLOOR_SLACK);
        for (&c, &v) in family.critical_points().iter().zip(&critical_values) {
            if !v.is_finite() || v.abs() < floor {
                return Err(Error::Validation(format!(
                    "block value {v} at critical point {c} is below the floor {floor}"
                )));
            }
        }
        Ok(Self {
            family,
            anchor,
            critical_values,
        })
    }

    pub fn family(&self) -> &ExpandingPolynomial {
        self.family
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn critical_values(&self) -> &[f64] {
        &self.critical_values
    }

    pub fn degree(&self) -> usize {
        self.family.degree()
    }
}

/// Monic coefficients of the block polynomial interpolating the stored data:
///
/// `T_block(z) = (z - anchor) T'(z)/d + sum_c [T'(z) / ((z - c) T''(c))] * T_block(c)`
///
/// where the sum runs over the critical points `c` of the family. Each
/// division `T'(z)/(z - c)` is exact because `T'(c) = 0`.
pub fn assemble_block_poly(bp: &BlockCharPoly) -> Result<Vec<f64>> {
    let family = bp.family();
    let d = family.degree() as f64;
    let deriv: Vec<f64> = family.derivative_coefficients().to_vec();

    // (z - anchor) * T'(z) / d
    let mut coeffs = poly_mul(&[-bp.anchor(), 1.0], &deriv);
    for c in &mut coeffs {
        *c /= d;
    }

    for (i, (&c, &v)) in family
        .critical_points()
        .iter()
        .zip(bp.critical_values())
        .enumerate()
    {
        let second = family.second_derivatives()[i];
        if second.abs() < 1e-8 {
            return Err(Error::DegenerateCritical {
                point: c,
                second_derivative: second,
            });
        }
        let (quotient, remainder) = poly_divide_linear(&deriv, c);
        let scale = deriv
            .iter()
            .enumerate()
            .fold(0.0f64, |s, (k, a)| s + a.abs() * c.abs().powi(k as i32))
            .max(1.0);
        if remainder.abs() > DIVISION_REMAINDER_TOL * scale {
            return Err(Error::Validation(format!(
                "derivative division by (z - {c}) leaves remainder {remainder}"
            )));
        }
        coeffs = poly_add_scaled(&coeffs, &quotient, v / second);
    }
    Ok(coeffs)
}

/// Recover the discrete measure whose Stieltjes transform is
/// `(T'(z)/d) / T_block(z)`: nodes are the roots of the block polynomial,
/// weights are the residues `(T'(x)/d) / T_block'(x)`.
pub fn measure_from_resolvent(bp: &BlockCharPoly) -> Result<DiscreteMeasure> {
    let family = bp.family();
    let coeffs = assemble_block_poly(bp)?;
    let deriv = poly_derivative(&coeffs);

    // Each preimage band of the reference interval contains exactly one root
    // for valid data; bracketed bisection there is fast and certain. Fall
    // back to companion-matrix roots when a band lacks a sign change.
    let bands = family.preimage_intervals(-family.xi(), family.xi())?;
    let mut nodes = Vec::with_capacity(family.degree());
    let mut bracketed = bands.len() == family.degree();
    if bracketed {
        'bands: for band in &bands {
            let (a, b) = (band.lo, band.hi);
            let (fa, fb) = (poly_eval(&coeffs, a), poly_eval(&coeffs, b));
            if fa == 0.0 {
                nodes.push(a);
            } else if fb == 0.0 {
                nodes.push(b);
            } else if fa.signum() != fb.signum() {
                nodes.push(bisect_root(&coeffs, &deriv, a, b));
            } else {
                bracketed = false;
                break 'bands;
            }
        }
    }
    if !bracketed {
        nodes = real_simple_roots(&coeffs).map_err(|failure| match failure {
            RootFailure::NonReal { imaginary, .. } => Error::NonRealRoots { imaginary },
            RootFailure::Unconverged { near } => {
                Error::RootFinding(format!("block root polish did not converge near {near}"))
            }
        })?;
    }

    let d = family.degree() as f64;
    let mut weights = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let w = (family.eval_derivative(x) / d) / poly_eval(&deriv, x);
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::NegativeWeight { node: x, weight: w });
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Validation(format!(
            "block residues sum to {total}, not 1: invalid resolvent data"
        )));
    }
    DiscreteMeasure::new(nodes, weights)
}

/// Safeguarded Newton-bisection for a root bracketed in `[a, b]`.
fn bisect_root(coeffs: &[f64], deriv: &[f64], a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = poly_eval(coeffs, lo);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = poly_eval(coeffs, x);
        if f == 0.0 {
            return x;
        }
        if f.signum() == f_lo.signum() {
            lo = x;
            f_lo = f;
        } else {
            hi = x;
        }
        let df = poly_eval(deriv, x);
        let mut next = if df != 0.0 { x - f / df } else { x };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 0.5e-14 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Jacobi coefficients of the measure via the Lanczos three-term recurrence
/// with full reorthogonalization; scale-invariant in the total mass.
/// Returns `(q_0..q_{n-1}, p_1..p_{n-1})`.
pub(crate) fn stieltjes_raw(nodes: &[f64], weights: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = nodes.len();
    for pair in nodes.windows(2) {
        let gap = pair[1] - pair[0];
        if !(gap > NODE_GAP_MIN) {
            return Err(Error::NodeCollision { gap });
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Validation(
            "spectral reconstruction needs positive weights".into(),
        ));
    }

    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };

    let v0: Vec<f64> = weights.iter().map(|w| (w / total).sqrt()).collect();
    let mut basis = vec![v0];
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n.saturating_sub(1));

    let q0 = nodes
        .iter()
        .zip(&basis[0])
        .map(|(x, v)| x * v * v)
        .sum::<f64>();
    q.push(q0);
    let mut u: Vec<f64> = nodes
        .iter()
        .zip(&basis[0])
        .map(|(x, v)| (x - q0) * v)
        .collect();

    let scale = nodes.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for _ in 1..n {
        // Full reorthogonalization, two passes, keeps the basis orthonormal
        // to machine precision at these tiny sizes.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&u, v);
                for (ui, vi) in u.iter_mut().zip(v) {
                    *ui -= c * vi;
                }
            }
        }
        let norm = dot(&u, &u).sqrt();
        if !(norm > 1e-13 * scale) {
            return Err(Error::Validation(format!(
                "spectral reconstruction broke down (residual norm {norm}): \
                 measure has numerically collided support points"
            )));
        }
        p.push(norm);
        let vk: Vec<f64> = u.iter().map(|x| x / norm).collect();
        let qk = nodes
            .iter()
            .zip(&vk)
            .map(|(x, v)| x * v * v)
            .sum::<f64>();
        q.push(qk);
        let prev = basis.last().expect("basis never empty");
        u = nodes
            .iter()
            .zip(&vk)
            .zip(prev)
            .map(|((x, v), w)| (x - qk) * v - norm * w)
            .collect();
        basis.push(vk);
    }
    Ok((q, p))
}

/// Reconstruct the length-`d` Jacobi block (indices `0..d`) whose spectral
/// measure at the head site is `mu`.
pub fn stieltjes(mu: &DiscreteMeasure, d: usize) -> Result<JacobiWindow> {
    if mu.len() != d {
        return Err(Error::Validation(format!(
            "measure has {} nodes but a block of length {d} was requested",
            mu.len()
        )));
    }
    let (q, p) = stieltjes_raw(mu.nodes(), mu.weights())?;
    JacobiWindow::new(0, q, p)
}

/// Full inverse-spectral path for a block: polynomial data to measure to
/// Jacobi coefficients, asserting that the reconstructed head diagonal entry
/// reproduces the anchor (a structural identity of the assembly formula).
pub fn block_from_resolvent(bp: &BlockCharPoly) -> Result<JacobiWindow> {
    block_and_measure(bp, ANCHOR_TOL).map(|(block, _)| block)
}

/// Same as [`block_from_resolvent`] but also hands back the spectral
/// measure, for callers that need the block eigenvalues (= measure nodes),
/// and takes the anchor tolerance (relative to the largest node magnitude).
pub(crate) fn block_and_measure(
    bp: &BlockCharPoly,
    anchor_tolerance: f64,
) -> Result<(JacobiWindow, DiscreteMeasure)> {
    let mu = measure_from_resolvent(bp)?;
    let block = stieltjes(&mu, bp.degree())?;
    let got = block.q_at(0);
    let scale = mu.nodes().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tolerance = anchor_tolerance * scale;
    if (got - bp.anchor()).abs() > tolerance {
        return Err(Error::AnchorMismatch {
            got,
            expected: bp.anchor(),
            tolerance,
        });
    }
    Ok((block, mu))
}

/// Max over the family's critical points `c` of
/// `|p_close * P_d(c) * Q_{d-1}(c) + 1|`, where `P`/`Q` are the block's
/// first/second-kind orthonormal polynomials and `p_close` is the
/// off-diagonal entry closing the block into the chain. Zero (to roundoff)
/// exactly when the block resolvent vanishes at every critical point, which
/// is the Wronskian identity satisfied by renormalization output.
pub fn wronskian_check(block: &JacobiWindow, p_close: f64, family: &ExpandingPolynomial) -> f64 {
    let d = block.len();
    if d < 2 {
        return 0.0;
    }
    let q = block.q_slice();
    let p = block.p_slice(); // p[k-1] is the entry coupling sites k-1, k
    let off = |k: usize| -> f64 {
        if k == d {
            p_close
        } else {
            p[k - 1]
        }
    };

    let mut worst = 0.0f64;
    for &c in family.critical_points() {
        // First kind: P_0 = 1, p_{k+1} P_{k+1} = (c - q_k) P_k - p_k P_{k-1}.
        let mut p_prev = 0.0; // P_{-1}
        let mut p_cur = 1.0; // P_0
        for k in 0..d {
            let pk = if k == 0 { 0.0 } else { off(k) };
            let next = ((c - q[k]) * p_cur - pk * p_prev) / off(k + 1);
            p_prev = p_cur;
            p_cur = next;
        }
        // p_cur is now P_d(c).

        // Second kind: Q_0 = 0, Q_1 = 1/p_1, same recurrence up to Q_{d-1}.
        let mut q_prev = 0.0; // Q_0
        let mut q_cur = 1.0 / off(1); // Q_1
        for k in 1..d - 1 {
            let next = ((c - q[k]) * q_cur - off(k) * q_prev) / off(k + 1);
            q_prev = q_cur;
            q_cur = next;
        }
        // q_cur is now Q_{d-1}(c).

        worst = worst.max((p_close * p_cur * q_cur + 1.0).abs());
    }
    worst
}

/// Stability of the reconstruction under weight perturbations: multiply the
/// weights by `multipliers` (each within `[(1+eps)^-1, 1+eps]`; the result
/// need not be normalized), reconstruct both blocks, and return
/// `(max_k |p'_k - p_k|, eps * ||J||)`. The deviation provably stays below
/// the bound; exceeding it (beyond roundoff) is reported as an error.
pub fn perturbation_gap(
    mu: &DiscreteMeasure,
    multipliers: &[f64],
    eps: f64,
) -> Result<(f64, f64)> {
    if multipliers.len() != mu.len() {
        return Err(Error::Validation(format!(
            "{} multipliers for a {}-node measure",
            multipliers.len(),
            mu.len()
        )));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Validation(format!("bad perturbation size {eps}")));
    }
    let (lo, hi) = (1.0 / (1.0 + eps), 1.0 + eps);
    for &f in multipliers {
        if !(f >= lo - 1e-12 && f <= hi + 1e-12) {
            return Err(Error::Validation(format!(
                "multiplier {f} outside [{lo}, {hi}]"
            )));
        }
    }

    let (q, p) = stieltjes_raw(mu.nodes(), mu.weights())?;
    let perturbed: Vec<f64> = mu
        .weights()
        .iter()
        .zip(multipliers)
        .map(|(w, f)| w * f)
        .collect();
    let (_, pt) = stieltjes_raw(mu.nodes(), &perturbed)?;

    let deviation = p
        .iter()
        .zip(&pt)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let bound = eps * linalg::spectral_radius(&q, &p);
    if deviation > bound * (1.0 + 1e-9) + 1e-13 {
        return Err(Error::Validation(format!(
            "perturbation deviation {deviation} exceeds the stability bound {bound}"
        )));
    }
    Ok((deviation, bound))
}

/// Monic characteristic polynomial coefficients of a Jacobi block, by the
/// three-term determinant recurrence. Test oracle for the divisor checks.
#[cfg(test)]
pub(crate) fn characteristic_coeffs(q: &[f64], p: &[f64]) -> Vec<f64> {
    let mut prev = vec![1.0]; // chi_0
    let mut cur = vec![-q[0], 1.0]; // chi_1
    for k in 1..q.len() {
        let mut next = poly_mul(&[-q[k], 1.0], &cur);
        next = poly_add_scaled(&next, &prev, -p[k - 1] * p[k - 1]);
        prev = cur;
        cur = next;
    }
    cur
}
