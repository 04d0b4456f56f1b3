//! Internal dense-free linear algebra for symmetric tridiagonal matrices:
//! Sturm-count bisection for eigenvalues and an LU factorization for
//! resolvent columns. Both operate on `(diag, off)` slice pairs with
//! `off[i]` coupling sites `i` and `i + 1`.

/// Number of eigenvalues of the symmetric tridiagonal matrix at or below `x`,
/// by the non-positive-pivot count of the LDL^T recurrence (Sturm sequence).
/// A vanishing pivot is clamped to `-pivmin` *before* its sign is read, so an
/// exactly singular shift still yields a consistent count.
fn count_below(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0usize;
    let mut d = diag[0] - x;
    if d.abs() < pivmin {
        d = -pivmin;
    }
    if d <= 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        d = (diag[i] - x) - off[i - 1] * off[i - 1] / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d <= 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin bounds `[lo, hi]` containing every eigenvalue.
fn gershgorin_bounds(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    // Open the bracket slightly so strict counts at the endpoints are 0 and n.
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

/// The `k`-th smallest eigenvalue (0-based), bisected to near machine precision.
fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize, bounds: (f64, f64), pivmin: f64) -> f64 {
    let (mut lo, mut hi) = bounds;
    // 2^-80 of the initial bracket width is far below every tolerance used here.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, off, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn pivmin_for(off: &[f64]) -> f64 {
    let max_off_sq = off.iter().fold(1.0f64, |m, &b| m.max(b * b));
    f64::MIN_POSITIVE * max_off_sq
}

/// All eigenvalues of the symmetric tridiagonal matrix, ascending.
pub(crate) fn eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
    if diag.len() == 1 {
        return vec![diag[0]];
    }
    let bounds = gershgorin_bounds(diag, off);
    let pivmin = pivmin_for(off);
    (0..diag.len())
        .map(|k| kth_eigenvalue(diag, off, k, bounds, pivmin))
        .collect()
}

/// Spectral radius max |lambda| of the symmetric tridiagonal matrix,
/// from the two extreme eigenvalues only.
pub(crate) fn spectral_radius(diag: &[f64], off: &[f64]) -> f64 {
    assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
    if diag.len() == 1 {
        return diag[0].abs();
    }
    // An exactly zero matrix must report exactly zero, not bracket-padding
    // noise from the bisection.
    if diag.iter().all(|&x| x == 0.0) && off.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let bounds = gershgorin_bounds(diag, off);
    let pivmin = pivmin_for(off);
    let lowest = kth_eigenvalue(diag, off, 0, bounds, pivmin);
    let highest = kth_eigenvalue(diag, off, diag.len() - 1, bounds, pivmin);
    lowest.abs().max(highest.abs())
}

/// LU factorization (no pivoting) of an unsymmetric-storage tridiagonal matrix
/// with diagonal `diag`, subdiagonal `lower`, superdiagonal `upper`.
/// Intended for strictly diagonally dominant systems such as `z - J` with
/// `z` at distance > ||off row sums|| from the spectrum.
pub(crate) struct TridiagonalLu {
    /// Pivots d_i of the elimination.
    pivots: Vec<f64>,
    /// Multipliers l_i = lower_i / d_{i-1}.
    multipliers: Vec<f64>,
    /// Original superdiagonal, needed for back substitution.
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub(crate) fn factor(diag: &[f64], lower: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(lower.len() + 1, n);
        assert_eq!(upper.len() + 1, n);
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n.saturating_sub(1));
        pivots.push(diag[0]);
        for i in 1..n {
            let l = lower[i - 1] / pivots[i - 1];
            multipliers.push(l);
            pivots.push(diag[i] - l * upper[i - 1]);
        }
        Self {
            pivots,
            multipliers,
            upper: upper.to_vec(),
        }
    }

    /// Factor `z - T` for a symmetric tridiagonal `T = (diag, off)`.
    pub(crate) fn factor_shifted(z: f64, diag: &[f64], off: &[f64]) -> Self {
        let shifted: Vec<f64> = diag.iter().map(|&q| z - q).collect();
        let neg_off: Vec<f64> = off.iter().map(|&p| -p).collect();
        Self::factor(&shifted, &neg_off, &neg_off)
    }

    /// Solve `A x = e_j` for the `j`-th standard basis vector.
    pub(crate) fn solve_unit(&self, j: usize) -> Vec<f64> {
        let n = self.pivots.len();
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        self.solve_in_place(&mut x);
        x
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.multipliers[i - 1] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivots[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Free Jacobi section eigenvalues are 2 p cos(j pi / (L + 1)).
    #[test]
    fn free_section_eigenvalues_closed_form() {
        let n = 25;
        let p = 3.0;
        let diag = vec![0.0; n];
        let off = vec![p; n - 1];
        let computed = eigenvalues(&diag, &off);
        let nf = (n + 1) as f64;
        let mut expected: Vec<f64> = (1..=n)
            .map(|j| 2.0 * p * (j as f64 * std::f64::consts::PI / nf).cos())
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (c, e) in computed.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_match_dense_symmetric_solver() {
        // Oracle route: nalgebra's dense symmetric eigensolver.
        let diag = [1.5, -0.3, 2.0, 0.7, -1.1, 0.0, 3.2];
        let off = [0.9, 1.4, -0.5, 2.2, 0.1, 1.0];
        let n = diag.len();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
        }
        for i in 0..n - 1 {
            dense[(i, i + 1)] = off[i];
            dense[(i + 1, i)] = off[i];
        }
        let mut oracle: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let computed = eigenvalues(&diag, &off);
        for (c, e) in computed.iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_site_spectral_radius() {
        assert_eq!(spectral_radius(&[-4.0], &[]), 4.0);
    }

    #[test]
    fn tridiagonal_solve_reproduces_inverse_column() {
        let diag = [10.0, 11.0, 9.5, 12.0];
        let off = [1.0, -2.0, 0.5];
        let lu = TridiagonalLu::factor_shifted(0.0, &diag, &off);
        // 0 - T with diag negated: solve (-T) x = e_2, check T x = -e_2.
        let x = lu.solve_unit(2);
        let n = diag.len();
        let mut tx = vec![0.0; n];
        for i in 0..n {
            tx[i] = -diag[i] * x[i];
            if i > 0 {
                tx[i] -= off[i - 1] * x[i - 1];
            }
            if i < n - 1 {
                tx[i] -= off[i] * x[i + 1];
            }
        }
        for (i, &v) in tx.iter().enumerate() {
            let expected = if i == 2 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v, expected, epsilon = 1e-13);
        }
    }
}
