//! Iterate renormalization over a list of expanding polynomials with
//! mixed-radix digit addressing: size the coefficient windows each level
//! needs, run the steps innermost-first, and report how fast successive
//! depths converge on the requested output window.

use serde::Serialize;

use crate::jacobi::{central_subrange, JacobiWindow};
use crate::poly::ExpandingPolynomial;
use crate::renorm::{renorm_step, RenormOptions};
use crate::{Error, Result};

/// Default truncation depth of the left continued fraction.
const DEFAULT_CF_DEPTH: usize = 32;
/// Expansion margin below which geometric convergence of the tower is not
/// guaranteed; towers still run, but the report carries a warning.
const MARGIN_FLOOR: f64 = 10.0;
/// Relative slack allowed on the seed coefficient bound `|q| + 2p <= xi`.
const SEED_BOUND_SLACK: f64 = 1e-9;

/// A mixed-radix integer: digit `k` runs modulo `radices[k]`, and the stored
/// prefix represents the value `digits[0] + digits[1]*radices[0] + ...`
/// modulo the product of the stored radices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdicInteger {
    radices: Vec<usize>,
    digits: Vec<usize>,
}

impl AdicInteger {
    pub fn new(radices: Vec<usize>, digits: Vec<usize>) -> Result<Self> {
        if radices.len() != digits.len() {
            return Err(Error::Validation(format!(
                "radix and digit counts differ: {} vs {}",
                radices.len(),
                digits.len()
            )));
        }
        for (k, (&d, &e)) in radices.iter().zip(digits.iter()).enumerate() {
            if d < 2 {
                return Err(Error::Validation(format!(
                    "radix at position {k} must be at least 2, got {d}"
                )));
            }
            if e >= d {
                return Err(Error::Validation(format!(
                    "digit {e} at position {k} exceeds radix {d}"
                )));
            }
        }
        Ok(Self { radices, digits })
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// The integer the stored prefix represents:
    /// `digits[0] + digits[1]*radices[0] + digits[2]*radices[0]*radices[1] + ...`.
    pub fn value(&self) -> i64 {
        let mut total = 0i64;
        let mut place = 1i64;
        for (&d, &e) in self.radices.iter().zip(self.digits.iter()) {
            total += e as i64 * place;
            place *= d as i64;
        }
        total
    }

    /// Product of the stored radices (the modulus of the prefix).
    pub fn modulus(&self) -> i64 {
        self.radices.iter().map(|&d| d as i64).product()
    }
}

/// Mixed-radix addition of an integer (possibly negative) with carry
/// propagation. Errors if a carry would leave the stored digit prefix.
pub fn adic_add(a: &AdicInteger, m: i64) -> Result<AdicInteger> {
    let mut digits = a.digits.clone();
    let mut carry = m;
    for (k, &d) in a.radices.iter().enumerate() {
        if carry == 0 {
            break;
        }
        let x = digits[k] as i64 + carry;
        let d = d as i64;
        digits[k] = x.rem_euclid(d) as usize;
        carry = x.div_euclid(d);
    }
    if carry != 0 {
        return Err(Error::DigitOverflowBeyondPrefix { carry });
    }
    Ok(AdicInteger {
        radices: a.radices.clone(),
        digits,
    })
}

/// Configuration of a renormalization tower: the level polynomials from
/// outermost to innermost, one offset digit per level, the requested output
/// index window, the continued-fraction depth, and the constant seed chain.
#[derive(Debug, Clone)]
pub struct TowerConfig {
    xi: f64,
    levels: Vec<ExpandingPolynomial>,
    digits: Vec<usize>,
    output_lo: i64,
    output_hi: i64,
    cf_depth: usize,
    seed_q: f64,
    seed_p: f64,
}

impl TowerConfig {
    /// Build a config with default continued-fraction depth (32) and default
    /// seed `q = 0, p = xi/2` (free chain with spectrum exactly the
    /// reference interval).
    pub fn new(
        xi: f64,
        levels: Vec<ExpandingPolynomial>,
        digits: Vec<usize>,
        output: (i64, i64),
    ) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Validation(format!(
                "reference half-width must be positive and finite, got {xi}"
            )));
        }
        if digits.len() != levels.len() {
            return Err(Error::Validation(format!(
                "digit count {} does not match level count {}",
                digits.len(),
                levels.len()
            )));
        }
        for (k, (t, &e)) in levels.iter().zip(digits.iter()).enumerate() {
            if t.xi() != xi {
                return Err(Error::Validation(format!(
                    "level {} reference half-width {} differs from configured {xi}",
                    k + 1,
                    t.xi()
                )));
            }
            if e >= t.degree() {
                return Err(Error::Validation(format!(
                    "digit {e} at level {} exceeds the level degree {}",
                    k + 1,
                    t.degree()
                )));
            }
        }
        if output.0 > output.1 {
            return Err(Error::Validation(format!(
                "output window [{}, {}] is empty",
                output.0, output.1
            )));
        }
        Ok(Self {
            xi,
            levels,
            digits,
            output_lo: output.0,
            output_hi: output.1,
            cf_depth: DEFAULT_CF_DEPTH,
            seed_q: 0.0,
            seed_p: xi / 2.0,
        })
    }

    pub fn with_cf_depth(mut self, cf_depth: usize) -> Result<Self> {
        if cf_depth < 8 {
            return Err(Error::Validation(format!(
                "continued-fraction depth must be at least 8, got {cf_depth}"
            )));
        }
        self.cf_depth = cf_depth;
        Ok(self)
    }

    /// Replace the constant seed chain. The coefficient bound
    /// `|q| + 2p <= xi` is enforced as a practical check that the seed
    /// spectrum stays inside the reference interval.
    pub fn with_seed(mut self, q: f64, p: f64) -> Result<Self> {
        if !(q.is_finite() && p.is_finite() && p > 0.0) {
            return Err(Error::Validation(format!(
                "seed must have finite q and positive finite p, got q={q}, p={p}"
            )));
        }
        if q.abs() + 2.0 * p > self.xi * (1.0 + SEED_BOUND_SLACK) {
            return Err(Error::Validation(format!(
                "seed bound |q| + 2p = {} exceeds the reference half-width {}",
                q.abs() + 2.0 * p,
                self.xi
            )));
        }
        self.seed_q = q;
        self.seed_p = p;
        Ok(self)
    }

    /// Same tower with different offset digits.
    pub fn with_digits(&self, digits: Vec<usize>) -> Result<Self> {
        let mut config = self.clone();
        if digits.len() != config.levels.len() {
            return Err(Error::Validation(format!(
                "digit count {} does not match level count {}",
                digits.len(),
                config.levels.len()
            )));
        }
        for (k, (t, &e)) in config.levels.iter().zip(digits.iter()).enumerate() {
            if e >= t.degree() {
                return Err(Error::Validation(format!(
                    "digit {e} at level {} exceeds the level degree {}",
                    k + 1,
                    t.degree()
                )));
            }
        }
        config.digits = digits;
        Ok(config)
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn levels(&self) -> &[ExpandingPolynomial] {
        &self.levels
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn output(&self) -> (i64, i64) {
        (self.output_lo, self.output_hi)
    }

    pub fn cf_depth(&self) -> usize {
        self.cf_depth
    }

    pub fn seed(&self) -> (f64, f64) {
        (self.seed_q, self.seed_p)
    }

    /// The digit sequence as a mixed-radix integer over the level degrees.
    pub fn adic_digits(&self) -> AdicInteger {
        AdicInteger::new(
            self.levels.iter().map(|t| t.degree()).collect(),
            self.digits.clone(),
        )
        .expect("digits validated at construction")
    }

    /// The first `depth` levels as a tower with the same output window.
    fn truncate(&self, depth: usize) -> Self {
        let mut config = self.clone();
        config.levels.truncate(depth);
        config.digits.truncate(depth);
        config
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Index windows each level must supply so the requested output window is
/// fully determined, outermost first: entry 0 is the output window itself,
/// entry k the window of level-k coefficients. Each level widens the block
/// range of the previous window by the continued-fraction depth on the left
/// and two blocks on the right, then expands blocks to indices.
pub fn required_window(config: &TowerConfig) -> Vec<(i64, i64)> {
    let n = config.depth();
    let depth = config.cf_depth() as i64;
    let mut windows = Vec::with_capacity(n + 1);
    let (mut lo, mut hi) = config.output();
    windows.push((lo, hi));
    for k in 0..n {
        let d = config.levels()[k].degree() as i64;
        let eps = config.digits()[k] as i64;
        let block_lo = div_floor(lo - eps, d) - depth;
        let block_hi = div_floor(hi - eps, d) + 2;
        lo = d * block_lo;
        hi = d * block_hi + d - 1;
        windows.push((lo, hi));
    }
    windows
}

/// Convergence report of a tower run: sup distances between consecutive
/// depths on the central half of the output window, the geometric rate
/// fitted to them, and any warnings raised by the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TowerReport {
    /// `per_level_increments[l]` is the sup distance between the depth-(l+1)
    /// and depth-l outputs.
    pub per_level_increments: Vec<f64>,
    /// Least-squares geometric rate of the nonzero increments; absent when
    /// fewer than two are nonzero.
    pub fitted_rate: Option<f64>,
    /// Human-readable warnings (low expansion margins).
    pub warnings: Vec<String>,
}

/// Least-squares slope of `ln(increments)` against the level index,
/// exponentiated; exact zeros are excluded from the fit.
fn fit_geometric_rate(increments: &[f64]) -> Option<f64> {
    let points: Vec<(f64, f64)> = increments
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(l, &v)| (l as f64, v.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    Some(slope.exp())
}

/// Run the tower truncated to the given depth and section the result to the
/// requested output window.
fn run_depth(config: &TowerConfig, depth: usize) -> Result<JacobiWindow> {
    let truncated = config.truncate(depth);
    let required = required_window(&truncated);
    let (seed_lo, seed_hi) = required[depth];
    let (seed_q, seed_p) = config.seed();
    let mut chain = JacobiWindow::constant(
        seed_lo,
        (seed_hi - seed_lo + 1) as usize,
        seed_q,
        seed_p,
    )?;
    for k in (0..depth).rev() {
        // Trim to the sized window when it is available, to keep the work at
        // outer levels bounded; otherwise keep everything computable.
        let (need_lo, need_hi) = required[k + 1];
        if chain.covers(need_lo, need_hi) {
            chain = chain.section(need_lo, need_hi)?;
        }
        let opts = RenormOptions::new(config.digits()[k]).with_cf_depth(config.cf_depth())?;
        chain = renorm_step(&chain, &config.levels()[k], &opts)?;
    }
    let (lo, hi) = config.output();
    if !chain.covers(lo, hi) {
        return Err(Error::InsufficientWindow {
            level: 0,
            need_lo: lo,
            need_hi: hi,
            have_lo: chain.start(),
            have_hi: chain.end(),
        });
    }
    chain.section(lo, hi)
}

/// Run the full tower innermost-first and measure convergence: the output is
/// the depth-n window over the configured output range, and the report holds
/// the sup distance between consecutive truncated depths on the central half
/// of that range together with the fitted geometric rate.
pub fn tower_iterate(config: &TowerConfig) -> Result<(JacobiWindow, TowerReport)> {
    let n = config.depth();
    let mut outputs = Vec::with_capacity(n + 1);
    for depth in 0..=n {
        outputs.push(run_depth(config, depth)?);
    }
    let (lo, hi) = config.output();
    let (central_lo, central_hi) = central_subrange(lo, hi, 0.5);
    let mut per_level_increments = Vec::with_capacity(n);
    for l in 1..=n {
        per_level_increments.push(outputs[l].coef_sup_dist(
            &outputs[l - 1],
            central_lo,
            central_hi,
        )?);
    }
    let fitted_rate = fit_geometric_rate(&per_level_increments);
    let mut warnings = Vec::new();
    for (k, t) in config.levels().iter().enumerate() {
        if t.margin() < MARGIN_FLOOR {
            warnings.push(format!(
                "ContractivityWarning: level {} expansion margin {:.6} is below {MARGIN_FLOOR}; \
                 geometric convergence is not guaranteed",
                k + 1,
                t.margin()
            ));
        }
    }
    let output = outputs.pop().expect("depth list is nonempty");
    Ok((
        output,
        TowerReport {
            per_level_increments,
            fitted_rate,
            warnings,
        },
    ))
}

/// Compare the two-level tower against the single level built from the
/// composed polynomial with the combined digit: central sup distance over
/// the output window. The composition law says the two routes agree.
pub fn chain_rule_check(
    t1: &ExpandingPolynomial,
    t2: &ExpandingPolynomial,
    eps0: usize,
    eps1: usize,
    seed: (f64, f64),
    window: (i64, i64),
) -> Result<f64> {
    let xi = t1.xi();
    let two_level = TowerConfig::new(
        xi,
        vec![t1.clone(), t2.clone()],
        vec![eps0, eps1],
        window,
    )?
    .with_seed(seed.0, seed.1)?;
    let composed = t2.compose(t1)?;
    let combined_digit = eps0 + eps1 * t1.degree();
    let one_level = TowerConfig::new(xi, vec![composed], vec![combined_digit], window)?
        .with_seed(seed.0, seed.1)?;
    let (two_step, _) = tower_iterate(&two_level)?;
    let (one_step, _) = tower_iterate(&one_level)?;
    let (central_lo, central_hi) = central_subrange(window.0, window.1, 0.5);
    two_step.coef_sup_dist(&one_step, central_lo, central_hi)
}

/// Rerun the tower with the digit sequence translated by `m` and compare
/// against the index-shifted original output: central sup distance over the
/// common window. Zero for `m = 0`; for general `m` the two computations
/// agree wherever both windows are defined.
pub fn translation_consistency(config: &TowerConfig, m: i64) -> Result<f64> {
    let (base, _) = tower_iterate(config)?;
    let translated = adic_add(&config.adic_digits(), m)?;
    let translated_config = config.with_digits(translated.digits().to_vec())?;
    let (moved, _) = tower_iterate(&translated_config)?;
    let aligned = base.shift_conjugate(-m);
    let lo = moved.start().max(aligned.start());
    let hi = moved.end().min(aligned.end());
    if lo > hi {
        return Err(Error::EmptyOverlap);
    }
    let (central_lo, central_hi) = central_subrange(lo, hi, 0.5);
    moved.coef_sup_dist(&aligned, central_lo, central_hi)
}
