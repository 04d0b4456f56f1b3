//! JSON run configuration: a mirror of the library's tower configuration
//! plus per-subcommand options. All fields are plain JSON numbers/strings;
//! unknown keys are rejected so typos surface as config errors.

use jacobi_renorm::poly::ExpandingPolynomial;
use jacobi_renorm::tower::TowerConfig;
use jacobi_renorm::Result as CoreResult;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Half-width of the reference interval `[-xi, xi]`.
    pub xi: f64,
    /// Expanding polynomial per level, outermost first.
    pub levels: Vec<LevelSpec>,
    /// Offset digit per level; `digits[k] < degree(levels[k])`.
    pub digits: Vec<usize>,
    /// Site range `[lo, hi]` of the constructed operator.
    pub output_window: (i64, i64),
    /// Continued-fraction recursion depth (default 32).
    #[serde(default)]
    pub cf_depth: Option<usize>,
    /// Constant seed chain; defaults to `q = 0`, `p = xi / 2`.
    #[serde(default)]
    pub seed: Option<SeedSpec>,
    /// Output directory; overridden by `--out`, defaults to ".".
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
}

/// One expanding polynomial, either by explicit monic coefficients
/// (`{"coefficients": [c0, c1, ..., 1.0]}`, ascending powers) or as a member
/// of the scaled Chebyshev family (`{"chebyshev": {"degree": d, "scale": a}}`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum LevelSpec {
    Coefficients(Vec<f64>),
    Chebyshev { degree: usize, scale: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Real evaluation points for the resolvent identity; each must keep
    /// distance >= xi from the reference interval. Defaults to five points
    /// spread over `[-3.75 xi, 3.75 xi]`.
    #[serde(default)]
    pub z_samples: Option<Vec<f64>>,
    /// Number of aligned blocks the identity and polynomial-form checks
    /// compare (default 32).
    #[serde(default)]
    pub block_len: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// Largest radix-product exponent to tabulate (default: tower depth).
    #[serde(default)]
    pub l_max: Option<usize>,
    /// Translation multipliers (default `[1]`).
    #[serde(default)]
    pub m_list: Option<Vec<i64>>,
    /// Index section the operator norms are evaluated on (default: the
    /// central half of the output window).
    #[serde(default)]
    pub section: Option<(i64, i64)>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Number of random seed pairs (default 20).
    #[serde(default)]
    pub trials: Option<usize>,
    /// RNG stream seed (default 7).
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

impl RunConfig {
    /// Realize one level as an expanding polynomial over this `xi`.
    pub fn polynomial(&self, k: usize) -> CoreResult<ExpandingPolynomial> {
        match &self.levels[k] {
            LevelSpec::Coefficients(coeffs) => ExpandingPolynomial::from_coeffs(coeffs, self.xi),
            LevelSpec::Chebyshev { degree, scale } => {
                ExpandingPolynomial::chebyshev_family(*degree, *scale, self.xi)
            }
        }
    }

    /// Realize every level.
    pub fn polynomials(&self) -> CoreResult<Vec<ExpandingPolynomial>> {
        (0..self.levels.len()).map(|k| self.polynomial(k)).collect()
    }

    /// Assemble the validated tower configuration.
    pub fn tower(&self) -> CoreResult<TowerConfig> {
        let mut config = TowerConfig::new(
            self.xi,
            self.polynomials()?,
            self.digits.clone(),
            self.output_window,
        )?;
        if let Some(depth) = self.cf_depth {
            config = config.with_cf_depth(depth)?;
        }
        if let Some(seed) = &self.seed {
            config = config.with_seed(seed.q, seed.p)?;
        }
        Ok(config)
    }

    /// The continued-fraction depth all commands share.
    pub fn cf_depth(&self) -> usize {
        self.cf_depth.unwrap_or(32)
    }
}
