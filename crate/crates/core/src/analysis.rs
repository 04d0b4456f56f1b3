//! Quantitative diagnostics for tower outputs: the shift metric that makes
//! almost periodicity measurable, its decay along radix-multiple
//! translations, the nested preimage band structure of the spectrum, and an
//! empirical probe of the renormalization contraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::jacobi::{central_subrange, JacobiWindow};
use crate::poly::ExpandingPolynomial;
use crate::renorm::{renorm_step, RenormOptions};
use crate::{Error, Result};

/// Dilation applied to bands when classifying section eigenvalues.
const COVERAGE_PAD: f64 = 1e-6;
/// Expansion margin below which the contraction bound is outside its
/// hypothesis and the probe attaches a warning.
const MARGIN_FLOOR: f64 = 10.0;

/// One tabulated value of the finite-section shift metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    /// Radix-product exponent: the translation is `d_1 ... d_l * m`.
    pub l: usize,
    /// Translation multiplier.
    pub m: i64,
    /// The translation itself.
    pub k: i64,
    /// Finite-section operator norm of `S^{-k} J S^k - J`.
    pub rho: f64,
}

/// Shift-metric table over radix-multiple translations, with the fitted
/// log-linear slope and the ranges used, so the finite-section approximation
/// can be audited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    /// Least-squares slope of `ln rho` against `l`, over nonzero rows;
    /// absent when fewer than two rows qualify.
    pub fitted_slope: Option<f64>,
    /// Full window of the operator the table was computed from.
    pub window: (i64, i64),
    /// Index section the norms were evaluated on.
    pub section: (i64, i64),
}

/// Finite-section approximation of the shift metric: the operator norm of
/// `S^{-k} J S^k - J` restricted to `[lo, hi]`. Requires the window to cover
/// the section and its translate by `k`.
pub fn shift_metric(j: &JacobiWindow, k: i64, lo: i64, hi: i64) -> Result<f64> {
    j.section_opnorm_diff(&j.shift_conjugate(k), lo, hi)
}

/// Tabulate the shift metric at translations `d_1 ... d_l * m` for
/// `l = 0..=l_max` and each multiplier, fit the decay rate, and insist the
/// fit slopes downward (the signature of the radix topology: translations
/// deep in the radix filtration move the operator less).
pub fn padic_topology_table(
    j: &JacobiWindow,
    radices: &[usize],
    l_max: usize,
    m_list: &[i64],
    section: (i64, i64),
) -> Result<MetricReport> {
    if l_max >= radices.len() + 1 && !radices.is_empty() {
        // Products beyond the stored radices are not defined.
        if l_max > radices.len() {
            return Err(Error::Validation(format!(
                "level {l_max} exceeds the {} stored radices",
                radices.len()
            )));
        }
    }
    if radices.is_empty() && l_max > 0 {
        return Err(Error::Validation(
            "no radices supplied for a positive level".to_string(),
        ));
    }
    if m_list.is_empty() {
        return Err(Error::Validation(
            "at least one translation multiplier is required".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity((l_max + 1) * m_list.len());
    let mut product = 1i64;
    for l in 0..=l_max {
        if l > 0 {
            product *= radices[l - 1] as i64;
        }
        for &m in m_list {
            let k = product * m;
            let rho = shift_metric(j, k, section.0, section.1)?;
            rows.push(MetricRow { l, m, k, rho });
        }
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.rho > 0.0)
        .map(|row| (row.l as f64, row.rho.ln()))
        .collect();
    let fitted_slope = least_squares_slope(&points);
    if let Some(slope) = fitted_slope {
        if slope >= 0.0 {
            return Err(Error::Validation(format!(
                "shift metric does not decay along the radix filtration: fitted slope {slope}"
            )));
        }
    }
    Ok(MetricReport {
        rows,
        fitted_slope,
        window: (j.start(), j.end()),
        section,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
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
    Some((n * sxy - sx * sy) / denom)
}

/// The level-`l` approximation of the spectrum: the nested polynomial
/// preimage of the reference interval, as disjoint closed bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub level: usize,
    /// Disjoint closed intervals, ascending.
    pub bands: Vec<(f64, f64)>,
    /// Total Lebesgue measure of the bands.
    pub total_measure: f64,
    /// Number of bands (the product of the level degrees).
    pub count: usize,
}

impl BandReport {
    /// Whether `x` lies in some band dilated by `pad`.
    pub fn contains(&self, x: f64, pad: f64) -> bool {
        self.bands
            .iter()
            .any(|&(lo, hi)| x >= lo - pad && x <= hi + pad)
    }
}

/// Compute the level-`level` spectral bands by pulling the reference
/// interval back through the outermost `level` polynomials, innermost level
/// applied first: each band of the previous stage is replaced by its
/// preimage bands under the next polynomial moving outward.
pub fn spectrum_bands(levels: &[ExpandingPolynomial], level: usize) -> Result<BandReport> {
    if level > levels.len() {
        return Err(Error::Validation(format!(
            "level {level} exceeds the {} configured levels",
            levels.len()
        )));
    }
    let xi = if levels.is_empty() {
        return Err(Error::Validation(
            "at least one polynomial is required to define the reference interval".to_string(),
        ));
    } else {
        levels[0].xi()
    };
    let mut bands: Vec<(f64, f64)> = vec![(-xi, xi)];
    for k in (0..level).rev() {
        let t = &levels[k];
        let mut next = Vec::with_capacity(bands.len() * t.degree());
        for &(lo, hi) in &bands {
            for interval in t.preimage_intervals(lo, hi)? {
                next.push((interval.lo, interval.hi));
            }
        }
        next.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("band endpoints are finite"));
        bands = next;
    }
    let expected: usize = levels[..level].iter().map(|t| t.degree()).product();
    if bands.len() != expected {
        return Err(Error::Validation(format!(
            "expected {expected} bands at level {level}, found {}",
            bands.len()
        )));
    }
    for pair in bands.windows(2) {
        if pair[0].1 >= pair[1].0 {
            return Err(Error::Validation(format!(
                "bands [{}, {}] and [{}, {}] overlap",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            )));
        }
    }
    let total_measure = bands.iter().map(|&(lo, hi)| hi - lo).sum();
    Ok(BandReport {
        level,
        count: bands.len(),
        bands,
        total_measure,
    })
}

/// Classify the eigenvalues of the window section `[lo, hi]` against the
/// bands dilated by 1e-6: returns `(inside, outliers)`. Pure counting; the
/// caller decides how many truncation edge states to tolerate.
pub fn eigenvalue_band_coverage(
    j: &JacobiWindow,
    bands: &BandReport,
    lo: i64,
    hi: i64,
) -> Result<(usize, usize)> {
    let spectrum = j.section_spectrum(lo, hi)?;
    let inside = spectrum
        .iter()
        .filter(|&&x| bands.contains(x, COVERAGE_PAD))
        .count();
    Ok((inside, spectrum.len() - inside))
}

/// Empirical contraction data for one polynomial: the worst observed ratio
/// of output to input section distance over random seed pairs, next to the
/// analytic constants the contraction argument provides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Expansion margin of the polynomial.
    pub margin: f64,
    /// Per-coefficient sensitivity constant
    /// `max_c (|T(c)|/xi + 1) / (|T(c)|/xi - 1)^2`.
    pub delta: f64,
    /// Closing-coupling bound `(1 + delta/2) / (margin - 1)`.
    pub closing_bound: f64,
    /// Largest observed output/input distance ratio.
    pub max_ratio: f64,
    /// Set when the margin is below the contraction hypothesis.
    pub warning: Option<String>,
}

/// Probe the contraction empirically: for each trial draw two random
/// chains (bounded noise around a constant chain, coefficient bound inside
/// the reference interval), renormalize both, and compare the section
/// distance of the outputs on the central blocks against that of the inputs
/// on the same blocks. Deterministic for fixed `rng_seed`; trials run in
/// parallel.
pub fn contraction_probe(
    t: &ExpandingPolynomial,
    trials: usize,
    cf_depth: usize,
    rng_seed: u64,
) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::Validation(
            "at least one trial is required".to_string(),
        ));
    }
    let xi = t.xi();
    let depth = cf_depth as i64;
    // Input chains over [-depth - 33, 33]: blocks [-33, 32] are computable,
    // and the central half of that block range is compared.
    let input_lo = -depth - 33;
    let input_hi = 33i64;
    let (block_lo, block_hi) = central_subrange(-33, 32, 0.5);
    let d = t.degree() as i64;
    let opts = RenormOptions::new(0).with_cf_depth(cf_depth)?;
    let ratios = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(trial as u64));
            let first = noisy_chain(&mut rng, input_lo, input_hi, xi)?;
            let second = noisy_chain(&mut rng, input_lo, input_hi, xi)?;
            let input_distance = first.section_opnorm_diff(&second, block_lo, block_hi)?;
            let first_out = renorm_step(&first, t, &opts)?;
            let second_out = renorm_step(&second, t, &opts)?;
            let output_distance = first_out.section_opnorm_diff(
                &second_out,
                d * block_lo,
                d * block_hi + d - 1,
            )?;
            Ok(output_distance / input_distance)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
    let margin = t.margin();
    let delta = t
        .critical_values()
        .iter()
        .map(|v| {
            let x = v.abs() / xi;
            (x + 1.0) / ((x - 1.0) * (x - 1.0))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let closing_bound = (1.0 + delta / 2.0) / (margin - 1.0);
    let warning = if margin < MARGIN_FLOOR {
        Some(format!(
            "ContractivityWarning: expansion margin {margin:.6} is below {MARGIN_FLOOR}; \
             contraction is not guaranteed (observed max ratio {max_ratio:.6})"
        ))
    } else {
        None
    };
    Ok(ProbeReport {
        margin,
        delta,
        closing_bound,
        max_ratio,
        warning,
    })
}

/// Constant chain `q = 0, p = 0.4 xi` plus uniform noise of amplitude
/// `0.1 xi` on the diagonal and `0.05 xi` on the couplings, keeping
/// `|q| + 2p <= xi`.
fn noisy_chain(
    rng: &mut ChaCha8Rng,
    lo: i64,
    hi: i64,
    xi: f64,
) -> Result<JacobiWindow> {
    let len = (hi - lo + 1) as usize;
    let q: Vec<f64> = (0..len)
        .map(|_| rng.random_range(-0.1 * xi..0.1 * xi))
        .collect();
    let p: Vec<f64> = (0..len - 1)
        .map(|_| 0.4 * xi + rng.random_range(-0.05 * xi..0.05 * xi))
        .collect();
    JacobiWindow::new(lo, q, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::{tower_iterate, TowerConfig};
    use approx::assert_abs_diff_eq;

    /// z^2 - 132 over reference interval [-12, 12]; margin 11.
    fn degree_two_family() -> ExpandingPolynomial {
        ExpandingPolynomial::chebyshev_family(2, 264.0f64.sqrt(), 12.0).unwrap()
    }

    /// z^3 - 75 z over [-12, 12]; margin 250/12.
    fn degree_three_family() -> ExpandingPolynomial {
        ExpandingPolynomial::chebyshev_family(3, 10.0, 12.0).unwrap()
    }

    fn tower_output(depth: usize, window: (i64, i64)) -> JacobiWindow {
        let t = degree_two_family();
        let levels = vec![t; depth];
        let config = TowerConfig::new(12.0, levels, vec![0; depth], window)
            .unwrap()
            .with_seed(0.0, 6.0)
            .unwrap();
        tower_iterate(&config).unwrap().0
    }

    #[test]
    fn shift_metric_vanishes_for_constant_and_zero_shift() {
        let j = JacobiWindow::constant(-20, 41, 0.3, 2.0).unwrap();
        assert_eq!(shift_metric(&j, 0, -5, 5).unwrap(), 0.0);
        assert_eq!(shift_metric(&j, 3, -5, 5).unwrap(), 0.0);
        assert_eq!(shift_metric(&j, -7, -5, 5).unwrap(), 0.0);
    }

    #[test]
    fn shift_metric_on_two_periodic_chain() {
        // Alternating couplings a, b with zero diagonal.
        let len = 41usize;
        let q = vec![0.0; len];
        let p: Vec<f64> = (0..len - 1)
            .map(|i| if i % 2 == 0 { 3.0 } else { 1.0 })
            .collect();
        let j = JacobiWindow::new(-20, q, p).unwrap();
        assert_eq!(shift_metric(&j, 2, -5, 5).unwrap(), 0.0);
        let rho = shift_metric(&j, 1, -5, 5).unwrap();
        assert!(rho >= 2.0 - 1e-12, "rho {rho} below coupling gap");
        assert!(rho <= 4.0 + 1e-12, "rho {rho} above twice the spread");
    }

    #[test]
    fn shift_metric_needs_room_for_the_translate() {
        let j = JacobiWindow::constant(-5, 11, 0.0, 1.0).unwrap();
        let err = shift_metric(&j, 4, -3, 3).unwrap_err();
        assert!(matches!(err, Error::WindowTooShort { .. }));
    }

    #[test]
    fn shift_metric_triangle_inequality_on_sections() {
        let j = tower_output(3, (-48, 47));
        for (k, m) in [(1i64, 2i64), (2, 4), (3, 5), (2, 2)] {
            let lhs = shift_metric(&j, k + m, -10, 10).unwrap();
            let rhs = shift_metric(&j, k, -10, 10).unwrap()
                + shift_metric(&j, m, -10, 10).unwrap();
            assert!(
                lhs <= rhs + 1e-9,
                "triangle inequality fails: rho({}) = {lhs} > {rhs}",
                k + m
            );
        }
    }

    #[test]
    fn topology_table_decays_on_tower_output() {
        let j = tower_output(4, (-64, 63));
        let report =
            padic_topology_table(&j, &[2, 2, 2, 2], 4, &[1], (-24, 23)).unwrap();
        assert_eq!(report.rows.len(), 5);
        for pair in report.rows.windows(2) {
            assert!(
                pair[1].rho < pair[0].rho,
                "rho not decreasing: {:?}",
                report.rows
            );
        }
        let slope = report.fitted_slope.expect("nonzero rows");
        assert!(slope < 0.0);
        assert_eq!(report.window, (-64, 63));
        assert_eq!(report.section, (-24, 23));
    }

    #[test]
    fn topology_table_same_class_multipliers_are_comparable() {
        let j = tower_output(4, (-64, 63));
        let report =
            padic_topology_table(&j, &[2, 2, 2, 2], 2, &[1, 3], (-20, 19)).unwrap();
        for l in 0..=2usize {
            let values: Vec<f64> = report
                .rows
                .iter()
                .filter(|row| row.l == l)
                .map(|row| row.rho)
                .collect();
            assert_eq!(values.len(), 2);
            let ratio = values[0].max(values[1]) / values[0].min(values[1]);
            assert!(
                ratio <= 10.0,
                "level {l}: same-class values {values:?} differ by more than 10x"
            );
        }
    }

    #[test]
    fn topology_table_periodic_input_hits_exact_zeros() {
        // Depth-2 tower output is exactly 4-periodic.
        let j = tower_output(2, (-64, 63));
        let report =
            padic_topology_table(&j, &[2, 2, 2], 3, &[1], (-20, 19)).unwrap();
        for row in &report.rows {
            if row.l >= 2 {
                assert_eq!(row.rho, 0.0, "period-4 shift should be exact: {row:?}");
            }
        }
        assert!(report.fitted_slope.expect("two nonzero rows") < 0.0);
    }

    #[test]
    fn topology_table_rejects_growing_metric() {
        // Linear diagonal drift: the shift metric grows with the shift.
        let len = 129usize;
        let q: Vec<f64> = (0..len).map(|i| 0.01 * i as f64).collect();
        let p = vec![1.0; len - 1];
        let j = JacobiWindow::new(-64, q, p).unwrap();
        let err = padic_topology_table(&j, &[2, 2, 2], 3, &[1], (-10, 9)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn bands_level_zero_is_reference_interval() {
        let levels = vec![degree_two_family()];
        let report = spectrum_bands(&levels, 0).unwrap();
        assert_eq!(report.count, 1);
        assert_eq!(report.bands, vec![(-12.0, 12.0)]);
        assert_abs_diff_eq!(report.total_measure, 24.0, epsilon = 1e-12);
    }

    #[test]
    fn bands_level_one_closed_form() {
        let levels = vec![degree_two_family()];
        let report = spectrum_bands(&levels, 1).unwrap();
        assert_eq!(report.count, 2);
        let sqrt120 = 120.0f64.sqrt();
        assert_abs_diff_eq!(report.bands[0].0, -12.0, epsilon = 1e-10);
        assert_abs_diff_eq!(report.bands[0].1, -sqrt120, epsilon = 1e-10);
        assert_abs_diff_eq!(report.bands[1].0, sqrt120, epsilon = 1e-10);
        assert_abs_diff_eq!(report.bands[1].1, 12.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            report.total_measure,
            2.0 * (12.0 - sqrt120),
            epsilon = 1e-9
        );
    }

    #[test]
    fn bands_nest_and_measure_decays() {
        let t = degree_two_family();
        let levels = vec![t.clone(), t.clone(), t];
        let mut previous = spectrum_bands(&levels, 0).unwrap();
        for level in 1..=3usize {
            let report = spectrum_bands(&levels, level).unwrap();
            assert_eq!(report.count, 1 << level);
            assert!(
                report.total_measure < 0.5 * previous.total_measure,
                "measure ratio at level {level} above one half"
            );
            for &(lo, hi) in &report.bands {
                assert!(
                    previous
                        .bands
                        .iter()
                        .any(|&(plo, phi)| lo >= plo - 1e-10 && hi <= phi + 1e-10),
                    "band [{lo}, {hi}] not nested at level {level}"
                );
            }
            previous = report;
        }
    }

    #[test]
    fn bands_mixed_degrees_count_is_radix_product() {
        let levels = vec![degree_two_family(), degree_three_family()];
        let report = spectrum_bands(&levels, 2).unwrap();
        assert_eq!(report.count, 6);
        let level_one = spectrum_bands(&levels, 1).unwrap();
        assert!(report.total_measure < level_one.total_measure);
    }

    #[test]
    fn bands_reject_level_beyond_configuration() {
        let levels = vec![degree_two_family()];
        assert!(spectrum_bands(&levels, 2).is_err());
    }

    #[test]
    fn coverage_free_chain_fits_reference_band() {
        let j = JacobiWindow::constant(0, 100, 0.0, 6.0).unwrap();
        let levels = vec![degree_two_family()];
        let bands = spectrum_bands(&levels, 0).unwrap();
        let (inside, outliers) = eigenvalue_band_coverage(&j, &bands, 0, 99).unwrap();
        assert_eq!(inside, 100);
        assert_eq!(outliers, 0);
    }

    #[test]
    fn coverage_level_one_tower_section() {
        let j = tower_output(1, (0, 199));
        let levels = vec![degree_two_family()];
        let bands = spectrum_bands(&levels, 1).unwrap();
        let (inside, outliers) = eigenvalue_band_coverage(&j, &bands, 0, 199).unwrap();
        assert!(inside >= 196, "only {inside} of 200 eigenvalues inside");
        assert!(outliers <= 4, "{outliers} outliers exceed the edge allowance");
    }

    #[test]
    fn coverage_negative_control_sprays_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let q: Vec<f64> = (0..100).map(|_| rng.random_range(-24.0..24.0)).collect();
        let p: Vec<f64> = (0..99).map(|_| rng.random_range(12.0..24.0)).collect();
        let j = JacobiWindow::new(0, q, p).unwrap();
        let levels = vec![degree_two_family()];
        let bands = spectrum_bands(&levels, 1).unwrap();
        let (_, outliers) = eigenvalue_band_coverage(&j, &bands, 0, 99).unwrap();
        assert!(outliers >= 50, "only {outliers} outliers in the control");
    }

    #[test]
    fn probe_margin_eleven_constants_and_ratio() {
        let t = degree_two_family();
        let report = contraction_probe(&t, 20, 32, 7).unwrap();
        assert_abs_diff_eq!(report.margin, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.delta, 0.12, epsilon = 1e-12);
        assert_abs_diff_eq!(report.closing_bound, 1.06 / 10.0, epsilon = 1e-12);
        assert!(report.max_ratio < 1.0);
        assert!(
            report.max_ratio <= 0.2,
            "max ratio {} above 0.2",
            report.max_ratio
        );
        assert!(report.warning.is_none());
    }

    #[test]
    fn probe_margin_ten_delta_closed_form() {
        // z^2 - 120 over [-12, 12]: margin exactly 10.
        let t = ExpandingPolynomial::chebyshev_family(2, 240.0f64.sqrt(), 12.0).unwrap();
        let report = contraction_probe(&t, 4, 32, 11).unwrap();
        assert_abs_diff_eq!(report.margin, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.delta, 11.0 / 81.0, epsilon = 1e-12);
        assert!(report.warning.is_none());
    }

    #[test]
    fn probe_low_margin_carries_warning() {
        // z^2 - 96 over [-12, 12]: margin 8, below the hypothesis.
        let t = ExpandingPolynomial::chebyshev_family(2, 192.0f64.sqrt(), 12.0).unwrap();
        let report = contraction_probe(&t, 4, 32, 23).unwrap();
        assert_abs_diff_eq!(report.margin, 8.0, epsilon = 1e-12);
        let warning = report.warning.expect("margin below the hypothesis");
        assert!(warning.contains("ContractivityWarning"));
    }

    #[test]
    fn probe_is_deterministic() {
        let t = degree_two_family();
        let first = contraction_probe(&t, 8, 32, 103).unwrap();
        let second = contraction_probe(&t, 8, 32, 103).unwrap();
        assert_eq!(first, second);
    }
}
