//! The five subcommands, each mapping a run configuration to output files,
//! plus the exit-code classification of every failure.

use crate::config::{MetricSpec, ProbeSpec, RunConfig, VerifySpec};
use crate::output::{coefficients_csv, fmt_float, read_coefficients_csv, write_atomic};
use jacobi_renorm::analysis::{
    contraction_probe, eigenvalue_band_coverage, padic_topology_table, spectrum_bands, BandReport,
};
use jacobi_renorm::inverse_spectral::wronskian_check;
use jacobi_renorm::jacobi::{central_subrange, JacobiWindow};
use jacobi_renorm::poly::ExpandingPolynomial;
use jacobi_renorm::renorm::{
    renorm_block, renorm_step, verify_polynomial_forms, verify_renorm_identity, RenormOptions,
};
use jacobi_renorm::tower::{required_window, tower_iterate, translation_consistency, TowerConfig};
use jacobi_renorm::tower::chain_rule_check;
use jacobi_renorm::Error as CoreError;
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::Path;

const TOL_IDENTITY: f64 = 1e-6;
const TOL_POLYNOMIAL: f64 = 1e-6;
const TOL_WRONSKIAN: f64 = 1e-8;
const TOL_CHAIN: f64 = 1e-7;
const TOL_TRANSLATION: f64 = 1e-7;
/// Stored coefficients are formatted with enough digits to round-trip
/// exactly, so re-reading them must reproduce the rebuild bit for bit.
const TOL_ROUNDTRIP: f64 = 0.0;

/// Names accepted by `--checks`.
const CHECK_NAMES: [&str; 6] = [
    "identity",
    "polynomial",
    "wronskian",
    "chain",
    "translation",
    "roundtrip",
];

/// A failure classified per the exit-code contract: 2 configuration,
/// 3 numerical, 4 verification.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Verification(m) => m,
        }
    }
}

/// Sort library errors into the exit-code contract: anything a config edit
/// can fix is a configuration error; the rest are numerical.
fn classify(error: CoreError) -> Failure {
    let message = error.to_string();
    match error {
        CoreError::Validation(..)
        | CoreError::EmptyOverlap
        | CoreError::WindowTooShort { .. }
        | CoreError::InsufficientWindow { .. }
        | CoreError::DigitOverflowBeyondPrefix { .. } => Failure::Config(message),
        CoreError::RootFinding(..)
        | CoreError::DegenerateCritical { .. }
        | CoreError::NonRealRoots { .. }
        | CoreError::NegativeWeight { .. }
        | CoreError::NodeCollision { .. }
        | CoreError::NearSpectrum { .. }
        | CoreError::AnchorMismatch { .. } => Failure::Numerical(message),
    }
}

fn persist(path: &Path, contents: &str) -> Result<(), Failure> {
    write_atomic(path, contents)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

/// `build`: run the tower, write the coefficient table and the convergence
/// report.
pub fn build(config: &RunConfig, out: &Path) -> Result<(), Failure> {
    let tower = config.tower().map_err(classify)?;
    let (j, report) = tower_iterate(&tower).map_err(classify)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    persist(&out.join("coefficients.csv"), &coefficients_csv(&j))?;
    persist(&out.join("report.json"), &to_pretty(&report))
}

#[derive(Serialize)]
struct CheckEntry {
    name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
    pass: bool,
}

fn ran(name: &'static str, residual: f64, tolerance: f64) -> CheckEntry {
    CheckEntry {
        name,
        residual: Some(residual),
        tolerance: Some(tolerance),
        skipped: None,
        pass: residual <= tolerance,
    }
}

fn skipped(name: &'static str, reason: String) -> CheckEntry {
    CheckEntry {
        name,
        residual: None,
        tolerance: None,
        skipped: Some(reason),
        pass: true,
    }
}

#[derive(Serialize)]
struct VerifyReport {
    checks: Vec<CheckEntry>,
    all_pass: bool,
}

/// Which coefficient of the operator `--perturb` corrupts.
enum Perturbation {
    Diagonal { site: i64, delta: f64 },
    Coupling { site: i64, delta: f64 },
}

fn parse_perturb(spec: &str) -> Result<Perturbation, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |why: &str| {
        Failure::Config(format!(
            "--perturb {spec:?}: {why}; expected \"<p|q>:<site>:<delta>\""
        ))
    };
    if parts.len() != 3 {
        return Err(bad("wrong number of fields"));
    }
    let site: i64 = parts[1].parse().map_err(|_| bad("site must be an integer"))?;
    let delta: f64 = parts[2].parse().map_err(|_| bad("delta must be a number"))?;
    if !delta.is_finite() {
        return Err(bad("delta must be finite"));
    }
    match parts[0] {
        "q" => Ok(Perturbation::Diagonal { site, delta }),
        "p" => Ok(Perturbation::Coupling { site, delta }),
        _ => Err(bad("coefficient must be \"p\" or \"q\"")),
    }
}

fn apply_perturbation(j: &JacobiWindow, pert: &Perturbation) -> Result<JacobiWindow, Failure> {
    let (site, outside) = match pert {
        Perturbation::Diagonal { site, .. } => (*site, !j.covers(*site, *site)),
        Perturbation::Coupling { site, .. } => (*site, *site <= j.start() || *site > j.end()),
    };
    if outside {
        return Err(Failure::Config(format!(
            "perturbation site {site} outside the computed window [{}, {}]",
            j.start(),
            j.end()
        )));
    }
    let mut q = j.q_slice().to_vec();
    let mut p = j.p_slice().to_vec();
    match pert {
        Perturbation::Diagonal { site, delta } => {
            q[(site - j.start()) as usize] += delta;
        }
        Perturbation::Coupling { site, delta } => {
            p[(site - j.start() - 1) as usize] += delta;
        }
    }
    JacobiWindow::new(j.start(), q, p).map_err(classify)
}

/// Rebuild the level-0 operator the same way `build` does, but keep it over
/// its full computable window together with the level-1 input chain, so the
/// defining identities can be checked block by block.
fn build_level_pair(
    config: &RunConfig,
    tower: &TowerConfig,
) -> Result<(JacobiWindow, Option<(JacobiWindow, ExpandingPolynomial)>), Failure> {
    if config.levels.is_empty() {
        let (j, _) = tower_iterate(tower).map_err(classify)?;
        return Ok((j, None));
    }
    let required = required_window(tower);
    let t1 = config.polynomial(0).map_err(classify)?;
    let tail_levels = config.polynomials().map_err(classify)?[1..].to_vec();
    let mut tail = TowerConfig::new(
        config.xi,
        tail_levels,
        config.digits[1..].to_vec(),
        required[1],
    )
    .map_err(classify)?;
    tail = tail.with_cf_depth(config.cf_depth()).map_err(classify)?;
    if let Some(seed) = &config.seed {
        tail = tail.with_seed(seed.q, seed.p).map_err(classify)?;
    }
    let (jt, _) = tower_iterate(&tail).map_err(classify)?;
    let opts = RenormOptions::new(config.digits[0])
        .with_cf_depth(config.cf_depth())
        .map_err(classify)?;
    let j = renorm_step(&jt, &t1, &opts).map_err(classify)?;
    Ok((j, Some((jt, t1))))
}

/// Keep the chain-rule comparison window at a bounded size so the check does
/// not dwarf the main build on large outputs.
fn chain_window((lo, hi): (i64, i64)) -> (i64, i64) {
    if hi - lo < 64 {
        (lo, hi)
    } else {
        let mid = lo + (hi - lo) / 2;
        (mid - 32, mid + 31)
    }
}

/// Trim the rebuilt operator to a block span centered on the delivered
/// output window (plus alignment margin), so the identity checks compare
/// exactly the blocks the user received — and corruption of a delivered
/// coefficient lands inside the compared grid.
fn focus_window(
    j: &JacobiWindow,
    output: (i64, i64),
    epsilon: i64,
    degree: i64,
    block_len: i64,
) -> Result<JacobiWindow, Failure> {
    if !j.covers(output.0, output.1) {
        return Err(Failure::Config(format!(
            "computed window [{}, {}] does not cover the output window [{}, {}]",
            j.start(),
            j.end(),
            output.0,
            output.1
        )));
    }
    let block_lo = (output.0 - epsilon).div_euclid(degree);
    let block_hi = (output.1 - epsilon).div_euclid(degree);
    let mid = (block_lo + block_hi + 1).div_euclid(2);
    let half = (block_len + 1) / 2;
    let ghost = degree * degree;
    let lo = (epsilon + degree * (mid - half) - ghost).min(output.0);
    let hi = (epsilon + degree * (mid + half - 1) + degree - 1 + ghost).max(output.1);
    j.section(lo.max(j.start()), hi.min(j.end())).map_err(classify)
}

/// `verify`: check every selected identity against its pinned tolerance and
/// write verify.json; any failed check is a verification failure.
pub fn verify(
    config: &RunConfig,
    out: &Path,
    checks: &[String],
    perturb: Option<&str>,
) -> Result<(), Failure> {
    let selected = parse_check_filter(checks)?;
    let perturbation = perturb.map(parse_perturb).transpose()?;
    let default_spec = VerifySpec::default();
    let spec = config.verify.as_ref().unwrap_or(&default_spec);
    let block_len = spec.block_len.unwrap_or(32);
    let z_samples: Vec<f64> = spec.z_samples.clone().unwrap_or_else(|| {
        [2.0, -2.25, 2.5, -3.0, 3.75]
            .iter()
            .map(|c| c * config.xi)
            .collect()
    });

    let tower = config.tower().map_err(classify)?;
    let (mut j, level) = build_level_pair(config, &tower)?;
    let mut entries = Vec::new();

    // Storage round-trip against the clean rebuild, before any perturbation.
    if selected.contains("roundtrip") {
        let path = out.join("coefficients.csv");
        if path.exists() {
            let stored = read_coefficients_csv(&path).map_err(Failure::Config)?;
            let (lo, hi) = config.output_window;
            let residual = stored.coef_sup_dist(&j, lo, hi).map_err(classify)?;
            entries.push(ran("coefficients_roundtrip", residual, TOL_ROUNDTRIP));
        } else {
            entries.push(skipped(
                "coefficients_roundtrip",
                "no coefficients.csv in the output directory".to_string(),
            ));
        }
    }

    if let Some((_, t1)) = &level {
        j = focus_window(
            &j,
            config.output_window,
            config.digits[0] as i64,
            t1.degree() as i64,
            block_len as i64,
        )?;
    }
    if let Some(pert) = &perturbation {
        j = apply_perturbation(&j, pert)?;
    }

    let no_levels = "tower has no levels".to_string();
    if let Some((jt, t1)) = &level {
        let eps0 = config.digits[0];
        if selected.contains("identity") {
            let residual = verify_renorm_identity(&j, jt, t1, eps0, &z_samples, block_len)
                .map_err(classify)?;
            entries.push(ran("resolvent_identity", residual, TOL_IDENTITY));
        }
        if selected.contains("polynomial") {
            let (intertwine, derivative) =
                verify_polynomial_forms(&j, jt, t1, eps0, block_len).map_err(classify)?;
            entries.push(ran("polynomial_intertwine", intertwine, TOL_POLYNOMIAL));
            entries.push(ran("polynomial_derivative", derivative, TOL_POLYNOMIAL));
        }
        if selected.contains("wronskian") {
            let depth = config.cf_depth();
            let (block_lo, block_hi) =
                central_subrange(jt.start() + depth as i64, jt.end() - 1, 0.5);
            let block_hi = block_hi.min(block_lo + 15);
            let mut worst = 0.0f64;
            for s in block_lo..=block_hi {
                let block = renorm_block(jt, s, t1, depth).map_err(classify)?;
                let window =
                    JacobiWindow::new(0, block.q.clone(), block.p_inner.clone()).map_err(classify)?;
                worst = worst.max(wronskian_check(&window, block.p_close, t1));
            }
            entries.push(ran("wronskian", worst, TOL_WRONSKIAN));
        }
    } else {
        for name in ["identity", "polynomial", "wronskian"] {
            if selected.contains(name) {
                entries.push(skipped(check_entry_name(name), no_levels.clone()));
            }
        }
    }

    if selected.contains("chain") {
        if config.levels.is_empty() {
            entries.push(skipped("chain_rule", no_levels.clone()));
        } else {
            let t1 = config.polynomial(0).map_err(classify)?;
            let (t2, eps1) = if config.levels.len() >= 2 {
                (config.polynomial(1).map_err(classify)?, config.digits[1])
            } else {
                (t1.clone(), 0)
            };
            let seed = config
                .seed
                .as_ref()
                .map(|s| (s.q, s.p))
                .unwrap_or((0.0, config.xi / 2.0));
            let window = chain_window(config.output_window);
            let residual = chain_rule_check(&t1, &t2, config.digits[0], eps1, seed, window)
                .map_err(classify)?;
            entries.push(ran("chain_rule", residual, TOL_CHAIN));
        }
    }

    if selected.contains("translation") {
        if config.digits.is_empty() {
            entries.push(skipped("translation", "tower has no digits to translate".into()));
        } else {
            match translation_consistency(&tower, 1) {
                Ok(residual) => entries.push(ran("translation", residual, TOL_TRANSLATION)),
                Err(CoreError::DigitOverflowBeyondPrefix { .. }) => entries.push(skipped(
                    "translation",
                    "digit prefix has no headroom for a unit translation".into(),
                )),
                Err(e) => return Err(classify(e)),
            }
        }
    }

    let all_pass = entries.iter().all(|entry| entry.pass);
    let report = VerifyReport {
        checks: entries,
        all_pass,
    };
    persist(&out.join("verify.json"), &to_pretty(&report))?;
    for entry in &report.checks {
        match (&entry.skipped, entry.residual) {
            (Some(reason), _) => println!("{}: skipped ({reason})", entry.name),
            (None, Some(residual)) => println!(
                "{}: {} (residual {:.3e}, tolerance {:.1e})",
                entry.name,
                if entry.pass { "pass" } else { "FAIL" },
                residual,
                entry.tolerance.unwrap_or(f64::NAN),
            ),
            (None, None) => unreachable!("entries carry a residual or a skip reason"),
        }
    }
    if all_pass {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|entry| !entry.pass)
            .map(|entry| entry.name)
            .collect();
        Err(Failure::Verification(format!(
            "failed checks: {}",
            failing.join(", ")
        )))
    }
}

/// Canonical verify.json entry name for a `--checks` token.
fn check_entry_name(token: &str) -> &'static str {
    match token {
        "identity" => "resolvent_identity",
        "polynomial" => "polynomial_forms",
        "wronskian" => "wronskian",
        "chain" => "chain_rule",
        "translation" => "translation",
        "roundtrip" => "coefficients_roundtrip",
        _ => unreachable!("tokens are validated"),
    }
}

fn parse_check_filter(tokens: &[String]) -> Result<BTreeSet<&'static str>, Failure> {
    if tokens.is_empty() {
        return Ok(CHECK_NAMES.iter().copied().collect());
    }
    let mut set = BTreeSet::new();
    for token in tokens {
        let canonical = CHECK_NAMES
            .iter()
            .find(|name| **name == token.trim())
            .ok_or_else(|| {
                Failure::Config(format!(
                    "unknown check {token:?}; valid checks: {}",
                    CHECK_NAMES.join(", ")
                ))
            })?;
        set.insert(*canonical);
    }
    Ok(set)
}

#[derive(Serialize)]
struct Coverage {
    section: (i64, i64),
    inside: usize,
    outside: usize,
}

#[derive(Serialize)]
struct BandsFile {
    xi: f64,
    reports: Vec<BandReport>,
    coverage: Coverage,
}

/// `bands`: nested spectral bands per level plus eigenvalue coverage of the
/// constructed operator against the deepest bands.
pub fn bands(config: &RunConfig, out: &Path) -> Result<(), Failure> {
    let levels = config.polynomials().map_err(classify)?;
    if levels.is_empty() {
        return Err(Failure::Config(
            "bands need at least one configured level".to_string(),
        ));
    }
    let reports = (0..=levels.len())
        .map(|level| spectrum_bands(&levels, level))
        .collect::<jacobi_renorm::Result<Vec<_>>>()
        .map_err(classify)?;
    let tower = config.tower().map_err(classify)?;
    let (j, _) = tower_iterate(&tower).map_err(classify)?;
    let deepest = reports.last().expect("at least the reference level");
    let (lo, hi) = config.output_window;
    let (inside, outside) = eigenvalue_band_coverage(&j, deepest, lo, hi).map_err(classify)?;
    let file = BandsFile {
        xi: config.xi,
        reports,
        coverage: Coverage {
            section: (lo, hi),
            inside,
            outside,
        },
    };
    persist(&out.join("bands.json"), &to_pretty(&file))
}

/// `metric`: tabulate the shift metric along the radix filtration as
/// plot-ready CSV.
pub fn metric(config: &RunConfig, out: &Path) -> Result<(), Failure> {
    let tower = config.tower().map_err(classify)?;
    let (j, _) = tower_iterate(&tower).map_err(classify)?;
    let radices: Vec<usize> = config
        .polynomials()
        .map_err(classify)?
        .iter()
        .map(|t| t.degree())
        .collect();
    let default_spec = MetricSpec::default();
    let spec = config.metric.as_ref().unwrap_or(&default_spec);
    let l_max = spec.l_max.unwrap_or(radices.len());
    let m_list = spec.m_list.clone().unwrap_or_else(|| vec![1]);
    let (lo, hi) = config.output_window;
    let section = spec.section.unwrap_or_else(|| central_subrange(lo, hi, 0.5));
    let report = padic_topology_table(&j, &radices, l_max, &m_list, section).map_err(classify)?;
    let mut csv = String::from("l,m,rho,section\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{}..{}\n",
            row.l,
            row.m,
            fmt_float(row.rho),
            section.0,
            section.1
        ));
    }
    persist(&out.join("metric.csv"), &csv)
}

/// `probe`: estimate the contraction constants of the outermost level from
/// random seed pairs.
pub fn probe(config: &RunConfig, out: &Path) -> Result<(), Failure> {
    if config.levels.is_empty() {
        return Err(Failure::Config(
            "probe needs at least one configured level".to_string(),
        ));
    }
    let t = config.polynomial(0).map_err(classify)?;
    let default_spec = ProbeSpec::default();
    let spec = config.probe.as_ref().unwrap_or(&default_spec);
    let trials = spec.trials.unwrap_or(20);
    let rng_seed = spec.rng_seed.unwrap_or(7);
    let report =
        contraction_probe(&t, trials, config.cf_depth(), rng_seed).map_err(classify)?;
    if let Some(warning) = &report.warning {
        eprintln!("warning: {warning}");
    }
    persist(&out.join("probe.json"), &to_pretty(&report))
}
