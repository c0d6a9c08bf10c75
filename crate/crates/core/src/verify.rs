//! Acceptance checks shared by the test suite and the command-line `verify` runner.
//! Each criterion collects named checks with their measured value, target and tolerance.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{polya_check_window, polya_frequency_check, polya_jpdf, spherical_transform_polya, PolyaWeight, PolynomialEnsemble};
use crate::error::{Error, Result};
use crate::mellin::{inverse_mellin, mellin_full_line, InversionConfig, MellinPoint, Support, UnivariateFunction};
use crate::montecarlo::{
    compare_density, corank1_density, corank1_project, interlaces, mc_expectation_spherical, sample_product_eigs, with_retry,
    DensityComparison, GofConfig, XSource,
};
use crate::numerics::{
    integrate_nd, rng_stream, sample_parallel, Domain, McEstimate, PositiveSpectrum, QuadratureConfig, SignedSpectrum, SimRng,
};
use crate::products::{
    inverse_vandermonde_entry, jpdf_from_kernel, ContourConfig, CoreMethod, FixedProduct, Kernel, ProductSpec, RandomProduct, RankBranch,
};
use crate::spherical::{
    embedded_spectrum, factorization_mc_lhs, factorization_rhs, inverse_spherical_phi, normalization_c, phi, phi_definition_mc, psi,
    truncated_unitary_transform, Frequency,
};

/// Largest accepted distance from a Monte Carlo mean, in standard errors.
pub const SIGMA_LIMIT: f64 = 3.0;

/// How a check compares its value with the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// |value − target| ≤ tolerance.
    Absolute,
    /// |value − target| ≤ tolerance · |target|.
    Relative,
    /// value (in standard errors) ≤ tolerance.
    Sigmas,
    /// value (a p-value) ≥ tolerance.
    PValue,
    /// A yes/no property.
    Exact,
    /// Recorded without a pass/fail decision.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn absolute(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Absolute,
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance,
            note: None,
        }
    }

    pub fn relative(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Relative,
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance * target.abs(),
            note: None,
        }
    }

    /// Relative deviation of complex values, |v − t|/|t|, reported as a value against 0.
    pub fn relative_complex(name: impl Into<String>, value: C64, target: C64, tolerance: f64) -> Self {
        let dev = (value - target).norm() / target.norm().max(f64::MIN_POSITIVE);
        let mut c = Self::absolute(name, dev, 0.0, tolerance);
        c.kind = CheckKind::Relative;
        c.note = Some(format!("value {value:.12e}, target {target:.12e}"));
        c
    }

    /// Distance in standard errors. A sample that is constant up to rounding has a
    /// roundoff-sized standard error, which is floored at 10⁻¹² of the target.
    pub fn sigmas(name: impl Into<String>, est: &McEstimate, target: C64) -> Self {
        let floor = 1e-12 * target.norm().max(est.value.norm());
        let z = McEstimate {
            value: est.value,
            stderr: est.stderr.max(floor),
        }
        .sigmas(target);
        Self {
            name: name.into(),
            kind: CheckKind::Sigmas,
            value: z,
            target: 0.0,
            tolerance: SIGMA_LIMIT,
            passed: z <= SIGMA_LIMIT,
            note: Some(format!("estimate {:.8e} ± {:.2e}, target {target:.8e}", est.value, est.stderr)),
        }
    }

    pub fn gof(name: impl Into<String>, cmp: &DensityComparison, retried: bool) -> Self {
        let p = cmp.ks.p_value.min(cmp.chi_square.p_value);
        Self {
            name: name.into(),
            kind: CheckKind::PValue,
            value: p,
            target: 1.0,
            tolerance: crate::montecarlo::THREE_SIGMA_P,
            passed: cmp.passed(),
            note: Some(format!(
                "KS D = {:.4e} (p = {:.4}), χ² = {:.2} (p = {:.4}), n = {}, seed = {}{}",
                cmp.ks.statistic,
                cmp.ks.p_value,
                cmp.chi_square.statistic,
                cmp.chi_square.p_value,
                cmp.ks.samples,
                cmp.ks.seed,
                if retried { ", second seed" } else { "" }
            )),
        }
    }

    pub fn exact(name: impl Into<String>, ok: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Exact,
            value: ok as u8 as f64,
            target: 1.0,
            tolerance: 0.0,
            passed: ok,
            note: Some(note.into()),
        }
    }

    pub fn report(name: impl Into<String>, value: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Report,
            value,
            target: f64::NAN,
            tolerance: f64::NAN,
            passed: true,
            note: Some(note.into()),
        }
    }

    fn error(name: impl Into<String>, err: &Error) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Exact,
            value: 0.0,
            target: 1.0,
            tolerance: 0.0,
            passed: false,
            note: Some(format!("error: {err}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    /// One-line summary.
    pub fn summary(&self) -> String {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        format!(
            "criterion {} [{}] {}: {}/{} checks passed in {:.1}s",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.checks.len() - failed,
            self.checks.len(),
            self.seconds
        )
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Monte Carlo sample count per comparison.
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 100_000,
        }
    }
}

impl VerifyConfig {
    /// Seed pair (first try, retry) for the `k`-th randomized comparison.
    fn seeds(&self, k: u64) -> [u64; 2] {
        let a = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
        [a, a ^ 0xA5A5_A5A5_5A5A_5A5A]
    }

    fn rng(&self, stream: u64) -> SimRng {
        rng_stream(self.seed, 1_000 + stream)
    }
}

pub const CRITERIA: [(usize, &str); 8] = [
    (1, "Haar definition of the spherical function vs closed form"),
    (2, "factorization of the group-averaged spherical function"),
    (3, "Mellin and spherical transform round trips"),
    (4, "spherical transforms of Pólya ensembles"),
    (5, "fixed x: density, bi-orthonormal system, kernel"),
    (6, "random x: transformed system and kernel"),
    (7, "co-rank-1 projection and inverse Vandermonde orthogonality"),
    (8, "shift identities, symmetries and Pólya-frequency checks"),
];

/// Runs one criterion. Errors inside a criterion become failed checks.
pub fn run_criterion(id: usize, cfg: &VerifyConfig) -> Result<CriterionReport> {
    let title = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| Error::InvalidArgument(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let mut checks = Vec::new();
    let outcome = match id {
        1 => definition_vs_closed_form(cfg, &mut checks),
        2 => factorization(cfg, &mut checks),
        3 => round_trips(cfg, &mut checks),
        4 => ensemble_transforms(cfg, &mut checks),
        5 => fixed_products(cfg, &mut checks),
        6 => random_products(cfg, &mut checks),
        7 => corank_one(cfg, &mut checks),
        _ => identities(cfg, &mut checks),
    };
    if let Err(e) = outcome {
        checks.push(Check::error("unexpected error", &e));
    }
    Ok(CriterionReport {
        id,
        title,
        passed: checks.iter().all(|c| c.passed) && !checks.is_empty(),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    })
}

/// Full report of a set of criteria.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: String,
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

pub fn run_criteria(ids: &[usize], cfg: &VerifyConfig) -> Result<VerifyReport> {
    let criteria = ids.iter().map(|id| run_criterion(*id, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        samples: cfg.samples,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}

/// Named groups of criteria.
pub fn suite(name: &str) -> Result<Vec<usize>> {
    Ok(match name {
        "core" | "all" | "acceptance" => (1..=8).collect(),
        "spherical" => vec![1, 2, 3],
        "factorization" => vec![2],
        "ensembles" => vec![4, 8],
        "product" | "products" => vec![5, 6, 7],
        "analytic" => vec![3, 8],
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected core, spherical, factorization, ensembles, products or analytic"
            )))
        }
    })
}

fn record<T>(checks: &mut Vec<Check>, name: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            checks.push(Check::error(name, &e));
            None
        }
    }
}

/// Compares an MC estimate with its target, repeating once with the second seed on failure.
fn sigma_check_with_retry<F>(name: &str, seeds: [u64; 2], target: C64, run: F) -> Result<Check>
where
    F: Fn(u64) -> Result<McEstimate>,
{
    let first = run(seeds[0])?;
    let check = Check::sigmas(name, &first, target);
    if check.passed {
        return Ok(check);
    }
    let mut again = Check::sigmas(name, &run(seeds[1])?, target);
    if let Some(n) = again.note.as_mut() {
        n.push_str(", second seed");
    }
    Ok(again)
}

fn random_spectrum(rng: &mut SimRng, n: usize, signed: bool) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let mag = rng.gen_range(0.5..2.0);
                if signed && rng.gen_bool(0.5) {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        let ok = (0..n).all(|i| (0..i).all(|j| (v[i] - v[j]).abs() > 0.1));
        if ok {
            return v;
        }
    }
}

/// Frequency with Re(s_j − s_{j+1}) ≥ 1 and Re s_n ≥ 0.
fn admissible_frequency(rng: &mut SimRng, n: usize) -> Result<Frequency> {
    let mut s = vec![C64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        let base = if j + 1 < n { s[j + 1].re + 1.0 } else { 0.0 };
        s[j] = C64::new(base + rng.gen_range(0.0..1.5), rng.gen_range(-1.0..1.0));
    }
    let l = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    Frequency::new(s, l)
}

fn definition_vs_closed_form(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = cfg.rng(1);
    let mut k = 0;
    for (n, l) in [(1usize, 1usize), (1, 2), (2, 2), (2, 3)] {
        for i in 0..5 {
            let freq = admissible_frequency(&mut rng, n)?;
            let a = random_spectrum(&mut rng, n, true);
            let x = embedded_spectrum(l, &a)?;
            let c = normalization_c(l, n, freq.s())?;
            let closed = c * phi(&freq, &SignedSpectrum::new(a.clone())?)?;
            let name = format!("n={n} l={l} draw {i}: Haar average vs C·Φ");
            let check = sigma_check_with_retry(&name, cfg.seeds(k), closed, |seed| {
                Ok(phi_definition_mc(&freq, &x, cfg.samples, seed)?.numerator)
            });
            if let Some(c) = record(checks, &name, check) {
                checks.push(c);
            }
            let name = format!("n={n} l={l} draw {i}: normalization average vs C");
            let check = sigma_check_with_retry(&name, cfg.seeds(k + 500), c, |seed| {
                Ok(phi_definition_mc(&freq, &x, cfg.samples, seed)?.denominator)
            });
            if let Some(c) = record(checks, &name, check) {
                checks.push(c);
            }
            k += 1;
        }
    }
    Ok(())
}

fn factorization(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = cfg.rng(2);
    let patterns = [(2usize, 2usize, 2usize, 1usize), (2, 2, 1, 2), (3, 2, 2, 1), (1, 3, 1, 2)];
    let mut k = 0;
    for (l, m, n1, n2) in patterns {
        for i in 0..2 {
            let r = n1.min(n2);
            let freq = admissible_frequency(&mut rng, r)?;
            let a_g = PositiveSpectrum::new(random_spectrum(&mut rng, n1, false))?;
            let a_x = SignedSpectrum::new(random_spectrum(&mut rng, n2, true))?;
            let rhs = factorization_rhs(&freq, l, m, &a_g, &a_x)?;
            let name = format!("l={l} m={m} n₁={n1} n₂={n2} draw {i}");
            let check = sigma_check_with_retry(&name, cfg.seeds(100 + k), rhs, |seed| {
                factorization_mc_lhs(&freq, l, m, &a_g, &a_x, cfg.samples, seed)
            });
            if let Some(c) = record(checks, &name, check) {
                checks.push(c);
            }
            k += 1;
        }
    }
    Ok(())
}

type RoundTripCase = (&'static str, UnivariateFunction, fn(f64) -> f64);

fn round_trips(_cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let qc = QuadratureConfig::with_tol(1e-13, 1e-11);
    let inv = InversionConfig::default();
    // (label, function, pointwise values for the comparison)
    let weights: [RoundTripCase; 3] = [
        (
            "one-sided exponential",
            UnivariateFunction::new(|x| if x > 0.0 { (-x).exp() } else { 0.0 }, Support::FullLine).with_breaks(vec![0.0]),
            |x| if x > 0.0 { (-x).exp() } else { 0.0 },
        ),
        (
            "two-sided exponential",
            UnivariateFunction::new(|x: f64| (-x.abs()).exp() / 2.0, Support::FullLine).with_breaks(vec![0.0]),
            |x: f64| (-x.abs()).exp() / 2.0,
        ),
        (
            "gaussian",
            UnivariateFunction::new(
                move |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
                Support::FullLine,
            ),
            |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        ),
    ];
    for (name, f, exact) in &weights {
        for x in [0.5, 1.0, 2.0, -1.0] {
            let label = format!("{name}: inverse Mellin of the numerical transform at x = {x}");
            let est = inverse_mellin(|p: MellinPoint| mellin_full_line(f, p, &qc), x, &inv);
            if let Some(est) = record(checks, &label, est) {
                checks.push(Check::absolute(label, est.value, exact(x), 1e-4));
            }
        }
    }
    let g = PolyaWeight::ginibre(0.0)?;
    let transform = |f: &Frequency| spherical_transform_polya(&g, f.s());
    for a in [[0.5, 1.5], [1.0, 2.0], [0.3, 0.9], [1.2, 3.0], [2.0, 2.5]] {
        let label = format!("n=2 Ginibre density recovered at a = ({}, {})", a[0], a[1]);
        let want = polya_jpdf(&g, &a)?;
        if let Some(est) = record(checks, &label, inverse_spherical_phi(transform, &a, &inv)) {
            checks.push(Check::relative(label, est.value, want, 1e-3));
        }
    }
    Ok(())
}

/// (label, weight, n, Some((l, m, M)) for truncated unitary blocks)
type EnsembleCase = (String, PolyaWeight, usize, Option<(usize, usize, usize)>);

fn ensemble_transforms(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = cfg.rng(4);
    let mut k = 0;
    let cases: Vec<EnsembleCase> = vec![
        ("Ginibre".into(), PolyaWeight::ginibre(0.0)?, 1, None),
        ("Ginibre".into(), PolyaWeight::ginibre(0.0)?, 2, None),
        (
            "truncated unitary 1×2 of U(3)".into(),
            PolyaWeight::projection(3, 2, 1)?,
            1,
            Some((1, 2, 3)),
        ),
        (
            "truncated unitary 2×3 of U(5)".into(),
            PolyaWeight::projection(5, 3, 2)?,
            2,
            Some((2, 3, 5)),
        ),
    ];
    for (label, w, n, block) in cases {
        let ens = PolynomialEnsemble::from_polya(&w, n)?;
        for i in 0..5 {
            let s: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let product = spherical_transform_polya(&w, &s)?;
            let det_form = ens.spherical_transform(&s, &vec![0; n])?;
            checks.push(Check::relative_complex(
                format!("{label} n={n} draw {i}: product vs determinant form"),
                det_form,
                product,
                1e-10,
            ));
            if let Some((l, m, big)) = block {
                checks.push(Check::relative_complex(
                    format!("{label} n={n} draw {i}: product form vs block constant"),
                    truncated_unitary_transform(l, m, big, &s)?,
                    product,
                    1e-10,
                ));
            }
            let name = format!("{label} n={n} draw {i}: Monte Carlo average of Ψ");
            let check = sigma_check_with_retry(&name, cfg.seeds(200 + k), product, |seed| {
                mc_expectation_spherical(&w, n, n, n, &s, cfg.samples, seed)
            });
            if let Some(c) = record(checks, &name, check) {
                checks.push(c);
            }
            k += 1;
        }
    }
    Ok(())
}

fn level_density_check(
    name: &str,
    spec: &ProductSpec,
    x: &XSource,
    kernel: &Kernel,
    seeds: [u64; 2],
    samples: usize,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let r = spec.rank() as f64;
    let density = |t: f64| Ok(kernel.level_density(t)? / r);
    let mut breaks = kernel.breaks().to_vec();
    breaks.push(0.0);
    let (cmp, retried) = with_retry(seeds, |seed| {
        let batch = sample_product_eigs(spec, x, samples, seed)?;
        compare_density(&batch.pooled(), &density, &breaks, seed, &GofConfig::default())
    })?;
    checks.push(Check::gof(format!("{name}: sampled eigenvalues vs K(ã,ã)/r"), &cmp, retried));
    Ok(())
}

fn normalization_of(jpdf: &(dyn Fn(&[f64]) -> Result<f64> + Sync), r: usize, breaks: &[f64]) -> Result<f64> {
    let err = std::sync::Mutex::new(None);
    let v = integrate_nd(
        &|x: &[f64]| match jpdf(x) {
            Ok(v) => v,
            Err(e) => {
                err.lock().unwrap().get_or_insert(e);
                0.0
            }
        },
        r,
        Domain::FullLine,
        breaks,
        &QuadratureConfig::with_tol(1e-10, 1e-8),
    )?;
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    Ok(v)
}

fn fixed_products(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let qc = QuadratureConfig::with_tol(1e-12, 1e-10);
    let g = PolyaWeight::ginibre(0.0)?;
    let cases: Vec<(&str, ProductSpec, Vec<f64>)> = vec![
        (
            "Ginibre 2×2, a = (−1, 2)",
            ProductSpec::new(2, 2, 2, 2, g.clone())?,
            vec![-1.0, 2.0],
        ),
        (
            "truncated unitary 2×2 of U(4), a = (1, 2)",
            ProductSpec::new(2, 2, 2, 2, PolyaWeight::Projection { p: 0, q: 2 })?,
            vec![1.0, 2.0],
        ),
        ("Ginibre 3×2 rank 2, a = (1.5)", ProductSpec::new(3, 2, 2, 1, g.clone())?, vec![1.5]),
        ("Ginibre 1×2, a = (1, 2)", ProductSpec::new(1, 2, 1, 2, g.clone())?, vec![1.0, 2.0]),
        (
            "Ginibre 2×3 rank 2, a = (−1, 1, 2)",
            ProductSpec::new(2, 3, 2, 3, g.clone())?,
            vec![-1.0, 1.0, 2.0],
        ),
    ];
    for (k, (label, spec, a)) in cases.into_iter().enumerate() {
        let branch = spec.natural_branch();
        let label = format!("{label} ({branch:?})");
        let fp = FixedProduct::new(spec.clone(), &a, branch, CoreMethod::Auto, &qc)?;
        let r = spec.rank();
        let mut breaks = vec![0.0];
        breaks.extend(a.iter().flat_map(|v| fp.tilde_weight().core().breaks().iter().map(move |b| b * v)));
        let mass = normalization_of(&|x: &[f64]| fp.jpdf(x), r, &breaks);
        if let Some(mass) = record(checks, &label, mass) {
            checks.push(Check::absolute(format!("{label}: density integrates to 1"), mass, 1.0, 1e-5));
        }
        let sys = fp.biorth()?;
        checks.push(Check::absolute(
            format!("{label}: max |∫p_b q_c − δ_bc|"),
            sys.biorthogonality_defect(&qc)?,
            0.0,
            1e-6,
        ));
        let kernel = sys.kernel();
        let x = XSource::Fixed { a: a.clone() };
        let probe = sample_product_eigs(&spec, &x, 4, cfg.seeds(300 + k as u64)[0])?;
        for (i, pt) in probe.eigenvalues.iter().take(3).enumerate() {
            checks.push(Check::relative(
                format!("{label}: det[K]/r! vs density at sampled point {i}"),
                jpdf_from_kernel(&kernel, pt)?,
                fp.jpdf(pt)?,
                1e-8,
            ));
        }
        let negatives = a.iter().filter(|v| **v < 0.0).count();
        if negatives > 0 && spec.n1 >= spec.n2 {
            let batch = sample_product_eigs(&spec, &x, cfg.samples.min(20_000), cfg.seeds(350 + k as u64)[0])?;
            let kept = batch
                .eigenvalues
                .iter()
                .all(|v| v.iter().filter(|t| **t < 0.0).count() == negatives);
            checks.push(Check::exact(
                format!("{label}: every sample keeps {negatives} negative eigenvalue(s)"),
                kept,
                format!("{} samples", batch.count),
            ));
        }
        if spec.n1 < spec.n2 {
            let batch = sample_product_eigs(&spec, &x, cfg.samples.min(20_000), cfg.seeds(360 + k as u64)[0])?;
            checks.push(Check::exact(
                format!("{label}: every sample has rank {r}"),
                batch.rank_defects == 0,
                format!("{} of {} samples with another rank", batch.rank_defects, batch.count),
            ));
        }
        level_density_check(&label, &spec, &x, &kernel, cfg.seeds(400 + k as u64), cfg.samples, checks)?;
    }
    Ok(())
}

fn random_products(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let qc = QuadratureConfig::with_tol(1e-12, 1e-10);
    let g = PolyaWeight::ginibre(0.0)?;
    let cases: Vec<(&str, ProductSpec, XSource)> = vec![
        ("Ginibre 2×2 × GUE", ProductSpec::new(2, 2, 2, 2, g.clone())?, XSource::Gue),
        (
            "truncated unitary 1×2 of U(3) × GUE",
            ProductSpec::new(1, 2, 1, 2, PolyaWeight::Projection { p: 1, q: 1 })?,
            XSource::Gue,
        ),
        (
            "Ginibre 2×2 × Wishart",
            ProductSpec::new(2, 2, 2, 2, g.clone())?,
            XSource::Wishart {
                omega: g.clone(),
                sign: 1.0,
            },
        ),
        (
            "Ginibre 2×2 rank 1 × negative Wishart",
            ProductSpec::new(2, 2, 1, 2, g.clone())?,
            XSource::Wishart {
                omega: g.clone(),
                sign: -1.0,
            },
        ),
    ];
    for (k, (label, spec, x)) in cases.into_iter().enumerate() {
        let branch = spec.natural_branch();
        let label = format!("{label} ({branch:?})");
        let ens = x.ensemble(spec.n2)?.expect("random source");
        let rp = RandomProduct::from_ensemble(spec.clone(), &ens, branch, CoreMethod::Auto, &qc)?;
        let probe = sample_product_eigs(&spec, &x, 4, cfg.seeds(500 + k as u64)[0])?;
        let sys = rp.transform_biorth()?;
        let direct = sys.kernel();
        let via = rp.transform_kernel(&rp.source().kernel(), ContourConfig::default())?;
        for (i, pt) in probe.eigenvalues.iter().take(3).enumerate() {
            let wf = rp.jpdf_weights(pt)?;
            let bf = rp.jpdf_biorth(pt)?;
            checks.push(Check::relative(
                format!("{label}: weight form vs bi-orthonormal form at sampled point {i}"),
                bf,
                wf,
                1e-8,
            ));
            checks.push(Check::relative(
                format!("{label}: det[K̃]/r! vs density at sampled point {i}"),
                jpdf_from_kernel(&direct, pt)?,
                bf,
                1e-8,
            ));
            let (y, z) = (pt[0], *pt.last().unwrap());
            for (u, v) in [(y, z), (z, y), (y, y)] {
                let a = direct.eval(u, v)?;
                let b = via.eval(u, v)?;
                checks.push(Check::absolute(
                    format!("{label}: contour kernel vs transformed-system kernel at ({u:.4}, {v:.4})"),
                    (a - b).abs() / a.abs().max(1.0),
                    0.0,
                    1e-6,
                ));
            }
        }
        checks.push(Check::absolute(
            format!("{label}: transformed system max |∫p̃_b q̃_c − δ_bc|"),
            sys.biorthogonality_defect(&qc)?,
            0.0,
            1e-6,
        ));
        level_density_check(&label, &spec, &x, &direct, cfg.seeds(600 + k as u64), cfg.samples, checks)?;
    }
    // M = l: g is a Haar unitary, so g x g* has the statistics of x
    let spec = ProductSpec::new(2, 2, 2, 2, PolyaWeight::DiracUnit)?;
    let ens = PolynomialEnsemble::gaussian_hermitian(2)?;
    let rp = RandomProduct::from_ensemble(spec, &ens, RankBranch::Preserving, CoreMethod::Auto, &qc)?;
    let src = rp.source().kernel();
    let k = rp.transform_kernel(&src, ContourConfig::default())?;
    let kb = rp.transform_biorth()?.kernel();
    for (u, v) in [(0.7, 0.7), (-1.3, 0.4), (2.0, -0.5), (-0.2, -0.2)] {
        checks.push(Check::absolute(
            format!("inclusion: transformed kernel equals the kernel of x at ({u}, {v})"),
            k.eval(u, v)? - src.eval(u, v)?,
            0.0,
            1e-8,
        ));
        checks.push(Check::absolute(
            format!("inclusion: transformed system kernel equals the kernel of x at ({u}, {v})"),
            kb.eval(u, v)? - src.eval(u, v)?,
            0.0,
            1e-8,
        ));
    }
    for pt in [[0.3, -1.1], [1.4, 0.2]] {
        checks.push(Check::relative(
            format!("inclusion: density at ({}, {}) equals that of x", pt[0], pt[1]),
            rp.jpdf_weights(&pt)?,
            ens.density(&pt)?,
            1e-8,
        ));
    }
    Ok(())
}

fn corank_one(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let parent = [-1.5, -0.2, 0.8, 2.4];
    let seeds = cfg.seeds(700);
    let all: Vec<bool> = sample_parallel(cfg.samples.min(20_000), seeds[0], |rng| {
        corank1_project(&parent, rng).map(|b| interlaces(&parent, &b)).unwrap_or(false)
    });
    checks.push(Check::exact(
        "l=4: every compressed spectrum interlaces the parent",
        all.iter().all(|v| *v),
        format!("{} samples", all.len()),
    ));
    let pair = [1.0, 3.0];
    let density = |t: f64| corank1_density(&pair, &[t]);
    let (cmp, retried) = with_retry(cfg.seeds(701), |seed| {
        let xs: Vec<f64> = sample_parallel(cfg.samples, seed, |rng| corank1_project(&pair, rng).map(|v| v[0]))
            .into_iter()
            .collect::<Result<_>>()?;
        compare_density(&xs, &density, &pair, seed, &GofConfig::default())
    })?;
    checks.push(Check::gof("l=2: compressed eigenvalue vs uniform density", &cmp, retried));
    let triple = [0.0, 1.0, 2.5];
    let mass = integrate_nd(
        &|x: &[f64]| corank1_density(&triple, x).unwrap_or(f64::NAN),
        2,
        Domain::Interval(triple[0], triple[2]),
        &[triple[1]],
        &QuadratureConfig::with_tol(1e-12, 1e-10),
    )?;
    checks.push(Check::absolute("l=3: density integrates to 1", mass, 1.0, 1e-6));
    let mut rng = cfg.rng(7);
    for draw in 0..3 {
        let a = random_spectrum(&mut rng, 3, true);
        let n = a.len();
        let mut worst = 0.0f64;
        for b in 0..n {
            for bp in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += a[c].powi(b as i32) * inverse_vandermonde_entry(&a, c, n - 1 - bp)?;
                }
                worst = worst.max((s - if b == bp { 1.0 } else { 0.0 }).abs());
            }
        }
        checks.push(Check::absolute(
            format!("n₂=3 draw {draw}: max |Σ_c a_c^b e_(n₂−1−b′)(−a_≠c)/∏(a_c−a_h) − δ|"),
            worst,
            0.0,
            1e-10,
        ));
    }
    Ok(())
}

fn identities(cfg: &VerifyConfig, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = cfg.rng(8);
    let mut worst_norm = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=4usize);
        let a = random_spectrum(&mut rng, n, true);
        let pos: Vec<f64> = a.iter().map(|v| v.abs()).collect();
        let std = Frequency::standard(n);
        worst_norm = worst_norm.max((phi(&std, &SignedSpectrum::new(a)?)? - 1.0).norm());
        worst_norm = worst_norm.max((psi(std.s(), &PositiveSpectrum::new(pos)?)? - 1.0).norm());
    }
    checks.push(Check::absolute(
        "Φ(s⁽ⁿ⁾, L⁽ⁿ⁾; a) = Ψ(s⁽ⁿ⁾; a) = 1 on 100 spectra, n ≤ 4",
        worst_norm,
        0.0,
        1e-10,
    ));
    let mut worst_psi = 0.0f64;
    let mut worst_phi = 0.0f64;
    let mut worst_perm = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=3usize);
        let freq = admissible_frequency(&mut rng, n)?;
        let mu = C64::new(rng.gen_range(-0.5..1.0), rng.gen_range(-1.0..1.0));
        let j = rng.gen_range(0..2i64);
        let a = random_spectrum(&mut rng, n, true);
        let pos: Vec<f64> = a.iter().map(|v| v.abs()).collect();
        let prod_abs: f64 = pos.iter().product();
        let sign: f64 = a.iter().map(|v| v.signum()).product();
        let ps = PositiveSpectrum::new(pos.clone())?;
        let lhs = psi(freq.shifted(mu, 0).s(), &ps)?;
        let rhs = (mu * prod_abs.ln()).exp() * psi(freq.s(), &ps)?;
        worst_psi = worst_psi.max((lhs - rhs).norm() / rhs.norm());
        let ss = SignedSpectrum::new(a.clone())?;
        let lhs = phi(&freq.shifted(mu, j), &ss)?;
        let rhs = (mu * prod_abs.ln()).exp() * sign.powi(j as i32) * phi(&freq, &ss)?;
        worst_phi = worst_phi.max((lhs - rhs).norm() / rhs.norm());
        // reverse the (s_b, L_b) pairs and rotate the eigenvalues
        let rev = Frequency::new(freq.s().iter().rev().copied().collect(), freq.l().iter().rev().copied().collect())?;
        let mut rot = a.clone();
        rot.rotate_left(1);
        let base = crate::spherical::phi_slices(freq.s(), freq.l(), &a)?;
        let permuted = crate::spherical::phi_slices(rev.s(), rev.l(), &rot)?;
        worst_perm = worst_perm.max((base - permuted).norm() / base.norm());
        let base = crate::spherical::psi_slices(freq.s(), &pos)?;
        let mut prot = pos.clone();
        prot.rotate_left(1);
        let permuted = crate::spherical::psi_slices(rev.s(), &prot)?;
        worst_perm = worst_perm.max((base - permuted).norm() / base.norm());
    }
    checks.push(Check::absolute("Ψ(s + μ1; a) = (∏a)^μ Ψ(s; a)", worst_psi, 0.0, 1e-10));
    checks.push(Check::absolute(
        "Φ(s + μ1, L + j1; a) = sign(∏a)^j |∏a|^μ Φ(s, L; a)",
        worst_phi,
        0.0,
        1e-10,
    ));
    checks.push(Check::absolute(
        "Φ and Ψ invariant under permutations of (s_b, L_b) and of a_c",
        worst_perm,
        0.0,
        1e-10,
    ));
    let catalog: Vec<(PolyaWeight, usize)> = vec![
        (PolyaWeight::ginibre(0.0)?, 3),
        (PolyaWeight::ginibre(1.5)?, 3),
        (PolyaWeight::jacobi(0.0, 1.0, 2)?, 2),
        (PolyaWeight::jacobi(0.5, 1.5, 3)?, 3),
        (PolyaWeight::cauchy_lorentz(0.5, 1.0, 2)?, 3),
        (PolyaWeight::muttalib_borodin(0.5, 2.0)?, 3),
        (PolyaWeight::log_normal(0.3)?, 3),
        (PolyaWeight::projection(5, 3, 1)?, 3),
    ];
    for (i, (w, order)) in catalog.iter().enumerate() {
        let rep = polya_frequency_check(|a| w.eval(a), *order, 200, polya_check_window(w), cfg.seed.wrapping_add(i as u64));
        let mut c = Check::absolute(
            format!("{} {:?}: Pólya-frequency determinants up to order {order}", w.name(), w),
            rep.worst_margin.min(0.0),
            0.0,
            1e-12,
        );
        c.note = Some(format!(
            "worst normalized margin {:.3e} at order {}",
            rep.worst_margin, rep.worst_order
        ));
        c.passed = rep.passed;
        checks.push(c);
    }
    let rep = polya_frequency_check(|a: f64| (3.0 * a.ln()).sin().abs() + 0.01, 2, 200, (-2.5, 2.5), cfg.seed);
    checks.push(Check::report(
        "|sin(3 ln a)| + 0.01 is not Pólya frequency",
        rep.worst_margin,
        format!(
            "negative determinant {} at order {}",
            if rep.passed { "not found" } else { "found" },
            rep.worst_order
        ),
    ));
    Ok(())
}

/// One-point density from a random-x product, exposed for callers that need it.
pub fn random_level_density(spec: &ProductSpec, x: &XSource, qc: &QuadratureConfig) -> Result<Kernel> {
    let ens = x
        .ensemble(spec.n2)?
        .ok_or_else(|| Error::InvalidArgument("fixed x has no ensemble".into()))?;
    let rp = RandomProduct::from_ensemble(spec.clone(), &ens, spec.natural_branch(), CoreMethod::Auto, qc)?;
    Ok(rp.transform_biorth()?.kernel())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors() {
        assert!(Check::absolute("a", 1.0, 1.0 + 1e-9, 1e-8).passed);
        assert!(!Check::relative("r", 1.1, 1.0, 1e-2).passed);
        let est = McEstimate {
            value: C64::new(1.0, 0.0),
            stderr: 0.1,
        };
        assert!(Check::sigmas("s", &est, C64::new(1.2, 0.0)).passed);
        assert!(!Check::sigmas("s", &est, C64::new(1.5, 0.0)).passed);
        assert!(Check::report("x", -1.0, "n").passed);
    }

    #[test]
    fn suites_and_seeds() {
        assert_eq!(suite("core").unwrap(), (1..=8).collect::<Vec<_>>());
        assert!(suite("nope").is_err());
        let cfg = VerifyConfig::default();
        assert_ne!(cfg.seeds(1)[0], cfg.seeds(2)[0]);
        assert_ne!(cfg.seeds(1)[0], cfg.seeds(1)[1]);
        assert!(run_criterion(9, &cfg).is_err());
    }

    #[test]
    fn analytic_criteria_pass() {
        let cfg = VerifyConfig { seed: 7, samples: 2000 };
        let rep = run_criterion(8, &cfg).unwrap();
        assert!(rep.passed, "{:#?}", rep.failures());
        let rep = run_criterion(7, &cfg).unwrap();
        assert!(rep.passed, "{:#?}", rep.failures());
    }
}
