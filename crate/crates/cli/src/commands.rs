use harmonic_rmt::ensembles::spherical_transform_polya;
use harmonic_rmt::mellin::{mellin_half_line, Support, UnivariateFunction};
use harmonic_rmt::montecarlo::{sample_product_eigs, XSource};
use harmonic_rmt::numerics::QuadratureConfig;
use harmonic_rmt::products::{FixedProduct, Kernel, RandomProduct};
use harmonic_rmt::spherical::{normalization_c, phi_slices, psi_slices};
use harmonic_rmt::verify::{run_criteria, suite, VerifyConfig};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{format_complex, load_spec, load_weight, SpecFile};
use crate::output::{write_json, Csv};
use crate::{CliError, GridArgs, KernelArgs, SampleArgs, SpecArgs, SphericalArgs, TransformArgs, VerifyArgs};

pub fn spherical(args: SphericalArgs) -> Result<(), CliError> {
    let s = &args.s;
    if s.is_empty() {
        return Err(CliError::Usage("--s must list at least one frequency".into()));
    }
    let need_a = || {
        args.a
            .clone()
            .ok_or_else(|| CliError::Usage("--a is required for --phi and --psi".into()))
    };
    let value = if args.which.phi {
        let a = need_a()?;
        let l = args.parities.clone().unwrap_or_else(|| vec![0; s.len()]);
        phi_slices(s, &l, &a)?
    } else if args.which.psi {
        if args.parities.is_some() {
            return Err(CliError::Usage("--L applies to --phi only".into()));
        }
        psi_slices(s, &need_a()?)?
    } else {
        let l = args.l.ok_or_else(|| CliError::Usage("--l is required for --c".into()))?;
        normalization_c(l, s.len(), s)?
    };
    println!("{}", format_complex(value));
    Ok(())
}

pub fn transform(args: TransformArgs) -> Result<(), CliError> {
    let w = load_weight(&args.weight)?;
    let weight_json = serde_json::to_string(&w).map_err(|e| CliError::Failure(e.to_string()))?;
    if args.s.is_empty() {
        return Err(CliError::Usage("--s must list at least one argument".into()));
    }
    let meta = |what: &str| {
        vec![
            ("command", "transform".to_string()),
            ("seed", args.seed.to_string()),
            ("weight", weight_json.clone()),
            ("quantity", what.to_string()),
        ]
    };
    if args.ensemble {
        let v = spherical_transform_polya(&w, &args.s)?;
        let mut csv = Csv::new(
            &args.out,
            &meta("spherical transform of the n-point Pólya ensemble at s"),
            &["re", "im"],
        )?;
        csv.row(&[v.re, v.im])?;
        return csv.finish();
    }
    let mut columns = vec!["s_re", "s_im", "mellin_re", "mellin_im"];
    let quad = if args.check {
        if w.is_distributional() {
            return Err(CliError::Usage(format!("--check: the {} weight has no pointwise values", w.name())));
        }
        columns.extend(["quadrature_re", "quadrature_im"]);
        let wc = w.clone();
        Some(UnivariateFunction::new(move |a| wc.eval(a), Support::PositiveAxis).with_breaks(w.breaks()))
    } else {
        None
    };
    let cfg = QuadratureConfig::default();
    let mut csv = Csv::new(&args.out, &meta("Mellin transform ∫₀^∞ a^{s−1} ω(a) da"), &columns)?;
    for s in &args.s {
        let m = w.mellin(*s);
        let mut row = vec![s.re, s.im, m.re, m.im];
        if let Some(f) = &quad {
            let q = mellin_half_line(f, *s, &cfg)?;
            row.extend([q.re, q.im]);
        }
        csv.row(&row)?;
    }
    csv.finish()
}

enum Model {
    Fixed(FixedProduct),
    Random(RandomProduct),
}

struct Loaded {
    spec: SpecFile,
    model: Model,
    kernel: Kernel,
}

impl Loaded {
    fn new(args: &SpecArgs) -> Result<Self, CliError> {
        let spec = load_spec(&args.spec)?;
        let qc = spec.quadrature(args.abs_tol, args.rel_tol)?;
        let (branch, method) = (spec.branch(), spec.method);
        let model = match &spec.x {
            XSource::Fixed { a } => Model::Fixed(FixedProduct::new(spec.product.clone(), a, branch, method, &qc)?),
            other => {
                let ens = other
                    .ensemble(spec.product.n2)?
                    .ok_or_else(|| CliError::Failure("random x without an ensemble".into()))?;
                Model::Random(RandomProduct::from_ensemble(spec.product.clone(), &ens, branch, method, &qc)?)
            }
        };
        let kernel = match &model {
            Model::Fixed(fp) => fp.kernel()?,
            Model::Random(rp) => rp.transform_biorth()?.kernel(),
        };
        Ok(Self { spec, model, kernel })
    }

    fn rank(&self) -> usize {
        self.kernel.rank()
    }

    fn meta(&self, command: &str, seed: u64) -> Result<Vec<(&'static str, String)>, CliError> {
        let echo = serde_json::to_string(&self.spec).map_err(|e| CliError::Failure(e.to_string()))?;
        Ok(vec![
            ("command", command.to_string()),
            ("seed", seed.to_string()),
            ("spec", echo),
            ("branch", format!("{:?}", self.spec.branch()).to_lowercase()),
            ("rank", self.rank().to_string()),
        ])
    }

    fn joint(&self, at: &[f64]) -> Result<f64, CliError> {
        Ok(match &self.model {
            Model::Fixed(fp) => fp.jpdf(at)?,
            Model::Random(rp) => rp.jpdf_biorth(at)?,
        })
    }
}

fn labels(prefix: &str, r: usize) -> Vec<String> {
    (1..=r).map(|j| format!("{prefix}{j}")).collect()
}

pub fn jpdf(args: GridArgs) -> Result<(), CliError> {
    let loaded = Loaded::new(&args.spec)?;
    let r = loaded.rank();
    let mut meta = loaded.meta("jpdf", args.spec.seed)?;
    if let Some(at) = &args.at {
        if at.len() != r {
            return Err(CliError::Usage(format!("--at needs {r} values, got {}", at.len())));
        }
        meta.push(("quantity", "joint density of the nonzero eigenvalues on unordered ℝ^r".into()));
        let v = loaded.joint(at)?;
        let mut cols = labels("a", r);
        cols.push("density".into());
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&args.spec.out, &meta, &cols)?;
        let mut row = at.clone();
        row.push(v);
        csv.row(&row)?;
        return csv.finish();
    }
    let grid = args.grid.expect("clap requires --grid without --at");
    meta.push((
        "quantity",
        "one-point density K(a, a)/r of the nonzero eigenvalues; a = 0 is a null set and reported as 0".into(),
    ));
    let xs = grid.values();
    let ys = xs
        .par_iter()
        .map(|x| loaded.kernel.level_density(*x).map(|k| k / r as f64))
        .collect::<harmonic_rmt::Result<Vec<f64>>>()?;
    let mut csv = Csv::new(&args.spec.out, &meta, &["a", "density"])?;
    for (x, y) in xs.iter().zip(&ys) {
        csv.row(&[*x, *y])?;
    }
    csv.finish()
}

pub fn kernel(args: KernelArgs) -> Result<(), CliError> {
    let loaded = Loaded::new(&args.spec)?;
    let mut meta = loaded.meta("kernel", args.spec.seed)?;
    meta.push(("quantity", "correlation kernel K(a1, a2)".into()));
    let xs = args.grid.values();
    let ys = args.grid2.unwrap_or(args.grid).values();
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|x| ys.iter().map(move |y| (*x, *y))).collect();
    let ks = pairs
        .par_iter()
        .map(|(x, y)| loaded.kernel.eval(*x, *y))
        .collect::<harmonic_rmt::Result<Vec<f64>>>()?;
    let mut csv = Csv::new(&args.spec.out, &meta, &["a1", "a2", "kernel"])?;
    for ((x, y), k) in pairs.iter().zip(&ks) {
        csv.row(&[*x, *y, *k])?;
    }
    csv.finish()
}

pub fn sample(args: SampleArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let batch = sample_product_eigs(&spec.product, &spec.x, args.count, args.seed)?;
    let echo = serde_json::to_string(&spec).map_err(|e| CliError::Failure(e.to_string()))?;
    let r = spec.product.rank();
    let meta = vec![
        ("command", "sample".to_string()),
        ("seed", args.seed.to_string()),
        ("spec", echo),
        ("count", batch.count.to_string()),
        ("rank_defects", batch.rank_defects.to_string()),
        ("quantity", "nonzero eigenvalues of g x g*, ascending, one sample per row".into()),
    ];
    let cols = labels("a", r);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&args.out, &meta, &cols)?;
    for e in &batch.eigenvalues {
        csv.row(e)?;
    }
    csv.finish()
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("seconds");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let ids = match &args.criteria {
        Some(ids) if !ids.is_empty() => ids.clone(),
        Some(_) => return Err(CliError::Usage("--criteria is empty".into())),
        None => suite(&args.suite).map_err(|e| CliError::Usage(format!("--suite: {e}")))?,
    };
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let cfg = VerifyConfig {
        seed: args.seed,
        samples: args.samples,
    };
    let report = run_criteria(&ids, &cfg)?;
    for c in &report.criteria {
        eprintln!("{}", c.summary());
    }
    let mut json = serde_json::to_value(&report).map_err(|e| CliError::Failure(e.to_string()))?;
    if !args.timings {
        strip_timings(&mut json);
    }
    if let Value::Object(map) = &mut json {
        map.insert("suite".into(), Value::String(args.suite.clone()));
    }
    write_json(&args.out, &json)?;
    if report.passed {
        Ok(())
    } else {
        let failed = report.criteria.iter().filter(|c| !c.passed).count();
        Err(CliError::Failure(format!("{failed} of {} criteria failed", report.criteria.len())))
    }
}
