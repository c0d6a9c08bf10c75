//! Pólya weights with closed-form Mellin transforms and exact (−a∂)^k recurrences,
//! Pólya and polynomial ensembles with their spherical transforms, Pólya-frequency
//! checks, eigenvalue measure constants and matrix samplers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mellin::MellinPoint;
use crate::numerics::det::log_det_real;
use crate::numerics::special::{factorial, gamma, ln_factorial, superfactorial};
use crate::numerics::{haar_unitary, rng_stream, vandermonde, ComplexMatrix, SimRng};
use crate::spherical::det_over_vandermonde;

/// Catalog of Pólya weights ω on ℝ₊.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolyaWeight {
    /// a^ν e^{−a}
    Ginibre { nu: f64 },
    /// a^ν (1−a)^{μ+n−1} on [0, 1]
    Jacobi { nu: f64, mu: f64, n: usize },
    /// a^ν (1+a)^{−(μ+n)}
    CauchyLorentz { nu: f64, mu: f64, n: usize },
    /// a^ν e^{−a^θ}
    MuttalibBorodin { nu: f64, theta: f64 },
    /// a^ν e^{−(ln a)²}
    LogNormal { nu: f64 },
    /// q a^p (1−a)^{q−1} on [0, 1]; δ(a − 1) when q = 0
    Projection { p: usize, q: usize },
    /// δ(a − 1)
    DiracUnit,
}

/// (coefficient, first exponent, second exponent) of one term of (−a∂)^k ω.
type Term = (f64, f64, f64);

impl PolyaWeight {
    pub fn ginibre(nu: f64) -> Result<Self> {
        Self::Ginibre { nu }.validated()
    }

    pub fn jacobi(nu: f64, mu: f64, n: usize) -> Result<Self> {
        Self::Jacobi { nu, mu, n }.validated()
    }

    pub fn cauchy_lorentz(nu: f64, mu: f64, n: usize) -> Result<Self> {
        Self::CauchyLorentz { nu, mu, n }.validated()
    }

    pub fn muttalib_borodin(nu: f64, theta: f64) -> Result<Self> {
        Self::MuttalibBorodin { nu, theta }.validated()
    }

    pub fn log_normal(nu: f64) -> Result<Self> {
        Self::LogNormal { nu }.validated()
    }

    /// Weight of the squared singular values of an l×m sub-block of a Haar
    /// unitary in U(M): ω^{(m−l)}_{M−m}.
    pub fn projection(big: usize, m: usize, l: usize) -> Result<Self> {
        if l > m || m > big {
            return Err(Error::InvalidArgument(format!(
                "projection weight needs l ≤ m ≤ M, got {l}, {m}, {big}"
            )));
        }
        Ok(Self::Projection { p: m - l, q: big - m })
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            Self::Ginibre { nu } | Self::LogNormal { nu } if !(nu > -1.0) || !nu.is_finite() => bad(format!("ν = {nu} must exceed −1")),
            Self::Jacobi { nu, mu, n } | Self::CauchyLorentz { nu, mu, n } => {
                if !(nu > -1.0) || !nu.is_finite() {
                    bad(format!("ν = {nu} must exceed −1"))
                } else if !(mu > 0.0) || !mu.is_finite() {
                    bad(format!("μ = {mu} must be positive"))
                } else if n == 0 {
                    bad("rank n must be positive".into())
                } else {
                    Ok(())
                }
            }
            Self::MuttalibBorodin { nu, theta } => {
                if !(nu > -1.0) || !nu.is_finite() {
                    bad(format!("ν = {nu} must exceed −1"))
                } else if !(theta > 0.0) || !theta.is_finite() {
                    bad(format!("θ = {theta} must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ginibre { .. } => "ginibre",
            Self::Jacobi { .. } => "jacobi",
            Self::CauchyLorentz { .. } => "cauchy-lorentz",
            Self::MuttalibBorodin { .. } => "muttalib-borodin",
            Self::LogNormal { .. } => "lognormal",
            Self::Projection { .. } => "projection",
            Self::DiracUnit => "dirac-unit",
        }
    }

    /// True for δ(a − 1), which has no pointwise values.
    pub fn is_distributional(&self) -> bool {
        matches!(self, Self::DiracUnit | Self::Projection { q: 0, .. })
    }

    /// Whether [`sample_polya_matrix`] can draw matrices for this weight.
    pub fn is_sampleable(&self) -> bool {
        let int = |x: f64| x >= 0.0 && x == x.round();
        match *self {
            Self::Ginibre { nu } => int(nu),
            Self::Jacobi { nu, mu, .. } => int(nu) && int(mu),
            Self::Projection { .. } | Self::DiracUnit => true,
            _ => false,
        }
    }

    /// Largest k for which (−a∂)^k ω is an ordinary function; `None` when unlimited.
    pub fn operator_power(&self) -> Option<usize> {
        match *self {
            Self::Jacobi { mu, n, .. } => Some((mu + n as f64 - 1.0).floor() as usize),
            Self::Projection { q, .. } => Some(q.saturating_sub(1)),
            Self::DiracUnit => Some(0),
            _ => None,
        }
    }

    /// Jumps or kinks of ω on ℝ₊.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            Self::Jacobi { .. } | Self::Projection { .. } => vec![1.0],
            _ => Vec::new(),
        }
    }

    /// ω(a); zero off ℝ₊ and for distributional weights.
    pub fn eval(&self, a: f64) -> f64 {
        self.derivative(0, a).unwrap_or(0.0)
    }

    /// Mω(s) = ∫₀^∞ a^{s−1} ω(a) da.
    pub fn mellin(&self, s: C64) -> C64 {
        match *self {
            Self::Ginibre { nu } => gamma(s + nu),
            Self::Jacobi { nu, mu, n } => {
                let k = mu + n as f64;
                gamma(s + nu) * gamma(C64::new(k, 0.0)) / gamma(s + nu + k)
            }
            Self::CauchyLorentz { nu, mu, n } => {
                let k = mu + n as f64;
                gamma(s + nu) * gamma(-s - nu + k) / gamma(C64::new(k, 0.0))
            }
            Self::MuttalibBorodin { nu, theta } => gamma((s + nu) / theta) / theta,
            Self::LogNormal { nu } => ((s + nu) * (s + nu) / 4.0).exp() * PI.sqrt(),
            Self::Projection { p, q } => {
                if q == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    gamma(s + p as f64) * factorial(q) / gamma(s + (p + q) as f64)
                }
            }
            Self::DiracUnit => C64::new(1.0, 0.0),
        }
    }

    pub fn mellin_real(&self, s: f64) -> f64 {
        self.mellin(C64::new(s, 0.0)).re
    }

    /// Mellin transform of (−a∂)^k ω: s^k Mω(s).
    pub fn mellin_derivative(&self, k: usize, s: C64) -> C64 {
        s.powu(k as u32) * self.mellin(s)
    }

    fn base_terms(&self) -> Vec<Term> {
        match *self {
            Self::Ginibre { nu } | Self::MuttalibBorodin { nu, .. } | Self::LogNormal { nu } => vec![(1.0, nu, 0.0)],
            Self::Jacobi { nu, mu, n } => vec![(1.0, nu, mu + n as f64 - 1.0)],
            Self::CauchyLorentz { nu, mu, n } => vec![(1.0, nu, mu + n as f64)],
            Self::Projection { p, q } => vec![(q as f64, p as f64, q as f64 - 1.0)],
            Self::DiracUnit => Vec::new(),
        }
    }

    /// Applies −a∂ once to a term list.
    fn apply_operator(&self, terms: &[Term]) -> Vec<Term> {
        let mut out = Vec::with_capacity(2 * terms.len());
        for &(c, p, q) in terms {
            match *self {
                // −a∂(a^p e^{−a}) = −p a^p e^{−a} + a^{p+1} e^{−a}
                Self::Ginibre { .. } => {
                    out.push((-c * p, p, q));
                    out.push((c, p + 1.0, q));
                }
                // −a∂(a^p (1−a)^q) = −p a^p (1−a)^q + q a^{p+1} (1−a)^{q−1}
                Self::Jacobi { .. } | Self::Projection { .. } => {
                    out.push((-c * p, p, q));
                    out.push((c * q, p + 1.0, q - 1.0));
                }
                // −a∂(a^p (1+a)^{−q}) = −p a^p (1+a)^{−q} + q a^{p+1} (1+a)^{−q−1}
                Self::CauchyLorentz { .. } => {
                    out.push((-c * p, p, q));
                    out.push((c * q, p + 1.0, q + 1.0));
                }
                // −a∂(a^p e^{−a^θ}) = −p a^p e^{−a^θ} + θ a^{p+θ} e^{−a^θ}
                Self::MuttalibBorodin { theta, .. } => {
                    out.push((-c * p, p, q));
                    out.push((c * theta, p + theta, q));
                }
                // in t = ln a the term is c tᵠ e^{νt − t²} with q the power of t;
                // −∂_t gives −c q t^{q−1} − c (ν − 2t) t^q
                Self::LogNormal { nu } => {
                    if q > 0.0 {
                        out.push((-c * q, p, q - 1.0));
                    }
                    out.push((-c * nu, p, q));
                    out.push((2.0 * c, p, q + 1.0));
                }
                Self::DiracUnit => {}
            }
        }
        out
    }

    fn eval_term(&self, (c, p, q): Term, a: f64) -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Ginibre { .. } => c * (p * a.ln() - a).exp(),
            Self::Jacobi { .. } | Self::Projection { .. } => {
                if a >= 1.0 {
                    // Θ(1 − a); the point a = 1 itself only matters when q = 0
                    if a == 1.0 && q == 0.0 {
                        return c;
                    }
                    return 0.0;
                }
                c * (p * a.ln() + q * (1.0 - a).ln()).exp()
            }
            Self::CauchyLorentz { .. } => c * (p * a.ln() - q * a.ln_1p()).exp(),
            Self::MuttalibBorodin { theta, .. } => c * (p * a.ln() - a.powf(theta)).exp(),
            Self::LogNormal { nu } => {
                let t = a.ln();
                c * t.powi(q as i32) * (nu * t - t * t).exp()
            }
            Self::DiracUnit => 0.0,
        }
    }

    /// (−a d/da)^k ω at a, from the exact recurrences of the catalog.
    pub fn derivative(&self, k: usize, a: f64) -> Result<f64> {
        if self.is_distributional() {
            return Err(Error::Unsupported(format!("{} weight has no pointwise values", self.name())));
        }
        if let Some(max) = self.operator_power() {
            if k > max {
                return Err(Error::Unsupported(format!(
                    "(−a∂)^{k} of the {} weight is not a function (available up to {max})",
                    self.name()
                )));
            }
        }
        if !(a > 0.0) {
            return Ok(0.0);
        }
        let mut terms = self.base_terms();
        for _ in 0..k {
            terms = self.apply_operator(&terms);
        }
        Ok(terms.into_iter().map(|t| self.eval_term(t, a)).sum())
    }
}

/// (−a d/da)^k f at a by central differences in t = ln a with step 10⁻⁴.
pub fn finite_difference_derivative<F: Fn(f64) -> f64>(f: &F, k: usize, a: f64) -> f64 {
    if k == 0 {
        return f(a);
    }
    let h = 1e-4;
    let t = a.ln();
    // −∂_t applied k times: central difference of order k
    let mut acc = 0.0;
    for j in 0..=k {
        let binom = factorial(k) / (factorial(j) * factorial(k - j));
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f((t + (k as f64 / 2.0 - j as f64) * h).exp());
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * acc / h.powi(k as i32)
}

/// (−a∂)^k ω(a), falling back to finite differences beyond the exact order only
/// when `allow_finite_differences` is set.
pub fn polya_derivative(w: &PolyaWeight, k: usize, a: f64, allow_finite_differences: bool) -> Result<f64> {
    match w.derivative(k, a) {
        Ok(v) => Ok(v),
        Err(e) if allow_finite_differences && !w.is_distributional() => {
            let _ = e;
            Ok(finite_difference_derivative(&|x| w.eval(x), k, a))
        }
        Err(e) => Err(e),
    }
}

/// Weight selection as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: String,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(rename = "M", default)]
    pub big_m: Option<usize>,
}

impl WeightSpec {
    /// Builds the weight for a factor of rank n embedded as an l×m matrix.
    pub fn build(&self, n: usize, l: usize, m: usize) -> Result<PolyaWeight> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("weight kind '{}' needs field '{name}'", self.kind)))
        };
        match self.kind.as_str() {
            "ginibre" => PolyaWeight::ginibre(self.nu),
            "jacobi" => PolyaWeight::jacobi(self.nu, need(self.mu, "mu")?, n),
            "cauchy-lorentz" => PolyaWeight::cauchy_lorentz(self.nu, need(self.mu, "mu")?, n),
            "muttalib-borodin" => PolyaWeight::muttalib_borodin(self.nu, need(self.theta, "theta")?),
            "lognormal" => PolyaWeight::log_normal(self.nu),
            "projection" | "truncated" => {
                let big = self
                    .big_m
                    .ok_or_else(|| Error::InvalidArgument("weight kind 'projection' needs field 'M'".into()))?;
                PolyaWeight::projection(big, l.max(m), l.min(m))
            }
            "dirac-unit" => Ok(PolyaWeight::DiracUnit),
            other => Err(Error::InvalidArgument(format!("unknown weight kind '{other}'"))),
        }
    }
}

fn check_rank_support(w: &PolyaWeight, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Dimension("rank must be positive".into()));
    }
    if w.is_distributional() {
        return Err(Error::Unsupported(format!("{} weight has no pointwise density", w.name())));
    }
    if let Some(max) = w.operator_power() {
        if n - 1 > max {
            return Err(Error::Unsupported(format!(
                "{} weight supports (−a∂)^k only up to k = {max}, rank {n} needs {}",
                w.name(),
                n - 1
            )));
        }
    }
    Ok(())
}

/// Joint density of squared singular values of the Pólya ensemble of rank n,
/// Δ(a) det[(−a_c∂)^{b−1} ω(a_c)] / ∏_{j=1}^n j! Mω(j), on unordered a ∈ ℝ₊ⁿ.
pub fn polya_jpdf(w: &PolyaWeight, a: &[f64]) -> Result<f64> {
    let n = a.len();
    check_rank_support(w, n)?;
    if a.iter().any(|v| !(*v > 0.0)) {
        return Ok(0.0);
    }
    let mut log_norm = 0.0;
    for j in 1..=n {
        let m = w.mellin_real(j as f64);
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Pole(format!("Mω({j}) = {m} is not a positive number")));
        }
        log_norm += ln_factorial(j) + m.ln();
    }
    // column scaling keeps the determinant in range
    let mut mat = vec![0.0; n * n];
    let mut log_scale = 0.0;
    for c in 0..n {
        let col: Vec<f64> = (0..n).map(|b| w.derivative(b, a[c])).collect::<Result<_>>()?;
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        log_scale += scale.ln();
        for b in 0..n {
            mat[b * n + c] = col[b] / scale;
        }
    }
    let (sign, log_det) = log_det_real(mat, n);
    if sign == 0.0 {
        return Ok(0.0);
    }
    let vand = vandermonde(a);
    if vand == 0.0 {
        return Ok(0.0);
    }
    Ok(sign * vand.signum() * (vand.abs().ln() + log_det + log_scale - log_norm).exp())
}

/// ∏_{j=1}^n Mω(s_j + 1) / Mω(n − j + 1).
pub fn spherical_transform_polya(w: &PolyaWeight, s: &[C64]) -> Result<C64> {
    let n = s.len();
    let mut out = C64::new(1.0, 0.0);
    for (j, sj) in s.iter().enumerate() {
        let num = w.mellin(sj + 1.0);
        let den = w.mellin(C64::new((n - j) as f64, 0.0));
        if !num.re.is_finite() || !num.im.is_finite() || den.norm() == 0.0 || !den.re.is_finite() {
            return Err(Error::Pole(format!(
                "Mellin transform of the weight is singular at s_{} + 1 = {}",
                j + 1,
                sj + 1.0
            )));
        }
        out *= num / den;
    }
    Ok(out)
}

/// One weight function of a polynomial ensemble together with its Mellin transform.
#[derive(Clone)]
pub struct WeightFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    mellin: Arc<dyn Fn(MellinPoint) -> C64 + Send + Sync>,
    breaks: Vec<f64>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("WeightFunction")
    }
}

impl WeightFunction {
    pub fn new<E, M>(eval: E, mellin: M) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        M: Fn(MellinPoint) -> C64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            mellin: Arc::new(mellin),
            breaks: Vec::new(),
        }
    }

    /// Points where the weight jumps or has a kink.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, a: f64) -> f64 {
        (self.eval)(a)
    }

    pub fn mellin(&self, s: C64, l: u8) -> C64 {
        (self.mellin)(MellinPoint { s, l })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleSpace {
    /// squared singular values on ℝ₊
    Rectangular,
    /// eigenvalues of a Hermitian matrix on ℝ
    Hermitian,
}

/// Polynomial ensemble (1/n!) Δ(a) det[w_b(a_c)] / det[Mw_b(c, c−1)].
#[derive(Clone, Debug)]
pub struct PolynomialEnsemble {
    space: EnsembleSpace,
    weights: Vec<WeightFunction>,
    norm: f64,
}

impl PolynomialEnsemble {
    pub fn new(space: EnsembleSpace, weights: Vec<WeightFunction>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Dimension("polynomial ensemble needs at least one weight".into()));
        }
        let mut g = Vec::with_capacity(n * n);
        for w in &weights {
            for c in 1..=n {
                g.push(w.mellin(C64::new(c as f64, 0.0), Self::moment_parity(space, c)).re);
            }
        }
        let (sign, log_det) = log_det_real(g, n);
        if sign == 0.0 || !log_det.is_finite() {
            return Err(Error::Degenerate("normalization determinant of the weights vanishes".into()));
        }
        Ok(Self {
            space,
            weights,
            norm: sign * log_det.exp(),
        })
    }

    fn moment_parity(space: EnsembleSpace, c: usize) -> u8 {
        match space {
            EnsembleSpace::Rectangular => 0,
            EnsembleSpace::Hermitian => ((c - 1) % 2) as u8,
        }
    }

    /// The Pólya ensemble of rank n written as a polynomial ensemble on ℝ₊.
    pub fn from_polya(w: &PolyaWeight, n: usize) -> Result<Self> {
        check_rank_support(w, n)?;
        let weights = (0..n)
            .map(|b| {
                let we = w.clone();
                let wm = w.clone();
                WeightFunction::new(
                    move |a| we.derivative(b, a).unwrap_or(0.0),
                    move |p: MellinPoint| wm.mellin_derivative(b, p.s),
                )
                .with_breaks(w.breaks())
            })
            .collect();
        Self::new(EnsembleSpace::Rectangular, weights)
    }

    /// Eigenvalues of x = ε h h* with h from the Pólya ensemble of `w` and ε = ±1.
    pub fn signed_polya(w: &PolyaWeight, n: usize, sign: f64) -> Result<Self> {
        check_rank_support(w, n)?;
        let eps = if sign < 0.0 { -1.0 } else { 1.0 };
        let weights = (0..n)
            .map(|b| {
                let we = w.clone();
                let wm = w.clone();
                WeightFunction::new(
                    move |x| {
                        if x * eps > 0.0 {
                            we.derivative(b, x * eps).unwrap_or(0.0)
                        } else {
                            0.0
                        }
                    },
                    move |p: MellinPoint| {
                        let v = wm.mellin_derivative(b, p.s);
                        if p.l == 1 {
                            v * eps
                        } else {
                            v
                        }
                    },
                )
                .with_breaks(w.breaks().iter().map(|b| b * eps).collect())
            })
            .collect();
        Self::new(EnsembleSpace::Hermitian, weights)
    }

    /// Gaussian unitary ensemble with density ∝ exp(−tr x²/2), weights a^b e^{−a²/2}.
    pub fn gaussian_hermitian(n: usize) -> Result<Self> {
        let weights = (0..n)
            .map(|b| {
                WeightFunction::new(
                    move |a: f64| a.powi(b as i32) * (-a * a / 2.0).exp(),
                    move |p: MellinPoint| {
                        if (p.l as usize + b) % 2 == 1 {
                            return C64::new(0.0, 0.0);
                        }
                        let h = (p.s + b as f64) / 2.0;
                        2.0 * C64::new(2.0, 0.0).powc(h - 1.0) * gamma(h)
                    },
                )
            })
            .collect();
        Self::new(EnsembleSpace::Hermitian, weights)
    }

    pub fn space(&self) -> EnsembleSpace {
        self.space
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[WeightFunction] {
        &self.weights
    }

    /// det[Mw_b(c, c−1)] (or det[Mw_b(c)] on ℝ₊).
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// Joint density on unordered a.
    pub fn density(&self, a: &[f64]) -> Result<f64> {
        let n = self.rank();
        if a.len() != n {
            return Err(Error::Dimension(format!("{} eigenvalues for rank {n}", a.len())));
        }
        if self.space == EnsembleSpace::Rectangular && a.iter().any(|v| *v <= 0.0) {
            return Ok(0.0);
        }
        let mut mat = Vec::with_capacity(n * n);
        for w in &self.weights {
            for &x in a {
                mat.push(w.eval(x));
            }
        }
        let (sign, log_det) = log_det_real(mat, n);
        if sign == 0.0 {
            return Ok(0.0);
        }
        Ok(vandermonde(a) * sign * log_det.exp() / (factorial(n) * self.norm))
    }

    /// ∏_{j<n} j! det[Mw_b(s_c + 1, L_c)] / (Δ(s) det[Mw_b(c, c−1)]).
    /// On ℝ₊ the parities are ignored.
    pub fn spherical_transform(&self, s: &[C64], l: &[u8]) -> Result<C64> {
        let n = self.rank();
        if s.len() != n || l.len() != n {
            return Err(Error::Dimension(format!("frequency of length {} for rank {n}", s.len())));
        }
        let parities: Vec<u8> = match self.space {
            EnsembleSpace::Rectangular => vec![0; n],
            EnsembleSpace::Hermitian => l.to_vec(),
        };
        let columns = |z: C64, parity: u8| -> Vec<C64> { self.weights.iter().map(|w| w.mellin(z + 1.0, parity)).collect() };
        Ok(det_over_vandermonde(s, &parities, &columns)? * superfactorial(n) / self.norm)
    }
}

/// Outcome of the Pólya-frequency determinant test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyaFrequencyReport {
    pub passed: bool,
    /// Smallest normalized value of sign(Δ(x)Δ(y)) det[f(x_b − y_c)] seen.
    pub worst_margin: f64,
    /// Order j at which the worst margin occurred.
    pub worst_order: usize,
    pub draws_per_order: usize,
}

/// Checks Δ_j(x)Δ_j(y) det[f(x_b − y_c)] ≥ 0 for f = ω∘exp, j = 1..=order, at
/// `draws` random points per order drawn from the log window [lo, hi].
pub fn polya_frequency_check<W: Fn(f64) -> f64>(
    omega: W,
    order: usize,
    draws: usize,
    window: (f64, f64),
    seed: u64,
) -> PolyaFrequencyReport {
    let f = |x: f64| omega(x.exp());
    let mut rng = rng_stream(seed, 0);
    let mut worst = f64::INFINITY;
    let mut worst_order = 1;
    for j in 1..=order {
        for _ in 0..draws {
            let x: Vec<f64> = (0..j).map(|_| rng.gen_range(window.0..window.1)).collect();
            let y: Vec<f64> = (0..j).map(|_| rng.gen_range(window.0..window.1)).collect();
            let mut mat = Vec::with_capacity(j * j);
            let mut row_norms = 1.0;
            for xb in &x {
                let row: Vec<f64> = y.iter().map(|yc| f(xb - yc)).collect();
                row_norms *= row.iter().map(|v| v * v).sum::<f64>().sqrt();
                mat.extend(row);
            }
            if row_norms == 0.0 {
                continue;
            }
            let (sign, log_det) = log_det_real(mat, j);
            let orient = (vandermonde(&x) * vandermonde(&y)).signum();
            let margin = orient * sign * (log_det - row_norms.ln()).exp();
            if margin < worst {
                worst = margin;
                worst_order = j;
            }
        }
    }
    PolyaFrequencyReport {
        passed: worst >= -1e-12,
        worst_margin: worst,
        worst_order,
        draws_per_order: draws,
    }
}

/// Default log window for the Pólya-frequency check of a catalog weight.
pub fn polya_check_window(w: &PolyaWeight) -> (f64, f64) {
    match w {
        PolyaWeight::Jacobi { .. } | PolyaWeight::Projection { .. } => (-3.0, 0.0),
        PolyaWeight::Ginibre { .. } => (-3.0, 2.0),
        _ => (-2.5, 2.5),
    }
}

/// Matrix space whose eigenvalue (or squared-singular-value) map is considered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenSpace {
    /// l×m complex matrices of rank n
    Rectangular { l: usize, m: usize, n: usize },
    /// l×l Hermitian matrices of rank n
    Hermitian { l: usize, n: usize },
}

/// Factor mapping a K-invariant matrix density to the density of its unordered
/// eigenvalues (divided by Δ(a)²): π^{n²}/(n! ∏_{j<n} j!²) for rectangular and
/// (1/n!) ∏_{j<n} π^j/j! for Hermitian matrices.
pub fn eigen_measure_constant(space: EigenSpace) -> Result<f64> {
    match space {
        EigenSpace::Rectangular { l, m, n } => {
            if n == 0 || n > l.min(m) {
                return Err(Error::Dimension(format!("rank {n} impossible for {l}×{m}")));
            }
            let sf = superfactorial(n);
            Ok(PI.powi((n * n) as i32) / (factorial(n) * sf * sf))
        }
        EigenSpace::Hermitian { l, n } => {
            if n == 0 || n > l {
                return Err(Error::Dimension(format!("rank {n} impossible in dimension {l}")));
            }
            Ok((0..n).map(|j| PI.powi(j as i32) / factorial(j)).product::<f64>() / factorial(n))
        }
    }
}

/// Flat-measure identification factor ∏_{j<m} π^{l−m} j!/(j+l−m)! for l×m
/// matrices with l ≥ m; it multiplies det(g′g′*)^{l−m}.
pub fn identification_factor(l: usize, m: usize) -> Result<f64> {
    if l < m {
        return Err(Error::Dimension(format!("identification factor needs l ≥ m, got {l} < {m}")));
    }
    let d = l - m;
    Ok((0..m).map(|j| PI.powi(d as i32) * factorial(j) / factorial(j + d)).product())
}

/// Standard complex Gaussian l×m matrix (E|g_ij|² = 1).
pub fn sample_ginibre(l: usize, m: usize, rng: &mut SimRng) -> ComplexMatrix {
    ComplexMatrix::gaussian(l, m, rng)
}

/// n×n matrix with density ∝ exp(−tr x²/2).
pub fn sample_gue(n: usize, rng: &mut SimRng) -> ComplexMatrix {
    let g = ComplexMatrix::gaussian(n, n, rng);
    g.sub(&g.adjoint().scale(-1.0)).scale(std::f64::consts::FRAC_1_SQRT_2)
}

/// l×m upper-left block of a Haar unitary in U(M).
pub fn sample_truncated_unitary(l: usize, m: usize, big: usize, rng: &mut SimRng) -> Result<ComplexMatrix> {
    if l > big || m > big || l == 0 || m == 0 {
        return Err(Error::Dimension(format!("{l}×{m} block does not fit in U({big})")));
    }
    Ok(haar_unitary(big, rng).block(0, 0, l, m))
}

/// n×n lower-triangular matrix whose squared singular values follow the Pólya
/// ensemble of `w`.
pub fn sample_polya_core(w: &PolyaWeight, n: usize, rng: &mut SimRng) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Dimension("rank must be positive".into()));
    }
    let gram_root = |b: ComplexMatrix| b.matmul(&b.adjoint()).cholesky();
    match *w {
        PolyaWeight::Ginibre { nu } if w.is_sampleable() => gram_root(ComplexMatrix::gaussian(n, n + nu as usize, rng)),
        PolyaWeight::Jacobi { nu, mu, .. } if w.is_sampleable() => {
            let (p, q) = (nu as usize, mu as usize + n);
            gram_root(sample_truncated_unitary(n, n + p, n + p + q, rng)?)
        }
        PolyaWeight::Projection { p, q } => gram_root(sample_truncated_unitary(n, n + p, n + p + q, rng)?),
        PolyaWeight::DiracUnit => Ok(ComplexMatrix::identity(n)),
        _ => Err(Error::Unsupported(format!(
            "{} weight with these parameters cannot be sampled",
            w.name()
        ))),
    }
}

/// K-invariant l×m matrix of rank n: k₁ · embed(core) · k₂* with the core from
/// [`sample_polya_core`].
pub fn sample_polya_matrix(w: &PolyaWeight, l: usize, m: usize, n: usize, rng: &mut SimRng) -> Result<ComplexMatrix> {
    if n == 0 || n > l.min(m) {
        return Err(Error::Dimension(format!("rank {n} impossible for {l}×{m}")));
    }
    let core = sample_polya_core(w, n, rng)?.embed(l, m);
    let k1 = haar_unitary(l, rng);
    let k2 = haar_unitary(m, rng);
    Ok(k1.matmul(&core).matmul(&k2.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mellin::{mellin_half_line, Support, UnivariateFunction};
    use crate::numerics::{integrate_nd, Domain, QuadratureConfig};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn catalog() -> Vec<PolyaWeight> {
        vec![
            PolyaWeight::ginibre(0.0).unwrap(),
            PolyaWeight::ginibre(1.5).unwrap(),
            PolyaWeight::jacobi(0.0, 1.0, 2).unwrap(),
            PolyaWeight::jacobi(0.5, 1.5, 3).unwrap(),
            PolyaWeight::cauchy_lorentz(0.0, 4.0, 2).unwrap(),
            PolyaWeight::muttalib_borodin(0.5, 2.0).unwrap(),
            PolyaWeight::log_normal(0.3).unwrap(),
            PolyaWeight::projection(5, 3, 1).unwrap(),
        ]
    }

    #[test]
    fn gaussian_hermitian_ensemble() {
        let ens = PolynomialEnsemble::gaussian_hermitian(2).unwrap();
        // GUE(2): density (x₁−x₂)² e^{−(x₁²+x₂²)/2} / (4π)
        for a in [[0.3f64, -1.2], [1.5, 0.7]] {
            let want = (a[0] - a[1]).powi(2) * (-(a[0] * a[0] + a[1] * a[1]) / 2.0).exp() / (4.0 * PI);
            assert!((ens.density(&a).unwrap() - want).abs() < 1e-14);
        }
        let mut rng = crate::numerics::rng_stream(3, 0);
        let mut second = 0.0;
        let draws = 20000;
        for _ in 0..draws {
            let x = sample_gue(2, &mut rng);
            second += x.matmul(&x).trace().re / 2.0;
        }
        // E tr x²/n = n
        assert!((second / draws as f64 - 2.0).abs() < 0.05);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(PolyaWeight::ginibre(0.0).unwrap().mellin(c(2.0)), c(1.0));
        let j = PolyaWeight::jacobi(0.0, 1.0, 2).unwrap();
        assert!((j.mellin(c(1.0)) - 1.0 / 3.0).norm() < 1e-14);
        let p = PolyaWeight::projection(3, 2, 1).unwrap();
        assert!((p.mellin(c(1.0)) - 0.5).norm() < 1e-14);
        assert!(PolyaWeight::ginibre(-1.0).is_err());
        assert!(PolyaWeight::jacobi(0.0, 0.0, 2).is_err());
        assert!(PolyaWeight::muttalib_borodin(0.0, -1.0).is_err());
        assert!(PolyaWeight::projection(2, 3, 1).is_err());
        assert!(PolyaWeight::projection(3, 3, 1).unwrap().is_distributional());
    }

    #[test]
    fn catalog_mellin_matches_quadrature() {
        let cfg = QuadratureConfig::with_tol(1e-14, 1e-11);
        for w in catalog() {
            let wc = w.clone();
            let f = UnivariateFunction::new(move |a| wc.eval(a), Support::PositiveAxis).with_breaks(w.breaks());
            for s in [c(0.7), c(1.0), C64::new(2.5, 1.0), c(3.5)] {
                if let PolyaWeight::CauchyLorentz { .. } = w {
                    if s.re > 3.0 {
                        continue;
                    }
                }
                let q = mellin_half_line(&f, s, &cfg).unwrap();
                let m = w.mellin(s);
                assert!((q - m).norm() <= 1e-8 * m.norm(), "{} at {s}: {q} vs {m}", w.name());
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let g = PolyaWeight::ginibre(0.0).unwrap();
        assert!((g.derivative(1, 2.0).unwrap() - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!(g.derivative(2, 1.0).unwrap().abs() < 1e-15);
        assert_eq!(g.derivative(0, 0.7).unwrap(), g.eval(0.7));
        let j = PolyaWeight::jacobi(0.0, 1.0, 2).unwrap();
        assert!(j.derivative(3, 0.5).is_err());
        assert!(polya_derivative(&j, 3, 0.5, true).is_ok());
    }

    #[test]
    fn derivative_recurrences_match_finite_differences() {
        for w in catalog() {
            let max = w.operator_power().unwrap_or(2).min(2);
            for k in 0..=max {
                for a in [0.3, 0.8, 1.7] {
                    if w.breaks().iter().any(|b| (a - b).abs() < 0.1) {
                        continue;
                    }
                    let exact = w.derivative(k, a).unwrap();
                    let fd = finite_difference_derivative(&|x| w.eval(x), k, a);
                    let scale = exact.abs().max(w.eval(a).abs()).max(1e-3);
                    assert!(
                        (exact - fd).abs() < 1e-5 * scale.max(1.0),
                        "{} k={k} a={a}: {exact} vs {fd}",
                        w.name()
                    );
                }
            }
        }
    }

    #[test]
    fn mellin_of_derivatives() {
        let cfg = QuadratureConfig::with_tol(1e-14, 1e-11);
        for w in [
            PolyaWeight::ginibre(0.5).unwrap(),
            PolyaWeight::muttalib_borodin(0.0, 1.5).unwrap(),
            PolyaWeight::log_normal(0.0).unwrap(),
        ] {
            for k in 1..=2 {
                let wc = w.clone();
                let f = UnivariateFunction::new(move |a| wc.derivative(k, a).unwrap(), Support::PositiveAxis);
                let s = c(1.8);
                let q = mellin_half_line(&f, s, &cfg).unwrap();
                let m = w.mellin_derivative(k, s);
                assert!((q - m).norm() < 1e-8 * m.norm(), "{} k={k}", w.name());
            }
        }
    }

    #[test]
    fn polya_density_examples() {
        let g = PolyaWeight::ginibre(0.0).unwrap();
        assert!((polya_jpdf(&g, &[1.3]).unwrap() - (-1.3f64).exp()).abs() < 1e-15);
        // n = 2 Laguerre: (a₂ − a₁)² e^{−a₁−a₂}/2
        let v = polya_jpdf(&g, &[0.5, 2.0]).unwrap();
        assert!((v - 2.25 * (-2.5f64).exp() / 2.0).abs() < 1e-14);
        let cfg = QuadratureConfig::with_tol(1e-10, 1e-8);
        for w in [
            g.clone(),
            PolyaWeight::jacobi(0.0, 1.0, 2).unwrap(),
            PolyaWeight::projection(5, 3, 1).unwrap(),
        ] {
            let bk = w.breaks();
            let mass: f64 = integrate_nd(&|a: &[f64]| polya_jpdf(&w, a).unwrap(), 2, Domain::positive_axis(), &bk, &cfg).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "{}: {mass}", w.name());
        }
        assert!(polya_jpdf(&PolyaWeight::projection(3, 3, 1).unwrap(), &[0.5]).is_err());
        assert!(polya_jpdf(&PolyaWeight::projection(4, 3, 1).unwrap(), &[0.2, 0.5, 0.6]).is_err());
    }

    #[test]
    fn polya_transform_examples() {
        let g = PolyaWeight::ginibre(0.0).unwrap();
        assert!((spherical_transform_polya(&g, &[c(1.0), c(0.0)]).unwrap() - 1.0).norm() < 1e-14);
        assert!((spherical_transform_polya(&g, &[c(1.0)]).unwrap() - 1.0).norm() < 1e-14);
        assert!((spherical_transform_polya(&g, &[c(3.0), c(0.0)]).unwrap() - 6.0).norm() < 1e-12);
    }

    #[test]
    fn polya_as_polynomial_ensemble() {
        for w in [
            PolyaWeight::ginibre(0.0).unwrap(),
            PolyaWeight::jacobi(1.0, 2.0, 2).unwrap(),
            PolyaWeight::projection(5, 3, 1).unwrap(),
        ] {
            let ens = PolynomialEnsemble::from_polya(&w, 2).unwrap();
            for s in [[c(1.0), c(0.0)], [c(2.5), c(0.4)], [C64::new(1.0, 2.0), C64::new(0.0, -1.0)]] {
                let a = ens.spherical_transform(&s, &[0, 0]).unwrap();
                let b = spherical_transform_polya(&w, &s).unwrap();
                assert!((a - b).norm() < 1e-10 * b.norm().max(1.0), "{}: {a} vs {b}", w.name());
            }
            for pt in [[0.2, 0.7], [0.4, 0.9]] {
                let d1 = ens.density(&pt).unwrap();
                let d2 = polya_jpdf(&w, &pt).unwrap();
                assert!((d1 - d2).abs() < 1e-12 * d2.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn hermitian_two_weight_example() {
        // w₁ = e^{−|a|}, w₂ = a e^{−|a|}
        let w1 = WeightFunction::new(
            |a: f64| (-a.abs()).exp(),
            |p: MellinPoint| gamma(p.s) * (1.0 + if p.l == 0 { 1.0 } else { -1.0 }),
        );
        let w2 = WeightFunction::new(
            |a: f64| a * (-a.abs()).exp(),
            |p: MellinPoint| gamma(p.s + 1.0) * (1.0 - if p.l == 0 { 1.0 } else { -1.0 }),
        );
        let ens = PolynomialEnsemble::new(EnsembleSpace::Hermitian, vec![w1, w2]).unwrap();
        let v = ens.spherical_transform(&[c(2.0), c(1.0)], &[0, 1]).unwrap();
        assert!((v + 2.0).norm() < 1e-12, "{v}");
        // density (a₂ − a₁)² e^{−|a₁|−|a₂|}/16
        let d = ens.density(&[-0.5, 1.2]).unwrap();
        assert!((d - 1.7f64.powi(2) * (-1.7f64).exp() / 16.0).abs() < 1e-14);
        let t = ens.spherical_transform(&[c(1.0), c(0.0)], &[1, 0]).unwrap();
        assert!((t - 1.0).norm() < 1e-12);
    }

    #[test]
    fn polya_frequency_examples() {
        let g = PolyaWeight::ginibre(0.0).unwrap();
        assert!(polya_frequency_check(|a| g.eval(a), 3, 200, polya_check_window(&g), 1).passed);
        let j = PolyaWeight::jacobi(0.0, 1.0, 2).unwrap();
        assert!(polya_frequency_check(|a| j.eval(a), 2, 200, polya_check_window(&j), 1).passed);
        let bad = polya_frequency_check(|a: f64| (3.0 * a.ln()).sin().abs() + 0.01, 2, 200, (-2.5, 2.5), 1);
        assert!(!bad.passed && bad.worst_order <= 2);
    }

    #[test]
    fn measure_constants() {
        assert_eq!(eigen_measure_constant(EigenSpace::Hermitian { l: 3, n: 1 }).unwrap(), 1.0);
        assert!((eigen_measure_constant(EigenSpace::Rectangular { l: 1, m: 1, n: 1 }).unwrap() - PI).abs() < 1e-15);
        assert!((eigen_measure_constant(EigenSpace::Hermitian { l: 2, n: 2 }).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(identification_factor(3, 3).unwrap(), 1.0);
        assert!((identification_factor(2, 1).unwrap() - PI).abs() < 1e-15);
    }

    #[test]
    fn samplers_have_the_right_rank_and_shape() {
        let mut rng = rng_stream(2, 0);
        for w in [
            PolyaWeight::ginibre(1.0).unwrap(),
            PolyaWeight::jacobi(1.0, 1.0, 2).unwrap(),
            PolyaWeight::projection(4, 3, 2).unwrap(),
        ] {
            let g = sample_polya_matrix(&w, 3, 4, 2, &mut rng).unwrap();
            assert_eq!((g.rows(), g.cols()), (3, 4));
            let sv = crate::numerics::squared_singular_values(&g).unwrap();
            assert_eq!(sv.len(), 2);
        }
        assert!(sample_polya_core(&PolyaWeight::log_normal(0.0).unwrap(), 2, &mut rng).is_err());
        assert!(sample_polya_core(&PolyaWeight::ginibre(0.5).unwrap(), 2, &mut rng).is_err());
    }

    #[test]
    fn weight_spec_parsing() {
        let spec: WeightSpec = serde_json::from_str(r#"{"kind":"jacobi","nu":0,"mu":1}"#).unwrap();
        assert_eq!(spec.build(2, 2, 2).unwrap(), PolyaWeight::Jacobi { nu: 0.0, mu: 1.0, n: 2 });
        let spec: WeightSpec = serde_json::from_str(r#"{"kind":"projection","M":3}"#).unwrap();
        assert_eq!(spec.build(1, 1, 2).unwrap(), PolyaWeight::Projection { p: 1, q: 1 });
        assert!(serde_json::from_str::<WeightSpec>(r#"{"kind":"ginibre","nuu":0}"#).is_err());
        let spec: WeightSpec = serde_json::from_str(r#"{"kind":"jacobi"}"#).unwrap();
        assert!(spec.build(2, 2, 2).is_err());
    }
}
