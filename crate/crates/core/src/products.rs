//! Eigenvalue statistics of g x g* with g a Pólya ensemble on l×m matrices of
//! rank n₁ and x an m×m Hermitian matrix of rank n₂, either fixed or drawn from a
//! polynomial ensemble: joint densities, bi-orthonormal systems and kernels.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpace, PolyaWeight, PolynomialEnsemble};
use crate::error::{Error, Result};
use crate::mellin::richardson;
use crate::numerics::det::{det_real, inverse_real};
use crate::numerics::special::factorial;
use crate::numerics::{circle_average, integrate_complex, integrate_generic, vandermonde, Domain, QuadratureConfig};

/// Which closed form applies: n₁ ≥ n₂ keeps the rank of x, n₁ < n₂ lowers it.
/// At n₁ = n₂ both are admissible and must agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankBranch {
    Preserving,
    Lowering,
}

/// Shapes and weight of the product g x g*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub l: usize,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub omega: PolyaWeight,
}

impl ProductSpec {
    pub fn new(l: usize, m: usize, n1: usize, n2: usize, omega: PolyaWeight) -> Result<Self> {
        let spec = Self { l, m, n1, n2, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Dimension("ranks n₁ and n₂ must be positive".into()));
        }
        if self.n1 > self.l.min(self.m) {
            return Err(Error::Dimension(format!(
                "rank n₁ = {} exceeds min(l, m) = {}",
                self.n1,
                self.l.min(self.m)
            )));
        }
        if self.n2 > self.m {
            return Err(Error::Dimension(format!("rank n₂ = {} exceeds m = {}", self.n2, self.m)));
        }
        self.omega.validate()?;
        for j in 1..=self.n1 {
            let v = self.omega.mellin_real(j as f64);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Pole(format!("Mω({j}) = {v} is not a positive number")));
            }
        }
        Ok(())
    }

    /// r = min(n₁, n₂), the rank of g x g*.
    pub fn rank(&self) -> usize {
        self.n1.min(self.n2)
    }

    pub fn natural_branch(&self) -> RankBranch {
        if self.n1 >= self.n2 {
            RankBranch::Preserving
        } else {
            RankBranch::Lowering
        }
    }

    pub fn check_branch(&self, branch: RankBranch) -> Result<()> {
        let ok = match branch {
            RankBranch::Preserving => self.n1 >= self.n2,
            RankBranch::Lowering => self.n1 <= self.n2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{branch:?} branch needs {} n₁ = {} and n₂ = {}",
                if branch == RankBranch::Preserving {
                    "n₁ ≥ n₂ with"
                } else {
                    "n₁ ≤ n₂ with"
                },
                self.n1,
                self.n2
            )))
        }
    }

    /// ∏_{j=1}^r (m−j)! / ((m−n₁)! (n₁−j)! Mω(n₁−j+1)).
    pub fn prefactor(&self) -> f64 {
        (1..=self.rank())
            .map(|j| {
                factorial(self.m - j)
                    / (factorial(self.m - self.n1) * factorial(self.n1 - j) * self.omega.mellin_real((self.n1 - j + 1) as f64))
            })
            .product()
    }

    /// The mixing function u ↦ ∫₀^∞ (da′/a′) ω^{(0)}_{m−n₁}(a′) ω(u/a′).
    pub fn core(&self, method: CoreMethod, cfg: &QuadratureConfig) -> Result<Core> {
        build_core(self, method, cfg)
    }

    pub fn tilde_weight(&self, branch: RankBranch, method: CoreMethod, cfg: &QuadratureConfig) -> Result<TildeWeight> {
        self.check_branch(branch)?;
        Ok(TildeWeight {
            branch,
            n1: self.n1,
            n2: self.n2,
            core: self.core(method, cfg)?,
        })
    }
}

/// How the mixing function is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoreMethod {
    /// Closed forms where they exist, quadrature otherwise.
    #[default]
    Auto,
    /// Always integrate over a′ when both factors are functions.
    Quadrature,
}

type FallibleFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Mixing function on u > 0, either an ordinary function or the unit mass δ(u − 1).
#[derive(Clone)]
pub enum Core {
    Function { eval: FallibleFn, breaks: Vec<f64> },
    Dirac,
}

impl fmt::Debug for Core {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Core::Function { breaks, .. } => f.debug_struct("Core::Function").field("breaks", breaks).finish(),
            Core::Dirac => f.write_str("Core::Dirac"),
        }
    }
}

impl Core {
    fn function<F: Fn(f64) -> Result<f64> + Send + Sync + 'static>(f: F, breaks: Vec<f64>) -> Self {
        Core::Function { eval: Arc::new(f), breaks }
    }

    /// Pointwise value; zero for the point mass and off u > 0.
    pub fn eval(&self, u: f64) -> Result<f64> {
        match self {
            Core::Function { eval, .. } if u > 0.0 && u.is_finite() => eval(u),
            _ => Ok(0.0),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Core::Dirac)
    }

    pub fn breaks(&self) -> &[f64] {
        match self {
            Core::Function { breaks, .. } => breaks,
            Core::Dirac => &[],
        }
    }
}

/// q (1−u)^{q−1} on (0, 1).
fn beta_weight(q: usize) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |u: f64| {
        if u > 0.0 && u < 1.0 {
            q as f64 * (1.0 - u).powi(q as i32 - 1)
        } else {
            0.0
        }
    }
}

fn build_core(spec: &ProductSpec, method: CoreMethod, cfg: &QuadratureConfig) -> Result<Core> {
    let q = spec.m - spec.n1;
    let w = spec.omega.clone();
    if q == 0 {
        if w.is_distributional() {
            return Ok(Core::Dirac);
        }
        let breaks = w.breaks();
        return Ok(Core::function(move |u| Ok(w.eval(u)), breaks));
    }
    let omega0 = beta_weight(q);
    if w.is_distributional() {
        return Ok(Core::function(move |u| Ok(omega0(u)), vec![1.0]));
    }
    if method == CoreMethod::Auto {
        if let PolyaWeight::Projection { p, q: big_q } = w {
            if p == q {
                // q!Γ(s)/Γ(s+q) · Q!Γ(s+q)/Γ(s+q+Q) is the Mellin transform of a single Beta weight
                let c = factorial(q) * factorial(big_q) / factorial(q + big_q);
                let merged = beta_weight(q + big_q);
                return Ok(Core::function(move |u| Ok(c * merged(u)), vec![1.0]));
            }
        }
    }
    let cfg = *cfg;
    let breaks = w.breaks();
    let core_breaks = if breaks.is_empty() { Vec::new() } else { breaks.clone() };
    Ok(Core::function(
        move |u| {
            // a′ = e^t on (−∞, 0]
            let tb: Vec<f64> = breaks.iter().filter(|b| **b > u).map(|b| (u / b).ln()).collect();
            let est = integrate_generic(
                |t: f64| {
                    let x = t.exp();
                    let y = u / x;
                    if x == 0.0 || !y.is_finite() {
                        return 0.0;
                    }
                    let v = w.eval(y);
                    if v == 0.0 || !v.is_finite() {
                        0.0
                    } else {
                        v * omega0(x)
                    }
                },
                Domain::LowerHalf(0.0),
                &tb,
                &cfg,
            )?;
            Ok(est.value)
        },
        core_breaks,
    ))
}

/// Runs an adaptive real integral of a fallible integrand, returning the first error.
fn integrate_fallible<F: Fn(f64) -> Result<f64>>(f: F, domain: Domain, breaks: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let err = RefCell::new(None);
    let est = integrate_generic(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        domain,
        breaks,
        cfg,
    );
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

fn integrate_fallible_complex<F: Fn(f64) -> Result<C64>>(f: F, domain: Domain, breaks: &[f64], cfg: &QuadratureConfig) -> Result<C64> {
    let err = RefCell::new(None);
    let est = integrate_complex(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        },
        domain,
        breaks,
        cfg,
    );
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

/// Sorted, deduplicated break list.
fn merge_breaks(mut b: Vec<f64>) -> Vec<f64> {
    b.retain(|x| x.is_finite());
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * x.abs().max(1.0));
    b
}

/// The weight ω̃(ã|a) attached to one eigenvalue a of x.
#[derive(Clone, Debug)]
pub struct TildeWeight {
    branch: RankBranch,
    n1: usize,
    n2: usize,
    core: Core,
}

impl TildeWeight {
    pub fn branch(&self) -> RankBranch {
        self.branch
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    /// ω̃(u|1): u^{n₁−n₂} core(u) when rank is kept, core(u) when it drops; zero for u ≤ 0.
    pub fn unit(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Ok(0.0);
        }
        let c = self.core.eval(u)?;
        Ok(match self.branch {
            RankBranch::Preserving => c * u.powi(self.n1 as i32 - self.n2 as i32),
            RankBranch::Lowering => c,
        })
    }

    fn shift(&self) -> i32 {
        match self.branch {
            RankBranch::Preserving => 0,
            RankBranch::Lowering => (self.n2 - self.n1) as i32,
        }
    }

    /// ω̃(ã|a); zero unless ã and a share their sign. The point mass has no values.
    pub fn eval(&self, at: f64, a: f64) -> Result<f64> {
        if a == 0.0 || at * a <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.unit(at / a)? * a.powi(self.shift()) / a.abs())
    }

    /// ∫ da ω̃(ã|a) f(a), computed in t = ln(ã/a). The null set ã = 0, where the
    /// integral may diverge, is assigned 0.
    pub fn integrate_against<F: Fn(f64) -> Result<f64>>(&self, at: f64, f: F, f_breaks: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
        if at == 0.0 {
            return Ok(0.0);
        }
        let k = self.shift();
        if self.core.is_dirac() {
            return Ok(at.powi(k) * f(at)?);
        }
        let mut tb: Vec<f64> = self.core.breaks().iter().filter(|b| **b > 0.0).map(|b| b.ln()).collect();
        tb.extend(f_breaks.iter().filter(|b| at / **b > 0.0).map(|b| (at / b).ln()));
        let tb = merge_breaks(tb);
        integrate_fallible(
            |t| {
                let u = t.exp();
                if u == 0.0 || !u.is_finite() {
                    return Ok(0.0);
                }
                let w = self.unit(u)?;
                if w == 0.0 {
                    return Ok(0.0);
                }
                let a = at / u;
                Ok(w * a.powi(k) * f(a)?)
            },
            Domain::FullLine,
            &tb,
            cfg,
        )
    }
}

/// e_o(−a) = coefficient of z^{k−o} in ∏_h (z − a_h), k = len(a), read off a circle
/// with the trapezoid rule (exact for polynomials).
pub fn elementary_symmetric(values: &[f64], order: usize) -> Result<f64> {
    let k = values.len();
    if order > k {
        return Err(Error::InvalidArgument(format!("order {order} exceeds {k} values")));
    }
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let radius = if radius == 1e-300 { 1.0 } else { radius };
    let n = 2 * (k + 2) + 8;
    let pw = (k - order + 1) as i32;
    let v = circle_average(
        &|z: C64| values.iter().fold(C64::new(1.0, 0.0), |p, a| p * (z - a)) / z.powi(pw),
        C64::new(0.0, 0.0),
        radius,
        n,
    );
    Ok(v.re)
}

/// e_o(−a) by expanding ∏ (z − a_h) coefficient by coefficient.
pub fn elementary_symmetric_expanded(values: &[f64], order: usize) -> f64 {
    // coeffs[o] = e_o(−a)
    let mut coeffs = vec![0.0; values.len() + 1];
    coeffs[0] = 1.0;
    for (i, a) in values.iter().enumerate() {
        for o in (1..=i + 1).rev() {
            coeffs[o] -= a * coeffs[o - 1];
        }
    }
    coeffs.get(order).copied().unwrap_or(0.0)
}

/// e_o(−a_{≠c}) / ∏_{h≠c} (a_c − a_h): the entries of the inverse Vandermonde matrix.
pub fn inverse_vandermonde_entry(a: &[f64], c: usize, order: usize) -> Result<f64> {
    let rest: Vec<f64> = a.iter().enumerate().filter(|(h, _)| *h != c).map(|(_, v)| *v).collect();
    let denom: f64 = rest.iter().map(|ah| a[c] - ah).product();
    if denom == 0.0 {
        return Err(Error::Degenerate(format!("eigenvalue {} is repeated", a[c])));
    }
    Ok(elementary_symmetric(&rest, order)? / denom)
}

fn check_spectrum(a: &[f64], n2: usize) -> Result<()> {
    if a.len() != n2 {
        return Err(Error::Dimension(format!("{} eigenvalues given for rank n₂ = {n2}", a.len())));
    }
    if a.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("eigenvalues of x must be finite and nonzero".into()));
    }
    Ok(())
}

/// Smallest pairwise gap relative to the largest modulus.
fn relative_gap(a: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut gap = f64::INFINITY;
    for i in 0..a.len() {
        for j in 0..i {
            gap = gap.min((a[i] - a[j]).abs());
        }
    }
    gap / scale
}

const DEGENERACY_TOL: f64 = 1e-6;

/// A real polynomial Σ c_h x^h.
fn poly_eval(c: &[f64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, ch| acc * z + ch)
}

/// Bi-orthonormal pair of families {p_j} (polynomials) and {q_j}.
#[derive(Clone)]
pub struct BiorthSystem {
    p: Vec<Vec<f64>>,
    q: Vec<FallibleFn>,
    breaks: Vec<f64>,
}

impl fmt::Debug for BiorthSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiorthSystem")
            .field("p", &self.p)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl BiorthSystem {
    /// `p[j]` holds the coefficients of p_j in increasing powers.
    pub fn new(p: Vec<Vec<f64>>, q: Vec<FallibleFn>, breaks: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::Dimension(format!("{} polynomials and {} dual functions", p.len(), q.len())));
        }
        if p.iter().any(|c| c.len() > p.len()) {
            return Err(Error::Dimension("polynomial degree must stay below the rank".into()));
        }
        Ok(Self {
            p,
            q,
            breaks: merge_breaks(breaks),
        })
    }

    /// p_j(a) = a^j with the given dual functions.
    pub fn monomial(q: Vec<FallibleFn>, breaks: Vec<f64>) -> Result<Self> {
        let n = q.len();
        let p = (0..n)
            .map(|j| {
                let mut c = vec![0.0; j + 1];
                c[j] = 1.0;
                c
            })
            .collect();
        Self::new(p, q, breaks)
    }

    pub fn rank(&self) -> usize {
        self.p.len()
    }

    pub fn p_coefficients(&self, j: usize) -> &[f64] {
        &self.p[j]
    }

    pub fn p(&self, j: usize, x: f64) -> f64 {
        poly_eval(&self.p[j], C64::new(x, 0.0)).re
    }

    pub fn p_complex(&self, j: usize, z: C64) -> C64 {
        poly_eval(&self.p[j], z)
    }

    pub fn q(&self, j: usize, x: f64) -> Result<f64> {
        (self.q[j])(x)
    }

    pub fn q_function(&self, j: usize) -> FallibleFn {
        self.q[j].clone()
    }

    /// Jumps or kinks of the dual functions (always including 0).
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Coefficient of a^j in p_j.
    pub fn leading_coefficient(&self, j: usize) -> f64 {
        self.p[j].get(j).copied().unwrap_or(0.0)
    }

    /// p_j has degree at most j for every j.
    pub fn is_triangular(&self) -> bool {
        self.p.iter().enumerate().all(|(j, c)| c.iter().skip(j + 1).all(|v| *v == 0.0))
    }

    fn quad_breaks(&self) -> Vec<f64> {
        let mut b = self.breaks.clone();
        b.push(0.0);
        merge_breaks(b)
    }

    /// Matrix of ∫ p_b q_c over the real line (row-major, b then c).
    pub fn gram(&self, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
        let n = self.rank();
        let breaks = self.quad_breaks();
        let mut out = Vec::with_capacity(n * n);
        for b in 0..n {
            for c in 0..n {
                out.push(integrate_fallible(
                    |x| Ok(self.p(b, x) * self.q(c, x)?),
                    Domain::FullLine,
                    &breaks,
                    cfg,
                )?);
            }
        }
        Ok(out)
    }

    /// max |∫ p_b q_c − δ_bc|.
    pub fn biorthogonality_defect(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let n = self.rank();
        let g = self.gram(cfg)?;
        Ok((0..n * n)
            .map(|i| (g[i] - if i / n == i % n { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max))
    }

    /// K(x, y) = Σ_j p_j(x) q_j(y).
    pub fn kernel(&self) -> Kernel {
        let sys = self.clone();
        let n = self.rank();
        Kernel::new(
            n,
            move |z: C64, y: f64| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    let pj = sys.p_complex(j, z);
                    if pj != C64::new(0.0, 0.0) {
                        acc += pj * sys.q(j, y)?;
                    }
                }
                Ok(acc)
            },
            self.breaks.clone(),
        )
    }
}

/// Correlation kernel of a determinantal point process. The first argument may be
/// complex so that contour transforms can act on it.
#[derive(Clone)]
pub struct Kernel {
    rank: usize,
    eval: Arc<dyn Fn(C64, f64) -> Result<C64> + Send + Sync>,
    breaks: Vec<f64>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("rank", &self.rank)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl Kernel {
    pub fn new<F: Fn(C64, f64) -> Result<C64> + Send + Sync + 'static>(rank: usize, eval: F, breaks: Vec<f64>) -> Self {
        Self {
            rank,
            eval: Arc::new(eval),
            breaks: merge_breaks(breaks),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok((self.eval)(C64::new(x, 0.0), y)?.re)
    }

    pub fn eval_complex(&self, z: C64, y: f64) -> Result<C64> {
        (self.eval)(z, y)
    }

    /// K(x, x), the one-point density (integrates to the rank).
    pub fn level_density(&self, x: f64) -> Result<f64> {
        self.eval(x, x)
    }

    /// ∫ K(x, x) dx.
    pub fn trace(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let mut b = self.breaks.clone();
        b.push(0.0);
        integrate_fallible(|x| self.level_density(x), Domain::FullLine, &merge_breaks(b), cfg)
    }
}

/// κ-point correlation det[K(x_b, x_c)].
pub fn correlation(kernel: &Kernel, points: &[f64]) -> Result<f64> {
    let k = points.len();
    if k > kernel.rank() {
        return Err(Error::Dimension(format!(
            "{k}-point correlation of a rank-{} kernel",
            kernel.rank()
        )));
    }
    let mut mat = Vec::with_capacity(k * k);
    for &x in points {
        for &y in points {
            mat.push(kernel.eval(x, y)?);
        }
    }
    Ok(det_real(mat, k))
}

/// Joint density reconstructed from a kernel, det[K(x_b, x_c)] / r!.
pub fn jpdf_from_kernel(kernel: &Kernel, points: &[f64]) -> Result<f64> {
    if points.len() != kernel.rank() {
        return Err(Error::Dimension(format!(
            "{} points for a rank-{} kernel",
            points.len(),
            kernel.rank()
        )));
    }
    Ok(correlation(kernel, points)? / factorial(points.len()))
}

/// g x g* with x = diag(a) fixed.
#[derive(Clone, Debug)]
pub struct FixedProduct {
    spec: ProductSpec,
    branch: RankBranch,
    a: Vec<f64>,
    tilde: TildeWeight,
    pref: f64,
    cfg: QuadratureConfig,
}

impl FixedProduct {
    pub fn new(spec: ProductSpec, a: &[f64], branch: RankBranch, method: CoreMethod, cfg: &QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        check_spectrum(a, spec.n2)?;
        let tilde = spec.tilde_weight(branch, method, cfg)?;
        let pref = spec.prefactor();
        Ok(Self {
            spec,
            branch,
            a: a.to_vec(),
            tilde,
            pref,
            cfg: *cfg,
        })
    }

    pub fn spec(&self) -> &ProductSpec {
        &self.spec
    }

    pub fn branch(&self) -> RankBranch {
        self.branch
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.a
    }

    pub fn tilde_weight(&self) -> &TildeWeight {
        &self.tilde
    }

    pub fn is_degenerate(&self) -> bool {
        relative_gap(&self.a) < DEGENERACY_TOL
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .a
            .iter()
            .flat_map(|a| self.tilde.core.breaks().iter().map(move |u| u * a))
            .collect();
        b.push(0.0);
        merge_breaks(b)
    }

    fn jpdf_at(&self, a: &[f64], at: &[f64]) -> Result<f64> {
        let (n1, n2) = (self.spec.n1, self.spec.n2);
        let r = self.spec.rank();
        match self.branch {
            RankBranch::Preserving => {
                let mut mat = Vec::with_capacity(n2 * n2);
                for &x in at {
                    for &ac in a {
                        mat.push(self.tilde.eval(x, ac)?);
                    }
                }
                let da = vandermonde(a);
                if da == 0.0 {
                    return Err(Error::Degenerate("repeated eigenvalues of x".into()));
                }
                Ok(self.pref / factorial(n2) * vandermonde(at) / da * det_real(mat, n2))
            }
            RankBranch::Lowering => {
                let lag: Vec<Vec<f64>> = (1..=n1)
                    .map(|b| (0..n2).map(|c| inverse_vandermonde_entry(a, c, n1 - b)).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                let wt: Vec<Vec<f64>> = (0..n2)
                    .map(|c| at.iter().map(|x| self.tilde.eval(*x, a[c])).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                let mut mat = Vec::with_capacity(r * r);
                for row in &lag {
                    mat.extend((0..r).map(|d| (0..n2).map(|c| row[c] * wt[c][d]).sum::<f64>()));
                }
                Ok(self.pref / factorial(n1) * vandermonde(at) * det_real(mat, r))
            }
        }
    }

    /// Joint density of the r nonzero eigenvalues of g diag(a) g*, on unordered ã.
    /// Repeated entries of a are resolved by extrapolating from split spectra.
    pub fn jpdf(&self, at: &[f64]) -> Result<f64> {
        let r = self.spec.rank();
        if at.len() != r {
            return Err(Error::Dimension(format!("{} eigenvalues given for rank {r}", at.len())));
        }
        if !self.is_degenerate() {
            return self.jpdf_at(&self.a, at);
        }
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fan = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
        let mut vals = Vec::with_capacity(fan.len());
        for eps in fan {
            let split: Vec<f64> = self.a.iter().enumerate().map(|(c, v)| v + eps * scale * c as f64).collect();
            if split.iter().zip(&self.a).any(|(s, v)| s.signum() != v.signum()) {
                return Err(Error::Degenerate("splitting the repeated eigenvalues changes their signs".into()));
            }
            vals.push(C64::new(self.jpdf_at(&split, at)?, 0.0));
        }
        let (v, err) = richardson(&fan, &vals);
        if err > 1e-6 * v.norm().max(1e-300) && err > 1e-12 {
            return Err(Error::Extrapolation(format!(
                "repeated-eigenvalue limit unstable (increment {err:e})"
            )));
        }
        Ok(v.re)
    }

    /// p_j(ã) = ã^j with the dual functions built from ω̃(·|a_c).
    pub fn biorth(&self) -> Result<BiorthSystem> {
        if self.is_degenerate() {
            return Err(Error::Degenerate("bi-orthonormal functions need distinct eigenvalues of x".into()));
        }
        if self.tilde.core.is_dirac() {
            return Err(Error::Unsupported("the product has a point-mass spectrum".into()));
        }
        let (m, n1, n2) = (self.spec.m, self.spec.n1, self.spec.n2);
        let r = self.spec.rank();
        let mut q: Vec<FallibleFn> = Vec::with_capacity(r);
        for j in 0..r {
            let (coef, order) = match self.branch {
                RankBranch::Preserving => (
                    factorial(m + j - n2)
                        / (factorial(m - n1) * factorial(n1 + j - n2) * self.spec.omega.mellin_real((n1 + j - n2 + 1) as f64)),
                    n2 - j - 1,
                ),
                RankBranch::Lowering => (
                    factorial(m + j - n1) / (factorial(m - n1) * factorial(j) * self.spec.omega.mellin_real((j + 1) as f64)),
                    n1 - j - 1,
                ),
            };
            let lag: Vec<f64> = (0..n2)
                .map(|c| inverse_vandermonde_entry(&self.a, c, order))
                .collect::<Result<_>>()?;
            let a = self.a.clone();
            let tilde = self.tilde.clone();
            q.push(Arc::new(move |x: f64| {
                let mut acc = 0.0;
                for c in 0..a.len() {
                    acc += lag[c] * tilde.eval(x, a[c])?;
                }
                Ok(coef * acc)
            }));
        }
        BiorthSystem::monomial(q, self.breaks())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Ok(self.biorth()?.kernel())
    }

    /// K(ã, ã).
    pub fn level_density(&self, x: f64) -> Result<f64> {
        self.kernel()?.level_density(x)
    }

    /// ∫ ã^b ω̃(ã|a_c) dã, computed by quadrature.
    pub fn tilde_moment(&self, b: usize, c: usize) -> Result<f64> {
        let a = self.a[c];
        let mut br = self.breaks();
        br.push(0.0);
        integrate_fallible(
            |x| Ok(x.powi(b as i32) * self.tilde.eval(x, a)?),
            Domain::FullLine,
            &merge_breaks(br),
            &self.cfg,
        )
    }
}

/// Coefficients of the polynomial χ(z) = Σ_h χ_h z^{h + offset}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiPolynomial {
    pub offset: usize,
    pub coeffs: Vec<f64>,
}

impl ChiPolynomial {
    /// The finite sum with one term per bi-orthonormal function.
    pub fn new(spec: &ProductSpec, branch: RankBranch) -> Result<Self> {
        spec.check_branch(branch)?;
        let terms = match branch {
            RankBranch::Preserving => spec.n2,
            RankBranch::Lowering => spec.n1,
        };
        Self::with_terms(spec, branch, terms)
    }

    /// The same series continued to `terms` coefficients, where the moments exist.
    pub fn with_terms(spec: &ProductSpec, branch: RankBranch, terms: usize) -> Result<Self> {
        spec.check_branch(branch)?;
        let (m, n1, n2) = (spec.m as i64, spec.n1 as i64, spec.n2 as i64);
        let mut coeffs = Vec::with_capacity(terms);
        for h in 0..terms as i64 {
            let (num, den_f, arg) = match branch {
                RankBranch::Preserving => (m + h - n2, n1 + h - n2, n1 + h - n2 + 1),
                RankBranch::Lowering => (m + h - n1, h, h + 1),
            };
            if num < 0 || den_f < 0 {
                return Err(Error::InvalidArgument(format!("χ coefficient {h} is undefined for these ranks")));
            }
            let mw = spec.omega.mellin_real(arg as f64);
            if !(mw.is_finite() && mw != 0.0) {
                return Err(Error::Pole(format!("Mω({arg}) = {mw}")));
            }
            coeffs.push(factorial(num as usize) / (factorial(spec.m - spec.n1) * factorial(den_f as usize) * mw));
        }
        let offset = match branch {
            RankBranch::Preserving => 0,
            RankBranch::Lowering => spec.n2 - spec.n1,
        };
        Ok(Self { offset, coeffs })
    }

    pub fn eval(&self, z: C64) -> C64 {
        poly_eval(&self.coeffs, z) * z.powu(self.offset as u32)
    }

    /// Evaluates a continued series, refusing when the last term is not below 10⁻¹⁴ of the sum.
    pub fn eval_series(&self, z: C64) -> Result<C64> {
        let v = self.eval(z);
        let last = self.coeffs.last().copied().unwrap_or(0.0).abs() * z.norm().powi((self.coeffs.len() + self.offset) as i32 - 1);
        if last >= 1e-14 * v.norm().max(1e-300) {
            return Err(Error::InvalidArgument(format!(
                "χ series not converged at |z| = {} (last term {last:e})",
                z.norm()
            )));
        }
        Ok(v)
    }
}

/// Contour-integral settings for transforms acting on polynomials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub points: usize,
    /// Fixed radius; by default the modulus of the evaluation point.
    pub radius: Option<f64>,
    /// Relative disagreement allowed between two radii before reporting an error.
    pub radius_tol: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            points: 64,
            radius: None,
            radius_tol: 1e-8,
        }
    }
}

/// ∮ dz/(2πi z) χ(z) f(x/z) with the trapezoid rule.
fn chi_contour<F: Fn(C64) -> Result<C64>>(chi: &ChiPolynomial, f: &F, x: f64, radius: f64, points: usize) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..points {
        let z = C64::from_polar(radius, 2.0 * PI * k as f64 / points as f64);
        acc += chi.eval(z) * f(x / z)?;
    }
    Ok(acc / points as f64)
}

/// g x g* with x drawn from a polynomial ensemble given by its bi-orthonormal system.
#[derive(Clone, Debug)]
pub struct RandomProduct {
    spec: ProductSpec,
    branch: RankBranch,
    tilde: TildeWeight,
    pref: f64,
    source: BiorthSystem,
    ensemble: Option<PolynomialEnsemble>,
    cfg: QuadratureConfig,
}

impl RandomProduct {
    pub fn new(spec: ProductSpec, source: BiorthSystem, branch: RankBranch, method: CoreMethod, cfg: &QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        if source.rank() != spec.n2 {
            return Err(Error::Dimension(format!(
                "source system of rank {} for n₂ = {}",
                source.rank(),
                spec.n2
            )));
        }
        let tilde = spec.tilde_weight(branch, method, cfg)?;
        let pref = spec.prefactor();
        Ok(Self {
            spec,
            branch,
            tilde,
            pref,
            source,
            ensemble: None,
            cfg: *cfg,
        })
    }

    /// Uses the weights of a Hermitian polynomial ensemble and their moment system.
    pub fn from_ensemble(
        spec: ProductSpec,
        ens: &PolynomialEnsemble,
        branch: RankBranch,
        method: CoreMethod,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        if ens.space() != EnsembleSpace::Hermitian {
            return Err(Error::InvalidArgument("x must come from an ensemble of Hermitian matrices".into()));
        }
        let source = biorth_from_ensemble(ens)?;
        let mut out = Self::new(spec, source, branch, method, cfg)?;
        out.ensemble = Some(ens.clone());
        Ok(out)
    }

    pub fn spec(&self) -> &ProductSpec {
        &self.spec
    }

    pub fn branch(&self) -> RankBranch {
        self.branch
    }

    pub fn source(&self) -> &BiorthSystem {
        &self.source
    }

    pub fn tilde_weight(&self) -> &TildeWeight {
        &self.tilde
    }

    fn shift(&self) -> usize {
        match self.branch {
            RankBranch::Preserving => 0,
            RankBranch::Lowering => self.spec.n2 - self.spec.n1,
        }
    }

    /// Joint density through the weights w_c of x and det[Mw_b(c, c−1)].
    pub fn jpdf_weights(&self, at: &[f64]) -> Result<f64> {
        let ens = self
            .ensemble
            .as_ref()
            .ok_or_else(|| Error::Unsupported("no weight representation of x was supplied".into()))?;
        let r = self.spec.rank();
        let n2 = self.spec.n2;
        if at.len() != r {
            return Err(Error::Dimension(format!("{} eigenvalues given for rank {r}", at.len())));
        }
        let k = self.shift();
        let mut mat = Vec::with_capacity(n2 * n2);
        for b in 1..=k {
            for w in ens.weights() {
                mat.push(w.mellin(C64::new(b as f64, 0.0), ((b - 1) % 2) as u8).re);
            }
        }
        for &x in at {
            for w in ens.weights() {
                mat.push(self.tilde.integrate_against(x, |a| Ok(w.eval(a)), w.breaks(), &self.cfg)?);
            }
        }
        Ok(self.pref / factorial(r) * vandermonde(at) * det_real(mat, n2) / ens.normalization())
    }

    /// Joint density through the dual functions q_j of x.
    pub fn jpdf_biorth(&self, at: &[f64]) -> Result<f64> {
        let r = self.spec.rank();
        if at.len() != r {
            return Err(Error::Dimension(format!("{} eigenvalues given for rank {r}", at.len())));
        }
        let k = self.shift();
        if k > 0 && !self.source.is_triangular() {
            return Err(Error::Unsupported("rank-lowering products need triangular polynomials p_j".into()));
        }
        let lead: f64 = (k..self.spec.n2).map(|j| self.source.leading_coefficient(j)).product();
        let mut mat = Vec::with_capacity(r * r);
        for &x in at {
            for c in 0..r {
                let qf = self.source.q_function(k + c);
                mat.push(self.tilde.integrate_against(x, |a| qf(a), self.source.breaks(), &self.cfg)?);
            }
        }
        Ok(self.pref / factorial(r) * lead * vandermonde(at) * det_real(mat, r))
    }

    pub fn chi(&self) -> Result<ChiPolynomial> {
        ChiPolynomial::new(&self.spec, self.branch)
    }

    /// Bi-orthonormal system of g x g*: p̃_j from the constant Laurent coefficient of
    /// χ(z) p_j(ã/z), q̃_j(ã) = ∫ da ω̃(ã|a) q_j(a).
    pub fn transform_biorth(&self) -> Result<BiorthSystem> {
        let k = self.shift();
        if k > 0 && !self.source.is_triangular() {
            return Err(Error::Unsupported("rank-lowering products need triangular polynomials p_j".into()));
        }
        let chi = self.chi()?;
        let r = self.spec.rank();
        let mut p = Vec::with_capacity(r);
        let mut q: Vec<FallibleFn> = Vec::with_capacity(r);
        for j in 0..r {
            let src = self.source.p_coefficients(k + j);
            // χ_h pairs with the coefficient of a^{h + offset}; the lowering branch then divides by ã^{offset}
            let coeffs: Vec<f64> = (0..chi.coeffs.len())
                .map(|h| chi.coeffs[h] * src.get(h + chi.offset).copied().unwrap_or(0.0))
                .collect();
            p.push(trim(coeffs));
            let qf = self.source.q_function(k + j);
            let tilde = self.tilde.clone();
            let breaks = self.source.breaks().to_vec();
            let cfg = self.cfg;
            q.push(Arc::new(move |x: f64| tilde.integrate_against(x, |a| qf(a), &breaks, &cfg)));
        }
        let mut breaks: Vec<f64> = self.source.breaks().to_vec();
        for b in self.source.breaks() {
            for c in self.tilde.core.breaks() {
                breaks.push(b * c);
            }
        }
        BiorthSystem::new(p, q, breaks)
    }

    /// Kernel of g x g* as the contour-times-half-line integral acting on a kernel of x.
    pub fn transform_kernel(&self, source: &Kernel, contour: ContourConfig) -> Result<Kernel> {
        if contour.points < 8 {
            return Err(Error::InvalidArgument("contour needs at least 8 points".into()));
        }
        if let Some(rad) = contour.radius {
            if !(rad > 0.0) || !rad.is_finite() {
                return Err(Error::InvalidArgument(format!("contour radius {rad} must be positive")));
            }
        }
        let chi = self.chi()?;
        let k = self.shift() as i32;
        let tilde = self.tilde.clone();
        let src = source.clone();
        let cfg = self.cfg;
        let mut breaks: Vec<f64> = source.breaks().to_vec();
        for b in source.breaks() {
            for c in self.tilde.core.breaks() {
                breaks.push(b * c);
            }
        }
        let rank = self.spec.rank();
        Ok(Kernel::new(
            rank,
            move |z1: C64, y: f64| {
                if y == 0.0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let base = contour.radius.unwrap_or_else(|| if z1.norm() > 0.0 { z1.norm() } else { 1.0 });
                // z-contour of χ(z) K(z₁/z, v) at two radii
                let contour_at = |v: f64| -> Result<C64> {
                    let f = |w: C64| src.eval_complex(w * z1, v);
                    let first = chi_contour_complex(&chi, &f, base, contour.points)?;
                    let second = chi_contour_complex(&chi, &f, 1.5 * base, contour.points)?;
                    if (first - second).norm() > contour.radius_tol * first.norm().max(second.norm()).max(1e-300)
                        && (first - second).norm() > 1e-14
                    {
                        return Err(Error::InvalidArgument(format!(
                            "contour radius {base} gives unstable Laurent coefficients ({first} vs {second})"
                        )));
                    }
                    Ok(first)
                };
                let inner = if tilde.core.is_dirac() {
                    contour_at(y)?
                } else {
                    let mut tb: Vec<f64> = tilde.core.breaks().iter().filter(|b| **b > 0.0).map(|b| b.ln()).collect();
                    tb.extend(src.breaks().iter().filter(|b| y / **b > 0.0).map(|b| (y / b).ln()));
                    let tb = merge_breaks(tb);
                    integrate_fallible_complex(
                        |t| {
                            let u = t.exp();
                            if u == 0.0 || !u.is_finite() {
                                return Ok(C64::new(0.0, 0.0));
                            }
                            let w = tilde.unit(u)?;
                            if w == 0.0 {
                                return Ok(C64::new(0.0, 0.0));
                            }
                            Ok(contour_at(y / u)? * (w * u.powi(-k)))
                        },
                        Domain::FullLine,
                        &tb,
                        &cfg,
                    )?
                };
                Ok(inner * (C64::new(y, 0.0) / z1).powi(k))
            },
            breaks,
        ))
    }
}

/// ∮ dz/(2πi z) χ(z) f(1/z) on |z| = radius; `f` receives 1/z.
fn chi_contour_complex<F: Fn(C64) -> Result<C64>>(chi: &ChiPolynomial, f: &F, radius: f64, points: usize) -> Result<C64> {
    chi_contour(chi, f, 1.0, radius, points)
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    c
}

/// Moment-based system of a polynomial ensemble: p_j(a) = a^j and
/// q_i = Σ_c B_ic w_c with B = (Gᵀ)⁻¹, G_jc = ∫ a^j w_c(a) da.
pub fn biorth_from_ensemble(ens: &PolynomialEnsemble) -> Result<BiorthSystem> {
    let n = ens.rank();
    let mut gt = vec![0.0; n * n];
    for (c, w) in ens.weights().iter().enumerate() {
        for j in 0..n {
            let parity = match ens.space() {
                EnsembleSpace::Rectangular => 0,
                EnsembleSpace::Hermitian => (j % 2) as u8,
            };
            // row c, column j of Gᵀ
            gt[c * n + j] = w.mellin(C64::new((j + 1) as f64, 0.0), parity).re;
        }
    }
    let b = inverse_real(&gt, n)?;
    let mut breaks = Vec::new();
    let weights: Vec<_> = ens.weights().to_vec();
    for w in &weights {
        breaks.extend_from_slice(w.breaks());
    }
    let weights = Arc::new(weights);
    let q: Vec<FallibleFn> = (0..n)
        .map(|i| {
            let row: Vec<f64> = b[i * n..(i + 1) * n].to_vec();
            let ws = weights.clone();
            Arc::new(move |x: f64| Ok(row.iter().zip(ws.iter()).map(|(bc, w)| bc * w.eval(x)).sum())) as FallibleFn
        })
        .collect();
    BiorthSystem::monomial(q, breaks)
}

/// Constant Laurent coefficient of χ(z) p(x/z) computed on a circle, for checking the
/// coefficient form used by [`RandomProduct::transform_biorth`].
pub fn chi_transform_polynomial(chi: &ChiPolynomial, p: &[f64], x: f64, contour: ContourConfig) -> Result<f64> {
    let radius = contour.radius.unwrap_or(if x != 0.0 { x.abs() } else { 1.0 });
    let v = chi_contour(chi, &|w: C64| Ok(poly_eval(p, w)), x, radius, contour.points)?;
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::polya_jpdf;
    use crate::mellin::{inverse_mellin, InversionConfig};
    use crate::numerics::integrate_nd;
    use crate::numerics::special::gamma;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::with_tol(1e-12, 1e-10)
    }

    fn ginibre_spec(l: usize, m: usize, n1: usize, n2: usize) -> ProductSpec {
        ProductSpec::new(l, m, n1, n2, PolyaWeight::ginibre(0.0).unwrap()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ProductSpec::new(2, 2, 3, 1, PolyaWeight::ginibre(0.0).unwrap()).is_err());
        assert!(ProductSpec::new(2, 2, 2, 3, PolyaWeight::ginibre(0.0).unwrap()).is_err());
        let s = ginibre_spec(3, 2, 2, 1);
        assert_eq!(s.rank(), 1);
        assert!(s.check_branch(RankBranch::Lowering).is_err());
        let s = ginibre_spec(2, 2, 2, 2);
        assert!(s.check_branch(RankBranch::Lowering).is_ok() && s.check_branch(RankBranch::Preserving).is_ok());
    }

    #[test]
    fn tilde_weight_examples() {
        let s = ginibre_spec(1, 1, 1, 1);
        let t = s.tilde_weight(RankBranch::Preserving, CoreMethod::Auto, &cfg()).unwrap();
        for (x, a) in [(1.3, 2.0), (-0.7, -0.4)] {
            assert!((t.eval(x, a).unwrap() - (-x / a).exp() / a.abs()).abs() < 1e-15);
        }
        assert_eq!(t.eval(-1.0, 2.0).unwrap(), 0.0);
        // m = n₁, n₂ − n₁ = 1: ω̃_< = a e^{−ã/a}/|a|
        let s = ginibre_spec(1, 2, 1, 2);
        let t = s.tilde_weight(RankBranch::Lowering, CoreMethod::Auto, &cfg()).unwrap();
        assert!(t.core().breaks().is_empty() || t.core().breaks() == [1.0]);
        let s2 = ginibre_spec(2, 2, 2, 2);
        let t2 = s2.tilde_weight(RankBranch::Lowering, CoreMethod::Auto, &cfg()).unwrap();
        for (x, a) in [(1.3, 2.0), (-0.7, -0.4)] {
            assert!((t2.eval(x, a).unwrap() - (-x / a).exp() / a.abs()).abs() < 1e-15);
        }
        assert_eq!(t.eval(1.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_integral_core() {
        // m = n₁ + 1: core(u) = ∫₀¹ da′/a′ e^{−u/a′} = E₁(u)
        let s = ginibre_spec(1, 2, 1, 1);
        let core = s.core(CoreMethod::Auto, &cfg()).unwrap();
        let v = core.eval(1.0).unwrap();
        assert!((v - 0.219_383_934_395_520).abs() < 1e-10, "{v}");
        // the same value from inverting Mω₀(s)Mω(s) = Γ(s)/s
        let inv = inverse_mellin(|p| Ok(gamma(p.s) / p.s), 1.0, &InversionConfig::default()).unwrap();
        assert!((inv.value - v).abs() < 1e-6, "{inv:?}");
    }

    #[test]
    fn tilde_moments_match_closed_form() {
        for (m, n1, n2) in [(2usize, 1usize, 1usize), (3, 2, 1), (2, 2, 2), (3, 2, 2)] {
            let s = ginibre_spec(m, m, n1, n2);
            let fp = FixedProduct::new(
                s.clone(),
                &vec![1.5; n2].iter().enumerate().map(|(i, v)| v + i as f64).collect::<Vec<_>>(),
                RankBranch::Preserving,
                CoreMethod::Auto,
                &cfg(),
            )
            .unwrap();
            for b in 0..3usize {
                let got = fp.tilde_moment(b, 0).unwrap();
                let a: f64 = fp.spectrum()[0];
                let want = factorial(m - n1) * factorial(n1 + b - n2) / factorial(m + b - n2)
                    * s.omega.mellin_real((n1 + b - n2 + 1) as f64)
                    * a.powi(b as i32);
                assert!(
                    (got - want).abs() < 1e-8 * want.abs(),
                    "m={m} n1={n1} n2={n2} b={b}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn elementary_symmetric_examples() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0], 0).unwrap(), 1.0);
        assert!((elementary_symmetric(&[1.0, 2.0], 1).unwrap() + 3.0).abs() < 1e-14);
        assert!((elementary_symmetric(&[1.0, 2.0], 2).unwrap() - 2.0).abs() < 1e-14);
        let a = [0.3, -1.7, 2.2, 5.0];
        for o in 0..=4 {
            assert!((elementary_symmetric(&a, o).unwrap() - elementary_symmetric_expanded(&a, o)).abs() < 1e-12);
        }
        assert!(elementary_symmetric(&a, 5).is_err());
    }

    #[test]
    fn inverse_vandermonde_orthogonality() {
        let a: [f64; 3] = [-1.3, 0.4, 2.9];
        let n = a.len();
        for b in 0..n {
            for bp in 0..n {
                let s: f64 = (0..n)
                    .map(|c| a[c].powi(b as i32) * inverse_vandermonde_entry(&a, c, n - 1 - bp).unwrap())
                    .sum();
                let want = if b == bp { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_product_density() {
        let fp = FixedProduct::new(ginibre_spec(1, 1, 1, 1), &[2.0], RankBranch::Preserving, CoreMethod::Auto, &cfg()).unwrap();
        assert!((fp.jpdf(&[2.0]).unwrap() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert_eq!(fp.jpdf(&[-2.0]).unwrap(), 0.0);
    }

    #[test]
    fn fixed_product_normalization_and_signature() {
        let qc = QuadratureConfig::with_tol(1e-10, 1e-8);
        let fp = FixedProduct::new(
            ginibre_spec(2, 2, 2, 2),
            &[1.0, 2.0],
            RankBranch::Preserving,
            CoreMethod::Auto,
            &cfg(),
        )
        .unwrap();
        let mass: f64 = integrate_nd(&|x: &[f64]| fp.jpdf(x).unwrap(), 2, Domain::FullLine, &[0.0], &qc).unwrap();
        assert!((mass - 1.0).abs() < 1e-5, "{mass}");
        let mixed = FixedProduct::new(
            ginibre_spec(2, 2, 2, 2),
            &[-1.0, 2.0],
            RankBranch::Preserving,
            CoreMethod::Auto,
            &cfg(),
        )
        .unwrap();
        assert_eq!(mixed.jpdf(&[0.5, 1.0]).unwrap(), 0.0);
        assert_eq!(mixed.jpdf(&[-0.5, -1.0]).unwrap(), 0.0);
        assert!(mixed.jpdf(&[-0.5, 1.0]).unwrap() > 0.0);
    }

    #[test]
    fn branches_agree_at_equal_ranks() {
        for a in [[1.0, 2.5], [-1.0, 2.0]] {
            let s = ginibre_spec(3, 3, 2, 2);
            let p = FixedProduct::new(s.clone(), &a, RankBranch::Preserving, CoreMethod::Auto, &cfg()).unwrap();
            let l = FixedProduct::new(s, &a, RankBranch::Lowering, CoreMethod::Auto, &cfg()).unwrap();
            for x in [[0.3, 1.9], [-0.4, 2.2], [0.7, 0.8]] {
                let (u, v) = (p.jpdf(&x).unwrap(), l.jpdf(&x).unwrap());
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-300), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn repeated_spectrum_limit() {
        // x = 1 gives g g*, the Pólya ensemble itself
        let fp = FixedProduct::new(
            ginibre_spec(2, 2, 2, 2),
            &[1.0, 1.0],
            RankBranch::Preserving,
            CoreMethod::Auto,
            &cfg(),
        )
        .unwrap();
        assert!(fp.is_degenerate());
        let g = PolyaWeight::ginibre(0.0).unwrap();
        for x in [[0.5, 1.5], [0.2, 3.0]] {
            let v = fp.jpdf(&x).unwrap();
            let w = polya_jpdf(&g, &x).unwrap();
            assert!((v - w).abs() < 1e-7 * w, "{v} vs {w}");
        }
    }

    #[test]
    fn biorthonormal_and_determinantal() {
        let qc = QuadratureConfig::with_tol(1e-12, 1e-10);
        for (spec, a) in [
            (ginibre_spec(2, 2, 2, 2), vec![1.0, 3.0]),
            (ginibre_spec(2, 3, 1, 2), vec![1.0, 3.0]),
            (ginibre_spec(3, 3, 2, 2), vec![-1.0, 2.0]),
        ] {
            let fp = FixedProduct::new(spec.clone(), &a, spec.natural_branch(), CoreMethod::Auto, &cfg()).unwrap();
            let sys = fp.biorth().unwrap();
            assert!(sys.biorthogonality_defect(&qc).unwrap() < 1e-6);
            let k = sys.kernel();
            let r = spec.rank();
            let pts: Vec<Vec<f64>> = if r == 1 {
                vec![vec![0.7], vec![2.5]]
            } else {
                vec![vec![0.7, 2.5], vec![-0.3, 1.1]]
            };
            for p in pts {
                let j = fp.jpdf(&p).unwrap();
                let d = jpdf_from_kernel(&k, &p).unwrap();
                assert!((j - d).abs() <= 1e-8 * j.abs().max(1e-12), "{spec:?} {p:?}: {j} vs {d}");
            }
            assert!((k.trace(&qc).unwrap() - r as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn chi_examples() {
        let s = ginibre_spec(3, 3, 3, 3);
        let chi = ChiPolynomial::new(&s, RankBranch::Preserving).unwrap();
        for (h, c) in chi.coeffs.iter().enumerate() {
            assert!((c - 1.0 / factorial(h)).abs() < 1e-14);
        }
        let s = ginibre_spec(1, 1, 1, 1);
        let chi = ChiPolynomial::new(&s, RankBranch::Preserving).unwrap();
        assert_eq!(chi.coeffs, vec![1.0 / s.omega.mellin_real(1.0)]);
        let s = ginibre_spec(2, 3, 1, 3);
        let chi = ChiPolynomial::new(&s, RankBranch::Lowering).unwrap();
        assert_eq!(chi.offset, 2);
        let long = ChiPolynomial::with_terms(&ginibre_spec(2, 2, 2, 2), RankBranch::Preserving, 40).unwrap();
        assert!(long.eval_series(C64::new(0.5, 0.0)).is_ok());
        assert!(ChiPolynomial::with_terms(&ginibre_spec(2, 2, 2, 2), RankBranch::Preserving, 3)
            .unwrap()
            .eval_series(C64::new(2.0, 0.0))
            .is_err());
    }

    #[test]
    fn contour_and_coefficient_forms_agree() {
        let chi = ChiPolynomial::new(&ginibre_spec(3, 3, 3, 3), RankBranch::Preserving).unwrap();
        let p = [0.5, -1.0, 2.0];
        for x in [0.3, -2.0, 4.0] {
            let v = chi_transform_polynomial(&chi, &p, x, ContourConfig::default()).unwrap();
            let want = 0.5 - x + x * x;
            assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        }
    }

    fn gue_product(spec: ProductSpec, branch: RankBranch) -> RandomProduct {
        let ens = PolynomialEnsemble::gaussian_hermitian(spec.n2).unwrap();
        RandomProduct::from_ensemble(spec, &ens, branch, CoreMethod::Auto, &cfg()).unwrap()
    }

    #[test]
    fn random_source_system_is_biorthonormal() {
        let ens = PolynomialEnsemble::gaussian_hermitian(3).unwrap();
        let sys = biorth_from_ensemble(&ens).unwrap();
        assert!(sys.biorthogonality_defect(&cfg()).unwrap() < 1e-8);
        let k = sys.kernel();
        for a in [[0.3, -1.2, 0.9], [1.5, 0.7, -2.0]] {
            let d = jpdf_from_kernel(&k, &a).unwrap();
            assert!((d - ens.density(&a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn random_weight_and_biorthonormal_forms_agree() {
        let cases = [
            (ginibre_spec(2, 2, 2, 2), RankBranch::Preserving),
            (ginibre_spec(3, 3, 2, 1), RankBranch::Preserving),
            (ginibre_spec(1, 2, 1, 2), RankBranch::Lowering),
        ];
        for (spec, branch) in cases {
            let rp = gue_product(spec.clone(), branch);
            let r = spec.rank();
            let pts: Vec<Vec<f64>> = if r == 1 {
                vec![vec![0.7], vec![-1.4]]
            } else {
                vec![vec![0.7, -1.4], vec![0.3, 2.1]]
            };
            for x in pts {
                let u = rp.jpdf_weights(&x).unwrap();
                let v = rp.jpdf_biorth(&x).unwrap();
                assert!((u - v).abs() <= 1e-8 * u.abs().max(1e-12), "{spec:?} {x:?}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn transformed_system_and_kernel() {
        let cases = [
            (ginibre_spec(2, 2, 2, 2), RankBranch::Preserving),
            (ginibre_spec(1, 2, 1, 2), RankBranch::Lowering),
        ];
        let qc = QuadratureConfig::with_tol(1e-11, 1e-9);
        for (spec, branch) in cases {
            let rp = gue_product(spec.clone(), branch);
            let sys = rp.transform_biorth().unwrap();
            let dev = sys.biorthogonality_defect(&qc).unwrap();
            assert!(dev < 1e-6, "{spec:?}: {dev}");
            let direct = sys.kernel();
            let via = rp.transform_kernel(&rp.source().kernel(), ContourConfig::default()).unwrap();
            for (x, y) in [(0.7, 0.7), (-1.3, 0.4), (2.0, -0.5)] {
                let u = direct.eval(x, y).unwrap();
                let v = via.eval(x, y).unwrap();
                assert!((u - v).abs() < 1e-6 * u.abs().max(1.0), "{spec:?} ({x},{y}): {u} vs {v}");
            }
            let r = spec.rank();
            let x: Vec<f64> = [0.6, -1.1][..r].to_vec();
            let j = rp.jpdf_biorth(&x).unwrap();
            let d = jpdf_from_kernel(&direct, &x).unwrap();
            assert!((j - d).abs() < 1e-8 * j.abs().max(1e-12), "{j} vs {d}");
        }
    }

    #[test]
    fn inclusion_is_the_identity() {
        let spec = ProductSpec::new(2, 2, 2, 2, PolyaWeight::DiracUnit).unwrap();
        let rp = gue_product(spec, RankBranch::Preserving);
        let src = rp.source().kernel();
        let k = rp.transform_kernel(&src, ContourConfig::default()).unwrap();
        for (x, y) in [(0.7, 0.7), (-1.3, 0.4), (2.0, -0.5)] {
            assert!((k.eval(x, y).unwrap() - src.eval(x, y).unwrap()).abs() < 1e-8);
        }
    }
}
