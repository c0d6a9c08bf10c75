//! Spherical functions Φ on Hermitian matrices of fixed rank and Ψ on complex
//! rectangular matrices: closed forms, normalization constants, the Haar-average
//! definition, transforms, factorization over products and the inverse transform.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mellin::{choose_cutoff, frequency_grid, richardson, zeta_regularizer, InverseEstimate, InversionConfig};
use crate::numerics::det::det_complex;
use crate::numerics::special::{factorial, rising, superfactorial};
use crate::numerics::{
    haar_unitary, hermitian_eigenvalues, integrate_nd, leading_eigenvalues, sample_parallel, vandermonde, ComplexMatrix, Domain,
    McEstimate, PositiveSpectrum, QuadratureConfig, SignedSpectrum,
};

/// Spherical frequency (s, L): complex exponents with a parity per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    s: Vec<C64>,
    l: Vec<u8>,
}

impl Frequency {
    pub fn new(s: Vec<C64>, l: Vec<u8>) -> Result<Self> {
        if s.len() != l.len() {
            return Err(Error::Dimension(format!("{} exponents but {} parities", s.len(), l.len())));
        }
        if s.is_empty() {
            return Err(Error::Dimension("frequency needs at least one entry".into()));
        }
        if l.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("parities must be 0 or 1".into()));
        }
        if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("exponents must be finite".into()));
        }
        Ok(Self { s, l })
    }

    pub fn real(s: &[f64], l: &[u8]) -> Result<Self> {
        Self::new(s.iter().map(|&x| C64::new(x, 0.0)).collect(), l.to_vec())
    }

    /// Frequency with all parities zero (the Ψ case).
    pub fn even(s: Vec<C64>) -> Result<Self> {
        let l = vec![0; s.len()];
        Self::new(s, l)
    }

    /// s⁽ⁿ⁾ = (n−1, …, 1, 0) with L⁽ⁿ⁾ = ((n−1) mod 2, …, 1, 0).
    pub fn standard(n: usize) -> Self {
        let s = standard_exponents(n).into_iter().map(|x| C64::new(x, 0.0)).collect();
        let l = (0..n).map(|b| ((n - 1 - b) % 2) as u8).collect();
        Self { s, l }
    }

    pub fn s(&self) -> &[C64] {
        &self.s
    }

    pub fn l(&self) -> &[u8] {
        &self.l
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// (s + μ1, L + j1)
    pub fn shifted(&self, mu: C64, j: i64) -> Self {
        Self {
            s: self.s.iter().map(|z| z + mu).collect(),
            l: self.l.iter().map(|&v| (v as i64 + j).rem_euclid(2) as u8).collect(),
        }
    }
}

/// (n−1, …, 1, 0)
pub fn standard_exponents(n: usize) -> Vec<f64> {
    (0..n).rev().map(|j| j as f64).collect()
}

/// Ambient dimensions and rank of a matrix space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfile {
    pub l: usize,
    pub m: usize,
    pub n: usize,
}

impl RankProfile {
    /// l×m complex matrices of rank n.
    pub fn g_type(l: usize, m: usize, n: usize) -> Result<Self> {
        if n == 0 || n > l.min(m) {
            return Err(Error::Dimension(format!("rank {n} impossible for {l}×{m} matrices")));
        }
        Ok(Self { l, m, n })
    }

    /// l×l Hermitian matrices of rank n.
    pub fn h_type(l: usize, n: usize) -> Result<Self> {
        if n == 0 || n > l {
            return Err(Error::Dimension(format!("rank {n} impossible for {l}×{l} matrices")));
        }
        Ok(Self { l, m: l, n })
    }
}

const CONTOUR_NODES: usize = 64;

/// Prefix divided differences f[x₀], f[x₀,x₁], …, f[x₀..x_{k−1}] of a vector-valued f.
///
/// Each subset is reduced by the recurrence on its most distant pair, so a
/// division never involves two close points. Tight clusters (as decided by
/// `cluster`, which returns a contour radius) are evaluated by the Cauchy
/// integral (1/2πi)∮ f(z)/∏(z − xᵢ) dz around their mean instead.
fn prefix_divided_differences<F, R>(x: &[C64], f: &F, cluster: &R) -> Vec<Vec<C64>>
where
    F: Fn(C64) -> Vec<C64>,
    R: Fn(&[C64]) -> Option<f64>,
{
    let k = x.len();
    let mut memo: Vec<Option<Vec<C64>>> = vec![None; 1 << k];
    fn rec<F, R>(mask: usize, x: &[C64], f: &F, cluster: &R, memo: &mut Vec<Option<Vec<C64>>>) -> Vec<C64>
    where
        F: Fn(C64) -> Vec<C64>,
        R: Fn(&[C64]) -> Option<f64>,
    {
        if let Some(v) = &memo[mask] {
            return v.clone();
        }
        let idx: Vec<usize> = (0..x.len()).filter(|i| mask & (1 << i) != 0).collect();
        let out = if idx.len() == 1 {
            f(x[idx[0]])
        } else {
            let pts: Vec<C64> = idx.iter().map(|&i| x[i]).collect();
            match cluster(&pts) {
                Some(radius) => {
                    let center = pts.iter().sum::<C64>() / pts.len() as f64;
                    let mut acc: Option<Vec<C64>> = None;
                    for j in 0..CONTOUR_NODES {
                        let w = C64::from_polar(radius, 2.0 * PI * j as f64 / CONTOUR_NODES as f64);
                        let z = center + w;
                        let denom: C64 = pts.iter().map(|p| z - p).product();
                        let scale = w / denom / CONTOUR_NODES as f64;
                        let fz = f(z);
                        match &mut acc {
                            None => acc = Some(fz.into_iter().map(|v| v * scale).collect()),
                            Some(a) => a.iter_mut().zip(fz).for_each(|(a, v)| *a += v * scale),
                        }
                    }
                    acc.expect("contour has nodes")
                }
                None => {
                    let (mut p, mut q, mut best) = (idx[0], idx[1], -1.0);
                    for (i, &u) in idx.iter().enumerate() {
                        for &v in &idx[i + 1..] {
                            let d = (x[u] - x[v]).norm();
                            if d > best {
                                best = d;
                                p = u;
                                q = v;
                            }
                        }
                    }
                    let without_p = rec(mask & !(1 << p), x, f, cluster, memo);
                    let without_q = rec(mask & !(1 << q), x, f, cluster, memo);
                    let h = x[q] - x[p];
                    without_p.iter().zip(&without_q).map(|(a, b)| (a - b) / h).collect()
                }
            }
        };
        memo[mask] = Some(out.clone());
        out
    }
    (1..=k).map(|j| rec((1 << j) - 1, x, f, cluster, &mut memo)).collect()
}

fn max_spread(pts: &[C64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Same-sign eigenvalues within 10% of their smallest modulus are treated as a cluster.
fn eigenvalue_cluster(pts: &[C64]) -> Option<f64> {
    let sign = pts[0].re.signum();
    if pts.iter().any(|p| p.re.signum() != sign) {
        return None;
    }
    let min_abs = pts.iter().map(|p| p.re.abs()).fold(f64::INFINITY, f64::min);
    if max_spread(pts) <= 0.1 * min_abs {
        let center = pts.iter().sum::<C64>() / pts.len() as f64;
        Some(0.3 * center.norm())
    } else {
        None
    }
}

fn exponent_cluster(pts: &[C64]) -> Option<f64> {
    (max_spread(pts) <= 0.1).then_some(0.5)
}

/// sign(z)^L |z|^s continued analytically into the half plane of z.
fn signed_power(z: C64, s: C64, l: u8) -> C64 {
    let sign = if z.re < 0.0 { -1.0 } else { 1.0 };
    let v = (s * (z * sign).ln()).exp();
    if l == 1 {
        v * sign
    } else {
        v
    }
}

/// det[sign(a_c)^{L_b} |a_c|^{s_b}] / (Δ(a) Δ(s)), with confluent limits in s and a.
pub fn spherical_det_ratio(s: &[C64], l: &[u8], a: &[f64]) -> Result<C64> {
    let n = s.len();
    if l.len() != n || a.len() != n {
        return Err(Error::Dimension(format!(
            "{} exponents, {} parities, {} eigenvalues",
            n,
            l.len(),
            a.len()
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("empty frequency".into()));
    }
    if a.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("eigenvalues must be finite and nonzero".into()));
    }
    let mut a_sorted = a.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    let pos = a_sorted.iter().all(|v| *v > 0.0);
    let neg = a_sorted.iter().all(|v| *v < 0.0);
    let mut factor = C64::new(1.0, 0.0);
    let l_eff: Vec<u8> = if pos {
        vec![0; n]
    } else if neg {
        // each row picks up (−1)^{L_b}
        if l.iter().filter(|&&v| v == 1).count() % 2 == 1 {
            factor = -factor;
        }
        vec![0; n]
    } else {
        l.to_vec()
    };
    let pts_a: Vec<C64> = a_sorted.iter().map(|&v| C64::new(v, 0.0)).collect();
    // column functions G_c(s, L) = g_{s,L}[a_1..a_c]
    let columns = |z: C64, parity: u8| -> Vec<C64> {
        let g = |x: C64| vec![signed_power(x, z, parity)];
        prefix_divided_differences(&pts_a, &g, &eigenvalue_cluster)
            .into_iter()
            .map(|v| v[0])
            .collect()
    };
    Ok(factor * det_over_vandermonde(s, &l_eff, &columns)?)
}

/// det[F_b(s_c, L_c)] / Δ(s) for a vector-valued column function F(s, L) of length n,
/// analytic in s. Columns sharing a parity are reduced by divided differences in s;
/// two equal exponents with different parities are a pole.
pub(crate) fn det_over_vandermonde<F>(s: &[C64], l: &[u8], columns: &F) -> Result<C64>
where
    F: Fn(C64, u8) -> Vec<C64>,
{
    let n = s.len();
    let group0: Vec<usize> = (0..n).filter(|&b| l[b] == 0).collect();
    let group1: Vec<usize> = (0..n).filter(|&b| l[b] == 1).collect();
    let mut rows: Vec<C64> = Vec::with_capacity(n * n);
    for (parity, group) in [(0u8, &group0), (1u8, &group1)] {
        if group.is_empty() {
            continue;
        }
        let pts: Vec<C64> = group.iter().map(|&b| s[b]).collect();
        let f = |z: C64| columns(z, parity);
        for row in prefix_divided_differences(&pts, &f, &exponent_cluster) {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "column function returned {} entries for n = {n}",
                    row.len()
                )));
            }
            rows.extend(row);
        }
    }
    // reordering rows and exponents into (parity 0, parity 1) changes both
    // det and Δ(s) by the same sign
    let mut cross = C64::new(1.0, 0.0);
    for &c in &group1 {
        for &d in &group0 {
            let diff = s[c] - s[d];
            if diff.norm() <= 1e-12 * (1.0 + s[c].norm()) {
                return Err(Error::Pole(format!(
                    "exponents {} and {} coincide across parity channels",
                    s[c], s[d]
                )));
            }
            cross *= diff;
        }
    }
    Ok(det_complex(rows, n) / cross)
}

/// Φ(s, L; a) = (∏_{j<n} j!) det[sign(a_c)^{L_b}|a_c|^{s_b}] / (Δ(a)Δ(s)).
pub fn phi(freq: &Frequency, a: &SignedSpectrum) -> Result<C64> {
    phi_slices(freq.s(), freq.l(), a.values())
}

pub fn phi_slices(s: &[C64], l: &[u8], a: &[f64]) -> Result<C64> {
    Ok(spherical_det_ratio(s, l, a)? * superfactorial(s.len()))
}

/// Ψ(s; a) = (∏_{j<n} j!) det[a_c^{s_b}] / (Δ(a)Δ(s)) on squared singular values.
pub fn psi(s: &[C64], a: &PositiveSpectrum) -> Result<C64> {
    psi_slices(s, a.values())
}

pub fn psi_slices(s: &[C64], a: &[f64]) -> Result<C64> {
    if a.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidArgument("Ψ needs positive squared singular values".into()));
    }
    phi_slices(s, &vec![0; s.len()], a)
}

/// C_{l,n}(s) = ∏_{j=1}^n (l−j)! Γ(s_j+1) / ((n−j)! Γ(s_j+l−n+1)).
pub fn normalization_c(l: usize, n: usize, s: &[C64]) -> Result<C64> {
    if s.len() != n {
        return Err(Error::Dimension(format!("{} exponents for rank {n}", s.len())));
    }
    if n > l {
        return Err(Error::Dimension(format!("rank {n} exceeds dimension {l}")));
    }
    let mut out = C64::new(1.0, 0.0);
    for (j, sj) in s.iter().enumerate() {
        let j = j + 1;
        let r = rising(sj + 1.0, l - n);
        if r.norm() == 0.0 {
            return Err(Error::Pole(format!("C_({l},{n}) has a pole at s_{j} = {sj}")));
        }
        out *= factorial(l - j) / factorial(n - j) / r;
    }
    Ok(out)
}

/// Monte Carlo estimates of the Haar averages defining Φ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefinitionEstimate {
    /// E_k ∏ sign(det_j)^{L_j−L_{j+1}−1} |det_j|^{s_j−s_{j+1}−1} over leading minors of k x k*.
    pub numerator: McEstimate,
    /// The same average for x = diag(1_n, 0), i.e. C_{l,n}(s).
    pub denominator: McEstimate,
    pub ratio: McEstimate,
}

fn leading_minor(y: &ComplexMatrix, j: usize) -> f64 {
    let mut data = Vec::with_capacity(j * j);
    for r in 0..j {
        for c in 0..j {
            data.push(y[(r, c)]);
        }
    }
    det_complex(data, j).re
}

fn minor_product(y: &ComplexMatrix, s: &[C64], l: &[u8], signed: bool) -> C64 {
    let n = s.len();
    let mut out = C64::new(1.0, 0.0);
    for j in 0..n {
        let (s_next, l_next) = if j + 1 < n {
            (s[j + 1], l[j + 1] as i64)
        } else {
            (C64::new(-1.0, 0.0), -1)
        };
        let e = s[j] - s_next - 1.0;
        let d = leading_minor(y, j + 1);
        if d == 0.0 {
            if e.norm() != 0.0 {
                return C64::new(0.0, 0.0);
            }
            continue;
        }
        out *= (e * d.abs().ln()).exp();
        if signed && d < 0.0 && (l[j] as i64 - l_next - 1).rem_euclid(2) == 1 {
            out = -out;
        }
    }
    out
}

/// diag(a, 0) as an l×l matrix.
pub fn embedded_spectrum(l: usize, a: &[f64]) -> Result<ComplexMatrix> {
    if a.len() > l {
        return Err(Error::Dimension(format!("{} eigenvalues do not fit in dimension {l}", a.len())));
    }
    Ok(ComplexMatrix::from_diagonal(l, l, a))
}

/// Evaluates the Haar-average definition of Φ(s, L; x) by sampling k ∈ U(l).
/// Numerator and denominator share the unitary draws.
pub fn phi_definition_mc(freq: &Frequency, x: &ComplexMatrix, samples: usize, seed: u64) -> Result<DefinitionEstimate> {
    let n = freq.len();
    if !x.is_square() || x.rows() < n {
        return Err(Error::Dimension(format!(
            "need a square matrix of dimension at least {n}, got {}×{}",
            x.rows(),
            x.cols()
        )));
    }
    if x.hermitian_deviation() > 1e-12 * x.max_abs().max(1e-300) {
        return Err(Error::NotHermitian {
            deviation: x.hermitian_deviation(),
        });
    }
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "at least two samples are needed for a standard error".into(),
        ));
    }
    let s = freq.s();
    for j in 0..n {
        let next = if j + 1 < n { s[j + 1].re } else { -1.0 };
        if s[j].re - next < 1.0 - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "Re(s_{} − s_{}) = {} is outside the convergence region",
                j + 1,
                j + 2,
                s[j].re - next
            )));
        }
    }
    let dim = x.rows();
    let mut proj = vec![0.0; dim];
    proj[..n].iter_mut().for_each(|v| *v = 1.0);
    let p = ComplexMatrix::from_diagonal(dim, dim, &proj);
    let draws = sample_parallel(samples, seed, |rng| {
        let k = haar_unitary(dim, rng);
        let kh = k.adjoint();
        let y = k.matmul(x).matmul(&kh);
        let yp = k.matmul(&p).matmul(&kh);
        (minor_product(&y, s, freq.l(), true), minor_product(&yp, s, freq.l(), false))
    });
    let nums: Vec<C64> = draws.iter().map(|d| d.0).collect();
    let dens: Vec<C64> = draws.iter().map(|d| d.1).collect();
    let numerator = McEstimate::from_samples(&nums);
    let denominator = McEstimate::from_samples(&dens);
    let ratio = numerator.value / denominator.value;
    let count = samples as f64;
    let resid: f64 = draws.iter().map(|(a, b)| (a - ratio * b).norm_sqr()).sum();
    let stderr = (resid / (count * (count - 1.0))).sqrt() / denominator.value.norm();
    Ok(DefinitionEstimate {
        numerator,
        denominator,
        ratio: McEstimate { value: ratio, stderr },
    })
}

fn check_frequency_has_no_pole(freq: &Frequency) -> Result<()> {
    let n = freq.len();
    let probe: Vec<f64> = (0..n).map(|i| if i == 0 { -1.0 } else { i as f64 + 1.0 }).collect();
    phi_slices(freq.s(), freq.l(), &probe).map(|_| ())
}

/// ∫_{ℝⁿ} p(a) Φ(s, L; a) da for a symmetric eigenvalue density p normalized on ℝⁿ.
pub fn spherical_transform_phi<P: Fn(&[f64]) -> f64>(density: P, freq: &Frequency, cfg: &QuadratureConfig) -> Result<C64> {
    check_frequency_has_no_pole(freq)?;
    let n = freq.len();
    let integrand = |a: &[f64]| -> C64 {
        if a.contains(&0.0) {
            return C64::new(0.0, 0.0);
        }
        let p = density(a);
        if p == 0.0 {
            return C64::new(0.0, 0.0);
        }
        phi_slices(freq.s(), freq.l(), a).map(|v| v * p).unwrap_or_default()
    };
    integrate_nd(&integrand, n, Domain::FullLine, &[0.0], cfg)
}

/// ∫_{ℝ₊ⁿ} q(a) Ψ(s; a) da for a symmetric squared-singular-value density q.
pub fn spherical_transform_psi<Q: Fn(&[f64]) -> f64>(density: Q, s: &[C64], cfg: &QuadratureConfig) -> Result<C64> {
    Frequency::even(s.to_vec())?;
    let n = s.len();
    let integrand = |a: &[f64]| -> C64 {
        if a.iter().any(|v| *v <= 0.0) {
            return C64::new(0.0, 0.0);
        }
        let q = density(a);
        if q == 0.0 {
            return C64::new(0.0, 0.0);
        }
        psi_slices(s, a).map(|v| v * q).unwrap_or_default()
    };
    integrate_nd(&integrand, n, Domain::positive_axis(), &[], cfg)
}

fn parity_vectors(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n).map(|m| (0..n).map(|b| ((m >> b) & 1) as u8).collect()).collect()
}

/// Recovers p(a) from its Φ-transform T(s, L):
///
/// p(a) = Σ_L Δ(a)/((n!)² ∏_{j<n} j!) ∫ ds/(4π)ⁿ T(is + s⁽ⁿ⁾, L) ∏ ζₙ(ε s_l) Δ(is + s⁽ⁿ⁾)
///        × det[sign(a_c)^{L_b} |a_c|^{−is_b − n + b − 1}],
///
/// extrapolated to ε → 0 over `cfg.eps_schedule`.
pub fn inverse_spherical_phi<T>(transform: T, a: &[f64], cfg: &InversionConfig) -> Result<InverseEstimate>
where
    T: Fn(&Frequency) -> Result<C64> + Sync,
{
    cfg.validate()?;
    let n = a.len();
    if n == 0 || a.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("inverse transform needs finite nonzero eigenvalues".into()));
    }
    let base_s = standard_exponents(n);
    let parities = parity_vectors(n);
    let freq_at = |t: &[f64], l: &[u8]| -> Frequency {
        Frequency {
            s: t.iter().zip(&base_s).map(|(&ti, &b)| C64::new(b, ti)).collect(),
            l: l.to_vec(),
        }
    };
    let zero = vec![0.0; n];
    let mut peak: f64 = 0.0;
    for l in &parities {
        peak = peak.max(transform(&freq_at(&zero, l))?.norm());
    }
    let tail = |cut: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..n {
            for sgn in [1.0, -1.0] {
                let mut t = zero.clone();
                t[b] = sgn * cut;
                for l in &parities {
                    let v = transform(&freq_at(&t, l)).map(|v| v.norm()).unwrap_or(f64::INFINITY);
                    worst = worst.max(v);
                }
            }
        }
        worst
    };
    let cutoff = choose_cutoff(tail, cfg.tail_tol * peak.max(1e-300), cfg.max_cutoff);
    let max_log = a.iter().map(|v| v.abs().ln().abs()).fold(0.0, f64::max);
    let width = (4.0 / max_log.max(1e-12)).min(1.0);
    let (nodes, weights) = frequency_grid(cutoff, width, cfg.nodes_per_panel);
    let m = nodes.len();
    let eps = &cfg.eps_schedule;
    // ζₙ(ε t) per schedule entry and node
    let zeta: Vec<Vec<f64>> = eps
        .iter()
        .map(|e| nodes.iter().map(|t| zeta_regularizer(e * t, n)).collect())
        .collect();
    let log_abs: Vec<f64> = a.iter().map(|v| v.abs().ln()).collect();
    let total = m.pow(n as u32);
    let partial: Vec<Result<Vec<C64>>> = (0..m)
        .into_par_iter()
        .map(|first| -> Result<Vec<C64>> {
            let mut acc = vec![C64::new(0.0, 0.0); eps.len()];
            let inner = total / m;
            let mut idx = vec![0usize; n];
            let mut t = vec![0.0; n];
            for flat in 0..inner {
                idx[0] = first;
                let mut rest = flat;
                for slot in idx.iter_mut().skip(1) {
                    *slot = rest % m;
                    rest /= m;
                }
                let mut w = 1.0;
                for b in 0..n {
                    t[b] = nodes[idx[b]];
                    w *= weights[idx[b]];
                }
                let sfreq: Vec<C64> = t.iter().zip(&base_s).map(|(&ti, &b)| C64::new(b, ti)).collect();
                let vand = vandermonde(&sfreq);
                let mut sum = C64::new(0.0, 0.0);
                for l in &parities {
                    let tv = transform(&Frequency {
                        s: sfreq.clone(),
                        l: l.clone(),
                    })?;
                    if tv.norm() == 0.0 {
                        continue;
                    }
                    let mut mat = Vec::with_capacity(n * n);
                    for b in 0..n {
                        let e = C64::new(-(n as f64) + b as f64, -t[b]);
                        for c in 0..n {
                            let mut v = (e * log_abs[c]).exp();
                            if l[b] == 1 && a[c] < 0.0 {
                                v = -v;
                            }
                            mat.push(v);
                        }
                    }
                    sum += tv * det_complex(mat, n);
                }
                let base = sum * vand * w;
                for (k, z) in zeta.iter().enumerate() {
                    let reg: f64 = idx.iter().map(|&i| z[i]).product();
                    acc[k] += base * reg;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut sums = vec![C64::new(0.0, 0.0); eps.len()];
    for p in partial {
        for (s, v) in sums.iter_mut().zip(p?) {
            *s += v;
        }
    }
    let nf = factorial(n);
    let constant = vandermonde(a) / (nf * nf * superfactorial(n) * (4.0 * PI).powi(n as i32));
    let vals: Vec<C64> = sums.iter().map(|v| v * constant).collect();
    let hs: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let (value, error) = richardson(&hs, &vals);
    if !value.re.is_finite() || error > cfg.stability_tol * value.norm().max(1.0) {
        return Err(Error::Extrapolation(format!(
            "inverse spherical transform: value {} with increment {error:e}",
            value.re
        )));
    }
    Ok(InverseEstimate {
        value: value.re,
        error,
        cutoff,
    })
}

/// (s̃, L̃) = ((s + k, s⁽ᵏ⁾), ((L + k) mod 2, L⁽ᵏ⁾)) with k = |n₁ − n₂|.
pub fn extended_frequency(freq: &Frequency, k: usize) -> Frequency {
    let head = freq.shifted(C64::new(k as f64, 0.0), k as i64);
    if k == 0 {
        return head;
    }
    let tail = Frequency::standard(k);
    Frequency {
        s: head.s.into_iter().chain(tail.s).collect(),
        l: head.l.into_iter().chain(tail.l).collect(),
    }
}

fn check_factorization_shapes(freq: &Frequency, l: usize, m: usize, n1: usize, n2: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || n1 > l.min(m) || n2 > m {
        return Err(Error::Dimension(format!(
            "need 1 ≤ n₁ ≤ min(l, m) and 1 ≤ n₂ ≤ m, got l={l}, m={m}, n₁={n1}, n₂={n2}"
        )));
    }
    if freq.len() != n1.min(n2) {
        return Err(Error::Dimension(format!(
            "frequency has length {} but the product has rank {}",
            freq.len(),
            n1.min(n2)
        )));
    }
    Ok(())
}

/// Closed-form right side of ∫_{U(m)} dk Φ(s, L; g k x k* g*) for g of rank n₁
/// (squared singular values `a_g`) embedded in l×m and x = diag(`a_x`, 0) of size m.
pub fn factorization_rhs(freq: &Frequency, l: usize, m: usize, a_g: &PositiveSpectrum, a_x: &SignedSpectrum) -> Result<C64> {
    let (n1, n2) = (a_g.len(), a_x.len());
    check_factorization_shapes(freq, l, m, n1, n2)?;
    let k = n1.abs_diff(n2);
    let ext = extended_frequency(freq, k);
    let c = normalization_c(m, n1.max(n2), ext.s())?;
    if n1 <= n2 {
        Ok(c * psi(freq.s(), a_g)? * phi(&ext, a_x)?)
    } else {
        Ok(c * psi(ext.s(), a_g)? * phi(freq, a_x)?)
    }
}

/// Haar Monte Carlo estimate of ∫_{U(m)} dk Φ(s, L; g k x k* g*) with g = diag(√a_g) in l×m.
pub fn factorization_mc_lhs(
    freq: &Frequency,
    l: usize,
    m: usize,
    a_g: &PositiveSpectrum,
    a_x: &SignedSpectrum,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (n1, n2) = (a_g.len(), a_x.len());
    check_factorization_shapes(freq, l, m, n1, n2)?;
    let roots: Vec<f64> = a_g.values().iter().map(|v| v.sqrt()).collect();
    let g = ComplexMatrix::from_diagonal(l, m, &roots);
    let x = embedded_spectrum(m, a_x.values())?;
    let r = freq.len();
    let draws = sample_parallel(samples, seed, |rng| -> Result<C64> {
        let k = haar_unitary(m, rng);
        let gk = g.matmul(&k);
        let y = gk.matmul(&x).matmul(&gk.adjoint()).hermitian_part();
        let eig = leading_eigenvalues(&hermitian_eigenvalues(&y)?, r);
        phi_slices(freq.s(), freq.l(), &eig)
    });
    let vals: Vec<C64> = draws.into_iter().collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&vals))
}

/// E Ψ(s; Π k Π′) for the l×m sub-block of a Haar unitary in U(M), l ≤ m ≤ M:
/// C_{M,m}(s + m − l, s⁽ᵐ⁻ˡ⁾) = ∏_j (M−j)! Γ(s_j+m−l+1) / ((m−j)! Γ(s_j+M−l+1)).
pub fn truncated_unitary_transform(l: usize, m: usize, big: usize, s: &[C64]) -> Result<C64> {
    let (l, m) = (l.min(m), l.max(m));
    if m > big || s.len() != l {
        return Err(Error::Dimension(format!(
            "sub-block {l}×{m} of U({big}) with {} exponents",
            s.len()
        )));
    }
    let ext = extended_frequency(&Frequency::even(s.to_vec())?, m - l);
    normalization_c(big, m, ext.s())
}

/// Both sides of the one-step rank-lowering limit and a report-only value taken
/// in the wrong order of limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankLimit {
    /// C_{m,n}(s) Φₙ(s, L; a) at s_n = a_n = 10⁻⁶.
    pub lhs: C64,
    /// C_{m,n−1}(s′ − 1) Φ_{n−1}(s′ − 1, L′ − 1; a′).
    pub rhs: C64,
    /// C_{m,n}(s) Φₙ with s_n = 1 and a_n = 10⁻⁶; this does not reach `rhs`.
    pub order_violation: C64,
}

impl RankLimit {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).norm() / self.rhs.norm().max(1e-300)
    }
}

/// Evaluates the rank-lowering relation
/// lim_{s_n→0} lim_{a_n→0} C_{m,n}(s)Φₙ(s, L; a) = C_{m,n−1}(s′−1)Φ_{n−1}(s′−1, L′−1; a′)
/// where (s′, L′, a′) are the first n−1 entries and the last entry has L_n = 0.
pub fn rank_limit_check(m: usize, head: &Frequency, a_head: &SignedSpectrum) -> Result<RankLimit> {
    let n = head.len() + 1;
    if a_head.len() != n - 1 || n > m {
        return Err(Error::Dimension(format!(
            "rank {n} in dimension {m} with {} eigenvalues",
            a_head.len()
        )));
    }
    let small = 1e-6;
    let full = |sn: f64| -> Result<C64> {
        let mut s = head.s().to_vec();
        s.push(C64::new(sn, 0.0));
        let mut l = head.l().to_vec();
        l.push(0);
        let mut a = a_head.values().to_vec();
        a.push(small);
        Ok(normalization_c(m, n, &s)? * phi_slices(&s, &l, &a)?)
    };
    let lower = head.shifted(C64::new(-1.0, 0.0), -1);
    let rhs = normalization_c(m, n - 1, lower.s())? * phi(&lower, a_head)?;
    Ok(RankLimit {
        lhs: full(small)?,
        rhs,
        order_violation: full(1.0)?,
    })
}
