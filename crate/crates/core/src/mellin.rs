//! Mellin transforms on the half line and on the full real line (with the sign
//! channel L), their regularized inverse, and the Mellin convolution.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::sinc;
use crate::numerics::{gauss_legendre, integrate_complex, integrate_line_with_breaks, Domain, QuadratureConfig};

/// A point (s, L) of the full-line Mellin transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinPoint {
    pub s: C64,
    pub l: u8,
}

impl MellinPoint {
    pub fn new(s: C64, l: u8) -> Result<Self> {
        if l > 1 {
            return Err(Error::InvalidArgument(format!("parity {l} must be 0 or 1")));
        }
        Ok(Self { s, l })
    }

    pub fn real(s: f64, l: u8) -> Result<Self> {
        Self::new(C64::new(s, 0.0), l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    PositiveAxis,
    NegativeAxis,
    FullLine,
}

/// A real function of one variable with support and breakpoint metadata.
#[derive(Clone)]
pub struct UnivariateFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: Support,
    breaks: Vec<f64>,
    integrability: usize,
}

impl fmt::Debug for UnivariateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnivariateFunction")
            .field("support", &self.support)
            .field("breaks", &self.breaks)
            .field("integrability", &self.integrability)
            .finish()
    }
}

impl UnivariateFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, support: Support) -> Self {
        Self {
            eval: Arc::new(f),
            support,
            breaks: Vec::new(),
            integrability: 0,
        }
    }

    /// Points where the function has a jump or a kink.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    /// Largest j with ∫|x^j f(x)| dx < ∞.
    pub fn with_integrability(mut self, order: usize) -> Self {
        self.integrability = order;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        let inside = match self.support {
            Support::PositiveAxis => x > 0.0,
            Support::NegativeAxis => x < 0.0,
            Support::FullLine => true,
        };
        if inside {
            (self.eval)(x)
        } else {
            0.0
        }
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn integrability(&self) -> usize {
        self.integrability
    }

    fn has_positive_part(&self) -> bool {
        self.support != Support::NegativeAxis
    }

    fn has_negative_part(&self) -> bool {
        self.support != Support::PositiveAxis
    }
}

/// e^{s t} f, computed through logarithms so huge and tiny factors do not overflow.
fn weighted(s: C64, t: f64, fv: f64) -> C64 {
    if fv == 0.0 || !fv.is_finite() {
        return C64::new(0.0, 0.0);
    }
    let mag = s.re * t + fv.abs().ln();
    C64::from_polar(mag.exp(), s.im * t) * fv.signum()
}

/// ∫₀^∞ a^{s−1} g(a) da for a function given on the positive axis, via a = e^t.
fn half_line_transform<G: Fn(f64) -> f64>(g: G, breaks: &[f64], s: C64, cfg: &QuadratureConfig) -> Result<C64> {
    let tb: Vec<f64> = breaks.iter().filter(|b| **b > 0.0).map(|b| b.ln()).collect();
    let est = integrate_complex(
        |t| {
            let a = t.exp();
            // the mapped ends of the line carry no mass
            if a == 0.0 || !a.is_finite() {
                return C64::new(0.0, 0.0);
            }
            weighted(s, t, g(a))
        },
        Domain::FullLine,
        &tb,
        cfg,
    )?;
    Ok(est.value)
}

/// Ordinary Mellin transform ∫₀^∞ a^{s−1} f(a) da.
pub fn mellin_half_line(f: &UnivariateFunction, s: C64, cfg: &QuadratureConfig) -> Result<C64> {
    half_line_transform(|a| f.eval(a), f.breaks(), s, cfg)
}

/// Mf(s, L) = ∫ dx/|x| sign(x)^L |x|^s f(x) = Mf₊(s) + (−1)^L Mf₋(s).
pub fn mellin_full_line(f: &UnivariateFunction, p: MellinPoint, cfg: &QuadratureConfig) -> Result<C64> {
    let mut total = C64::new(0.0, 0.0);
    if f.has_positive_part() {
        total += half_line_transform(|a| f.eval(a), f.breaks(), p.s, cfg)?;
    }
    if f.has_negative_part() {
        let nb: Vec<f64> = f.breaks().iter().map(|b| -b).collect();
        let neg = half_line_transform(|a| f.eval(-a), &nb, p.s, cfg)?;
        total += if p.l == 0 { neg } else { -neg };
    }
    Ok(total)
}

/// ζₙ(z) = cos z / ∏ₖ₌₁ⁿ [1 − 4z²/(π(2k−1))²], with the removable points
/// z = ±π(2k−1)/2 evaluated by a series.
pub fn zeta_regularizer(z: f64, order: usize) -> f64 {
    let az = z.abs();
    let near = (1..=order).find(|&k| (az - PI * (2 * k - 1) as f64 / 2.0).abs() < 1e-4);
    let mut denom = 1.0;
    for k in 1..=order {
        if Some(k) == near {
            continue;
        }
        let zk = PI * (2 * k - 1) as f64 / 2.0;
        denom *= 1.0 - (z / zk).powi(2);
    }
    match near {
        None => z.cos() / denom,
        Some(k) => {
            // cos z / (1 − z²/z_k²) = (−1)^{k−1} z_k² sinc(δ)/(2z_k + δ), δ = |z| − z_k
            let zk = PI * (2 * k - 1) as f64 / 2.0;
            let delta = az - zk;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * zk * zk * sinc(delta) / (2.0 * zk + delta) / denom
        }
    }
}

/// ζ₁ in the closed form π² cos z / (π² − 4z²).
pub fn zeta_one_closed(z: f64) -> f64 {
    PI * PI * z.cos() / (PI * PI - 4.0 * z * z)
}

/// Polynomial extrapolation of `values` sampled at `h` to h = 0 (Neville).
/// The error estimate compares with the extrapolant that drops the first sample.
pub fn richardson(h: &[f64], values: &[C64]) -> (C64, f64) {
    assert_eq!(h.len(), values.len());
    assert!(!h.is_empty());
    let neville = |hs: &[f64], vs: &[C64]| -> C64 {
        let mut p = vs.to_vec();
        let n = hs.len();
        for m in 1..n {
            for i in 0..n - m {
                p[i] = (p[i + 1] * hs[i] - p[i] * hs[i + m]) / (hs[i] - hs[i + m]);
            }
        }
        p[0]
    };
    let full = neville(h, values);
    if h.len() == 1 {
        return (full, f64::INFINITY);
    }
    let reduced = neville(&h[1..], &values[1..]);
    (full, (full - reduced).norm())
}

/// Settings for the ε-regularized inverse transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub eps_schedule: Vec<f64>,
    /// Truncate the frequency line once |transform| drops below this fraction of its peak.
    pub tail_tol: f64,
    pub max_cutoff: f64,
    pub nodes_per_panel: usize,
    /// Largest accepted extrapolation increment, relative to max(1, |value|).
    pub stability_tol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            eps_schedule: vec![0.1, 0.05, 0.025, 0.0125],
            tail_tol: 1e-12,
            max_cutoff: 512.0,
            nodes_per_panel: 12,
            stability_tol: 1e-4,
        }
    }
}

impl InversionConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty()
            || self.eps_schedule.iter().any(|e| !(*e > 0.0))
            || self.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidArgument(
                "eps schedule must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseEstimate {
    pub value: f64,
    pub error: f64,
    pub cutoff: f64,
}

/// Composite Gauss–Legendre grid on [−cutoff, cutoff].
pub(crate) fn frequency_grid(cutoff: f64, panel_width: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = ((2.0 * cutoff / panel_width).ceil() as usize).max(1);
    let h = 2.0 * cutoff / panels as f64;
    let (gx, gw) = gauss_legendre(nodes);
    let mut xs = Vec::with_capacity(panels * nodes);
    let mut ws = Vec::with_capacity(panels * nodes);
    for p in 0..panels {
        let c = -cutoff + (p as f64 + 0.5) * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(c + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Smallest power-of-two cutoff at which `tail(S)` falls below `tol`.
pub(crate) fn choose_cutoff<T: Fn(f64) -> f64>(tail: T, tol: f64, max_cutoff: f64) -> f64 {
    let mut s = 8.0;
    while s < max_cutoff {
        if tail(s) <= tol && tail(1.5 * s) <= tol {
            return s;
        }
        s *= 2.0;
    }
    max_cutoff
}

/// f(x) = lim_ε (1/4π) Σ_L sign(x)^L ∫ Mf(1+is, L) |x|^{−1−is} ζ₁(εs) ds,
/// with the limit taken by Richardson extrapolation over `cfg.eps_schedule`.
pub fn inverse_mellin<M: Fn(MellinPoint) -> Result<C64>>(mf: M, x: f64, cfg: &InversionConfig) -> Result<InverseEstimate> {
    cfg.validate()?;
    if x == 0.0 || !x.is_finite() {
        return Err(Error::InvalidArgument("inverse Mellin needs a finite nonzero point".into()));
    }
    let at = |t: f64, l: u8| mf(MellinPoint { s: C64::new(1.0, t), l });
    let peak = at(0.0, 0)?.norm().max(at(0.0, 1)?.norm());
    let tol = cfg.tail_tol * peak.max(1e-300);
    let tail = |t: f64| {
        [t, -t]
            .iter()
            .flat_map(|&u| [0u8, 1].map(|l| at(u, l).map(|v| v.norm()).unwrap_or(f64::INFINITY)))
            .fold(0.0, f64::max)
    };
    let cutoff = choose_cutoff(tail, tol, cfg.max_cutoff);
    let lx = x.abs().ln();
    let width = (4.0 / lx.abs().max(1e-12)).min(1.0);
    let (nodes, weights) = frequency_grid(cutoff, width, cfg.nodes_per_panel);
    let sign = x.signum();
    // channel-summed integrand without the regularizer
    let mut base = Vec::with_capacity(nodes.len());
    for &t in &nodes {
        let kernel = C64::from_polar((-lx).exp(), -t * lx);
        let mut v = at(t, 0)? * kernel;
        v += at(t, 1)? * kernel * sign;
        base.push(v);
    }
    let hs: Vec<f64> = cfg.eps_schedule.iter().map(|e| e * e).collect();
    let mut vals = Vec::with_capacity(hs.len());
    for &eps in &cfg.eps_schedule {
        let mut acc = C64::new(0.0, 0.0);
        for ((t, w), b) in nodes.iter().zip(&weights).zip(&base) {
            acc += b * (w * zeta_regularizer(eps * t, 1));
        }
        vals.push(acc / (4.0 * PI));
    }
    let (value, error) = richardson(&hs, &vals);
    if !value.re.is_finite() || error > cfg.stability_tol * value.norm().max(1.0) {
        return Err(Error::Extrapolation(format!(
            "inverse Mellin at x = {x}: value {} with increment {error:e}",
            value.re
        )));
    }
    Ok(InverseEstimate {
        value: value.re,
        error,
        cutoff,
    })
}

/// (p ⊛ q)(a) = ∫₀^∞ (da′/a′) p(a′) q(a/a′), computed with a′ = e^t.
pub fn mellin_convolve(p: &UnivariateFunction, q: &UnivariateFunction, a: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if p.support() != Support::PositiveAxis {
        return Err(Error::InvalidArgument(
            "left factor of a Mellin convolution lives on the positive axis".into(),
        ));
    }
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(
            "Mellin convolution evaluated at a nonzero point only".into(),
        ));
    }
    let mut breaks: Vec<f64> = p.breaks().iter().filter(|b| **b > 0.0).map(|b| b.ln()).collect();
    breaks.extend(q.breaks().iter().filter(|b| **b != 0.0 && (a / **b) > 0.0).map(|b| (a / b).ln()));
    let est = integrate_line_with_breaks(
        |t| {
            let pv = p.eval(t.exp());
            if pv == 0.0 {
                0.0
            } else {
                pv * q.eval(a * (-t).exp())
            }
        },
        Domain::FullLine,
        &breaks,
        cfg,
    )?;
    Ok(est.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::gamma;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::with_tol(1e-13, 1e-11)
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn full_line_examples() {
        let f = UnivariateFunction::new(|x: f64| (-x.abs()).exp(), Support::FullLine);
        let v = mellin_full_line(&f, MellinPoint::real(2.0, 0).unwrap(), &cfg()).unwrap();
        assert!((v - 2.0).norm() < 1e-10);
        let v = mellin_full_line(&f, MellinPoint::real(2.0, 1).unwrap(), &cfg()).unwrap();
        assert!(v.norm() < 1e-10);
        let g = UnivariateFunction::new(|x: f64| (-x).exp(), Support::PositiveAxis);
        let v = mellin_full_line(&g, MellinPoint::real(1.5, 1).unwrap(), &cfg()).unwrap();
        assert!((v.re - 0.886_226_925_452_758).abs() < 1e-10);
    }

    #[test]
    fn half_line_examples() {
        let f = UnivariateFunction::new(|a: f64| (-a).exp(), Support::PositiveAxis);
        assert!((mellin_half_line(&f, c(3.0), &cfg()).unwrap() - 2.0).norm() < 1e-10);
        let jac =
            UnivariateFunction::new(|a: f64| if a < 1.0 { (1.0 - a).powi(2) } else { 0.0 }, Support::PositiveAxis).with_breaks(vec![1.0]);
        assert!((mellin_half_line(&jac, c(1.0), &cfg()).unwrap() - 1.0 / 3.0).norm() < 1e-10);
        let e = std::f64::consts::E;
        let ind = UnivariateFunction::new(move |a: f64| if (1.0..=e).contains(&a) { 1.0 } else { 0.0 }, Support::PositiveAxis)
            .with_breaks(vec![1.0, e]);
        assert!((mellin_half_line(&ind, c(1.0), &cfg()).unwrap() - (e - 1.0)).norm() < 1e-10);
    }

    #[test]
    fn complex_frequency_matches_gamma() {
        let f = UnivariateFunction::new(|a: f64| (-a).exp(), Support::PositiveAxis);
        for s in [C64::new(0.7, 2.0), C64::new(2.5, -5.0), C64::new(1.0, 12.0)] {
            let v = mellin_half_line(&f, s, &cfg()).unwrap();
            let g = gamma(s);
            assert!((v - g).norm() < 1e-9 * g.norm().max(1e-6), "{s}: {v} vs {g}");
        }
    }

    #[test]
    fn parity_and_scaling() {
        let odd = UnivariateFunction::new(|x: f64| x * (-x * x).exp(), Support::FullLine);
        let v = mellin_full_line(&odd, MellinPoint::real(1.7, 0).unwrap(), &cfg()).unwrap();
        assert!(v.norm() < 1e-12);
        let f = UnivariateFunction::new(|x: f64| (1.0 + x).powi(2) * (-x * x).exp(), Support::FullLine);
        let cc = 2.5;
        let fc = UnivariateFunction::new(
            move |x: f64| (1.0 + cc * x).powi(2) * (-(cc * x) * (cc * x)).exp(),
            Support::FullLine,
        );
        for l in [0u8, 1] {
            let s = C64::new(1.3, 0.8);
            let p = MellinPoint::new(s, l).unwrap();
            let a = mellin_full_line(&f, p, &cfg()).unwrap();
            let b = mellin_full_line(&fc, p, &cfg()).unwrap();
            let want = a * (-s * cc.ln()).exp();
            assert!((b - want).norm() <= 1e-8 * want.norm());
        }
    }

    #[test]
    fn zeta_values() {
        for n in 1..=4 {
            assert_eq!(zeta_regularizer(0.0, n), 1.0);
        }
        let half_pi = PI / 2.0;
        assert!((zeta_regularizer(half_pi, 1) - PI / 4.0).abs() < 1e-14);
        for d in [1e-6, -1e-6] {
            assert!((zeta_one_closed(half_pi + d) - PI / 4.0).abs() < 1e-6);
            assert!((zeta_regularizer(half_pi + d, 1) - zeta_one_closed(half_pi + d)).abs() < 1e-9);
        }
        assert!((zeta_regularizer(-half_pi, 1) - PI / 4.0).abs() < 1e-14);
        // factored form of ζ₂
        let z: f64 = 1.0;
        let factored = z.cos() * PI.powi(2) / (PI.powi(2) - 4.0 * z * z) * (9.0 * PI * PI) / (9.0 * PI * PI - 4.0 * z * z);
        assert!((zeta_regularizer(1.0, 2) - factored).abs() < 1e-12);
        // second removable point of ζ₂ is continuous
        let p2 = 1.5 * PI;
        let inside = zeta_regularizer(p2, 2);
        let outside = zeta_regularizer(p2 + 2e-4, 2);
        assert!((inside - outside).abs() < 1e-3 * inside.abs().max(1e-3));
        assert!((zeta_regularizer(p2 + 5e-5, 2) - zeta_regularizer(p2 + 1.5e-4, 2)).abs() < 1e-4);
    }

    #[test]
    fn richardson_removes_quadratic_terms() {
        let hs = [0.01, 0.0025, 0.000625];
        let vals: Vec<C64> = hs.iter().map(|h| c(2.0 + 3.0 * h - 5.0 * h * h)).collect();
        let (v, e) = richardson(&hs, &vals);
        assert!((v - 2.0).norm() < 1e-12);
        // the reduced extrapolant is linear, so it misses 5·h₁·h₂
        assert!((e - 5.0 * hs[1] * hs[2]).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_gamma_is_exponential() {
        let est = inverse_mellin(|p| Ok(gamma(p.s)), 1.0, &InversionConfig::default()).unwrap();
        assert!((est.value - (-1.0f64).exp()).abs() < 1e-4, "{est:?}");
        let neg = inverse_mellin(|p| Ok(gamma(p.s)), -1.0, &InversionConfig::default()).unwrap();
        // the same transform for both parities means f vanishes on the negative axis
        assert!(neg.value.abs() < 1e-6);
    }

    #[test]
    fn even_function_has_no_odd_channel() {
        let f = UnivariateFunction::new(|x: f64| x.abs() * (-x.abs()).exp(), Support::FullLine);
        for s in [1.5, 2.5] {
            let v = mellin_full_line(&f, MellinPoint::real(s, 1).unwrap(), &cfg()).unwrap();
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_unit_sign_and_factorization() {
        let q = UnivariateFunction::new(|x: f64| x.abs() * (-x * x).exp(), Support::FullLine);
        let sigma: f64 = 1e-3;
        let narrow = UnivariateFunction::new(
            move |a: f64| (-(a.ln()).powi(2) / (2.0 * sigma * sigma)).exp() / (a * sigma * (2.0 * PI).sqrt()),
            Support::PositiveAxis,
        )
        .with_breaks(vec![(-8.0 * sigma).exp(), (8.0 * sigma).exp()]);
        for a in [-1.3, 0.4, 2.0] {
            let v = mellin_convolve(&narrow, &q, a, &cfg()).unwrap();
            assert!((v - q.eval(a)).abs() < 1e-5, "{a}: {v}");
        }
        let p = UnivariateFunction::new(|a: f64| (-a).exp(), Support::PositiveAxis);
        let neg = UnivariateFunction::new(|x: f64| (x).exp(), Support::NegativeAxis);
        assert_eq!(mellin_convolve(&p, &neg, 1.5, &cfg()).unwrap(), 0.0);
        assert!(mellin_convolve(&p, &neg, -1.5, &cfg()).unwrap() > 0.0);
        let pos = UnivariateFunction::new(|x: f64| (-x).exp(), Support::PositiveAxis);
        let pq = {
            let p = p.clone();
            let pos = pos.clone();
            UnivariateFunction::new(
                move |a: f64| mellin_convolve(&p, &pos, a, &QuadratureConfig::with_tol(1e-14, 1e-12)).unwrap(),
                Support::PositiveAxis,
            )
        };
        let v = mellin_half_line(&pq, c(2.0), &QuadratureConfig::with_tol(1e-10, 1e-9)).unwrap();
        assert!((v - 1.0).norm() < 1e-6, "{v}");
    }
}
