//! Gamma function on the complex plane and small combinatorial helpers.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(z) (some branch; exponentiate to get Γ). Infinite real part at poles.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // reflection: Γ(z)Γ(1−z) = π / sin(πz)
        let s = (z * PI).sin();
        if s.norm() == 0.0 {
            return C64::new(f64::INFINITY, 0.0);
        }
        return C64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(C64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    C64::new(0.5 * (2.0 * PI).ln(), 0.0) + (z + 0.5) * t.ln() - t + x.ln()
}

/// Γ(z); returns a non-finite value at the poles z = 0, −1, −2, ….
pub fn gamma(z: C64) -> C64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return C64::new(f64::INFINITY, 0.0);
    }
    if z.im == 0.0 && z.re > 0.0 && z.re == z.re.round() && z.re <= 30.0 {
        return C64::new(factorial(z.re as usize - 1), 0.0);
    }
    ln_gamma(z).exp()
}

pub fn gamma_real(x: f64) -> f64 {
    gamma(C64::new(x, 0.0)).re
}

pub fn ln_gamma_real(x: f64) -> f64 {
    ln_gamma(C64::new(x, 0.0)).re
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: usize) -> f64 {
    if n <= 30 {
        factorial(n).ln()
    } else {
        ln_gamma_real(n as f64 + 1.0)
    }
}

/// ∏_{j=0}^{n−1} j!
pub fn superfactorial(n: usize) -> f64 {
    (0..n).map(factorial).product()
}

/// Pochhammer-type ratio Γ(z + k)/Γ(z) = z(z+1)…(z+k−1) for integer k ≥ 0.
pub fn rising(z: C64, k: usize) -> C64 {
    (0..k).fold(C64::new(1.0, 0.0), |acc, i| acc * (z + i as f64))
}

/// sin(x)/x with a series near the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma_real(1.5) - PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((gamma_real(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma_real(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_real(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(!gamma_real(-2.0).is_finite());
        // Γ(10.3) from the recurrence applied to Γ(0.3)
        let g03 = gamma_real(0.3);
        let mut v = g03;
        let mut z = 0.3;
        for _ in 0..10 {
            v *= z;
            z += 1.0;
        }
        assert!((gamma_real(10.3) - v).abs() < 1e-12 * v);
    }

    #[test]
    fn complex_gamma_reflection_and_modulus() {
        // |Γ(iy)|² = π / (y sinh(πy))
        for y in [0.5, 1.0, 3.0, 7.0] {
            let g = gamma(C64::new(0.0, y));
            let want = PI / (y * (PI * y).sinh());
            assert!((g.norm_sqr() - want).abs() < 1e-13 * want);
        }
        // Γ(1+z) = zΓ(z)
        let z = C64::new(0.7, -2.3);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() < 1e-13 * lhs.norm());
    }
}
