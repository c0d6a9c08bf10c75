//! Determinants by Gaussian elimination with complete pivoting.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Determinant of the row-major `n x n` matrix `a`.
pub fn det_complex(mut a: Vec<C64>, n: usize) -> C64 {
    assert_eq!(a.len(), n * n);
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = a[i * n + j].norm();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pr != k {
            for j in 0..n {
                a.swap(k * n + j, pr * n + j);
            }
            det = -det;
        }
        if pc != k {
            for i in 0..n {
                a.swap(i * n + k, i * n + pc);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    det
}

/// Real determinant returned as `(sign, ln|det|)`; sign is 0 for a singular matrix.
pub fn log_det_real(mut a: Vec<f64>, n: usize) -> (f64, f64) {
    assert_eq!(a.len(), n * n);
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = a[i * n + j].abs();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best == 0.0 || !best.is_finite() {
            return (0.0, f64::NEG_INFINITY);
        }
        if pr != k {
            for j in 0..n {
                a.swap(k * n + j, pr * n + j);
            }
            sign = -sign;
        }
        if pc != k {
            for i in 0..n {
                a.swap(i * n + k, i * n + pc);
            }
            sign = -sign;
        }
        let pivot = a[k * n + k];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_abs += pivot.abs().ln();
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    (sign, log_abs)
}

/// Inverse of an n×n real matrix (row-major) by Gauss–Jordan with partial pivoting.
pub fn inverse_real(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::Dimension(format!("{} entries for a {n}×{n} matrix", a.len())));
    }
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        let pv = m[piv * n + col];
        if pv == 0.0 || !pv.is_finite() {
            return Err(Error::Degenerate("matrix is singular".into()));
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        for j in 0..n {
            m[col * n + j] /= pv;
            inv[col * n + j] /= pv;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[i * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= f * m[col * n + j];
                inv[i * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Ok(inv)
}

pub fn det_real(a: Vec<f64>, n: usize) -> f64 {
    let (s, l) = log_det_real(a, n);
    if s == 0.0 {
        0.0
    } else {
        s * l.exp()
    }
}
