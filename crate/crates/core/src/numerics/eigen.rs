use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and, if requested, the unitary whose
/// columns are the matching eigenvectors (x = V diag(λ) V*).
pub fn hermitian_eigen(x: &ComplexMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<ComplexMatrix>)> {
    if !x.is_square() {
        return Err(Error::Dimension(format!("eigenvalues of a {}x{} matrix", x.rows(), x.cols())));
    }
    let n = x.rows();
    let scale = x.max_abs();
    let dev = x.hermitian_deviation();
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut a = x.clone();
    // symmetrize exactly so rotations act on a truly Hermitian array
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    let mut v = if want_vectors { Some(ComplexMatrix::identity(n)) } else { None };
    if scale > 0.0 {
        let fro = a.frobenius_norm();
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-16 * fro {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, v.as_mut(), p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = v.map(|v| {
        let mut out = ComplexMatrix::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for r in 0..n {
                out[(r, new)] = v[(r, old)];
            }
        }
        out
    });
    Ok((values, vectors))
}

/// One two-sided rotation annihilating entry (p, q).
fn rotate(a: &mut ComplexMatrix, v: Option<&mut ComplexMatrix>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let n = a.rows();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // phase making the (p, q) entry real, then a real symmetric Schur rotation
    let phase = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
    let gpp = C64::new(c, 0.0);
    let gpq = C64::new(s, 0.0);
    let gqp = -phase.conj() * s;
    let gqq = phase.conj() * c;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * gpp + akq * gqp;
        a[(k, q)] = akp * gpq + akq * gqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
        a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    if let Some(v) = v {
        for k in 0..n {
            let vkp = v[(k, p)];
            let vkq = v[(k, q)];
            v[(k, p)] = vkp * gpp + vkq * gqp;
            v[(k, q)] = vkp * gpq + vkq * gqq;
        }
    }
}

/// All eigenvalues of a Hermitian matrix, ascending, zeros included.
pub fn hermitian_eigenvalues(x: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(x, false)?.0)
}

/// Drops eigenvalues with |λ| ≤ 1e-10 · max|λ|.
pub fn strip_numerical_zeros(values: &[f64]) -> Vec<f64> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.iter().copied().filter(|v| v.abs() > super::RANK_THRESHOLD * max).collect()
}

/// Nonzero eigenvalues of g g*, ascending.
pub fn squared_singular_values(g: &ComplexMatrix) -> Result<Vec<f64>> {
    if g.max_abs() == 0.0 {
        return Err(Error::Degenerate("zero matrix has no nonzero singular values".into()));
    }
    let gram = if g.rows() <= g.cols() {
        g.matmul(&g.adjoint())
    } else {
        g.adjoint().matmul(g)
    };
    let vals = hermitian_eigenvalues(&gram)?;
    Ok(strip_numerical_zeros(&vals)
        .into_iter()
        .map(|v| v.max(0.0))
        .filter(|&v| v > 0.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_stream;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = rng_stream(seed, 0);
        let g = ComplexMatrix::gaussian(n, n, &mut rng);
        let h = g.matmul(&ComplexMatrix::identity(n));
        let mut out = h.clone();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            }
        }
        out
    }

    #[test]
    fn diagonal_and_pauli() {
        let d = ComplexMatrix::from_diagonal(2, 2, &[3.0, -1.0]);
        assert_eq!(hermitian_eigenvalues(&d).unwrap(), vec![-1.0, 3.0]);
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let ev = hermitian_eigenvalues(&x).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_determinant_and_reconstruction() {
        for n in 1..=8 {
            let x = random_hermitian(n, 10 + n as u64);
            let (vals, v) = hermitian_eigen(&x, true).unwrap();
            let v = v.unwrap();
            let tr = x.trace().re;
            let sum: f64 = vals.iter().sum();
            assert!((sum - tr).abs() <= 1e-10 * tr.abs().max(1.0));
            let det = x.determinant().unwrap().re;
            let prod: f64 = vals.iter().product();
            assert!((prod - det).abs() <= 1e-9 * det.abs().max(1e-300) + 1e-13);
            let lam = ComplexMatrix::from_diagonal(n, n, &vals);
            let rec = v.matmul(&lam).matmul(&v.adjoint());
            assert!(rec.sub(&x).frobenius_norm() <= 1e-10 * n as f64 * x.frobenius_norm());
        }
    }

    #[test]
    fn rejects_non_hermitian_and_non_square() {
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 2.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eigenvalues(&x), Err(Error::NotHermitian { .. })));
        assert!(hermitian_eigenvalues(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn singular_value_examples() {
        let g = ComplexMatrix::from_diagonal(2, 2, &[2.0, 3.0]);
        let s = squared_singular_values(&g).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-13 && (s[1] - 9.0).abs() < 1e-13);
        let col = ComplexMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        let s = squared_singular_values(&col).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0] - 2.0).abs() < 1e-14);
        assert!(squared_singular_values(&ComplexMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn singular_values_match_gram_and_adjoint() {
        let mut rng = rng_stream(5, 0);
        let g = ComplexMatrix::gaussian(4, 3, &mut rng);
        let s = squared_singular_values(&g).unwrap();
        let gram = strip_numerical_zeros(&hermitian_eigenvalues(&g.matmul(&g.adjoint())).unwrap());
        let sa = squared_singular_values(&g.adjoint()).unwrap();
        assert_eq!(s.len(), 3);
        for i in 0..3 {
            assert!((s[i] - gram[i]).abs() < 1e-10 * s[2]);
            assert!((s[i] - sa[i]).abs() < 1e-10 * s[2]);
        }
    }
}
