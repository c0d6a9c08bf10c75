//! Complex linear algebra, quadrature, contour integration and sampling primitives.

mod contour;
pub mod det;
mod eigen;
mod matrix;
mod quadrature;
pub mod special;

use std::ops::{Mul, Sub};

use num_complex::Complex64 as C64;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use contour::{circle_average, contour_origin};
pub use eigen::{hermitian_eigen, hermitian_eigenvalues, squared_singular_values, strip_numerical_zeros};
pub use matrix::ComplexMatrix;
pub use quadrature::{
    gauss_legendre, integrate_complex, integrate_generic, integrate_line, integrate_line_with_breaks, Domain, Estimate, QuadValue,
    QuadratureConfig,
};

use crate::error::{Error, Result};

/// Relative threshold below which eigenvalues count as numerical zeros.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Seeded generator used for every random draw in the crate.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// ∏_{c>d} (a_c − a_d); 1 for fewer than two entries.
pub fn vandermonde<T>(a: &[T]) -> T
where
    T: Copy + One + Sub<Output = T> + Mul<Output = T>,
{
    let mut prod = T::one();
    for c in 0..a.len() {
        for d in 0..c {
            prod = prod * (a[c] - a[d]);
        }
    }
    prod
}

/// Haar-distributed unitary: Gram–Schmidt QR of a complex Gaussian matrix.
/// Normalizing each column by its (positive) norm makes diag(R) positive,
/// which is what makes the distribution Haar.
pub fn haar_unitary<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let z = ComplexMatrix::gaussian(dim, dim, rng);
    let mut q = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut v: Vec<C64> = (0..dim).map(|i| z[(i, j)]).collect();
        // two passes of classical Gram–Schmidt keep the columns orthogonal to rounding
        for _ in 0..2 {
            for k in 0..j {
                let proj: C64 = (0..dim).map(|i| q[(i, k)].conj() * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= proj * q[(i, k)];
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for (i, vi) in v.iter().enumerate() {
            q[(i, j)] = vi / norm;
        }
    }
    q
}

/// Draws per RNG stream in [`sample_parallel`].
pub const CHUNK: usize = 1024;

/// Runs `f` `count` times in parallel. Chunk i of [`CHUNK`] draws uses stream i of
/// `seed`, so the output (kept in draw order) does not depend on the thread count.
pub fn sample_parallel<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng) -> T + Sync,
{
    use rayon::prelude::*;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_stream(seed, c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: C64,
    pub stderr: f64,
}

impl McEstimate {
    pub fn from_samples(xs: &[C64]) -> Self {
        let n = xs.len() as f64;
        let mean: C64 = xs.iter().sum::<C64>() / n;
        let var: f64 = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>();
        let stderr = if xs.len() > 1 {
            (var / (n * (n - 1.0))).sqrt()
        } else {
            f64::INFINITY
        };
        Self { value: mean, stderr }
    }

    pub fn from_real(xs: &[f64]) -> Self {
        let c: Vec<C64> = xs.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_samples(&c)
    }

    /// |value − target| in units of the standard error.
    pub fn sigmas(&self, target: C64) -> f64 {
        let d = (self.value - target).norm();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Nested adaptive integral of `f` over `domain`ⁿ. The inner error estimates are
/// absorbed into the outer tolerance.
pub fn integrate_nd<T, F>(f: &F, n: usize, domain: Domain, breaks: &[f64], cfg: &QuadratureConfig) -> Result<T>
where
    T: QuadValue,
    F: Fn(&[f64]) -> T,
{
    fn rec<T: QuadValue, F: Fn(&[f64]) -> T>(
        f: &F,
        prefix: &[f64],
        n: usize,
        domain: Domain,
        breaks: &[f64],
        cfg: &QuadratureConfig,
    ) -> Result<T> {
        if prefix.len() + 1 == n {
            let est = integrate_generic(
                |x| {
                    let mut p = prefix.to_vec();
                    p.push(x);
                    f(&p)
                },
                domain,
                breaks,
                cfg,
            )?;
            return Ok(est.value);
        }
        let inner = std::cell::RefCell::new(Ok(()));
        let est = integrate_generic(
            |x| {
                let mut p = prefix.to_vec();
                p.push(x);
                match rec(f, &p, n, domain, breaks, cfg) {
                    Ok(v) => v,
                    Err(e) => {
                        *inner.borrow_mut() = Err(e);
                        T::default()
                    }
                }
            },
            domain,
            breaks,
            cfg,
        )?;
        inner.into_inner()?;
        Ok(est.value)
    }
    if n == 0 {
        return Ok(f(&[]));
    }
    rec(f, &[], n, domain, breaks, cfg)
}

/// The `r` eigenvalues of largest modulus, sorted ascending.
pub fn leading_eigenvalues(values: &[f64], r: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    v.truncate(r);
    v.sort_by(f64::total_cmp);
    v
}

/// Nonzero real eigenvalues, sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignedSpectrum(Vec<f64>);

impl SignedSpectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(Error::InvalidArgument("spectrum entries must be finite and nonzero".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// (number of negative entries, number of positive entries)
    pub fn signature(&self) -> (usize, usize) {
        let neg = self.0.iter().filter(|v| **v < 0.0).count();
        (neg, self.0.len() - neg)
    }
}

impl TryFrom<Vec<f64>> for SignedSpectrum {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SignedSpectrum> for Vec<f64> {
    fn from(s: SignedSpectrum) -> Self {
        s.0
    }
}

/// Strictly positive values (squared singular values), sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositiveSpectrum(Vec<f64>);

impl PositiveSpectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArgument("squared singular values must be finite and positive".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PositiveSpectrum {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PositiveSpectrum> for Vec<f64> {
    fn from(s: PositiveSpectrum) -> Self {
        s.0
    }
}
