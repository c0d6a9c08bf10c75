use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::quadrature::QuadratureConfig;
use crate::error::{Error, Result};

/// (1/2πi)∮ f(z) dz over the circle |z| = radius, counter-clockwise.
///
/// `pole_order` is the order of the pole of `f` at the origin. The N-point
/// trapezoid rule is exact for Laurent polynomials with degrees strictly
/// between −N/2 and N/2, so the pole order must stay below N/2.
pub fn contour_origin<F: Fn(C64) -> C64>(f: F, pole_order: usize, radius: f64, cfg: &QuadratureConfig) -> Result<C64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("contour radius {radius} must be positive")));
    }
    let n = cfg.contour_points;
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument("contour_points must be even and at least 8".into()));
    }
    if 2 * pole_order >= n {
        return Err(Error::InvalidArgument(format!(
            "pole order {pole_order} needs more than {n} contour points"
        )));
    }
    Ok(circle_average(&f, C64::new(0.0, 0.0), radius, n))
}

/// (1/2πi)∮ f(z) dz on the circle |z − center| = radius with n nodes.
pub fn circle_average<F: Fn(C64) -> C64>(f: &F, center: C64, radius: f64, n: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let w = C64::from_polar(radius, theta);
        // dz = i w dθ; the 1/(2πi) and dθ = 2π/n leave w/n
        acc += f(center + w) * w;
    }
    acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residues_of_simple_functions() {
        let cfg = QuadratureConfig::default();
        let r = contour_origin(|z| 1.0 / z, 1, 1.0, &cfg).unwrap();
        assert!((r - 1.0).norm() < 1e-14);
        let r = contour_origin(|z| z, 0, 1.0, &cfg).unwrap();
        assert!(r.norm() < 1e-14);
        let r = contour_origin(|z| (z - 1.0) * (z - 2.0) / (z * z), 2, 1.0, &cfg).unwrap();
        assert!((r + 3.0).norm() < 1e-13);
        assert!(contour_origin(|z| z, 0, 0.0, &cfg).is_err());
    }

    #[test]
    fn exact_on_laurent_monomials() {
        let cfg = QuadratureConfig::default();
        let half = (cfg.contour_points / 2) as i32;
        for k in (-half + 1)..half {
            let r = contour_origin(|z| z.powi(k), (-k).max(0) as usize, 1.0, &cfg).unwrap();
            let want = if k == -1 { 1.0 } else { 0.0 };
            assert!((r - want).norm() <= 1e-12, "k = {k}: {r}");
        }
    }
}
