use harmonic_rmt::ensembles::PolyaWeight;
use harmonic_rmt::mellin::{mellin_half_line, Support, UnivariateFunction};
use harmonic_rmt::montecarlo::{corank1_density, corank1_project, interlaces};
use harmonic_rmt::numerics::{hermitian_eigenvalues, rng_stream, ComplexMatrix, QuadratureConfig};
use harmonic_rmt::products::{elementary_symmetric, elementary_symmetric_expanded, inverse_vandermonde_entry};
use harmonic_rmt::spherical::{phi_slices, psi_slices};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

/// Sorted values with pairwise gaps of at least `gap`, away from zero.
fn separated(n: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((gap..3.0f64, any::<bool>()), n).prop_map(move |v| {
        let mut out: Vec<f64> = Vec::with_capacity(v.len());
        let mut pos = 0.0;
        let mut neg = 0.0;
        for (x, sign) in v {
            if sign {
                pos += x;
                out.push(pos);
            } else {
                neg -= x;
                out.push(neg);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    })
}

fn positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2..1.0f64, n).prop_map(|v| {
        let mut acc = 0.0;
        v.into_iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    })
}

fn frequencies(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((0.0..0.6f64, -0.5..0.5f64), n)
        .prop_map(|v| v.into_iter().enumerate().map(|(j, (re, im))| C64::new(j as f64 + re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elementary_symmetric_agrees_with_expansion(a in prop::collection::vec(-3.0..3.0f64, 1..7)) {
        let scale: f64 = a.iter().map(|v| 1.0 + v.abs()).product();
        for o in 0..=a.len() {
            let c = elementary_symmetric(&a, o).unwrap();
            let e = elementary_symmetric_expanded(&a, o);
            prop_assert!((c - e).abs() <= 1e-12 * scale, "order {}: {} vs {}", o, c, e);
        }
    }

    #[test]
    fn inverse_vandermonde_rows(a in separated(4, 0.3)) {
        let k = a.len();
        for c in 0..k {
            for (d, ad) in a.iter().enumerate() {
                let s: f64 = (0..k)
                    .map(|o| inverse_vandermonde_entry(&a, c, o).unwrap() * ad.powi((k - 1 - o) as i32))
                    .sum();
                let want = if c == d { 1.0 } else { 0.0 };
                prop_assert!((s - want).abs() < 1e-9, "c = {}, d = {}: {}", c, d, s);
            }
        }
    }

    #[test]
    fn psi_shift_identity(a in positive(3), s in frequencies(3), mu in -1.0..1.0f64) {
        let shifted: Vec<C64> = s.iter().map(|z| z + mu).collect();
        let lhs = psi_slices(&shifted, &a).unwrap();
        let rhs = psi_slices(&s, &a).unwrap() * a.iter().product::<f64>().powf(mu);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1e-12), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn phi_is_symmetric_in_the_spectrum(a in separated(3, 0.3), s in frequencies(3), l in prop::collection::vec(0u8..2, 3)) {
        let base = phi_slices(&s, &l, &a).unwrap();
        let mut b = a.clone();
        b.reverse();
        b.swap(0, 1);
        let perm = phi_slices(&s, &l, &b).unwrap();
        prop_assert!((base - perm).norm() <= 1e-10 * base.norm().max(1.0));
    }

    #[test]
    fn corank_one_compression_interlaces(a in separated(4, 0.2), seed in any::<u64>()) {
        let mut rng = rng_stream(seed, 0);
        let b = corank1_project(&a, &mut rng).unwrap();
        prop_assert!(interlaces(&a, &b), "{:?} vs {:?}", a, b);
        prop_assert!(corank1_density(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn corank_one_density_vanishes_off_interlacing(a in separated(3, 0.3)) {
        let outside = vec![a[0] - 1.0, 0.5 * (a[1] + a[2])];
        prop_assert_eq!(corank1_density(&a, &outside).unwrap(), 0.0);
        let inside = vec![0.5 * (a[0] + a[1]), 0.5 * (a[1] + a[2])];
        prop_assert!(corank1_density(&a, &inside).unwrap() > 0.0);
    }

    #[test]
    fn ginibre_mellin_matches_quadrature(nu in 0.0..3.0f64, re in 0.5..3.0f64, im in -2.0..2.0f64) {
        let w = PolyaWeight::ginibre(nu).unwrap();
        let wc = w.clone();
        let f = UnivariateFunction::new(move |a| wc.eval(a), Support::PositiveAxis).with_breaks(w.breaks());
        let s = C64::new(re, im);
        let q = mellin_half_line(&f, s, &QuadratureConfig::default()).unwrap();
        let exact = w.mellin(s);
        prop_assert!((q - exact).norm() <= 1e-8 * exact.norm(), "{} vs {}", q, exact);
    }

    #[test]
    fn hermitian_eigenvalues_preserve_trace(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = rng_stream(seed, 1);
        let g = ComplexMatrix::gaussian(n, n, &mut rng);
        let h = g.matmul(&g.adjoint()).hermitian_part();
        let eig = hermitian_eigenvalues(&h).unwrap();
        let tr: f64 = eig.iter().sum();
        prop_assert!((tr - h.trace().re).abs() < 1e-10 * h.max_abs() * n as f64);
        prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(eig[0] > -1e-10 * h.max_abs());
    }
}
