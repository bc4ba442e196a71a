//! Cross-module properties checked over randomized inputs.

use eqz_core::bergman::{build_space, fs_weight};
use eqz_core::discrepancy::{dict_seminorm, CurrentTag, PairingVector};
use eqz_core::envelope::{radial_envelope, RadialGrid};
use eqz_core::harmonics::{harmonic_dictionary, TestFunction};
use eqz_core::quadrature::make_grid;
use eqz_core::sections::{backward_error, empirical_pairing, sample_section, unit_monomial_coefficients, zeros, RandomSection};
use eqz_core::weights::{ball_sup, gauss_bump, holder_bump};
use eqz_core::{Grid, Point};
use num_complex::Complex;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point> {
    (0.0f64..std::f64::consts::PI, -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(t, l)| Point::from_colat_lon(t, l))
}

fn grid() -> Grid {
    make_grid(48, 64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_count_mass_and_scale_invariance(
        p in 1usize..60,
        m in -1i64..4,
        seed in any::<u64>(),
        re in -5.0f64..5.0,
        im in -5.0f64..5.0,
    ) {
        prop_assume!(re.hypot(im) > 1e-3);
        let w = gauss_bump::<f64>(1.0, 0.6).unwrap();
        let space = build_space(p, m, &w, &grid()).unwrap();
        let sec = sample_section(&space, seed, 0);
        let zs = zeros(&sec, &space).unwrap();
        prop_assert_eq!(zs.total_multiplicity() as i64, p as i64 + m);
        let mass = empirical_pairing(&zs, &TestFunction::harmonic(0, 0), p);
        prop_assert!((mass - (p as i64 + m) as f64 / p as f64).abs() < 1e-13);

        let lam = Complex::new(re, im);
        let scaled = RandomSection { coeffs: sec.coeffs.iter().map(|c| c * lam).collect(), ..sec.clone() };
        let zs2 = zeros(&scaled, &space).unwrap();
        prop_assert_eq!(zs.roots.len(), zs2.roots.len());
        for ((a, ka), (b, kb)) in zs.roots.iter().zip(&zs2.roots) {
            prop_assert_eq!(ka, kb);
            prop_assert!(a.distance(b) < 1e-9);
        }

        let scale = space.monomial_log_scales();
        let q: Vec<Complex<f64>> = unit_monomial_coefficients(&sec, &space).iter().zip(&scale).map(|(c, l)| c * l.exp()).collect();
        for (x, _) in &zs.roots {
            prop_assert!(backward_error(&q, x) <= 1e-8);
        }
    }

    #[test]
    fn bergman_ignores_constant_shifts(c in -3.0f64..3.0, p in 1usize..30, x in point()) {
        let w = gauss_bump::<f64>(1.5, 0.6).unwrap();
        let g = grid();
        let s1 = build_space(p, 0, &w, &g).unwrap();
        let s2 = build_space(p, 0, &w.shifted(c), &g).unwrap();
        prop_assert!((s1.log_bergman(&x) - s2.log_bergman(&x)).abs() < 1e-9);
        prop_assert!((fs_weight(&s2, &x) - fs_weight(&s1, &x) - c).abs() < 1e-10);
    }

    #[test]
    fn envelope_lies_below_and_commutes_with_shifts(
        a in 0.1f64..3.0,
        alpha in 0.2f64..1.0,
        c in -2.0f64..2.0,
        x in point(),
    ) {
        let w = holder_bump::<f64>(a, alpha, [0.0, 0.0, 1.0]).unwrap();
        let g = RadialGrid::default();
        let e = radial_envelope(&w, &g).unwrap();
        prop_assert!(e.eval(&x) <= w.eval(&x) + 1e-6);
        let shifted = radial_envelope(&w.shifted(c), &g).unwrap();
        for (u, v) in e.node_values().iter().zip(shifted.node_values()) {
            prop_assert!((u + c - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_sup_dominates(a in -2.0f64..2.0, s in 0.2f64..2.0, rho in 0.01f64..0.5, x in point()) {
        let w = gauss_bump::<f64>(a, s).unwrap();
        let sup = ball_sup(&w, rho).unwrap();
        prop_assert!(sup.eval(&x) >= w.eval(&x) - 1e-14);
    }

    #[test]
    fn seminorm_bounds_every_single_gap(
        a in proptest::collection::vec(-1.0f64..1.0, 16),
        b in proptest::collection::vec(-1.0f64..1.0, 16),
    ) {
        let d = harmonic_dictionary(3).unwrap();
        let pa = PairingVector::new(CurrentTag::Empirical, a.clone(), &d).unwrap();
        let pb = PairingVector::new(CurrentTag::Empirical, b.clone(), &d).unwrap();
        let n = dict_seminorm(&pa, &pb).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(n >= (x - y).abs());
        }
        prop_assert_eq!(n, dict_seminorm(&pb, &pa).unwrap());
    }
}
