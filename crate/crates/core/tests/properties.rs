//! Randomized invariants over the public API.

use geq_core::charts::PhasePoint;
use geq_core::constructions::{beltrami_pair, LinearMap, SphereChart};
use geq_core::dense;
use geq_core::normal_forms::{levi_civita_pair, LeviCivitaData};
use geq_core::poly::ScalarFunction1D;
use geq_core::projective::{adjugate_poly, integral_roots, l_eigen, l_tensor, projective_residual};
use geq_core::split_glue::{pair_distance, roundtrip};
use geq_core::verify::tangential_defect;
use geq_core::{Chart, Dual, MetricPair};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n)
}

/// Separated eigenvalue functions `lambda_i = 1 + i + small cubic` on `[0, 1]`.
fn lc_pair(n: usize) -> impl Strategy<Value = MetricPair> {
    prop::collection::vec(prop::collection::vec(-0.15f64..0.15, 3), n).prop_map(move |coeffs| {
        let lambdas = coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| ScalarFunction1D::new(vec![1.0 + i as f64, a[0], a[1], a[2]], (0.0, 1.0)).unwrap())
            .collect();
        let chart = Chart::cube(n, 0.0, 1.0).unwrap();
        levi_civita_pair(&LeviCivitaData::new(lambdas, chart).unwrap()).unwrap()
    })
}

fn unit_point(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
        .prop_filter("non-zero velocity", |(_, v)| v.iter().any(|c| c.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_is_multiplicative(a in matrix(4), b in matrix(4)) {
        let ab = dense::matmul(&a, &b, 4);
        let (da, db, dab) = (dense::det(&a, 4), dense::det(&b, 4), dense::det(&ab, 4));
        prop_assert!((dab - da * db).abs() <= 1e-10 * (1.0 + (da * db).abs()));
    }

    #[test]
    fn cayley_hamilton(a in matrix(4)) {
        let p = dense::char_poly(&a, 4);
        let z = dense::poly_at_matrix(&p, &a, 4);
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs())).powi(4);
        prop_assert!(z.iter().all(|v| v.abs() < 1e-10 * scale));
    }

    #[test]
    fn adjugate_times_shift_is_determinant(a in matrix(3), t in -3.0f64..3.0) {
        let adj = adjugate_poly(&a, 3).eval(t);
        let mut shifted = dense::to_dmatrix(&a, 3);
        for i in 0..3 {
            shifted[(i, i)] -= t;
        }
        let det = shifted.determinant();
        let prod = &adj * &shifted;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { det } else { 0.0 };
                prop_assert!((prod[(i, j)] - want).abs() < 1e-9 * (1.0 + det.abs()));
            }
        }
    }

    #[test]
    fn dual_numbers_differentiate_polynomials(c in prop::collection::vec(-3.0f64..3.0, 1..6), x in -1.0f64..1.0) {
        let f = ScalarFunction1D::new(c, (-1.0, 1.0)).unwrap();
        let d = f.eval(Dual::new(x, 1.0));
        prop_assert!((d.re - f.eval(x)).abs() < 1e-14);
        prop_assert!((d.eps - f.derivative().eval(x)).abs() < 1e-12);
    }

    #[test]
    fn levi_civita_l_is_diagonal(p in lc_pair(4), (x, _) in unit_point(4)) {
        let l = l_tensor(&p, &x).unwrap();
        let ev = l_eigen(&p, &x).unwrap().values;
        let mut diag: Vec<f64> = (0..4).map(|i| l[(i, i)]).collect();
        diag.sort_by(f64::total_cmp);
        for i in 0..4 {
            prop_assert!((diag[i] - ev[i]).abs() < 1e-10);
            for j in 0..4 {
                if i != j {
                    prop_assert!(l[(i, j)].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn roots_interlace_eigenvalues(p in lc_pair(3), (x, v) in unit_point(3)) {
        let ev = l_eigen(&p, &x).unwrap().values;
        let roots = integral_roots(&p, &PhasePoint::new(x, v)).unwrap().roots;
        for (i, t) in roots.iter().enumerate() {
            prop_assert!(ev[i] - 1e-9 <= *t && *t <= ev[i + 1] + 1e-9);
        }
    }

    #[test]
    fn levi_civita_pairs_have_zero_defect(p in lc_pair(3), (x, v) in unit_point(3)) {
        prop_assert!(tangential_defect(&p, &PhasePoint::new(x.clone(), v)).unwrap() < 1e-10);
        prop_assert!(projective_residual(&p, &x).unwrap() < 1e-10);
    }

    #[test]
    fn glue_inverts_split(p in lc_pair(3), r in 1usize..3, (x, _) in unit_point(3)) {
        let back = roundtrip(&p, r).unwrap();
        prop_assert!(pair_distance(&p, &back, &x) < 1e-12);
    }

    #[test]
    fn beltrami_pairs_are_equivalent(d in prop::collection::vec(0.5f64..3.0, 3), x in prop::collection::vec(-0.45f64..0.45, 2)) {
        let t = beltrami_pair(2, &LinearMap::diagonal(&d).unwrap(), &SphereChart::standard(2)).unwrap();
        prop_assert!(projective_residual(&t.pair, &x).unwrap() < 1e-9);
    }
}
