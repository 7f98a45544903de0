use super::*;
use crate::charts::{integrate_geodesic, PhasePoint};
use crate::projective::{l_eigen, max_multiplicity, projective_residual};

fn diag123() -> LinearMap {
    LinearMap::diagonal(&[1.0, 2.0, 3.0]).unwrap()
}

#[test]
fn identity_map_gives_equal_metrics() {
    for n in 1..4 {
        let t = beltrami_pair(n, &LinearMap::identity(n + 1), &SphereChart::standard(n)).unwrap();
        for x in t.pair.chart().grid(4) {
            let (g, gb) = (t.pair.g.raw(&x), t.pair.gbar.raw(&x));
            for (a, b) in g.iter().zip(&gb) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
            }
        }
    }
}

#[test]
fn degenerate_and_mismatched_inputs_are_rejected() {
    assert!(matches!(LinearMap::diagonal(&[1.0, 0.0, 2.0]), Err(GeqError::DegenerateMap(_))));
    assert!(matches!(
        beltrami_pair(2, &LinearMap::identity(4), &SphereChart::standard(2)),
        Err(GeqError::DimensionMismatch { .. })
    ));
    assert!(SphereChart::new(2, 20.0, None).is_err());
    assert!(SphereChart::new(2, 0.5, Some(vec![0.0, 1.0, 1.0])).is_err());
}

#[test]
fn embedding_jacobian_matches_differences() {
    let c = SphereChart::new(2, 0.5, Some(vec![0.6, 0.0, 0.8])).unwrap();
    let x = [0.2, -0.3];
    let e = c.embed(&x);
    assert!((e.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
    let j = c.embed_jacobian(&x);
    for k in 0..2 {
        let h = 1e-6;
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let (p, q) = (c.embed(&xp), c.embed(&xm));
        for i in 0..3 {
            assert!(((p[i] - q[i]) / (2.0 * h) - j[i * 2 + k]).abs() < 1e-8);
        }
    }
}

#[test]
fn beltrami_pairs_are_equivalent_and_strictly_non_proportional() {
    for (n, a) in [(2, diag123()), (3, LinearMap::diagonal(&[1.0, 1.5, 2.5, 4.0]).unwrap())] {
        let chart = SphereChart::new(n, 0.5, Some(pole_for(n))).unwrap();
        let t = beltrami_pair(n, &a, &chart).unwrap();
        for x in t.pair.chart().shrink(0.95).grid(4) {
            assert!(projective_residual(&t.pair, &x).unwrap() < 1e-9);
        }
    }
    let t = beltrami_pair(2, &diag123(), &SphereChart::standard(2)).unwrap();
    let mut min_gap = f64::INFINITY;
    for x in t.pair.chart().grid(32) {
        let ev = l_eigen(&t.pair, &x).unwrap().values;
        min_gap = min_gap.min(ev[1] - ev[0]);
    }
    assert!(min_gap > 0.0, "{min_gap}");
}

fn pole_for(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 0.6;
    p[n] = 0.8;
    p
}

#[test]
fn geodesics_lie_on_great_circles_before_and_after_the_map() {
    let a = diag123();
    let chart = SphereChart::standard(2);
    let t = beltrami_pair(2, &a, &chart).unwrap();
    for (i, phi) in [0.1f64, 0.9, 2.0, 3.3, 5.0].into_iter().enumerate() {
        let x0 = vec![0.1 * i as f64 - 0.2, 0.05];
        let v = vec![phi.cos(), phi.sin()];
        for field in [&t.pair.g, &t.pair.gbar] {
            let traj = integrate_geodesic(field, &PhasePoint::new(x0.clone(), v.clone()), 1.0, 1e-11).unwrap();
            let pts: Vec<Vec<f64>> = traj.samples.iter().map(|(_, p)| chart.embed(&p.x)).collect();
            assert!(pts.len() > 5);
            assert!(planarity_defect(&pts) < 1e-9);
            let imgs: Vec<Vec<f64>> = pts.iter().map(|p| normalize_image(&a, p)).collect();
            assert!(planarity_defect(&imgs) < 1e-9);
        }
    }
    let curve: Vec<Vec<f64>> = (0..20).map(|k| vec![1.0, k as f64, (k * k) as f64]).collect();
    assert!(planarity_defect(&curve) > 1e-3);
}

#[test]
fn scaling_examples() {
    let t = beltrami_pair(1, &LinearMap::diagonal(&[1.0, 2.0]).unwrap(), &SphereChart::standard(1)).unwrap();
    let s = scale_triple(&t, 16.0).unwrap();
    assert!((s.eigen_range.0 - 4.0 * t.eigen_range.0).abs() < 1e-12);
    let x = [0.1];
    let (a, b) = (l_eigen(&t.pair, &x).unwrap().values, l_eigen(&s.pair, &x).unwrap().values);
    assert!((b[0] - 4.0 * a[0]).abs() < 1e-12);

    let t3 = beltrami_pair(3, &LinearMap::diagonal(&[1.0, 1.5, 2.5, 4.0]).unwrap(), &SphereChart::standard(3)).unwrap();
    let s3 = scale_triple(&t3, 16.0).unwrap();
    let x = [0.1, -0.2, 0.3];
    let (a, b) = (l_eigen(&t3.pair, &x).unwrap().values, l_eigen(&s3.pair, &x).unwrap().values);
    for (u, v) in a.iter().zip(&b) {
        assert!((v - 2.0 * u).abs() < 1e-12);
    }
    let same = scale_triple(&t3, 1.0).unwrap();
    assert_eq!(same.pair.g.raw(&x), t3.pair.g.raw(&x));
    assert!(scale_triple(&t3, 0.0).is_err());
}

#[test]
fn scaling_preserves_geodesics() {
    let t = beltrami_pair(2, &diag123(), &SphereChart::standard(2)).unwrap();
    let s = scale_triple(&t, 7.0).unwrap();
    let start = PhasePoint::new(vec![0.1, -0.1], vec![0.6, 0.8]);
    let a = integrate_geodesic(&t.pair.g, &start, 0.3, 1e-11).unwrap();
    let b = integrate_geodesic(&s.pair.g, &start, 0.3, 1e-11).unwrap();
    assert_eq!(a.status, crate::charts::TrajectoryStatus::Completed);
    // identical Christoffel symbols, hence identical parametrized curves
    let (ea, eb) = (a.end(), b.end());
    assert!((a.end_time() - b.end_time()).abs() < 1e-12);
    assert!(ea.x.iter().zip(&eb.x).all(|(p, q)| (p - q).abs() < 1e-8));
}

#[test]
fn products_of_spheres() {
    let single = spheres_product(&[(2, diag123())]).unwrap();
    let direct = beltrami_pair(2, &diag123(), &SphereChart::standard(2)).unwrap();
    assert_eq!(single.pair.gbar.raw(&[0.1, 0.2]), direct.pair.gbar.raw(&[0.1, 0.2]));

    let p = spheres_product(&[(1, LinearMap::diagonal(&[1.0, 2.0]).unwrap()), (2, diag123())]).unwrap();
    assert_eq!(p.dim(), 3);
    for x in p.pair.chart().shrink(0.9).grid(4) {
        let ev = l_eigen(&p.pair, &x).unwrap().values;
        assert_eq!(max_multiplicity(&ev, 1e-8), 1, "{ev:?}");
        assert!(projective_residual(&p.pair, &x).unwrap() < 1e-9);
    }
}

#[test]
fn product_of_two_equal_spheres_needs_scaling() {
    let a = beltrami_pair(2, &diag123(), &SphereChart::standard(2)).unwrap();
    assert!(oplus(&[a.clone(), a.clone()]).is_err());
    let p = spheres_product(&[(2, diag123()), (2, diag123())]).unwrap();
    assert_eq!(p.dim(), 4);
    for x in p.pair.chart().shrink(0.9).grid(3) {
        let ev = l_eigen(&p.pair, &x).unwrap().values;
        assert!(max_multiplicity(&ev, 1e-8) <= 3);
        assert!(ev[2] >= (1.0 + PRODUCT_GAP) * ev[1] * 0.999);
        assert!(projective_residual(&p.pair, &x).unwrap() < 1e-9);
    }
}
