use super::*;
use crate::charts::{integrate_geodesic, pushforward_metric, PhasePoint};
use crate::projective::{l_eigen, l_tensor, max_multiplicity, projective_residual};

fn poly(c: &[f64], i: (f64, f64)) -> ScalarFunction1D {
    ScalarFunction1D::new(c.to_vec(), i).unwrap()
}

fn sq(a: f64, d: usize) -> Chart {
    Chart::cube(d, -a, a).unwrap()
}

fn off_axis_samples(chart: &Chart, per: usize, keep: impl Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
    chart.shrink(0.98).grid(per).into_iter().filter(|x| keep(x)).collect()
}

#[test]
fn levi_civita_examples() {
    let p = levi_civita_pair(&constant_levi_civita(&[1.0, 2.0]).unwrap()).unwrap();
    let x = [0.3, 0.7];
    assert_eq!(p.g.raw(&x), vec![1.0, 0.0, 0.0, 1.0]);
    let gb = p.gbar.raw(&x);
    assert!((gb[0] - 0.5).abs() < 1e-15 && (gb[3] - 0.25).abs() < 1e-15);
    let l = l_tensor(&p, &x).unwrap();
    assert!((l[(0, 0)] - 1.0).abs() < 1e-14 && (l[(1, 1)] - 2.0).abs() < 1e-14 && l[(0, 1)].abs() < 1e-14);

    let p = levi_civita_pair(&constant_levi_civita(&[1.0, 2.0, 4.0]).unwrap()).unwrap();
    let g = p.g.raw(&[0.5, 0.5, 0.5]);
    assert_eq!((g[0], g[4], g[8]), (3.0, 2.0, 6.0));

    let d = LeviCivitaData::new(vec![poly(&[2.0, 1.0], (0.0, 1.0))], Chart::cube(1, 0.0, 1.0).unwrap()).unwrap();
    let p = levi_civita_pair(&d).unwrap();
    for x in [0.0, 0.4, 1.0] {
        assert_eq!(p.g.raw(&[x]), vec![1.0]);
        assert!((p.gbar.raw(&[x])[0] - 1.0 / ((x + 2.0) * (x + 2.0))).abs() < 1e-15);
        assert!((l_eigen(&p, &[x]).unwrap().values[0] - (x + 2.0)).abs() < 1e-13);
    }
}

#[test]
fn levi_civita_rejects_overlap_and_nonpositive() {
    let c = Chart::cube(2, 0.0, 1.0).unwrap();
    let r = LeviCivitaData::new(vec![poly(&[1.0, 1.0], (0.0, 1.0)), poly(&[1.5], (0.0, 1.0))], c.clone());
    assert!(matches!(r, Err(GeqError::SeparationViolated { i: 1, j: 2, .. })));
    let r = LeviCivitaData::new(vec![poly(&[-0.5, 1.0], (0.0, 1.0)), poly(&[3.0], (0.0, 1.0))], c);
    assert!(matches!(r, Err(GeqError::NotPositive(_))));
}

#[test]
fn levi_civita_l_is_diagonal() {
    let FormParams::LcNd(d) = FormParams::default_for(FormKind::LcNd) else { unreachable!() };
    let p = levi_civita_pair(&d).unwrap();
    for x in d.chart.grid(5) {
        let l = l_tensor(&p, &x).unwrap();
        let ev = d.eigenvalues_at(&x);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { ev[i] } else { 0.0 };
                assert!((l[(i, j)] - e).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn elliptic_examples() {
    let params = FormParams::TwoDElliptic { lambda: poly(&[2.0, 1.0], (-1.0, 1.0)), chart: sq(0.6, 2) };
    let p = model_form_pair(&params).unwrap();
    let g = p.g.raw(&[0.0, 0.5]);
    assert!((g[0] - 4.0).abs() < 1e-13 && (g[3] - 4.0).abs() < 1e-13 && g[1].abs() < 1e-15);
    let ev = model_eigenvalues(&params, &[0.0, 0.5]).unwrap();
    assert!((ev[0] - 1.5).abs() < 1e-15 && (ev[1] - 2.5).abs() < 1e-15);
    let ev = model_eigenvalues(&params, &[0.0, 0.0]).unwrap();
    assert_eq!(ev, vec![2.0, 2.0]);
}

#[test]
fn polar_plus_examples() {
    let params = FormParams::TwoDPolarPlus { f: poly(&[1.0], (0.0, 1.0)), lambda1: 1.0, chart: sq(0.6, 2) };
    let p = model_form_pair(&params).unwrap();
    assert_eq!(p.g.raw(&[0.0, 0.0]), vec![1.0, 0.0, 0.0, 1.0]);
    assert_eq!(p.gbar.raw(&[0.0, 0.0]), vec![1.0, 0.0, 0.0, 1.0]);
    let ev = model_eigenvalues(&params, &[0.3, 0.4]).unwrap();
    assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 1.25).abs() < 1e-15);
}

#[test]
fn full_is_proportional_at_origin() {
    let params = FormParams::ThreeDFull { lambda: poly(&[2.0, 1.0], (-1.0, 1.0)), c: 1.0, chart: sq(0.4, 3) };
    let p = model_form_pair(&params).unwrap();
    let l = l_tensor(&p, &[0.0; 3]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((l[(i, j)] - if i == j { 2.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert_eq!(model_eigenvalues(&params, &[0.0; 3]).unwrap(), vec![2.0; 3]);
}

#[test]
fn bifurcation_origins_have_coinciding_eigenvalues() {
    for kind in &FormKind::ALL[1..] {
        let params = FormParams::default_for(*kind);
        let origin = vec![0.0; params.chart().dim()];
        let ev = model_eigenvalues(&params, &origin).unwrap();
        assert!(max_multiplicity(&ev, 1e-12) >= 2, "{kind:?}: {ev:?}");
    }
}

#[test]
fn every_default_family_is_projectively_equivalent() {
    for kind in FormKind::ALL {
        let params = FormParams::default_for(kind);
        let p = model_form_pair(&params).unwrap();
        assert!(p.g.has_analytic_partials() && p.gbar.has_analytic_partials());
        for x in off_axis_samples(p.chart(), 4, |_| true) {
            let r = projective_residual(&p, &x).unwrap();
            assert!(r < 1e-10, "{kind:?} at {x:?}: {r:e}");
        }
    }
}

#[test]
fn conical_full_family_is_equivalent_off_axis() {
    // C != 4/lambda'(0): the angular terms keep their 1/w
    let params = FormParams::ThreeDFull { lambda: poly(&[2.0, 1.0, 0.2], (-1.0, 1.0)), c: 1.0, chart: sq(0.4, 3) };
    let p = model_form_pair(&params).unwrap();
    for x in off_axis_samples(p.chart(), 4, |x| x[1].abs() + x[2].abs() > 1e-3) {
        assert!(projective_residual(&p, &x).unwrap() < 1e-9, "{x:?}");
    }
}

#[test]
fn model_eigenvalues_match_l_eigen() {
    for kind in FormKind::ALL {
        let params = FormParams::default_for(kind);
        let p = model_form_pair(&params).unwrap();
        let far = |x: &[f64]| kind != FormKind::ThreeDFull || x.iter().map(|v| v * v).sum::<f64>().sqrt() >= 0.05;
        let pts = off_axis_samples(p.chart(), if p.dim() == 2 { 32 } else { 10 }, far);
        assert!(pts.len() >= 900);
        for x in pts {
            let a = model_eigenvalues(&params, &x).unwrap();
            let b = l_eigen(&p, &x).unwrap().values;
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-8, "{kind:?} at {x:?}: {a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let flat = FormParams::TwoDElliptic { lambda: poly(&[2.0, 0.0, 1.0], (-1.0, 1.0)), chart: sq(0.5, 2) };
    assert!(matches!(model_form_pair(&flat), Err(GeqError::InvalidInput(_))));
    let neg = FormParams::ThreeDFull { lambda: poly(&[2.0, 1.0], (-1.0, 1.0)), c: -1.0, chart: sq(0.4, 3) };
    assert!(matches!(model_form_pair(&neg), Err(GeqError::NotPositive(_))));
    let wrong = FormParams::TwoDElliptic { lambda: poly(&[2.0, 1.0], (-1.0, 1.0)), chart: sq(0.5, 3) };
    assert!(matches!(model_form_pair(&wrong), Err(GeqError::DimensionMismatch { .. })));
}

#[test]
fn box_is_halved_until_admissible() {
    // 1 - r^2 f > 0 needs r < 1/sqrt(3)
    let params = FormParams::TwoDPolarMinus { f: poly(&[1.0, 2.0], (0.0, 4.0)), lambda2: 1.0, chart: sq(1.0, 2) };
    let p = model_form_pair(&params).unwrap();
    assert!(p.chart().hi[0] < 1.0 && p.chart().hi[0] >= 0.25);
    // lambda_1 >= 1 everywhere: never admissible
    let params = FormParams::ThreeDAxial {
        f: poly(&[1.0], (0.0, 1.0)),
        lambda1: poly(&[1.5], (-1.0, 1.0)),
        chart: sq(0.4, 3),
    };
    assert!(matches!(model_form_pair(&params), Err(GeqError::NotRealizable(_))));
}

#[test]
fn canonical_map_examples() {
    let lp = log_polar_map(Chart::new(vec![-1.0, -3.0], vec![0.0, 3.0]).unwrap());
    assert_eq!(lp.apply(&[0.0, 0.0]), vec![1.0, 0.0]);
    let el = elliptic_map(Chart::cube(2, 0.2, 1.0).unwrap());
    assert_eq!(el.apply(&[1.0, 1.0]), vec![0.0, 1.0]);
    assert_eq!(elliptic_inverse(0.0, 1.0), [1.0, 1.0]);
    assert_eq!(cylindrical_elliptic_inverse(&[0.0, 1.0, 0.0], 1.0), [1.0, 0.0, 1.0]);
    let ce = cylindrical_elliptic_map(Chart::cube(3, 0.05, 2.0).unwrap(), 1.0);
    let u = ce.apply(&[1.0, 0.0, 1.0]);
    assert!((u[0]).abs() < 1e-15 && (u[1] - 1.0).abs() < 1e-15 && u[2].abs() < 1e-15);
    assert!(canonical_chart_map(&FormParams::default_for(FormKind::LcNd)).is_err());
}

#[test]
fn canonical_maps_round_trip_and_have_exact_jacobians() {
    let c = 2.0;
    let ce = cylindrical_elliptic_map(Chart::cube(3, 0.05, 1.0).unwrap(), c);
    for x in Chart::new(vec![0.1, 0.2, 0.1], vec![0.9, 2.5, 0.9]).unwrap().grid(4) {
        let u = ce.apply(&x);
        let back = cylindrical_elliptic_inverse(&u, c);
        for k in 0..3 {
            assert!((back[k] - x[k]).abs() < 1e-12);
        }
        let (a, b) = (ce.jacobian(&x), crate::charts::fd_jacobian(&ce, &x));
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-7));
    }
    let el = elliptic_map(Chart::cube(2, -1.0, 1.0).unwrap());
    for x in [[0.3, 0.8], [-0.5, 0.2], [0.9, 0.9]] {
        let u = el.apply(&x);
        let back = elliptic_inverse(u[0], u[1]);
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
    }
}

#[test]
fn elliptic_pushforward_is_conformal_to_levi_civita_block() {
    let FormParams::TwoDElliptic { lambda, .. } = FormParams::default_for(FormKind::TwoDElliptic) else {
        unreachable!()
    };
    let params = FormParams::default_for(FormKind::TwoDElliptic);
    let p = model_form_pair(&params).unwrap();
    let map = canonical_chart_map(&params).unwrap();
    let g = pushforward_metric(map.clone(), &p.g).unwrap();
    let gb = pushforward_metric(map.clone(), &p.gbar).unwrap();
    for x in map.domain().grid(6) {
        let (l1, l2) = (lambda.eval(-x[0] * x[0]), lambda.eval(x[1] * x[1]));
        let k = 4.0 * (l2 - l1);
        let kb = 4.0 * (1.0 / l1 - 1.0 / l2);
        let (m, mb) = (g.raw(&x), gb.raw(&x));
        for (got, want) in [(m[0], k), (m[3], k), (mb[0], kb / l1), (mb[3], kb / l2)] {
            assert!((got - want).abs() < 1e-8 * want.abs(), "{x:?}: {got} vs {want}");
        }
        assert!(m[1].abs() < 1e-8 * k && mb[1].abs() < 1e-8 * kb);
    }
}

#[test]
fn polar_pushforwards_have_block_form() {
    for kind in [FormKind::TwoDPolarPlus, FormKind::TwoDPolarMinus] {
        let params = FormParams::default_for(kind);
        let p = model_form_pair(&params).unwrap();
        let map = canonical_chart_map(&params).unwrap();
        let g = pushforward_metric(map.clone(), &p.g).unwrap();
        let gb = pushforward_metric(map.clone(), &p.gbar).unwrap();
        for x in map.domain().grid(6) {
            let r2 = (2.0 * x[0]).exp();
            let (m, mb) = (g.raw(&x), gb.raw(&x));
            let (want, wantb) = match &params {
                FormParams::TwoDPolarPlus { f, lambda1: c, .. } => {
                    let fv = f.eval(r2);
                    let lb = c * (1.0 + r2 * fv);
                    let k = 1.0 / c * (1.0 / c - 1.0 / lb);
                    (r2 * fv, [k / lb, k / c])
                }
                FormParams::TwoDPolarMinus { f, lambda2: c, .. } => {
                    let fv = f.eval(r2);
                    let la = c * (1.0 - r2 * fv);
                    let k = 1.0 / c * (1.0 / la - 1.0 / c);
                    (r2 * fv, [k / la, k / c])
                }
                _ => unreachable!(),
            };
            assert!((m[0] - want).abs() < 1e-8 * want && (m[3] - want).abs() < 1e-8 * want);
            assert!(m[1].abs() < 1e-8 * want);
            for (got, w) in [(mb[0], wantb[0]), (mb[3], wantb[1])] {
                assert!((got - w).abs() < 1e-8 * w, "{kind:?} {x:?}: {got} vs {w}");
            }
            assert!(mb[1].abs() < 1e-8 * wantb[0]);
        }
    }
}

#[test]
fn full_pushforward_is_levi_civita_block() {
    let params = FormParams::default_for(FormKind::ThreeDFull);
    let FormParams::ThreeDFull { lambda, .. } = &params else { unreachable!() };
    let p = model_form_pair(&params).unwrap();
    let map = canonical_chart_map(&params).unwrap();
    let g = pushforward_metric(map.clone(), &p.g).unwrap();
    let gb = pushforward_metric(map.clone(), &p.gbar).unwrap();
    for x in map.domain().grid(5) {
        let (l1, l2, l3) = (lambda.eval(-x[0]), lambda.eval(0.0), lambda.eval(x[2]));
        let want = [(l3 - l1) / x[0], (l2 - l1) * (l3 - l2), (l3 - l1) / x[2]];
        let lam = [l1, l2, l3];
        let wbs: Vec<f64> = (0..3).map(|i| want[i] / (lam[i] * l1 * l2 * l3)).collect();
        let (m, mb) = (g.raw(&x), gb.raw(&x));
        for i in 0..3 {
            let wb = wbs[i];
            assert!((m[i * 4] - want[i]).abs() < 1e-8 * want[i], "{x:?}: g{i}{i}");
            assert!((mb[i * 4] - wb).abs() < 1e-8 * wb, "{x:?}: gbar{i}{i}");
            for j in 0..3 {
                if i != j {
                    assert!(m[i * 3 + j].abs() < 1e-8 * want[i].max(want[j]));
                    assert!(mb[i * 3 + j].abs() < 1e-8 * wbs[i].max(wbs[j]));
                }
            }
        }
    }
}

#[test]
fn axial_symmetries() {
    let params = FormParams::default_for(FormKind::ThreeDAxial);
    let p = model_form_pair(&params).unwrap();
    // (a) rotations about the x1 axis
    let rot = |x: &[f64], c: f64, s: f64| [x[0], c * x[1] - s * x[2], s * x[1] + c * x[2]];
    for phi in [0.3f64, 1.1, 2.5] {
        let (c, s) = (phi.cos(), phi.sin());
        let r = [1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c];
        for x in p.chart().shrink(0.6).grid(4) {
            let y = rot(&x, c, s);
            for field in [&p.g, &p.gbar] {
                let (mx, my) = (field.raw(&x), field.raw(&y));
                // R^T g(Rx) R = g(x)
                for a in 0..3 {
                    for b in 0..3 {
                        let mut t = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                t += r[i * 3 + a] * my[i * 3 + j] * r[j * 3 + b];
                            }
                        }
                        assert!((t - mx[a * 3 + b]).abs() < 1e-12);
                    }
                }
            }
        }
    }
    // (b) the plane x2 = 0 is totally geodesic
    let start = PhasePoint::new(vec![0.05, 0.0, 0.05], vec![0.1, 0.0, 0.2]);
    let traj = integrate_geodesic(&p.g, &start, 1.0, 1e-10).unwrap();
    assert!(traj.samples.iter().all(|(_, q)| q.x[1].abs() < 1e-8));
    // (c) the constant eigenvalue clusters only on the axis
    for x in p.chart().grid(9) {
        let ev = l_eigen(&p, &x).unwrap().values;
        let clustered = ev.windows(2).any(|w| w[1] - w[0] < 1e-8 && (w[0] - 1.0).abs() < 1e-8);
        assert_eq!(clustered, x[1] * x[1] + x[2] * x[2] < 1e-16, "{x:?}");
    }
    // (d) on x2 = 0, d/dx2 is an eigenvector with eigenvalue 1
    for x in [[0.1, 0.0, 0.3], [-0.2, 0.0, -0.1], [0.0, 0.0, 0.35]] {
        let l = l_tensor(&p, &x).unwrap();
        let res = (0..3).map(|i| (l[(i, 1)] - if i == 1 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
        assert!(res < 1e-10);
    }
}

#[test]
fn params_round_trip_through_json() {
    for kind in FormKind::ALL {
        let p = FormParams::default_for(kind);
        let s = serde_json::to_string(&p).unwrap();
        let back: FormParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}

#[test]
fn canonical_form_errors_are_small() {
    for kind in [FormKind::TwoDElliptic, FormKind::TwoDPolarPlus, FormKind::TwoDPolarMinus, FormKind::ThreeDFull] {
        let e = canonical_form_error(&FormParams::default_for(kind), 6).unwrap();
        assert!(e < 1e-8, "{kind:?}: {e:e}");
    }
    assert!(canonical_form_error(&FormParams::default_for(FormKind::ThreeDAxial), 4).is_err());
    let params = FormParams::default_for(FormKind::TwoDElliptic);
    let pair = model_form_pair(&params).unwrap();
    assert!(model_eigenvalue_error(&params, &pair, &sample_points(&params, 10)).unwrap() < 1e-8);
}
