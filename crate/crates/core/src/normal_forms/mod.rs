//! Builders for the closed-form metric pairs: the n-dimensional Levi-Civita
//! model and the 2D/3D normal forms near points where eigenvalues of `L`
//! collide, with their natural singular coordinate systems.

mod levi_civita;
mod three_d;
mod two_d;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::charts::{Chart, ChartMap, Components, FnMap, MetricField, MetricPair};
use crate::dense;
use crate::error::{GeqError, Result};
use crate::poly::ScalarFunction1D;

pub use levi_civita::{
    constant_levi_civita, levi_civita_pair, LeviCivitaComponents, LeviCivitaData, SEPARATION_SAMPLES,
};
pub use three_d::{Axial, Full};
pub use two_d::{BifurcationPolys, Elliptic, Polar};

/// Radius around the singular locus excluded from chart-map checks.
pub const SINGULAR_RADIUS: f64 = 0.05;
/// Cap on the number of positivity samples per box.
pub const MAX_POSITIVITY_SAMPLES: usize = 100_000;
/// Number of times a box may be halved before giving up.
pub const MAX_SHRINKS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    LcNd,
    TwoDElliptic,
    TwoDPolarPlus,
    TwoDPolarMinus,
    ThreeDAxial,
    ThreeDFull,
}

impl FormKind {
    pub const ALL: [FormKind; 6] = [
        FormKind::LcNd,
        FormKind::TwoDElliptic,
        FormKind::TwoDPolarPlus,
        FormKind::TwoDPolarMinus,
        FormKind::ThreeDAxial,
        FormKind::ThreeDFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormKind::LcNd => "lc_nd",
            FormKind::TwoDElliptic => "two_d_elliptic",
            FormKind::TwoDPolarPlus => "two_d_polar_plus",
            FormKind::TwoDPolarMinus => "two_d_polar_minus",
            FormKind::ThreeDAxial => "three_d_axial",
            FormKind::ThreeDFull => "three_d_full",
        }
    }
}

/// Family parameters. Bifurcation families live on boxes around the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormParams {
    LcNd(LeviCivitaData),
    TwoDElliptic { lambda: ScalarFunction1D, chart: Chart },
    TwoDPolarPlus { f: ScalarFunction1D, lambda1: f64, chart: Chart },
    TwoDPolarMinus { f: ScalarFunction1D, lambda2: f64, chart: Chart },
    ThreeDAxial { f: ScalarFunction1D, lambda1: ScalarFunction1D, chart: Chart },
    ThreeDFull { lambda: ScalarFunction1D, c: f64, chart: Chart },
}

impl FormParams {
    pub fn kind(&self) -> FormKind {
        match self {
            FormParams::LcNd(_) => FormKind::LcNd,
            FormParams::TwoDElliptic { .. } => FormKind::TwoDElliptic,
            FormParams::TwoDPolarPlus { .. } => FormKind::TwoDPolarPlus,
            FormParams::TwoDPolarMinus { .. } => FormKind::TwoDPolarMinus,
            FormParams::ThreeDAxial { .. } => FormKind::ThreeDAxial,
            FormParams::ThreeDFull { .. } => FormKind::ThreeDFull,
        }
    }

    pub fn chart(&self) -> &Chart {
        match self {
            FormParams::LcNd(d) => &d.chart,
            FormParams::TwoDElliptic { chart, .. }
            | FormParams::TwoDPolarPlus { chart, .. }
            | FormParams::TwoDPolarMinus { chart, .. }
            | FormParams::ThreeDAxial { chart, .. }
            | FormParams::ThreeDFull { chart, .. } => chart,
        }
    }

    pub fn with_chart(&self, c: Chart) -> Self {
        let mut out = self.clone();
        match &mut out {
            FormParams::LcNd(d) => d.chart = c,
            FormParams::TwoDElliptic { chart, .. }
            | FormParams::TwoDPolarPlus { chart, .. }
            | FormParams::TwoDPolarMinus { chart, .. }
            | FormParams::ThreeDAxial { chart, .. }
            | FormParams::ThreeDFull { chart, .. } => *chart = c,
        }
        out
    }

    /// A representative parameter set for each family.
    pub fn default_for(kind: FormKind) -> Self {
        let poly = |c: Vec<f64>, i: (f64, f64)| ScalarFunction1D { coeffs: c, interval: i };
        let sq = |a: f64, d: usize| Chart::cube(d, -a, a).expect("valid box");
        match kind {
            FormKind::LcNd => FormParams::LcNd(LeviCivitaData {
                lambdas: vec![
                    poly(vec![1.0, 0.2, 0.05], (0.0, 1.0)),
                    poly(vec![2.0, -0.1, 0.1], (0.0, 1.0)),
                    poly(vec![3.0, 0.3, -0.1, 0.05], (0.0, 1.0)),
                ],
                chart: Chart::cube(3, 0.0, 1.0).expect("valid box"),
            }),
            FormKind::TwoDElliptic => FormParams::TwoDElliptic {
                lambda: poly(vec![2.0, 1.0, 1.0 / 3.0], (-1.0, 1.0)),
                chart: sq(0.5, 2),
            },
            FormKind::TwoDPolarPlus => FormParams::TwoDPolarPlus {
                f: poly(vec![1.0, 1.0], (0.0, 1.0)),
                lambda1: 1.0,
                chart: sq(0.5, 2),
            },
            FormKind::TwoDPolarMinus => FormParams::TwoDPolarMinus {
                f: poly(vec![1.0, 1.0], (0.0, 1.0)),
                lambda2: 1.5,
                chart: sq(0.4, 2),
            },
            FormKind::ThreeDAxial => FormParams::ThreeDAxial {
                f: poly(vec![1.0, 1.0], (0.0, 1.0)),
                lambda1: poly(vec![0.25, 0.25], (-1.0, 1.0)),
                chart: sq(0.4, 3),
            },
            FormKind::ThreeDFull => FormParams::ThreeDFull {
                lambda: poly(vec![2.0, 1.0, 0.2], (-1.0, 1.0)),
                c: 4.0,
                chart: sq(0.4, 3),
            },
        }
    }
}

fn pair_from<T: Components + 'static>(chart: &Chart, g: T, gb: T, tag: &str) -> Result<MetricPair> {
    let fg = MetricField::from_components(chart.clone(), g, format!("{tag}:g"))?;
    let fb = MetricField::from_components(chart.clone(), gb, format!("{tag}:gbar"))?;
    MetricPair::new(fg, fb, tag)
}

fn assemble(params: &FormParams, chart: &Chart) -> Result<MetricPair> {
    let tag = params.kind().name();
    match params {
        FormParams::LcNd(d) => levi_civita_pair(&LeviCivitaData { lambdas: d.lambdas.clone(), chart: chart.clone() }),
        FormParams::TwoDElliptic { lambda, .. } => {
            let polys = BifurcationPolys::new(lambda);
            pair_from(chart, Elliptic { polys: polys.clone(), bar: false }, Elliptic { polys, bar: true }, tag)
        }
        FormParams::TwoDPolarPlus { f, lambda1, .. } => pair_from(
            chart,
            Polar { f: f.clone(), c: *lambda1, sign: 1.0, bar: false },
            Polar { f: f.clone(), c: *lambda1, sign: 1.0, bar: true },
            tag,
        ),
        FormParams::TwoDPolarMinus { f, lambda2, .. } => pair_from(
            chart,
            Polar { f: f.clone(), c: *lambda2, sign: -1.0, bar: false },
            Polar { f: f.clone(), c: *lambda2, sign: -1.0, bar: true },
            tag,
        ),
        FormParams::ThreeDAxial { f, lambda1, .. } => pair_from(
            chart,
            Axial { f: f.clone(), lambda1: lambda1.clone(), bar: false },
            Axial { f: f.clone(), lambda1: lambda1.clone(), bar: true },
            tag,
        ),
        FormParams::ThreeDFull { lambda, c, .. } => {
            pair_from(chart, Full::new(lambda, *c, false), Full::new(lambda, *c, true), tag)
        }
    }
}

fn check_params(params: &FormParams) -> Result<()> {
    let need_dim = |d: usize| -> Result<()> {
        if params.chart().dim() != d {
            return Err(GeqError::DimensionMismatch { expected: d, got: params.chart().dim() });
        }
        Ok(())
    };
    match params {
        FormParams::LcNd(d) => d.validate(),
        FormParams::TwoDElliptic { lambda, .. } => {
            need_dim(2)?;
            positive_slope(lambda)
        }
        FormParams::TwoDPolarPlus { lambda1: c, .. } | FormParams::TwoDPolarMinus { lambda2: c, .. } => {
            need_dim(2)?;
            if !(*c > 0.0) {
                return Err(GeqError::NotPositive(format!("constant eigenvalue {c}")));
            }
            Ok(())
        }
        FormParams::ThreeDAxial { .. } => need_dim(3),
        FormParams::ThreeDFull { lambda, c, .. } => {
            need_dim(3)?;
            if !(*c > 0.0) {
                return Err(GeqError::NotPositive(format!("constant C = {c}")));
            }
            positive_slope(lambda)
        }
    }
}

fn positive_slope(lambda: &ScalarFunction1D) -> Result<()> {
    let d = lambda.derivative().eval(0.0);
    if !(d > 0.0) {
        return Err(GeqError::InvalidInput(format!("lambda'(0) must be positive, got {d}")));
    }
    if !(lambda.eval(0.0) > 0.0) {
        return Err(GeqError::NotPositive(format!("lambda(0) = {}", lambda.eval(0.0))));
    }
    Ok(())
}

/// Grid used for positivity checks: 64 per axis, capped at 1e5 points.
pub fn positivity_grid(chart: &Chart) -> Vec<Vec<f64>> {
    let n = chart.dim() as u32;
    let mut per = 64usize;
    while per > 2 && per.pow(n) > MAX_POSITIVITY_SAMPLES {
        per -= 1;
    }
    chart.grid(per)
}

/// Pointwise side conditions of each family that positivity alone does not catch.
fn admissible(params: &FormParams, x: &[f64]) -> bool {
    let r2 = x.iter().skip(usize::from(params.kind() == FormKind::ThreeDAxial)).map(|v| v * v).sum::<f64>();
    match params {
        FormParams::LcNd(_) | FormParams::TwoDElliptic { .. } | FormParams::ThreeDFull { .. } => true,
        FormParams::TwoDPolarPlus { f, .. } => f.eval(r2) > 0.0,
        FormParams::TwoDPolarMinus { f, .. } => f.eval(r2) > 0.0 && 1.0 - r2 * f.eval(r2) > 0.0,
        FormParams::ThreeDAxial { f, lambda1, .. } => f.eval(r2) > 0.0 && lambda1.eval(x[0]) < 1.0,
    }
}

fn positive_on(field: &MetricField, pts: &[Vec<f64>]) -> bool {
    let n = field.dim();
    pts.iter().all(|x| {
        let m = field.raw(x);
        m.iter().all(|v| v.is_finite()) && dense::to_dmatrix(&m, n).cholesky().is_some()
    })
}

/// Builds the pair for `params`, halving the box (about its center) up to
/// six times until both metrics are positive definite on a dense sample.
pub fn model_form_pair(params: &FormParams) -> Result<MetricPair> {
    check_params(params)?;
    if let FormParams::LcNd(d) = params {
        return levi_civita_pair(d);
    }
    let mut chart = params.chart().clone();
    for _ in 0..=MAX_SHRINKS {
        let pair = assemble(params, &chart)?;
        let pts = positivity_grid(&chart);
        if pts.iter().all(|x| admissible(params, x)) && positive_on(&pair.g, &pts) && positive_on(&pair.gbar, &pts)
        {
            return Ok(pair);
        }
        chart = chart.shrink(0.5);
    }
    Err(GeqError::NotRealizable(format!("{} on {:?}", params.kind().name(), params.chart())))
}

/// Closed-form eigenvalues of `L` at `x`, sorted ascending.
pub fn model_eigenvalues(params: &FormParams, x: &[f64]) -> Result<Vec<f64>> {
    params.chart().check(x)?;
    let mut ev = match params {
        FormParams::LcNd(d) => d.eigenvalues_at(x),
        FormParams::TwoDElliptic { lambda, .. } => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            vec![lambda.eval(x[0] - r), lambda.eval(x[0] + r)]
        }
        FormParams::TwoDPolarPlus { f, lambda1, .. } => {
            let r2 = x[0] * x[0] + x[1] * x[1];
            vec![*lambda1, lambda1 + lambda1 * r2 * f.eval(r2)]
        }
        FormParams::TwoDPolarMinus { f, lambda2, .. } => {
            let r2 = x[0] * x[0] + x[1] * x[1];
            vec![lambda2 - lambda2 * r2 * f.eval(r2), *lambda2]
        }
        FormParams::ThreeDAxial { f, lambda1, .. } => {
            let r2 = x[1] * x[1] + x[2] * x[2];
            vec![lambda1.eval(x[0]), 1.0, 1.0 + r2 * f.eval(r2)]
        }
        FormParams::ThreeDFull { lambda, .. } => {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            vec![lambda.eval(x[0] - r), lambda.eval(0.0), lambda.eval(x[0] + r)]
        }
    };
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Largest `a` such that `[-a, a]^n` fits in the chart.
fn half_width(chart: &Chart) -> f64 {
    chart.lo.iter().zip(&chart.hi).map(|(l, h)| (-l).min(*h)).fold(f64::INFINITY, f64::min)
}

/// Elliptic coordinates `(x1, x2)` with `x1^2 = r - u`, `x2^2 = r + u`:
/// `(u, v) = ((x2^2 - x1^2)/2, x1 x2)`.
pub fn elliptic_map(domain: Chart) -> FnMap {
    FnMap::new(domain, 2, |x| vec![0.5 * (x[1] * x[1] - x[0] * x[0]), x[0] * x[1]])
        .with_jacobian(|x| vec![-x[0], x[1], x[1], x[0]])
}

/// Inverse of [`elliptic_map`] on the branch `x2 >= 0`, `sign(x1) = sign(v)`.
pub fn elliptic_inverse(u: f64, v: f64) -> [f64; 2] {
    let r = (u * u + v * v).sqrt();
    let x1 = (r - u).max(0.0).sqrt();
    [if v < 0.0 { -x1 } else { x1 }, (r + u).max(0.0).sqrt()]
}

/// `(u, v) = (e^r cos phi, e^r sin phi)`.
pub fn log_polar_map(domain: Chart) -> FnMap {
    FnMap::new(domain, 2, |x| {
        let e = x[0].exp();
        vec![e * x[1].cos(), e * x[1].sin()]
    })
    .with_jacobian(|x| {
        let (e, c, s) = (x[0].exp(), x[1].cos(), x[1].sin());
        vec![e * c, -e * s, e * s, e * c]
    })
}

/// Cylindrical-elliptic coordinates `x = (r - u1, sqrt(C) phi, r + u1)` where
/// `phi` is the angle of `(u2, u3)`. The map goes from `x` back to `u`:
/// `u1 = (x3 - x1)/2`, `R = sqrt(x1 x3)`, `(u2, u3) = R (cos phi, sin phi)`.
pub fn cylindrical_elliptic_map(domain: Chart, c: f64) -> FnMap {
    let sc = c.sqrt();
    FnMap::new(domain, 3, move |x| {
        let r = (x[0] * x[2]).sqrt();
        let phi = x[1] / sc;
        vec![0.5 * (x[2] - x[0]), r * phi.cos(), r * phi.sin()]
    })
    .with_jacobian(move |x| {
        let r = (x[0] * x[2]).sqrt();
        let phi = x[1] / sc;
        let (cp, sp) = (phi.cos(), phi.sin());
        let (dr1, dr3) = (x[2] / (2.0 * r), x[0] / (2.0 * r));
        vec![-0.5, 0.0, 0.5, cp * dr1, -r * sp / sc, cp * dr3, sp * dr1, r * cp / sc, sp * dr3]
    })
}

/// `x = (r - u1, sqrt(C) arccos(u2 / R), r + u1)` with `R = |(u2, u3)|`.
pub fn cylindrical_elliptic_inverse(u: &[f64], c: f64) -> [f64; 3] {
    let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rr = (u[1] * u[1] + u[2] * u[2]).sqrt();
    [r - u[0], c.sqrt() * (u[1] / rr).clamp(-1.0, 1.0).acos(), r + u[0]]
}

/// The natural singular coordinate map of a bifurcation family, on a domain
/// that keeps `r >= 0.05` and lands inside the model chart.
pub fn canonical_chart_map(params: &FormParams) -> Result<Arc<dyn ChartMap>> {
    let a = half_width(params.chart());
    if !(a > SINGULAR_RADIUS) {
        return Err(GeqError::InvalidInput("model chart must contain a box around the origin".into()));
    }
    match params {
        FormParams::LcNd(_) => Err(GeqError::InvalidInput("the Levi-Civita model has no singular chart".into())),
        FormParams::TwoDElliptic { .. } => {
            // r = (x1^2 + x2^2)/2 >= 0.224^2 > 0.05
            let lo = 0.224;
            let hi = 0.98 * a.sqrt();
            Ok(Arc::new(elliptic_map(Chart::cube(2, lo, hi.max(lo + 1e-3))?)))
        }
        FormParams::TwoDPolarPlus { .. } | FormParams::TwoDPolarMinus { .. } => Ok(Arc::new(log_polar_map(
            Chart::new(vec![SINGULAR_RADIUS.ln(), -3.0], vec![(0.98 * a).ln(), 3.0])?,
        ))),
        FormParams::ThreeDAxial { .. } => {
            Err(GeqError::InvalidInput("the axial family is already in its natural coordinates".into()))
        }
        FormParams::ThreeDFull { c, .. } => {
            let sc = c.sqrt();
            let dom = Chart::new(vec![SINGULAR_RADIUS, 0.1 * sc, SINGULAR_RADIUS], vec![0.6 * a, 3.0 * sc, 0.6 * a])?;
            Ok(Arc::new(cylindrical_elliptic_map(dom, *c)))
        }
    }
}

/// Largest `|model_eigenvalues - l_eigen|` over `points`.
pub fn model_eigenvalue_error(params: &FormParams, pair: &MetricPair, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let a = model_eigenvalues(params, x)?;
        let b = crate::projective::l_eigen(pair, x)?.values;
        for (u, v) in a.iter().zip(&b) {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(worst)
}

/// Points of a `per_axis` grid on the model chart at distance at least
/// `SINGULAR_RADIUS` from the family's bifurcation locus (the origin, or the
/// `x1` axis for the axial family).
pub fn sample_points(params: &FormParams, per_axis: usize) -> Vec<Vec<f64>> {
    let dist = |x: &Vec<f64>| match params.kind() {
        FormKind::LcNd => f64::INFINITY,
        FormKind::ThreeDAxial => x[1].hypot(x[2]),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    params.chart().grid(per_axis).into_iter().filter(|x| dist(x) >= SINGULAR_RADIUS).collect()
}

/// Expected `(g, gbar)` diagonals after pulling back through the canonical
/// chart map, at a point `x` of the map's domain.
fn canonical_diagonals(params: &FormParams, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    match params {
        FormParams::TwoDElliptic { lambda, .. } => {
            let (l1, l2) = (lambda.eval(-x[0] * x[0]), lambda.eval(x[1] * x[1]));
            let (k, kb) = (4.0 * (l2 - l1), 4.0 * (1.0 / l1 - 1.0 / l2));
            Some((vec![k, k], vec![kb / l1, kb / l2]))
        }
        FormParams::TwoDPolarPlus { f, lambda1: c, .. } => {
            let r2 = (2.0 * x[0]).exp();
            let fv = f.eval(r2);
            let lb = c * (1.0 + r2 * fv);
            let k = (1.0 / c - 1.0 / lb) / c;
            Some((vec![r2 * fv; 2], vec![k / lb, k / c]))
        }
        FormParams::TwoDPolarMinus { f, lambda2: c, .. } => {
            let r2 = (2.0 * x[0]).exp();
            let fv = f.eval(r2);
            let la = c * (1.0 - r2 * fv);
            let k = (1.0 / la - 1.0 / c) / c;
            Some((vec![r2 * fv; 2], vec![k / la, k / c]))
        }
        FormParams::ThreeDFull { lambda, .. } => {
            let lam = [lambda.eval(-x[0]), lambda.eval(0.0), lambda.eval(x[2])];
            let prod = lam[0] * lam[1] * lam[2];
            let g = vec![(lam[2] - lam[0]) / x[0], (lam[1] - lam[0]) * (lam[2] - lam[1]), (lam[2] - lam[0]) / x[2]];
            let gb = (0..3).map(|i| g[i] / (lam[i] * prod)).collect();
            Some((g, gb))
        }
        _ => None,
    }
}

/// Largest relative deviation of the pulled-back pair from its expected
/// diagonal (Levi-Civita block) form on a `per_axis` grid of the canonical
/// chart map's domain. Off-diagonal entries are measured against the larger
/// of the two corresponding diagonal entries.
pub fn canonical_form_error(params: &FormParams, per_axis: usize) -> Result<f64> {
    let pair = model_form_pair(params)?;
    let map = canonical_chart_map(&params.with_chart(pair.chart().clone()))?;
    let g = crate::charts::pushforward_metric(map.clone(), &pair.g)?;
    let gb = crate::charts::pushforward_metric(map.clone(), &pair.gbar)?;
    let n = pair.dim();
    let mut worst = 0.0f64;
    for x in map.domain().grid(per_axis) {
        let (dg, dgb) = canonical_diagonals(params, &x)
            .ok_or_else(|| GeqError::InvalidInput(format!("{} has no canonical form", params.kind().name())))?;
        for (m, d) in [(g.raw(&x), dg), (gb.raw(&x), dgb)] {
            for i in 0..n {
                for j in 0..n {
                    let err = if i == j {
                        (m[i * n + i] - d[i]).abs() / d[i].abs()
                    } else {
                        m[i * n + j].abs() / d[i].abs().max(d[j].abs())
                    };
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
