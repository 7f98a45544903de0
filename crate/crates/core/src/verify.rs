//! Numerical tests of projective equivalence and integrability: the
//! tangential defect of `gbar`-geodesic residuals along `g`-geodesics, drift
//! of the integrals `I_t` and their roots, and interlacing scans.
//!
//! Every check draws its random starts from a `ChaCha8` stream per trajectory
//! index, and results are collected in index order, so reports are
//! bit-identical for a given seed regardless of the thread count.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{
    integrate_geodesic_with, quad, Chart, Components, ConstantMetric, MetricField, MetricPair, PhasePoint, Stepper,
    Trajectory, TrajectoryStatus,
};
use crate::dense;
use crate::error::{GeqError, Result};
use crate::projective::{
    eval_poly, f_integral_2d, i_t_coeffs, integral_roots, l_eigen, nijenhuis_at, CLUSTER_RADIUS,
};
use crate::scalar::Scalar;
use crate::split_glue::eigen_ranges;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GEQ_THREADS";
/// Fraction of each chart axis (about its center) used for random starts.
pub const START_FRACTION: f64 = 0.6;
/// Default pass thresholds.
pub const DEFAULT_EQUIVALENCE_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_INTERLACING_EPS: f64 = 1e-9;
/// Number of `t` values at which `I_t` is monitored.
pub const N_T_VALUES: usize = 5;

/// Runs `f` on a pool limited by `GEQ_THREADS` when that is set.
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Start `index` of a seeded batch: a point uniform in the middle 60% of the
/// chart and a `g`-unit velocity uniform on the unit sphere.
pub fn seeded_start(field: &MetricField, seed: u64, index: usize) -> Result<PhasePoint> {
    let mut rng = rng_for(seed, index);
    let chart = &field.chart;
    let c = chart.center();
    let x: Vec<f64> =
        (0..chart.dim()).map(|k| c[k] + (rng.random::<f64>() - 0.5) * START_FRACTION * chart.width(k)).collect();
    let v = random_unit_vector(field, &x, &mut rng)?;
    Ok(PhasePoint::new(x, v))
}

fn random_unit_vector(field: &MetricField, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = field.dim();
    let g = field.metric_at(x)?;
    let chol = g.cholesky().ok_or_else(|| GeqError::NotPositiveDefinite { point: x.to_vec(), min_eig: f64::NAN })?;
    let lt = chol.l().transpose();
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let zv = nalgebra::DVector::from_vec(z.into_iter().map(|v| v / norm).collect());
    // v = L^{-T} z so that v^T L L^T v = |z|^2 = 1
    let v = lt.solve_upper_triangular(&zv).ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })?;
    Ok(v.iter().copied().collect())
}

/// Integration settings shared by the trajectory-based checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub n_traj: usize,
    pub t_end: f64,
    pub tol: f64,
    pub seed: u64,
    pub stepper: Stepper,
}

impl RunSettings {
    pub fn new(n_traj: usize, t_end: f64, tol: f64, seed: u64) -> Self {
        Self { n_traj, t_end, tol, seed, stepper: Stepper::Adaptive }
    }

    fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(GeqError::InvalidInput("at least one trajectory is required".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(GeqError::InvalidInput(format!("integration time must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

fn trajectories(field: &MetricField, s: &RunSettings) -> Result<Vec<Trajectory>> {
    s.validate()?;
    with_pool(|| {
        (0..s.n_traj)
            .into_par_iter()
            .map(|i| {
                let start = seeded_start(field, s.seed, i)?;
                integrate_geodesic_with(field, &start, s.t_end, s.tol, s.stepper)
            })
            .collect()
    })
}

/// `|w_perp|_gbar / gbar(v, v)` with `w = (Gbar - G)(v, v)` and `w_perp` its
/// `gbar`-orthogonal part relative to `v`.
pub fn tangential_defect(pair: &MetricPair, p: &PhasePoint) -> Result<f64> {
    let a = pair.g.christoffel_at(&p.x)?;
    let b = pair.gbar.christoffel_at(&p.x)?;
    let w: Vec<f64> = b.contract(&p.v).iter().zip(a.contract(&p.v)).map(|(x, y)| x - y).collect();
    let gb = pair.gbar.raw(&p.x);
    let vv = quad(&gb, &p.v, &p.v);
    let c = quad(&gb, &w, &p.v) / vv;
    let perp: Vec<f64> = w.iter().zip(&p.v).map(|(wi, vi)| wi - c * vi).collect();
    Ok(quad(&gb, &perp, &perp).max(0.0).sqrt() / vv)
}

/// Log-decade histogram edges: bin 0 is `< 1e-16`, bin `k` is
/// `[1e-17+k, 1e-16+k)`, the last bin is `>= 1`.
pub const HISTOGRAM_BINS: usize = 18;

fn bin_of(d: f64) -> usize {
    if !(d >= 1e-16) {
        return 0;
    }
    ((d.log10() + 16.0).floor() as usize + 1).min(HISTOGRAM_BINS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trajectories: usize,
    /// Trajectories that reached the chart boundary before `T`.
    pub truncated: usize,
    pub samples: usize,
    pub max_tangential_defect: f64,
    pub defect_histogram: Vec<u64>,
    /// Largest defect per trajectory, in index order.
    pub per_trajectory: Vec<f64>,
    pub integrator_tol: f64,
    pub seed: u64,
}

impl EquivalenceReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_tangential_defect < threshold
    }
}

pub fn check_equivalence(pair: &MetricPair, n_traj: usize, t_end: f64, tol: f64, seed: u64) -> Result<EquivalenceReport> {
    check_equivalence_with(pair, &RunSettings::new(n_traj, t_end, tol, seed))
}

pub fn check_equivalence_with(pair: &MetricPair, s: &RunSettings) -> Result<EquivalenceReport> {
    let trajs = trajectories(&pair.g, s)?;
    let per: Vec<Vec<f64>> = with_pool(|| {
        trajs
            .par_iter()
            .map(|t| t.samples.iter().map(|(_, p)| tangential_defect(pair, p)).collect::<Result<Vec<f64>>>())
            .collect::<Result<Vec<_>>>()
    })?;
    let mut hist = vec![0u64; HISTOGRAM_BINS];
    let mut per_trajectory = Vec::with_capacity(per.len());
    let mut samples = 0;
    for d in &per {
        samples += d.len();
        d.iter().for_each(|&v| hist[bin_of(v)] += 1);
        per_trajectory.push(d.iter().copied().fold(0.0, f64::max));
    }
    Ok(EquivalenceReport {
        trajectories: trajs.len(),
        truncated: trajs.iter().filter(|t| t.status == TrajectoryStatus::LeftChart).count(),
        samples,
        max_tangential_defect: per_trajectory.iter().copied().fold(0.0, f64::max),
        defect_histogram: hist,
        per_trajectory,
        integrator_tol: s.tol,
        seed: s.seed,
    })
}

/// One monitored quantity along one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub index: usize,
    /// `I_t<k>` (the `k`-th entry of `t_values`), `root<i>` or `F`.
    pub quantity: String,
    pub start_value: f64,
    pub end_value: f64,
    /// Largest relative deviation from the start value along the trajectory.
    pub rel_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub trajectories: usize,
    pub truncated: usize,
    pub t_values: Vec<f64>,
    /// Per `t` value, the largest drift over all trajectories.
    pub i_t_drift: Vec<f64>,
    /// Per root index, the largest drift over all trajectories.
    pub root_drift: Vec<f64>,
    pub f_drift: Option<f64>,
    pub max_drift: f64,
    pub integrator_tol: f64,
    pub seed: u64,
    pub rows: Vec<DriftRow>,
}

impl ConservationReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_drift < threshold
    }
}

/// `N_T_VALUES` equally spaced values spanning `[inf lambda_1 - 1, sup lambda_n + 1]`.
pub fn t_values(pair: &MetricPair) -> Result<Vec<f64>> {
    let r = eigen_ranges(pair)?;
    let (lo, hi) = (r[0].0 - 1.0, r[r.len() - 1].1 + 1.0);
    Ok((0..N_T_VALUES).map(|k| lo + (hi - lo) * k as f64 / (N_T_VALUES - 1) as f64).collect())
}

/// Size of `I_t` used to normalize its drift: `sum_k |c_k| |t|^k`.
fn i_t_scale(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c.abs() * t.abs().powi(k as i32)).sum::<f64>().max(1e-300)
}

pub fn check_conservation(pair: &MetricPair, n_traj: usize, t_end: f64, tol: f64, seed: u64) -> Result<ConservationReport> {
    check_conservation_with(pair, &RunSettings::new(n_traj, t_end, tol, seed))
}

pub fn check_conservation_with(pair: &MetricPair, s: &RunSettings) -> Result<ConservationReport> {
    let n = pair.dim();
    let ts = t_values(pair)?;
    let trajs = trajectories(&pair.g, s)?;
    let rows: Vec<Vec<DriftRow>> = with_pool(|| {
        trajs.par_iter().enumerate().map(|(i, t)| drift_rows(pair, &ts, i, t)).collect::<Result<Vec<_>>>()
    })?;
    let mut i_t_drift = vec![0.0f64; ts.len()];
    let mut root_drift = vec![0.0f64; n.saturating_sub(1)];
    let mut f_drift = (n == 2).then_some(0.0f64);
    for r in rows.iter().flatten() {
        if let Some(k) = r.quantity.strip_prefix("root") {
            let k: usize = k.parse().expect("root index");
            root_drift[k] = root_drift[k].max(r.rel_drift);
        } else if let Some(k) = r.quantity.strip_prefix("I_t") {
            let k: usize = k.parse().expect("t index");
            i_t_drift[k] = i_t_drift[k].max(r.rel_drift);
        } else {
            f_drift = f_drift.map(|f| f.max(r.rel_drift));
        }
    }
    let max_drift =
        i_t_drift.iter().chain(&root_drift).chain(f_drift.as_ref()).copied().fold(0.0, f64::max);
    Ok(ConservationReport {
        trajectories: trajs.len(),
        truncated: trajs.iter().filter(|t| t.status == TrajectoryStatus::LeftChart).count(),
        t_values: ts,
        i_t_drift,
        root_drift,
        f_drift,
        max_drift,
        integrator_tol: s.tol,
        seed: s.seed,
        rows: rows.into_iter().flatten().collect(),
    })
}

fn drift_rows(pair: &MetricPair, ts: &[f64], index: usize, traj: &Trajectory) -> Result<Vec<DriftRow>> {
    let n = pair.dim();
    let start = traj.start();
    let c0 = i_t_coeffs(pair, start)?;
    let r0 = integral_roots(pair, start)?.roots;
    let f0 = if n == 2 { Some(f_integral_2d(pair, start)?) } else { None };
    let mut it_max = vec![0.0f64; ts.len()];
    let mut root_max = vec![0.0f64; r0.len()];
    let mut f_max = 0.0f64;
    let mut last = (c0.clone(), r0.clone(), f0);
    for (_, p) in &traj.samples {
        let c = i_t_coeffs(pair, p)?;
        for (k, &t) in ts.iter().enumerate() {
            let d = (eval_poly(&c, t) - eval_poly(&c0, t)).abs() / i_t_scale(&c0, t);
            it_max[k] = it_max[k].max(d);
        }
        let r = integral_roots(pair, p)?.roots;
        for (k, (a, b)) in r.iter().zip(&r0).enumerate() {
            root_max[k] = root_max[k].max((a - b).abs() / b.abs().max(1.0));
        }
        let f = match f0 {
            Some(f0) => {
                let f = f_integral_2d(pair, p)?;
                f_max = f_max.max((f - f0).abs() / f0.abs().max(1e-300));
                Some(f)
            }
            None => None,
        };
        last = (c, r, f);
    }
    let mut rows = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        rows.push(DriftRow {
            index,
            quantity: format!("I_t{k}"),
            start_value: eval_poly(&c0, t),
            end_value: eval_poly(&last.0, t),
            rel_drift: it_max[k],
        });
    }
    for k in 0..r0.len() {
        rows.push(DriftRow {
            index,
            quantity: format!("root{k}"),
            start_value: r0[k],
            end_value: last.1[k],
            rel_drift: root_max[k],
        });
    }
    if let (Some(a), Some(b)) = (f0, last.2) {
        rows.push(DriftRow { index, quantity: "F".into(), start_value: a, end_value: b, rel_drift: f_max });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub samples: usize,
    pub violations: usize,
    pub bracket_failures: usize,
    /// Largest amount by which a root leaves its bracket (0 when inside).
    pub max_excursion: f64,
    pub pinned: usize,
    /// Largest `|t_i - lambda_i|` over pinned roots.
    pub max_pinned_error: f64,
    pub eps: f64,
    pub seed: u64,
}

impl InterlacingReport {
    pub fn passes(&self) -> bool {
        self.violations == 0 && self.max_pinned_error <= self.eps
    }
}

/// Interlacing `lambda_i - eps <= t_i <= lambda_{i+1} + eps` at `n_points`
/// seeded points (uniform in the whole chart) with `n_vectors` velocities each.
pub fn check_interlacing(pair: &MetricPair, n_points: usize, n_vectors: usize, seed: u64) -> Result<InterlacingReport> {
    check_interlacing_eps(pair, n_points, n_vectors, seed, DEFAULT_INTERLACING_EPS)
}

pub fn check_interlacing_eps(
    pair: &MetricPair,
    n_points: usize,
    n_vectors: usize,
    seed: u64,
    eps: f64,
) -> Result<InterlacingReport> {
    let chart = pair.chart().clone();
    let results: Vec<Vec<Sample>> = with_pool(|| {
        (0..n_points)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i);
                let x: Vec<f64> = (0..chart.dim()).map(|k| chart.lo[k] + rng.random::<f64>() * chart.width(k)).collect();
                (0..n_vectors)
                    .map(|_| {
                        let v = random_unit_vector(&pair.g, &x, &mut rng)?;
                        interlacing_sample(pair, &PhasePoint::new(x.clone(), v), eps)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rep = InterlacingReport {
        samples: 0,
        violations: 0,
        bracket_failures: 0,
        max_excursion: 0.0,
        pinned: 0,
        max_pinned_error: 0.0,
        eps,
        seed,
    };
    for s in results.iter().flatten() {
        rep.samples += 1;
        rep.violations += usize::from(s.violated);
        rep.bracket_failures += usize::from(s.bracket_failure);
        rep.max_excursion = rep.max_excursion.max(s.excursion);
        rep.pinned += s.pinned;
        rep.max_pinned_error = rep.max_pinned_error.max(s.pinned_error);
    }
    Ok(rep)
}

struct Sample {
    violated: bool,
    bracket_failure: bool,
    excursion: f64,
    pinned: usize,
    pinned_error: f64,
}

fn interlacing_sample(pair: &MetricPair, p: &PhasePoint, eps: f64) -> Result<Sample> {
    let lam = l_eigen(pair, &p.x)?.values;
    let roots = match integral_roots(pair, p) {
        Ok(r) => r,
        Err(GeqError::BracketFailure { .. }) => {
            return Ok(Sample { violated: true, bracket_failure: true, excursion: f64::INFINITY, pinned: 0, pinned_error: 0.0 })
        }
        Err(e) => return Err(e),
    };
    let mut s = Sample { violated: false, bracket_failure: false, excursion: 0.0, pinned: 0, pinned_error: 0.0 };
    for (i, &t) in roots.roots.iter().enumerate() {
        let out = (lam[i] - t).max(t - lam[i + 1]).max(0.0);
        s.excursion = s.excursion.max(out);
        if out > eps {
            s.violated = true;
        }
        if lam[i + 1] - lam[i] <= CLUSTER_RADIUS {
            s.pinned += 1;
            s.pinned_error = s.pinned_error.max((t - lam[i]).abs()).max((t - lam[i + 1]).abs());
        }
    }
    Ok(s)
}

/// Largest `|t_i - lambda_i|` over clustered eigenvalue pairs at `x`, for
/// `n_vectors` seeded velocities; `None` when no eigenvalues cluster there.
pub fn pinned_root_error(pair: &MetricPair, x: &[f64], n_vectors: usize, seed: u64) -> Result<Option<f64>> {
    let mut rng = rng_for(seed, 0);
    let mut worst: Option<f64> = None;
    for _ in 0..n_vectors {
        let v = random_unit_vector(&pair.g, x, &mut rng)?;
        let s = interlacing_sample(pair, &PhasePoint::new(x.to_vec(), v), DEFAULT_INTERLACING_EPS)?;
        if s.pinned > 0 {
            worst = Some(worst.unwrap_or(0.0).max(s.pinned_error));
        }
    }
    Ok(worst)
}

/// Largest `|N^k_ij|` of `L` over the given points.
pub fn max_nijenhuis(pair: &MetricPair, points: &[Vec<f64>]) -> Result<f64> {
    with_pool(|| {
        points
            .par_iter()
            .map(|x| nijenhuis_at(pair, x).map(|t| t.max_abs()))
            .collect::<Result<Vec<f64>>>()
    })
    .map(|v| v.into_iter().fold(0.0, f64::max))
}

/// Conformal multiple `(1 + x_1^2) g` of a flat metric.
struct ConformalBump {
    n: usize,
}

impl Components for ConformalBump {
    fn dim(&self) -> usize {
        self.n
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let c = x[0] * x[0] + 1.0;
        let mut m = vec![S::zero(); self.n * self.n];
        for i in 0..self.n {
            m[i * self.n + i] = c;
        }
        Some(m)
    }
}

/// Flat `g` with `gbar = (1 + x_1^2) g` on `[-1, 1]^2`: not projectively equivalent.
pub fn non_equivalent_control() -> MetricPair {
    let chart = Chart::cube(2, -1.0, 1.0).expect("valid box");
    let g = MetricField::flat(chart.clone());
    let gb = MetricField::from_components(chart, ConformalBump { n: 2 }, "(1 + x1^2) * flat").expect("valid field");
    MetricPair::new(g, gb, "control:non-equivalent").expect("same chart")
}

/// `g = I`, `L = diag(x_2, x_1)` (so `gbar = L^{-1} / det L`) on
/// `[1, 2] x [2.5, 3.5]`; the Nijenhuis torsion of `L` is `N^1_12 = x_2 - x_1`.
struct TwistedOperator {
    bar: bool,
}

impl Components for TwistedOperator {
    fn dim(&self) -> usize {
        2
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        if !self.bar {
            return Some(dense::identity(2));
        }
        let d = x[0] * x[1];
        Some(vec![(x[1] * d).recip(), S::zero(), S::zero(), (x[0] * d).recip()])
    }
}

pub fn non_integrable_control() -> MetricPair {
    let chart = Chart::new(vec![1.0, 2.5], vec![2.0, 3.5]).expect("valid box");
    let g = MetricField::from_components(chart.clone(), TwistedOperator { bar: false }, "flat").expect("valid field");
    let gb = MetricField::from_components(chart, TwistedOperator { bar: true }, "L^-1/det L").expect("valid field");
    MetricPair::new(g, gb, "control:non-integrable").expect("same chart")
}

/// `(g, g)`.
pub fn identical_pair(g: &MetricField) -> MetricPair {
    MetricPair::new(g.clone(), g.clone(), format!("identical({})", g.provenance)).expect("same chart")
}

/// A constant metric as a field on `chart`.
pub fn constant_field(chart: Chart, m: Vec<f64>) -> Result<MetricField> {
    let n = chart.dim();
    if m.len() != n * n {
        return Err(GeqError::DimensionMismatch { expected: n * n, got: m.len() });
    }
    MetricField::new(chart, Arc::new(crate::charts::Smooth(ConstantMetric { n, m })), "constant")
}
