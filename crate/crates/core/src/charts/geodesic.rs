//! Geodesic ODE integration: Dormand–Prince 5(4) with a fixed-step RK4
//! alternative. The system is autonomous, so stage times are not needed.

use serde::{Deserialize, Serialize};

use super::{MetricField, PhasePoint};
use crate::error::{GeqError, Result};

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stepper {
    Adaptive,
    /// Classical RK4 with the given step (shortened to divide T evenly).
    Fixed { h: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperStats {
    pub accepted: usize,
    pub rejected: usize,
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    /// Integration stopped at the chart boundary; samples hold the partial path.
    LeftChart,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhasePoint)>,
    pub stats: StepperStats,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn start(&self) -> &PhasePoint {
        &self.samples[0].1
    }
    pub fn end(&self) -> &PhasePoint {
        &self.samples[self.samples.len() - 1].1
    }
    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th and embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `y' = (v, -Gamma(v, v))`; `Ok(None)` when `x` is outside the box.
fn rhs(field: &MetricField, y: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = field.dim();
    let x = &y[..n];
    if y.iter().any(|v| !v.is_finite()) || !field.chart.contains(x) {
        return Ok(None);
    }
    let gam = field.christoffel_unchecked(x)?;
    let acc = gam.contract(&y[n..]);
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(&y[n..]);
    out.extend(acc.into_iter().map(|a| -a));
    Ok(Some(out))
}

fn validate(field: &MetricField, start: &PhasePoint, t_end: f64, tol: f64) -> Result<()> {
    field.chart.check(&start.x)?;
    if start.v.len() != field.dim() {
        return Err(GeqError::DimensionMismatch { expected: field.dim(), got: start.v.len() });
    }
    if start.v.iter().any(|v| !v.is_finite()) || start.v.iter().all(|v| *v == 0.0) {
        return Err(GeqError::InvalidInput("start velocity must be finite and nonzero".into()));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(GeqError::InvalidInput(format!("duration must be positive, got {t_end}")));
    }
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(GeqError::InvalidInput(format!("tolerance {tol:e} outside [1e-13, 1e-3]")));
    }
    Ok(())
}

fn split(y: &[f64], n: usize) -> PhasePoint {
    PhasePoint { x: y[..n].to_vec(), v: y[n..].to_vec() }
}

/// Adaptive geodesic integration of `field` from `start` over `[0, t_end]`.
pub fn integrate_geodesic(field: &MetricField, start: &PhasePoint, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_geodesic_with(field, start, t_end, tol, Stepper::Adaptive)
}

pub fn integrate_geodesic_with(
    field: &MetricField,
    start: &PhasePoint,
    t_end: f64,
    tol: f64,
    stepper: Stepper,
) -> Result<Trajectory> {
    validate(field, start, t_end, tol)?;
    match stepper {
        Stepper::Adaptive => dopri(field, start, t_end, tol),
        Stepper::Fixed { h } => {
            if !(h > 0.0) {
                return Err(GeqError::InvalidInput(format!("fixed step must be positive, got {h}")));
            }
            rk4(field, start, t_end, tol, h)
        }
    }
}

fn dopri(field: &MetricField, start: &PhasePoint, t_end: f64, tol: f64) -> Result<Trajectory> {
    let n = field.dim();
    let m = 2 * n;
    let mut y: Vec<f64> = start.x.iter().chain(&start.v).copied().collect();
    let mut t = 0.0;
    let mut samples = vec![(0.0, start.clone())];
    let mut stats = StepperStats { accepted: 0, rejected: 0, tol };
    let vnorm = start.v.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = (0.01 * t_end).min(0.1 / vnorm.max(1e-300));
    let h_box_min = 1e-9 * t_end;
    let h_err_min = 1e-14 * t_end;
    let mut k1 = rhs(field, &y)?.ok_or_else(|| GeqError::OutOfChart { point: start.x.clone() })?;
    let mut status = TrajectoryStatus::Completed;

    while t < t_end {
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        let mut left = false;
        let mut ynew = vec![0.0; m];
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in ks.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..m {
                        ys[i] += h_try * a * kj[i];
                    }
                }
            }
            match rhs(field, &ys)? {
                Some(k) => ks.push(k),
                None => {
                    left = true;
                    break;
                }
            }
            if s == 6 {
                ynew = ys;
            }
        }
        if left {
            stats.rejected += 1;
            h = 0.5 * h_try;
            if h < h_box_min {
                status = TrajectoryStatus::LeftChart;
                break;
            }
            continue;
        }
        // FSAL: the last stage is the derivative at the 5th-order solution
        let mut sq = 0.0;
        for i in 0..m {
            let e: f64 = (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>() * h_try;
            let sc = tol + tol * y[i].abs().max(ynew[i].abs());
            sq += (e / sc) * (e / sc);
        }
        let err = (sq / m as f64).sqrt();
        if err <= 1.0 {
            t = if last { t_end } else { t + h_try };
            y = ynew;
            k1 = ks.pop().expect("seven stages");
            stats.accepted += 1;
            samples.push((t, split(&y, n)));
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_try * fac;
        } else {
            stats.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            if h < h_err_min {
                return Err(GeqError::StepFailure { time: t });
            }
        }
    }
    Ok(Trajectory { samples, stats, status })
}

fn rk4(field: &MetricField, start: &PhasePoint, t_end: f64, tol: f64, h_req: f64) -> Result<Trajectory> {
    let n = field.dim();
    let m = 2 * n;
    let steps = (t_end / h_req).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut y: Vec<f64> = start.x.iter().chain(&start.v).copied().collect();
    let mut samples = vec![(0.0, start.clone())];
    let mut stats = StepperStats { accepted: 0, rejected: 0, tol };
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { (0..m).map(|i| y[i] + a * k[i]).collect() };
    for step in 1..=steps {
        let stage = |yy: &[f64]| rhs(field, yy);
        let k1 = stage(&y)?;
        let k2 = match &k1 { Some(k) => stage(&axpy(&y, k, 0.5 * h))?, None => None };
        let k3 = match &k2 { Some(k) => stage(&axpy(&y, k, 0.5 * h))?, None => None };
        let k4 = match &k3 { Some(k) => stage(&axpy(&y, k, h))?, None => None };
        let (Some(k1), Some(k2), Some(k3), Some(k4)) = (k1, k2, k3, k4) else {
            return Ok(Trajectory { samples, stats, status: TrajectoryStatus::LeftChart });
        };
        let ynew: Vec<f64> =
            (0..m).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        if !field.chart.contains(&ynew[..n]) {
            return Ok(Trajectory { samples, stats, status: TrajectoryStatus::LeftChart });
        }
        y = ynew;
        stats.accepted += 1;
        let t = if step == steps { t_end } else { step as f64 * h };
        samples.push((t, split(&y, n)));
    }
    Ok(Trajectory { samples, stats, status: TrajectoryStatus::Completed })
}
