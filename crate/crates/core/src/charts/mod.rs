//! Coordinate charts, metric fields and their Christoffel symbols.

mod geodesic;
mod pushforward;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{GeqError, Result};
use crate::scalar::{seed, Dual, Scalar};

pub use geodesic::{
    integrate_geodesic, integrate_geodesic_with, Stepper, StepperStats, Trajectory, TrajectoryStatus,
};
pub use pushforward::{
    fd_jacobian, pushforward_metric, ChartMap, ComposedMap, FnMap, IdentityMap, PushforwardSource,
};

/// Relative step of the finite-difference stencils, per unit of box width.
pub const FD_REL_STEP: f64 = 1e-5;

/// An axis-aligned coordinate box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Chart {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(GeqError::InvalidInput("chart must have dim >= 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(GeqError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(GeqError::InvalidInput(format!("degenerate interval [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeqError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(GeqError::OutOfChart { point: x.to_vec() });
        }
        Ok(())
    }

    /// Box scaled by `factor` about its center.
    pub fn shrink(&self, factor: f64) -> Self {
        let c = self.center();
        let lo = (0..self.dim()).map(|k| c[k] - 0.5 * factor * self.width(k)).collect();
        let hi = (0..self.dim()).map(|k| c[k] + 0.5 * factor * self.width(k)).collect();
        Self { lo, hi }
    }

    /// Cartesian product `self x other`.
    pub fn product(&self, other: &Chart) -> Self {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        Self { lo, hi }
    }

    /// Sub-box on the given coordinate indices.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self {
            lo: idx.iter().map(|&i| self.lo[i]).collect(),
            hi: idx.iter().map(|&i| self.hi[i]).collect(),
        }
    }

    /// Regular grid with `per_axis` points per axis (endpoints included).
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let m = per_axis.max(2);
        let total = m.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|k| {
                        let i = idx % m;
                        idx /= m;
                        self.lo[k] + self.width(k) * i as f64 / (m - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// A chart-local symmetric matrix field, type-erased.
///
/// `eval` returns row-major `dim x dim` components. Sources that can run on
/// dual numbers override `eval_dual`, which unlocks exact partials.
pub trait MetricSource: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn eval_dual(&self, _x: &[Dual]) -> Option<Vec<Dual>> {
        None
    }
}

/// Closed-form component functions written once over any [`Scalar`].
pub trait Components: Send + Sync {
    fn dim(&self) -> usize;
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>>;
}

/// Adapter turning [`Components`] into a [`MetricSource`] with exact partials.
pub struct Smooth<T>(pub T);

impl<T: Components> MetricSource for Smooth<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.0
            .components(x)
            .unwrap_or_else(|| vec![f64::NAN; self.0.dim() * self.0.dim()])
    }
    fn eval_dual(&self, x: &[Dual]) -> Option<Vec<Dual>> {
        self.0.components(x)
    }
}

/// Constant matrix field.
#[derive(Clone, Debug)]
pub struct ConstantMetric {
    pub n: usize,
    pub m: Vec<f64>,
}

impl Components for ConstantMetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn components<S: Scalar>(&self, _x: &[S]) -> Option<Vec<S>> {
        Some(self.m.iter().map(|&v| S::cst(v)).collect())
    }
}

/// Constant multiple of another field.
pub struct Scaled {
    pub inner: Arc<dyn MetricSource>,
    pub factor: f64,
}

impl MetricSource for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.inner.eval(x).into_iter().map(|v| v * self.factor).collect()
    }
    fn eval_dual(&self, x: &[Dual]) -> Option<Vec<Dual>> {
        Some(self.inner.eval_dual(x)?.into_iter().map(|v| v * self.factor).collect())
    }
}

/// A metric on a chart: the `MetricField` of the library.
#[derive(Clone)]
pub struct MetricField {
    pub chart: Chart,
    pub source: Arc<dyn MetricSource>,
    pub provenance: String,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("chart", &self.chart)
            .field("provenance", &self.provenance)
            .finish()
    }
}

/// Christoffel symbols `gamma[k][i][j]`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// `Gamma^k_ij v^i v^j`.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * v[i] * v[j];
                    }
                }
                s
            })
            .collect()
    }
}

impl MetricField {
    pub fn new(chart: Chart, source: Arc<dyn MetricSource>, provenance: impl Into<String>) -> Result<Self> {
        if chart.dim() != source.dim() {
            return Err(GeqError::DimensionMismatch { expected: chart.dim(), got: source.dim() });
        }
        Ok(Self { chart, source, provenance: provenance.into() })
    }

    pub fn from_components<T: Components + 'static>(
        chart: Chart,
        c: T,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        Self::new(chart, Arc::new(Smooth(c)), provenance)
    }

    pub fn flat(chart: Chart) -> Self {
        let n = chart.dim();
        let m = dense::identity::<f64>(n);
        Self { chart, source: Arc::new(Smooth(ConstantMetric { n, m })), provenance: "flat".into() }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Same source on a different box.
    pub fn with_chart(&self, chart: Chart) -> Self {
        Self { chart, source: self.source.clone(), provenance: self.provenance.clone() }
    }

    pub fn has_analytic_partials(&self) -> bool {
        let x = self.chart.center();
        self.source.eval_dual(&seed(&x, 0)).is_some()
    }

    /// Symmetrized components without chart or definiteness checks.
    pub fn raw(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut m = self.source.eval(x);
        dense::symmetrize(&mut m, n);
        m
    }

    /// Metric matrix at `x`, symmetrized and checked positive definite.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check(x)?;
        let n = self.dim();
        let m = dense::to_dmatrix(&self.raw(x), n);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeqError::SingularMetric { point: x.to_vec() });
        }
        if m.clone().cholesky().is_none() {
            let min_eig = m.clone().symmetric_eigenvalues().min();
            return Err(GeqError::NotPositiveDefinite { point: x.to_vec(), min_eig });
        }
        Ok(m)
    }

    /// `(g(x), [d_k g(x)])` using dual numbers when available, otherwise
    /// central differences with a half-step consistency check.
    pub fn value_and_partials(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.dim();
        let mut value: Option<Vec<f64>> = None;
        let mut parts: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            match self.source.eval_dual(&seed(x, k)) {
                Some(d) => {
                    if value.is_none() {
                        value = Some(d.iter().map(|v| v.re).collect());
                    }
                    parts.push(d.iter().map(|v| v.eps).collect());
                }
                None => return (self.source.eval(x), self.fd_partials(x)),
            }
        }
        let mut value = value.unwrap_or_else(|| self.source.eval(x));
        dense::symmetrize(&mut value, n);
        for p in &mut parts {
            dense::symmetrize(p, n);
        }
        (value, parts)
    }

    /// Central-difference partials with Richardson fallback.
    pub fn fd_partials(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let h = FD_REL_STEP * self.chart.width(k);
                let d1 = self.central(x, k, h);
                let d2 = self.central(x, k, 0.5 * h);
                let scale = d2.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
                let gap = d1.iter().zip(&d2).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
                let mut d = if gap > 1e-4 * scale {
                    d1.iter().zip(&d2).map(|(p, q)| (4.0 * q - p) / 3.0).collect()
                } else {
                    d2
                };
                dense::symmetrize(&mut d, n);
                d
            })
            .collect()
    }

    fn central(&self, x: &[f64], k: usize, h: f64) -> Vec<f64> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let p = self.source.eval(&xp);
        let m = self.source.eval(&xm);
        p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }

    /// Christoffel symbols of the second kind at `x`.
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        self.chart.check(x)?;
        self.christoffel_unchecked(x)
    }

    pub(crate) fn christoffel_unchecked(&self, x: &[f64]) -> Result<Christoffel> {
        let (g, dg) = self.value_and_partials(x);
        christoffel_from(&g, &dg, self.dim()).ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })
    }

    /// Christoffel symbols from finite differences only (for cross-checks).
    pub fn christoffel_fd(&self, x: &[f64]) -> Result<Christoffel> {
        self.chart.check(x)?;
        let g = self.raw(x);
        let dg = self.fd_partials(x);
        christoffel_from(&g, &dg, self.dim()).ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })
    }

    /// `g(u, v)` at `x` (no checks).
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        quad(&self.raw(x), u, v)
    }
}

/// `u^T M v` for row-major `M`.
pub fn quad(m: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += u[i] * m[i * n + j] * v[j];
        }
    }
    s
}

pub(crate) fn christoffel_from(g: &[f64], dg: &[Vec<f64>], n: usize) -> Option<Christoffel> {
    let ginv = dense::inverse(g, n)?;
    if ginv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // first kind: c[l][i][j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    let mut first = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]);
                first[(l * n + i) * n + j] = v;
                first[(l * n + j) * n + i] = v;
            }
        }
    }
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[k * n + l] * first[(l * n + i) * n + j];
                }
                data[(k * n + i) * n + j] = s;
                data[(k * n + j) * n + i] = s;
            }
        }
    }
    Some(Christoffel { n, data })
}

/// A point of the tangent bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self { x, v }
    }
}

/// Two metrics on one chart, claimed projectively equivalent.
#[derive(Clone, Debug)]
pub struct MetricPair {
    pub g: MetricField,
    pub gbar: MetricField,
    pub provenance: String,
}

impl MetricPair {
    pub fn new(g: MetricField, gbar: MetricField, provenance: impl Into<String>) -> Result<Self> {
        if g.chart != gbar.chart {
            return Err(GeqError::InvalidInput("metric pair must share one chart".into()));
        }
        Ok(Self { g, gbar, provenance: provenance.into() })
    }

    pub fn chart(&self) -> &Chart {
        &self.g.chart
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn with_chart(&self, chart: Chart) -> Self {
        Self {
            g: self.g.with_chart(chart.clone()),
            gbar: self.gbar.with_chart(chart),
            provenance: self.provenance.clone(),
        }
    }

    /// Swaps the roles of the two metrics.
    pub fn swapped(&self) -> Self {
        Self { g: self.gbar.clone(), gbar: self.g.clone(), provenance: format!("swap({})", self.provenance) }
    }
}
