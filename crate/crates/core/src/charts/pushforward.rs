//! Expressing a metric in new coordinates through a chart map.

use std::sync::Arc;

use super::{Chart, MetricField, MetricSource, FD_REL_STEP};
use crate::dense;
use crate::error::{GeqError, Result};

/// A map from new coordinates (its `domain`) into the old chart.
pub trait ChartMap: Send + Sync {
    fn domain(&self) -> &Chart;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Row-major `dim_out x dim_in` Jacobian; analytic when overridden.
    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        fd_jacobian(self, x)
    }
}

/// Central-difference Jacobian with step `1e-5 x` domain width.
pub fn fd_jacobian<M: ChartMap + ?Sized>(map: &M, x: &[f64]) -> Vec<f64> {
    let dom = map.domain();
    let n = dom.dim();
    let m = map.dim_out();
    let mut jac = vec![0.0; m * n];
    for k in 0..n {
        let h = FD_REL_STEP * dom.width(k);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let p = map.apply(&xp);
        let q = map.apply(&xm);
        for i in 0..m {
            jac[i * n + k] = (p[i] - q[i]) / (2.0 * h);
        }
    }
    jac
}

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Map given by closures.
#[derive(Clone)]
pub struct FnMap {
    pub domain: Chart,
    pub dim_out: usize,
    pub f: Arc<VecFn>,
    pub jac: Option<Arc<VecFn>>,
}

impl FnMap {
    pub fn new(
        domain: Chart,
        dim_out: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { domain, dim_out, f: Arc::new(f), jac: None }
    }

    pub fn with_jacobian(mut self, j: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(j));
        self
    }
}

impl ChartMap for FnMap {
    fn domain(&self) -> &Chart {
        &self.domain
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        match &self.jac {
            Some(j) => j(x),
            None => fd_jacobian(self, x),
        }
    }
}

pub struct IdentityMap(pub Chart);

impl ChartMap for IdentityMap {
    fn domain(&self) -> &Chart {
        &self.0
    }
    fn dim_out(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn jacobian(&self, _x: &[f64]) -> Vec<f64> {
        dense::identity(self.0.dim())
    }
}

/// `outer ∘ inner`: first `inner`, then `outer`.
pub struct ComposedMap {
    pub inner: Arc<dyn ChartMap>,
    pub outer: Arc<dyn ChartMap>,
}

impl ChartMap for ComposedMap {
    fn domain(&self) -> &Chart {
        self.inner.domain()
    }
    fn dim_out(&self) -> usize {
        self.outer.dim_out()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.outer.apply(&self.inner.apply(x))
    }
    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let y = self.inner.apply(x);
        let a = self.outer.jacobian(&y);
        let b = self.inner.jacobian(x);
        let (m, k, n) = (self.outer.dim_out(), self.inner.dim_out(), self.inner.domain().dim());
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                for j in 0..n {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }
}

/// `J^T g(map(x)) J`.
pub struct PushforwardSource {
    pub map: Arc<dyn ChartMap>,
    pub inner: Arc<dyn MetricSource>,
}

impl MetricSource for PushforwardSource {
    fn dim(&self) -> usize {
        self.map.domain().dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let m = self.map.dim_out();
        let y = self.map.apply(x);
        let g = self.inner.eval(&y);
        let j = self.map.jacobian(x);
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for p in 0..m {
                    for q in 0..m {
                        s += j[p * n + a] * g[p * m + q] * j[q * n + b];
                    }
                }
                out[a * n + b] = s;
                out[b * n + a] = s;
            }
        }
        out
    }
}

/// The metric `field` expressed in the coordinates of `map.domain()`.
///
/// The map is sampled on a grid (8 points per axis) to check that it lands in
/// the old chart with a non-degenerate Jacobian.
pub fn pushforward_metric(map: Arc<dyn ChartMap>, field: &MetricField) -> Result<MetricField> {
    if map.dim_out() != field.dim() {
        return Err(GeqError::DimensionMismatch { expected: field.dim(), got: map.dim_out() });
    }
    let dom = map.domain().clone();
    let n = dom.dim();
    for x in dom.grid(8) {
        let y = map.apply(&x);
        if !field.chart.contains(&y) {
            return Err(GeqError::OutOfChart { point: y });
        }
        if n == map.dim_out() {
            let det = dense::det(&map.jacobian(&x), n);
            if !(det.abs() >= 1e-12) {
                return Err(GeqError::DegenerateJacobian { point: x, det });
            }
        }
    }
    let source = PushforwardSource { map, inner: field.source.clone() };
    MetricField::new(dom, Arc::new(source), format!("pushforward({})", field.provenance))
}
