//! Projectively equivalent pairs on spheres (pull-backs of the round metric
//! by `v -> Av/|Av|`), eigenvalue rescaling of triples, and products of
//! spheres assembled with [`oplus`].

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::charts::{Chart, Components, MetricField, MetricPair, Scaled};
use crate::dense;
use crate::error::{GeqError, Result};
use crate::scalar::Scalar;
use crate::split_glue::{oplus, EquivTriple};

/// Smallest admissible `|det A|`.
pub const MIN_DET: f64 = 1e-12;
/// Minimum embedded distance between the chart image and the projection pole.
pub const POLE_CLEARANCE: f64 = 0.1;
/// Relative gap enforced between consecutive factors of a product.
pub const PRODUCT_GAP: f64 = 0.1;
/// Iteration cap for the doubling search of scaling constants.
pub const MAX_DOUBLINGS: usize = 20;

/// A non-degenerate linear map of `R^{n+1}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub dim: usize,
    pub a: Vec<f64>,
}

impl LinearMap {
    pub fn new(dim: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(GeqError::DimensionMismatch { expected: dim * dim, got: a.len() });
        }
        let det = dense::det(&a, dim);
        if !(det.abs() > MIN_DET) {
            return Err(GeqError::DegenerateMap(det.abs()));
        }
        Ok(Self { dim, a })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for (i, &v) in d.iter().enumerate() {
            a[i * n + i] = v;
        }
        Self::new(n, a)
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, a: dense::identity(dim) }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum()).collect()
    }
}

/// Stereographic chart `[-a, a]^n` of `S^n`, projecting from `pole`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereChart {
    pub n: usize,
    pub half_width: f64,
    /// Unit vector in `R^{n+1}`; the last basis vector when omitted.
    #[serde(default)]
    pub pole: Option<Vec<f64>>,
}

impl SphereChart {
    pub fn new(n: usize, half_width: f64, pole: Option<Vec<f64>>) -> Result<Self> {
        let c = Self { n, half_width, pole };
        c.validate()?;
        Ok(c)
    }

    pub fn standard(n: usize) -> Self {
        Self { n, half_width: 0.5, pole: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.half_width > 0.0) {
            return Err(GeqError::InvalidInput(format!("sphere chart needs n >= 1 and a > 0, got {self:?}")));
        }
        if let Some(p) = &self.pole {
            if p.len() != self.n + 1 {
                return Err(GeqError::DimensionMismatch { expected: self.n + 1, got: p.len() });
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() < 1e-12) {
                return Err(GeqError::InvalidInput(format!("pole must be a unit vector (norm {norm})")));
            }
        }
        // the farthest chart corner has |x|^2 = n a^2; its distance to the pole is 2/sqrt(1 + |x|^2)
        let s = self.n as f64 * self.half_width * self.half_width;
        if !(2.0 / (1.0 + s).sqrt() >= POLE_CLEARANCE) {
            return Err(GeqError::InvalidInput("sphere chart reaches too close to the pole".into()));
        }
        Ok(())
    }

    pub fn chart(&self) -> Chart {
        Chart::cube(self.n, -self.half_width, self.half_width).expect("validated half-width")
    }

    /// Householder reflection sending the last basis vector to the pole.
    fn frame(&self) -> Vec<f64> {
        let m = self.n + 1;
        let mut r = dense::identity::<f64>(m);
        if let Some(p) = &self.pole {
            let mut u = p.clone();
            u[m - 1] -= 1.0;
            let uu: f64 = u.iter().map(|v| v * v).sum();
            if uu > 1e-30 {
                for i in 0..m {
                    for j in 0..m {
                        r[i * m + j] -= 2.0 * u[i] * u[j] / uu;
                    }
                }
            }
        }
        r
    }

    /// Point of the unit sphere in `R^{n+1}`.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        let e = stereo(x);
        let r = self.frame();
        let m = self.n + 1;
        (0..m).map(|i| (0..m).map(|j| r[i * m + j] * e[j]).sum()).collect()
    }

    /// Row-major `(n+1) x n` Jacobian of [`SphereChart::embed`].
    pub fn embed_jacobian(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.n + 1);
        let j = stereo_jacobian(x);
        let r = self.frame();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for k in 0..n {
                out[i * n + k] = (0..m).map(|l| r[i * m + l] * j[l * n + k]).sum();
            }
        }
        out
    }
}

/// Inverse stereographic projection from the last basis vector:
/// `(2x, |x|^2 - 1) / (|x|^2 + 1)`.
fn stereo<S: Scalar>(x: &[S]) -> Vec<S> {
    let mut s = S::zero();
    for &v in x {
        s += v * v;
    }
    let d = s + 1.0;
    let mut e: Vec<S> = x.iter().map(|&v| v * 2.0 / d).collect();
    e.push((s - 1.0) / d);
    e
}

fn stereo_jacobian<S: Scalar>(x: &[S]) -> Vec<S> {
    let n = x.len();
    let mut s = S::zero();
    for &v in x {
        s += v * v;
    }
    let d = s + 1.0;
    let d2 = d * d;
    let mut j = vec![S::zero(); (n + 1) * n];
    for i in 0..n {
        for k in 0..n {
            let mut v = -(x[i] * x[k] * 4.0) / d2;
            if i == k {
                v += S::cst(2.0) / d;
            }
            j[i * n + k] = v;
        }
    }
    for k in 0..n {
        j[n * n + k] = x[k] * 4.0 / d2;
    }
    j
}

/// Round metric in stereographic coordinates, or (with `map`) its pull-back
/// under `v -> Av/|Av|`.
struct Beltrami {
    n: usize,
    /// `A R`, where `R` is the chart frame; `None` for the round metric.
    map: Option<Vec<f64>>,
}

impl Components for Beltrami {
    fn dim(&self) -> usize {
        self.n
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (n, m) = (self.n, self.n + 1);
        let Some(a) = &self.map else {
            let mut s = S::zero();
            for &v in x {
                s += v * v;
            }
            let c = S::cst(4.0) / ((s + 1.0) * (s + 1.0));
            let mut out = vec![S::zero(); n * n];
            for i in 0..n {
                out[i * n + i] = c;
            }
            return Some(out);
        };
        let e = stereo(x);
        let j = stereo_jacobian(x);
        let w: Vec<S> = (0..m).map(|i| (0..m).fold(S::zero(), |acc, l| acc + e[l] * a[i * m + l])).collect();
        // columns of A J
        let aj: Vec<Vec<S>> = (0..n)
            .map(|k| (0..m).map(|i| (0..m).fold(S::zero(), |acc, l| acc + j[l * n + k] * a[i * m + l])).collect())
            .collect();
        let dot = |p: &[S], q: &[S]| p.iter().zip(q).fold(S::zero(), |acc, (&u, &v)| acc + u * v);
        let ww = dot(&w, &w);
        let wd: Vec<S> = aj.iter().map(|c| dot(&w, c)).collect();
        let mut out = vec![S::zero(); n * n];
        for p in 0..n {
            for q in p..n {
                let v = (ww * dot(&aj[p], &aj[q]) - wd[p] * wd[q]) / (ww * ww);
                out[p * n + q] = v;
                out[q * n + p] = v;
            }
        }
        Some(out)
    }
}

/// The round metric of `S^n` and its pull-back by `v -> Av/|Av|`, on a
/// stereographic chart.
pub fn beltrami_pair(n: usize, a: &LinearMap, chart: &SphereChart) -> Result<EquivTriple> {
    if a.dim != n + 1 {
        return Err(GeqError::DimensionMismatch { expected: n + 1, got: a.dim });
    }
    if chart.n != n {
        return Err(GeqError::DimensionMismatch { expected: n, got: chart.n });
    }
    chart.validate()?;
    let det = dense::det(&a.a, n + 1);
    if !(det.abs() > MIN_DET) {
        return Err(GeqError::DegenerateMap(det.abs()));
    }
    let ar = dense::matmul(&a.a, &chart.frame(), n + 1);
    let c = chart.chart();
    let g = MetricField::from_components(c.clone(), Beltrami { n, map: None }, format!("round(S^{n})"))?;
    let gb = MetricField::from_components(c, Beltrami { n, map: Some(ar) }, format!("beltrami(S^{n}, A={:?})", a.a))?;
    EquivTriple::new(MetricPair::new(g, gb, format!("beltrami(n={n})"))?)
}

/// `(C g, gbar)`; the eigenvalues of `L` scale by `C^(1/(k+1))`, `k` the dimension.
pub fn scale_triple(t: &EquivTriple, c: f64) -> Result<EquivTriple> {
    if !(c > 0.0) {
        return Err(GeqError::NotPositive(format!("scaling constant {c}")));
    }
    let k = t.dim() as f64;
    let f = c.powf(1.0 / (k + 1.0));
    let g = MetricField::new(
        t.pair.chart().clone(),
        Arc::new(Scaled { inner: t.pair.g.source.clone(), factor: c }),
        format!("{c} * {}", t.pair.g.provenance),
    )?;
    let pair = MetricPair::new(g, t.pair.gbar.clone(), format!("scaled({c}, {})", t.pair.provenance))?;
    Ok(EquivTriple { pair, eigen_range: (t.eigen_range.0 * f, t.eigen_range.1 * f) })
}

/// Scaling constant putting `t`'s eigenvalues at least `PRODUCT_GAP` above
/// `floor` (relative): doubling, then one bisection step towards the minimum.
pub fn separating_constant(t: &EquivTriple, floor: f64) -> Result<f64> {
    let k = t.dim() as f64;
    let ok = |c: f64| t.eigen_range.0 * c.powf(1.0 / (k + 1.0)) >= (1.0 + PRODUCT_GAP) * floor;
    if ok(1.0) {
        return Ok(1.0);
    }
    let mut c = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        c *= 2.0;
        if ok(c) {
            let mid = 0.75 * c;
            return Ok(if ok(mid) { mid } else { c });
        }
    }
    Err(GeqError::EigenOrderViolated { left: 0, right: 1 })
}

/// `S^{k_1} x ... x S^{k_m}` with the Beltrami pair on each factor, scaled so
/// that consecutive eigenvalue ranges are ordered with a relative gap.
pub fn spheres_product(factors: &[(usize, LinearMap)]) -> Result<EquivTriple> {
    spheres_product_with(factors.iter().map(|(n, a)| (SphereChart::standard(*n), a.clone())).collect::<Vec<_>>().as_slice())
}

pub fn spheres_product_with(factors: &[(SphereChart, LinearMap)]) -> Result<EquivTriple> {
    if factors.is_empty() {
        return Err(GeqError::InvalidInput("a product needs at least one factor".into()));
    }
    let mut triples: Vec<EquivTriple> = Vec::with_capacity(factors.len());
    for (i, (chart, a)) in factors.iter().enumerate() {
        let t = beltrami_pair(chart.n, a, chart)?;
        let t = match triples.last() {
            None => t,
            Some(prev) => {
                let c = separating_constant(&t, prev.eigen_range.1)
                    .map_err(|_| GeqError::EigenOrderViolated { left: i - 1, right: i })?;
                if c == 1.0 {
                    t
                } else {
                    scale_triple(&t, c)?
                }
            }
        };
        triples.push(t);
    }
    oplus(&triples)
}

/// Third singular value of the (uncentered) point matrix, divided by
/// `sqrt(#points)`: the RMS distance to the best plane through the origin.
pub fn planarity_defect(points: &[Vec<f64>]) -> f64 {
    let m = points.len();
    if m == 0 {
        return 0.0;
    }
    let d = points[0].len();
    let mat = DMatrix::from_fn(m, d, |i, j| points[i][j]);
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.get(2).copied().unwrap_or(0.0) / (m as f64).sqrt()
}

/// `v -> Av/|Av|`.
pub fn normalize_image(a: &LinearMap, v: &[f64]) -> Vec<f64> {
    let w = a.apply(v);
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.into_iter().map(|x| x / norm).collect()
}

#[cfg(test)]
mod tests;
