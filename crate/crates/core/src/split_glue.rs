//! Splitting a pair into two block factors along an eigenvalue gap of `L`,
//! gluing factor pairs back into a product pair, and the resulting ordered
//! composition of triples.
//!
//! With `chi_A(t) = det(A - t)`, the splitting operators are
//! `C = (-1)^r chi_r(L) + chi_{n-r}(L)` and
//! `Cbar = (-1)^r chi_r(L) / det L_r + chi_{n-r}(L) / det L_{n-r}`,
//! where `L_r`, `L_{n-r}` are the restrictions of `L` to the eigenspaces below
//! and above the gap; the factors are `h = C^{-T} g`, `hbar = Cbar^{-T} gbar`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::charts::{Chart, Components, MetricField, MetricPair, MetricSource};
use crate::dense;
use crate::error::{GeqError, Result};
use crate::projective::{eigen_of, l_eigen, l_from};
use crate::scalar::{Dual, Scalar};

/// Upper bound on the number of points used to sample eigenvalue ranges.
pub const RANGE_SAMPLES: usize = 4096;
/// Tolerance for deciding that a coordinate axis lies in one eigen-block.
pub const ALIGN_TOL: f64 = 1e-6;

fn range_grid(chart: &Chart) -> Vec<Vec<f64>> {
    let n = chart.dim() as u32;
    let mut per = 64usize;
    while per > 2 && per.pow(n) > RANGE_SAMPLES {
        per -= 1;
    }
    chart.grid(per)
}

/// Sampled `(inf lambda_i, sup lambda_i)` for every sorted eigenvalue index.
pub fn eigen_ranges(pair: &MetricPair) -> Result<Vec<(f64, f64)>> {
    let n = pair.dim();
    let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for x in range_grid(pair.chart()) {
        let ev = l_eigen(pair, &x)?.values;
        for (o, v) in out.iter_mut().zip(ev) {
            o.0 = o.0.min(v);
            o.1 = o.1.max(v);
        }
    }
    Ok(out)
}

/// A projectively equivalent pair together with the sampled range of its
/// `L`-eigenvalues.
#[derive(Clone, Debug)]
pub struct EquivTriple {
    pub pair: MetricPair,
    pub eigen_range: (f64, f64),
}

impl EquivTriple {
    pub fn new(pair: MetricPair) -> Result<Self> {
        let r = eigen_ranges(&pair)?;
        let eigen_range = (r[0].0, r[r.len() - 1].1);
        if !(eigen_range.0 > 0.0) {
            return Err(GeqError::NotPositive(format!("L-eigenvalue reaches {}", eigen_range.0)));
        }
        Ok(Self { pair, eigen_range })
    }

    pub fn dim(&self) -> usize {
        self.pair.dim()
    }
}

/// Coordinate indices of the two blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSplit {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

pub struct SplitResult {
    pub r: usize,
    pub h: MetricField,
    pub hbar: MetricField,
    pub index_split: IndexSplit,
    /// Eigenvalues below this value belong to the first block.
    pub threshold: f64,
}

/// Ascending coefficients of `prod (lam_j - t)` from power sums `p_1..p_m`
/// (Newton's identities); also returns the product `e_m`.
fn block_poly<S: Scalar>(p: &[S]) -> (Vec<S>, S) {
    let m = p.len();
    let mut e = vec![S::one()];
    for k in 1..=m {
        let mut s = S::zero();
        for i in 1..=k {
            let t = e[k - i] * p[i - 1];
            if i % 2 == 1 {
                s += t;
            } else {
                s -= t;
            }
        }
        e.push(s / k as f64);
    }
    let coeffs = (0..=m).map(|j| if j % 2 == 0 { e[m - j] } else { -e[m - j] }).collect();
    (coeffs, e[m])
}

/// `trace(L^k P)` for `k = 1..=m`.
fn power_sums<S: Scalar>(l: &[S], proj: &[f64], n: usize, m: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(m);
    let mut lk = dense::identity::<S>(n);
    for _ in 0..m {
        lk = dense::matmul(&lk, l, n);
        let mut tr = S::zero();
        for i in 0..n {
            for j in 0..n {
                tr += lk[i * n + j] * proj[j * n + i];
            }
        }
        out.push(tr);
    }
    out
}

/// Spectral projector onto the eigenvalues of `l` below `threshold`, which
/// must number exactly `r`.
fn lower_projector(g: &[f64], l: &[f64], n: usize, r: usize, threshold: f64) -> Option<Vec<f64>> {
    let eig = eigen_of(g, l, n)?;
    if eig.values.iter().filter(|&&v| v < threshold).count() != r {
        return None;
    }
    let v = &eig.vectors;
    let mut vvt = vec![0.0; n * n];
    for c in 0..r {
        for i in 0..n {
            for j in 0..n {
                vvt[i * n + j] += v[(i, c)] * v[(j, c)];
            }
        }
    }
    Some(dense::matmul(&vvt, g, n))
}

/// `chi_A(L)` and `det A` for the block of `l` selected by the projector
/// `proj` with `m` eigenvalues. The polynomial is built for `L - mu` with
/// `mu` the block's mean eigenvalue, which keeps Newton's identities well
/// conditioned; a constant shift leaves derivatives exact.
fn block_at<S: Scalar>(l: &[S], l_re: &[f64], proj: &[f64], n: usize, m: usize) -> (Vec<S>, S) {
    let mu = (0..n).map(|i| (0..n).map(|j| l_re[i * n + j] * proj[j * n + i]).sum::<f64>()).sum::<f64>() / m as f64;
    let mut shifted = l.to_vec();
    for i in 0..n {
        shifted[i * n + i] -= S::cst(mu);
    }
    let (q, _) = block_poly(&power_sums(&shifted, proj, n, m));
    // det A = chi_A(0) = q(-mu)
    let det = q.iter().rev().fold(S::zero(), |acc, &c| acc * (-mu) + c);
    (dense::poly_at_matrix(&q, &shifted, n), det)
}

/// `(C, Cbar)` for the operator `l` (metric `g` for the eigen-split).
///
/// The block characteristic polynomials come from power sums `tr(L^k P)`
/// with the projector `P` frozen at real values; since `P` commutes with `L`
/// this is exact to first order, so dual arguments give exact derivatives
/// even when eigenvalues inside a block coincide.
fn split_operators<S: Scalar>(l: &[S], g_re: &[f64], n: usize, r: usize, threshold: f64) -> Option<(Vec<S>, Vec<S>)> {
    let l_re: Vec<f64> = l.iter().map(|v| v.re()).collect();
    let p1 = lower_projector(g_re, &l_re, n, r, threshold)?;
    let mut p2 = dense::identity::<f64>(n);
    for (a, b) in p2.iter_mut().zip(&p1) {
        *a -= b;
    }
    let (a, det_r) = block_at(l, &l_re, &p1, n, r);
    let (b, det_s) = block_at(l, &l_re, &p2, n, n - r);
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    let c = a.iter().zip(&b).map(|(&x, &y)| x * sign + y).collect();
    let cb = a.iter().zip(&b).map(|(&x, &y)| x * sign / det_r + y / det_s).collect();
    Some((c, cb))
}

struct SplitComponents {
    g: Arc<dyn MetricSource>,
    gb: Arc<dyn MetricSource>,
    n: usize,
    r: usize,
    threshold: f64,
    bar: bool,
}

impl Components for SplitComponents {
    fn dim(&self) -> usize {
        self.n
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let n = self.n;
        let g = S::eval_source(&*self.g, x)?;
        let gb = S::eval_source(&*self.gb, x)?;
        let l = l_from(&g, &gb, n)?;
        let g_re: Vec<f64> = g.iter().map(|v| v.re()).collect();
        let (c, cb) = split_operators(&l, &g_re, n, self.r, self.threshold)?;
        let (op, m) = if self.bar { (cb, gb) } else { (c, g) };
        let mut h = dense::solve(&dense::transpose(&op, n), &m, n)?;
        dense::symmetrize(&mut h, n);
        Some(h)
    }
}

/// `(C, Cbar)` of a pair at `x`, row-major.
pub fn split_operators_at(pair: &MetricPair, r: usize, threshold: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    pair.chart().check(x)?;
    let n = pair.dim();
    let g = pair.g.raw(x);
    let l = l_from(&g, &pair.gbar.raw(x), n).ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })?;
    split_operators(&l, &g, n, r, threshold).ok_or(GeqError::GapViolated { r, sup: f64::NAN, inf: threshold })
}

/// Diagonal of `Cbar` in an eigenframe of `L`, from the eigenvalues alone:
/// `prod_{j>r}(l_j - l_i) / prod_{j>r} l_j` on the first block and
/// `(-1)^r prod_{j<=r}(l_j - l_i) / prod_{j<=r} l_j` on the second.
pub fn c_bar_diagonal(eigs: &[f64], r: usize) -> Vec<f64> {
    let (lo, hi) = eigs.split_at(r);
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    let ratio = |block: &[f64], t: f64| block.iter().map(|&l| (l - t) / l).product::<f64>();
    eigs.iter()
        .enumerate()
        .map(|(i, &t)| if i < r { ratio(hi, t) } else { sign * ratio(lo, t) })
        .collect()
}

/// Largest deviation between the matrix `Cbar` at `x` and its eigen-diagonal
/// form `V diag(c_bar_diagonal) V^{-1}`.
pub fn c_bar_discrepancy(pair: &MetricPair, r: usize, threshold: f64, x: &[f64]) -> Result<f64> {
    let n = pair.dim();
    let (_, cb) = split_operators_at(pair, r, threshold, x)?;
    let e = l_eigen(pair, x)?;
    let d = c_bar_diagonal(&e.values, r);
    let v = &e.vectors;
    let vinv = v.clone().try_inverse().ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })?;
    let expect = v * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * vinv;
    let scale = expect.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    Ok((0..n * n).map(|k| (cb[k] - expect[(k / n, k % n)]).abs()).fold(0.0, f64::max) / scale)
}

/// Splits `pair` along the gap between its `r`-th and `(r+1)`-th eigenvalue.
pub fn split_pair(pair: &MetricPair, r: usize) -> Result<SplitResult> {
    let n = pair.dim();
    if r == 0 || r >= n {
        return Err(GeqError::InvalidInput(format!("block size {r} must lie in 1..{n}")));
    }
    let ranges = eigen_ranges(pair)?;
    let (sup, inf) = (ranges[r - 1].1, ranges[r].0);
    if !(sup < inf) {
        return Err(GeqError::GapViolated { r, sup, inf });
    }
    let threshold = 0.5 * (sup + inf);

    let x0 = pair.chart().center();
    let g0 = pair.g.raw(&x0);
    let l0 = l_from(&g0, &pair.gbar.raw(&x0), n).ok_or_else(|| GeqError::SingularMetric { point: x0.clone() })?;
    let p = lower_projector(&g0, &l0, n, r, threshold).ok_or(GeqError::GapViolated { r, sup, inf })?;
    let mut index_split = IndexSplit { first: vec![], second: vec![] };
    for k in 0..n {
        let col: Vec<f64> = (0..n).map(|i| p[i * n + k]).collect();
        let off = (0..n).filter(|&i| i != k).map(|i| col[i].abs()).fold(0.0, f64::max);
        if off < ALIGN_TOL && (col[k] - 1.0).abs() < ALIGN_TOL {
            index_split.first.push(k);
        } else if off < ALIGN_TOL && col[k].abs() < ALIGN_TOL {
            index_split.second.push(k);
        } else {
            return Err(GeqError::InvalidInput(format!("coordinate axis {k} is not aligned with the eigen-blocks")));
        }
    }
    if index_split.first.len() != r {
        return Err(GeqError::InvalidInput("eigen-blocks are not coordinate-aligned".into()));
    }

    let make = |bar: bool, tag: &str| {
        MetricField::from_components(
            pair.chart().clone(),
            SplitComponents { g: pair.g.source.clone(), gb: pair.gbar.source.clone(), n, r, threshold, bar },
            format!("split_{tag}(r={r}, {})", pair.provenance),
        )
    };
    Ok(SplitResult { r, h: make(false, "h")?, hbar: make(true, "hbar")?, index_split, threshold })
}

/// The block `idx` of a field with all other coordinates frozen at `base`.
pub struct RestrictedSource {
    pub inner: Arc<dyn MetricSource>,
    pub base: Vec<f64>,
    pub idx: Vec<usize>,
}

impl RestrictedSource {
    fn run<S: Scalar>(&self, y: &[S], eval: impl Fn(&[S]) -> Option<Vec<S>>) -> Option<Vec<S>> {
        let n = self.base.len();
        let mut x: Vec<S> = self.base.iter().map(|&v| S::cst(v)).collect();
        for (k, &i) in self.idx.iter().enumerate() {
            x[i] = y[k];
        }
        let m = eval(&x)?;
        Some(self.idx.iter().flat_map(|&i| self.idx.iter().map(move |&j| (i, j))).map(|(i, j)| m[i * n + j]).collect())
    }
}

impl MetricSource for RestrictedSource {
    fn dim(&self) -> usize {
        self.idx.len()
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.run(y, |x| Some(self.inner.eval(x))).expect("plain evaluation")
    }
    fn eval_dual(&self, y: &[Dual]) -> Option<Vec<Dual>> {
        self.run(y, |x| self.inner.eval_dual(x))
    }
}

/// Restriction of a field to the coordinate leaf `idx` through `base`.
pub fn restrict_field(field: &MetricField, idx: &[usize], base: &[f64]) -> Result<MetricField> {
    field.chart.check(base)?;
    let src = RestrictedSource { inner: field.source.clone(), base: base.to_vec(), idx: idx.to_vec() };
    MetricField::new(field.chart.restrict(idx), Arc::new(src), format!("leaf({})", field.provenance))
}

impl SplitResult {
    pub fn block(&self, which: usize) -> &[usize] {
        if which == 0 {
            &self.index_split.first
        } else {
            &self.index_split.second
        }
    }

    /// The factor pair `(h, hbar)` on the leaf of block `which` (0 or 1)
    /// through `base`.
    pub fn factor_pair(&self, which: usize, base: &[f64]) -> Result<MetricPair> {
        let idx = self.block(which);
        let h = restrict_field(&self.h, idx, base)?;
        let hb = restrict_field(&self.hbar, idx, base)?;
        MetricPair::new(h, hb, format!("factor{}(r={})", which + 1, self.r))
    }

    pub fn factor(&self, which: usize, base: &[f64]) -> Result<EquivTriple> {
        EquivTriple::new(self.factor_pair(which, base)?)
    }

    /// Largest off-block entry of `h` and `hbar` at `x`.
    pub fn off_block_max(&self, x: &[f64]) -> f64 {
        let n = self.h.dim();
        let (h, hb) = (self.h.raw(x), self.hbar.raw(x));
        let mut worst = 0.0f64;
        for &i in &self.index_split.first {
            for &j in &self.index_split.second {
                for m in [&h, &hb] {
                    worst = worst.max(m[i * n + j].abs()).max(m[j * n + i].abs());
                }
            }
        }
        worst
    }
}

struct GluedComponents {
    h1: Arc<dyn MetricSource>,
    hb1: Arc<dyn MetricSource>,
    h2: Arc<dyn MetricSource>,
    hb2: Arc<dyn MetricSource>,
    n1: usize,
    n2: usize,
    bar: bool,
}

impl Components for GluedComponents {
    fn dim(&self) -> usize {
        self.n1 + self.n2
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (n1, n2) = (self.n1, self.n2);
        let n = n1 + n2;
        let (x1, x2) = x.split_at(n1);
        let h1 = S::eval_source(&*self.h1, x1)?;
        let hb1 = S::eval_source(&*self.hb1, x1)?;
        let h2 = S::eval_source(&*self.h2, x2)?;
        let hb2 = S::eval_source(&*self.hb2, x2)?;
        let l1 = l_from(&h1, &hb1, n1)?;
        let l2 = l_from(&h2, &hb2, n2)?;
        let chi1 = dense::char_poly(&l1, n1);
        let chi2 = dense::char_poly(&l2, n2);
        let mut c1 = dense::poly_at_matrix(&chi2, &l1, n1);
        let mut c2 = dense::poly_at_matrix(&chi1, &l2, n2);
        if n1 % 2 == 1 {
            c2.iter_mut().for_each(|v| *v = -*v);
        }
        let (m1, m2) = if self.bar {
            let (d1, d2) = (dense::det(&l1, n1), dense::det(&l2, n2));
            c1.iter_mut().for_each(|v| *v = *v / d2);
            c2.iter_mut().for_each(|v| *v = *v / d1);
            (hb1, hb2)
        } else {
            (h1, h2)
        };
        let b1 = dense::matmul(&dense::transpose(&c1, n1), &m1, n1);
        let b2 = dense::matmul(&dense::transpose(&c2, n2), &m2, n2);
        let mut out = vec![S::zero(); n * n];
        for i in 0..n1 {
            for j in 0..n1 {
                out[i * n + j] = b1[i * n1 + j];
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                out[(n1 + i) * n + n1 + j] = b2[i * n2 + j];
            }
        }
        dense::symmetrize(&mut out, n);
        Some(out)
    }
}

/// `g = C^T h`, `gbar = Cbar^T hbar` on the product chart (first factor's
/// coordinates first), without any eigenvalue-order check.
pub fn glue_pairs(p1: &MetricPair, p2: &MetricPair) -> Result<MetricPair> {
    let (n1, n2) = (p1.dim(), p2.dim());
    let chart = p1.chart().product(p2.chart());
    let make = |bar: bool| GluedComponents {
        h1: p1.g.source.clone(),
        hb1: p1.gbar.source.clone(),
        h2: p2.g.source.clone(),
        hb2: p2.gbar.source.clone(),
        n1,
        n2,
        bar,
    };
    let tag = format!("glue({}, {})", p1.provenance, p2.provenance);
    let g = MetricField::from_components(chart.clone(), make(false), format!("{tag}:g"))?;
    let gb = MetricField::from_components(chart, make(true), format!("{tag}:gbar"))?;
    MetricPair::new(g, gb, tag)
}

/// Glues two triples whose eigenvalue ranges are strictly ordered.
pub fn glue_pair(f1: &EquivTriple, f2: &EquivTriple) -> Result<EquivTriple> {
    if !(f1.eigen_range.1 < f2.eigen_range.0) {
        return Err(GeqError::EigenOrderViolated { left: 0, right: 1 });
    }
    let pair = glue_pairs(&f1.pair, &f2.pair)?;
    Ok(EquivTriple { pair, eigen_range: (f1.eigen_range.0, f2.eigen_range.1) })
}

/// Left fold of [`glue_pair`] over triples with pairwise ordered ranges.
pub fn oplus(triples: &[EquivTriple]) -> Result<EquivTriple> {
    let Some(first) = triples.first() else {
        return Err(GeqError::InvalidInput("oplus needs at least one triple".into()));
    };
    for i in 0..triples.len() {
        for j in i + 1..triples.len() {
            if !(triples[i].eigen_range.1 < triples[j].eigen_range.0) {
                return Err(GeqError::EigenOrderViolated { left: i, right: j });
            }
        }
    }
    let mut acc = first.clone();
    for t in &triples[1..] {
        acc = glue_pair(&acc, t)?;
    }
    let names: Vec<&str> = triples.iter().map(|t| t.pair.provenance.as_str()).collect();
    acc.pair.provenance = format!("oplus[{}]", names.join(", "));
    Ok(acc)
}

/// Field expressed with coordinates permuted: `out(x) = P^T inner(x[perm]) P`.
struct PermutedSource {
    inner: Arc<dyn MetricSource>,
    perm: Vec<usize>,
}

impl PermutedSource {
    fn run<S: Scalar>(&self, x: &[S], eval: impl Fn(&[S]) -> Option<Vec<S>>) -> Option<Vec<S>> {
        let n = self.perm.len();
        let y: Vec<S> = self.perm.iter().map(|&p| x[p]).collect();
        let m = eval(&y)?;
        let mut out = vec![S::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                out[self.perm[a] * n + self.perm[b]] = m[a * n + b];
            }
        }
        Some(out)
    }
}

impl MetricSource for PermutedSource {
    fn dim(&self) -> usize {
        self.perm.len()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, |y| Some(self.inner.eval(y))).expect("plain evaluation")
    }
    fn eval_dual(&self, x: &[Dual]) -> Option<Vec<Dual>> {
        self.run(x, |y| self.inner.eval_dual(y))
    }
}

/// `glue(split(pair, r))` with both factors taken on the leaves through the
/// chart center, expressed in the original coordinates.
pub fn roundtrip(pair: &MetricPair, r: usize) -> Result<MetricPair> {
    let s = split_pair(pair, r)?;
    let base = pair.chart().center();
    let glued = glue_pairs(&s.factor_pair(0, &base)?, &s.factor_pair(1, &base)?)?;
    let perm: Vec<usize> = s.index_split.first.iter().chain(&s.index_split.second).copied().collect();
    let wrap = |f: &MetricField| {
        MetricField::new(
            pair.chart().clone(),
            Arc::new(PermutedSource { inner: f.source.clone(), perm: perm.clone() }),
            f.provenance.clone(),
        )
    };
    MetricPair::new(wrap(&glued.g)?, wrap(&glued.gbar)?, format!("roundtrip(r={r}, {})", pair.provenance))
}

/// Largest entrywise difference of two pairs at `x`, each entry relative to
/// `max(1, |entry|)`.
pub fn pair_distance(a: &MetricPair, b: &MetricPair, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (p, q) in [(a.g.raw(x), b.g.raw(x)), (a.gbar.raw(x), b.gbar.raw(x))] {
        for (u, v) in p.iter().zip(&q) {
            worst = worst.max((u - v).abs() / u.abs().max(1.0));
        }
    }
    worst
}
