//! The tensor `L` of a metric pair, the polynomial family `S_t = adj(L - t)`,
//! the integrals `I_t`, their interlacing roots, the 2D integral `F`, and the
//! Nijenhuis torsion of `L`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::charts::{quad, MetricPair, PhasePoint, FD_REL_STEP};
use crate::dense;
use crate::error::{GeqError, Result};
use crate::scalar::Scalar;

/// Eigenvalues closer than this count as one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-8;
/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOL: f64 = 1e-12;

/// `L = (det gb / det g)^(1/(n+1)) gb^{-1} g`, generic over the scalar type.
pub fn l_from<S: Scalar>(g: &[S], gb: &[S], n: usize) -> Option<Vec<S>> {
    let dg = dense::det(g, n);
    let dgb = dense::det(gb, n);
    if !(dg.re() > 0.0) || !(dgb.re() > 0.0) {
        return None;
    }
    let c = (dgb / dg).powf(1.0 / (n as f64 + 1.0));
    let m = dense::solve(gb, g, n)?;
    Some(m.into_iter().map(|v| v * c).collect())
}

/// Row-major `L` at `x` without chart checks (used by difference stencils).
pub fn l_raw(pair: &MetricPair, x: &[f64]) -> Result<Vec<f64>> {
    let n = pair.dim();
    l_from(&pair.g.raw(x), &pair.gbar.raw(x), n).ok_or_else(|| GeqError::SingularMetric { point: x.to_vec() })
}

/// The matrix of `L` in chart coordinates.
pub fn l_tensor(pair: &MetricPair, x: &[f64]) -> Result<DMatrix<f64>> {
    pair.chart().check(x)?;
    let n = pair.dim();
    Ok(dense::to_dmatrix(&l_raw(pair, x)?, n))
}

/// How far `Gbar - G` is from the form `delta^k_i phi_j + delta^k_j phi_i`
/// that characterizes projectively equivalent connections, relative to
/// `max(1, max |Gbar - G|)`.
pub fn projective_residual(pair: &MetricPair, x: &[f64]) -> Result<f64> {
    let n = pair.dim();
    let a = pair.g.christoffel_at(x)?;
    let b = pair.gbar.christoffel_at(x)?;
    let d = |k, i, j| b.get(k, i, j) - a.get(k, i, j);
    let phi: Vec<f64> = (0..n).map(|i| (0..n).map(|k| d(k, i, k)).sum::<f64>() / (n + 1) as f64).collect();
    let mut res = 0.0f64;
    let mut scale = 1.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let expect = if k == i { phi[j] } else { 0.0 } + if k == j { phi[i] } else { 0.0 };
                res = res.max((d(k, i, j) - expect).abs());
                scale = scale.max(d(k, i, j).abs());
            }
        }
    }
    Ok(res / scale)
}

/// Sorted eigen-decomposition of `L`.
#[derive(Clone, Debug)]
pub struct LEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are `g`-orthonormal eigenvectors, in the order of `values`.
    pub vectors: DMatrix<f64>,
    /// Largest imaginary part reported by a general (non-symmetric) solver.
    pub max_imag: f64,
}

pub fn l_eigen(pair: &MetricPair, x: &[f64]) -> Result<LEigen> {
    pair.chart().check(x)?;
    let n = pair.dim();
    let g = pair.g.raw(x);
    let l = l_raw(pair, x)?;
    eigen_of(&g, &l, n).ok_or_else(|| GeqError::NotPositiveDefinite { point: x.to_vec(), min_eig: f64::NAN })
}

/// Eigenvalues of an operator `l` that is self-adjoint for the metric `g`.
pub fn eigen_of(g: &[f64], l: &[f64], n: usize) -> Option<LEigen> {
    let gm = dense::to_dmatrix(g, n);
    let lm = dense::to_dmatrix(l, n);
    let chol = gm.clone().cholesky()?;
    let lc = chol.l();
    let gl = &gm * &lm;
    let gl = (&gl + gl.transpose()) * 0.5;
    let lc_inv = lc.clone().try_inverse()?;
    let m = &lc_inv * gl * lc_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lt_inv = lc_inv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(i);
        vectors.set_column(c, &(&lt_inv * y));
    }
    let max_imag = lm.complex_eigenvalues().iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    Some(LEigen { values, vectors, max_imag })
}

/// Largest number of eigenvalues within one cluster (chained by `radius`).
pub fn max_multiplicity(sorted: &[f64], radius: f64) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    let mut best = 1;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[1] - w[0] <= radius {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best
}

/// A polynomial in `t` with matrix coefficients; `coeffs[k]` multiplies `t^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTensor {
    pub n: usize,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl PolyTensor {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.n, self.n);
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }
}

/// `adj(L - t I)` as a polynomial in `t`, via the characteristic-polynomial
/// recursion (no eigenvectors, so repeated eigenvalues are harmless).
pub fn adjugate_poly(l: &[f64], n: usize) -> PolyTensor {
    // det(tI - L) = t^n + a_{n-1} t^{n-1} + ... ; adj(tI - L) = sum t^k B_k
    let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
    let a: Vec<f64> = dense::char_poly(l, n).into_iter().map(|c| sign_n * c).collect();
    let mut b = vec![dense::identity::<f64>(n); n];
    for k in (1..n).rev() {
        let mut next = dense::matmul(l, &b[k], n);
        for i in 0..n {
            next[i * n + i] += a[k];
        }
        b[k - 1] = next;
    }
    // adj(L - tI) = (-1)^(n-1) adj(tI - L)
    let s = -sign_n;
    let coeffs = b.iter().map(|m| dense::to_dmatrix(m, n) * s).collect();
    PolyTensor { n, coeffs }
}

pub fn s_t(pair: &MetricPair, x: &[f64]) -> Result<PolyTensor> {
    pair.chart().check(x)?;
    Ok(adjugate_poly(&l_raw(pair, x)?, pair.dim()))
}

/// Ascending coefficients in `t` of `I_t(p) = g(S_t v, v)`.
pub fn i_t_coeffs(pair: &MetricPair, p: &PhasePoint) -> Result<Vec<f64>> {
    pair.chart().check(&p.x)?;
    let n = pair.dim();
    if p.v.len() != n {
        return Err(GeqError::DimensionMismatch { expected: n, got: p.v.len() });
    }
    let g = pair.g.raw(&p.x);
    let st = adjugate_poly(&l_raw(pair, &p.x)?, n);
    Ok(coeffs_from(&g, &st, &p.v))
}

fn coeffs_from(g: &[f64], st: &PolyTensor, v: &[f64]) -> Vec<f64> {
    st.coeffs
        .iter()
        .map(|c| {
            let sv: Vec<f64> = (0..st.n).map(|i| (0..st.n).map(|j| c[(i, j)] * v[j]).sum()).collect();
            quad(g, &sv, v)
        })
        .collect()
}

pub fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

pub fn i_t(pair: &MetricPair, p: &PhasePoint, t: f64) -> Result<f64> {
    Ok(eval_poly(&i_t_coeffs(pair, p)?, t))
}

/// Roots `t_1 <= ... <= t_{n-1}` of `t -> I_t` with the brackets used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    /// Whether the root was pinned to a repeated eigenvalue.
    pub pinned: Vec<bool>,
}

pub fn integral_roots(pair: &MetricPair, p: &PhasePoint) -> Result<RootSet> {
    let coeffs = i_t_coeffs(pair, p)?;
    let eig = l_eigen(pair, &p.x)?;
    roots_in_brackets(&coeffs, &eig.values)
}

/// Bisection for the roots of the polynomial `coeffs` in the brackets
/// `[lam_i, lam_{i+1}]`. At `lam_i` the polynomial has sign `(-1)^i`
/// (0-based), which is what certifies each bracket.
pub fn roots_in_brackets(coeffs: &[f64], lam: &[f64]) -> Result<RootSet> {
    let n = lam.len();
    let mut out = RootSet { roots: vec![], brackets: vec![], pinned: vec![] };
    let scale_at = |t: f64| -> f64 {
        coeffs.iter().enumerate().map(|(k, c)| c.abs() * t.abs().max(1.0).powi(k as i32)).sum::<f64>()
    };
    for i in 0..n.saturating_sub(1) {
        let (lo, hi) = (lam[i], lam[i + 1]);
        out.brackets.push((lo, hi));
        if hi - lo <= CLUSTER_RADIUS {
            out.roots.push(0.5 * (lo + hi));
            out.pinned.push(true);
            continue;
        }
        let s_lo = if i % 2 == 0 { 1.0 } else { -1.0 };
        let f_lo = eval_poly(coeffs, lo);
        let f_hi = eval_poly(coeffs, hi);
        let slack = 1e-9 * scale_at(lo).max(scale_at(hi)).max(1e-300);
        if s_lo * f_lo < -slack || -s_lo * f_hi < -slack {
            return Err(GeqError::BracketFailure { index: i, lo, hi });
        }
        let (mut a, mut b) = (lo, hi);
        let mut root = None;
        for _ in 0..200 {
            if b - a <= ROOT_TOL {
                break;
            }
            let m = 0.5 * (a + b);
            let fm = eval_poly(coeffs, m);
            if fm == 0.0 {
                root = Some(m);
                break;
            }
            if fm * s_lo > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        out.roots.push(root.unwrap_or(0.5 * (a + b)));
        out.pinned.push(false);
    }
    Ok(out)
}

/// `F = (det g / det gb)^(2/3) gb(v, v)` for two-dimensional pairs.
pub fn f_integral_2d(pair: &MetricPair, p: &PhasePoint) -> Result<f64> {
    if pair.dim() != 2 {
        return Err(GeqError::DimensionMismatch { expected: 2, got: pair.dim() });
    }
    pair.chart().check(&p.x)?;
    let g = pair.g.raw(&p.x);
    let gb = pair.gbar.raw(&p.x);
    let (dg, dgb) = (dense::det(&g, 2), dense::det(&gb, 2));
    if !(dg > 0.0 && dgb > 0.0) {
        return Err(GeqError::SingularMetric { point: p.x.clone() });
    }
    Ok((dg / dgb).powf(2.0 / 3.0) * quad(&gb, &p.v, &p.v))
}

/// Nijenhuis torsion components `N^k_ij`, stored flat as `[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Torsion {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Torsion {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Nijenhuis torsion of `L` from central differences of the `L` field
/// (step `1e-5 x` box width):
/// `N^k_ij = L^a_i d_a L^k_j - L^a_j d_a L^k_i + L^k_m (d_j L^m_i - d_i L^m_j)`.
pub fn nijenhuis_at(pair: &MetricPair, x: &[f64]) -> Result<Torsion> {
    let chart = pair.chart();
    chart.check(x)?;
    let n = pair.dim();
    let l = l_raw(pair, x)?;
    let mut dl = Vec::with_capacity(n);
    for a in 0..n {
        let h = FD_REL_STEP * chart.width(a);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += h;
        xm[a] -= h;
        let p = l_raw(pair, &xp)?;
        let m = l_raw(pair, &xm)?;
        dl.push(p.iter().zip(&m).map(|(u, w)| (u - w) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let at = |m: &Vec<f64>, r: usize, c: usize| m[r * n + c];
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    s += l[a * n + i] * at(&dl[a], k, j) - l[a * n + j] * at(&dl[a], k, i);
                    s += l[k * n + a] * (at(&dl[j], a, i) - at(&dl[i], a, j));
                }
                data[(k * n + i) * n + j] = s;
            }
        }
    }
    Ok(Torsion { n, data })
}

/// Finite-difference Poisson bracket `{I_s, I_t}` on the cotangent bundle,
/// with momenta identified with velocities through `g` (`v = g^{-1} p`).
/// Passing `None` for either parameter uses the Hamiltonian `g^{-1}(p, p)/2`.
pub fn poisson_bracket_fd(pair: &MetricPair, x: &[f64], p: &[f64], s: Option<f64>, t: Option<f64>) -> Result<f64> {
    let n = pair.dim();
    let func = |xx: &[f64], pp: &[f64], which: Option<f64>| -> Result<f64> {
        let g = pair.g.raw(xx);
        let ginv = dense::inverse(&g, n).ok_or_else(|| GeqError::SingularMetric { point: xx.to_vec() })?;
        let v: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ginv[i * n + j] * pp[j]).sum()).collect();
        match which {
            None => Ok(0.5 * quad(&g, &v, &v)),
            Some(tt) => {
                let st = adjugate_poly(&l_raw(pair, xx)?, n);
                Ok(eval_poly(&coeffs_from(&g, &st, &v), tt))
            }
        }
    };
    let mut grads = [(vec![0.0; n], vec![0.0; n]), (vec![0.0; n], vec![0.0; n])];
    for (slot, which) in [(0usize, s), (1, t)] {
        for k in 0..n {
            let hx = 1e-4 * pair.chart().width(k);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += hx;
            xm[k] -= hx;
            grads[slot].0[k] = (func(&xp, p, which)? - func(&xm, p, which)?) / (2.0 * hx);
            let hp = 1e-4 * p.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[k] += hp;
            pm[k] -= hp;
            grads[slot].1[k] = (func(x, &pp, which)? - func(x, &pm, which)?) / (2.0 * hp);
        }
    }
    let (dx1, dp1) = &grads[0];
    let (dx2, dp2) = &grads[1];
    Ok((0..n).map(|k| dx1[k] * dp2[k] - dp1[k] * dx2[k]).sum())
}
