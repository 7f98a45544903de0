//! Polynomials used as the scalar building blocks of every family.

use serde::{Deserialize, Serialize};

use crate::error::{GeqError, Result};
use crate::scalar::Scalar;

/// A polynomial in one variable restricted to a closed interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFunction1D {
    /// Ascending-degree coefficients.
    pub coeffs: Vec<f64>,
    pub interval: (f64, f64),
}

impl ScalarFunction1D {
    pub fn new(coeffs: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GeqError::InvalidInput("polynomial needs finite coefficients".into()));
        }
        if !(interval.0 < interval.1) {
            return Err(GeqError::InvalidInput(format!("degenerate interval {interval:?}")));
        }
        Ok(Self { coeffs, interval })
    }

    pub fn constant(c: f64, interval: (f64, f64)) -> Self {
        Self { coeffs: vec![c], interval }
    }

    pub fn eval<S: Scalar>(&self, x: S) -> S {
        let mut acc = S::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs = if self.coeffs.len() <= 1 {
            vec![0.0]
        } else {
            self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
        };
        Self { coeffs, interval: self.interval }
    }

    /// Sampled `(min, max)` over `[lo, hi]` using `n` equispaced points.
    pub fn sampled_range(&self, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let n = n.max(2);
        (0..n)
            .map(|k| self.eval(lo + (hi - lo) * k as f64 / (n - 1) as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Dense bivariate polynomial `sum c[i][j] u^i w^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    c: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self { c: vec![vec![0.0]] }
    }

    pub fn constant(v: f64) -> Self {
        Self { c: vec![vec![v]] }
    }

    pub fn u() -> Self {
        Self { c: vec![vec![0.0], vec![1.0]] }
    }

    pub fn w() -> Self {
        Self { c: vec![vec![0.0, 1.0]] }
    }

    fn deg_u(&self) -> usize {
        self.c.len()
    }

    fn deg_w(&self) -> usize {
        self.c.iter().map(Vec::len).max().unwrap_or(1)
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.c.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn add(&self, o: &Self) -> Self {
        let nu = self.deg_u().max(o.deg_u());
        let nw = self.deg_w().max(o.deg_w());
        let c = (0..nu)
            .map(|i| (0..nw).map(|j| self.coeff(i, j) + o.coeff(i, j)).collect())
            .collect();
        Self { c }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|r| r.iter().map(|v| v * s).collect()).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let nu = self.deg_u() + o.deg_u() - 1;
        let nw = self.deg_w() + o.deg_w() - 1;
        let mut c = vec![vec![0.0; nw]; nu];
        for (i, ri) in self.c.iter().enumerate() {
            for (j, &a) in ri.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (k, rk) in o.c.iter().enumerate() {
                    for (l, &b) in rk.iter().enumerate() {
                        c[i + k][j + l] += a * b;
                    }
                }
            }
        }
        Self { c }
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(1.0), |acc, _| acc.mul(self))
    }

    /// Exact division by `w`; the `w^0` column is discarded and its largest
    /// magnitude returned so callers can check it vanished.
    pub fn div_w(&self) -> (Self, f64) {
        let mut resid: f64 = 0.0;
        let c = self
            .c
            .iter()
            .map(|r| {
                resid = resid.max(r[0].abs());
                if r.len() > 1 {
                    r[1..].to_vec()
                } else {
                    vec![0.0]
                }
            })
            .collect();
        (Self { c }, resid)
    }

    pub fn eval<S: Scalar>(&self, u: S, w: S) -> S {
        let mut acc = S::zero();
        for row in self.c.iter().rev() {
            let mut inner = S::zero();
            for &v in row.iter().rev() {
                inner = inner * w + v;
            }
            acc = acc * u + inner;
        }
        acc
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// For `lam` a polynomial, returns `(S, D)` with `S = lam(u+r) + lam(u-r)` and
/// `D = (lam(u+r) - lam(u-r)) / r` written as polynomials in `(u, w)` where
/// `r^2 = u^2 + w`. Both are smooth through `r = 0`.
pub fn sum_and_divided_difference(lam: &ScalarFunction1D) -> (Poly2, Poly2) {
    let r2 = Poly2::u().mul(&Poly2::u()).add(&Poly2::w());
    let mut s = Poly2::zero();
    let mut d = Poly2::zero();
    for (k, &a) in lam.coeffs.iter().enumerate() {
        for j in 0..=k {
            let coef = 2.0 * a * binom(k, j);
            if coef == 0.0 {
                continue;
            }
            let upow = Poly2::u().pow(k - j);
            if j % 2 == 0 {
                s = s.add(&upow.mul(&r2.pow(j / 2)).scale(coef));
            } else {
                d = d.add(&upow.mul(&r2.pow((j - 1) / 2)).scale(coef));
            }
        }
    }
    (s, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;

    #[test]
    fn horner_and_derivative() {
        let p = ScalarFunction1D::new(vec![2.0, 1.0, 0.5], (-1.0, 1.0)).unwrap();
        assert_eq!(p.eval(2.0), 2.0 + 2.0 + 2.0);
        assert_eq!(p.derivative().coeffs, vec![1.0, 1.0]);
        let d = p.eval(Dual::var(0.3));
        assert!((d.eps - 1.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(ScalarFunction1D::new(vec![1.0], (1.0, 1.0)).is_err());
    }

    #[test]
    fn sum_and_difference_match_direct_evaluation() {
        let lam = ScalarFunction1D::new(vec![2.0, 1.0, 0.3, -0.2, 0.05], (-1.0, 1.0)).unwrap();
        let (s, d) = sum_and_divided_difference(&lam);
        for &(u, v) in &[(0.1, 0.2), (-0.3, 0.05), (0.25, -0.4)] {
            let w: f64 = v * v;
            let r = (u * u + w).sqrt();
            let lp = lam.eval(u + r);
            let lm = lam.eval(u - r);
            assert!((s.eval(u, w) - (lp + lm)).abs() < 1e-13);
            assert!((d.eval(u, w) - (lp - lm) / r).abs() < 1e-12);
        }
        // at r = 0 the divided difference is 2 lam'(0)
        assert!((d.eval(0.0, 0.0) - 2.0 * lam.derivative().eval(0.0)).abs() < 1e-13);
    }

    #[test]
    fn exact_division_by_w() {
        let p = Poly2::w().mul(&Poly2::u().add(&Poly2::constant(3.0)));
        let (q, resid) = p.div_w();
        assert_eq!(resid, 0.0);
        assert!((q.eval(2.0, 7.0) - 5.0).abs() < 1e-15);
    }
}
