//! The three two-dimensional normal forms near a point where the metrics are
//! proportional.

use crate::charts::Components;
use crate::poly::{sum_and_divided_difference, Poly2, ScalarFunction1D};
use crate::scalar::Scalar;

/// `S = lam(u+r) + lam(u-r)`, `D = (lam(u+r) - lam(u-r))/r` and
/// `Q = lam(u+r) lam(u-r)` as polynomials in `(u, w)`, `r^2 = u^2 + w`.
#[derive(Clone, Debug)]
pub struct BifurcationPolys {
    pub s: Poly2,
    pub d: Poly2,
    pub q: Poly2,
}

impl BifurcationPolys {
    pub fn new(lam: &ScalarFunction1D) -> Self {
        let (s, d) = sum_and_divided_difference(lam);
        let r2 = Poly2::u().mul(&Poly2::u()).add(&Poly2::w());
        let q = s.mul(&s).sub(&r2.mul(&d).mul(&d)).scale(0.25);
        Self { s, d, q }
    }
}

/// Elliptic form in `(u, v)`:
/// `g = 2D (du^2 + dv^2)`,
/// `gbar = (D/Q)^2 [ (S/D)(du^2 + dv^2) - u du^2 - 2v du dv + u dv^2 ]`.
#[derive(Clone, Debug)]
pub struct Elliptic {
    pub polys: BifurcationPolys,
    pub bar: bool,
}

impl Components for Elliptic {
    fn dim(&self) -> usize {
        2
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (u, v) = (x[0], x[1]);
        let w = v * v;
        let d = self.polys.d.eval(u, w);
        if !self.bar {
            let c = d * 2.0;
            return Some(vec![c, S::zero(), S::zero(), c]);
        }
        let s = self.polys.s.eval(u, w);
        let q = self.polys.q.eval(u, w);
        let pre = (d / q) * (d / q);
        let sd = s / d;
        Some(vec![pre * (sd - u), -(pre * v), -(pre * v), pre * (sd + u)])
    }
}

/// Polar forms in `(u, v)`, `r^2 = u^2 + v^2`, `F = f(r^2)`:
/// `g = F (du^2 + dv^2)` and
/// plus:  `gbar = F / (c (c + c r^2 F)^2) [(1 + F v^2) du^2 - 2F uv du dv + (1 + F u^2) dv^2]`,
/// minus: `gbar = F / (c (c - c r^2 F)^2) [(1 - F v^2) du^2 + 2F uv du dv + (1 - F u^2) dv^2]`.
#[derive(Clone, Debug)]
pub struct Polar {
    pub f: ScalarFunction1D,
    pub c: f64,
    /// `+1` for the plus family, `-1` for the minus family.
    pub sign: f64,
    pub bar: bool,
}

impl Components for Polar {
    fn dim(&self) -> usize {
        2
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (u, v) = (x[0], x[1]);
        let r2 = u * u + v * v;
        let f = self.f.eval(r2);
        if !self.bar {
            return Some(vec![f, S::zero(), S::zero(), f]);
        }
        let e = self.sign;
        let k = (r2 * f * e + 1.0) * self.c;
        let pre = f / (k * k * self.c);
        let off = -(pre * f * u * v * e);
        Some(vec![pre * (f * v * v * e + 1.0), off, off, pre * (f * u * u * e + 1.0)])
    }
}
