//! Three-dimensional normal forms: the axial family (one eigenvalue constant
//! and equal to 1) and the full bifurcation family around a point where all
//! three eigenvalues coincide.

use super::two_d::BifurcationPolys;
use crate::charts::Components;
use crate::poly::{Poly2, ScalarFunction1D};
use crate::scalar::Scalar;

/// Axial family in `(x1, x2, x3)` with `r^2 = x2^2 + x3^2`, `F = f(r^2)`,
/// `W = 1 + r^2 F`, `l = lambda_1(x1) < 1`:
///
/// ```text
/// g    = (l-1)(l-1-r^2 F) dx1^2
///        + F [(1 - l + x2^2 F) dx2^2 + 2 F x2 x3 dx2 dx3 + (1 - l + x3^2 F) dx3^2]
/// gbar = (l-1)(l-1-r^2 F)/(l^2 W) dx1^2
///        + F/(l W) [(1 - l(1 + x3^2 F)/W) dx2^2 + 2 l F x2 x3/W dx2 dx3
///                   + (1 - l(1 + x2^2 F)/W) dx3^2]
/// ```
///
/// `L = diag(l) (+) (I + F x x^T)` on the `(x2, x3)` block, so the spectrum is
/// `(l, 1, 1 + r^2 F)`.
#[derive(Clone, Debug)]
pub struct Axial {
    pub f: ScalarFunction1D,
    pub lambda1: ScalarFunction1D,
    pub bar: bool,
}

impl Components for Axial {
    fn dim(&self) -> usize {
        3
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let r2 = x2 * x2 + x3 * x3;
        let f = self.f.eval(r2);
        let l = self.lambda1.eval(x1);
        let a11 = (l - 1.0) * (l - 1.0 - r2 * f);
        let mut m = vec![S::zero(); 9];
        if !self.bar {
            m[0] = a11;
            m[4] = f * (-l + 1.0 + x2 * x2 * f);
            m[8] = f * (-l + 1.0 + x3 * x3 * f);
            m[5] = f * f * x2 * x3;
        } else {
            let w = r2 * f + 1.0;
            let pre = f / (l * w);
            m[0] = a11 / (l * l * w);
            m[4] = pre * (-(l * (x3 * x3 * f + 1.0) / w) + 1.0);
            m[8] = pre * (-(l * (x2 * x2 * f + 1.0) / w) + 1.0);
            m[5] = pre * l * f * x2 * x3 / w;
        }
        m[7] = m[5];
        Some(m)
    }
}

/// Full family in `(u1, u2, u3)` with `w = u2^2 + u3^2`, `r^2 = u1^2 + w`,
/// `lam_pm = lambda(u1 +- r)`, `l0 = lambda(0)`, and `P = (l0 - lam_-)(lam_+ - l0)`:
///
/// ```text
/// g    = 2D (du1^2 + dR^2) + C P dphi^2
/// gbar = (1/l0) (D/Q)^2 [ (S/D)(du1^2 + dR^2) - u1 du1^2 - 2R du1 dR + u1 dR^2 ]
///        + C P / (l0^2 Q) dphi^2
/// ```
///
/// in cylindrical coordinates `(u1, R, phi)` around the `u1` axis. Written in
/// Cartesian components with `a = u3 du2 - u2 du3` (so `R^2 dphi^2 = a^2 / w`
/// and `dR^2 = du2^2 + du3^2 - a^2 / w`). `P` vanishes on the axis, so `P / w`
/// is a polynomial. The angular coefficients carry a further `1/w`, which is
/// removable exactly when `C = 4 / lambda'(0)`; otherwise the metrics have a
/// conical singularity along the axis and the axial limit is used there.
#[derive(Clone, Debug)]
pub struct Full {
    pub polys: BifurcationPolys,
    pub l0: f64,
    pub c: f64,
    /// Numerator of the `g` angular coefficient, `C P/w - 2D`.
    ang_g: Poly2,
    /// Numerator of the `gbar` angular coefficient, multiplied by `Q^2`.
    ang_gb: Poly2,
    /// Whether both angular numerators vanish on the axis (then divided by `w`).
    pub smooth: bool,
    pub bar: bool,
}

impl Full {
    pub fn new(lam: &ScalarFunction1D, c: f64, bar: bool) -> Self {
        let polys = BifurcationPolys::new(lam);
        let l0 = lam.eval(0.0);
        // P = l0 S - l0^2 - Q
        let p = polys.s.scale(l0).sub(&Poly2::constant(l0 * l0)).sub(&polys.q);
        let (pt, _) = p.div_w();
        let ang_g = pt.scale(c).sub(&polys.d.scale(2.0));
        // C P~ Q / l0^2 - D (S + u1 D) / l0
        let ang_gb = pt
            .mul(&polys.q)
            .scale(c / (l0 * l0))
            .sub(&polys.d.mul(&polys.s.add(&Poly2::u().mul(&polys.d))).scale(1.0 / l0));
        let (g_div, rg) = ang_g.div_w();
        let (gb_div, rgb) = ang_gb.div_w();
        let smooth = rg <= 1e-12 * ang_g.max_abs_coeff() && rgb <= 1e-12 * ang_gb.max_abs_coeff();
        let (ang_g, ang_gb) = if smooth { (g_div, gb_div) } else { (ang_g, ang_gb) };
        Self { polys, l0, c, ang_g, ang_gb, smooth, bar }
    }
}

impl Components for Full {
    fn dim(&self) -> usize {
        3
    }
    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let (u1, u2, u3) = (x[0], x[1], x[2]);
        let w = u2 * u2 + u3 * u3;
        let d = self.polys.d.eval(u1, w);
        let mut m = vec![S::zero(); 9];
        let ang = [S::zero(), u3, -u2];
        let coef;
        if !self.bar {
            let k = d * 2.0;
            m[0] = k;
            m[4] = k;
            m[8] = k;
            let num = self.ang_g.eval(u1, w);
            coef = if self.smooth {
                Some(num)
            } else if w.re() > 0.0 {
                Some(num / w)
            } else {
                None
            };
        } else {
            let s = self.polys.s.eval(u1, w);
            let q = self.polys.q.eval(u1, w);
            let pre = (d / q) * (d / q) / self.l0;
            let sd = s / d;
            m[0] = pre * (sd - u1);
            m[4] = pre * (sd + u1);
            m[8] = m[4];
            m[1] = -(pre * u2);
            m[2] = -(pre * u3);
            m[3] = m[1];
            m[6] = m[2];
            let num = self.ang_gb.eval(u1, w) / (q * q);
            coef = if self.smooth {
                Some(num)
            } else if w.re() > 0.0 {
                Some(num / w)
            } else {
                None
            };
        }
        if let Some(c) = coef {
            for i in 1..3 {
                for j in 1..3 {
                    m[i * 3 + j] += c * ang[i] * ang[j];
                }
            }
        }
        Some(m)
    }
}
