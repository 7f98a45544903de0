//! Small dense matrix kernels that are generic over [`Scalar`].
//!
//! These exist alongside nalgebra because they must run on dual numbers.
//! Matrices are row-major `Vec<S>` of length `n * n`.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

pub fn identity<S: Scalar>(n: usize) -> Vec<S> {
    let mut m = vec![S::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = S::one();
    }
    m
}

pub fn matmul<S: Scalar>(a: &[S], b: &[S], n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn transpose<S: Scalar>(a: &[S], n: usize) -> Vec<S> {
    let mut t = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn symmetrize<S: Scalar>(a: &mut [S], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (a[i * n + j] + a[j * n + i]) * 0.5;
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
}

/// LU factorisation with partial pivoting (pivot chosen on real parts).
/// Returns `(lu, perm, sign)` or `None` when a pivot vanishes.
fn lu<S: Scalar>(a: &[S], n: usize) -> Option<(Vec<S>, Vec<usize>, f64)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r * n + col].re().abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 || !best.is_finite() {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
            sign = -sign;
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            m[r * n + col] = f;
            for j in (col + 1)..n {
                let v = m[col * n + j];
                m[r * n + j] -= f * v;
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det<S: Scalar>(a: &[S], n: usize) -> S {
    if n == 0 {
        return S::one();
    }
    match lu(a, n) {
        None => S::zero(),
        Some((m, _, sign)) => {
            let mut d = S::cst(sign);
            for i in 0..n {
                d *= m[i * n + i];
            }
            d
        }
    }
}

/// Solves `A X = B` for square `B` (both `n x n`).
pub fn solve<S: Scalar>(a: &[S], b: &[S], n: usize) -> Option<Vec<S>> {
    let (m, perm, _) = lu(a, n)?;
    let mut x = vec![S::zero(); n * n];
    for col in 0..n {
        let mut y: Vec<S> = (0..n).map(|i| b[perm[i] * n + col]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = y[k];
                y[i] -= m[i * n + k] * v;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = y[k];
                y[i] -= m[i * n + k] * v;
            }
            y[i] = y[i] / m[i * n + i];
        }
        for i in 0..n {
            x[i * n + col] = y[i];
        }
    }
    Some(x)
}

pub fn inverse<S: Scalar>(a: &[S], n: usize) -> Option<Vec<S>> {
    solve(a, &identity(n), n)
}

/// Coefficients (ascending) of `det(A - t I)` via Faddeev–LeVerrier.
pub fn char_poly<S: Scalar>(a: &[S], n: usize) -> Vec<S> {
    // p(t) = det(tI - A) = t^n + c_{n-1} t^{n-1} + ... + c_0
    let mut c = vec![S::zero(); n + 1];
    c[n] = S::one();
    let mut m = vec![S::zero(); n * n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = matmul(a, &m, n);
        for i in 0..n {
            next[i * n + i] += c[n - k + 1];
        }
        m = next;
        let am = matmul(a, &m, n);
        let mut tr = S::zero();
        for i in 0..n {
            tr += am[i * n + i];
        }
        c[n - k] = -tr / (k as f64);
    }
    if n % 2 == 1 {
        for v in c.iter_mut() {
            *v = -*v;
        }
    }
    c
}

/// Evaluates the polynomial with ascending `coeffs` at the square matrix `a`
/// (Horner's scheme).
pub fn poly_at_matrix<S: Scalar>(coeffs: &[S], a: &[S], n: usize) -> Vec<S> {
    let mut acc = vec![S::zero(); n * n];
    for &c in coeffs.iter().rev() {
        acc = matmul(&acc, a, n);
        for i in 0..n {
            acc[i * n + i] += c;
        }
    }
    acc
}

pub fn to_dmatrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = m[(i, j)];
        }
    }
    v
}

/// Ascending coefficients of `prod_i (roots_i - t)`.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += r * ck;
            next[k + 1] -= ck;
        }
        c = next;
    }
    c
}
