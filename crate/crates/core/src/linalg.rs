//! Small dense complex linear algebra, generic over the working precision.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cdiv, norm_sqr, to_c64, Scalar};

/// Square row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<S> {
    n: usize,
    data: Vec<Complex<S>>,
}

impl<S: Scalar> CMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(S::zero(), S::zero()); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex<S>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<S> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<S>) {
        self.data[i * self.n + j] = v;
    }

    pub fn to_f64(&self) -> CMatrix<f64> {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&z| to_c64(z)).collect(),
        }
    }

    /// Induced 1-norm (max column sum of moduli), in `f64`.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                (0..self.n)
                    .map(|i| to_c64(self.get(i, j)).norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_diag_re(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i).re.to_f64())
            .fold(0.0, f64::max)
    }

    /// Cholesky factor `L` of a Hermitian positive definite matrix, `A = L L*`.
    ///
    /// A pivot at or below `n * eps * max_diag` is reported as a breakdown at
    /// that row's degree.
    pub fn cholesky(&self) -> Result<CMatrix<S>> {
        let n = self.n;
        let threshold = (n.max(1) as f64) * S::EPS * self.max_diag_re();
        let mut l = CMatrix::<S>::zeros(n);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d = d - norm_sqr(l.get(j, k));
            }
            let pivot = d.to_f64();
            if !(pivot > threshold) {
                return Err(Error::Degenerate {
                    degree: j,
                    pivot,
                    threshold,
                });
            }
            let ljj = d.sqrt();
            l.set(j, j, Complex::new(ljj, S::zero()));
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, Complex::new(s.re.quot(ljj), s.im.quot(ljj)));
            }
        }
        Ok(l)
    }

    /// Inverse of a lower-triangular matrix with nonzero diagonal.
    pub fn lower_inverse(&self) -> CMatrix<S> {
        let n = self.n;
        let mut x = CMatrix::<S>::zeros(n);
        let one = Complex::new(S::one(), S::zero());
        for j in 0..n {
            x.set(j, j, cdiv(one, self.get(j, j)));
            for i in (j + 1)..n {
                let mut s = Complex::new(S::zero(), S::zero());
                for k in j..i {
                    s = s + self.get(i, k) * x.get(k, j);
                }
                x.set(i, j, -cdiv(s, self.get(i, i)));
            }
        }
        x
    }

    /// `log|det A|` and the unit phase of `det A`, by LU with partial pivoting.
    /// A singular matrix gives `log_abs = -inf`.
    pub fn log_det(&self) -> LogDet {
        let n = self.n;
        let mut a = self.clone();
        let mut log_abs = 0.0;
        let mut phase = Complex::new(1.0, 0.0);
        for k in 0..n {
            let mut p = k;
            let mut best = norm_sqr(a.get(k, k));
            for i in (k + 1)..n {
                let v = norm_sqr(a.get(i, k));
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == S::zero() {
                return LogDet {
                    log_abs: f64::NEG_INFINITY,
                    phase: Complex::new(0.0, 0.0),
                };
            }
            if p != k {
                for j in 0..n {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(p, j));
                    a.set(p, j, t);
                }
                phase = -phase;
            }
            let pivot = a.get(k, k);
            let modulus = best.sqrt();
            log_abs += modulus.ln_f64();
            let unit = to_c64(Complex::new(pivot.re.quot(modulus), pivot.im.quot(modulus)));
            phase *= unit;
            for i in (k + 1)..n {
                let f = cdiv(a.get(i, k), pivot);
                if f.re == S::zero() && f.im == S::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        LogDet { log_abs, phase }
    }
}

/// Logarithmic representation of a complex determinant: `det = exp(log_abs) * phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: Complex<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use twofloat::TwoFloat;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn cholesky_reconstructs_hermitian_matrix() {
        let a = CMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 0) => c(4.0, 0.0),
            (1, 1) => c(5.0, 0.0),
            (2, 2) => c(6.0, 0.0),
            (0, 1) => c(1.0, 1.0),
            (1, 0) => c(1.0, -1.0),
            (1, 2) => c(0.0, 2.0),
            (2, 1) => c(0.0, -2.0),
            _ => c(0.5, 0.0),
        });
        let l = a.cholesky().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = c(0.0, 0.0);
                for k in 0..3 {
                    s += l.get(i, k) * l.get(j, k).conj();
                }
                assert!((s - a.get(i, j)).norm() < 1e-13);
            }
        }
        let li = l.lower_inverse();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = c(0.0, 0.0);
                for k in 0..3 {
                    s += li.get(i, k) * l.get(k, j);
                }
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((s - c(id, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_reports_failing_degree() {
        // rank 2
        let a = CMatrix::from_fn(3, |i, j| c(1.0 + (i * j) as f64, 0.0));
        match a.cholesky() {
            Err(Error::Degenerate { degree, .. }) => assert_eq!(degree, 2),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn log_det_of_permutation_and_diagonal() {
        let a = CMatrix::from_fn(2, |i, j| if i != j { c(0.0, 2.0) } else { c(0.0, 0.0) });
        // det = -(2i)(2i) = 4
        let d = a.log_det();
        assert!((d.log_abs - 4f64.ln()).abs() < 1e-15);
        assert!((d.phase - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn extended_log_det_agrees_with_double() {
        let a = CMatrix::<f64>::from_fn(4, |i, j| c(1.0 / (i + j + 1) as f64, 0.0));
        let b = CMatrix::<TwoFloat>::from_fn(4, |i, j| {
            Complex::new(
                TwoFloat::from(1.0) / ((i + j + 1) as f64),
                TwoFloat::from(0.0),
            )
        });
        // det of the 4x4 Hilbert matrix is 1/6048000
        let exact = (1.0f64 / 6_048_000.0).ln();
        assert!((a.log_det().log_abs - exact).abs() < 1e-11);
        assert!((b.log_det().log_abs - exact).abs() < 1e-14);
    }
}
