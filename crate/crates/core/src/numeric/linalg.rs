//! Matrix product and the Cholesky route used to apply inverse covariances.

use crate::error::{Error, Result};
use crate::numeric::array::{dot, Array, Real};

/// Pivots at or below this fraction of the largest diagonal entry count as
/// non-positive. Rank-deficient covariances leave round-off sized pivots
/// rather than exact zeros.
pub const PIVOT_RTOL: f64 = 1e-10;

pub fn matmul<R: Real>(a: &Array<R>, b: &Array<R>) -> Result<Array<R>> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            expected: a.shape().to_vec(),
            found: b.shape().to_vec(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut acc = vec![0.0f64; m * n];
    for i in 0..m {
        let out = &mut acc[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a.data()[i * k + p].widen();
            let brow = &b.data()[p * n..(p + 1) * n];
            for (o, &bv) in out.iter_mut().zip(brow) {
                *o += aip * bv.widen();
            }
        }
    }
    let out = Array::new(&[m, n], acc.into_iter().map(R::narrow).collect())?;
    out.ensure_finite("matmul")?;
    Ok(out)
}

pub fn transpose<R: Real>(a: &Array<R>) -> Array<R> {
    let (m, n) = (a.rows(), a.cols());
    let mut data = vec![R::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            data[j * m + i] = a.data()[i * n + j];
        }
    }
    Array::new(&[n, m], data).expect("transpose preserves element count")
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    lower: Array<f64>,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower_triangular(&self) -> &Array<f64> {
        &self.lower
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> Array<f64> {
        let d = self.dim;
        let l = self.lower.data();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let s = dot(&l[i * d..i * d + j + 1], &l[j * d..j * d + j + 1]);
                out[i * d + j] = s;
                out[j * d + i] = s;
            }
        }
        Array::new(&[d, d], out).expect("square")
    }

    /// Solves `L·y = b`.
    pub fn forward_substitute(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(b.len())?;
        let d = self.dim;
        let l = self.lower.data();
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s = dot(&l[i * d..i * d + i], &y[..i]);
            y[i] = (b[i] - s) / l[i * d + i];
        }
        Ok(y)
    }

    /// Solves `Lᵀ·x = y`.
    pub fn back_substitute(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        let d = self.dim;
        let l = self.lower.data();
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = 0.0;
            for k in i + 1..d {
                s += l[k * d + i] * x[k];
            }
            x[i] = (y[i] - s) / l[i * d + i];
        }
        Ok(x)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::ShapeMismatch {
                op: "spd solve",
                expected: vec![self.dim],
                found: vec![n],
            });
        }
        Ok(())
    }
}

/// Cholesky factorization `m = L·Lᵀ`, accumulated in `f64`.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky<R: Real>(m: &Array<R>) -> Result<SpdFactor> {
    if m.shape().len() != 2 || m.rows() != m.cols() {
        return Err(Error::ShapeMismatch {
            op: "cholesky",
            expected: vec![m.rows(), m.rows()],
            found: m.shape().to_vec(),
        });
    }
    let d = m.rows();
    let a: Vec<f64> = m.data().iter().map(|x| x.widen()).collect();
    let max_diag = (0..d).map(|i| a[i * d + i].abs()).fold(0.0f64, f64::max);
    let floor = max_diag * PIVOT_RTOL;
    let mut l = vec![0.0f64; d * d];
    for j in 0..d {
        let s = dot(&l[j * d..j * d + j], &l[j * d..j * d + j]);
        let pivot = a[j * d + j] - s;
        if !(pivot > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let s = dot(&l[i * d..i * d + j], &l[j * d..j * d + j]);
            l[i * d + j] = (a[i * d + j] - s) / ljj;
        }
    }
    Ok(SpdFactor {
        dim: d,
        lower: Array::new(&[d, d], l)?,
    })
}

/// Solves `(L·Lᵀ)·x = b` by forward then back substitution.
pub fn solve_spd<R: Real>(f: &SpdFactor, b: &Array<R>) -> Result<Array<f64>> {
    let bw: Vec<f64> = b.data().iter().map(|x| x.widen()).collect();
    let y = f.forward_substitute(&bw)?;
    let x = f.back_substitute(&y)?;
    Array::from_vec(x)
}
