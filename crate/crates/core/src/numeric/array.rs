use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type for arrays and model parameters.
///
/// Models train in `f32`; gradient verification instantiates the same code
/// with `f64`. Reductions widen to `f64` regardless of the element type.
pub trait Real:
    Float
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    fn widen(self) -> f64;
    fn narrow(v: f64) -> Self;
}

impl Real for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v
    }
}

/// Dense row-major array.
#[derive(Clone, PartialEq)]
pub struct Array<R = f32> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> Array<R> {
    pub fn new(shape: &[usize], data: Vec<R>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Panics on a zero extent; intended for shapes fixed by configuration.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, R::zero())
    }

    pub fn filled(shape: &[usize], value: R) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "array extents must be positive: {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(data: Vec<R>) -> Result<Self> {
        let n = data.len();
        Self::new(&[n], data)
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::data("ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(&[rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Extent of the trailing axis of a 2-D array.
    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, r: usize) -> &[R] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> R {
        self.data[r * self.cols() + c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) || shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                expected: self.shape.clone(),
                found: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn fill(&mut self, value: R) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|&x| x.widen() * x.widen()).sum()
    }

    pub fn cast<S: Real>(&self) -> Array<S> {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| S::narrow(x.widen())).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }
}

impl<R: Real> Debug for Array<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Array")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

/// Dot product with `f64` accumulation.
#[inline]
pub fn dot<R: Real>(a: &[R], b: &[R]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = i * 4;
        acc[0] += a[k].widen() * b[k].widen();
        acc[1] += a[k + 1].widen() * b[k + 1].widen();
        acc[2] += a[k + 2].widen() * b[k + 2].widen();
        acc[3] += a[k + 3].widen() * b[k + 3].widen();
    }
    let mut tail = 0.0;
    for k in chunks * 4..a.len() {
        tail += a[k].widen() * b[k].widen();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
