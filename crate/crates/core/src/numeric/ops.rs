use crate::error::Result;
use crate::numeric::array::{Array, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Mul,
    Sub,
}

#[inline]
pub fn sigmoid<R: Real>(x: R) -> R {
    // Split by sign so exp never overflows.
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

impl Unary {
    #[inline]
    pub fn apply<R: Real>(self, x: R) -> R {
        match self {
            Unary::Sigmoid => sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Relu => x.max(R::zero()),
        }
    }
}

impl Binary {
    #[inline]
    pub fn apply<R: Real>(self, a: R, b: R) -> R {
        match self {
            Binary::Add => a + b,
            Binary::Mul => a * b,
            Binary::Sub => a - b,
        }
    }
}

pub fn unary<R: Real>(kind: Unary, a: &Array<R>) -> Array<R> {
    let data = a.data().iter().map(|&x| kind.apply(x)).collect();
    Array::new(a.shape(), data).expect("same shape")
}

pub fn binary<R: Real>(kind: Binary, a: &Array<R>, b: &Array<R>) -> Result<Array<R>> {
    a.check_same_shape(b, "elementwise")?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| kind.apply(x, y))
        .collect();
    let out = Array::new(a.shape(), data)?;
    out.ensure_finite("elementwise")?;
    Ok(out)
}

/// Max-shifted softmax over a slice, written into `out`.
pub fn softmax_into<R: Real>(v: &[R], out: &mut [R]) {
    let max = v.iter().fold(R::neg_infinity(), |m, &x| m.max(x));
    let mut total = 0.0f64;
    for (o, &x) in out.iter_mut().zip(v) {
        let e = (x - max).exp();
        *o = e;
        total += e.widen();
    }
    let inv = R::narrow(1.0 / total);
    out.iter_mut().for_each(|o| *o *= inv);
}

/// `log(softmax(v))[k]` without forming the distribution.
pub fn log_softmax_at<R: Real>(v: &[R], k: usize) -> f64 {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.widen()));
    let lse: f64 = v.iter().map(|&x| (x.widen() - max).exp()).sum::<f64>().ln() + max;
    v[k].widen() - lse
}

pub fn softmax<R: Real>(v: &Array<R>) -> Array<R> {
    let mut out = vec![R::zero(); v.len()];
    softmax_into(v.data(), &mut out);
    Array::new(v.shape(), out).expect("same shape")
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<R: Real>(v: &[R]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
