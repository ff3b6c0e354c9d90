//! 1-D convolution along time over `T × C` sequences, and its transpose.

use crate::error::{Error, Result};
use crate::nn::param::{Module, Param, ParamKind};
use crate::numeric::{Array, Real, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    c_in: usize,
    c_out: usize,
    width: usize,
    stride: usize,
}

impl Geometry {
    fn out_len(&self, t: usize) -> Option<usize> {
        (t >= self.width).then(|| (t - self.width) / self.stride + 1)
    }

    fn transposed_len(&self, t_out: usize) -> usize {
        (t_out - 1) * self.stride + self.width
    }
}

/// Kernels are laid out `[c_out][c_in][width]`.
fn conv_apply<R: Real>(k: &[R], g: Geometry, x: &[R], t_in: usize) -> Vec<R> {
    let t_out = g.out_len(t_in).expect("caller checked length");
    let mut y = vec![0.0f64; t_out * g.c_out];
    for t in 0..t_out {
        for o in 0..g.c_out {
            let mut acc = 0.0f64;
            for j in 0..g.width {
                let xrow = &x[(t * g.stride + j) * g.c_in..(t * g.stride + j + 1) * g.c_in];
                let kbase = o * g.c_in * g.width + j;
                for (c, &xv) in xrow.iter().enumerate() {
                    acc += k[kbase + c * g.width].widen() * xv.widen();
                }
            }
            y[t * g.c_out + o] = acc;
        }
    }
    y.into_iter().map(R::narrow).collect()
}

fn conv_transpose_apply<R: Real>(k: &[R], g: Geometry, y: &[R], t_out: usize) -> Vec<R> {
    let t_in = g.transposed_len(t_out);
    let mut x = vec![0.0f64; t_in * g.c_in];
    for t in 0..t_out {
        for o in 0..g.c_out {
            let yv = y[t * g.c_out + o].widen();
            if yv == 0.0 {
                continue;
            }
            for j in 0..g.width {
                let base = (t * g.stride + j) * g.c_in;
                for c in 0..g.c_in {
                    x[base + c] += k[o * g.c_in * g.width + c * g.width + j].widen() * yv;
                }
            }
        }
    }
    x.into_iter().map(R::narrow).collect()
}

/// `gk[o][c][j] += Σ_t dy[t][o] · x[t·s + j][c]`
fn accumulate_kernel_grad<R: Real>(gk: &mut [R], g: Geometry, x: &[R], dy: &[R], t_out: usize) {
    for o in 0..g.c_out {
        for c in 0..g.c_in {
            for j in 0..g.width {
                let mut acc = 0.0f64;
                for t in 0..t_out {
                    acc += dy[t * g.c_out + o].widen() * x[(t * g.stride + j) * g.c_in + c].widen();
                }
                gk[o * g.c_in * g.width + c * g.width + j] += R::narrow(acc);
            }
        }
    }
}

/// Valid cross-correlation along time with stride.
#[derive(Debug, Clone)]
pub struct Conv1d<R: Real = f32> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_width: usize,
    pub stride: usize,
    pub kernels: Param<R>,
    pub bias: Param<R>,
}

impl<R: Real> Conv1d<R> {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_width: usize,
        stride: usize,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(in_channels > 0 && out_channels > 0 && kernel_width > 0 && stride > 0);
        Self {
            in_channels,
            out_channels,
            kernel_width,
            stride,
            kernels: Param::glorot(
                format!("{name}.kernels"),
                &[out_channels, in_channels, kernel_width],
                in_channels * kernel_width,
                out_channels * kernel_width,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), ParamKind::Bias, &[out_channels]),
        }
    }

    fn geometry(&self) -> Geometry {
        Geometry {
            c_in: self.in_channels,
            c_out: self.out_channels,
            width: self.kernel_width,
            stride: self.stride,
        }
    }

    pub fn output_len(&self, t: usize) -> Option<usize> {
        self.geometry().out_len(t)
    }

    pub fn transposed_len(&self, t_out: usize) -> usize {
        self.geometry().transposed_len(t_out)
    }

    pub fn forward(&self, x: &[R], t_in: usize) -> Result<Vec<R>> {
        if t_in < self.kernel_width {
            return Err(Error::SequenceTooShort {
                len: t_in,
                kernel: self.kernel_width,
            });
        }
        let mut y = conv_apply(self.kernels.value.data(), self.geometry(), x, t_in);
        let b = self.bias.value.data();
        for row in y.chunks_mut(self.out_channels) {
            for (v, &bo) in row.iter_mut().zip(b) {
                *v += bo;
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &[R], t_in: usize, dy: &[R], g: &mut Self) -> Vec<R> {
        let geo = self.geometry();
        let t_out = geo.out_len(t_in).expect("forward succeeded");
        accumulate_kernel_grad(g.kernels.grad.data_mut(), geo, x, dy, t_out);
        let gb = g.bias.grad.data_mut();
        for row in dy.chunks(self.out_channels) {
            for (gbo, &d) in gb.iter_mut().zip(row) {
                *gbo += d;
            }
        }
        let mut dx = conv_transpose_apply(self.kernels.value.data(), geo, dy, t_out);
        // Trailing steps beyond the last window (possible when stride > 1) receive no gradient.
        dx.resize(t_in * self.in_channels, R::zero());
        dx
    }
}

impl<R: Real> Module<R> for Conv1d<R> {
    fn params(&self) -> Vec<&Param<R>> {
        vec![&self.kernels, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

/// Transposed convolution: maps a `T' × c_out` sequence back to `T × c_in`
/// with `T = (T' − 1)·stride + width`, using kernels shaped like the
/// forward convolution it mirrors.
#[derive(Debug, Clone)]
pub struct ConvTranspose1d<R: Real = f32> {
    /// Channels of the sequence this layer consumes (the mirrored conv's output).
    pub in_channels: usize,
    /// Channels produced (the mirrored conv's input).
    pub out_channels: usize,
    pub kernel_width: usize,
    pub stride: usize,
    pub kernels: Param<R>,
    pub bias: Param<R>,
}

impl<R: Real> ConvTranspose1d<R> {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_width: usize,
        stride: usize,
        rng: &mut SeededRng,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_width,
            stride,
            kernels: Param::glorot(
                format!("{name}.kernels"),
                &[in_channels, out_channels, kernel_width],
                in_channels * kernel_width,
                out_channels * kernel_width,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), ParamKind::Bias, &[out_channels]),
        }
    }

    fn geometry(&self) -> Geometry {
        Geometry {
            c_in: self.out_channels,
            c_out: self.in_channels,
            width: self.kernel_width,
            stride: self.stride,
        }
    }

    pub fn output_len(&self, t: usize) -> usize {
        self.geometry().transposed_len(t)
    }

    pub fn forward(&self, y: &[R], t: usize) -> Vec<R> {
        let mut x = conv_transpose_apply(self.kernels.value.data(), self.geometry(), y, t);
        let b = self.bias.value.data();
        for row in x.chunks_mut(self.out_channels) {
            for (v, &bo) in row.iter_mut().zip(b) {
                *v += bo;
            }
        }
        x
    }

    pub fn backward(&self, y: &[R], t: usize, dx: &[R], g: &mut Self) -> Vec<R> {
        let geo = self.geometry();
        accumulate_kernel_grad(g.kernels.grad.data_mut(), geo, dx, y, t);
        let gb = g.bias.grad.data_mut();
        for row in dx.chunks(self.out_channels) {
            for (gbo, &d) in gb.iter_mut().zip(row) {
                *gbo += d;
            }
        }
        conv_apply(
            self.kernels.value.data(),
            geo,
            dx,
            geo.transposed_len(t),
        )
    }
}

impl<R: Real> Module<R> for ConvTranspose1d<R> {
    fn params(&self) -> Vec<&Param<R>> {
        vec![&self.kernels, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

fn check_seq<R: Real>(seq: &Array<R>, channels: usize, op: &'static str) -> Result<usize> {
    if seq.shape().len() != 2 || seq.cols() != channels {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![seq.rows(), channels],
            found: seq.shape().to_vec(),
        });
    }
    Ok(seq.rows())
}

/// `T × C_in → T' × C_out`, bias included.
pub fn conv1d<R: Real>(p: &Conv1d<R>, seq: &Array<R>) -> Result<Array<R>> {
    let t = check_seq(seq, p.in_channels, "conv1d")?;
    let y = p.forward(seq.data(), t)?;
    let out = Array::new(&[p.output_len(t).unwrap(), p.out_channels], y)?;
    out.ensure_finite("conv1d")?;
    Ok(out)
}

/// Adjoint of the linear part of [`conv1d`]: `T' × C_out → T × C_in`, bias excluded.
pub fn conv1d_transpose<R: Real>(p: &Conv1d<R>, seq: &Array<R>) -> Result<Array<R>> {
    let t_out = check_seq(seq, p.out_channels, "conv1d_transpose")?;
    let x = conv_transpose_apply(p.kernels.value.data(), p.geometry(), seq.data(), t_out);
    let out = Array::new(&[p.transposed_len(t_out), p.in_channels], x)?;
    out.ensure_finite("conv1d_transpose")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::dot;

    fn naive_conv(p: &Conv1d<f64>, x: &Array<f64>) -> Array<f64> {
        let (t, cin) = (x.rows(), x.cols());
        let t_out = (t - p.kernel_width) / p.stride + 1;
        let k = p.kernels.value.data();
        let mut y = vec![0.0; t_out * p.out_channels];
        for s in 0..t_out {
            for o in 0..p.out_channels {
                let mut v = p.bias.value.data()[o];
                for j in 0..p.kernel_width {
                    for c in 0..cin {
                        v += k[(o * cin + c) * p.kernel_width + j] * x.get(s * p.stride + j, c);
                    }
                }
                y[s * p.out_channels + o] = v;
            }
        }
        Array::new(&[t_out, p.out_channels], y).unwrap()
    }

    fn random_seq(rng: &mut SeededRng, t: usize, c: usize) -> Array<f64> {
        Array::new(&[t, c], (0..t * c).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn width_one_selects_channel() {
        let mut rng = SeededRng::new(0);
        let mut p = Conv1d::<f64>::new("c", 3, 1, 1, 1, &mut rng);
        p.kernels.value.data_mut().copy_from_slice(&[0.0, 1.0, 0.0]);
        let x = random_seq(&mut rng, 5, 3);
        let y = conv1d(&p, &x).unwrap();
        for t in 0..5 {
            assert_eq!(y.get(t, 0), x.get(t, 1));
        }
    }

    #[test]
    fn averaging_kernel_on_constant_input() {
        let mut rng = SeededRng::new(0);
        let mut p = Conv1d::<f32>::new("c", 1, 1, 3, 1, &mut rng);
        p.kernels.value.fill(1.0 / 3.0);
        let x = Array::filled(&[8, 1], 2.5f32);
        let y = conv1d(&p, &x).unwrap();
        assert_eq!(y.shape(), &[6, 1]);
        assert!(y.data().iter().all(|v| (v - 2.5).abs() < 1e-6));
    }

    #[test]
    fn too_short_sequence() {
        let mut rng = SeededRng::new(0);
        let p = Conv1d::<f32>::new("c", 2, 2, 4, 1, &mut rng);
        let x = Array::<f32>::zeros(&[3, 2]);
        assert!(matches!(
            conv1d(&p, &x),
            Err(Error::SequenceTooShort { len: 3, kernel: 4 })
        ));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = SeededRng::new(9);
        for &(cin, cout, w, s, t) in &[(6, 16, 3, 1, 25), (3, 4, 2, 2, 11), (2, 5, 4, 3, 13)] {
            let mut p = Conv1d::<f64>::new("c", cin, cout, w, s, &mut rng);
            for b in p.bias.value.data_mut() {
                *b = rng.uniform(-0.5, 0.5);
            }
            let x = random_seq(&mut rng, t, cin);
            let fast = conv1d(&p, &x).unwrap();
            let slow = naive_conv(&p, &x);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = SeededRng::new(21);
        for &(cin, cout, w, s, t) in &[(6, 16, 3, 1, 25), (3, 4, 2, 2, 11), (5, 2, 3, 2, 9)] {
            let mut p = Conv1d::<f64>::new("c", cin, cout, w, s, &mut rng);
            p.bias.value.fill(0.0);
            let x = random_seq(&mut rng, t, cin);
            let cx = conv1d(&p, &x).unwrap();
            let y = random_seq(&mut rng, cx.rows(), cout);
            let cty = conv1d_transpose(&p, &y).unwrap();
            // Transposed length may exceed t when (t - w) is not a multiple of the stride.
            let lhs = dot(cx.data(), y.data());
            let rhs = dot(&x.data()[..cty.rows().min(t) * cin], &cty.data()[..cty.rows().min(t) * cin]);
            assert!((lhs - rhs).abs() < 1e-5 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn width_one_transpose_is_matrix_transpose() {
        let mut rng = SeededRng::new(4);
        let p = Conv1d::<f64>::new("c", 3, 2, 1, 1, &mut rng);
        let y = random_seq(&mut rng, 4, 2);
        let x = conv1d_transpose(&p, &y).unwrap();
        let k = p.kernels.value.data();
        for t in 0..4 {
            for c in 0..3 {
                let expect = k[c] * y.get(t, 0) + k[3 + c] * y.get(t, 1);
                assert!((x.get(t, c) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_geometry_round_trips_window_length() {
        let mut rng = SeededRng::new(1);
        let c1 = Conv1d::<f32>::new("a", 6, 16, 3, 1, &mut rng);
        let c2 = Conv1d::<f32>::new("b", 16, 32, 3, 1, &mut rng);
        let t2 = c2.output_len(c1.output_len(25).unwrap()).unwrap();
        assert_eq!(t2, 21);
        let t1 = ConvTranspose1d::<f32>::new("bt", 32, 16, 3, 1, &mut rng).output_len(t2);
        let t0 = ConvTranspose1d::<f32>::new("at", 16, 6, 3, 1, &mut rng).output_len(t1);
        assert_eq!(t0, 25);
    }
}
