//! Strided 1-D convolution and its transpose, lowered to GEMM via im2col.
//!
//! Convolution is cross-correlation (no kernel flip). Positions outside
//! `[0, len)` read as zero.

use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Real, Tensor3};

/// Filter bank shared by [`conv1d_forward`] and [`transposed_conv1d_forward`].
///
/// `weights` is laid out `(out_channels, in_channels, kernel_size)` in the
/// orientation of the forward convolution. The transposed convolution with
/// the same params maps `out_channels` back to `in_channels`, so `bias` has
/// one entry per output channel of whichever operation the params drive.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor3<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    /// All-zero filter bank with a bias sized for the forward convolution.
    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize, stride: usize, padding: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_size,
            stride,
            padding,
            weights: vec![T::zero(); out_channels * in_channels * kernel_size],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn weight(&self, o: usize, i: usize, k: usize) -> T {
        self.weights[(o * self.in_channels + i) * self.kernel_size + k]
    }

    fn check_geometry(&self) -> Result<()> {
        if self.kernel_size == 0 || self.out_channels == 0 || self.in_channels == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "convolution needs kernel, channels and stride >= 1 (kernel {}, out {}, in {}, stride {})",
                self.kernel_size, self.out_channels, self.in_channels, self.stride
            )));
        }
        let expected = self.out_channels * self.in_channels * self.kernel_size;
        if self.weights.len() != expected {
            return Err(Error::ShapeMismatch {
                dimension: "weights",
                expected,
                actual: self.weights.len(),
            });
        }
        Ok(())
    }

    fn check_bias(&self, expected: usize) -> Result<()> {
        if self.bias.len() != expected {
            return Err(Error::ShapeMismatch {
                dimension: "bias",
                expected,
                actual: self.bias.len(),
            });
        }
        Ok(())
    }
}

/// `floor((len + 2p - k) / s) + 1`, or `None` when no window fits.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || len == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Smallest input length whose convolution output has at least `out_len` positions.
pub fn conv_min_input_len(out_len: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    ((out_len.max(1) - 1) * stride + kernel)
        .saturating_sub(2 * padding)
        .max(1)
}

/// `(len - 1) * s - 2p + k`, or `None` when that is below one.
pub fn transposed_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if len == 0 || stride == 0 {
        return None;
    }
    let full = (len - 1) * stride + kernel;
    if full <= 2 * padding {
        return None;
    }
    Some(full - 2 * padding)
}

/// Smallest input length whose transposed convolution output has at least `out_len` positions.
pub fn transposed_min_input_len(out_len: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    let need = out_len.max(1) + 2 * padding;
    if need <= kernel {
        1
    } else {
        (need - kernel).div_ceil(stride) + 1
    }
}

/// Range of output positions `t` for which `t*stride + k - padding` lands in `[0, len)`.
#[inline]
fn valid_range(t_count: usize, len: usize, k: usize, stride: usize, padding: usize) -> (usize, usize) {
    let lo = if padding > k { (padding - k).div_ceil(stride) } else { 0 };
    // largest t with t*s + k - p <= len - 1
    let hi = if len + padding > k {
        (len + padding - k - 1) / stride + 1
    } else {
        0
    };
    (lo.min(t_count), hi.min(t_count).max(lo.min(t_count)))
}

/// Lowers one `(channels, len)` plane into `(channels * kernel, t_count)` columns.
fn im2col<T: Real>(
    x: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    t_count: usize,
    cols: &mut [T],
) {
    for c in 0..channels {
        let src = &x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &mut cols[(c * kernel + k) * t_count..(c * kernel + k + 1) * t_count];
            let (lo, hi) = valid_range(t_count, len, k, stride, padding);
            row[..lo].fill(T::zero());
            row[hi..].fill(T::zero());
            if hi > lo {
                let start = lo * stride + k - padding;
                if stride == 1 {
                    row[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                } else {
                    for (dst, s) in row[lo..hi].iter_mut().zip(src[start..].iter().step_by(stride)) {
                        *dst = *s;
                    }
                }
            }
        }
    }
}

/// Scatter-adds columns back into a `(channels, len)` plane; adjoint of [`im2col`].
fn col2im<T: Real>(
    cols: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    t_count: usize,
    x: &mut [T],
) {
    for c in 0..channels {
        let dst = &mut x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &cols[(c * kernel + k) * t_count..(c * kernel + k + 1) * t_count];
            let (lo, hi) = valid_range(t_count, len, k, stride, padding);
            if hi > lo {
                let start = lo * stride + k - padding;
                for (d, &s) in dst[start..].iter_mut().step_by(stride).zip(&row[lo..hi]) {
                    *d += s;
                }
            }
        }
    }
}

fn check_channels(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            dimension: "input channels",
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn conv1d_forward<T: Real>(input: &Tensor3<T>, params: &ConvParams<T>) -> Result<Tensor3<T>> {
    params.check_geometry()?;
    params.check_bias(params.out_channels)?;
    let (batch, channels, len) = input.shape();
    check_channels(params.in_channels, channels)?;
    let (k, s, p) = (params.kernel_size, params.stride, params.padding);
    let out_len = conv_output_len(len, k, s, p).ok_or(Error::InputTooShort {
        length: len,
        min_length: conv_min_input_len(1, k, s, p),
    })?;

    let rows = channels * k;
    let mut cols = vec![T::zero(); rows * out_len];
    let mut out = Tensor3::zeros(batch, params.out_channels, out_len);
    let w = MatRef::new(&params.weights, params.out_channels, rows);
    for b in 0..batch {
        im2col(input.item(b), channels, len, k, s, p, out_len, &mut cols);
        let plane = out.item_mut(b);
        for (o, &bias) in params.bias.iter().enumerate() {
            plane[o * out_len..(o + 1) * out_len].fill(bias);
        }
        gemm(T::one(), w, MatRef::new(&cols, rows, out_len), T::one(), plane);
    }
    Ok(out)
}

pub fn conv1d_backward<T: Real>(
    input: &Tensor3<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor3<T>,
) -> Result<ConvGrads<T>> {
    let (gi, gw, gb) = conv1d_backward_impl(input, params, grad_out, true)?;
    Ok(ConvGrads {
        input: gi.expect("requested input gradient"),
        weights: gw,
        bias: gb,
    })
}

/// Backward pass that can skip the input gradient (first layer of a network).
pub(crate) fn conv1d_backward_impl<T: Real>(
    input: &Tensor3<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor3<T>,
    need_input: bool,
) -> Result<(Option<Tensor3<T>>, Vec<T>, Vec<T>)> {
    params.check_geometry()?;
    params.check_bias(params.out_channels)?;
    let (batch, channels, len) = input.shape();
    check_channels(params.in_channels, channels)?;
    let (k, s, p) = (params.kernel_size, params.stride, params.padding);
    let out_len = conv_output_len(len, k, s, p).ok_or(Error::InputTooShort {
        length: len,
        min_length: conv_min_input_len(1, k, s, p),
    })?;
    check_grad_shape(grad_out, (batch, params.out_channels, out_len))?;

    let rows = channels * k;
    let mut cols = vec![T::zero(); rows * out_len];
    let mut grad_w = vec![T::zero(); params.weights.len()];
    let mut grad_b = vec![T::zero(); params.out_channels];
    let mut grad_in = need_input.then(|| Tensor3::zeros(batch, channels, len));
    let w = MatRef::new(&params.weights, params.out_channels, rows);
    for b in 0..batch {
        let g = grad_out.item(b);
        for (o, gb) in grad_b.iter_mut().enumerate() {
            *gb += g[o * out_len..(o + 1) * out_len].iter().copied().sum::<T>();
        }
        let g = MatRef::new(g, params.out_channels, out_len);
        im2col(input.item(b), channels, len, k, s, p, out_len, &mut cols);
        gemm(
            T::one(),
            g,
            MatRef::new(&cols, rows, out_len).t(),
            T::one(),
            &mut grad_w,
        );
        if let Some(gi) = grad_in.as_mut() {
            gemm(T::one(), w.t(), g, T::zero(), &mut cols);
            col2im(&cols, channels, len, k, s, p, out_len, gi.item_mut(b));
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Fractionally strided convolution: maps `params.out_channels` input
/// channels to `params.in_channels` output channels. With zero bias it is
/// the exact adjoint of [`conv1d_forward`] under the same params.
pub fn transposed_conv1d_forward<T: Real>(input: &Tensor3<T>, params: &ConvParams<T>) -> Result<Tensor3<T>> {
    params.check_geometry()?;
    params.check_bias(params.in_channels)?;
    let (batch, channels, len) = input.shape();
    check_channels(params.out_channels, channels)?;
    let (k, s, p) = (params.kernel_size, params.stride, params.padding);
    let out_len = transposed_output_len(len, k, s, p).ok_or(Error::InputTooShort {
        length: len,
        min_length: transposed_min_input_len(1, k, s, p),
    })?;

    let rows = params.in_channels * k;
    let mut cols = vec![T::zero(); rows * len];
    let mut out = Tensor3::zeros(batch, params.in_channels, out_len);
    let w = MatRef::new(&params.weights, params.out_channels, rows);
    for b in 0..batch {
        gemm(
            T::one(),
            w.t(),
            MatRef::new(input.item(b), channels, len),
            T::zero(),
            &mut cols,
        );
        let plane = out.item_mut(b);
        for (c, &bias) in params.bias.iter().enumerate() {
            plane[c * out_len..(c + 1) * out_len].fill(bias);
        }
        col2im(&cols, params.in_channels, out_len, k, s, p, len, plane);
    }
    Ok(out)
}

pub fn transposed_conv1d_backward<T: Real>(
    input: &Tensor3<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor3<T>,
) -> Result<ConvGrads<T>> {
    params.check_geometry()?;
    params.check_bias(params.in_channels)?;
    let (batch, channels, len) = input.shape();
    check_channels(params.out_channels, channels)?;
    let (k, s, p) = (params.kernel_size, params.stride, params.padding);
    let out_len = transposed_output_len(len, k, s, p).ok_or(Error::InputTooShort {
        length: len,
        min_length: transposed_min_input_len(1, k, s, p),
    })?;
    check_grad_shape(grad_out, (batch, params.in_channels, out_len))?;

    let rows = params.in_channels * k;
    let mut cols = vec![T::zero(); rows * len];
    let mut grad_w = vec![T::zero(); params.weights.len()];
    let mut grad_b = vec![T::zero(); params.in_channels];
    let mut grad_in = Tensor3::zeros(batch, channels, len);
    let w = MatRef::new(&params.weights, params.out_channels, rows);
    for b in 0..batch {
        let g = grad_out.item(b);
        for (c, gb) in grad_b.iter_mut().enumerate() {
            *gb += g[c * out_len..(c + 1) * out_len].iter().copied().sum::<T>();
        }
        im2col(g, params.in_channels, out_len, k, s, p, len, &mut cols);
        let cols_m = MatRef::new(&cols, rows, len);
        gemm(T::one(), w, cols_m, T::zero(), grad_in.item_mut(b));
        gemm(
            T::one(),
            MatRef::new(input.item(b), channels, len),
            cols_m.t(),
            T::one(),
            &mut grad_w,
        );
    }
    Ok(ConvGrads {
        input: grad_in,
        weights: grad_w,
        bias: grad_b,
    })
}

fn check_grad_shape<T: Real>(grad: &Tensor3<T>, expected: (usize, usize, usize)) -> Result<()> {
    let (b, c, l) = grad.shape();
    for (dimension, e, a) in [
        ("grad batch", expected.0, b),
        ("grad channels", expected.1, c),
        ("grad length", expected.2, l),
    ] {
        if e != a {
            return Err(Error::ShapeMismatch {
                dimension,
                expected: e,
                actual: a,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor3<f64>, p: &ConvParams<f64>) -> Tensor3<f64> {
        let (batch, _, len) = x.shape();
        let out_len = conv_output_len(len, p.kernel_size, p.stride, p.padding).unwrap();
        let mut out = Tensor3::zeros(batch, p.out_channels, out_len);
        for b in 0..batch {
            for o in 0..p.out_channels {
                for t in 0..out_len {
                    let mut acc = p.bias[o];
                    for i in 0..p.in_channels {
                        for k in 0..p.kernel_size {
                            let pos = (t * p.stride + k) as isize - p.padding as isize;
                            if pos >= 0 && (pos as usize) < len {
                                acc += p.weight(o, i, k) * x.get(b, i, pos as usize);
                            }
                        }
                    }
                    out.set(b, o, t, acc);
                }
            }
        }
        out
    }

    fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn identity_like_kernel_copies_prefix() {
        let x = Tensor3::from_vec(1, 1, 8, (1..=8).map(f64::from).collect()).unwrap();
        let mut p = ConvParams::zeros(1, 1, 3, 1, 0);
        p.weights = vec![1.0, 0.0, 0.0];
        let y = conv1d_forward(&x, &p).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn strided_pair_sum() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut p = ConvParams::zeros(1, 1, 2, 2, 0);
        p.weights = vec![1.0, 1.0];
        assert_eq!(conv1d_forward(&x, &p).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn soundnet_conv1_length() {
        assert_eq!(conv_output_len(220_050, 64, 2, 32), Some(110_026));
    }

    #[test]
    fn matches_naive_loop_with_padding_and_stride() {
        for &(len, k, s, pad) in &[(10, 3, 1, 0), (11, 4, 2, 2), (9, 5, 3, 4), (7, 7, 1, 3), (6, 2, 5, 1)] {
            let x = Tensor3::from_vec(2, 3, len, lcg_values(6 * len, len as u64)).unwrap();
            let mut p = ConvParams::zeros(4, 3, k, s, pad);
            p.weights = lcg_values(p.weights.len(), 7);
            p.bias = lcg_values(4, 9);
            let fast = conv1d_forward(&x, &p).unwrap();
            let slow = naive_conv(&x, &p);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn channel_mismatch_names_dimension() {
        let x = Tensor3::<f32>::zeros(1, 2, 10);
        let p = ConvParams::zeros(1, 3, 3, 1, 0);
        let err = conv1d_forward(&x, &p).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
    }

    #[test]
    fn too_short_reports_minimum() {
        let x = Tensor3::<f32>::zeros(1, 1, 3);
        let p = ConvParams::zeros(1, 1, 8, 2, 2);
        match conv1d_forward(&x, &p).unwrap_err() {
            Error::InputTooShort { length, min_length } => {
                assert_eq!(length, 3);
                assert_eq!(min_length, 4);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn single_tap_backward_is_identity() {
        let x = Tensor3::from_vec(1, 1, 5, vec![0.3, -1.0, 2.0, 0.0, 4.0]).unwrap();
        let mut p = ConvParams::zeros(1, 1, 1, 1, 0);
        p.weights = vec![1.0];
        let g = Tensor3::from_vec(1, 1, 5, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let grads = conv1d_backward(&x, &p, &g).unwrap();
        assert_eq!(grads.input, g);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = Tensor3::from_vec(2, 2, 6, lcg_values(24, 3)).unwrap();
        let mut p = ConvParams::zeros(3, 2, 3, 2, 1);
        p.weights = lcg_values(18, 4);
        let g = Tensor3::zeros(2, 3, conv_output_len(6, 3, 2, 1).unwrap());
        let grads = conv1d_backward(&x, &p, &g).unwrap();
        assert!(grads.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.weights.iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transposed_single_input_expands_kernel() {
        let x = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let mut p = ConvParams::zeros(1, 1, 3, 2, 0);
        p.weights = vec![1.0, 1.0, 1.0];
        let y = transposed_conv1d_forward(&x, &p).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn transposed_zero_input_zero_output() {
        let x = Tensor3::<f64>::zeros(2, 3, 5);
        let mut p = ConvParams::zeros(3, 2, 4, 2, 1);
        p.weights = lcg_values(24, 5);
        p.bias = vec![0.0; 2];
        let y = transposed_conv1d_forward(&x, &p).unwrap();
        assert_eq!(y.length(), transposed_output_len(5, 4, 2, 1).unwrap());
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transposed_length_formula() {
        assert_eq!(transposed_output_len(4, 4, 2, 1), Some(8));
        assert_eq!(transposed_output_len(1, 2, 2, 1), None);
        for len in 1..40 {
            for &(k, s, p) in &[(4, 2, 1), (16, 2, 8), (78, 16, 32), (3, 1, 0)] {
                let min = transposed_min_input_len(1, k, s, p);
                assert_eq!(transposed_output_len(len, k, s, p).is_some(), len >= min);
            }
        }
    }
}
