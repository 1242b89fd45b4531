//! Dense `(batch, channels, length)` tensors and the scalar trait the
//! kernels are generic over.
//!
//! Training runs in `f32`; finite-difference checks run the exact same
//! kernels in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type usable by every kernel.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    /// `c = alpha * a · b + beta * c` for strided row/column layouts.
    ///
    /// # Safety
    /// Strides and dimensions must address only elements inside the three
    /// buffers; [`gemm`] checks this before calling.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Row-major matrix view: `(rows, cols)` with an explicit transpose flag.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a, T> MatRef<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    /// Logical transpose of a stored `(rows, cols)` matrix.
    pub fn t(self) -> Self {
        Self {
            transposed: !self.transposed,
            ..self
        }
    }

    fn logical_dims(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `out (m×n) = alpha · a (m×k) · b (k×n) + beta · out`, `out` row-major.
pub(crate) fn gemm<T: Real>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, out: &mut [T]) {
    let (m, k) = a.logical_dims();
    let (k2, n) = b.logical_dims();
    assert_eq!(k, k2, "gemm inner dimensions");
    assert!(a.data.len() >= a.rows * a.cols);
    assert!(b.data.len() >= b.rows * b.cols);
    assert!(out.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: dimensions and strides were checked against buffer lengths above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Dense `(batch, channels, length)` array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T = f32> {
    batch: usize,
    channels: usize,
    length: usize,
    values: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Self {
            batch,
            channels,
            length,
            values: vec![T::zero(); batch * channels * length],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, length: usize, values: Vec<T>) -> Result<Self> {
        let expected = batch * channels * length;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                dimension: "values",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            batch,
            channels,
            length,
            values,
        })
    }

    /// Stacks equal-length mono signals into a `(n, 1, len)` tensor.
    pub fn from_signals(signals: &[&[T]]) -> Result<Self> {
        let first = signals.first().ok_or(Error::Empty("signal batch"))?;
        let length = first.len();
        let mut values = Vec::with_capacity(signals.len() * length);
        for s in signals {
            if s.len() != length {
                return Err(Error::ShapeMismatch {
                    dimension: "length",
                    expected: length,
                    actual: s.len(),
                });
            }
            values.extend_from_slice(s);
        }
        Self::from_vec(signals.len(), 1, length, values)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.length)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, l: usize) -> T {
        self.values[(b * self.channels + c) * self.length + l]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, l: usize, v: T) {
        self.values[(b * self.channels + c) * self.length + l] = v;
    }

    /// The `(channels, length)` plane of one batch item.
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.channels * self.length;
        &self.values[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.channels * self.length;
        &mut self.values[b * n..(b + 1) * n]
    }

    /// One channel row of one batch item.
    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let start = (b * self.channels + c) * self.length;
        &self.values[start..start + self.length]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let start = (b * self.channels + c) * self.length;
        &mut self.values[start..start + self.length]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Channel range `[start, end)` copied into a new tensor.
    pub fn channel_slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.channels {
            return Err(Error::ShapeMismatch {
                dimension: "channels",
                expected: end,
                actual: self.channels,
            });
        }
        let mut out = Self::zeros(self.batch, end - start, self.length);
        for b in 0..self.batch {
            for c in start..end {
                out.row_mut(b, c - start).copy_from_slice(self.row(b, c));
            }
        }
        Ok(out)
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("channel concatenation"))?;
        let (batch, _, length) = first.shape();
        for p in parts {
            if p.batch != batch {
                return Err(Error::ShapeMismatch {
                    dimension: "batch",
                    expected: batch,
                    actual: p.batch,
                });
            }
            if p.length != length {
                return Err(Error::ShapeMismatch {
                    dimension: "length",
                    expected: length,
                    actual: p.length,
                });
            }
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut values = Vec::with_capacity(batch * channels * length);
        for b in 0..batch {
            for p in parts {
                values.extend_from_slice(p.item(b));
            }
        }
        Self::from_vec(batch, channels, length, values)
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            batch: self.batch,
            channels: self.channels,
            length: self.length,
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum()
    }
}
