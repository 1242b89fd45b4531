use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor3};

/// Winning input position for every pooled output, in output order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_length: usize,
    pub argmax: Vec<u32>,
}

pub fn pool_output_len(len: usize, size: usize, stride: usize) -> Option<usize> {
    if size == 0 || stride == 0 || len < size {
        return None;
    }
    Some((len - size) / stride + 1)
}

pub fn pool_min_input_len(out_len: usize, size: usize, stride: usize) -> usize {
    (out_len.max(1) - 1) * stride + size
}

/// Max over non-padded windows; ties go to the lowest index.
pub fn maxpool1d_forward<T: Real>(input: &Tensor3<T>, size: usize, stride: usize) -> Result<(Tensor3<T>, PoolIndices)> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "pool size {size} and stride {stride} must be >= 1"
        )));
    }
    let (batch, channels, len) = input.shape();
    let out_len = pool_output_len(len, size, stride).ok_or(Error::InputTooShort {
        length: len,
        min_length: size,
    })?;
    let mut out = Tensor3::zeros(batch, channels, out_len);
    let mut argmax = Vec::with_capacity(batch * channels * out_len);
    for b in 0..batch {
        for c in 0..channels {
            let src = input.row(b, c);
            let dst = out.row_mut(b, c);
            for (t, d) in dst.iter_mut().enumerate() {
                let start = t * stride;
                let mut best = start;
                let mut best_v = src[start];
                for (i, &v) in src[start + 1..start + size].iter().enumerate() {
                    if v > best_v {
                        best_v = v;
                        best = start + 1 + i;
                    }
                }
                *d = best_v;
                argmax.push(best as u32);
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_length: len,
            argmax,
        },
    ))
}

/// Routes each output gradient to its recorded argmax position.
pub fn maxpool1d_backward<T: Real>(indices: &PoolIndices, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
    let (batch, channels, out_len) = grad_out.shape();
    if indices.argmax.len() != batch * channels * out_len {
        return Err(Error::ShapeMismatch {
            dimension: "pool gradient",
            expected: indices.argmax.len(),
            actual: batch * channels * out_len,
        });
    }
    let mut grad_in = Tensor3::zeros(batch, channels, indices.input_length);
    let mut idx = indices.argmax.iter();
    for b in 0..batch {
        for c in 0..channels {
            let g = grad_out.row(b, c);
            let dst = grad_in.row_mut(b, c);
            for &gv in g {
                let i = *idx.next().expect("length checked") as usize;
                dst[i] += gv;
            }
        }
    }
    Ok(grad_in)
}
