//! Per-channel batch normalization over `(batch, length)`.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor3};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    /// `None` until the first train-mode pass.
    pub running: Option<RunningStats<T>>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl<T: Real> BatchNormParams<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running: None,
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Statistics the backward pass needs.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T = f32> {
    pub mode: Mode,
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormOutput<T = f32> {
    pub output: Tensor3<T>,
    pub cache: BatchNormCache<T>,
    /// Updated running statistics (train mode only).
    pub running: Option<RunningStats<T>>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T = f32> {
    pub input: Tensor3<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

fn check_channels(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            dimension: "batch norm channels",
            expected,
            actual,
        });
    }
    Ok(())
}

/// Train mode normalizes with biased batch statistics and returns the
/// blended running statistics; the first train pass seeds them with the
/// batch statistics. Eval mode uses the running statistics only.
pub fn batchnorm_forward<T: Real>(
    input: &Tensor3<T>,
    params: &BatchNormParams<T>,
    mode: Mode,
) -> Result<BatchNormOutput<T>> {
    let (batch, channels, len) = input.shape();
    check_channels(params.channels(), channels)?;
    if params.beta.len() != channels {
        return Err(Error::ShapeMismatch {
            dimension: "batch norm beta",
            expected: channels,
            actual: params.beta.len(),
        });
    }
    let eps = T::from_f64_lossy(params.epsilon);
    let (mean, var, running) = match mode {
        Mode::Train => {
            let n = batch * len;
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "train-mode batch norm needs at least 2 values per channel, got {n}"
                )));
            }
            let n_t = T::from_usize(n).expect("count fits");
            let mut mean = vec![T::zero(); channels];
            let mut var = vec![T::zero(); channels];
            for c in 0..channels {
                // accumulate in f64 so long f32 rows stay accurate
                let mut sum = 0.0f64;
                for b in 0..batch {
                    sum += input.row(b, c).iter().map(|v| v.to_f64_lossy()).sum::<f64>();
                }
                let m = sum / n as f64;
                let mut sq = 0.0f64;
                for b in 0..batch {
                    sq += input
                        .row(b, c)
                        .iter()
                        .map(|v| {
                            let d = v.to_f64_lossy() - m;
                            d * d
                        })
                        .sum::<f64>();
                }
                mean[c] = T::from_f64_lossy(m);
                var[c] = T::from_f64_lossy(sq) / n_t;
            }
            let momentum = T::from_f64_lossy(params.momentum);
            let running = match &params.running {
                Some(r) => RunningStats {
                    mean: r
                        .mean
                        .iter()
                        .zip(&mean)
                        .map(|(&r, &m)| (T::one() - momentum) * r + momentum * m)
                        .collect(),
                    var: r
                        .var
                        .iter()
                        .zip(&var)
                        .map(|(&r, &v)| (T::one() - momentum) * r + momentum * v)
                        .collect(),
                },
                None => RunningStats {
                    mean: mean.clone(),
                    var: var.clone(),
                },
            };
            (mean, var, Some(running))
        }
        Mode::Eval => {
            let r = params
                .running
                .as_ref()
                .ok_or_else(|| Error::UninitializedRunningStats(String::new()))?;
            check_channels(channels, r.mean.len())?;
            (r.mean.clone(), r.var.clone(), None)
        }
    };
    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::one() / (v.max(T::zero()) + eps).sqrt())
        .collect();

    let mut output = Tensor3::zeros(batch, channels, len);
    for b in 0..batch {
        for c in 0..channels {
            let (m, s, g, be) = (mean[c], inv_std[c], params.gamma[c], params.beta[c]);
            for (y, &x) in output.row_mut(b, c).iter_mut().zip(input.row(b, c)) {
                *y = g * ((x - m) * s) + be;
            }
        }
    }
    Ok(BatchNormOutput {
        output,
        cache: BatchNormCache { mode, mean, inv_std },
        running,
    })
}

pub fn batchnorm_backward<T: Real>(
    input: &Tensor3<T>,
    params: &BatchNormParams<T>,
    cache: &BatchNormCache<T>,
    grad_out: &Tensor3<T>,
) -> Result<BatchNormGrads<T>> {
    let (batch, channels, len) = input.shape();
    check_channels(params.channels(), channels)?;
    if !grad_out.same_shape(input) {
        return Err(Error::ShapeMismatch {
            dimension: "batch norm gradient",
            expected: input.as_slice().len(),
            actual: grad_out.as_slice().len(),
        });
    }
    let n = T::from_usize(batch * len).expect("count fits");
    let mut grad_in = Tensor3::zeros(batch, channels, len);
    let mut grad_gamma = vec![T::zero(); channels];
    let mut grad_beta = vec![T::zero(); channels];
    for c in 0..channels {
        let (m, s, g) = (cache.mean[c], cache.inv_std[c], params.gamma[c]);
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for b in 0..batch {
            for (&dy, &x) in grad_out.row(b, c).iter().zip(input.row(b, c)) {
                sum_dy += dy;
                sum_dy_xhat += dy * (x - m) * s;
            }
        }
        grad_beta[c] = sum_dy;
        grad_gamma[c] = sum_dy_xhat;
        match cache.mode {
            Mode::Train => {
                let scale = g * s / n;
                for b in 0..batch {
                    let dst = grad_in.row_mut(b, c);
                    for ((d, &dy), &x) in dst.iter_mut().zip(grad_out.row(b, c)).zip(input.row(b, c)) {
                        let xhat = (x - m) * s;
                        *d = scale * (n * dy - sum_dy - xhat * sum_dy_xhat);
                    }
                }
            }
            Mode::Eval => {
                for b in 0..batch {
                    let dst = grad_in.row_mut(b, c);
                    for (d, &dy) in dst.iter_mut().zip(grad_out.row(b, c)) {
                        *d = g * s * dy;
                    }
                }
            }
        }
    }
    Ok(BatchNormGrads {
        input: grad_in,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}
