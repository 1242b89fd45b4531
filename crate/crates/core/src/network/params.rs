use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LayerKind, NetworkConfig};
use crate::error::{Error, Result};
use crate::ops::{BatchNormParams, ConvParams, RunningStats};
use crate::tensor::Real;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T = f32> {
    Conv(ConvParams<T>),
    BatchNorm(BatchNormParams<T>),
}

/// Learned state of a network, keyed by layer name.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T = f32> {
    pub seed: u64,
    pub layers: BTreeMap<String, LayerParams<T>>,
}

/// Named gradient arrays (`<layer>.weight`, `.bias`, `.gamma`, `.beta`).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub arrays: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.arrays.get(name).map(Vec::as_slice)
    }

    pub fn scale(&mut self, factor: T) {
        for v in self.arrays.values_mut().flat_map(|a| a.iter_mut()) {
            *v *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.arrays.values().flatten().all(|v| v.is_finite())
    }
}

/// Gaussian `N(0, 0.01²)` conv weights from a seeded ChaCha stream, zero
/// biases, unit gamma, zero beta, unset running statistics.
pub fn init_params<T: Real>(config: &NetworkConfig, seed: u64) -> Parameters<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, INIT_STD).expect("valid normal");
    let mut layers = BTreeMap::new();
    for layer in &config.layers {
        match layer.kind {
            LayerKind::Conv(g) => {
                let mut p = ConvParams::zeros(g.out_channels, g.in_channels, g.kernel_size, g.stride, g.padding);
                for w in p.weights.iter_mut() {
                    *w = T::from_f64_lossy(normal.sample(&mut rng));
                }
                layers.insert(layer.name.clone(), LayerParams::Conv(p));
            }
            LayerKind::TransposedConv(g) => {
                // stored in the orientation of the convolution it transposes
                let mut p = ConvParams::zeros(g.in_channels, g.out_channels, g.kernel_size, g.stride, g.padding);
                p.bias = vec![T::zero(); g.out_channels];
                for w in p.weights.iter_mut() {
                    *w = T::from_f64_lossy(normal.sample(&mut rng));
                }
                layers.insert(layer.name.clone(), LayerParams::Conv(p));
            }
            LayerKind::BatchNorm { channels } => {
                layers.insert(
                    layer.name.clone(),
                    LayerParams::BatchNorm(BatchNormParams::new(channels)),
                );
            }
            LayerKind::MaxPool { .. } | LayerKind::Relu => {}
        }
    }
    Parameters { seed, layers }
}

impl<T: Real> Parameters<T> {
    pub fn conv(&self, name: &str) -> Result<&ConvParams<T>> {
        match self.layers.get(name) {
            Some(LayerParams::Conv(p)) => Ok(p),
            _ => Err(Error::InvalidNetwork(format!(
                "missing convolution parameters for `{name}`"
            ))),
        }
    }

    pub fn batchnorm(&self, name: &str) -> Result<&BatchNormParams<T>> {
        match self.layers.get(name) {
            Some(LayerParams::BatchNorm(p)) => Ok(p),
            _ => Err(Error::InvalidNetwork(format!(
                "missing batch norm parameters for `{name}`"
            ))),
        }
    }

    /// Checks that every parameterized layer of `config` has a matching entry.
    pub fn check_against(&self, config: &NetworkConfig) -> Result<()> {
        let mut expected = 0;
        for layer in &config.layers {
            match layer.kind {
                LayerKind::Conv(g) => {
                    expected += 1;
                    let p = self.conv(&layer.name)?;
                    if (p.out_channels, p.in_channels, p.kernel_size, p.stride, p.padding)
                        != (g.out_channels, g.in_channels, g.kernel_size, g.stride, g.padding)
                        || p.bias.len() != g.out_channels
                        || p.weights.len() != g.out_channels * g.in_channels * g.kernel_size
                    {
                        return Err(Error::InvalidNetwork(format!(
                            "parameter shape mismatch for `{}`",
                            layer.name
                        )));
                    }
                }
                LayerKind::TransposedConv(g) => {
                    expected += 1;
                    let p = self.conv(&layer.name)?;
                    if (p.out_channels, p.in_channels, p.kernel_size, p.stride, p.padding)
                        != (g.in_channels, g.out_channels, g.kernel_size, g.stride, g.padding)
                        || p.bias.len() != g.out_channels
                        || p.weights.len() != g.out_channels * g.in_channels * g.kernel_size
                    {
                        return Err(Error::InvalidNetwork(format!(
                            "parameter shape mismatch for `{}`",
                            layer.name
                        )));
                    }
                }
                LayerKind::BatchNorm { channels } => {
                    expected += 1;
                    let p = self.batchnorm(&layer.name)?;
                    if p.gamma.len() != channels || p.beta.len() != channels {
                        return Err(Error::InvalidNetwork(format!(
                            "parameter shape mismatch for `{}`",
                            layer.name
                        )));
                    }
                    if let Some(r) = &p.running {
                        if r.mean.len() != channels || r.var.len() != channels {
                            return Err(Error::InvalidNetwork(format!(
                                "running statistics shape mismatch for `{}`",
                                layer.name
                            )));
                        }
                    }
                }
                LayerKind::MaxPool { .. } | LayerKind::Relu => {}
            }
        }
        if expected != self.layers.len() {
            return Err(Error::InvalidNetwork(format!(
                "parameters hold {} layers but the network has {expected} parameterized layers",
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Trainable arrays in name order, matching the keys of [`Gradients`].
    pub fn trainable(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (name, p) in &self.layers {
            match p {
                LayerParams::Conv(c) => {
                    out.push((format!("{name}.weight"), c.weights.as_slice()));
                    out.push((format!("{name}.bias"), c.bias.as_slice()));
                }
                LayerParams::BatchNorm(b) => {
                    out.push((format!("{name}.gamma"), b.gamma.as_slice()));
                    out.push((format!("{name}.beta"), b.beta.as_slice()));
                }
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out = Vec::new();
        for (name, p) in self.layers.iter_mut() {
            match p {
                LayerParams::Conv(c) => {
                    out.push((format!("{name}.weight"), c.weights.as_mut_slice()));
                    out.push((format!("{name}.bias"), c.bias.as_mut_slice()));
                }
                LayerParams::BatchNorm(b) => {
                    out.push((format!("{name}.gamma"), b.gamma.as_mut_slice()));
                    out.push((format!("{name}.beta"), b.beta.as_mut_slice()));
                }
            }
        }
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().iter().map(|(_, a)| a.len()).sum()
    }

    /// Installs running statistics returned by a train-mode forward pass.
    pub fn apply_running_stats(&mut self, stats: BTreeMap<String, RunningStats<T>>) {
        for (name, s) in stats {
            if let Some(LayerParams::BatchNorm(b)) = self.layers.get_mut(&name) {
                b.running = Some(s);
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        let c = |v: &[T]| {
            v.iter()
                .map(|x| U::from_f64_lossy(x.to_f64_lossy()))
                .collect::<Vec<U>>()
        };
        let layers = self
            .layers
            .iter()
            .map(|(name, p)| {
                let q = match p {
                    LayerParams::Conv(p) => LayerParams::Conv(ConvParams {
                        out_channels: p.out_channels,
                        in_channels: p.in_channels,
                        kernel_size: p.kernel_size,
                        stride: p.stride,
                        padding: p.padding,
                        weights: c(&p.weights),
                        bias: c(&p.bias),
                    }),
                    LayerParams::BatchNorm(b) => LayerParams::BatchNorm(BatchNormParams {
                        gamma: c(&b.gamma),
                        beta: c(&b.beta),
                        running: b.running.as_ref().map(|r| RunningStats {
                            mean: c(&r.mean),
                            var: c(&r.var),
                        }),
                        epsilon: b.epsilon,
                        momentum: b.momentum,
                    }),
                };
                (name.clone(), q)
            })
            .collect();
        Parameters {
            seed: self.seed,
            layers,
        }
    }
}
