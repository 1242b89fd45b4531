//! Layer lists, the built-in architectures, parameters and execution.

mod arch;
mod exec;
mod heads;
mod params;
mod text;

use std::collections::HashSet;

pub use arch::{
    autoencoder_admissible_length, build_autoencoder4, build_soundnet5, build_soundnet8, Architecture,
    AutoencoderWidths, SOUNDNET5_MIN_INPUT, SOUNDNET8_MIN_INPUT,
};
pub use exec::{backward, forward, forward_to, forward_trace, ForwardOutput, LayerCache, Trace};
pub use heads::{split_heads, HeadSplit, OBJECT_CLASSES, OUTPUT_CLASSES, SCENE_CLASSES};
pub use params::{init_params, Gradients, LayerParams, Parameters, INIT_STD};

use crate::error::{Error, Result};
use crate::ops::{
    conv_min_input_len, conv_output_len, pool_min_input_len, pool_output_len, transposed_min_input_len,
    transposed_output_len,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv(ConvGeometry),
    /// Upsampling layer; `in_channels`/`out_channels` are its own input and output.
    TransposedConv(ConvGeometry),
    MaxPool {
        size: usize,
        stride: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn conv(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::Conv(ConvGeometry {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }),
        }
    }

    pub fn transposed_conv(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::TransposedConv(ConvGeometry {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }),
        }
    }

    pub fn maxpool(name: &str, size: usize, stride: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::MaxPool { size, stride },
        }
    }

    pub fn batchnorm(name: &str, channels: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::BatchNorm { channels },
        }
    }

    pub fn relu(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::Relu,
        }
    }

    /// Output length for a given input length, `None` if the layer cannot run.
    pub fn output_len(&self, len: usize) -> Option<usize> {
        match self.kind {
            LayerKind::Conv(g) => conv_output_len(len, g.kernel_size, g.stride, g.padding),
            LayerKind::TransposedConv(g) => transposed_output_len(len, g.kernel_size, g.stride, g.padding),
            LayerKind::MaxPool { size, stride } => pool_output_len(len, size, stride),
            LayerKind::BatchNorm { .. } | LayerKind::Relu => (len >= 1).then_some(len),
        }
    }

    /// Smallest input length producing at least `out_len` outputs.
    pub fn min_input_len(&self, out_len: usize) -> usize {
        match self.kind {
            LayerKind::Conv(g) => conv_min_input_len(out_len, g.kernel_size, g.stride, g.padding),
            LayerKind::TransposedConv(g) => transposed_min_input_len(out_len, g.kernel_size, g.stride, g.padding),
            LayerKind::MaxPool { size, stride } => pool_min_input_len(out_len, size, stride),
            LayerKind::BatchNorm { .. } | LayerKind::Relu => out_len.max(1),
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, LayerKind::Conv(_) | LayerKind::TransposedConv(_))
    }
}

/// An ordered layer list applied to a single-channel waveform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Identifier stored in checkpoints: `soundnet8`, `soundnet5`, `autoencoder4` or `custom`.
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Names accepted by [`NetworkConfig::resolve_tap`].
    pub taps: Vec<String>,
}

impl NetworkConfig {
    pub const INPUT_CHANNELS: usize = 1;

    pub fn new(name: &str, layers: Vec<LayerSpec>, taps: Vec<String>) -> Result<Self> {
        let config = Self {
            name: name.to_string(),
            layers,
            taps,
        };
        config.validate()?;
        Ok(config)
    }

    /// Unique names, chained channel counts, and taps that resolve.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        let mut seen = HashSet::new();
        let mut channels = Self::INPUT_CHANNELS;
        for layer in &self.layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate layer name `{}`", layer.name)));
            }
            match layer.kind {
                LayerKind::Conv(g) | LayerKind::TransposedConv(g) => {
                    if g.in_channels != channels {
                        return Err(Error::InvalidNetwork(format!(
                            "layer `{}` expects {} input channels but receives {}",
                            layer.name, g.in_channels, channels
                        )));
                    }
                    if g.kernel_size == 0 || g.stride == 0 || g.out_channels == 0 {
                        return Err(Error::InvalidNetwork(format!(
                            "layer `{}` needs kernel, stride and channels >= 1",
                            layer.name
                        )));
                    }
                    channels = g.out_channels;
                }
                LayerKind::BatchNorm { channels: c } => {
                    if c != channels {
                        return Err(Error::InvalidNetwork(format!(
                            "batch norm `{}` has {} channels but receives {}",
                            layer.name, c, channels
                        )));
                    }
                }
                LayerKind::MaxPool { size, stride } => {
                    if size == 0 || stride == 0 {
                        return Err(Error::InvalidNetwork(format!(
                            "pool `{}` needs size and stride >= 1",
                            layer.name
                        )));
                    }
                }
                LayerKind::Relu => {}
            }
        }
        for tap in &self.taps {
            self.resolve_tap(tap)?;
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.channels_after(self.layers.len() - 1)
    }

    /// Channel count of layer `index`'s output.
    pub fn channels_after(&self, index: usize) -> usize {
        self.layers[..=index]
            .iter()
            .rev()
            .find_map(|l| match l.kind {
                LayerKind::Conv(g) | LayerKind::TransposedConv(g) => Some(g.out_channels),
                _ => None,
            })
            .unwrap_or(Self::INPUT_CHANNELS)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Per-layer output lengths for an input of `len` samples.
    pub fn output_lengths(&self, len: usize) -> Result<Vec<usize>> {
        self.output_lengths_to(len, self.layers.len() - 1)
    }

    /// Output lengths of layers `0..=last`.
    pub fn output_lengths_to(&self, len: usize, last: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(last + 1);
        let mut cur = len;
        for layer in &self.layers[..=last] {
            cur = match layer.output_len(cur) {
                Some(l) => l,
                None => {
                    return Err(Error::InputTooShort {
                        length: len,
                        min_length: self.min_input_length_to(last),
                    })
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    /// Smallest input length for which every layer yields at least one position.
    pub fn min_input_length(&self) -> usize {
        self.min_input_length_to(self.layers.len() - 1)
    }

    /// Smallest input length for which layers `0..=last` all run.
    pub fn min_input_length_to(&self, last: usize) -> usize {
        // every layer's output length is non-decreasing in its input length,
        // so propagating the requirement backwards gives the exact minimum
        self.layers[..=last]
            .iter()
            .rev()
            .fold(1, |need, layer| layer.min_input_len(need))
    }

    /// Maps a tap name to the layer whose output is exposed. A convolution
    /// followed by batch norm and ReLU exposes the ReLU output, so `conv5`
    /// means the activated block output.
    pub fn resolve_tap(&self, name: &str) -> Result<usize> {
        let unknown = || Error::UnknownLayer {
            name: name.to_string(),
            valid: self.taps.clone(),
        };
        if !self.taps.iter().any(|t| t == name) {
            return Err(unknown());
        }
        let idx = self.layer_index(name).ok_or_else(unknown)?;
        if !self.layers[idx].is_conv() {
            return Ok(idx);
        }
        let mut end = idx;
        for (i, layer) in self.layers.iter().enumerate().skip(idx + 1) {
            match layer.kind {
                LayerKind::BatchNorm { .. } | LayerKind::Relu => end = i,
                _ => break,
            }
        }
        Ok(end)
    }

    /// Number of trainable scalars (conv weights and biases, batch norm affine).
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Conv(g) | LayerKind::TransposedConv(g) => {
                    g.in_channels * g.out_channels * g.kernel_size + g.out_channels
                }
                LayerKind::BatchNorm { channels } => 2 * channels,
                _ => 0,
            })
            .sum()
    }

    pub fn to_text(&self) -> String {
        text::to_text(self)
    }

    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        text::from_text(name, text)
    }
}
