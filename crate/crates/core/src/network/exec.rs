//! Variable-length forward execution and explicit per-layer backpropagation.

use std::collections::BTreeMap;

use super::{Gradients, LayerKind, LayerSpec, NetworkConfig, Parameters};
use crate::error::{Error, Result};
use crate::ops::conv::conv1d_backward_impl;
use crate::ops::{
    batchnorm_backward, batchnorm_forward, conv1d_forward, maxpool1d_backward, maxpool1d_forward, relu_backward,
    relu_forward, transposed_conv1d_backward, transposed_conv1d_forward, BatchNormCache, Mode, PoolIndices,
    RunningStats,
};
use crate::tensor::{Real, Tensor3};

/// What a layer's backward pass needs beyond its input and output.
#[derive(Debug, Clone)]
pub enum LayerCache<T = f32> {
    None,
    Pool(PoolIndices),
    BatchNorm(BatchNormCache<T>),
}

/// Every layer output of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace<T = f32> {
    pub outputs: Vec<Tensor3<T>>,
    pub caches: Vec<LayerCache<T>>,
    /// Updated batch norm running statistics (train mode).
    pub running: BTreeMap<String, RunningStats<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &Tensor3<T> {
        self.outputs.last().expect("trace has at least one layer")
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T = f32> {
    pub output: Tensor3<T>,
    /// Activations of every tap, keyed by tap name.
    pub taps: BTreeMap<String, Tensor3<T>>,
    pub running: BTreeMap<String, RunningStats<T>>,
}

fn check_input<T: Real>(config: &NetworkConfig, input: &Tensor3<T>, last: usize) -> Result<()> {
    if input.channels() != NetworkConfig::INPUT_CHANNELS {
        return Err(Error::ShapeMismatch {
            dimension: "input channels",
            expected: NetworkConfig::INPUT_CHANNELS,
            actual: input.channels(),
        });
    }
    if input.batch() == 0 {
        return Err(Error::Empty("input batch"));
    }
    let min = config.min_input_length_to(last);
    if input.length() < min {
        return Err(Error::InputTooShort {
            length: input.length(),
            min_length: min,
        });
    }
    if !input.all_finite() {
        return Err(Error::NonFinite("network input"));
    }
    Ok(())
}

fn apply_layer<T: Real>(
    layer: &LayerSpec,
    params: &Parameters<T>,
    x: &Tensor3<T>,
    mode: Mode,
) -> Result<(Tensor3<T>, LayerCache<T>, Option<RunningStats<T>>)> {
    Ok(match layer.kind {
        LayerKind::Conv(_) => (conv1d_forward(x, params.conv(&layer.name)?)?, LayerCache::None, None),
        LayerKind::TransposedConv(_) => (
            transposed_conv1d_forward(x, params.conv(&layer.name)?)?,
            LayerCache::None,
            None,
        ),
        LayerKind::MaxPool { size, stride } => {
            let (y, idx) = maxpool1d_forward(x, size, stride)?;
            (y, LayerCache::Pool(idx), None)
        }
        LayerKind::BatchNorm { .. } => {
            let out = batchnorm_forward(x, params.batchnorm(&layer.name)?, mode).map_err(|e| match e {
                Error::UninitializedRunningStats(_) => Error::UninitializedRunningStats(layer.name.clone()),
                other => other,
            })?;
            (out.output, LayerCache::BatchNorm(out.cache), out.running)
        }
        LayerKind::Relu => (relu_forward(x), LayerCache::None, None),
    })
}

/// Runs every layer, returning the final output plus every tap activation.
pub fn forward<T: Real>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    input: &Tensor3<T>,
    mode: Mode,
) -> Result<ForwardOutput<T>> {
    let last = config.layers.len() - 1;
    check_input(config, input, last)?;
    let mut wanted: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for tap in &config.taps {
        wanted.entry(config.resolve_tap(tap)?).or_default().push(tap);
    }
    let mut taps = BTreeMap::new();
    let mut running = BTreeMap::new();
    let mut cur = input.clone();
    for (i, layer) in config.layers.iter().enumerate() {
        let (y, _, stats) = apply_layer(layer, params, &cur, mode)?;
        if let Some(s) = stats {
            running.insert(layer.name.clone(), s);
        }
        if let Some(names) = wanted.get(&i) {
            for n in names {
                taps.insert(n.to_string(), y.clone());
            }
        }
        cur = y;
    }
    Ok(ForwardOutput {
        output: cur,
        taps,
        running,
    })
}

/// Runs the network only as far as `tap`, so inputs shorter than the full
/// network's minimum still work for shallow taps.
pub fn forward_to<T: Real>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    input: &Tensor3<T>,
    mode: Mode,
    tap: &str,
) -> Result<Tensor3<T>> {
    let last = config.resolve_tap(tap)?;
    check_input(config, input, last)?;
    let mut cur = input.clone();
    for layer in &config.layers[..=last] {
        cur = apply_layer(layer, params, &cur, mode)?.0;
    }
    Ok(cur)
}

/// Forward pass that keeps every intermediate for [`backward`].
pub fn forward_trace<T: Real>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    input: &Tensor3<T>,
    mode: Mode,
) -> Result<Trace<T>> {
    check_input(config, input, config.layers.len() - 1)?;
    let mut outputs: Vec<Tensor3<T>> = Vec::with_capacity(config.layers.len());
    let mut caches = Vec::with_capacity(config.layers.len());
    let mut running = BTreeMap::new();
    for layer in &config.layers {
        let x = outputs.last().unwrap_or(input);
        let (y, cache, stats) = apply_layer(layer, params, x, mode)?;
        if let Some(s) = stats {
            running.insert(layer.name.clone(), s);
        }
        outputs.push(y);
        caches.push(cache);
    }
    Ok(Trace {
        outputs,
        caches,
        running,
    })
}

/// Backpropagates `grad_output` (same shape as the trace's final output)
/// to every trainable array.
pub fn backward<T: Real>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    input: &Tensor3<T>,
    trace: &Trace<T>,
    grad_output: &Tensor3<T>,
) -> Result<Gradients<T>> {
    if trace.outputs.len() != config.layers.len() {
        return Err(Error::InvalidArgument("trace does not match the network".into()));
    }
    if !grad_output.same_shape(trace.output()) {
        return Err(Error::ShapeMismatch {
            dimension: "output gradient",
            expected: trace.output().as_slice().len(),
            actual: grad_output.as_slice().len(),
        });
    }
    let mut arrays = BTreeMap::new();
    let mut grad = grad_output.clone();
    for (i, layer) in config.layers.iter().enumerate().rev() {
        let x = if i == 0 { input } else { &trace.outputs[i - 1] };
        let name = &layer.name;
        grad = match (&layer.kind, &trace.caches[i]) {
            (LayerKind::Conv(_), _) => {
                let (gi, gw, gb) = conv1d_backward_impl(x, params.conv(name)?, &grad, i > 0)?;
                arrays.insert(format!("{name}.weight"), gw);
                arrays.insert(format!("{name}.bias"), gb);
                match gi {
                    Some(g) => g,
                    None => break,
                }
            }
            (LayerKind::TransposedConv(_), _) => {
                let g = transposed_conv1d_backward(x, params.conv(name)?, &grad)?;
                arrays.insert(format!("{name}.weight"), g.weights);
                arrays.insert(format!("{name}.bias"), g.bias);
                g.input
            }
            (LayerKind::MaxPool { .. }, LayerCache::Pool(idx)) => maxpool1d_backward(idx, &grad)?,
            (LayerKind::BatchNorm { .. }, LayerCache::BatchNorm(cache)) => {
                let g = batchnorm_backward(x, params.batchnorm(name)?, cache, &grad)?;
                arrays.insert(format!("{name}.gamma"), g.gamma);
                arrays.insert(format!("{name}.beta"), g.beta);
                g.input
            }
            (LayerKind::Relu, _) => relu_backward(x, &grad)?,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "trace cache does not match layer `{name}`"
                )))
            }
        };
    }
    Ok(Gradients { arrays })
}
