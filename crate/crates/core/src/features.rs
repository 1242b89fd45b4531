//! Internal activations of a trained network used as fixed-length features.

use crate::error::{Error, Result};
use crate::network::{forward_to, NetworkConfig, Parameters};
use crate::ops::Mode;
use crate::tensor::Tensor3;

/// Windows pushed through the network per forward call.
const EXTRACT_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub source_layer: String,
    pub window_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Average each channel over time instead of flattening channels × time.
    pub mean_over_time: bool,
}

/// Feature dimensionality of `layer` for windows of `window_len` samples.
pub fn feature_dim(net: &NetworkConfig, layer: &str, window_len: usize, options: FeatureOptions) -> Result<usize> {
    let idx = net.resolve_tap(layer)?;
    let lengths = net.output_lengths_to(window_len, idx)?;
    let channels = net.channels_after(idx);
    Ok(if options.mean_over_time {
        channels
    } else {
        channels * lengths.last().copied().unwrap_or(window_len)
    })
}

fn flatten(activation: &Tensor3<f32>, b: usize, options: FeatureOptions) -> Vec<f32> {
    if !options.mean_over_time {
        return activation.item(b).to_vec();
    }
    let len = activation.length() as f64;
    (0..activation.channels())
        .map(|c| (activation.row(b, c).iter().map(|&v| v as f64).sum::<f64>() / len) as f32)
        .collect()
}

/// Eval-mode activation at `layer` for every window, flattened channel-major.
pub fn extract_features(
    net: &NetworkConfig,
    params: &Parameters<f32>,
    layer: &str,
    windows: &[Vec<f32>],
    window_ids: &[String],
    options: FeatureOptions,
) -> Result<Vec<FeatureVector>> {
    if windows.len() != window_ids.len() {
        return Err(Error::ShapeMismatch {
            dimension: "window ids",
            expected: windows.len(),
            actual: window_ids.len(),
        });
    }
    net.resolve_tap(layer)?;
    let mut out = Vec::with_capacity(windows.len());
    for (chunk, ids) in windows.chunks(EXTRACT_BATCH).zip(window_ids.chunks(EXTRACT_BATCH)) {
        let refs: Vec<&[f32]> = chunk.iter().map(Vec::as_slice).collect();
        let x = Tensor3::from_signals(&refs)?;
        let act = forward_to(net, params, &x, Mode::Eval, layer)?;
        if !act.all_finite() {
            return Err(Error::NonFinite("feature activations"));
        }
        for (b, id) in ids.iter().enumerate() {
            out.push(FeatureVector {
                values: flatten(&act, b, options),
                source_layer: layer.to_string(),
                window_id: id.clone(),
            });
        }
    }
    Ok(out)
}

/// Features of a single window.
pub fn extract_window_features(
    net: &NetworkConfig,
    params: &Parameters<f32>,
    layer: &str,
    window: &[f32],
    window_id: &str,
    options: FeatureOptions,
) -> Result<FeatureVector> {
    let mut v = extract_features(
        net,
        params,
        layer,
        &[window.to_vec()],
        &[window_id.to_string()],
        options,
    )?;
    Ok(v.remove(0))
}
