//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain numbers and strings and returns a
//! JSON document; the Rust-side functions they wrap are tested natively.

use serde::Serialize;
use soundnet::audio::{extract_windows, preprocess, window_samples, window_starts, Waveform};
use soundnet::network::{Architecture, LayerKind, NetworkConfig};
use soundnet::ops::{kl_divergence, softmax};
use soundnet::synth::{chirp, sine, white_noise};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct LayerRow {
    pub name: String,
    pub kind: String,
    pub channels: usize,
    /// `None` once the input has become too short.
    pub length: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ShapeReport {
    pub arch: String,
    pub input_length: usize,
    pub min_input_length: usize,
    pub parameters: usize,
    pub layers: Vec<LayerRow>,
}

fn describe(kind: &LayerKind) -> String {
    match kind {
        LayerKind::Conv(g) => format!("conv k{} s{} p{}", g.kernel_size, g.stride, g.padding),
        LayerKind::TransposedConv(g) => format!("tconv k{} s{} p{}", g.kernel_size, g.stride, g.padding),
        LayerKind::MaxPool { size, stride } => format!("maxpool {size}/{stride}"),
        LayerKind::BatchNorm { .. } => "batchnorm".into(),
        LayerKind::Relu => "relu".into(),
    }
}

pub fn shape_report(arch: &str, input_length: usize) -> Result<ShapeReport, String> {
    let arch: Architecture = arch.parse().map_err(|e: soundnet::Error| e.to_string())?;
    let net: NetworkConfig = arch.build();
    let mut len = Some(input_length);
    let mut layers = Vec::with_capacity(net.layers.len());
    for (i, layer) in net.layers.iter().enumerate() {
        len = len.and_then(|l| layer.output_len(l));
        layers.push(LayerRow {
            name: layer.name.clone(),
            kind: describe(&layer.kind),
            channels: net.channels_after(i),
            length: len,
        });
    }
    Ok(ShapeReport {
        arch: arch.to_string(),
        input_length,
        min_input_length: net.min_input_length(),
        parameters: net.parameter_count(),
        layers,
    })
}

#[derive(Debug, Serialize)]
pub struct KlReport {
    pub teacher: Vec<f64>,
    pub student: Vec<f64>,
    pub kl: f64,
    /// d KL / d student logits.
    pub gradient: Vec<f64>,
}

/// Softmaxes both logit vectors and compares them.
pub fn kl_report(teacher_logits: &[f64], student_logits: &[f64]) -> Result<KlReport, String> {
    if teacher_logits.len() != student_logits.len() {
        return Err(format!(
            "teacher has {} classes, student {}",
            teacher_logits.len(),
            student_logits.len()
        ));
    }
    let p = softmax(teacher_logits).map_err(|e| e.to_string())?;
    let q = softmax(student_logits).map_err(|e| e.to_string())?;
    let kl = kl_divergence(&p, &q).map_err(|e| e.to_string())?;
    let gradient = q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect();
    Ok(KlReport {
        teacher: p,
        student: q,
        kl,
        gradient,
    })
}

#[derive(Debug, Serialize)]
pub struct WindowReport {
    pub samples: usize,
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    pub starts: Vec<usize>,
    pub peak: f32,
    /// `(min, max)` per display bin.
    pub envelope: Vec<(f32, f32)>,
}

const SOURCE_RATE: u32 = 44_100;

/// Synthesizes a 44.1 kHz signal, preprocesses it and cuts windows.
pub fn window_report(
    signal: &str,
    seconds: f64,
    window_seconds: f64,
    overlap: f64,
    bins: usize,
) -> Result<WindowReport, String> {
    if !(seconds > 0.0 && seconds <= 60.0) {
        return Err("duration must be in (0, 60] seconds".into());
    }
    let n = (seconds * SOURCE_RATE as f64).round() as usize;
    let raw = match signal {
        "tone" => sine(440.0, n, SOURCE_RATE, 0.8, 0.0),
        "noise" => white_noise(n, 0.8, 7),
        "chirp" => chirp(100.0, 4000.0, n, SOURCE_RATE, 0.8),
        other => return Err(format!("unknown signal `{other}` (tone, noise or chirp)")),
    };
    let w = preprocess(&Waveform::mono(raw, SOURCE_RATE, 1.0)).map_err(|e| e.to_string())?;
    let windows = extract_windows(&w, window_seconds, overlap).map_err(|e| e.to_string())?;
    let win = window_samples(window_seconds, w.sample_rate).map_err(|e| e.to_string())?;
    let hop = ((win as f64 * (1.0 - overlap)).round() as usize).max(1);
    let starts = window_starts(w.samples.len(), win, hop);
    debug_assert_eq!(starts.len(), windows.len());
    let bins = bins.clamp(1, 4096);
    let per = w.samples.len().div_ceil(bins).max(1);
    let envelope = w
        .samples
        .chunks(per)
        .map(|c| {
            c.iter()
                .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .collect();
    Ok(WindowReport {
        samples: w.samples.len(),
        sample_rate: w.sample_rate,
        window: win,
        hop,
        starts,
        peak: w.samples.iter().fold(0.0f32, |m, v| m.max(v.abs())),
        envelope,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

#[wasm_bindgen(js_name = layerShapes)]
pub fn layer_shapes(arch: &str, input_length: u32) -> Result<String, JsError> {
    to_json(shape_report(arch, input_length as usize))
}

#[wasm_bindgen(js_name = softmaxKl)]
pub fn softmax_kl(teacher_logits: &[f64], student_logits: &[f64]) -> Result<String, JsError> {
    to_json(kl_report(teacher_logits, student_logits))
}

#[wasm_bindgen(js_name = windowView)]
pub fn window_view(
    signal: &str,
    seconds: f64,
    window_seconds: f64,
    overlap: f64,
    bins: u32,
) -> Result<String, JsError> {
    to_json(window_report(signal, seconds, window_seconds, overlap, bins as usize))
}
