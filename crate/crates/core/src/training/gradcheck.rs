//! End-to-end comparison of backpropagated gradients against central
//! finite differences, run in `f64`.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::network::{backward, forward_trace, init_params, LayerSpec, NetworkConfig, Parameters};
use crate::ops::Mode;
use crate::tensor::Tensor3;

/// Denominator floor of the relative error, so that two gradients that are
/// both numerically zero compare equal.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

/// Built-in toy problems small enough for 64-bit finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ToyScale {
    /// conv-bn-relu, pool, conv-bn-relu, transposed conv; batch 3, length 32.
    #[default]
    Tiny,
    /// Wider and deeper variant; batch 4, length 96.
    Small,
}

impl std::str::FromStr for ToyScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Self::Tiny),
            "small" => Ok(Self::Small),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale `{other}` (expected tiny or small)"
            ))),
        }
    }
}

fn block(l: &mut Vec<LayerSpec>, name: &str, cin: usize, cout: usize, k: usize, s: usize, p: usize) {
    l.push(LayerSpec::conv(name, cin, cout, k, s, p));
    l.push(LayerSpec::batchnorm(&format!("{name}_bn"), cout));
    l.push(LayerSpec::relu(&format!("{name}_relu")));
}

/// A toy network, perturbed parameters and a Gaussian input batch.
pub fn toy_problem(scale: ToyScale, seed: u64) -> Result<(NetworkConfig, Parameters<f64>, Tensor3<f64>)> {
    let mut l = Vec::new();
    let (batch, len) = match scale {
        ToyScale::Tiny => {
            block(&mut l, "conv1", 1, 4, 5, 2, 2);
            l.push(LayerSpec::maxpool("pool1", 2, 2));
            block(&mut l, "conv2", 4, 8, 3, 1, 1);
            l.push(LayerSpec::transposed_conv("deconv", 8, 3, 4, 2, 1));
            (3, 32)
        }
        ToyScale::Small => {
            block(&mut l, "conv1", 1, 4, 8, 2, 4);
            l.push(LayerSpec::maxpool("pool1", 2, 2));
            block(&mut l, "conv2", 4, 6, 4, 2, 2);
            block(&mut l, "conv3", 6, 6, 3, 1, 1);
            l.push(LayerSpec::transposed_conv("deconv3", 6, 4, 4, 2, 1));
            l.push(LayerSpec::conv("out", 4, 3, 3, 1, 1));
            (4, 96)
        }
    };
    let net = NetworkConfig::new("custom", l, Vec::new())?;
    let mut params: Parameters<f64> = init_params(&net, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (name, values) in params.trainable_mut() {
        let (base, spread) = if name.ends_with(".gamma") {
            (1.0, 0.2)
        } else if name.ends_with(".weight") {
            (0.0, 0.3)
        } else {
            (0.0, 0.1)
        };
        for v in values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = base + spread * z;
        }
    }
    let input = Tensor3::from_vec(
        batch,
        1,
        len,
        (0..batch * len).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )?;
    Ok((net, params, input))
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Total number of scalar parameters to probe, spread over all arrays.
    pub samples: usize,
    /// Central-difference step.
    pub step: f64,
    pub seed: u64,
    /// Test hook: scales every analytic gradient by `1 + corrupt`.
    pub corrupt_backward: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            step: 1e-4,
            seed: 0,
            corrupt_backward: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerError {
    pub layer: String,
    /// Array holding the worst offender, e.g. `conv1.weight`.
    pub array: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Worst offender per layer, in layer order.
    pub per_layer: Vec<LayerError>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "layer\tarray\tindex\tanalytic\tnumeric\trel_error\tchecked");
        for l in &self.per_layer {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.3e}\t{}",
                l.layer, l.array, l.index, l.analytic, l.numeric, l.relative_error, l.checked
            );
        }
        let _ = writeln!(
            out,
            "max_relative_error\t{:.3e}\tchecked\t{}",
            self.max_relative_error, self.checked
        );
        out
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Quadratic probe loss `0.5 * sum (y - r)^2` with a seeded Gaussian target.
struct ProbeLoss {
    target: Vec<f64>,
}

impl ProbeLoss {
    fn value(&self, y: &Tensor3<f64>) -> f64 {
        0.5 * y
            .as_slice()
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn gradient(&self, y: &Tensor3<f64>) -> Tensor3<f64> {
        let (b, c, l) = y.shape();
        let g = y.as_slice().iter().zip(&self.target).map(|(a, b)| a - b).collect();
        Tensor3::from_vec(b, c, l, g).expect("same shape")
    }
}

fn loss_at(net: &NetworkConfig, params: &Parameters<f64>, input: &Tensor3<f64>, probe: &ProbeLoss) -> Result<f64> {
    let trace = forward_trace(net, params, input, Mode::Train)?;
    Ok(probe.value(trace.output()))
}

fn set_scalar(params: &mut Parameters<f64>, array: &str, index: usize, value: f64) {
    for (name, values) in params.trainable_mut() {
        if name == array {
            values[index] = value;
            return;
        }
    }
}

/// Spreads `total` probes over arrays as evenly as their sizes allow.
fn quotas(sizes: &[usize], total: usize) -> Vec<usize> {
    let mut q = vec![0; sizes.len()];
    let mut left = total.min(sizes.iter().sum());
    while left > 0 {
        for (qi, &n) in q.iter_mut().zip(sizes) {
            if left > 0 && *qi < n {
                *qi += 1;
                left -= 1;
            }
        }
    }
    q
}

/// Compares train-mode gradients of a quadratic probe loss with central
/// differences on a random subset of parameters.
pub fn gradient_check(
    net: &NetworkConfig,
    params: &Parameters<f64>,
    input: &Tensor3<f64>,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    params.check_against(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let trace = forward_trace(net, params, input, Mode::Train)?;
    let probe = ProbeLoss {
        target: (0..trace.output().as_slice().len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    };
    let mut grads = backward(net, params, input, &trace, &probe.gradient(trace.output()))?;
    if let Some(c) = options.corrupt_backward {
        grads.scale(1.0 + c);
    }

    let arrays: Vec<(String, Vec<f64>)> = params.trainable().into_iter().map(|(n, a)| (n, a.to_vec())).collect();
    let quotas = quotas(
        &arrays.iter().map(|(_, a)| a.len()).collect::<Vec<_>>(),
        options.samples,
    );
    let mut worst: BTreeMap<String, LayerError> = BTreeMap::new();
    let mut checked = 0;
    let mut probe_params = params.clone();
    for ((name, values), quota) in arrays.iter().zip(quotas) {
        let layer = name.split('.').next().unwrap_or(name).to_string();
        let picks = sample(&mut rng, values.len(), quota);
        for index in picks.iter() {
            let original = values[index];
            set_scalar(&mut probe_params, name, index, original + options.step);
            let plus = loss_at(net, &probe_params, input, &probe)?;
            set_scalar(&mut probe_params, name, index, original - options.step);
            let minus = loss_at(net, &probe_params, input, &probe)?;
            set_scalar(&mut probe_params, name, index, original);
            let numeric = (plus - minus) / (2.0 * options.step);
            let analytic = grads.get(name).map_or(0.0, |g| g[index]);
            let err = relative_error(analytic, numeric);
            checked += 1;
            let entry = worst.entry(layer.clone()).or_insert_with(|| LayerError {
                layer: layer.clone(),
                array: name.clone(),
                index,
                analytic,
                numeric,
                relative_error: err,
                checked: 0,
            });
            entry.checked += 1;
            if err > entry.relative_error || err.is_nan() {
                entry.array = name.clone();
                entry.index = index;
                entry.analytic = analytic;
                entry.numeric = numeric;
                entry.relative_error = err;
            }
        }
    }
    let mut per_layer: Vec<LayerError> = net.layers.iter().filter_map(|l| worst.remove(&l.name)).collect();
    per_layer.extend(worst.into_values());
    let max_relative_error = per_layer.iter().map(|l| l.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        checked,
        per_layer,
    })
}
