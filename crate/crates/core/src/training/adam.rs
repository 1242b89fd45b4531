use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{Gradients, Parameters};
use crate::tensor::Real;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Write a checkpoint every this many iterations; 0 disables periodic checkpoints.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            max_iterations: 100_000,
            seed: 0,
            checkpoint_interval: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", "must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        Ok(())
    }
}

/// First and second moment estimates of one named array.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T = f32> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub moments: BTreeMap<String, Moments<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like the trainable arrays of `params`.
    pub fn new(params: &Parameters<T>) -> Self {
        let moments = params
            .trainable()
            .into_iter()
            .map(|(name, a)| {
                (
                    name,
                    Moments {
                        m: vec![T::zero(); a.len()],
                        v: vec![T::zero(); a.len()],
                    },
                )
            })
            .collect();
        Self { moments, step: 0 }
    }
}

/// Bias-corrected Adam update of one array at (1-based) step `t`.
pub fn adam_update<T: Real>(values: &mut [T], grads: &[T], moments: &mut Moments<T>, t: u64, config: &TrainConfig) {
    let b1 = T::from_f64_lossy(config.beta1);
    let b2 = T::from_f64_lossy(config.beta2);
    let eps = T::from_f64_lossy(config.adam_epsilon);
    let t = t as i32;
    let c1 = T::from_f64_lossy(1.0 - config.beta1.powi(t));
    let c2 = T::from_f64_lossy(1.0 - config.beta2.powi(t));
    let lr = T::from_f64_lossy(config.learning_rate);
    for (((x, &g), m), v) in values
        .iter_mut()
        .zip(grads)
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One optimizer step over every trainable array. Increments `state.step`.
pub fn adam_step<T: Real>(
    params: &mut Parameters<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<()> {
    // validate everything before touching any parameter
    for (name, values) in params.trainable() {
        let g = grads
            .get(&name)
            .ok_or_else(|| Error::Training(format!("missing gradient for `{name}`")))?;
        let mo = state
            .moments
            .get(&name)
            .ok_or_else(|| Error::Training(format!("missing optimizer state for `{name}`")))?;
        if g.len() != values.len() || mo.m.len() != values.len() || mo.v.len() != values.len() {
            return Err(Error::ShapeMismatch {
                dimension: "optimizer array",
                expected: values.len(),
                actual: g.len(),
            });
        }
    }
    state.step += 1;
    let t = state.step;
    for (name, values) in params.trainable_mut() {
        let g = grads.get(&name).expect("checked above");
        let mo = state.moments.get_mut(&name).expect("checked above");
        adam_update(values, g, mo, t, config);
    }
    Ok(())
}
