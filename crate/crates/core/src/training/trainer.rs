//! Mini-batch training loops for distillation and the autoencoder baseline.

use std::ops::ControlFlow;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState, TrainConfig};
use super::loss::{loss_for, mse_loss, LossKind, TeacherPosterior};
use crate::error::{Error, Result};
use crate::network::{backward, forward_trace, HeadSplit, NetworkConfig, Parameters};
use crate::ops::Mode;
use crate::tensor::Tensor3;

/// One preprocessed waveform paired with its teacher distributions.
#[derive(Debug, Clone)]
pub struct DistillSample {
    pub id: String,
    pub waveform: Vec<f32>,
    pub teacher: TeacherPosterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub wall_ms: f64,
    pub loss: f64,
}

impl IterationRecord {
    /// `iteration<TAB>wall-ms<TAB>loss`
    pub fn log_line(&self) -> String {
        format!("{}\t{:.3}\t{:.9}", self.iteration, self.wall_ms, self.loss)
    }
}

/// Receives progress from a training loop.
pub trait TrainingSink {
    /// Called after every optimizer step. Returning `Break` ends training.
    fn on_iteration(&mut self, _record: &IterationRecord) -> Result<ControlFlow<()>> {
        Ok(ControlFlow::Continue(()))
    }

    /// Called every `checkpoint_interval` iterations and once at the end.
    fn on_checkpoint(&mut self, _iteration: usize, _params: &Parameters<f32>, _loss: f64) -> Result<()> {
        Ok(())
    }
}

impl TrainingSink for () {}

/// Collects the loss trace and optionally stops at a loss target.
#[derive(Debug, Default)]
pub struct LossTrace {
    pub records: Vec<IterationRecord>,
    pub stop_below: Option<f64>,
}

impl LossTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }
}

impl TrainingSink for LossTrace {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<ControlFlow<()>> {
        self.records.push(*record);
        Ok(match self.stop_below {
            Some(target) if record.loss <= target => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters<f32>,
    pub adam: AdamState<f32>,
    pub iterations: usize,
    pub final_loss: f64,
}

/// Seeded epoch-wise reshuffling over `n` sample indices.
#[derive(Debug)]
pub struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            pos: n,
        }
    }

    /// Next batch; the final batch of an epoch may be short.
    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

fn stack(clips: &[&[f32]]) -> Result<Tensor3<f32>> {
    Tensor3::from_signals(clips)
}

fn train_loop(
    params: Parameters<f32>,
    n_samples: usize,
    config: &TrainConfig,
    sink: &mut dyn TrainingSink,
    mut step: impl FnMut(&mut Parameters<f32>, &mut AdamState<f32>, &[usize]) -> Result<f64>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if n_samples == 0 {
        return Err(Error::Training("no usable training samples".into()));
    }
    let mut params = params;
    let mut adam = AdamState::new(&params);
    let mut sampler = BatchSampler::new(n_samples, config.seed);
    let start = Instant::now();
    let mut last_loss = f64::NAN;
    let mut last_saved = 0;
    let mut iteration = 0;
    while iteration < config.max_iterations {
        iteration += 1;
        let batch = sampler.next_batch(config.batch_size);
        last_loss = step(&mut params, &mut adam, &batch)?;
        if !last_loss.is_finite() {
            return Err(Error::Training(format!(
                "loss became non-finite at iteration {iteration}"
            )));
        }
        let record = IterationRecord {
            iteration,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            loss: last_loss,
        };
        let flow = sink.on_iteration(&record)?;
        if config.checkpoint_interval > 0 && iteration % config.checkpoint_interval == 0 {
            sink.on_checkpoint(iteration, &params, last_loss)?;
            last_saved = iteration;
        }
        if flow.is_break() {
            break;
        }
    }
    if iteration > 0 && last_saved != iteration {
        sink.on_checkpoint(iteration, &params, last_loss)?;
    }
    Ok(TrainOutcome {
        params,
        adam,
        iterations: iteration,
        final_loss: last_loss,
    })
}

/// Student output timesteps for clips of `len` samples.
pub fn student_timesteps(net: &NetworkConfig, len: usize) -> Result<usize> {
    Ok(*net.output_lengths(len)?.last().expect("network has layers"))
}

/// Distills the teachers into `params` with Adam on train-mode batches.
/// Every clip must have the same length and teacher timesteps equal to the
/// student's output length for that clip length.
pub fn train_distill(
    net: &NetworkConfig,
    params: Parameters<f32>,
    samples: &[DistillSample],
    config: &TrainConfig,
    loss: LossKind,
    split: &HeadSplit,
    sink: &mut dyn TrainingSink,
) -> Result<TrainOutcome> {
    params.check_against(net)?;
    if net.output_channels() != split.total() {
        return Err(Error::ShapeMismatch {
            dimension: "network output channels",
            expected: split.total(),
            actual: net.output_channels(),
        });
    }
    if let Some(first) = samples.first() {
        let len = first.waveform.len();
        let steps = student_timesteps(net, len)?;
        for s in samples {
            if s.waveform.len() != len {
                return Err(Error::Training(format!(
                    "clip `{}` has {} samples, expected {len} like the first clip",
                    s.id,
                    s.waveform.len()
                )));
            }
            if s.teacher.timesteps != steps {
                return Err(Error::Training(format!(
                    "clip `{}` carries {} teacher timesteps but the student emits {steps}",
                    s.id, s.teacher.timesteps
                )));
            }
        }
    }
    train_loop(params, samples.len(), config, sink, |params, adam, batch| {
        let clips: Vec<&[f32]> = batch.iter().map(|&i| samples[i].waveform.as_slice()).collect();
        let teachers: Vec<TeacherPosterior> = batch.iter().map(|&i| samples[i].teacher.clone()).collect();
        let x = stack(&clips)?;
        let trace = forward_trace(net, params, &x, Mode::Train)?;
        let (value, grad) = loss_for(loss, trace.output(), &teachers, split)?;
        let grads = backward(net, params, &x, &trace, &grad)?;
        params.apply_running_stats(trace.running);
        adam_step(params, &grads, adam, config)?;
        Ok(value)
    })
}

/// Trains a length-preserving network to reconstruct its input under MSE.
pub fn train_autoencoder(
    net: &NetworkConfig,
    params: Parameters<f32>,
    clips: &[Vec<f32>],
    config: &TrainConfig,
    sink: &mut dyn TrainingSink,
) -> Result<TrainOutcome> {
    params.check_against(net)?;
    if net.output_channels() != NetworkConfig::INPUT_CHANNELS {
        return Err(Error::InvalidNetwork("autoencoder must output a single channel".into()));
    }
    if let Some(first) = clips.first() {
        let len = first.len();
        if clips.iter().any(|c| c.len() != len) {
            return Err(Error::Training("autoencoder clips must share one length".into()));
        }
        let out = *net.output_lengths(len)?.last().expect("layers");
        if out != len {
            return Err(Error::Training(format!(
                "clip length {len} is not reproduced by the decoder (got {out}); pick a length the autoencoder maps onto itself"
            )));
        }
    }
    train_loop(params, clips.len(), config, sink, |params, adam, batch| {
        let refs: Vec<&[f32]> = batch.iter().map(|&i| clips[i].as_slice()).collect();
        let x = stack(&refs)?;
        let trace = forward_trace(net, params, &x, Mode::Train)?;
        let (value, grad) = mse_loss(trace.output(), &x)?;
        let grads = backward(net, params, &x, &trace, &grad)?;
        params.apply_running_stats(trace.running);
        adam_step(params, &grads, adam, config)?;
        Ok(value)
    })
}
