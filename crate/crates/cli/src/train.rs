use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use soundnet::audio::{load_wav, preprocess};
use soundnet::formats::{
    load_checkpoint, load_posteriors, save_checkpoint, Checkpoint, Manifest, RowTarget, RunConfig, TrainingMeta,
};
use soundnet::network::{init_params, HeadSplit, NetworkConfig, Parameters};
use soundnet::training::{
    train_autoencoder, train_distill, DistillSample, IterationRecord, TeacherPosterior, TrainingSink,
};

use crate::{warn, CmdResult, Failure, TrainArgs};

const PROGRESS_EVERY: usize = 100;

/// Appends to the metrics log and writes checkpoints as training runs.
struct FileSink {
    dir: PathBuf,
    network: NetworkConfig,
    seed: u64,
    metrics: BufWriter<File>,
    metrics_path: PathBuf,
    stop_loss: Option<f64>,
    last_checkpoint: Option<PathBuf>,
}

impl TrainingSink for FileSink {
    fn on_iteration(&mut self, r: &IterationRecord) -> soundnet::Result<ControlFlow<()>> {
        writeln!(self.metrics, "{}", r.log_line())
            .and_then(|_| self.metrics.flush())
            .map_err(|e| soundnet::Error::Io {
                path: self.metrics_path.clone(),
                source: e,
            })?;
        if r.iteration.is_multiple_of(PROGRESS_EVERY) {
            eprintln!("iteration {} loss {:.6}", r.iteration, r.loss);
        }
        Ok(match self.stop_loss {
            Some(target) if r.loss <= target => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        })
    }

    fn on_checkpoint(&mut self, iteration: usize, params: &Parameters<f32>, loss: f64) -> soundnet::Result<()> {
        let ck = Checkpoint {
            network: self.network.clone(),
            params: params.clone(),
            meta: TrainingMeta {
                iteration: iteration as u64,
                seed: self.seed,
                loss,
            },
        };
        let path = self.dir.join(format!("checkpoint-{iteration:08}.sndc"));
        save_checkpoint(&path, &ck)?;
        save_checkpoint(&self.dir.join("latest.sndc"), &ck)?;
        self.last_checkpoint = Some(path);
        Ok(())
    }
}

fn select_teacher(path: &Path, id: &str) -> soundnet::Result<TeacherPosterior> {
    let clips = load_posteriors(path)?;
    if clips.len() == 1 {
        return Ok(clips.into_iter().next().expect("one clip"));
    }
    clips
        .into_iter()
        .find(|c| c.clip_id == id)
        .ok_or_else(|| soundnet::Error::Malformed(format!("{} holds no clip `{id}`", path.display())))
}

fn load_waveform(path: &Path) -> soundnet::Result<Vec<f32>> {
    Ok(preprocess(&load_wav(path)?)?.samples)
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(loss) = args.loss() {
        cfg.loss = loss;
    }
    if let Some(arch) = args.arch() {
        cfg.arch = arch;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    println!("soundnet train: {}", cfg.header());

    if !args.manifest.exists() {
        return Err(Failure::usage(format!(
            "manifest not found: {}",
            args.manifest.display()
        )));
    }
    let manifest = Manifest::load(&args.manifest)?;

    let (network, params) = match &args.checkpoint {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if args.arch.is_some() && ck.network.name != cfg.arch.name() {
                return Err(Failure::usage(format!(
                    "checkpoint holds `{}` but --arch asks for `{}`",
                    ck.network.name, cfg.arch
                )));
            }
            (ck.network, ck.params)
        }
        None => {
            let net = cfg.arch.build();
            let params = init_params(&net, cfg.train.seed);
            (net, params)
        }
    };

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    let metrics_path = cfg.output_dir.join("metrics.tsv");
    let metrics = File::create(&metrics_path)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", metrics_path.display())))?;
    let mut sink = FileSink {
        dir: cfg.output_dir.clone(),
        network: network.clone(),
        seed: cfg.train.seed,
        metrics: BufWriter::new(metrics),
        metrics_path,
        stop_loss: cfg.stop_loss,
        last_checkpoint: None,
    };

    let autoencoder = network.output_channels() == NetworkConfig::INPUT_CHANNELS;
    let outcome = if autoencoder {
        let mut clips = Vec::new();
        for row in &manifest.rows {
            match load_waveform(&row.audio) {
                Ok(w) => clips.push(w),
                Err(e) => warn(format!("skipping {}: {e}", row.audio.display())),
            }
        }
        if clips.is_empty() {
            return Err(Failure::runtime("no readable audio in the manifest"));
        }
        train_autoencoder(&network, params, &clips, &cfg.train, &mut sink)?
    } else {
        let mut samples = Vec::new();
        for row in &manifest.rows {
            let RowTarget::Teacher(teacher_path) = &row.target else {
                return Err(Failure::usage("training needs a manifest with header `audio,teacher`"));
            };
            let id = row.id();
            let loaded = load_waveform(&row.audio).and_then(|w| Ok((w, select_teacher(teacher_path, &id)?)));
            match loaded {
                Ok((waveform, teacher)) => samples.push(DistillSample { id, waveform, teacher }),
                Err(e) => warn(format!("skipping {}: {e}", row.audio.display())),
            }
        }
        if samples.is_empty() {
            return Err(Failure::runtime("no readable samples in the manifest"));
        }
        train_distill(
            &network,
            params,
            &samples,
            &cfg.train,
            cfg.loss,
            &HeadSplit::default(),
            &mut sink,
        )?
    };
    println!(
        "finished after {} iterations, final loss {:.6}",
        outcome.iterations, outcome.final_loss
    );
    if let Some(path) = sink.last_checkpoint {
        println!("checkpoint: {}", path.display());
    }
    Ok(())
}
