use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soundnet::network::Architecture;
use soundnet::training::LossKind;

mod extract;
mod gradcheck;
mod svm;
mod train;

/// Sound networks on raw waveforms: distillation training, feature
/// extraction and linear SVM classification.
#[derive(Debug, Parser)]
#[command(name = "soundnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network from a manifest of audio and teacher posteriors.
    Train(TrainArgs),
    /// Extract windowed features at a named layer into a feature dump.
    Extract(ExtractArgs),
    /// Train or evaluate a one-vs-all linear SVM over feature dumps.
    #[command(subcommand)]
    Svm(SvmCommand),
    /// Compare backpropagated gradients with finite differences on a toy network.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key=value run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV manifest with header `audio,teacher`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["kl", "l2"])]
    pub loss: Option<String>,
    #[arg(long, value_parser = ["soundnet8", "soundnet5", "autoencoder4"])]
    pub arch: Option<String>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl TrainArgs {
    fn loss(&self) -> Option<LossKind> {
        self.loss.as_deref().map(|s| s.parse().expect("validated by clap"))
    }

    fn arch(&self) -> Option<Architecture> {
        self.arch.as_deref().map(|s| s.parse().expect("validated by clap"))
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "pool5")]
    pub layer: String,
    #[arg(long, default_value_t = 1.0)]
    pub window_seconds: f64,
    #[arg(long, default_value_t = soundnet::audio::DEFAULT_OVERLAP)]
    pub overlap: f64,
    /// Average each channel over time instead of flattening channels × time.
    #[arg(long)]
    pub mean_over_time: bool,
    /// Feature dump to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Take audio paths from a manifest (either mode).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// WAV files to process.
    pub audio: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SvmCommand {
    /// Fit one-vs-all classifiers, choosing C by cross-validation.
    Train(SvmTrainArgs),
    /// Classify recordings by their mean window score and report accuracy.
    Eval(SvmEvalArgs),
}

#[derive(Debug, Args)]
pub struct SvmTrainArgs {
    /// Feature dumps; window ids look like `<recording>#<window>`.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// CSV with header `audio,label`; recordings match by file stem.
    #[arg(long)]
    pub labels: PathBuf,
    /// Model file to write (JSON).
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = soundnet::svm::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Comma-separated candidate values of C.
    #[arg(long, value_delimiter = ',', default_values_t = soundnet::svm::DEFAULT_C_GRID.to_vec())]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SvmEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write the confusion matrix CSV here.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Toy problem size: tiny or small.
    #[arg(long, default_value = "tiny")]
    pub scale: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of parameters to probe.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Scales every analytic gradient by 1 + x to exercise the failure path.
    #[arg(long, hide = true)]
    pub corrupt_backward: Option<f64>,
}

/// A failed command: `usage` errors exit with 2, everything else with 1.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<soundnet::Error> for Failure {
    fn from(e: soundnet::Error) -> Self {
        use soundnet::Error as E;
        match e {
            E::Config { .. } | E::Manifest(_) | E::UnknownLayer { .. } | E::InvalidArgument(_) => {
                Self::usage(e.to_string())
            }
            other => Self::runtime(other.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn warn(message: impl std::fmt::Display) {
    eprintln!("warning: {message}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train::run(&a),
        Command::Extract(a) => extract::run(&a),
        Command::Svm(SvmCommand::Train(a)) => svm::train(&a),
        Command::Svm(SvmCommand::Eval(a)) => svm::eval(&a),
        Command::Gradcheck(a) => gradcheck::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
