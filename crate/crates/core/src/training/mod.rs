//! Losses, the Adam optimizer, training loops and gradient checking.

mod adam;
pub mod gradcheck;
mod loss;
mod trainer;

pub use adam::{adam_step, adam_update, AdamState, Moments, TrainConfig};
pub use gradcheck::{gradient_check, relative_error, GradCheckOptions, GradCheckReport, LayerError};
pub use loss::{distill_loss, l2_loss, loss_for, mse_loss, LossKind, TeacherPosterior};
pub use trainer::{
    student_timesteps, train_autoencoder, train_distill, BatchSampler, DistillSample, IterationRecord, LossTrace,
    TrainOutcome, TrainingSink,
};
