//! Fully convolutional networks on raw audio waveforms.
//!
//! The crate covers the whole pipeline: waveform ingestion and windowing
//! ([`audio`]), dense 1-D kernels with explicit backward passes ([`ops`]),
//! the SoundNet-8, SoundNet-5 and convolutional autoencoder architectures
//! ([`network`]), teacher-student distillation with Adam ([`training`]),
//! one-vs-all linear SVMs over internal activations ([`svm`],
//! [`features`]) and the on-disk formats ([`formats`]).

pub mod audio;
pub mod error;
pub mod features;
pub mod formats;
pub mod network;
pub mod ops;
pub mod svm;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor3};
