//! Layer kernels with explicit forward and backward passes.
//!
//! Every function here is pure: inputs are borrowed, results are returned,
//! and batch norm hands back updated running statistics instead of
//! mutating its parameters.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod pool;
pub mod prob;

pub use activation::{relu_backward, relu_forward};
pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormGrads, BatchNormOutput, BatchNormParams, Mode,
    RunningStats,
};
pub use conv::{
    conv1d_backward, conv1d_forward, conv_min_input_len, conv_output_len, transposed_conv1d_backward,
    transposed_conv1d_forward, transposed_min_input_len, transposed_output_len, ConvGrads, ConvParams,
};
pub use pool::{maxpool1d_backward, maxpool1d_forward, pool_min_input_len, pool_output_len, PoolIndices};
pub use prob::{kl_divergence, kl_divergence_with_floor, kl_softmax_gradient, softmax, KL_FLOOR};
