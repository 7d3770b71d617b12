//! Training loss, gradients and gradient-norm certificates.
//!
//! Gradients with respect to a single layer operator (`S̃^l` or `E^κ`) treat
//! that operator as a free matrix and are computed three ways: the literal
//! Kronecker form, reverse-mode propagation through the dense operators,
//! and central finite differences. The trainer instead updates the shared
//! filter taps, chaining the operator gradients through the block structure.

mod certify;
mod data;
mod grad;
mod train;

pub use certify::{
    certify_bounds_enc, certify_bounds_skip, check_stationarity, BoundCertificate,
    EncoderCertificates, FeatureSide, StationarityLayer, StationarityReport, StationarityStatus,
    DEFAULT_BOUND_SLACK,
};
pub use data::{feature_matrices, loss, traces, FeatureMatrices, SpectrumSummary, TrainingSet};
pub use grad::{
    backprop, bank_params, encoder_factors, encoder_parts, fd_matrix_gradient,
    flatten_tap_gradients, grad_enc_analytic, grad_skip_analytic, loss_and_tap_gradient,
    margin_safe_traces, set_bank_params, skip_factors, skip_parts, tap_gradients, KroneckerParts,
    MatrixGradients, Operator, TapGradients,
};
pub use train::{
    train_gd, Checkpoint, StopReason, TrainConfig, TrainResult, TrainStep, DIVERGENCE_LOSS,
};
