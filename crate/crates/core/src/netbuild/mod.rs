//! Encoder-decoder network construction.
//!
//! A network is fully described by a [`NetworkSpec`] (shapes) and a
//! [`LayerBank`] (filters and pooling matrices). [`Network::build`] turns the
//! pair into dense layer operators; the forward pass is then a sequence of
//! matrix-vector products. Biases are not modelled: a bias can be absorbed as
//! an extra column of `E^l`/`D^l` acting on a constant input channel, which
//! keeps every linear region a cone through the origin.

mod bank;
mod dims;
mod layer;
mod network;
mod spec;

pub use crate::convops::FilterTensor;
pub use bank::{LayerBank, LayerBankJson, LayerJson, LayerParams, BANK_FORMAT};
pub use dims::{check_dims, check_embedding_dims, DimWarning};
pub use layer::{
    build_layer_matrices, circulant, filtered_blocks, skip_operators, tap_basis, LayerMatrices,
};
pub use network::{decoder_step, encoder_step, DecoderStep, EncoderStep, ForwardTrace, Network};
pub use spec::{NetworkSpec, Nonlinearity};
