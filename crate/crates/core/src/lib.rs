//! Encoder-decoder CNNs realized as explicit dense matrix operators.
//!
//! The crate builds symmetric 1-D encoder-decoder networks (optionally with
//! skipped connections) from filter banks and pooling matrices, then checks
//! their geometry numerically:
//!
//! - [`convops`]: circular convolution and wrap-around Hankel matrices.
//! - [`netbuild`]: layer operators `E`, `D`, `S`, `S̃` and forward passes.
//! - [`frames`]: frame-condition banks, frame bases and perfect reconstruction.
//! - [`analysis`]: activation patterns, input-dependent frames `B(x)`/`B̃(x)`,
//!   linear-region census and Lipschitz constants.
//! - [`landscape`]: loss, Kronecker-form gradients and gradient sandwich bounds.
//!
//! All operators are dense `f64` matrices; the toolkit targets small
//! ("desk scale") problems where exactness matters more than speed.

pub mod analysis;
pub mod convops;
mod error;
pub mod frames;
pub mod landscape;
pub mod linalg;
pub mod netbuild;
pub mod rng;
pub mod serial;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use netbuild::{LayerBank, LayerMatrices, Network, NetworkSpec, Nonlinearity};

/// Default absolute tolerance for exact algebraic identities.
pub const DEFAULT_TOL: f64 = 1e-10;
