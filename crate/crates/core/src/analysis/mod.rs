//! Piecewise-linear analysis of ReLU encoder-decoder networks.
//!
//! Each input selects an [`ActivationPattern`]; on the region sharing that
//! pattern the network is the linear map `B̃(x)B(x)ᵀ`. This module builds
//! those frames, counts sampled regions against the closed-form bounds and
//! estimates Lipschitz constants.

mod enumerate;
mod linrep;
pub mod lp;
mod pattern;
mod regions;

pub use enumerate::{cone_is_open, exact_patterns, exact_region_count, MAX_ENUMERATION_SITES};
pub use linrep::{
    input_kink_margin, jacobian_analytic, jacobian_fd, linear_rep, linear_rep_for_pattern, upsilon,
    upsilon_tilde, LinearRep, DEFAULT_KINK_MARGIN,
};
pub use pattern::{extract_pattern, masked_forward, ActivationPattern};
pub use regions::{
    lipschitz_global, mask_bit_bound, mask_bit_count, nrep_bound, region_census, sample_inputs,
    LipschitzEstimate, RegionCensus, RegionEntry, SampleDistribution, SamplerConfig,
};
