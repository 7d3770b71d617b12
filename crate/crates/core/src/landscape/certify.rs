use serde::Serialize;

use crate::linalg::{numerical_rank, singular_values, Matrix};
use crate::netbuild::Network;
use crate::Result;

use super::data::{SpectrumSummary, TrainingSet};
use super::grad::{encoder_parts, margin_safe_traces, KroneckerParts};

/// Which feature matrix a gradient bound pairs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSide {
    /// `Γ^l`, skip branch of layer `l`.
    Skip,
    /// `Ξ^{κ-1}`, the features that `E^κ` acts on.
    EncoderInput,
    /// `Ξ^κ`, the bottleneck features.
    EncoderOutput,
}

/// Singular-value sandwich `lower ≤ ‖∇‖_F ≤ upper` for one gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub layer: usize,
    pub features: FeatureSide,
    pub grad_norm: f64,
    pub lower: f64,
    pub upper: f64,
    pub loss: f64,
    pub feature_spectrum: SpectrumSummary,
    /// Smallest and largest singular value of each sample's factor.
    pub factor_sigma: Vec<[f64; 2]>,
    /// Features at least as tall as `T`.
    pub features_tall: bool,
    /// Factors at least as tall as `d_0`.
    pub factors_tall: bool,
    /// Both dimension preconditions hold.
    pub applicable: bool,
    pub slack: f64,
    /// `lower − slack·scale ≤ ‖∇‖ ≤ upper + slack·scale` with `scale = max(upper, ‖∇‖)`.
    pub holds: bool,
}

/// Relative slack used when evaluating the sandwich.
pub const DEFAULT_BOUND_SLACK: f64 = 1e-8;

fn certificate(
    layer: usize,
    side: FeatureSide,
    features: &Matrix,
    factors: &[Matrix],
    grad_norm: f64,
    loss: f64,
    slack: f64,
) -> BoundCertificate {
    let t = features.ncols();
    let d0 = factors[0].ncols();
    let feature_spectrum = SpectrumSummary::of(features);
    let factor_sigma: Vec<[f64; 2]> = factors
        .iter()
        .map(|f| {
            let s = singular_values(f);
            [
                s.last().copied().unwrap_or(0.0),
                s.first().copied().unwrap_or(0.0),
            ]
        })
        .collect();
    let min_factor = factor_sigma
        .iter()
        .map(|s| s[0])
        .fold(f64::INFINITY, f64::min);
    let max_factor = factor_sigma.iter().map(|s| s[1]).fold(0.0, f64::max);
    let root = (2.0 * loss).sqrt();
    let lower = feature_spectrum.sigma_min * min_factor * root;
    let upper = feature_spectrum.sigma_max * max_factor * root;
    let scale = upper.max(grad_norm);
    let features_tall = features.nrows() >= t;
    let factors_tall = factors[0].nrows() >= d0;
    BoundCertificate {
        layer,
        features: side,
        grad_norm,
        lower,
        upper,
        loss,
        feature_spectrum,
        factor_sigma,
        features_tall,
        factors_tall,
        applicable: features_tall && factors_tall,
        slack,
        holds: lower - slack * scale <= grad_norm && grad_norm <= upper + slack * scale,
    }
}

fn grad_norm(parts: &KroneckerParts) -> f64 {
    parts.vec_gradient().norm()
}

/// Bounds on `‖∇_{S̃^l}C‖_F` through `Γ^l` and `Λ̃^lΥ̃^{l-1}ᵀ`.
pub fn certify_bounds_skip(
    net: &Network,
    data: &TrainingSet,
    l: usize,
    margin: f64,
) -> Result<BoundCertificate> {
    let parts = super::grad::skip_parts(net, data, l, margin)?;
    Ok(certificate(
        l,
        FeatureSide::Skip,
        &parts.features,
        &parts.factors,
        grad_norm(&parts),
        parts.loss,
        DEFAULT_BOUND_SLACK,
    ))
}

/// Bounds on `‖∇_{E^κ}C‖_F` under both feature pairings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncoderCertificates {
    /// `Ξ^{κ-1}`: the features `E^κ` multiplies, which the gradient factors through.
    pub input_features: BoundCertificate,
    /// `Ξ^κ`: the bottleneck features.
    pub output_features: BoundCertificate,
}

pub fn certify_bounds_enc(
    net: &Network,
    data: &TrainingSet,
    margin: f64,
) -> Result<EncoderCertificates> {
    let kappa = net.spec().kappa;
    let parts = encoder_parts(net, data, margin)?;
    let g = grad_norm(&parts);
    let tr = margin_safe_traces(net, data, margin)?;
    let xi_kappa = super::data::features_from_traces(net, &tr)
        .xi_kappa()
        .clone();
    Ok(EncoderCertificates {
        input_features: certificate(
            kappa,
            FeatureSide::EncoderInput,
            &parts.features,
            &parts.factors,
            g,
            parts.loss,
            DEFAULT_BOUND_SLACK,
        ),
        output_features: certificate(
            kappa,
            FeatureSide::EncoderOutput,
            &xi_kappa,
            &parts.factors,
            g,
            parts.loss,
            DEFAULT_BOUND_SLACK,
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityLayer {
    pub layer: usize,
    pub gamma_rank: usize,
    /// `rank(Γ^l) == T`.
    pub features_independent: bool,
    /// Smallest row rank of `Υ̃^{l-1}Λ̃^l` over the samples.
    pub min_factor_row_rank: usize,
    /// `Υ̃^{l-1}Λ̃^l` has row rank `d_0` for every sample.
    pub factors_full_row_rank: bool,
    pub grad_norm: f64,
    /// Both conditions hold.
    pub conditions_hold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityStatus {
    /// No layer meets both conditions.
    Inapplicable,
    /// Loss at or below the floor: the gradient is expected to vanish.
    ZeroLoss,
    /// Conditions met, positive loss, gradient above the threshold.
    Confirmed,
    /// Conditions met, positive loss, yet the gradient vanished.
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub loss: f64,
    pub loss_floor: f64,
    pub grad_threshold: f64,
    pub layers: Vec<StationarityLayer>,
    pub status: StationarityStatus,
}

/// For each layer, test the independence and full-row-rank conditions and,
/// when they hold with positive loss, require a non-vanishing gradient.
pub fn check_stationarity(
    net: &Network,
    data: &TrainingSet,
    margin: f64,
    loss_floor: f64,
    grad_threshold: f64,
) -> Result<StationarityReport> {
    let spec = net.spec();
    let t = data.len();
    let d0 = spec.input_dim();
    let mut layers = Vec::with_capacity(spec.kappa);
    let mut loss = 0.0;
    for l in 1..=spec.kappa {
        let parts = super::grad::skip_parts(net, data, l, margin)?;
        loss = parts.loss;
        let gamma_rank = numerical_rank(&parts.features);
        // Λ̃^lΥ̃^{l-1}ᵀ is the transpose of Υ̃^{l-1}Λ̃^l; ranks agree
        let min_factor_row_rank = parts.factors.iter().map(numerical_rank).min().unwrap_or(0);
        let features_independent = gamma_rank == t;
        let factors_full_row_rank = min_factor_row_rank == d0;
        layers.push(StationarityLayer {
            layer: l,
            gamma_rank,
            features_independent,
            min_factor_row_rank,
            factors_full_row_rank,
            grad_norm: grad_norm(&parts),
            conditions_hold: features_independent && factors_full_row_rank,
        });
    }
    let applicable: Vec<&StationarityLayer> = layers.iter().filter(|l| l.conditions_hold).collect();
    let status = if loss <= loss_floor {
        StationarityStatus::ZeroLoss
    } else if applicable.is_empty() {
        StationarityStatus::Inapplicable
    } else if applicable.iter().all(|l| l.grad_norm > grad_threshold) {
        StationarityStatus::Confirmed
    } else {
        StationarityStatus::Violated
    };
    Ok(StationarityReport {
        loss,
        loss_floor,
        grad_threshold,
        layers,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::grad::backprop;
    use crate::netbuild::{LayerBank, NetworkSpec, Nonlinearity};

    fn skip_net(seed: u64) -> Network {
        // d_0 = 4, s_1 = 8, s_2 = 16
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![4, 4, 4], true, Nonlinearity::Relu).unwrap();
        Network::build(&spec, &LayerBank::random(&spec, seed, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn skip_sandwich_holds() {
        let net = skip_net(3);
        let data = TrainingSet::random(4, 2, 4).unwrap();
        for l in 1..=2 {
            let cert = certify_bounds_skip(&net, &data, l, 0.0).unwrap();
            assert!(cert.applicable);
            assert!(cert.holds, "{cert:?}");
            assert!(cert.lower <= cert.upper);
        }
    }

    #[test]
    fn encoder_sandwich_with_input_features() {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![4, 4, 4], false, Nonlinearity::Relu).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 8, 1.0).unwrap()).unwrap();
        let data = TrainingSet::random(4, 2, 9).unwrap();
        let certs = certify_bounds_enc(&net, &data, 0.0).unwrap();
        assert!(certs.input_features.holds, "{:?}", certs.input_features);
        let (_, grads) = backprop(&net, &data).unwrap();
        assert!(
            (certs.input_features.grad_norm - grads[1].e.norm()).abs() <= 1e-12 * grads[1].e.norm()
        );
    }

    #[test]
    fn zero_loss_and_duplicates() {
        let net = skip_net(5);
        let x = TrainingSet::random(4, 2, 6).unwrap().inputs().clone();
        let data = TrainingSet::realizable(&net, x.clone()).unwrap();
        let cert = certify_bounds_skip(&net, &data, 1, 0.0).unwrap();
        assert_eq!((cert.lower, cert.grad_norm, cert.upper), (0.0, 0.0, 0.0));
        assert!(cert.holds);
        let report = check_stationarity(&net, &data, 0.0, 1e-6, 1e-12).unwrap();
        assert_eq!(report.status, StationarityStatus::ZeroLoss);
        assert!(report.layers.iter().all(|l| l.grad_norm == 0.0));

        let col = x.column(0).into_owned();
        let dup = Matrix::from_columns(&[col.clone(), col]);
        let data = TrainingSet::new(dup, Matrix::zeros(4, 2)).unwrap();
        let cert = certify_bounds_skip(&net, &data, 2, 0.0).unwrap();
        assert!(cert.lower <= 1e-12 * cert.upper.max(1.0));
        assert!(cert.holds);
        let report = check_stationarity(&net, &data, 0.0, 1e-6, 1e-12).unwrap();
        assert_eq!(report.status, StationarityStatus::Inapplicable);
    }
}
