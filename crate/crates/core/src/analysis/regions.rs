use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::linalg::{PowerIteration, Vector};
use crate::netbuild::{Network, NetworkSpec};
use crate::rng::{derive_seed, gaussian_vector, seeded_rng, sphere_vector};
use crate::{Error, Result};

use super::linrep::linear_rep_for_pattern;
use super::pattern::{extract_pattern, ActivationPattern};

/// `2^{Σ_{i=1}^κ d_i − d_κ}`, times `2^{Σ s_l}` with skips, as printed in
/// the region-count formula.
pub fn nrep_bound(spec: &NetworkSpec) -> BigUint {
    let enc: usize = (1..=spec.kappa).map(|l| spec.d(l)).sum::<usize>() - spec.d(spec.kappa);
    let skip: usize = if spec.skip {
        spec.skip_dims().iter().sum()
    } else {
        0
    };
    BigUint::from(1u8) << (enc + skip)
}

/// Number of ReLU sites: `Σ d_l` (encoder), `Σ s_l` (skips), `Σ d_{l-1}` (decoder).
pub fn mask_bit_count(spec: &NetworkSpec) -> usize {
    let nl = spec.nonlinearity;
    let mut bits = 0;
    if nl.encoder_relu() {
        bits += (1..=spec.kappa).map(|l| spec.d(l)).sum::<usize>();
        if spec.skip {
            bits += spec.skip_dims().iter().sum::<usize>();
        }
    }
    if nl.decoder_relu() {
        bits += (0..spec.kappa).map(|l| spec.d(l)).sum::<usize>();
    }
    bits
}

/// `2^{mask_bit_count}`: a bound that holds for any activation census.
pub fn mask_bit_bound(spec: &NetworkSpec) -> BigUint {
    BigUint::from(1u8) << mask_bit_count(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleDistribution {
    /// Standard normal entries.
    #[default]
    Gaussian,
    /// Uniform on the unit sphere.
    Sphere,
    /// Cell centres of an even-resolution grid on `[-1, 1]^{d_0}`, using
    /// `⌊count^{1/d_0}⌋` (rounded down to even) points per axis.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub count: usize,
    pub distribution: SampleDistribution,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            distribution: SampleDistribution::Gaussian,
            seed: 0,
        }
    }
}

fn grid_points(d0: usize, count: usize) -> Vec<Vector> {
    let mut per_axis = (count as f64).powf(1.0 / d0 as f64).floor() as usize;
    // the float root can land just below an exact integer
    while (per_axis + 1)
        .checked_pow(d0 as u32)
        .is_some_and(|n| n <= count)
    {
        per_axis += 1;
    }
    per_axis -= per_axis % 2;
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(d0 as u32);
    (0..total)
        .map(|mut idx| {
            Vector::from_fn(d0, |_, _| {
                let k = idx % per_axis;
                idx /= per_axis;
                -1.0 + (2 * k + 1) as f64 / per_axis as f64
            })
        })
        .collect()
}

/// Deterministic inputs; sample `i` uses the sub-seed `census/{i}`.
pub fn sample_inputs(d0: usize, cfg: &SamplerConfig) -> Vec<Vector> {
    match cfg.distribution {
        SampleDistribution::Grid => grid_points(d0, cfg.count),
        dist => (0..cfg.count)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded_rng(derive_seed(cfg.seed, &format!("census/{i}")));
                match dist {
                    SampleDistribution::Sphere => sphere_vector(&mut rng, d0),
                    _ => gaussian_vector(&mut rng, d0),
                }
            })
            .collect(),
    }
}

fn big_as_string<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionEntry {
    pub pattern_hash: String,
    pub count: usize,
    /// Index of the first sample that landed in the region.
    pub representative: usize,
    /// `K_p = ‖B̃(z_p)B(z_p)ᵀ‖₂`.
    pub k_p: f64,
    #[serde(skip)]
    pub pattern: ActivationPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCensus {
    pub samples: usize,
    pub distinct: usize,
    pub distribution: SampleDistribution,
    pub seed: u64,
    #[serde(serialize_with = "big_as_string")]
    pub nrep_bound: BigUint,
    pub mask_bits: usize,
    #[serde(serialize_with = "big_as_string")]
    pub mask_bit_bound: BigUint,
    pub within_nrep_bound: bool,
    pub within_mask_bit_bound: bool,
    /// Sorted by pattern (bitwise order).
    pub regions: Vec<RegionEntry>,
    /// Region index of each sample.
    #[serde(skip)]
    pub assignment: Vec<usize>,
    #[serde(skip)]
    pub inputs: Vec<Vector>,
}

/// Sample inputs, group them by activation pattern and evaluate each
/// region's local Lipschitz constant.
pub fn region_census(net: &Network, cfg: &SamplerConfig) -> Result<RegionCensus> {
    if cfg.count == 0 {
        return Err(Error::Precondition(
            "census needs at least one sample".into(),
        ));
    }
    let spec = net.spec();
    let inputs = sample_inputs(spec.input_dim(), cfg);
    let patterns: Vec<ActivationPattern> = inputs
        .par_iter()
        .map(|x| extract_pattern(net, x))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<&ActivationPattern, (usize, usize)> = BTreeMap::new();
    for (i, p) in patterns.iter().enumerate() {
        groups.entry(p).or_insert((i, 0)).1 += 1;
    }
    let power = PowerIteration::default();
    let regions: Vec<RegionEntry> = groups
        .into_par_iter()
        .map(|(p, (rep, count))| RegionEntry {
            pattern_hash: p.hash_hex(),
            count,
            representative: rep,
            k_p: power.spectral_norm(&linear_rep_for_pattern(net, p).local_map()),
            pattern: p.clone(),
        })
        .collect();
    let index: BTreeMap<&ActivationPattern, usize> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| (&r.pattern, i))
        .collect();
    let assignment = patterns.iter().map(|p| index[p]).collect();

    let distinct = regions.len();
    let nrep = nrep_bound(spec);
    let mbb = mask_bit_bound(spec);
    Ok(RegionCensus {
        samples: inputs.len(),
        distinct,
        distribution: cfg.distribution,
        seed: cfg.seed,
        within_nrep_bound: BigUint::from(distinct) <= nrep,
        within_mask_bit_bound: BigUint::from(distinct) <= mbb,
        nrep_bound: nrep,
        mask_bits: mask_bit_count(spec),
        mask_bit_bound: mbb,
        regions,
        assignment,
        inputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// `max_p K_p` over the sampled regions.
    pub k: f64,
    pub region_index: usize,
    pub pattern_hash: String,
    /// Unsampled regions may have larger `K_p`.
    pub sampled_lower_bound: bool,
}

pub fn lipschitz_global(census: &RegionCensus) -> Result<LipschitzEstimate> {
    let (idx, best) = census
        .regions
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.k_p.total_cmp(&b.1.k_p))
        .ok_or_else(|| Error::Precondition("census has no regions".into()))?;
    Ok(LipschitzEstimate {
        k: best.k_p,
        region_index: idx,
        pattern_hash: best.pattern_hash.clone(),
        sampled_lower_bound: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{frame_bank, FrameConfig};
    use crate::netbuild::{LayerBank, Nonlinearity};

    #[test]
    fn nrep_examples() {
        // d = [4, 8, 16]
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![4, 4, 4], false, Nonlinearity::Relu).unwrap();
        assert_eq!(nrep_bound(&spec), BigUint::from(256u32));
        // s = [8, 16]
        let spec = NetworkSpec { skip: true, ..spec };
        assert_eq!(spec.skip_dims(), vec![8, 16]);
        assert_eq!(nrep_bound(&spec), BigUint::from(256u64 << 24));
        let spec = NetworkSpec::new(2, vec![1, 2], vec![4, 4], false, Nonlinearity::Relu).unwrap();
        assert_eq!(nrep_bound(&spec), BigUint::from(1u8));
        assert_eq!(mask_bit_count(&spec), 8 + 4);
    }

    #[test]
    fn linear_network_has_one_region() {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![8, 8, 8], true, Nonlinearity::None).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 1, 1.0).unwrap()).unwrap();
        let census = region_census(
            &net,
            &SamplerConfig {
                count: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(census.distinct, 1);
        assert_eq!(census.regions[0].count, 50);
    }

    #[test]
    fn frame_network_is_one_lipschitz() {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![8, 8, 8], false, Nonlinearity::None).unwrap();
        let net = Network::build(
            &spec,
            &frame_bank(&spec, &FrameConfig::for_spec(&spec)).unwrap(),
        )
        .unwrap();
        let census = region_census(
            &net,
            &SamplerConfig {
                count: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((lipschitz_global(&census).unwrap().k - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn census_is_deterministic_and_consistent() {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 2], vec![4, 4, 4], true, Nonlinearity::Relu).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 3, 1.0).unwrap()).unwrap();
        let cfg = SamplerConfig {
            count: 300,
            distribution: SampleDistribution::Sphere,
            seed: 7,
        };
        let a = region_census(&net, &cfg).unwrap();
        let b = region_census(&net, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.regions.iter().map(|r| r.count).sum::<usize>(), 300);
        assert!(a.within_mask_bit_bound);
        for (i, x) in a.inputs.iter().enumerate() {
            let region = &a.regions[a.assignment[i]];
            assert_eq!(extract_pattern(&net, x).unwrap(), region.pattern);
        }
    }

    #[test]
    fn grid_has_even_resolution_and_avoids_origin() {
        let pts = grid_points(2, 101);
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| p.amin() > 0.0));
        assert_eq!(grid_points(3, 64).len(), 64);
    }
}
