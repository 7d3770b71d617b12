use std::collections::BTreeSet;

use crate::linalg::{Matrix, Vector};
use crate::netbuild::{Network, Nonlinearity};
use crate::{Error, Result};

use super::lp::{maximize, LpOutcome};
use super::pattern::ActivationPattern;

/// Largest number of ReLU sites the exact enumeration accepts.
pub const MAX_ENUMERATION_SITES: usize = 12;

/// Interior-radius threshold above which a sign cell counts as a region.
const FEASIBLE_EPS: f64 = 1e-9;

/// Whether the open cone `{x : s_i·a_iᵀx > 0}` is nonempty, with normals
/// `a_i` as the columns of `normals`.
///
/// Solves `max t` s.t. `s_i·a_iᵀx ≥ t`, `|x_j| ≤ 1`, `t ≤ 1`, writing
/// `x = x⁺ − x⁻`.
pub fn cone_is_open(normals: &Matrix, signs: &[bool]) -> bool {
    let (d0, k) = normals.shape();
    let cols = 2 * d0 + 1;
    let rows = k + 2 * d0 + 1;
    let mut a = Matrix::zeros(rows, cols);
    let mut b = Vector::zeros(rows);
    for i in 0..k {
        let s = if signs[i] { 1.0 } else { -1.0 };
        for j in 0..d0 {
            a[(i, j)] = -s * normals[(j, i)];
            a[(i, d0 + j)] = s * normals[(j, i)];
        }
        a[(i, 2 * d0)] = 1.0;
    }
    for j in 0..2 * d0 {
        a[(k + j, j)] = 1.0;
        b[k + j] = 1.0;
    }
    a[(rows - 1, 2 * d0)] = 1.0;
    b[rows - 1] = 1.0;
    let mut c = Vector::zeros(cols);
    c[2 * d0] = 1.0;
    match maximize(&a, &b, &c) {
        LpOutcome::Optimal(t) => t > FEASIBLE_EPS,
        LpOutcome::Unbounded => unreachable!("the program is bounded by t <= 1"),
    }
}

/// Every activation pattern realized on an open set, by checking all sign
/// vectors of a single-ReLU-layer network for feasibility.
///
/// Supports `κ = 1` with encoder-only ReLUs (sites: columns of `E^1` and,
/// with skips, of `S^1`) and fully linear networks. Zero columns give a
/// pre-activation that is identically 0, hence a constant inactive bit.
pub fn exact_patterns(net: &Network) -> Result<BTreeSet<ActivationPattern>> {
    let spec = net.spec();
    let mats = net.layer(1);
    let linear = |n: usize| vec![true; n];
    let dec: Vec<Vec<bool>> = (1..=spec.kappa).map(|l| linear(spec.d(l - 1))).collect();
    match net.nonlinearity() {
        Nonlinearity::None => {
            let pattern = ActivationPattern {
                enc: (1..=spec.kappa).map(|l| linear(spec.d(l))).collect(),
                skip: if spec.skip {
                    (1..=spec.kappa).map(|l| linear(spec.s(l))).collect()
                } else {
                    Vec::new()
                },
                dec,
            };
            return Ok(BTreeSet::from([pattern]));
        }
        Nonlinearity::Relu => {
            return Err(Error::Precondition(
                "exact enumeration needs a single ReLU layer (encoder_relu with kappa = 1)".into(),
            ))
        }
        Nonlinearity::EncoderRelu if spec.kappa != 1 => {
            return Err(Error::Precondition(
                "exact enumeration needs kappa = 1".into(),
            ))
        }
        Nonlinearity::EncoderRelu => {}
    }

    let all: Vec<_> = match &mats.s {
        Some(s) => mats.e.column_iter().chain(s.column_iter()).collect(),
        None => mats.e.column_iter().collect(),
    };
    let sites = all.len();
    if sites > MAX_ENUMERATION_SITES {
        return Err(Error::Precondition(format!(
            "exact enumeration is limited to {MAX_ENUMERATION_SITES} ReLU sites, network has {sites}"
        )));
    }
    let live: Vec<usize> = (0..sites)
        .filter(|&i| all[i].iter().any(|&v| v != 0.0))
        .collect();
    let normals = Matrix::from_fn(spec.input_dim(), live.len(), |j, i| all[live[i]][j]);

    let d1 = spec.d(1);
    let mut out = BTreeSet::new();
    for code in 0u32..(1u32 << live.len()) {
        let signs: Vec<bool> = (0..live.len()).map(|i| code >> i & 1 == 1).collect();
        if !cone_is_open(&normals, &signs) {
            continue;
        }
        let mut bits = vec![false; sites];
        for (i, &site) in live.iter().enumerate() {
            bits[site] = signs[i];
        }
        out.insert(ActivationPattern {
            enc: vec![bits[..d1].to_vec()],
            skip: if spec.skip {
                vec![bits[d1..].to_vec()]
            } else {
                Vec::new()
            },
            dec: dec.clone(),
        });
    }
    Ok(out)
}

pub fn exact_region_count(net: &Network) -> Result<usize> {
    Ok(exact_patterns(net)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbuild::{LayerBank, NetworkSpec};

    #[test]
    fn open_cone_checks() {
        // two lines in the plane: the four quadrants are all open
        let normals = Matrix::identity(2, 2);
        for code in 0..4 {
            assert!(cone_is_open(&normals, &[code & 1 == 1, code & 2 == 2]));
        }
        // a normal and its negation can never both be positive
        let normals = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        assert!(!cone_is_open(&normals, &[true, true]));
        assert!(cone_is_open(&normals, &[true, false]));
    }

    /// `k` generic lines through the origin of the plane cut it into `2k` cones.
    #[test]
    fn generic_planar_arrangement() {
        let spec =
            NetworkSpec::new(2, vec![1, 2], vec![2, 2], false, Nonlinearity::EncoderRelu).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 5, 1.0).unwrap()).unwrap();
        assert_eq!(exact_region_count(&net).unwrap(), 8);
    }

    #[test]
    fn preconditions() {
        let spec = NetworkSpec::new(1, vec![1, 2], vec![2, 2], false, Nonlinearity::Relu).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 5, 1.0).unwrap()).unwrap();
        assert!(exact_region_count(&net).is_err());
        let linear = net.with_nonlinearity(Nonlinearity::None);
        assert_eq!(exact_region_count(&linear).unwrap(), 1);
        let spec =
            NetworkSpec::new(1, vec![1, 16], vec![2, 2], false, Nonlinearity::EncoderRelu).unwrap();
        let net = Network::build(&spec, &LayerBank::random(&spec, 5, 1.0).unwrap()).unwrap();
        assert!(exact_region_count(&net).is_err());
    }
}
