use std::fmt;

use serde::Serialize;

use super::NetworkSpec;

/// A violated feature-dimension guideline. Advisory only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimWarning {
    /// `d_{l-1} ≤ d_l` fails.
    Monotonicity {
        layer: usize,
        d_prev: usize,
        d_next: usize,
    },
    /// `d_κ > 2·d_0` fails.
    Embedding { d_kappa: usize, twice_d0: usize },
}

impl fmt::Display for DimWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Monotonicity { layer, d_prev, d_next } => write!(
                f,
                "feature dimension shrinks at layer {layer}: d_{} = {d_prev} > d_{layer} = {d_next}",
                layer - 1
            ),
            Self::Embedding { d_kappa, twice_d0 } => {
                write!(f, "d_κ ≤ 2·d_0 violated the embedding constraint: {d_kappa} ≤ {twice_d0}")
            }
        }
    }
}

/// Check `d_0 ≤ d_1 ≤ … ≤ d_κ` and `d_κ > 2·d_0`.
pub fn check_embedding_dims(spec: &NetworkSpec) -> Vec<DimWarning> {
    check_dims(&spec.dims())
}

pub fn check_dims(d: &[usize]) -> Vec<DimWarning> {
    let mut warnings: Vec<DimWarning> = d
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > w[1])
        .map(|(i, w)| DimWarning::Monotonicity {
            layer: i + 1,
            d_prev: w[0],
            d_next: w[1],
        })
        .collect();
    if let (Some(&d0), Some(&dk)) = (d.first(), d.last()) {
        if dk <= 2 * d0 {
            warnings.push(DimWarning::Embedding {
                d_kappa: dk,
                twice_d0: 2 * d0,
            });
        }
    }
    warnings
}
