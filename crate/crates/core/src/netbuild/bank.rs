use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkSpec;
use crate::convops::FilterTensor;
use crate::linalg::Matrix;
use crate::rng::{derive_seed, gaussian_matrix, seeded_rng};
use crate::serial::{MatrixJson, TensorJson};
use crate::{Error, Result};

/// Learnable content of one layer.
///
/// `enc.tap(c, o)` is `ψ^l_{o,c}` and `dec.tap(c, o)` is `ψ̃^l_{c,o}`, with
/// `c` ranging over the `q_{l-1}` channels and `o` over the `q_l` channels.
/// `pool` is `Φ^l` and `unpool` is `Φ̃^l`, both `m_{l-1} × m_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub enc: FilterTensor,
    pub dec: FilterTensor,
    pub pool: Matrix,
    pub unpool: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerBank {
    pub layers: Vec<LayerParams>,
}

impl LayerBank {
    /// Layer `l ∈ 1..=κ`.
    pub fn layer(&self, l: usize) -> &LayerParams {
        &self.layers[l - 1]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut LayerParams {
        &mut self.layers[l - 1]
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.kappa {
            return Err(Error::Dimension(format!(
                "bank has {} layers, spec has kappa = {}",
                self.layers.len(),
                spec.kappa
            )));
        }
        for (idx, p) in self.layers.iter().enumerate() {
            let l = idx + 1;
            let want = (spec.q[l - 1], spec.q[l], spec.r);
            for (name, t) in [("encoder", &p.enc), ("decoder", &p.dec)] {
                if t.shape() != want {
                    return Err(Error::Dimension(format!(
                        "layer {l} {name} filters have shape {:?}, expected {:?}",
                        t.shape(),
                        want
                    )));
                }
            }
            let pool_shape = (spec.m[l - 1], spec.m[l]);
            for (name, m) in [("pooling", &p.pool), ("unpooling", &p.unpool)] {
                if m.shape() != pool_shape {
                    return Err(Error::Dimension(format!(
                        "layer {l} {name} matrix is {:?}, expected {:?}",
                        m.shape(),
                        pool_shape
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("pooling matrix"));
                }
            }
            if p.enc
                .as_slice()
                .iter()
                .chain(p.dec.as_slice())
                .any(|v| !v.is_finite())
            {
                return Err(Error::NonFinite("filter tensor"));
            }
        }
        Ok(())
    }

    /// Gaussian filters with standard deviation `scale / √(r·q_{l-1})`.
    ///
    /// Pooling is the identity where `m_l == m_{l-1}` and a Gaussian matrix
    /// scaled by `1/√m_{l-1}` otherwise.
    pub fn random(spec: &NetworkSpec, seed: u64, scale: f64) -> Result<Self> {
        spec.validate()?;
        let layers = (1..=spec.kappa)
            .map(|l| {
                let (q_in, q_out, r) = (spec.q[l - 1], spec.q[l], spec.r);
                let std = scale / ((r * q_in) as f64).sqrt();
                let mut rng = seeded_rng(derive_seed(seed, &format!("layer{l}/filters")));
                let enc_raw = gaussian_matrix(&mut rng, r * q_in, q_out) * std;
                let dec_raw = gaussian_matrix(&mut rng, r * q_in, q_out) * std;
                let (m_in, m_out) = (spec.m[l - 1], spec.m[l]);
                let (pool, unpool) = if m_in == m_out {
                    (Matrix::identity(m_in, m_in), Matrix::identity(m_in, m_in))
                } else {
                    let mut prng = seeded_rng(derive_seed(seed, &format!("layer{l}/pooling")));
                    let s = 1.0 / (m_in as f64).sqrt();
                    (
                        gaussian_matrix(&mut prng, m_in, m_out) * s,
                        gaussian_matrix(&mut prng, m_in, m_out) * s,
                    )
                };
                Ok(LayerParams {
                    enc: FilterTensor::from_filter_matrix(&enc_raw, q_in, r)?,
                    dec: FilterTensor::from_filter_matrix(&dec_raw, q_in, r)?,
                    pool,
                    unpool,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    /// Identity filters (`δ` on matching channels) and identity pooling.
    /// Requires constant `q` and `m` across layers.
    pub fn identity(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        if spec.q.windows(2).any(|w| w[0] != w[1]) || spec.m.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Precondition(
                "identity bank needs constant channel counts and lengths".into(),
            ));
        }
        let (q, m, r) = (spec.q[0], spec.m[0], spec.r);
        let delta =
            FilterTensor::from_fn(q, q, r, |c, o, a| if c == o && a == 0 { 1.0 } else { 0.0 });
        Ok(Self {
            layers: (0..spec.kappa)
                .map(|_| LayerParams {
                    enc: delta.clone(),
                    dec: delta.clone(),
                    pool: Matrix::identity(m, m),
                    unpool: Matrix::identity(m, m),
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> LayerBankJson {
        LayerBankJson {
            format: BANK_FORMAT.to_string(),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, p)| LayerJson {
                    layer: i + 1,
                    enc_filters: (&p.enc).into(),
                    dec_filters: (&p.dec).into(),
                    pool: (&p.pool).into(),
                    unpool: (&p.unpool).into(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &LayerBankJson) -> Result<Self> {
        if json.format != BANK_FORMAT {
            return Err(Error::Dimension(format!(
                "unsupported bank format {:?} (expected {BANK_FORMAT:?})",
                json.format
            )));
        }
        let layers = json
            .layers
            .iter()
            .enumerate()
            .map(|(i, lj)| {
                if lj.layer != i + 1 {
                    return Err(Error::Dimension(format!(
                        "bank layers must be listed in order; entry {i} is layer {}",
                        lj.layer
                    )));
                }
                Ok(LayerParams {
                    enc: lj.enc_filters.to_tensor()?,
                    dec: lj.dec_filters.to_tensor()?,
                    pool: lj.pool.to_matrix()?,
                    unpool: lj.unpool.to_matrix()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

pub const BANK_FORMAT: &str = "edcnn.layer_bank.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBankJson {
    pub format: String,
    pub layers: Vec<LayerJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJson {
    pub layer: usize,
    pub enc_filters: TensorJson,
    pub dec_filters: TensorJson,
    pub pool: MatrixJson,
    pub unpool: MatrixJson,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbuild::Nonlinearity;

    fn spec() -> NetworkSpec {
        NetworkSpec::new(2, vec![1, 2, 4], vec![8, 8, 4], false, Nonlinearity::Relu).unwrap()
    }

    #[test]
    fn random_bank_is_valid_and_seeded() {
        let s = spec();
        let bank = LayerBank::random(&s, 3, 1.0).unwrap();
        bank.validate(&s).unwrap();
        assert_eq!(bank, LayerBank::random(&s, 3, 1.0).unwrap());
        assert_ne!(bank, LayerBank::random(&s, 4, 1.0).unwrap());
        // n_l free parameters per side
        assert_eq!(bank.layer(2).enc.as_slice().len(), s.filter_params(2));
    }

    #[test]
    fn json_round_trip_preserves_bits() {
        let s = spec();
        let bank = LayerBank::random(&s, 9, 0.5).unwrap();
        let text = serde_json::to_string(&bank.to_json()).unwrap();
        let back = LayerBank::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(bank, back);
        assert!(text.starts_with(
            r#"{"format":"edcnn.layer_bank.v1","layers":[{"layer":1,"enc_filters":{"shape":[1,2,2]"#
        ));
    }

    #[test]
    fn validate_catches_shape_errors() {
        let s = spec();
        let mut bank = LayerBank::random(&s, 1, 1.0).unwrap();
        bank.layers[0].pool = Matrix::identity(3, 3);
        assert!(bank.validate(&s).is_err());
        let bank = LayerBank::random(&s, 1, 1.0).unwrap();
        let other = NetworkSpec::new(2, vec![1, 2], vec![8, 8], false, Nonlinearity::Relu).unwrap();
        assert!(bank.validate(&other).is_err());
    }

    #[test]
    fn identity_bank_requires_constant_dims() {
        assert!(LayerBank::identity(&spec()).is_err());
        let s = NetworkSpec::new(2, vec![2, 2], vec![4, 4], false, Nonlinearity::None).unwrap();
        LayerBank::identity(&s).unwrap().validate(&s).unwrap();
    }
}
