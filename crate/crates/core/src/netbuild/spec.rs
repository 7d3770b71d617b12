use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Where ReLUs sit in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// Fully linear network.
    None,
    /// ReLU after every encoder, skip-branch and decoder filtering.
    #[default]
    Relu,
    /// ReLU on the encoder and skip branches only; the decoder is linear.
    EncoderRelu,
}

impl Nonlinearity {
    pub fn encoder_relu(self) -> bool {
        matches!(self, Self::Relu | Self::EncoderRelu)
    }

    pub fn decoder_relu(self) -> bool {
        matches!(self, Self::Relu)
    }
}

/// Architecture of a symmetric `κ`-layer encoder-decoder network.
///
/// Channel `l` has `q[l]` channels of length `m[l]`, so its stacked feature
/// dimension is `d_l = m_l·q_l`. The skip branch at layer `l` has dimension
/// `s_l = m_{l-1}·q_l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson")]
pub struct NetworkSpec {
    pub kappa: usize,
    pub r: usize,
    pub q: Vec<usize>,
    pub m: Vec<usize>,
    pub skip: bool,
    pub nonlinearity: Nonlinearity,
}

/// On-disk form: `kappa` may be omitted and is then `len(q) - 1`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    kappa: Option<usize>,
    r: usize,
    q: Vec<usize>,
    m: Vec<usize>,
    #[serde(default)]
    skip: bool,
    #[serde(default)]
    nonlinearity: Nonlinearity,
}

impl TryFrom<SpecJson> for NetworkSpec {
    type Error = Error;

    fn try_from(j: SpecJson) -> Result<Self> {
        let spec = Self {
            kappa: j.kappa.unwrap_or(j.q.len().saturating_sub(1)),
            r: j.r,
            q: j.q,
            m: j.m,
            skip: j.skip,
            nonlinearity: j.nonlinearity,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl NetworkSpec {
    pub fn new(
        r: usize,
        q: Vec<usize>,
        m: Vec<usize>,
        skip: bool,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let spec = Self {
            kappa: q.len().saturating_sub(1),
            r,
            q,
            m,
            skip,
            nonlinearity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 1 {
            return Err(Error::InvalidSpec("depth kappa must be at least 1".into()));
        }
        if self.q.len() != self.kappa + 1 || self.m.len() != self.kappa + 1 {
            return Err(Error::InvalidSpec(format!(
                "q and m must have kappa+1 = {} entries (got {} and {})",
                self.kappa + 1,
                self.q.len(),
                self.m.len()
            )));
        }
        if self.r < 1 {
            return Err(Error::InvalidSpec(
                "filter length r must be at least 1".into(),
            ));
        }
        for l in 0..=self.kappa {
            if self.q[l] == 0 || self.m[l] == 0 {
                return Err(Error::InvalidSpec(format!(
                    "layer {l} has zero channels or zero length"
                )));
            }
            if self.r > self.m[l] {
                return Err(Error::InvalidSpec(format!(
                    "filter length r = {} exceeds m_{l} = {}",
                    self.r, self.m[l]
                )));
            }
        }
        Ok(())
    }

    /// `d_l = m_l·q_l`.
    pub fn d(&self, l: usize) -> usize {
        self.m[l] * self.q[l]
    }

    /// `s_l = m_{l-1}·q_l` for `l ∈ 1..=κ`.
    pub fn s(&self, l: usize) -> usize {
        assert!((1..=self.kappa).contains(&l), "skip index {l} out of range");
        self.m[l - 1] * self.q[l]
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..=self.kappa).map(|l| self.d(l)).collect()
    }

    pub fn skip_dims(&self) -> Vec<usize> {
        (1..=self.kappa).map(|l| self.s(l)).collect()
    }

    /// Number of free filter coefficients per layer side, `n_l = r·q_l·q_{l-1}`.
    pub fn filter_params(&self, l: usize) -> usize {
        self.r * self.q[l] * self.q[l - 1]
    }

    /// `q_l ≥ r·q_{l-1}` for every layer.
    pub fn frame_compatible(&self) -> bool {
        (1..=self.kappa).all(|l| self.q[l] >= self.r * self.q[l - 1])
    }

    /// Columns of the (input-dependent) frame: `d_κ` plus `Σ s_l` with skips.
    pub fn feature_dim(&self) -> usize {
        let base = self.d(self.kappa);
        if self.skip {
            base + self.skip_dims().iter().sum::<usize>()
        } else {
            base
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d(0)
    }
}
