use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::linalg::{Matrix, Vector};
use crate::netbuild::{ForwardTrace, Network, Nonlinearity};
use crate::{Error, Result};

/// Binary ReLU masks for one input.
///
/// `enc[l-1]` is `Λ^l` (length `d_l`), `skip[l-1]` is `Λ_S^l` (length `s_l`),
/// `dec[l-1]` is `Λ̃^l` (length `d_{l-1}`). A bit is set iff the
/// pre-activation is strictly positive. Sites without a ReLU are all ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ActivationPattern {
    pub enc: Vec<Vec<bool>>,
    pub skip: Vec<Vec<bool>>,
    pub dec: Vec<Vec<bool>>,
}

fn mask(v: &Vector, relu: bool) -> Vec<bool> {
    v.iter().map(|&p| !relu || p > 0.0).collect()
}

impl ActivationPattern {
    pub fn from_trace(trace: &ForwardTrace, nonlinearity: Nonlinearity) -> Self {
        let (er, dr) = (nonlinearity.encoder_relu(), nonlinearity.decoder_relu());
        Self {
            enc: trace.enc_pre.iter().map(|v| mask(v, er)).collect(),
            skip: trace.skip_pre.iter().map(|v| mask(v, er)).collect(),
            dec: trace.dec_pre.iter().map(|v| mask(v, dr)).collect(),
        }
    }

    fn all_bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.enc
            .iter()
            .chain(&self.skip)
            .chain(&self.dec)
            .flat_map(|m| m.iter().copied())
    }

    pub fn bit_len(&self) -> usize {
        self.all_bits().count()
    }

    pub fn active_count(&self) -> usize {
        self.all_bits().filter(|&b| b).count()
    }

    /// `'1'`/`'0'` per site, masks separated by `|`.
    pub fn to_bit_string(&self) -> String {
        let masks: Vec<String> = self
            .enc
            .iter()
            .chain(&self.skip)
            .chain(&self.dec)
            .map(|m| m.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect();
        masks.join("|")
    }

    /// First 16 hex digits of the SHA-256 of the bit string.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_bit_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `Λ^l` as a diagonal matrix.
    pub fn enc_diag(&self, l: usize) -> Matrix {
        diag(&self.enc[l - 1])
    }

    pub fn skip_diag(&self, l: usize) -> Matrix {
        diag(&self.skip[l - 1])
    }

    pub fn dec_diag(&self, l: usize) -> Matrix {
        diag(&self.dec[l - 1])
    }

    fn check_shape(&self, net: &Network) -> Result<()> {
        let spec = net.spec();
        let kappa = spec.kappa;
        let ok = self.enc.len() == kappa
            && self.dec.len() == kappa
            && self.skip.len() == if spec.skip { kappa } else { 0 }
            && (1..=kappa).all(|l| {
                self.enc[l - 1].len() == spec.d(l)
                    && self.dec[l - 1].len() == spec.d(l - 1)
                    && (!spec.skip || self.skip[l - 1].len() == spec.s(l))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "activation pattern does not match the network".into(),
            ))
        }
    }
}

fn diag(bits: &[bool]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_iterator(
        bits.len(),
        bits.iter().map(|&b| if b { 1.0 } else { 0.0 }),
    ))
}

fn apply(bits: &[bool], v: Vector) -> Vector {
    Vector::from_iterator(
        v.len(),
        v.iter().zip(bits).map(|(&x, &b)| if b { x } else { 0.0 }),
    )
}

pub fn extract_pattern(net: &Network, x: &Vector) -> Result<ActivationPattern> {
    let trace = net.forward(x)?;
    Ok(ActivationPattern::from_trace(&trace, net.nonlinearity()))
}

/// Run the network with every ReLU replaced by its frozen mask.
///
/// On the region that produced `pattern` this is the network itself.
pub fn masked_forward(net: &Network, pattern: &ActivationPattern, x: &Vector) -> Result<Vector> {
    pattern.check_shape(net)?;
    if x.len() != net.spec().input_dim() {
        return Err(Error::Dimension("input length does not match d_0".into()));
    }
    let kappa = net.spec().kappa;
    let mut xi = x.clone();
    let mut chis = Vec::with_capacity(kappa);
    for l in 1..=kappa {
        let mats = net.layer(l);
        if let Some(s) = &mats.s {
            chis.push(apply(&pattern.skip[l - 1], s.tr_mul(&xi)));
        }
        xi = apply(&pattern.enc[l - 1], mats.e.tr_mul(&xi));
    }
    for l in (1..=kappa).rev() {
        let mats = net.layer(l);
        let mut pre = &mats.d * &xi;
        if let Some(st) = &mats.s_tilde {
            pre += st * &chis[l - 1];
        }
        xi = apply(&pattern.dec[l - 1], pre);
    }
    Ok(xi)
}
