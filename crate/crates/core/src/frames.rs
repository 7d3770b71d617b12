//! Banks that satisfy the frame conditions, multi-layer frame bases and
//! perfect-reconstruction checks.
//!
//! A layer reconstructs perfectly when the pooling pair satisfies
//! `Φ̃Φᵀ = αI` and the filter pair satisfies `ΨΨ̃ᵀ = c·I` with
//! `c = 1/(rα)` (no skips) or `c = 1/(r(α+1))` (skips). The factories below
//! realize both with symmetric tight frames cut from orthogonal matrices.

use serde::{Deserialize, Serialize};

use crate::convops::{circ_conv, identity_conv, zero_pad, FilterTensor};
use crate::linalg::{hadamard, identity_residual, max_abs_diff, seeded_orthogonal, Matrix};
use crate::netbuild::{skip_operators, LayerBank, LayerParams, Network, NetworkSpec};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    #[default]
    NoSkip,
    Skip,
}

impl FrameMode {
    pub fn for_spec(spec: &NetworkSpec) -> Self {
        if spec.skip {
            Self::Skip
        } else {
            Self::NoSkip
        }
    }

    /// Filter frame constant `c` for pooling constant `α`.
    pub fn filter_constant(self, r: usize, alpha: f64) -> f64 {
        match self {
            Self::NoSkip => 1.0 / (r as f64 * alpha),
            Self::Skip => 1.0 / (r as f64 * (alpha + 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    /// `Φ = I`; needs `m_l == m_{l-1}`.
    #[default]
    Identity,
    /// Seeded orthogonal (QR of a Gaussian matrix).
    Orthogonal,
    /// One-level Haar transform keeping both subbands; needs even `m`.
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrtho {
    #[default]
    Seeded,
    /// Sylvester-Hadamard rows; needs `q_out` a power of two.
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub alpha: f64,
    pub mode: FrameMode,
    pub pooling: PoolingKind,
    pub filters: FilterOrtho,
    pub seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mode: FrameMode::NoSkip,
            pooling: PoolingKind::Identity,
            filters: FilterOrtho::Seeded,
            seed: 0,
        }
    }
}

impl FrameConfig {
    pub fn for_spec(spec: &NetworkSpec) -> Self {
        Self {
            mode: FrameMode::for_spec(spec),
            ..Self::default()
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "pooling frame constant alpha must be positive, got {alpha}"
        )))
    }
}

fn haar(m: usize) -> Result<Matrix> {
    if !m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "Haar pooling needs even length, got {m}"
        )));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Matrix::zeros(m, m);
    for k in 0..m / 2 {
        out[(2 * k, k)] = h;
        out[(2 * k + 1, k)] = h;
        out[(2 * k, m / 2 + k)] = h;
        out[(2 * k + 1, m / 2 + k)] = -h;
    }
    Ok(out)
}

/// Square pooling pair `(Φ, Φ̃ = αΦ)` with `Φ̃Φᵀ = αI_m`.
pub fn make_frame_pooling(
    m: usize,
    alpha: f64,
    kind: PoolingKind,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    make_frame_pooling_rect(m, m, alpha, kind, seed)
}

/// Pooling pair of shape `m_in × m_out`.
///
/// Contracting shapes cannot satisfy the condition (rank), so they are
/// rejected. Expanding shapes are supported for the orthogonal kind by
/// keeping `m_in` rows of an `m_out × m_out` orthogonal matrix.
pub fn make_frame_pooling_rect(
    m_in: usize,
    m_out: usize,
    alpha: f64,
    kind: PoolingKind,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    check_alpha(alpha)?;
    if m_out < m_in {
        return Err(Error::ContractingPooling { m_in, m_out });
    }
    let phi = match kind {
        PoolingKind::Orthogonal => seeded_orthogonal(m_out, seed).rows(0, m_in).into_owned(),
        _ if m_out != m_in => {
            return Err(Error::Precondition(format!(
                "{kind:?} pooling needs m_out == m_in, got {m_in} -> {m_out}"
            )))
        }
        PoolingKind::Identity => Matrix::identity(m_in, m_in),
        PoolingKind::Haar => haar(m_in)?,
    };
    let phi_tilde = &phi * alpha;
    Ok((phi, phi_tilde))
}

/// Filter matrices `(Ψ, Ψ̃)`, both `r·q_in × q_out`, with `ΨΨ̃ᵀ = c·I`.
#[allow(clippy::too_many_arguments)]
pub fn make_frame_filters(
    r: usize,
    q_in: usize,
    q_out: usize,
    alpha: f64,
    mode: FrameMode,
    ortho: FilterOrtho,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    check_alpha(alpha)?;
    if q_out < r * q_in {
        return Err(Error::FilterFrame { r, q_in, q_out });
    }
    let q = match ortho {
        FilterOrtho::Seeded => seeded_orthogonal(q_out, seed),
        FilterOrtho::Hadamard => hadamard(q_out).ok_or_else(|| {
            Error::Precondition(format!(
                "Hadamard filters need q_out a power of two, got {q_out}"
            ))
        })?,
    };
    let psi = q.rows(0, r * q_in) * mode.filter_constant(r, alpha).sqrt();
    Ok((psi.clone(), psi))
}

/// A bank whose every layer satisfies the frame conditions for `cfg.mode`.
pub fn frame_bank(spec: &NetworkSpec, cfg: &FrameConfig) -> Result<LayerBank> {
    spec.validate()?;
    let layers = (1..=spec.kappa)
        .map(|l| {
            let (q_in, q_out, r) = (spec.q[l - 1], spec.q[l], spec.r);
            let (psi, psi_tilde) = make_frame_filters(
                r,
                q_in,
                q_out,
                cfg.alpha,
                cfg.mode,
                cfg.filters,
                derive_seed(cfg.seed, &format!("frames/layer{l}/filters")),
            )?;
            let (pool, unpool) = make_frame_pooling_rect(
                spec.m[l - 1],
                spec.m[l],
                cfg.alpha,
                cfg.pooling,
                derive_seed(cfg.seed, &format!("frames/layer{l}/pooling")),
            )?;
            Ok(LayerParams {
                enc: FilterTensor::from_filter_matrix(&psi, q_in, r)?,
                dec: FilterTensor::from_filter_matrix(&psi_tilde, q_in, r)?,
                pool,
                unpool,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerBank { layers })
}

/// Frame-condition residuals of one layer (max-norm).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerResidual {
    pub layer: usize,
    /// `α` estimated as the mean diagonal of `Φ̃Φᵀ`.
    pub alpha: f64,
    /// `‖Φ̃Φᵀ − αI‖`.
    pub pooling_residual: f64,
    /// `‖ΨΨ̃ᵀ − cI‖`.
    pub filter_residual: f64,
    /// `‖DEᵀ − I‖` without skips, `‖DEᵀ + S̃Sᵀ − I‖` with skips.
    pub layer_identity_residual: f64,
    /// Skip mode only: `‖DEᵀ − α/(α+1)·I‖`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_term_residual: Option<f64>,
    /// Skip mode only: `‖S̃Sᵀ − 1/(α+1)·I‖`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_term_residual: Option<f64>,
}

/// Diagnostic residuals for every layer. Never fails on a bad bank.
pub fn frame_residual(
    spec: &NetworkSpec,
    bank: &LayerBank,
    mode: FrameMode,
) -> Result<Vec<LayerResidual>> {
    bank.validate(spec)?;
    let net = Network::build(&spec.clone(), bank)?;
    (1..=spec.kappa)
        .map(|l| {
            let p = bank.layer(l);
            let pooled = &p.unpool * p.pool.transpose();
            let m = pooled.nrows();
            let alpha = pooled.trace() / m as f64;
            let c = mode.filter_constant(spec.r, alpha);
            let psi_prod = p.enc.filter_matrix() * p.dec.filter_matrix().transpose();
            let mats = net.layer(l);
            let de = &mats.d * mats.e.transpose();
            let (identity, pooled_term, skip_term) = match mode {
                FrameMode::NoSkip => (identity_residual(&de, 1.0), None, None),
                FrameMode::Skip => {
                    let (s, st) = skip_operators(p);
                    let ss = st * s.transpose();
                    (
                        identity_residual(&(&de + &ss), 1.0),
                        Some(identity_residual(&de, alpha / (alpha + 1.0))),
                        Some(identity_residual(&ss, 1.0 / (alpha + 1.0))),
                    )
                }
            };
            Ok(LayerResidual {
                layer: l,
                alpha,
                pooling_residual: identity_residual(&pooled, alpha),
                filter_residual: identity_residual(&psi_prod, c),
                layer_identity_residual: identity,
                pooled_term_residual: pooled_term,
                skip_term_residual: skip_term,
            })
        })
        .collect()
}

/// The linear network's frame `B` and dual frame `B̃`, both `d_0 × feature_dim`.
///
/// Column blocks are `[E^1⋯E^κ | E^1⋯E^{κ-1}S^κ | … | E^1S^2 | S^1]`, and the
/// same with `D^l`, `S̃^l` for `B̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBasis {
    pub b: Matrix,
    pub b_tilde: Matrix,
}

impl FrameBasis {
    /// `B̃Bᵀ`, the end-to-end linear map.
    pub fn synthesis_analysis(&self) -> Matrix {
        &self.b_tilde * self.b.transpose()
    }

    /// `‖B̃Bᵀ − I‖_max`.
    pub fn reconstruction_residual(&self) -> f64 {
        identity_residual(&self.synthesis_analysis(), 1.0)
    }
}

/// Assemble `B`, `B̃` from the layer operators (nonlinearity ignored).
pub fn build_frame_basis(spec: &NetworkSpec, bank: &LayerBank) -> Result<FrameBasis> {
    let net = Network::build(spec, bank)?;
    Ok(frame_basis_of(&net))
}

pub fn frame_basis_of(net: &Network) -> FrameBasis {
    let spec = net.spec();
    let d0 = spec.input_dim();
    let mut b_blocks: Vec<Matrix> = Vec::new();
    let mut bt_blocks: Vec<Matrix> = Vec::new();
    // prefix[l] = E^1⋯E^l, prefix_t[l] = D^1⋯D^l
    let mut prefix = vec![Matrix::identity(d0, d0)];
    let mut prefix_t = vec![Matrix::identity(d0, d0)];
    for mats in net.layers() {
        prefix.push(prefix.last().unwrap() * &mats.e);
        prefix_t.push(prefix_t.last().unwrap() * &mats.d);
    }
    b_blocks.push(prefix[spec.kappa].clone());
    bt_blocks.push(prefix_t[spec.kappa].clone());
    if spec.skip {
        for l in (1..=spec.kappa).rev() {
            let mats = net.layer(l);
            b_blocks.push(&prefix[l - 1] * mats.s.as_ref().expect("skip network"));
            bt_blocks.push(&prefix_t[l - 1] * mats.s_tilde.as_ref().expect("skip network"));
        }
    }
    FrameBasis {
        b: hstack(d0, &b_blocks),
        b_tilde: hstack(d0, &bt_blocks),
    }
}

pub(crate) fn hstack(rows: usize, blocks: &[Matrix]) -> Matrix {
    let cols = blocks.iter().map(Matrix::ncols).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Deviation between block `(s, t)` of a cascaded operator and the circulant
/// of the cascaded filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeLevel {
    pub layer: usize,
    /// `E^1⋯E^l` against `I ⊛ g^l`.
    pub encoder_deviation: f64,
    /// `E^1⋯E^{l-1}S^l` against `I ⊛ g^l`; present with skips.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_deviation: Option<f64>,
    /// `D^1⋯D^l` against `I ⊛ g̃^l`.
    pub decoder_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub levels: Vec<CascadeLevel>,
    pub max_deviation: f64,
}

impl CascadeReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

/// Cascaded filters `g^l_{s,t}` of period `m`, indexed `[s][t]`.
///
/// `g^1_{s,t} = tap^1(s,t)` and `g^l_{s,t} = Σ_j g^{l-1}_{s,j} ⊛ tap^l(j,t)`.
pub fn cascade_filters(taps: &[&FilterTensor], m: usize) -> Vec<Vec<Vec<f64>>> {
    let first = taps[0];
    let mut g: Vec<Vec<Vec<f64>>> = (0..first.q_in())
        .map(|s| {
            (0..first.q_out())
                .map(|t| zero_pad(first.tap(s, t), m))
                .collect()
        })
        .collect();
    for tensor in &taps[1..] {
        g = g
            .iter()
            .map(|row| {
                (0..tensor.q_out())
                    .map(|t| {
                        let mut acc = vec![0.0; m];
                        for (j, gj) in row.iter().enumerate() {
                            for (slot, v) in acc.iter_mut().zip(circ_conv(gj, tensor.tap(j, t))) {
                                *slot += v;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
    }
    g
}

fn block_deviation(product: &Matrix, g: &[Vec<Vec<f64>>], m: usize) -> f64 {
    let mut worst = 0.0_f64;
    for (s, row) in g.iter().enumerate() {
        for (t, filt) in row.iter().enumerate() {
            let block = product.view((s * m, t * m), (m, m)).into_owned();
            worst = worst.max(max_abs_diff(&block, &identity_conv(m, filt)));
        }
    }
    worst
}

/// Without pooling, every `(s, t)` block of `E^1⋯E^l` is the circulant of
/// the cascaded filter `g^l_{s,t}`; likewise for the decoder.
pub fn cascade_filter_check(spec: &NetworkSpec, bank: &LayerBank) -> Result<CascadeReport> {
    bank.validate(spec)?;
    let m = spec.m[0];
    if spec.m.iter().any(|&ml| ml != m) {
        return Err(Error::PoolingPresent(
            "all signal lengths m_l must be equal".into(),
        ));
    }
    let id = Matrix::identity(m, m);
    for (i, p) in bank.layers.iter().enumerate() {
        if p.pool != id || p.unpool != id {
            return Err(Error::PoolingPresent(format!(
                "layer {} has non-identity pooling",
                i + 1
            )));
        }
    }
    let net = Network::build(spec, bank)?;
    let d0 = spec.input_dim();
    let mut enc_prod = Matrix::identity(d0, d0);
    let mut dec_prod = Matrix::identity(d0, d0);
    let mut levels = Vec::with_capacity(spec.kappa);
    for l in 1..=spec.kappa {
        let mats = net.layer(l);
        let skip_prod = mats.s.as_ref().map(|s| &enc_prod * s);
        enc_prod = &enc_prod * &mats.e;
        dec_prod = &dec_prod * &mats.d;
        let enc_taps: Vec<&FilterTensor> = bank.layers[..l].iter().map(|p| &p.enc).collect();
        let dec_taps: Vec<&FilterTensor> = bank.layers[..l].iter().map(|p| &p.dec).collect();
        let g = cascade_filters(&enc_taps, m);
        let g_tilde = cascade_filters(&dec_taps, m);
        levels.push(CascadeLevel {
            layer: l,
            encoder_deviation: block_deviation(&enc_prod, &g, m),
            skip_deviation: skip_prod.map(|sp| block_deviation(&sp, &g, m)),
            decoder_deviation: block_deviation(&dec_prod, &g_tilde, m),
        });
    }
    let max_deviation = levels
        .iter()
        .flat_map(|lv| {
            [
                lv.encoder_deviation,
                lv.decoder_deviation,
                lv.skip_deviation.unwrap_or(0.0),
            ]
        })
        .fold(0.0, f64::max);
    Ok(CascadeReport {
        levels,
        max_deviation,
    })
}
