use crate::analysis::{upsilon_tilde, ActivationPattern};
use crate::convops::FilterTensor;
use crate::linalg::{kron, Matrix, Vector};
use crate::netbuild::{tap_basis, ForwardTrace, LayerBank, Network};
use crate::{Error, Result};

use super::data::{loss, traces, TrainingSet};

/// One of the four dense operators of a layer, treated as a free matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    E,
    D,
    S,
    STilde,
}

impl Operator {
    pub fn get(self, net: &Network, l: usize) -> Option<&Matrix> {
        let mats = net.layer(l);
        match self {
            Self::E => Some(&mats.e),
            Self::D => Some(&mats.d),
            Self::S => mats.s.as_ref(),
            Self::STilde => mats.s_tilde.as_ref(),
        }
    }

    fn get_mut(self, net: &mut Network, l: usize) -> Option<&mut Matrix> {
        let mats = net.layer_mut(l);
        match self {
            Self::E => Some(&mut mats.e),
            Self::D => Some(&mut mats.d),
            Self::S => mats.s.as_mut(),
            Self::STilde => mats.s_tilde.as_mut(),
        }
    }
}

/// Loss gradients with respect to every layer operator as a free matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGradients {
    pub e: Matrix,
    pub d: Matrix,
    pub s: Option<Matrix>,
    pub s_tilde: Option<Matrix>,
}

impl MatrixGradients {
    pub fn get(&self, op: Operator) -> Option<&Matrix> {
        match op {
            Operator::E => Some(&self.e),
            Operator::D => Some(&self.d),
            Operator::S => self.s.as_ref(),
            Operator::STilde => self.s_tilde.as_ref(),
        }
    }
}

/// Traces for all samples, refusing any within `margin` of a kink.
///
/// Exact zeros are not kinks here: the mask treats them as inactive and the
/// gradients are the matching one-sided derivatives.
pub fn margin_safe_traces(
    net: &Network,
    data: &TrainingSet,
    margin: f64,
) -> Result<Vec<ForwardTrace>> {
    let tr = traces(net, data)?;
    let found = tr
        .iter()
        .map(|t| t.nonzero_kink_margin(net.nonlinearity()))
        .fold(f64::INFINITY, f64::min);
    if found < margin {
        return Err(Error::KinkMargin { margin, found });
    }
    Ok(tr)
}

fn residual(trace: &ForwardTrace, data: &TrainingSet, i: usize) -> Vector {
    trace.output() - data.target(i)
}

fn patterns(net: &Network, tr: &[ForwardTrace]) -> Vec<ActivationPattern> {
    tr.iter()
        .map(|t| ActivationPattern::from_trace(t, net.nonlinearity()))
        .collect()
}

fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(Matrix::nrows).sum();
    let cols = blocks.iter().map(Matrix::ncols).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `Λ̃^l(x_i)·Υ̃^{l-1}(x_i)ᵀ` for every sample, each `d_{l-1} × d_0`.
pub fn skip_factors(net: &Network, pats: &[ActivationPattern], l: usize) -> Vec<Matrix> {
    pats.iter()
        .map(|p| p.dec_diag(l) * upsilon_tilde(net, p)[l - 1].transpose())
        .collect()
}

/// `Λ^κ(x_i)·Υ̃^κ(x_i)ᵀ` for every sample, each `d_κ × d_0`.
pub fn encoder_factors(net: &Network, pats: &[ActivationPattern]) -> Vec<Matrix> {
    let kappa = net.spec().kappa;
    pats.iter()
        .map(|p| p.enc_diag(kappa) * upsilon_tilde(net, p)[kappa].transpose())
        .collect()
}

/// Pieces of the Kronecker-form gradient `vec(∇) = (Φ ⊗ I)·𝐃·𝐑`.
#[derive(Debug, Clone)]
pub struct KroneckerParts {
    /// Feature matrix `Γ^l` (skip) or `Ξ^{κ-1}` (encoder).
    pub features: Matrix,
    /// Per-sample factors forming the block diagonal `𝐃`.
    pub factors: Vec<Matrix>,
    /// Stacked residuals `F(x_i) − y_i`.
    pub residual: Vector,
    pub loss: f64,
}

impl KroneckerParts {
    /// `(features ⊗ I)·blockdiag(factors)·residual`, built literally.
    pub fn vec_gradient(&self) -> Vector {
        let inner = self.factors[0].nrows();
        let big_d = block_diag(&self.factors);
        kron(&self.features, &Matrix::identity(inner, inner)) * (big_d * &self.residual)
    }
}

fn stacked_residuals(tr: &[ForwardTrace], data: &TrainingSet) -> Vector {
    let d0 = data.dim();
    let mut r = Vector::zeros(d0 * tr.len());
    for (i, t) in tr.iter().enumerate() {
        r.rows_mut(i * d0, d0).copy_from(&residual(t, data, i));
    }
    r
}

fn half_norm_sq(r: &Vector) -> f64 {
    0.5 * r.norm_squared()
}

pub fn skip_parts(
    net: &Network,
    data: &TrainingSet,
    l: usize,
    margin: f64,
) -> Result<KroneckerParts> {
    let spec = net.spec();
    if !spec.skip {
        return Err(Error::Precondition(
            "skip gradient needs a network with skips".into(),
        ));
    }
    if !(1..=spec.kappa).contains(&l) {
        return Err(Error::Dimension(format!(
            "layer {l} outside 1..={}",
            spec.kappa
        )));
    }
    let tr = margin_safe_traces(net, data, margin)?;
    let pats = patterns(net, &tr);
    let feats = super::data::features_from_traces(net, &tr);
    let residual = stacked_residuals(&tr, data);
    Ok(KroneckerParts {
        features: feats.gamma(l).clone(),
        factors: skip_factors(net, &pats, l),
        loss: half_norm_sq(&residual),
        residual,
    })
}

/// Parts for the gradient with respect to `E^κ`, pairing the factors
/// `Λ^κΥ̃^κᵀ` with the layer-`(κ-1)` features that multiply `E^κ`.
pub fn encoder_parts(net: &Network, data: &TrainingSet, margin: f64) -> Result<KroneckerParts> {
    let kappa = net.spec().kappa;
    let tr = margin_safe_traces(net, data, margin)?;
    let pats = patterns(net, &tr);
    let feats = super::data::features_from_traces(net, &tr);
    let residual = stacked_residuals(&tr, data);
    Ok(KroneckerParts {
        features: feats.xi[kappa - 1].clone(),
        factors: encoder_factors(net, &pats),
        loss: half_norm_sq(&residual),
        residual,
    })
}

/// `∇_{S̃^l}C` (free matrix, `d_{l-1} × s_l`) from the Kronecker form.
pub fn grad_skip_analytic(
    net: &Network,
    data: &TrainingSet,
    l: usize,
    margin: f64,
) -> Result<Matrix> {
    let parts = skip_parts(net, data, l, margin)?;
    let rows = parts.factors[0].nrows();
    let v = parts.vec_gradient();
    Ok(Matrix::from_column_slice(
        rows,
        parts.features.nrows(),
        v.as_slice(),
    ))
}

/// `∇_{E^κ}C` (free matrix, `d_{κ-1} × d_κ`) from the Kronecker form.
///
/// The form yields `vec(∇ᵀ)`, which is reshaped and transposed.
pub fn grad_enc_analytic(net: &Network, data: &TrainingSet, margin: f64) -> Result<Matrix> {
    let parts = encoder_parts(net, data, margin)?;
    let rows = parts.factors[0].nrows();
    let v = parts.vec_gradient();
    Ok(Matrix::from_column_slice(rows, parts.features.nrows(), v.as_slice()).transpose())
}

fn masked(bits: &[bool], v: &Vector) -> Vector {
    Vector::from_iterator(
        v.len(),
        v.iter().zip(bits).map(|(&x, &b)| if b { x } else { 0.0 }),
    )
}

/// Reverse-mode gradients of `C` with respect to every operator of every
/// layer (index `l - 1`), plus the loss.
pub fn backprop(net: &Network, data: &TrainingSet) -> Result<(f64, Vec<MatrixGradients>)> {
    let spec = net.spec();
    let kappa = spec.kappa;
    let tr = traces(net, data)?;
    let mut grads: Vec<MatrixGradients> = net
        .layers()
        .iter()
        .map(|m| MatrixGradients {
            e: Matrix::zeros(m.e.nrows(), m.e.ncols()),
            d: Matrix::zeros(m.d.nrows(), m.d.ncols()),
            s: m.s.as_ref().map(|s| Matrix::zeros(s.nrows(), s.ncols())),
            s_tilde: m
                .s_tilde
                .as_ref()
                .map(|s| Matrix::zeros(s.nrows(), s.ncols())),
        })
        .collect();
    let mut total = 0.0;
    for (i, t) in tr.iter().enumerate() {
        let p = ActivationPattern::from_trace(t, net.nonlinearity());
        let r = residual(t, data, i);
        total += 0.5 * r.norm_squared();

        // decoder: g = ∂C/∂ξ̃^{l-1}
        let mut g = r;
        let mut g_chi: Vec<Option<Vector>> = vec![None; kappa];
        for l in 1..=kappa {
            let mats = net.layer(l);
            let delta = masked(&p.dec[l - 1], &g);
            grads[l - 1].d += &delta * t.xi_tilde[l].transpose();
            if let (Some(st), Some(gst)) = (&mats.s_tilde, grads[l - 1].s_tilde.as_mut()) {
                *gst += &delta * t.chi[l - 1].transpose();
                g_chi[l - 1] = Some(st.tr_mul(&delta));
            }
            g = mats.d.tr_mul(&delta);
        }
        // encoder: u = ∂C/∂ξ^l, starting from ξ̃^κ = ξ^κ
        let mut u = g;
        for l in (1..=kappa).rev() {
            let mats = net.layer(l);
            let delta = masked(&p.enc[l - 1], &u);
            grads[l - 1].e += &t.xi[l - 1] * delta.transpose();
            let mut next = &mats.e * &delta;
            if let (Some(s), Some(gs), Some(gc)) = (&mats.s, grads[l - 1].s.as_mut(), &g_chi[l - 1])
            {
                let delta_s = masked(&p.skip[l - 1], gc);
                *gs += &t.xi[l - 1] * delta_s.transpose();
                next += s * delta_s;
            }
            u = next;
        }
    }
    Ok((total, grads))
}

/// Central finite differences of `C` over the entries of one operator.
///
/// Each entry uses step `h·(1 + |entry|)`, halved until both perturbed
/// networks keep every sample's activation pattern. When a pre-activation
/// is exactly zero only one side can keep the pattern, and a one-sided
/// difference on that side is used, matching the `pre > 0` convention.
pub fn fd_matrix_gradient(
    net: &Network,
    data: &TrainingSet,
    l: usize,
    op: Operator,
    h: f64,
) -> Result<Matrix> {
    let base = op
        .get(net, l)
        .ok_or_else(|| Error::Precondition(format!("layer {l} has no {op:?} operator")))?
        .clone();
    let base_pats = patterns(net, &traces(net, data)?);
    let base_loss = loss(net, data)?;
    let mut work = net.clone();
    let mut grad = Matrix::zeros(base.nrows(), base.ncols());
    for j in 0..base.ncols() {
        for i in 0..base.nrows() {
            let mut step = h * (1.0 + base[(i, j)].abs());
            let mut attempts = 0;
            loop {
                let eval = |work: &mut Network, delta: f64| -> Result<(f64, bool)> {
                    op.get_mut(work, l).expect("operator present")[(i, j)] = base[(i, j)] + delta;
                    let same = patterns(work, &traces(work, data)?) == base_pats;
                    Ok((loss(work, data)?, same))
                };
                let (lp, sp) = eval(&mut work, step)?;
                let (lm, sm) = eval(&mut work, -step)?;
                let mut one_sided = None;
                if sp != sm {
                    // a pre-activation sits exactly on a kink; take the
                    // second-order one-sided difference on the side that
                    // keeps the recorded pattern
                    let dir = if sp { 1.0 } else { -1.0 };
                    let (l2, s2) = eval(&mut work, 2.0 * dir * step)?;
                    if s2 {
                        let l1 = if sp { lp } else { lm };
                        let l0 = base_loss;
                        one_sided = Some(dir * (4.0 * l1 - l2 - 3.0 * l0) / (2.0 * step));
                    }
                }
                op.get_mut(&mut work, l).expect("operator present")[(i, j)] = base[(i, j)];
                if sp && sm {
                    grad[(i, j)] = (lp - lm) / (2.0 * step);
                    break;
                }
                if let Some(g) = one_sided {
                    grad[(i, j)] = g;
                    break;
                }
                attempts += 1;
                if attempts > 40 {
                    return Err(Error::Resample(attempts));
                }
                step *= 0.5;
            }
        }
    }
    Ok(grad)
}

/// Gradients with respect to the filter taps of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TapGradients {
    pub enc: FilterTensor,
    pub dec: FilterTensor,
}

/// Chain rule from operator gradients to taps: `E`, `S` depend on the
/// encoder taps and `D`, `S̃` on the decoder taps; pooling stays fixed.
pub fn tap_gradients(bank: &LayerBank, grads: &[MatrixGradients]) -> Vec<TapGradients> {
    bank.layers
        .iter()
        .zip(grads)
        .map(|(p, g)| {
            let (q_in, q_out, r) = p.enc.shape();
            let (m_in, m_out) = p.pool.shape();
            let id = Matrix::identity(m_in, m_in);
            let pool_basis: Vec<Matrix> = (0..r).map(|a| tap_basis(&p.pool, r, a)).collect();
            let unpool_basis: Vec<Matrix> = (0..r).map(|a| tap_basis(&p.unpool, r, a)).collect();
            let id_basis: Vec<Matrix> = (0..r).map(|a| tap_basis(&id, r, a)).collect();
            let side = |main: &Matrix, skip: Option<&Matrix>, basis: &[Matrix]| {
                FilterTensor::from_fn(q_in, q_out, r, |c, o, a| {
                    let block = main.view((c * m_in, o * m_out), (m_in, m_out));
                    let mut v = block.component_mul(&basis[a]).sum();
                    if let Some(s) = skip {
                        let sb = s.view((c * m_in, o * m_in), (m_in, m_in));
                        v += sb.component_mul(&id_basis[a]).sum();
                    }
                    v
                })
            };
            TapGradients {
                enc: side(&g.e, g.s.as_ref(), &pool_basis),
                dec: side(&g.d, g.s_tilde.as_ref(), &unpool_basis),
            }
        })
        .collect()
}

/// Filter taps of every layer flattened as `[enc¹, dec¹, enc², dec², …]`.
pub fn bank_params(bank: &LayerBank) -> Vec<f64> {
    bank.layers
        .iter()
        .flat_map(|p| p.enc.as_slice().iter().chain(p.dec.as_slice()).copied())
        .collect()
}

pub fn set_bank_params(bank: &mut LayerBank, params: &[f64]) {
    let mut at = 0;
    for p in &mut bank.layers {
        for t in [&mut p.enc, &mut p.dec] {
            let n = t.as_slice().len();
            t.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
        }
    }
    assert_eq!(at, params.len(), "parameter vector length");
}

pub fn flatten_tap_gradients(grads: &[TapGradients]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.enc.as_slice().iter().chain(g.dec.as_slice()).copied())
        .collect()
}

/// Loss and its gradient with respect to all filter taps.
pub fn loss_and_tap_gradient(
    net: &Network,
    bank: &LayerBank,
    data: &TrainingSet,
) -> Result<(f64, Vec<f64>)> {
    let (c, grads) = backprop(net, data)?;
    Ok((c, flatten_tap_gradients(&tap_gradients(bank, &grads))))
}
