use crate::frames::hstack;
use crate::linalg::{Matrix, Vector};
use crate::netbuild::Network;
use crate::{Error, Result};

use super::pattern::{extract_pattern, ActivationPattern};

/// Default minimum `|pre-activation|` for derivative-based checks.
pub const DEFAULT_KINK_MARGIN: f64 = 1e-8;

/// Input-dependent frame `B(x)` and dual frame `B̃(x)` with `F(x) = B̃(x)B(x)ᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRep {
    pub b: Matrix,
    pub b_tilde: Matrix,
    pub pattern: ActivationPattern,
}

impl LinearRep {
    /// The region's linear map `B̃(x)B(x)ᵀ`.
    pub fn local_map(&self) -> Matrix {
        &self.b_tilde * self.b.transpose()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.b_tilde * self.b.tr_mul(x)
    }

    pub fn feature_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// `Υ^l = Υ^{l-1}E^lΛ^l` for `l ∈ 0..=κ`, with `Υ^0 = I`.
pub fn upsilon(net: &Network, pattern: &ActivationPattern) -> Vec<Matrix> {
    let d0 = net.spec().input_dim();
    let mut out = vec![Matrix::identity(d0, d0)];
    for l in 1..=net.spec().kappa {
        let next = &out[l - 1] * &net.layer(l).e * pattern.enc_diag(l);
        out.push(next);
    }
    out
}

/// `Υ̃^l = Υ̃^{l-1}Λ̃^lD^l` for `l ∈ 0..=κ`, with `Υ̃^0 = I`.
pub fn upsilon_tilde(net: &Network, pattern: &ActivationPattern) -> Vec<Matrix> {
    let d0 = net.spec().input_dim();
    let mut out = vec![Matrix::identity(d0, d0)];
    for l in 1..=net.spec().kappa {
        let next = &out[l - 1] * pattern.dec_diag(l) * &net.layer(l).d;
        out.push(next);
    }
    out
}

/// `B`, `B̃` for a given pattern: `[Υ^κ | Υ^{κ-1}M^κ | … | M^1]` and its dual.
pub fn linear_rep_for_pattern(net: &Network, pattern: &ActivationPattern) -> LinearRep {
    let spec = net.spec();
    let kappa = spec.kappa;
    let ups = upsilon(net, pattern);
    let ups_t = upsilon_tilde(net, pattern);
    let mut b_blocks = vec![ups[kappa].clone()];
    let mut bt_blocks = vec![ups_t[kappa].clone()];
    if spec.skip {
        for l in (1..=kappa).rev() {
            let mats = net.layer(l);
            let m = mats.s.as_ref().expect("skip network") * pattern.skip_diag(l);
            let m_t = pattern.dec_diag(l) * mats.s_tilde.as_ref().expect("skip network");
            b_blocks.push(&ups[l - 1] * m);
            bt_blocks.push(&ups_t[l - 1] * m_t);
        }
    }
    let d0 = spec.input_dim();
    LinearRep {
        b: hstack(d0, &b_blocks),
        b_tilde: hstack(d0, &bt_blocks),
        pattern: pattern.clone(),
    }
}

pub fn linear_rep(net: &Network, x: &Vector) -> Result<LinearRep> {
    let pattern = extract_pattern(net, x)?;
    Ok(linear_rep_for_pattern(net, &pattern))
}

fn mask_rows(bits: &[bool], mut m: Matrix) -> Matrix {
    for (i, &b) in bits.iter().enumerate() {
        if !b {
            m.row_mut(i).fill(0.0);
        }
    }
    m
}

/// `∂(pre-activation)/∂x` for every ReLU site under a frozen pattern, in
/// the order encoder, skip, decoder (each by layer).
fn site_sensitivities(net: &Network, pattern: &ActivationPattern) -> Vec<Matrix> {
    let spec = net.spec();
    let nl = spec.nonlinearity;
    let kappa = spec.kappa;
    let mut enc = Vec::with_capacity(kappa);
    let mut skip = Vec::new();
    let mut chis = Vec::new();
    let mut xi = Matrix::identity(spec.input_dim(), spec.input_dim());
    for l in 1..=kappa {
        let mats = net.layer(l);
        if let Some(s) = &mats.s {
            let pre = s.tr_mul(&xi);
            chis.push(mask_rows(&pattern.skip[l - 1], pre.clone()));
            skip.push(pre);
        }
        let pre = mats.e.tr_mul(&xi);
        xi = mask_rows(&pattern.enc[l - 1], pre.clone());
        enc.push(pre);
    }
    let mut dec = vec![Matrix::zeros(0, 0); kappa];
    for l in (1..=kappa).rev() {
        let mats = net.layer(l);
        let mut pre = &mats.d * &xi;
        if let Some(st) = &mats.s_tilde {
            pre += st * &chis[l - 1];
        }
        xi = mask_rows(&pattern.dec[l - 1], pre.clone());
        dec[l - 1] = pre;
    }
    let mut out = Vec::new();
    if nl.encoder_relu() {
        out.extend(enc);
        out.extend(skip);
    }
    if nl.decoder_relu() {
        out.extend(dec);
    }
    out
}

/// Smallest `|pre-activation|` over ReLU sites that can move with `x`.
///
/// A site whose pre-activation is exactly zero and whose sensitivity row is
/// exactly zero (all of its inputs are switched-off units) stays at zero in
/// a neighbourhood of `x`; it is not a kink of `x ↦ F(x)` and is skipped.
pub fn input_kink_margin(net: &Network, x: &Vector) -> Result<f64> {
    let trace = net.forward(x)?;
    let nl = net.nonlinearity();
    let pattern = ActivationPattern::from_trace(&trace, nl);
    let mut pres: Vec<&Vector> = Vec::new();
    if nl.encoder_relu() {
        pres.extend(&trace.enc_pre);
        pres.extend(&trace.skip_pre);
    }
    if nl.decoder_relu() {
        pres.extend(&trace.dec_pre);
    }
    let sens = site_sensitivities(net, &pattern);
    let mut margin = f64::INFINITY;
    for (pre, rows) in pres.iter().zip(&sens) {
        for (i, &v) in pre.iter().enumerate() {
            let pinned = v == 0.0 && rows.row(i).iter().all(|&g| g == 0.0);
            if !pinned {
                margin = margin.min(v.abs());
            }
        }
    }
    Ok(margin)
}

/// `∂F/∂x = B̃(x)B(x)ᵀ`, refused within `margin` of a ReLU kink.
pub fn jacobian_analytic(net: &Network, x: &Vector, margin: f64) -> Result<Matrix> {
    let trace = net.forward(x)?;
    let found = input_kink_margin(net, x)?;
    if found < margin {
        return Err(Error::KinkMargin { margin, found });
    }
    let pattern = ActivationPattern::from_trace(&trace, net.nonlinearity());
    Ok(linear_rep_for_pattern(net, &pattern).local_map())
}

/// Central finite-difference Jacobian.
///
/// The step starts at `h` and is halved until both `x ± h·e_j` share the
/// pattern of `x`, so every difference is taken inside one linear region.
pub fn jacobian_fd(net: &Network, x: &Vector, h: f64) -> Result<Matrix> {
    let d0 = net.spec().input_dim();
    let base = extract_pattern(net, x)?;
    let mut jac = Matrix::zeros(d0, d0);
    for j in 0..d0 {
        let mut step = h;
        let mut attempts = 0;
        loop {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[j] += step;
            minus[j] -= step;
            if extract_pattern(net, &plus)? == base && extract_pattern(net, &minus)? == base {
                let col = (net.output(&plus)? - net.output(&minus)?) / (2.0 * step);
                jac.set_column(j, &col);
                break;
            }
            attempts += 1;
            if attempts > 40 {
                return Err(Error::Resample(attempts));
            }
            step *= 0.5;
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_frame_basis, frame_bank, FrameConfig};
    use crate::netbuild::{LayerBank, NetworkSpec, Nonlinearity};
    use crate::rng::{gaussian_vector, seeded_rng};

    fn net(skip: bool, nl: Nonlinearity, seed: u64) -> Network {
        let spec = NetworkSpec::new(2, vec![1, 2, 4], vec![6, 6, 3], skip, nl).unwrap();
        Network::build(&spec, &LayerBank::random(&spec, seed, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn representation_reproduces_forward() {
        for skip in [false, true] {
            let n = net(skip, Nonlinearity::Relu, 31);
            let mut rng = seeded_rng(4);
            for _ in 0..50 {
                let x = gaussian_vector(&mut rng, 6);
                let rep = linear_rep(&n, &x).unwrap();
                let y = n.output(&x).unwrap();
                assert!((rep.apply(&x) - &y).norm() <= 1e-12 * y.norm().max(1.0));
                let expected = if skip { 12 + 12 + 24 } else { 12 };
                assert_eq!(rep.feature_dim(), expected);
            }
        }
    }

    /// `y = Σ_i ⟨x, b_i⟩ b̃_i`, summed one rank-one term at a time.
    #[test]
    fn rank_one_expansion() {
        let n = net(false, Nonlinearity::Relu, 8);
        let x = gaussian_vector(&mut seeded_rng(9), 6);
        let rep = linear_rep(&n, &x).unwrap();
        let mut y = Vector::zeros(6);
        for i in 0..rep.feature_dim() {
            y += rep.b_tilde.column(i) * rep.b.column(i).dot(&x);
        }
        assert!((y - n.output(&x).unwrap()).amax() <= 1e-12);
    }

    #[test]
    fn all_ones_pattern_reduces_to_frame_basis() {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![6, 6, 6], true, Nonlinearity::None).unwrap();
        let bank = frame_bank(&spec, &FrameConfig::for_spec(&spec)).unwrap();
        let n = Network::build(&spec, &bank).unwrap();
        let rep = linear_rep(&n, &gaussian_vector(&mut seeded_rng(2), 6)).unwrap();
        let basis = build_frame_basis(&spec, &bank).unwrap();
        assert_eq!(rep.b, basis.b);
        assert_eq!(rep.b_tilde, basis.b_tilde);
        let j = jacobian_analytic(&n, &Vector::zeros(6), DEFAULT_KINK_MARGIN).unwrap();
        assert!(crate::linalg::identity_residual(&j, 1.0) <= 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences_and_is_scale_invariant() {
        let n = net(true, Nonlinearity::Relu, 12);
        let x = gaussian_vector(&mut seeded_rng(13), 6);
        let j = jacobian_analytic(&n, &x, DEFAULT_KINK_MARGIN).unwrap();
        let fd = jacobian_fd(&n, &x, 1e-6).unwrap();
        assert!((&j - fd).norm() <= 1e-6 * j.norm().max(1e-300));
        let j2 = jacobian_analytic(&n, &(&x * 2.5), DEFAULT_KINK_MARGIN).unwrap();
        assert_eq!(j, j2);
    }

    #[test]
    fn pinned_zeros_are_not_kinks() {
        // deep ReLU nets switch off whole receptive fields, leaving exact zeros
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![8, 8, 8], true, Nonlinearity::Relu).unwrap();
        let n = Network::build(&spec, &LayerBank::random(&spec, 3, 1.0).unwrap()).unwrap();
        let mut rng = seeded_rng(5);
        let mut pinned_seen = false;
        for _ in 0..50 {
            let x = gaussian_vector(&mut rng, 8);
            let strict = n.forward(&x).unwrap().kink_margin(Nonlinearity::Relu);
            let margin = input_kink_margin(&n, &x).unwrap();
            assert!(margin >= strict);
            if strict == 0.0 && margin > DEFAULT_KINK_MARGIN {
                pinned_seen = true;
                let j = jacobian_analytic(&n, &x, DEFAULT_KINK_MARGIN).unwrap();
                let fd = jacobian_fd(&n, &x, 1e-6).unwrap();
                assert!((&j - fd).norm() <= 1e-6 * j.norm().max(1e-300));
            }
        }
        assert!(pinned_seen);
    }

    #[test]
    fn jacobian_refuses_kinks() {
        let n = net(false, Nonlinearity::Relu, 12);
        let err = jacobian_analytic(&n, &Vector::zeros(6), DEFAULT_KINK_MARGIN).unwrap_err();
        assert!(matches!(err, Error::KinkMargin { .. }));
    }
}
