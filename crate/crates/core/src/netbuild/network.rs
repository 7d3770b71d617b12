use super::{build_layer_matrices, LayerBank, LayerMatrices, NetworkSpec, Nonlinearity};
use crate::linalg::Vector;
use crate::{Error, Result};

fn relu(v: &Vector) -> Vector {
    v.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// Output of one encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderStep {
    /// `E^{l⊤} ξ^{l-1}`.
    pub pre: Vector,
    /// `ξ^l`.
    pub xi: Vector,
    /// `S^{l⊤} ξ^{l-1}`, with skips.
    pub skip_pre: Option<Vector>,
    /// `χ^l`, with skips.
    pub chi: Option<Vector>,
}

#[derive(Debug, Clone)]
pub struct DecoderStep {
    /// `D^l ξ̃^l + S̃^l χ^l`.
    pub pre: Vector,
    /// `ξ̃^{l-1}`.
    pub out: Vector,
}

pub fn encoder_step(
    x: &Vector,
    mats: &LayerMatrices,
    nonlinearity: Nonlinearity,
) -> Result<EncoderStep> {
    if x.len() != mats.d_in() {
        return Err(Error::Dimension(format!(
            "encoder input has length {}, layer expects {}",
            x.len(),
            mats.d_in()
        )));
    }
    let act = |v: &Vector| {
        if nonlinearity.encoder_relu() {
            relu(v)
        } else {
            v.clone()
        }
    };
    let pre = mats.e.tr_mul(x);
    let xi = act(&pre);
    let skip_pre = mats.s.as_ref().map(|s| s.tr_mul(x));
    let chi = skip_pre.as_ref().map(act);
    Ok(EncoderStep {
        pre,
        xi,
        skip_pre,
        chi,
    })
}

pub fn decoder_step(
    xi_tilde: &Vector,
    chi: Option<&Vector>,
    mats: &LayerMatrices,
    nonlinearity: Nonlinearity,
) -> Result<DecoderStep> {
    if xi_tilde.len() != mats.d_out() {
        return Err(Error::Dimension(format!(
            "decoder input has length {}, layer expects {}",
            xi_tilde.len(),
            mats.d_out()
        )));
    }
    let mut pre = &mats.d * xi_tilde;
    match (chi, &mats.s_tilde) {
        (Some(chi), Some(st)) => {
            if chi.len() != st.ncols() {
                return Err(Error::Dimension(format!(
                    "skip features have length {}, layer expects {}",
                    chi.len(),
                    st.ncols()
                )));
            }
            pre += st * chi;
        }
        (None, None) => {}
        (Some(_), None) => {
            return Err(Error::Dimension(
                "skip features given to a layer without skips".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(Error::Dimension(
                "layer with skips needs skip features".into(),
            ))
        }
    }
    let out = if nonlinearity.decoder_relu() {
        relu(&pre)
    } else {
        pre.clone()
    };
    Ok(DecoderStep { pre, out })
}

/// Every intermediate quantity of one forward pass.
///
/// Per-layer vectors (`enc_pre`, `skip_pre`, `chi`, `dec_pre`) are indexed by
/// `l - 1`; feature vectors `xi` and `xi_tilde` by `l ∈ 0..=κ`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub xi: Vec<Vector>,
    pub enc_pre: Vec<Vector>,
    pub skip_pre: Vec<Vector>,
    pub chi: Vec<Vector>,
    /// `dec_pre[l-1]` is the pre-activation of `ξ̃^{l-1}`.
    pub dec_pre: Vec<Vector>,
    pub xi_tilde: Vec<Vector>,
}

impl ForwardTrace {
    pub fn input(&self) -> &Vector {
        &self.xi[0]
    }

    /// `y = ξ̃^0`.
    pub fn output(&self) -> &Vector {
        &self.xi_tilde[0]
    }

    /// Smallest `|pre-activation|` over all ReLU sites; `∞` without ReLUs.
    pub fn kink_margin(&self, nonlinearity: Nonlinearity) -> f64 {
        self.relu_sites(nonlinearity)
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }

    /// Like [`kink_margin`](Self::kink_margin) but skipping exact zeros.
    ///
    /// Exact zeros are settled by the `pre > 0` mask convention and are
    /// usually structural (every input feeding the unit is itself zero).
    pub fn nonzero_kink_margin(&self, nonlinearity: Nonlinearity) -> f64 {
        self.relu_sites(nonlinearity)
            .filter(|v| *v != 0.0)
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }

    fn relu_sites(&self, nonlinearity: Nonlinearity) -> impl Iterator<Item = f64> + '_ {
        let mut sites: Vec<&Vector> = Vec::new();
        if nonlinearity.encoder_relu() {
            sites.extend(&self.enc_pre);
            sites.extend(&self.skip_pre);
        }
        if nonlinearity.decoder_relu() {
            sites.extend(&self.dec_pre);
        }
        sites.into_iter().flat_map(|v| v.iter().copied())
    }
}

/// A network with all layer operators materialized.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<LayerMatrices>,
}

impl Network {
    pub fn build(spec: &NetworkSpec, bank: &LayerBank) -> Result<Self> {
        bank.validate(spec)?;
        let layers = (1..=spec.kappa)
            .map(|l| build_layer_matrices(spec, bank.layer(l), l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    /// Wrap arbitrary (possibly unstructured) layer matrices.
    pub fn from_layers(spec: &NetworkSpec, layers: Vec<LayerMatrices>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.kappa {
            return Err(Error::Dimension(format!(
                "{} layers supplied for kappa = {}",
                layers.len(),
                spec.kappa
            )));
        }
        for (i, mats) in layers.iter().enumerate() {
            let l = i + 1;
            let (din, dout) = (spec.d(l - 1), spec.d(l));
            let shape_ok = mats.e.shape() == (din, dout)
                && mats.d.shape() == (din, dout)
                && match (&mats.s, &mats.s_tilde, spec.skip) {
                    (Some(s), Some(st), true) => {
                        s.shape() == (din, spec.s(l)) && st.shape() == (din, spec.s(l))
                    }
                    (None, None, false) => true,
                    _ => false,
                };
            if !shape_ok {
                return Err(Error::Dimension(format!(
                    "layer {l} matrices do not match the spec"
                )));
            }
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.spec.nonlinearity
    }

    pub fn layers(&self) -> &[LayerMatrices] {
        &self.layers
    }

    /// Layer `l ∈ 1..=κ`.
    pub fn layer(&self, l: usize) -> &LayerMatrices {
        &self.layers[l - 1]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut LayerMatrices {
        &mut self.layers[l - 1]
    }

    /// Same operators, different nonlinearity.
    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Self {
        let mut out = self.clone();
        out.spec.nonlinearity = nonlinearity;
        out
    }

    pub fn forward(&self, x: &Vector) -> Result<ForwardTrace> {
        let kappa = self.spec.kappa;
        if x.len() != self.spec.input_dim() {
            return Err(Error::Dimension(format!(
                "input has length {}, network expects d_0 = {}",
                x.len(),
                self.spec.input_dim()
            )));
        }
        let nl = self.spec.nonlinearity;
        let mut trace = ForwardTrace {
            xi: vec![x.clone()],
            enc_pre: Vec::with_capacity(kappa),
            skip_pre: Vec::new(),
            chi: Vec::new(),
            dec_pre: vec![Vector::zeros(0); kappa],
            xi_tilde: vec![Vector::zeros(0); kappa + 1],
        };
        for mats in &self.layers {
            let step = encoder_step(trace.xi.last().expect("ξ^0 present"), mats, nl)?;
            trace.enc_pre.push(step.pre);
            trace.xi.push(step.xi);
            if let (Some(sp), Some(chi)) = (step.skip_pre, step.chi) {
                trace.skip_pre.push(sp);
                trace.chi.push(chi);
            }
        }
        trace.xi_tilde[kappa] = trace.xi[kappa].clone();
        for l in (1..=kappa).rev() {
            let chi = if self.spec.skip {
                Some(&trace.chi[l - 1])
            } else {
                None
            };
            let step = decoder_step(&trace.xi_tilde[l], chi, &self.layers[l - 1], nl)?;
            trace.dec_pre[l - 1] = step.pre;
            trace.xi_tilde[l - 1] = step.out;
        }
        Ok(trace)
    }

    /// `F(W, x)`.
    pub fn output(&self, x: &Vector) -> Result<Vector> {
        Ok(self.forward(x)?.xi_tilde.swap_remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vector, seeded_rng};

    fn random_net(skip: bool, nl: Nonlinearity, seed: u64) -> Network {
        let spec = NetworkSpec::new(2, vec![1, 2, 3], vec![6, 6, 4], skip, nl).unwrap();
        let bank = LayerBank::random(&spec, seed, 1.0).unwrap();
        Network::build(&spec, &bank).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_everywhere() {
        let net = random_net(true, Nonlinearity::Relu, 1);
        let step = encoder_step(&Vector::zeros(6), net.layer(1), Nonlinearity::Relu).unwrap();
        assert_eq!(step.xi.amax(), 0.0);
        assert_eq!(step.chi.unwrap().amax(), 0.0);
        let dec = decoder_step(
            &Vector::zeros(12),
            Some(&Vector::zeros(12)),
            net.layer(1),
            Nonlinearity::Relu,
        )
        .unwrap();
        assert_eq!(dec.out.amax(), 0.0);
    }

    #[test]
    fn encoder_step_is_entrywise_relu() {
        let net = random_net(false, Nonlinearity::Relu, 2);
        let x = gaussian_vector(&mut seeded_rng(3), 6);
        let step = encoder_step(&x, net.layer(1), Nonlinearity::Relu).unwrap();
        let lin = net.layer(1).e.transpose() * &x;
        for i in 0..lin.len() {
            assert_eq!(step.xi[i], lin[i].max(0.0));
        }
    }

    #[test]
    fn identity_network_reproduces_input() {
        let spec = NetworkSpec::new(1, vec![1, 1], vec![4, 4], false, Nonlinearity::None).unwrap();
        let net = Network::build(&spec, &LayerBank::identity(&spec).unwrap()).unwrap();
        let x = Vector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(net.output(&x).unwrap(), x);
        let step = decoder_step(&x, None, net.layer(1), Nonlinearity::None).unwrap();
        assert_eq!(step.out, x);
    }

    #[test]
    fn forward_matches_manual_composition() {
        let net = random_net(true, Nonlinearity::Relu, 4);
        let x = gaussian_vector(&mut seeded_rng(5), 6);
        let trace = net.forward(&x).unwrap();
        let e1 = encoder_step(&x, net.layer(1), Nonlinearity::Relu).unwrap();
        let e2 = encoder_step(&e1.xi, net.layer(2), Nonlinearity::Relu).unwrap();
        let d2 = decoder_step(&e2.xi, e2.chi.as_ref(), net.layer(2), Nonlinearity::Relu).unwrap();
        let d1 = decoder_step(&d2.out, e1.chi.as_ref(), net.layer(1), Nonlinearity::Relu).unwrap();
        assert_eq!(trace.output(), &d1.out);
        assert_eq!(trace.xi[2], e2.xi);
        assert_eq!(trace.chi[0], e1.chi.unwrap());
    }

    #[test]
    fn trace_dimensions_and_nonnegativity() {
        let net = random_net(true, Nonlinearity::Relu, 6);
        let spec = net.spec().clone();
        let trace = net
            .forward(&gaussian_vector(&mut seeded_rng(7), 6))
            .unwrap();
        for l in 0..=2 {
            assert_eq!(trace.xi[l].len(), spec.d(l));
            assert_eq!(trace.xi_tilde[l].len(), spec.d(l));
        }
        for l in 1..=2 {
            assert_eq!(trace.chi[l - 1].len(), spec.s(l));
        }
        let all = trace.xi[1..]
            .iter()
            .chain(&trace.chi)
            .chain(&trace.xi_tilde);
        assert!(all.flat_map(|v| v.iter()).all(|&v| v >= 0.0));
    }

    #[test]
    fn input_length_is_checked() {
        let net = random_net(false, Nonlinearity::Relu, 8);
        assert!(matches!(
            net.forward(&Vector::zeros(5)),
            Err(Error::Dimension(_))
        ));
    }
}
