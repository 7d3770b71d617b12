use super::{LayerParams, NetworkSpec};
use crate::convops::{conv_with_frame, identity_conv, FilterTensor};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Dense operators of one layer.
///
/// - `e`: `E^l`, `d_{l-1} × d_l`; encoder features are `σ(Eᵀ ξ^{l-1})`.
/// - `d`: `D^l`, `d_{l-1} × d_l`; decoder output is `σ(D ξ̃^l + S̃ χ^l)`.
/// - `s`: `S^l`, `d_{l-1} × s_l`; skip features are `σ(Sᵀ ξ^{l-1})`.
/// - `s_tilde`: `S̃^l`, `d_{l-1} × s_l`.
///
/// All block indexing is channel-major: rows of block `c` belong to input
/// channel `c` of the layer, columns of block `o` to output channel `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrices {
    pub e: Matrix,
    pub d: Matrix,
    pub s: Option<Matrix>,
    pub s_tilde: Option<Matrix>,
}

impl LayerMatrices {
    pub fn d_in(&self) -> usize {
        self.e.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.e.ncols()
    }

    pub fn s_dim(&self) -> Option<usize> {
        self.s.as_ref().map(Matrix::ncols)
    }
}

/// Block matrix whose `(c, o)` block is `conv_with_frame(frame, filters.tap(c, o))`.
pub fn filtered_blocks(frame: &Matrix, filters: &FilterTensor) -> Matrix {
    let (m_in, m_out) = frame.shape();
    let (q_in, q_out, _) = filters.shape();
    let mut out = Matrix::zeros(m_in * q_in, m_out * q_out);
    for c in 0..q_in {
        for o in 0..q_out {
            let block = conv_with_frame(frame, filters.tap(c, o));
            out.view_mut((c * m_in, o * m_out), (m_in, m_out))
                .copy_from(&block);
        }
    }
    out
}

/// `(S^l, S̃^l)`: the layer's filters applied with identity pooling.
pub fn skip_operators(params: &LayerParams) -> (Matrix, Matrix) {
    let m_in = params.pool.nrows();
    let id = Matrix::identity(m_in, m_in);
    (
        filtered_blocks(&id, &params.enc),
        filtered_blocks(&id, &params.dec),
    )
}

/// `conv_with_frame(frame, e_a)`, the derivative of a filtered block with
/// respect to tap `a`.
pub fn tap_basis(frame: &Matrix, r: usize, a: usize) -> Matrix {
    let mut e_a = vec![0.0; r];
    e_a[a] = 1.0;
    conv_with_frame(frame, &e_a)
}

/// Realize `E^l`, `D^l` and, with skips, `S^l`, `S̃^l`.
pub fn build_layer_matrices(
    spec: &NetworkSpec,
    params: &LayerParams,
    l: usize,
) -> Result<LayerMatrices> {
    if !(1..=spec.kappa).contains(&l) {
        return Err(Error::Dimension(format!(
            "layer index {l} outside 1..={}",
            spec.kappa
        )));
    }
    let want = (spec.q[l - 1], spec.q[l], spec.r);
    if params.enc.shape() != want || params.dec.shape() != want {
        return Err(Error::Dimension(format!(
            "layer {l} filter tensors must have shape {want:?}"
        )));
    }
    let pool_shape = (spec.m[l - 1], spec.m[l]);
    if params.pool.shape() != pool_shape || params.unpool.shape() != pool_shape {
        return Err(Error::Dimension(format!(
            "layer {l} pooling matrices must be {pool_shape:?}"
        )));
    }
    let e = filtered_blocks(&params.pool, &params.enc);
    let d = filtered_blocks(&params.unpool, &params.dec);
    let (s, s_tilde) = if spec.skip {
        let (s, st) = skip_operators(params);
        (Some(s), Some(st))
    } else {
        (None, None)
    };
    Ok(LayerMatrices { e, d, s, s_tilde })
}

/// `I_m ⊛ v` blocks are circulant; exposed for the cascade check.
pub fn circulant(m: usize, v: &[f64]) -> Matrix {
    identity_conv(m, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convops::{circ_conv, correlate};
    use crate::linalg::{max_abs_diff, Vector};
    use crate::netbuild::{LayerBank, Nonlinearity};
    use crate::rng::{gaussian_vector, seeded_rng};

    fn chan(v: &Vector, c: usize, m: usize) -> Vec<f64> {
        v.rows(c * m, m).iter().copied().collect()
    }

    #[test]
    fn identity_layer_gives_identity() {
        let spec = NetworkSpec::new(1, vec![1, 1], vec![5, 5], true, Nonlinearity::None).unwrap();
        let bank = LayerBank::identity(&spec).unwrap();
        let mats = build_layer_matrices(&spec, bank.layer(1), 1).unwrap();
        assert_eq!(mats.e, Matrix::identity(5, 5));
        assert_eq!(mats.d, Matrix::identity(5, 5));
        assert_eq!(mats.s.unwrap(), Matrix::identity(5, 5));
    }

    #[test]
    fn haar_filters_give_two_circulant_blocks() {
        let spec = NetworkSpec::new(2, vec![1, 2], vec![4, 4], false, Nonlinearity::None).unwrap();
        let mut bank = LayerBank::identity(
            &NetworkSpec::new(2, vec![1, 1], vec![4, 4], false, Nonlinearity::None).unwrap(),
        )
        .unwrap();
        let p = &mut bank.layers[0];
        p.enc = FilterTensor::from_fn(1, 2, 2, |_, o, a| match (o, a) {
            (0, _) => 0.5,
            (1, 0) => 0.5,
            _ => -0.5,
        });
        p.dec = p.enc.clone();
        let mats = build_layer_matrices(&spec, p, 1).unwrap();
        assert_eq!(mats.e.shape(), (4, 8));
        let low = circulant(4, &[0.5, 0.5]);
        let high = circulant(4, &[0.5, -0.5]);
        assert!(max_abs_diff(&mats.e.columns(0, 4).into_owned(), &low) < 1e-15);
        assert!(max_abs_diff(&mats.e.columns(4, 4).into_owned(), &high) < 1e-15);
    }

    /// Channel-by-channel convolution + pooling against the matrix form,
    /// for a contracting pooling layer with several channels.
    #[test]
    fn matrix_form_matches_channelwise_convolution() {
        let spec = NetworkSpec::new(3, vec![2, 3], vec![6, 4], true, Nonlinearity::None).unwrap();
        let bank = LayerBank::random(&spec, 21, 1.0).unwrap();
        let p = bank.layer(1);
        let mats = build_layer_matrices(&spec, p, 1).unwrap();
        let mut rng = seeded_rng(22);
        let (m_in, m_out) = (6, 4);

        // encoder: ξ_o = Φᵀ Σ_c ξ_c ⊛ flip(ψ_{o,c})
        let x = gaussian_vector(&mut rng, 12);
        let via_matrix = mats.e.transpose() * &x;
        let via_skip = mats.s.as_ref().unwrap().transpose() * &x;
        for o in 0..3 {
            let mut filtered = Vector::zeros(m_in);
            for c in 0..2 {
                filtered += Vector::from_vec(correlate(&chan(&x, c, m_in), p.enc.tap(c, o)));
            }
            let pooled = p.pool.transpose() * &filtered;
            assert!((pooled - via_matrix.rows(o * m_out, m_out)).amax() < 1e-12);
            assert!((filtered - via_skip.rows(o * m_in, m_in)).amax() < 1e-12);
        }

        // decoder: ξ̃_c = Σ_o (Φ̃ ξ̃_o) ⊛ ψ̃_{c,o}
        let z = gaussian_vector(&mut rng, 12);
        let chi = gaussian_vector(&mut rng, 18);
        let via_matrix = &mats.d * &z + mats.s_tilde.as_ref().unwrap() * &chi;
        for c in 0..2 {
            let mut acc = vec![0.0; m_in];
            for o in 0..3 {
                let unpooled = &p.unpool * Vector::from_vec(chan(&z, o, m_out));
                let merged: Vec<f64> = unpooled
                    .iter()
                    .zip(chan(&chi, o, m_in))
                    .map(|(a, b)| a + b)
                    .collect();
                for (slot, v) in acc.iter_mut().zip(circ_conv(&merged, p.dec.tap(c, o))) {
                    *slot += v;
                }
            }
            assert!((Vector::from_vec(acc) - via_matrix.rows(c * m_in, m_in)).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_layer_index() {
        let spec = NetworkSpec::new(1, vec![1, 1], vec![3, 3], false, Nonlinearity::None).unwrap();
        let bank = LayerBank::identity(&spec).unwrap();
        assert!(build_layer_matrices(&spec, bank.layer(1), 2).is_err());
    }
}
