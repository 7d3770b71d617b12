use serde::Serialize;

use crate::linalg::{numerical_rank, singular_values, Matrix, Vector};
use crate::netbuild::{ForwardTrace, Network};
use crate::rng::{derive_seed, gaussian_matrix, seeded_rng};
use crate::{Error, Result};

/// Inputs and targets stored column-wise, both `d_0 × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Matrix,
    y: Matrix,
}

impl TrainingSet {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::Dimension(
                "training set needs at least one sample".into(),
            ));
        }
        if x.shape() != y.shape() {
            return Err(Error::Dimension(format!(
                "inputs are {:?} but targets are {:?}",
                x.shape(),
                y.shape()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training set"));
        }
        Ok(Self { x, y })
    }

    /// Gaussian inputs and targets.
    pub fn random(d0: usize, t: usize, seed: u64) -> Result<Self> {
        let x = gaussian_matrix(&mut seeded_rng(derive_seed(seed, "data/x")), d0, t);
        let y = gaussian_matrix(&mut seeded_rng(derive_seed(seed, "data/y")), d0, t);
        Self::new(x, y)
    }

    /// Targets equal to the network outputs, so the loss is exactly zero.
    pub fn realizable(net: &Network, x: Matrix) -> Result<Self> {
        let mut y = Matrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.ncols() {
            y.set_column(i, &net.output(&x.column(i).into_owned())?);
        }
        Self::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.x
    }

    pub fn targets(&self) -> &Matrix {
        &self.y
    }

    pub fn input(&self, i: usize) -> Vector {
        self.x.column(i).into_owned()
    }

    pub fn target(&self, i: usize) -> Vector {
        self.y.column(i).into_owned()
    }

    pub(crate) fn check(&self, net: &Network) -> Result<()> {
        if self.dim() != net.spec().input_dim() {
            return Err(Error::Dimension(format!(
                "training samples have length {}, network expects {}",
                self.dim(),
                net.spec().input_dim()
            )));
        }
        Ok(())
    }
}

/// `C = ½ Σ_i ‖F(x_i) − y_i‖²`, accumulated in sample order.
pub fn loss(net: &Network, data: &TrainingSet) -> Result<f64> {
    data.check(net)?;
    let mut total = 0.0;
    for i in 0..data.len() {
        total += 0.5 * (net.output(&data.input(i))? - data.target(i)).norm_squared();
    }
    Ok(total)
}

/// Forward traces for every sample.
pub fn traces(net: &Network, data: &TrainingSet) -> Result<Vec<ForwardTrace>> {
    data.check(net)?;
    (0..data.len())
        .map(|i| net.forward(&data.input(i)))
        .collect()
}

/// Stacked training features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrices {
    /// `xi[l]` is `Ξ^l = [ξ^l(x_1) … ξ^l(x_T)]`, `d_l × T`, for `l ∈ 0..=κ`.
    pub xi: Vec<Matrix>,
    /// `gamma[l-1]` is `Γ^l = [χ^l(x_1) … χ^l(x_T)]`, `s_l × T`; empty without skips.
    pub gamma: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SpectrumSummary {
    pub fn of(m: &Matrix) -> Self {
        let s = singular_values(m);
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            rank: numerical_rank(m),
            sigma_min: s.last().copied().unwrap_or(0.0),
            sigma_max: s.first().copied().unwrap_or(0.0),
        }
    }
}

impl FeatureMatrices {
    pub fn xi_kappa(&self) -> &Matrix {
        self.xi.last().expect("at least Ξ^0")
    }

    /// `Γ^l` for `l ∈ 1..=κ`.
    pub fn gamma(&self, l: usize) -> &Matrix {
        &self.gamma[l - 1]
    }
}

fn stack(columns: impl Iterator<Item = Vector>, rows: usize, t: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, t);
    for (i, c) in columns.enumerate() {
        m.set_column(i, &c);
    }
    m
}

pub fn feature_matrices(net: &Network, data: &TrainingSet) -> Result<FeatureMatrices> {
    let tr = traces(net, data)?;
    Ok(features_from_traces(net, &tr))
}

pub(crate) fn features_from_traces(net: &Network, tr: &[ForwardTrace]) -> FeatureMatrices {
    let spec = net.spec();
    let t = tr.len();
    let xi = (0..=spec.kappa)
        .map(|l| stack(tr.iter().map(|f| f.xi[l].clone()), spec.d(l), t))
        .collect();
    let gamma = if spec.skip {
        (1..=spec.kappa)
            .map(|l| stack(tr.iter().map(|f| f.chi[l - 1].clone()), spec.s(l), t))
            .collect()
    } else {
        Vec::new()
    };
    FeatureMatrices { xi, gamma }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbuild::{LayerBank, NetworkSpec, Nonlinearity};

    fn net() -> Network {
        let spec =
            NetworkSpec::new(2, vec![1, 2, 4], vec![4, 4, 4], true, Nonlinearity::Relu).unwrap();
        Network::build(&spec, &LayerBank::random(&spec, 2, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn loss_examples() {
        let n = net();
        let data = TrainingSet::realizable(&n, gaussian_matrix(&mut seeded_rng(1), 4, 3)).unwrap();
        assert_eq!(loss(&n, &data).unwrap(), 0.0);

        // F(0) = 0
        let data = TrainingSet::new(
            Matrix::zeros(4, 1),
            Matrix::from_column_slice(4, 1, &[3.0, 4.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(loss(&n, &data).unwrap(), 12.5);

        let data = TrainingSet::random(4, 5, 3).unwrap();
        let mut naive = 0.0;
        for i in 0..5 {
            let out = n.output(&data.input(i)).unwrap();
            for k in 0..4 {
                naive += 0.5 * (out[k] - data.targets()[(k, i)]).powi(2);
            }
        }
        assert!((loss(&n, &data).unwrap() - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn feature_matrix_columns() {
        let n = net();
        let data = TrainingSet::random(4, 1, 5).unwrap();
        let f = feature_matrices(&n, &data).unwrap();
        let trace = n.forward(&data.input(0)).unwrap();
        assert_eq!(f.xi_kappa().column(0), trace.xi[2].column(0));
        assert_eq!(f.gamma(1).shape(), (8, 1));

        let x = data.input(0);
        let dup = Matrix::from_columns(&[x.clone(), x]);
        let data = TrainingSet::new(dup.clone(), dup).unwrap();
        let f = feature_matrices(&n, &data).unwrap();
        let s = SpectrumSummary::of(f.gamma(2));
        assert!(s.sigma_min <= 1e-12 * s.sigma_max.max(1.0));
        assert!(s.rank <= 1);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(TrainingSet::new(Matrix::zeros(3, 0), Matrix::zeros(3, 0)).is_err());
        assert!(TrainingSet::new(Matrix::zeros(3, 2), Matrix::zeros(3, 1)).is_err());
        let mut y = Matrix::zeros(2, 1);
        y[(0, 0)] = f64::NAN;
        assert!(TrainingSet::new(Matrix::zeros(2, 1), y).is_err());
    }
}
