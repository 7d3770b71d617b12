//! JSON shapes for matrices and filter tensors: nested arrays plus an
//! explicit `shape` field.

use serde::{Deserialize, Serialize};

use crate::convops::FilterTensor;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub shape: [usize; 2],
    pub data: Vec<Vec<f64>>,
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        Self {
            shape: [m.nrows(), m.ncols()],
            data: m
                .row_iter()
                .map(|row| row.iter().copied().collect())
                .collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<Matrix> {
        let [rows, cols] = self.shape;
        if self.data.len() != rows || self.data.iter().any(|row| row.len() != cols) {
            return Err(Error::Dimension(format!(
                "matrix data does not match declared shape [{rows}, {cols}]"
            )));
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| self.data[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    /// `[q_in, q_out, r]`.
    pub shape: [usize; 3],
    pub data: Vec<Vec<Vec<f64>>>,
}

impl From<&FilterTensor> for TensorJson {
    fn from(t: &FilterTensor) -> Self {
        let (q_in, q_out, r) = t.shape();
        Self {
            shape: [q_in, q_out, r],
            data: (0..q_in)
                .map(|c| (0..q_out).map(|o| t.tap(c, o).to_vec()).collect())
                .collect(),
        }
    }
}

impl TensorJson {
    pub fn to_tensor(&self) -> Result<FilterTensor> {
        let [q_in, q_out, r] = self.shape;
        let ok = self.data.len() == q_in
            && self
                .data
                .iter()
                .all(|row| row.len() == q_out && row.iter().all(|tap| tap.len() == r));
        if !ok {
            return Err(Error::Dimension(format!(
                "tensor data does not match declared shape [{q_in}, {q_out}, {r}]"
            )));
        }
        if self.data.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filter tensor"));
        }
        Ok(FilterTensor::from_fn(q_in, q_out, r, |c, o, a| {
            self.data[c][o][a]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_shape_is_checked() {
        let bad = MatrixJson {
            shape: [2, 2],
            data: vec![vec![1.0, 2.0]],
        };
        assert!(bad.to_matrix().is_err());
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let json = MatrixJson::from(&m);
        assert_eq!(json.data[1], vec![4.0, 5.0, 6.0]);
        assert_eq!(json.to_matrix().unwrap(), m);
    }
}
