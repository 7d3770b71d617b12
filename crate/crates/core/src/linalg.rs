//! Dense linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};

use crate::rng::{gaussian_matrix, gaussian_vector, seeded_rng};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest absolute entry; zero for empty matrices.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `‖a - c·I‖_max` for a square matrix.
pub fn identity_residual(a: &Matrix, scale: f64) -> f64 {
    assert!(a.is_square(), "identity_residual expects a square matrix");
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let target = if i == j { scale } else { 0.0 };
            worst = worst.max((a[(i, j)] - target).abs());
        }
    }
    worst
}

/// Settings for the power-iteration spectral norm.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
            seed: 0x5e_ed0f_5eed,
        }
    }
}

impl PowerIteration {
    /// Largest singular value of `a`, by power iteration on `aᵀa`.
    pub fn spectral_norm(&self, a: &Matrix) -> f64 {
        if a.nrows() == 0 || a.ncols() == 0 {
            return 0.0;
        }
        let mut rng = seeded_rng(self.seed);
        let mut v = gaussian_vector(&mut rng, a.ncols());
        let n0 = v.norm();
        v /= n0;

        let mut sigma = (a * &v).norm();
        for _ in 0..self.max_iter {
            let w = a.transpose() * (a * &v);
            let wn = w.norm();
            if wn == 0.0 {
                return 0.0;
            }
            v = w / wn;
            let next = (a * &v).norm();
            let converged = (next - sigma).abs() <= self.tol * next.max(f64::MIN_POSITIVE);
            sigma = next;
            if converged {
                break;
            }
        }
        sigma
    }
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    PowerIteration::default().spectral_norm(a)
}

/// Singular values in descending order (`min(rows, cols)` of them).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let svd = a.clone().svd(false, false);
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(a: &Matrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

pub fn sigma_max(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Rank with threshold `max(rows, cols) · ε · σ_max`.
pub fn numerical_rank(a: &Matrix) -> usize {
    let values = singular_values(a);
    let Some(&top) = values.first() else {
        return 0;
    };
    let threshold = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
    values.iter().filter(|&&s| s > threshold).count()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc))
                .copy_from(&(b * aij));
        }
    }
    out
}

/// Column-major vectorization, matching `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn vec_col_major(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Orthogonal `n×n` matrix from the QR factorization of a seeded Gaussian
/// matrix, with column signs fixed so that `R` has a positive diagonal.
pub fn seeded_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let g = gaussian_matrix(&mut rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal Sylvester-Hadamard matrix; `None` unless `n` is a power of two.
pub fn hadamard(n: usize) -> Option<Matrix> {
    if n == 0 || !n.is_power_of_two() {
        return None;
    }
    let mut h = Matrix::from_element(1, 1, 1.0);
    while h.nrows() < n {
        let k = h.nrows();
        let mut next = Matrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    Some(h / (n as f64).sqrt())
}

/// Minimum-norm least-squares solution of `a·θ ≈ b` via SVD.
pub fn least_squares(a: &Matrix, b: &Vector) -> Vector {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let eps = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
    svd.solve(b, eps)
        .expect("SVD was computed with both U and Vᵀ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_svd() {
        let mut rng = seeded_rng(11);
        for (r, c) in [(3, 3), (5, 2), (2, 6), (8, 8)] {
            let a = gaussian_matrix(&mut rng, r, c);
            let svd_top = sigma_max(&a);
            assert!((spectral_norm(&a) - svd_top).abs() < 1e-9 * svd_top);
        }
    }

    #[test]
    fn identity_has_unit_spectral_norm() {
        let i = Matrix::identity(7, 7);
        assert!((spectral_norm(&i) - 1.0).abs() < 1e-14);
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn seeded_orthogonal_is_orthogonal_and_reproducible() {
        let q = seeded_orthogonal(6, 99);
        let gram = q.transpose() * &q;
        assert!(identity_residual(&gram, 1.0) < 1e-13);
        assert_eq!(q, seeded_orthogonal(6, 99));
    }

    #[test]
    fn hadamard_small_cases() {
        let h2 = hadamard(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(max_abs_diff(&h2, &Matrix::from_row_slice(2, 2, &[s, s, s, -s])) < 1e-15);
        assert!(
            identity_residual(
                &(hadamard(8).unwrap().transpose() * hadamard(8).unwrap()),
                1.0
            ) < 1e-14
        );
        assert!(hadamard(6).is_none());
    }

    #[test]
    fn kron_matches_vec_identity() {
        let mut rng = seeded_rng(5);
        let a = gaussian_matrix(&mut rng, 3, 2);
        let x = gaussian_matrix(&mut rng, 2, 4);
        let b = gaussian_matrix(&mut rng, 4, 3);
        let lhs = vec_col_major(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_col_major(&x);
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn rank_of_duplicate_columns() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(numerical_rank(&m), 1);
        assert!(sigma_min(&m) < 1e-12);
    }
}
