//! Dense tableau simplex for small linear programs.
//!
//! Solves `max cᵀz` subject to `Az ≤ b`, `z ≥ 0` with `b ≥ 0`, so the slack
//! basis is feasible from the start. Bland's rule prevents cycling.

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpOutcome {
    Optimal(f64),
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-12;

pub fn maximize(a: &Matrix, b: &Vector, c: &Vector) -> LpOutcome {
    let (rows, cols) = a.shape();
    assert_eq!(b.len(), rows, "rhs length");
    assert_eq!(c.len(), cols, "objective length");
    assert!(b.iter().all(|&v| v >= 0.0), "rhs must be nonnegative");

    // tableau: [A | I | b], objective row [-c | 0 | 0]
    let width = cols + rows + 1;
    let mut t = Matrix::zeros(rows + 1, width);
    t.view_mut((0, 0), (rows, cols)).copy_from(a);
    for i in 0..rows {
        t[(i, cols + i)] = 1.0;
        t[(i, width - 1)] = b[i];
    }
    for j in 0..cols {
        t[(rows, j)] = -c[j];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    loop {
        // Bland: lowest-index column with negative reduced cost
        let Some(enter) = (0..width - 1).find(|&j| t[(rows, j)] < -PIVOT_EPS) else {
            return LpOutcome::Optimal(t[(rows, width - 1)]);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let coef = t[(i, enter)];
            if coef > PIVOT_EPS {
                let ratio = t[(i, width - 1)] / coef;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - PIVOT_EPS || (ratio <= lr + PIVOT_EPS && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        let pivot = t[(pr, enter)];
        for j in 0..width {
            t[(pr, j)] /= pivot;
        }
        for i in 0..=rows {
            if i == pr {
                continue;
            }
            let f = t[(i, enter)];
            if f != 0.0 {
                for j in 0..width {
                    t[(i, j)] -= f * t[(pr, j)];
                }
            }
        }
        basis[pr] = enter;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let b = Vector::from_vec(vec![4.0, 12.0, 18.0]);
        let c = Vector::from_vec(vec![3.0, 5.0]);
        match maximize(&a, &b, &c) {
            LpOutcome::Optimal(v) => assert!((v - 36.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_unbounded() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = Vector::from_vec(vec![1.0]);
        let c = Vector::from_vec(vec![0.0, 1.0]);
        assert_eq!(maximize(&a, &b, &c), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // max x + y with x - y ≤ 0, -x + y ≤ 0, x ≤ 1 → 2
        let a = Matrix::from_row_slice(3, 2, &[1.0, -1.0, -1.0, 1.0, 1.0, 0.0]);
        let b = Vector::from_vec(vec![0.0, 0.0, 1.0]);
        let c = Vector::from_vec(vec![1.0, 1.0]);
        match maximize(&a, &b, &c) {
            LpOutcome::Optimal(v) => assert!((v - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
