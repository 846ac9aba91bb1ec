//! Minimal dense linear algebra: row-major matrices with the handful of
//! operations the recurrent network and the statistics code need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out += self * x
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x.iter()) {
                acc += w * xi;
            }
            out[r] += acc;
        }
    }

    /// out += self^T * x
    pub fn matvec_t_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += w * xr;
            }
        }
    }

    /// self += a * b^T (outer product accumulate); a has `rows` entries, b has `cols`.
    pub fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for r in 0..self.rows {
            let ar = a[r];
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, bc) in row.iter_mut().zip(b.iter()) {
                *w += ar * bc;
            }
        }
    }
}

/// Solve A x = b for symmetric positive-definite-ish A by Gaussian
/// elimination with partial pivoting. A and b are consumed.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ShapeMismatch {
                context: "solve: matrix row",
                expected: n,
                actual: a[i].len(),
            });
        }
    }
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular matrix in solve"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors as columns).
pub fn sym_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i][i]).collect();
    (eig, v)
}

/// Symmetric square root: eigenvalues floored at zero before the sqrt.
pub fn sym_sqrt(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let (eig, v) = sym_eigen(a);
    let mut out = vec![vec![0.0; n]; n];
    for (k, &lam) in eig.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += s * v[i][k] * v[j][k];
            }
        }
    }
    out
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_against_hand_result() {
        let m = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let mut out = vec![0.0; 3];
        m.matvec_acc(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-1.0, -1.0, -1.0]);

        let mut out_t = vec![0.0; 2];
        m.matvec_t_acc(&[1.0, 1.0, 1.0], &mut out_t);
        assert_eq!(out_t, vec![9.0, 12.0]);
    }

    #[test]
    fn outer_acc_matches_definition() {
        let mut m = Mat::zeros(2, 3);
        m.outer_acc(&[2.0, -1.0], &[1.0, 0.0, 3.0]);
        assert_eq!(m.data, vec![2.0, 0.0, 6.0, -1.0, 0.0, -3.0]);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x_true = [1.0, -2.0];
        let b = vec![4.0 * 1.0 + 1.0 * -2.0, 1.0 * 1.0 + 3.0 * -2.0];
        let x = solve(a, b).unwrap();
        assert!((x[0] - x_true[0]).abs() < 1e-12);
        assert!((x[1] - x_true[1]).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(a, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = vec![
            vec![2.0, 0.5, 0.1],
            vec![0.5, 1.0, -0.3],
            vec![0.1, -0.3, 3.0],
        ];
        let (eig, v) = sym_eigen(&a);
        // A == V diag(eig) V^T
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += v[i][k] * eig[k] * v[j][k];
                }
                assert!((acc - a[i][j]).abs() < 1e-10, "mismatch at ({i},{j})");
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let a = vec![
            vec![2.0, 0.5, 0.0],
            vec![0.5, 1.5, 0.2],
            vec![0.0, 0.2, 1.0],
        ];
        let s = sym_sqrt(&a);
        let ss = mat_mul(&s, &s);
        for i in 0..3 {
            for j in 0..3 {
                assert!((ss[i][j] - a[i][j]).abs() < 1e-10);
            }
        }
    }
}
