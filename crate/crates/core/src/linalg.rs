//! Partial-pivot dense solver used by the ridge closed form and as the
//! reference for the component-built elimination.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative pivot threshold below which a system is reported singular.
pub const SINGULAR_RTOL: f64 = 1e-13;

/// Solves `F x = b` by Gaussian elimination with partial (row) pivoting.
/// `b` may have several columns.
pub fn solve_dense(f: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = f.rows();
    if f.cols() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            got: f.shape(),
        });
    }
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "solve_dense",
            left: f.shape(),
            right: b.shape(),
        });
    }
    let k = b.cols();
    let mut a = f.to_rows();
    let mut x = b.to_rows();
    let scale = f.norm_inf().max(f64::MIN_POSITIVE);

    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= SINGULAR_RTOL * scale {
            return Err(Error::SingularSystem {
                col: col + 1,
                pivot: a[piv][col],
            });
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for i in col + 1..n {
            let factor = a[i][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[i][j] -= factor * a[col][j];
            }
            for j in 0..k {
                x[i][j] -= factor * x[col][j];
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..k {
            let mut acc = x[col][j];
            for c in col + 1..n {
                acc -= a[col][c] * x[c][j];
            }
            x[col][j] = acc / a[col][col];
        }
    }
    Matrix::from_rows(&x)
}
