//! Reference implementations used only by the integration tests. None of
//! them call into the library's numerical routines; inputs and outputs go
//! through plain `Vec`s so a bug in `Matrix` cannot hide on both sides.

#![allow(dead_code)]

use elsa_core::mask_move::MskMovSpec;
use elsa_core::Matrix;

pub type Dense = Vec<Vec<f64>>;

pub fn dense(m: &Matrix) -> Dense {
    m.to_rows()
}

pub fn col(m: &Matrix) -> Vec<f64> {
    m.col_values(0)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Entry-wise copy of `A[i:j, k:l]` to the shifted block, zeros elsewhere.
pub fn copy_loop_mskmov(a: &Dense, spec: &MskMovSpec) -> Dense {
    let rows = a.len();
    let cols = a[0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for r in spec.i..=spec.j {
        for c in spec.k..=spec.l {
            let tr = (r as isize + spec.a) as usize;
            let tc = (c as isize + spec.b) as usize;
            out[tr - 1][tc - 1] = a[r - 1][c - 1];
        }
    }
    out
}

pub fn reference_matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, p) = (b.len(), b[0].len());
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), n);
            (0..p).map(|j| (0..n).map(|k| row[k] * b[k][j]).sum()).collect()
        })
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Piecewise-linear interpolation of `1/x^2` through `x_1..x_n`, flat on
/// `[-x_1, x_1]`, falling to zero at `x_{n+1}`, zero beyond. `grid` is
/// `x_1..x_{n+1}`.
pub fn invsqr_piecewise(grid: &[f64], x: f64) -> f64 {
    let n = grid.len() - 1;
    let y = |k: usize| if k == n { 0.0 } else { 1.0 / (grid[k] * grid[k]) };
    let ax = x.abs();
    if ax <= grid[0] {
        return y(0);
    }
    if ax > grid[n] {
        return 0.0;
    }
    let k = (1..=n).find(|&k| ax <= grid[k]).unwrap();
    let (x0, x1) = (grid[k - 1], grid[k]);
    y(k - 1) + (y(k) - y(k - 1)) * (ax - x0) / (x1 - x0)
}

/// Geometric grid `x_1 r^k`, `k = 0..n`, with the last point pinned to `xmax`.
pub fn geometric_grid(x1: f64, xmax: f64, n: usize) -> Vec<f64> {
    let r = (xmax / x1).powf(1.0 / n as f64);
    let mut g: Vec<f64> = (0..=n).map(|k| x1 * r.powi(k as i32)).collect();
    g[n] = xmax;
    g
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(f: &Dense, b: &[f64]) -> Vec<f64> {
    let m = f.len();
    let mut a: Dense = f.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for k in 0..m {
        let p = (k..m).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        assert!(a[k][k] != 0.0, "singular oracle system");
        for i in k + 1..m {
            let g = a[i][k] / a[k][k];
            for j in k..=m {
                a[i][j] -= g * a[k][j];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][m] - s) / a[i][i];
    }
    x
}

/// The padded state sequence of elimination without row exchanges, by
/// direct row arithmetic: embed, `m-1` forward steps, normalise row `m`,
/// then for `t = m..2` push `xi_t` into the right-hand side and normalise
/// row `t-1`. Consumed diagonal entries are set to zero.
pub fn shadow_elimination(f: &Dense, alpha: &[f64]) -> Vec<Dense> {
    let m = f.len();
    let mut p = vec![vec![0.0; m + 1]; m + 1];
    for i in 0..m {
        p[i][..m].copy_from_slice(&f[i]);
        p[i][m] = alpha[i];
    }
    let mut states = vec![p.clone()];
    for k in 0..m - 1 {
        let inv = 1.0 / p[k][k];
        for i in k + 1..m {
            let g = p[i][k] * inv;
            for j in 0..=m {
                p[i][j] -= g * p[k][j];
            }
        }
        states.push(p.clone());
    }
    let normalise = |p: &mut Dense, r: usize| {
        let inv = 1.0 / p[r][r];
        for j in 0..=m {
            p[r][j] *= inv;
        }
        p[r][r] = 0.0;
    };
    normalise(&mut p, m - 1);
    states.push(p.clone());
    for t in (1..m).rev() {
        let xi = p[t][m];
        for row in p.iter_mut() {
            row[m] -= xi * row[t];
        }
        normalise(&mut p, t - 1);
        states.push(p.clone());
    }
    states
}

/// `w_{t+1} = w_t - eta (X^T X w_t - X^T y + lambda w_t)`, `w_0..w_T`.
pub fn gd_recurrence(x: &Dense, y: &[f64], lambda: f64, eta: f64, w0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let d = w0.len();
    let mut w = w0.to_vec();
    let mut trace = vec![w.clone()];
    for _ in 0..steps {
        let resid: Vec<f64> = x.iter().zip(y).map(|(row, yi)| dot(row, &w) - yi).collect();
        let grad: Vec<f64> = (0..d)
            .map(|j| x.iter().zip(&resid).map(|(row, r)| row[j] * r).sum::<f64>() + lambda * w[j])
            .collect();
        for j in 0..d {
            w[j] -= eta * grad[j];
        }
        trace.push(w.clone());
    }
    trace
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(X^T X + lambda I)^{-1} X^T y` through [`dense_solve`].
pub fn ridge_closed_form(x: &Dense, y: &[f64], lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let xt = transpose(x);
    let mut f = reference_matmul(&xt, x);
    for (i, row) in f.iter_mut().enumerate().take(d) {
        row[i] += lambda;
    }
    let b: Vec<f64> = xt.iter().map(|r| dot(r, y)).collect();
    dense_solve(&f, &b)
}

/// `0.5 |y - X w|^2 + 0.5 lambda |w|^2`.
pub fn ridge_cost(x: &Dense, y: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let rr: f64 = x.iter().zip(y).map(|(row, yi)| (yi - dot(row, w)).powi(2)).sum();
    0.5 * rr + 0.5 * lambda * dot(w, w)
}

/// Central differences of `f` at `w` with per-coordinate step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let step = h * w[i].abs().max(1.0);
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[i] += step;
            minus[i] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_max_eigenvalue(sym: &Dense) -> f64 {
    let n = sym.len();
    let mut a = sym.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}
