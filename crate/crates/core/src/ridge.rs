//! Reference ridge regression: closed form, batch gradient descent,
//! prediction and a learning rate that keeps the descent map contractive.
//!
//! ```text
//! w_hat   = (X^T X + lambda I)^{-1} X^T y
//! dw_t    = -X^T y + X^T X w_t + lambda w_t
//! w_{t+1} = w_t - eta dw_t
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::matrix::Matrix;

/// A ridge problem together with the gradient-descent schedule applied to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeProblem {
    /// `n x d` design, one sample per row.
    pub x: Matrix,
    /// `n x 1` targets.
    pub y: Matrix,
    /// `d x 1` query.
    pub u: Matrix,
    pub lambda: f64,
    pub eta: f64,
    pub steps: usize,
    /// `d x 1` starting coefficients.
    pub w0: Matrix,
}

impl RidgeProblem {
    pub fn new(
        x: Matrix,
        y: Matrix,
        u: Matrix,
        lambda: f64,
        eta: f64,
        steps: usize,
        w0: Matrix,
    ) -> Result<Self> {
        let p = Self {
            x,
            y,
            u,
            lambda,
            eta,
            steps,
            w0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero start, `eta` set by [`stable_eta`].
    pub fn with_auto_eta(x: Matrix, y: Matrix, u: Matrix, lambda: f64, steps: usize) -> Result<Self> {
        let d = x.cols();
        let mut p = Self::new(x, y, u, lambda, 1.0, steps, Matrix::zeros(d, 1))?;
        p.eta = stable_eta(&p);
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.x.shape();
        let expect = |m: &Matrix, shape: (usize, usize), name: &str| {
            if m.shape() != shape {
                Err(Error::BadProblem(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )))
            } else {
                Ok(())
            }
        };
        expect(&self.y, (n, 1), "y")?;
        expect(&self.u, (d, 1), "u")?;
        expect(&self.w0, (d, 1), "w0")?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::BadProblem(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::BadProblem(format!("eta must be > 0, got {}", self.eta)));
        }
        for (name, m) in [("X", &self.x), ("y", &self.y), ("u", &self.u), ("w0", &self.w0)] {
            if let Some(v) = m.as_slice().iter().find(|v| !v.is_finite()) {
                return Err(Error::BadProblem(format!("{name} contains {v}")));
            }
        }
        Ok(())
    }

    /// `X^T X + lambda I` and `X^T y`.
    pub fn normal_equations(&self) -> (Matrix, Matrix) {
        let xt = self.x.transpose();
        let mut f = &xt * &self.x;
        for i in 0..self.d() {
            f[(i, i)] += self.lambda;
        }
        (f, &xt * &self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdState {
    pub t: usize,
    pub w: Matrix,
    /// Gradient used for the step that produced `w`; `None` at `t = 0`.
    pub delta: Option<Matrix>,
}

impl GdState {
    pub fn initial(p: &RidgeProblem) -> Self {
        Self {
            t: 0,
            w: p.w0.clone(),
            delta: None,
        }
    }
}

pub fn ridge_closed_form(p: &RidgeProblem) -> Result<Matrix> {
    let (f, b) = p.normal_equations();
    solve_dense(&f, &b)
}

/// `0.5 |y - X w|^2 + 0.5 lambda |w|^2`.
pub fn ridge_cost(p: &RidgeProblem, w: &Matrix) -> f64 {
    let r = &p.y - &(&p.x * w);
    let rr: f64 = r.as_slice().iter().map(|v| v * v).sum();
    let ww: f64 = w.as_slice().iter().map(|v| v * v).sum();
    0.5 * rr + 0.5 * p.lambda * ww
}

/// `-X^T y + X^T X w + lambda w`, the gradient of [`ridge_cost`].
pub fn gradient(p: &RidgeProblem, w: &Matrix) -> Matrix {
    let xt = p.x.transpose();
    let xty = &xt * &p.y;
    let xtxw = &xt * &(&p.x * w);
    &(&xtxw - &xty) + &w.scale(p.lambda)
}

/// One descent step. Does not look at `p.steps`; [`gd_run`] enforces the count.
pub fn gd_step(p: &RidgeProblem, s: &GdState) -> GdState {
    let delta = gradient(p, &s.w);
    let w = &s.w - &delta.scale(p.eta);
    GdState {
        t: s.t + 1,
        w,
        delta: Some(delta),
    }
}

/// Runs `p.steps` steps from `w0`; the trace holds `w_0..w_T`.
pub fn gd_run(p: &RidgeProblem) -> (GdState, Vec<Matrix>) {
    let mut s = GdState::initial(p);
    let mut trace = Vec::with_capacity(p.steps + 1);
    trace.push(s.w.clone());
    for _ in 0..p.steps {
        s = gd_step(p, &s);
        trace.push(s.w.clone());
    }
    (s, trace)
}

/// Largest eigenvalue of `X^T X` by power iteration from a fixed,
/// non-uniform start.
pub fn max_gram_eigenvalue(x: &Matrix) -> f64 {
    let d = x.cols();
    let xt = x.transpose();
    let gram = &xt * x;
    let mut v = Matrix::from_fn(d, 1, |i, _| 1.0 + (i as f64 + 1.0) / (d as f64 + 1.0));
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let gv = &gram * &v;
        let norm = gv.as_slice().iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = gv.scale(1.0 / norm);
        let g_next = &gram * &next;
        let rq = next.dot(&g_next).unwrap();
        let done = (rq - lambda).abs() <= 1e-15 * rq.abs();
        lambda = rq;
        v = next;
        if done {
            break;
        }
    }
    lambda
}

/// `1 / (sigma_max(X)^2 + lambda)`, or 1 when that denominator is zero.
pub fn stable_eta(p: &RidgeProblem) -> f64 {
    let denom = max_gram_eigenvalue(&p.x) + p.lambda;
    if denom > 0.0 {
        1.0 / denom
    } else {
        1.0
    }
}

/// `u^T w`.
pub fn predict(w: &Matrix, u: &Matrix) -> Result<f64> {
    if w.cols() != 1 || u.shape() != w.shape() {
        return Err(Error::DimensionMismatch {
            op: "predict",
            left: w.shape(),
            right: u.shape(),
        });
    }
    w.dot(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::column(v).unwrap()
    }

    fn tiny(lambda: f64, eta: f64) -> RidgeProblem {
        RidgeProblem::new(
            col(&[1.0, 2.0]),
            col(&[1.0, 2.0]),
            col(&[3.0]),
            lambda,
            eta,
            1,
            Matrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_by_hand() {
        let w = ridge_closed_form(&tiny(0.0, 0.1)).unwrap();
        assert!((w.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_identity_design() {
        let y = col(&[0.3, -1.2, 4.0]);
        let p = RidgeProblem::new(
            Matrix::identity(3),
            y.clone(),
            col(&[0.0; 3]),
            0.0,
            1.0,
            0,
            Matrix::zeros(3, 1),
        )
        .unwrap();
        assert!(ridge_closed_form(&p).unwrap().max_abs_diff(&y).unwrap() < 1e-15);
    }

    #[test]
    fn shrinkage_limit() {
        let p = tiny(1e12, 0.1);
        let w = ridge_closed_form(&p).unwrap();
        assert!(w.norm_inf() <= 5.0 / 1e12 * (1.0 + 1e-9));
    }

    #[test]
    fn one_step_by_hand() {
        let p = tiny(1.0, 0.1);
        let s = gd_step(&p, &GdState::initial(&p));
        assert!((s.delta.unwrap().get(0, 0) + 5.0).abs() < 1e-15);
        assert!((s.w.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_and_zero_eta() {
        let p = tiny(1.0, 0.1);
        let w_hat = ridge_closed_form(&p).unwrap();
        let s = gd_step(&p, &GdState { t: 0, w: w_hat.clone(), delta: None });
        assert!(s.delta.unwrap().norm_inf() < 1e-14);

        // eta = 0 bypasses validation on purpose
        let mut frozen = p.clone();
        frozen.eta = 0.0;
        frozen.w0 = col(&[0.7]);
        let s = gd_step(&frozen, &GdState::initial(&frozen));
        assert_eq!(s.w, frozen.w0);
    }

    #[test]
    fn run_lengths() {
        let mut p = tiny(1.0, 0.1);
        p.steps = 0;
        let (s, trace) = gd_run(&p);
        assert_eq!(s.w, p.w0);
        assert_eq!(trace.len(), 1);
        p.steps = 1;
        let (s, _) = gd_run(&p);
        assert_eq!(s.w, gd_step(&p, &GdState::initial(&p)).w);
    }

    #[test]
    fn eta_examples() {
        let mut p = tiny(0.0, 1.0);
        p.x = Matrix::from_rows(&[[2.0]]).unwrap();
        p.y = col(&[1.0]);
        assert!((stable_eta(&p) - 0.25).abs() < 1e-15);

        let p = RidgeProblem::new(
            Matrix::identity(2),
            col(&[1.0, 1.0]),
            col(&[0.0, 0.0]),
            0.0,
            1.0,
            0,
            Matrix::zeros(2, 1),
        )
        .unwrap();
        assert!((stable_eta(&p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predict_cases() {
        assert_eq!(predict(&col(&[1.0]), &col(&[3.0])).unwrap(), 3.0);
        assert_eq!(predict(&col(&[4.0, 5.0]), &col(&[1.0, 0.0])).unwrap(), 4.0);
        assert_eq!(predict(&col(&[4.0, 5.0]), &col(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(predict(&col(&[4.0, 5.0]), &col(&[1.0])).is_err());
    }

    #[test]
    fn rejects_bad_problems() {
        let p = tiny(1.0, 0.1);
        assert!(RidgeProblem::new(p.x.clone(), p.y.clone(), p.u.clone(), -1.0, 0.1, 1, p.w0.clone()).is_err());
        assert!(RidgeProblem::new(p.x.clone(), p.y.clone(), p.u.clone(), 1.0, 0.0, 1, p.w0.clone()).is_err());
        assert!(RidgeProblem::new(p.x.clone(), col(&[1.0]), p.u, 1.0, 0.1, 1, p.w0).is_err());
    }
}
