//! Gaussian elimination without row exchanges, assembled from network
//! components, masks, skip connections and matrix products.
//!
//! The system `[F | alpha]` is padded with a zero row to a square
//! `(m+1) x (m+1)` state. Forward step `k` (FE_k) eliminates column `k`:
//!
//! ```text
//! Z1 = M_{k,k} * P                      pivot mask
//! Z2 = sigma_invsqr(Z1) at (k,k), sigma_id elsewhere
//! Z3 = -Z1 Z2                           -1/p_kk at (k,k)
//! Z4 = M_{k+1:m, k} * P                 subdiagonal of column k
//! Z5 = Z4 Z3                            -gamma_i in column k
//! Z6 = Z5 + I
//! P' = Z6 P
//! ```
//!
//! Backward substitution first normalises row `m` (BS1_m) and then, for
//! `t = m..2`, pushes `xi_t` into the right-hand side and normalises row
//! `t-1`. The anti-mask clears the consumed diagonal entry. Entries right
//! of the diagonal are left in place; the solution is the last column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invsqr::PiecewiseInvSqr;
use crate::linalg::solve_dense;
use crate::mask_move::{mask_matrix, MaskSpec};
use crate::matrix::{BlockSpec, Matrix};
use crate::netcomp::{
    cell_mask, make_affine_component, mask_component, skip_mul, Activation, NetworkComponent, Side,
};
use crate::ridge::{predict, RidgeProblem};

/// Pivots smaller than this in magnitude stop the solve.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub f: Matrix,
    pub alpha: Matrix,
}

impl LinearSystem {
    pub fn new(f: Matrix, alpha: Matrix) -> Result<Self> {
        let m = f.rows();
        if f.cols() != m {
            return Err(Error::ShapeMismatch {
                expected: (m, m),
                got: f.shape(),
            });
        }
        if m < 2 {
            return Err(Error::BadProblem(format!("system needs m >= 2, got {m}")));
        }
        if alpha.shape() != (m, 1) {
            return Err(Error::ShapeMismatch {
                expected: (m, 1),
                got: alpha.shape(),
            });
        }
        Ok(Self { f, alpha })
    }

    pub fn m(&self) -> usize {
        self.f.rows()
    }

    pub fn residual_inf(&self, x: &Matrix) -> Result<f64> {
        Ok(self.f.matmul(x)?.try_sub(&self.alpha)?.norm_inf())
    }
}

/// How the pivot reciprocal is formed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DivisionMode {
    /// `1/x^2` in closed form; everything else unchanged.
    Exact,
    /// The ReLU-sum approximator.
    Relu(PiecewiseInvSqr),
}

impl DivisionMode {
    fn activation(&self) -> Activation {
        match self {
            DivisionMode::Exact => Activation::ExactInvSqr,
            DivisionMode::Relu(p) => Activation::InvSqr(p.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DivisionMode::Exact => "exact",
            DivisionMode::Relu(_) => "relu",
        }
    }
}

/// Where a state sits in the solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// After FE_1..FE_k; `Forward(0)` is the embedded system.
    Forward(usize),
    /// Rows `t..m` solved.
    Backward(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationState {
    pub p: Matrix,
    pub stage: Stage,
}

impl EliminationState {
    /// Number of unknowns.
    pub fn m(&self) -> usize {
        self.p.rows() - 1
    }

    /// `[F | alpha]` without the pad row.
    pub fn strip_pad(&self) -> Result<Matrix> {
        let m = self.m();
        self.p.block_read(&BlockSpec::new(1, m, 1, m + 1))
    }

    pub fn pad_is_zero(&self) -> bool {
        let m = self.m();
        (0..=m).all(|j| self.p.get(m, j) == 0.0)
    }
}

/// `P_1 = [[F, alpha], [0 ... 0]]`.
pub fn embed_system(sys: &LinearSystem) -> EliminationState {
    let m = sys.m();
    let mut p = Matrix::zeros(m + 1, m + 1);
    p.set_block_at(1, 1, &sys.f).expect("fits");
    p.set_block_at(1, m + 1, &sys.alpha).expect("fits");
    EliminationState {
        p,
        stage: Stage::Forward(0),
    }
}

/// The intermediates of one forward step, kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub z: [Matrix; 6],
    pub out: EliminationState,
}

/// `Z2`: the division activation at `(i, i)`, `sigma_id` everywhere else.
fn reciprocal_square(z1: &Matrix, i: usize, mode: &DivisionMode) -> Result<Matrix> {
    let size = z1.rows();
    let spec = cell_mask(i, i, size, size);
    let at_pivot = NetworkComponent::gated(mask_matrix(&spec)?, mode.activation());
    let elsewhere = NetworkComponent::gated(mask_matrix(&spec.complement())?, Activation::Identity);
    at_pivot.forward(z1)?.try_add(&elsewhere.forward(z1)?)
}

/// Identity except `diag` at `(i, i)`: the `C` of an affine component.
fn identity_without(size: usize, i: usize) -> Matrix {
    let mut c = Matrix::identity(size);
    c.set(i - 1, i - 1, 0.0);
    c
}

fn check_pivot(value: f64, index: usize, tol: f64) -> Result<()> {
    if value.is_finite() && value.abs() >= tol {
        Ok(())
    } else {
        Err(Error::PivotBelowTolerance {
            index,
            pivot: value,
            tolerance: tol,
        })
    }
}

/// FE_k with its intermediates.
pub fn forward_eliminate_traced(
    state: &EliminationState,
    k: usize,
    mode: &DivisionMode,
    tol: f64,
) -> Result<ForwardTrace> {
    let m = state.m();
    let size = m + 1;
    if k == 0 || k >= m || state.stage != Stage::Forward(k - 1) {
        return Err(Error::LayoutMismatch(format!(
            "forward step {k} cannot follow {:?} for m={m}",
            state.stage
        )));
    }
    let p = &state.p;
    check_pivot(p.entry(k, k), k, tol)?;

    let z1 = mask_component(&cell_mask(k, k, size, size))?.forward(p)?;
    let z2 = reciprocal_square(&z1, k, mode)?;
    let z3 = skip_mul(&z2, &z1, Side::Right, -1.0)?;
    let sub = MaskSpec::mask(BlockSpec::new(k + 1, m, k, k), size, size);
    let z4 = mask_component(&sub)?.forward(p)?;
    let z5 = z4.matmul(&z3)?;
    let z6 = make_affine_component(&Matrix::ones(size, size), &Matrix::identity(size))?.forward(&z5)?;
    let next = skip_mul(&z6, p, Side::Left, 1.0)?;
    Ok(ForwardTrace {
        z: [z1, z2, z3, z4, z5, z6],
        out: EliminationState {
            p: next,
            stage: Stage::Forward(k),
        },
    })
}

pub fn forward_eliminate_step(
    state: &EliminationState,
    k: usize,
    mode: &DivisionMode,
    tol: f64,
) -> Result<EliminationState> {
    Ok(forward_eliminate_traced(state, k, mode, tol)?.out)
}

/// BS1_m: `xi_m = q_{m,m+1} / q_{m,m}` written into row `m`.
pub fn backward_substitute_last(
    state: &EliminationState,
    mode: &DivisionMode,
    tol: f64,
) -> Result<EliminationState> {
    let m = state.m();
    let size = m + 1;
    if m < 2 || state.stage != Stage::Forward(m - 1) {
        return Err(Error::LayoutMismatch(format!(
            "backward substitution needs a fully eliminated state, got {:?}",
            state.stage
        )));
    }
    let q = &state.p;
    check_pivot(q.entry(m, m), m, tol)?;

    let z1 = mask_component(&cell_mask(m, m, size, size))?.forward(q)?;
    let z2 = reciprocal_square(&z1, m, mode)?;
    let z3 = skip_mul(&z2, &z1, Side::Right, 1.0)?;
    let z4 = make_affine_component(&Matrix::ones(size, size), &identity_without(size, m))?.forward(&z3)?;
    let scaled = skip_mul(&z4, q, Side::Left, 1.0)?;
    let anti = mask_component(&MaskSpec::anti_mask(BlockSpec::cell(m, m), size, size))?;
    Ok(EliminationState {
        p: anti.forward(&scaled)?,
        stage: Stage::Backward(m),
    })
}

/// General step: from rows `t..m` solved to rows `t-1..m` solved.
pub fn backward_substitute_step(
    state: &EliminationState,
    t: usize,
    mode: &DivisionMode,
    tol: f64,
) -> Result<EliminationState> {
    let m = state.m();
    let size = m + 1;
    if t < 2 || state.stage != Stage::Backward(t) {
        return Err(Error::LayoutMismatch(format!(
            "backward step {t} cannot follow {:?}",
            state.stage
        )));
    }
    let q = &state.p;

    let z1 = mask_component(&cell_mask(t, m + 1, size, size))?.forward(q)?;
    let z2 = make_affine_component(&Matrix::filled(size, size, -1.0), &Matrix::identity(size))?.forward(&z1)?;
    let z3 = skip_mul(&z2, q, Side::Right, 1.0)?;
    check_pivot(z3.entry(t - 1, t - 1), t - 1, tol)?;
    let z4 = mask_component(&cell_mask(t - 1, t - 1, size, size))?.forward(&z3)?;
    let z5 = reciprocal_square(&z4, t - 1, mode)?;
    let z6 = skip_mul(&z5, &z4, Side::Left, 1.0)?;
    let z7 = make_affine_component(&Matrix::ones(size, size), &identity_without(size, t - 1))?.forward(&z6)?;
    let scaled = skip_mul(&z7, &z3, Side::Left, 1.0)?;
    let anti = mask_component(&MaskSpec::anti_mask(BlockSpec::cell(t - 1, t - 1), size, size))?;
    Ok(EliminationState {
        p: anti.forward(&scaled)?,
        stage: Stage::Backward(t - 1),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: String,
    pub m: usize,
    pub residual_inf: f64,
    pub rel_error_vs_oracle: Option<f64>,
    /// Diagonal of the eliminated system, `p_11 .. p_mm`. Backward
    /// substitution divides by the same values.
    pub pivots: Vec<f64>,
    pub flags: Vec<String>,
}

/// Runs the whole pipeline and keeps every state, starting with the
/// embedded system.
pub fn solve_traced(
    sys: &LinearSystem,
    mode: &DivisionMode,
    tol: f64,
) -> Result<(Matrix, SolveReport, Vec<EliminationState>)> {
    let m = sys.m();
    let mut states = vec![embed_system(sys)];
    let mut pivots = Vec::with_capacity(m);
    for k in 1..m {
        let cur = states.last().unwrap();
        pivots.push(cur.p.entry(k, k));
        let next = forward_eliminate_step(cur, k, mode, tol)?;
        states.push(next);
    }
    let cur = states.last().unwrap();
    pivots.push(cur.p.entry(m, m));
    let mut state = backward_substitute_last(cur, mode, tol)?;
    states.push(state.clone());
    for t in (2..=m).rev() {
        state = backward_substitute_step(&state, t, mode, tol)?;
        states.push(state.clone());
    }

    let x = state.p.block_read(&BlockSpec::new(1, m, m + 1, m + 1))?;
    if let Some(bad) = x.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(Error::SingularDetected(format!("solution entry {bad}")));
    }

    let mut flags = Vec::new();
    if let DivisionMode::Relu(approx) = mode {
        let (lo, hi) = (approx.x_min(), approx.x_last());
        for (i, p) in pivots.iter().enumerate() {
            if !(lo..=hi).contains(&p.abs()) {
                flags.push(format!(
                    "pivot {} = {p:e} outside the approximator range [{lo:e}, {hi:e}]",
                    i + 1
                ));
            }
        }
    }
    let oracle = solve_dense(&sys.f, &sys.alpha).ok();
    let rel_error_vs_oracle = oracle.map(|o| {
        let err = x.max_abs_diff(&o).unwrap();
        err / o.norm_inf().max(f64::MIN_POSITIVE)
    });
    let report = SolveReport {
        mode: mode.name().to_string(),
        m,
        residual_inf: sys.residual_inf(&x)?,
        rel_error_vs_oracle,
        pivots,
        flags,
    };
    Ok((x, report, states))
}

pub fn solve(sys: &LinearSystem, mode: &DivisionMode) -> Result<(Matrix, SolveReport)> {
    let (x, report, _) = solve_traced(sys, mode, PIVOT_TOLERANCE)?;
    Ok((x, report))
}

/// Solves the normal equations `(X^T X + lambda I) w = X^T y` through
/// [`solve`] and predicts `u^T w`.
pub fn ridge_via_gauss(p: &RidgeProblem, mode: &DivisionMode) -> Result<(Matrix, f64)> {
    let (f, b) = p.normal_equations();
    let sys = LinearSystem::new(f, b)?;
    let (w, _) = solve(&sys, mode)?;
    let pred = predict(&w, &p.u)?;
    Ok((w, pred))
}
