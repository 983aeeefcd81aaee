//! One-hidden-layer componentwise networks and the combinators used to wire
//! them together.
//!
//! A network component maps an `m x n` matrix `X` to
//!
//! ```text
//! Z = sum_k { V_k * sigma(W_k * X + B_k) + C_k }
//! ```
//!
//! with `*` the Hadamard product and `sigma` applied entrywise. Masks,
//! affine maps and the division activation are all instances of this form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invsqr::{relu, PiecewiseInvSqr};
use crate::mask_move::{mask_matrix, MaskSpec, MskMovSpec};
use crate::matrix::{BlockSpec, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// `relu(x) - relu(-x)`.
    Identity,
    /// ReLU-sum approximation of `1/x^2`.
    InvSqr(PiecewiseInvSqr),
    /// `1/x^2` computed directly; stands in for [`Activation::InvSqr`] when
    /// the approximation is to be taken out of the picture.
    ExactInvSqr,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Identity => relu(x) - relu(-x),
            Activation::InvSqr(p) => p.eval(x),
            Activation::ExactInvSqr => 1.0 / (x * x),
        }
    }
}

/// One `(W_k, V_k, B_k, C_k)` quadruple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTerm {
    pub w: Matrix,
    pub v: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkComponent {
    terms: Vec<ComponentTerm>,
    activation: Activation,
}

impl NetworkComponent {
    pub fn new(terms: Vec<ComponentTerm>, activation: Activation) -> Result<Self> {
        let first = terms.first().ok_or(Error::EmptyHeads)?;
        let shape = first.w.shape();
        for t in &terms {
            for p in [&t.w, &t.v, &t.b, &t.c] {
                if p.shape() != shape {
                    return Err(Error::ShapeMismatch {
                        expected: shape,
                        got: p.shape(),
                    });
                }
            }
        }
        Ok(Self { terms, activation })
    }

    /// `V * sigma(X)` with unit input weights and no biases.
    pub fn gated(v: Matrix, activation: Activation) -> Self {
        let (m, n) = v.shape();
        let term = ComponentTerm {
            w: Matrix::ones(m, n),
            v,
            b: Matrix::zeros(m, n),
            c: Matrix::zeros(m, n),
        };
        Self {
            terms: vec![term],
            activation,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.terms[0].w.shape()
    }

    pub fn terms(&self) -> &[ComponentTerm] {
        &self.terms
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        component_forward(x, self)
    }
}

/// Evaluates the component entrywise. An entry whose output weight `V_k` is
/// zero contributes only `C_k`; the activation is not evaluated there, so an
/// unbounded activation at a gated-off entry cannot leak `0 * inf`.
pub fn component_forward(x: &Matrix, c: &NetworkComponent) -> Result<Matrix> {
    if x.shape() != c.shape() {
        return Err(Error::ShapeMismatch {
            expected: c.shape(),
            got: x.shape(),
        });
    }
    let (m, n) = x.shape();
    let mut z = Matrix::zeros(m, n);
    for t in &c.terms {
        for i in 0..m {
            for j in 0..n {
                let v = t.v.get(i, j);
                let mut acc = z.get(i, j);
                if v != 0.0 {
                    acc += v * c.activation.apply(t.w.get(i, j) * x.get(i, j) + t.b.get(i, j));
                }
                z.set(i, j, acc + t.c.get(i, j));
            }
        }
    }
    Ok(z)
}

/// `gamma * X + C` from the ReLU pair `gamma relu(X) - gamma relu(-X)`.
pub fn make_affine_component(gamma: &Matrix, c: &Matrix) -> Result<NetworkComponent> {
    if gamma.shape() != c.shape() {
        return Err(Error::ShapeMismatch {
            expected: gamma.shape(),
            got: c.shape(),
        });
    }
    let (m, n) = gamma.shape();
    let plus = ComponentTerm {
        w: Matrix::ones(m, n),
        v: gamma.clone(),
        b: Matrix::zeros(m, n),
        c: c.clone(),
    };
    let minus = ComponentTerm {
        w: Matrix::filled(m, n, -1.0),
        v: -gamma,
        b: Matrix::zeros(m, n),
        c: Matrix::zeros(m, n),
    };
    NetworkComponent::new(vec![plus, minus], Activation::Relu)
}

/// `M * X` (or the anti-mask) through the identity activation.
pub fn mask_component(spec: &MaskSpec) -> Result<NetworkComponent> {
    Ok(NetworkComponent::gated(mask_matrix(spec)?, Activation::Identity))
}

/// `P[s,t] = SUM(W_{s,t} * A) + b_{s,t}` for an arbitrary output shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSumMap {
    out_shape: (usize, usize),
    in_shape: (usize, usize),
    /// Row-major over output cells.
    weights: Vec<Matrix>,
    biases: Matrix,
}

impl WeightedSumMap {
    pub fn new(in_shape: (usize, usize), weights: Vec<Matrix>, biases: Matrix) -> Result<Self> {
        let out_shape = biases.shape();
        if weights.len() != out_shape.0 * out_shape.1 {
            return Err(Error::SpecOutOfRange(format!(
                "{} weight matrices for a {out_shape:?} output",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.shape() != in_shape) {
            return Err(Error::ShapeMismatch {
                expected: in_shape,
                got: w.shape(),
            });
        }
        Ok(Self {
            out_shape,
            in_shape,
            weights,
            biases,
        })
    }

    /// Zero weights; every output cell is its bias.
    pub fn constant(in_shape: (usize, usize), biases: Matrix) -> Self {
        let count = biases.rows() * biases.cols();
        Self {
            out_shape: biases.shape(),
            in_shape,
            weights: vec![Matrix::zeros(in_shape.0, in_shape.1); count],
            biases,
        }
    }

    /// Single-cell selectors reproducing a mask-and-move.
    pub fn from_mskmov(spec: &MskMovSpec) -> Result<Self> {
        spec.validate()?;
        let (m, n) = (spec.m, spec.n);
        let mut weights = vec![Matrix::zeros(m, n); m * n];
        let src = spec.source();
        for i in src.row_lo..=src.row_hi {
            for k in src.col_lo..=src.col_hi {
                let s = (i as isize + spec.a) as usize;
                let t = (k as isize + spec.b) as usize;
                weights[(s - 1) * n + (t - 1)].set(i - 1, k - 1, 1.0);
            }
        }
        Self::new((m, n), weights, Matrix::zeros(m, n))
    }

    pub fn weight(&self, s: usize, t: usize) -> &Matrix {
        &self.weights[(s - 1) * self.out_shape.1 + (t - 1)]
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }
}

pub fn weighted_sum_map(a: &Matrix, map: &WeightedSumMap) -> Result<Matrix> {
    if a.shape() != map.in_shape {
        return Err(Error::ShapeMismatch {
            expected: map.in_shape,
            got: a.shape(),
        });
    }
    let (mo, no) = map.out_shape;
    let mut p = Matrix::zeros(mo, no);
    for s in 0..mo {
        for t in 0..no {
            let w = &map.weights[s * no + t];
            let sum: f64 = w.as_slice().iter().zip(a.as_slice()).map(|(w, a)| w * a).sum();
            p.set(s, t, sum + map.biases.get(s, t));
        }
    }
    Ok(p)
}

/// Which side the skipped input sits on in a multiplication-type skip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `gamma M(A) A`.
    Left,
    /// `gamma A M(A)`.
    Right,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 1.0 || gamma == -1.0 {
        Ok(())
    } else {
        Err(Error::SpecOutOfRange(format!("skip gamma must be +1 or -1, got {gamma}")))
    }
}

/// Addition-type skip `M(A) + gamma A`.
pub fn skip_add(module_out: &Matrix, a: &Matrix, gamma: f64) -> Result<Matrix> {
    check_gamma(gamma)?;
    module_out.try_add(&a.scale(gamma))
}

/// Multiplication-type skip `gamma M(A) A` or `gamma A M(A)`.
pub fn skip_mul(module_out: &Matrix, a: &Matrix, side: Side, gamma: f64) -> Result<Matrix> {
    check_gamma(gamma)?;
    let prod = match side {
        Side::Left => module_out.matmul(a)?,
        Side::Right => a.matmul(module_out)?,
    };
    Ok(if gamma == 1.0 { prod } else { prod.scale(gamma) })
}

/// Mask of a single cell `(i, j)` in an `m x n` host.
pub fn cell_mask(i: usize, j: usize, m: usize, n: usize) -> MaskSpec {
    MaskSpec::mask(BlockSpec::cell(i, j), m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 1.37).sin() * 3.0)
    }

    #[test]
    fn affine_identity_and_constant() {
        let x = sample(3, 4);
        let id = make_affine_component(&Matrix::ones(3, 4), &Matrix::zeros(3, 4)).unwrap();
        assert_eq!(id.forward(&x).unwrap(), x);
        let c = sample(3, 4).scale(0.5);
        let konst = make_affine_component(&Matrix::zeros(3, 4), &c).unwrap();
        assert_eq!(konst.forward(&x).unwrap(), c);
    }

    #[test]
    fn affine_negative_inputs() {
        let comp = make_affine_component(&Matrix::ones(1, 1), &Matrix::zeros(1, 1)).unwrap();
        assert_eq!(comp.forward(&Matrix::from_rows(&[[-2.0]]).unwrap()).unwrap().get(0, 0), -2.0);
        let neg = make_affine_component(&Matrix::filled(2, 2, -1.0), &Matrix::identity(2)).unwrap();
        let x = Matrix::from_rows(&[[0.5, -1.0], [2.0, 3.0]]).unwrap();
        assert_eq!(
            neg.forward(&x).unwrap(),
            Matrix::from_rows(&[[0.5, 1.0], [-2.0, -2.0]]).unwrap()
        );
    }

    #[test]
    fn mask_component_is_hadamard() {
        let x = sample(3, 3);
        let spec = MaskSpec::mask(BlockSpec::new(1, 2, 2, 3), 3, 3);
        let z = mask_component(&spec).unwrap().forward(&x).unwrap();
        assert_eq!(z, x.hadamard(&mask_matrix(&spec).unwrap()).unwrap());
    }

    #[test]
    fn gated_off_entries_skip_activation() {
        let comp = NetworkComponent::gated(mask_matrix(&cell_mask(1, 1, 2, 2)).unwrap(), Activation::ExactInvSqr);
        let z = comp.forward(&Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(z, Matrix::from_rows(&[[0.25, 0.0], [0.0, 0.0]]).unwrap());
    }

    #[test]
    fn weighted_sum_cases() {
        let a = sample(2, 3);
        let b = sample(2, 2);
        assert_eq!(weighted_sum_map(&a, &WeightedSumMap::constant((2, 3), b.clone())).unwrap(), b);
        let ones = WeightedSumMap::new((2, 3), vec![Matrix::ones(2, 3); 2], Matrix::zeros(1, 2)).unwrap();
        let total: f64 = a.as_slice().iter().sum();
        let p = weighted_sum_map(&a, &ones).unwrap();
        assert_eq!(p.as_slice(), &[total, total]);
    }

    #[test]
    fn weighted_sum_moves_like_mskmov() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let spec = MskMovSpec::new(BlockSpec::new(1, 1, 1, 2), (2, 3), 1, 1);
        let p = weighted_sum_map(&a, &WeightedSumMap::from_mskmov(&spec).unwrap()).unwrap();
        assert_eq!(p, Matrix::from_rows(&[[0.0, 0.0, 0.0], [0.0, 1.0, 2.0]]).unwrap());
    }

    #[test]
    fn skips() {
        let a = sample(2, 2);
        assert_eq!(skip_add(&Matrix::zeros(2, 2), &a, -1.0).unwrap(), -&a);
        assert_eq!(skip_mul(&Matrix::identity(2), &a, Side::Left, -1.0).unwrap(), -&a);
        assert_eq!(skip_mul(&Matrix::identity(2), &a, Side::Right, 1.0).unwrap(), a);
        assert!(skip_add(&a, &a, 2.0).is_err());
    }

    #[test]
    fn skip_mul_gives_negative_reciprocal() {
        // Z1 = pivot mask of [[4, 1], [2, 3]], Z2 = 1/Z1^2 at the pivot, -Z1 Z2 = -1/4 there
        let p = Matrix::from_rows(&[[4.0, 1.0], [2.0, 3.0]]).unwrap();
        let z1 = mask_component(&cell_mask(1, 1, 2, 2)).unwrap().forward(&p).unwrap();
        let z2 = NetworkComponent::gated(mask_matrix(&cell_mask(1, 1, 2, 2)).unwrap(), Activation::ExactInvSqr)
            .forward(&z1)
            .unwrap();
        let z3 = skip_mul(&z2, &z1, Side::Right, -1.0).unwrap();
        assert_eq!(z3, Matrix::from_rows(&[[-0.25, 0.0], [0.0, 0.0]]).unwrap());
    }
}
