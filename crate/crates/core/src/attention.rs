//! Linear self-attention (LSA), its bias-extended form (ELSA), multi-head
//! sums and the constructive parameter sets that make ELSA emit a constant,
//! its input, or a product of two embedded matrices.
//!
//! For an `m x n` input `H` and `n x n` weights:
//!
//! ```text
//! LSA(H)  = (H W3) (H W1)^T (H W2)
//! ELSA(H) = (H W3 + B3) (H W1 + B1)^T (H W2 + B2)
//! ```
//!
//! Both are evaluated as `left * ((H W1 + B1)^T (H W2 + B2))`, i.e. the
//! Gram-like middle factor `W1^T H^T H W2` is formed first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_move::MskMovSpec;
use crate::matrix::{BlockSpec, Matrix};

/// Anything that maps an input matrix to an output of the same shape.
pub trait AttentionHead {
    fn forward(&self, h: &Matrix) -> Result<Matrix>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaParams {
    pub w1: Matrix,
    pub w2: Matrix,
    pub w3: Matrix,
}

impl LsaParams {
    pub fn new(w1: Matrix, w2: Matrix, w3: Matrix) -> Self {
        Self { w1, w2, w3 }
    }

    /// All-zero head of width `n`.
    pub fn zero(n: usize) -> Self {
        Self::new(Matrix::zeros(n, n), Matrix::zeros(n, n), Matrix::zeros(n, n))
    }

    pub fn width(&self) -> usize {
        self.w1.rows()
    }

    /// Same head with zero biases for an `m x n` input.
    pub fn to_elsa(&self, rows: usize) -> ElsaParams {
        let n = self.width();
        ElsaParams {
            w1: self.w1.clone(),
            w2: self.w2.clone(),
            w3: self.w3.clone(),
            b1: Matrix::zeros(rows, n),
            b2: Matrix::zeros(rows, n),
            b3: Matrix::zeros(rows, n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElsaParams {
    pub w1: Matrix,
    pub w2: Matrix,
    pub w3: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub b3: Matrix,
}

impl ElsaParams {
    /// All-zero head for an `m x n` input.
    pub fn zero(m: usize, n: usize) -> Self {
        Self {
            w1: Matrix::zeros(n, n),
            w2: Matrix::zeros(n, n),
            w3: Matrix::zeros(n, n),
            b1: Matrix::zeros(m, n),
            b2: Matrix::zeros(m, n),
            b3: Matrix::zeros(m, n),
        }
    }

    /// Input shape `(m, n)` the head is built for.
    pub fn input_shape(&self) -> (usize, usize) {
        self.b1.shape()
    }
}

fn check_weights(h: &Matrix, ws: [&Matrix; 3]) -> Result<()> {
    let n = h.cols();
    for w in ws {
        if w.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                op: "attention weight",
                left: h.shape(),
                right: w.shape(),
            });
        }
    }
    Ok(())
}

/// `(H W3) (W1^T H^T H W2)`.
pub fn lsa_forward(h: &Matrix, p: &LsaParams) -> Result<Matrix> {
    check_weights(h, [&p.w1, &p.w2, &p.w3])?;
    let hw1 = h.matmul(&p.w1)?;
    let hw2 = h.matmul(&p.w2)?;
    let hw3 = h.matmul(&p.w3)?;
    let middle = hw1.transpose().matmul(&hw2)?;
    hw3.matmul(&middle)
}

/// `(H W3 + B3) (H W1 + B1)^T (H W2 + B2)`. With zero biases this is
/// [`lsa_forward`].
pub fn elsa_forward(h: &Matrix, p: &ElsaParams) -> Result<Matrix> {
    check_weights(h, [&p.w1, &p.w2, &p.w3])?;
    for b in [&p.b1, &p.b2, &p.b3] {
        if b.shape() != h.shape() {
            return Err(Error::ShapeMismatch {
                expected: h.shape(),
                got: b.shape(),
            });
        }
    }
    let q1 = h.matmul(&p.w1)?.try_add(&p.b1)?;
    let q2 = h.matmul(&p.w2)?.try_add(&p.b2)?;
    let q3 = h.matmul(&p.w3)?.try_add(&p.b3)?;
    let middle = q1.transpose().matmul(&q2)?;
    q3.matmul(&middle)
}

impl AttentionHead for LsaParams {
    fn forward(&self, h: &Matrix) -> Result<Matrix> {
        lsa_forward(h, self)
    }
}

impl AttentionHead for ElsaParams {
    fn forward(&self, h: &Matrix) -> Result<Matrix> {
        elsa_forward(h, self)
    }
}

/// Plain sum of head outputs, no projection or scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiHead<P> {
    pub heads: Vec<P>,
}

impl<P: AttentionHead> MultiHead<P> {
    pub fn new(heads: Vec<P>) -> Self {
        Self { heads }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn forward(&self, h: &Matrix) -> Result<Matrix> {
        multihead_forward(h, self)
    }
}

/// Sums head outputs in head order.
pub fn multihead_forward<P: AttentionHead>(h: &Matrix, heads: &MultiHead<P>) -> Result<Matrix> {
    let mut iter = heads.heads.iter();
    let first = iter.next().ok_or(Error::EmptyHeads)?;
    let mut acc = first.forward(h)?;
    for head in iter {
        acc = acc.try_add(&head.forward(h)?)?;
    }
    Ok(acc)
}

/// Weights `(W1, W2)` with `W1^T G W2 = MskMov_spec(G)` for a Gram-shaped `G`.
pub fn gram_selectors(spec: &MskMovSpec) -> Result<(Matrix, Matrix)> {
    let (w, v) = spec.selectors()?;
    Ok((w.transpose(), v))
}

/// `[I_k; O]` (`rows x k`).
fn stacked_identity(rows: usize, k: usize) -> Matrix {
    Matrix::from_fn(rows, k, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// `[I_k O]` (`k x cols`).
fn leading_identity(k: usize, cols: usize) -> Matrix {
    Matrix::from_fn(k, cols, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// ELSA parameters whose output is the constant `c` for every input of the
/// given shape. All weights are zero, so the output is `B3 B1^T B2`.
pub fn const_params(c: &Matrix, input_shape: (usize, usize)) -> Result<ElsaParams> {
    let (m, n) = input_shape;
    if c.shape() != input_shape {
        return Err(Error::ShapeMismatch {
            expected: input_shape,
            got: c.shape(),
        });
    }
    let zero = Matrix::zeros(n, n);
    let (b1, b2, b3) = if m > n {
        let e = stacked_identity(m, n);
        (e.clone(), e, c.clone())
    } else if m < n {
        let e = leading_identity(m, n);
        (e.clone(), c.clone(), e)
    } else {
        (Matrix::identity(m), Matrix::identity(m), c.clone())
    };
    Ok(ElsaParams {
        w1: zero.clone(),
        w2: zero.clone(),
        w3: zero,
        b1,
        b2,
        b3,
    })
}

/// ELSA parameters that reproduce the input (a skip connection).
pub fn skip_params(input_shape: (usize, usize)) -> ElsaParams {
    let (m, n) = input_shape;
    let zero_w = Matrix::zeros(n, n);
    let zero_b = Matrix::zeros(m, n);
    if m > n {
        // H W3 B1^T B2 with B1^T B2 = I_n
        let e = stacked_identity(m, n);
        ElsaParams {
            w1: zero_w.clone(),
            w2: zero_w,
            w3: Matrix::identity(n),
            b1: e.clone(),
            b2: e,
            b3: zero_b,
        }
    } else if m < n {
        // B3 B1^T H W2 with B3 B1^T = I_m
        let e = leading_identity(m, n);
        ElsaParams {
            w1: zero_w.clone(),
            w2: Matrix::identity(n),
            w3: zero_w,
            b1: e.clone(),
            b2: zero_b,
            b3: e,
        }
    } else {
        ElsaParams {
            w1: zero_w.clone(),
            w2: zero_w,
            w3: Matrix::identity(m),
            b1: Matrix::identity(m),
            b2: Matrix::identity(m),
            b3: zero_b,
        }
    }
}

/// How `A` (`r x s`) and `B` (`s x t`) are embedded in the input of a
/// product construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatmulLayout {
    /// LSA layout `[[A, O, O], [O, B, I_s]]`, `(r+s) x (2s+t)`.
    LsaStacked { r: usize, s: usize, t: usize },
    /// ELSA layout `[[A^T, B], [O, O]]`, `(s+r) x (r+t)`.
    ElsaTransposed { r: usize, s: usize, t: usize },
    /// ELSA layout `[[A, O], [O, B]]`, `(r+s) x (s+t)`.
    ElsaBlockDiagonal { r: usize, s: usize, t: usize },
}

impl MatmulLayout {
    fn dims(&self) -> (usize, usize, usize) {
        match *self {
            MatmulLayout::LsaStacked { r, s, t }
            | MatmulLayout::ElsaTransposed { r, s, t }
            | MatmulLayout::ElsaBlockDiagonal { r, s, t } => (r, s, t),
        }
    }

    pub fn input_shape(&self) -> (usize, usize) {
        let (r, s, t) = self.dims();
        match self {
            MatmulLayout::LsaStacked { .. } => (r + s, 2 * s + t),
            MatmulLayout::ElsaTransposed { .. } => (s + r, r + t),
            MatmulLayout::ElsaBlockDiagonal { .. } => (r + s, s + t),
        }
    }

    /// Block of the output that holds `A B`.
    pub fn output_block(&self) -> BlockSpec {
        let (r, s, t) = self.dims();
        match self {
            MatmulLayout::LsaStacked { .. } => BlockSpec::new(1, r, 2 * s + 1, 2 * s + t),
            MatmulLayout::ElsaTransposed { .. } => BlockSpec::new(1, r, r + 1, r + t),
            MatmulLayout::ElsaBlockDiagonal { .. } => BlockSpec::new(1, r, s + 1, s + t),
        }
    }

    /// Packs `(A, B)` into the input matrix.
    pub fn pack(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        let (r, s, t) = self.dims();
        if a.shape() != (r, s) {
            return Err(Error::ShapeMismatch {
                expected: (r, s),
                got: a.shape(),
            });
        }
        if b.shape() != (s, t) {
            return Err(Error::ShapeMismatch {
                expected: (s, t),
                got: b.shape(),
            });
        }
        let (m, n) = self.input_shape();
        let mut h = Matrix::zeros(m, n);
        match self {
            MatmulLayout::LsaStacked { .. } => {
                h.set_block_at(1, 1, a)?;
                h.set_block_at(r + 1, s + 1, b)?;
                h.set_block_at(r + 1, s + t + 1, &Matrix::identity(s))?;
            }
            MatmulLayout::ElsaTransposed { .. } => {
                h.set_block_at(1, 1, &a.transpose())?;
                h.set_block_at(1, r + 1, b)?;
            }
            MatmulLayout::ElsaBlockDiagonal { .. } => {
                h.set_block_at(1, 1, a)?;
                h.set_block_at(r + 1, s + 1, b)?;
            }
        }
        Ok(h)
    }
}

/// A product construction: input packer, parameters and output location.
#[derive(Clone, Debug, PartialEq)]
pub struct MatmulConstruction<P> {
    pub layout: MatmulLayout,
    pub params: P,
    pub output_block: BlockSpec,
}

impl<P: AttentionHead> MatmulConstruction<P> {
    /// Packs `(A, B)`, runs the head and reads `A B` back out.
    pub fn multiply(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        let h = self.layout.pack(a, b)?;
        self.params.forward(&h)?.block_read(&self.output_block)
    }
}

fn check_positive(r: usize, s: usize, t: usize) -> Result<()> {
    if r == 0 || s == 0 || t == 0 {
        return Err(Error::SpecOutOfRange(format!(
            "product dimensions must be positive, got r={r}, s={s}, t={t}"
        )));
    }
    Ok(())
}

/// Plain LSA product: `B` is lifted out of `H^T H` through the identity
/// block and multiplied by `A` via `W3`.
pub fn lsa_matmul_params(r: usize, s: usize, t: usize) -> Result<MatmulConstruction<LsaParams>> {
    check_positive(r, s, t)?;
    let layout = MatmulLayout::LsaStacked { r, s, t };
    let n = 2 * s + t;
    // H^T H holds B at rows s+t+1..2s+t, cols s+1..s+t; move it to rows 1..s, cols 2s+1..
    let spec = MskMovSpec::relocate(
        BlockSpec::new(s + t + 1, 2 * s + t, s + 1, s + t),
        (1, 2 * s + 1),
        (n, n),
    );
    let (w1, w2) = gram_selectors(&spec)?;
    let mut w3 = Matrix::zeros(n, n);
    w3.set_block_at(1, 1, &Matrix::identity(s))?;
    Ok(MatmulConstruction {
        layout,
        params: LsaParams::new(w1, w2, w3),
        output_block: layout.output_block(),
    })
}

/// ELSA product on `H = [[A^T, B], [O, O]]`: `H^T H` already contains `A B`,
/// which the selectors keep in place and `B3 = [[I_r, O], [O, O]]` emits.
pub fn matmul_params_v1(r: usize, s: usize, t: usize) -> Result<MatmulConstruction<ElsaParams>> {
    check_positive(r, s, t)?;
    let layout = MatmulLayout::ElsaTransposed { r, s, t };
    let (m, n) = layout.input_shape();
    let spec = MskMovSpec::new(BlockSpec::new(1, r, r + 1, r + t), (n, n), 0, 0);
    let (w1, w2) = gram_selectors(&spec)?;
    let mut b3 = Matrix::zeros(m, n);
    b3.set_block_at(1, 1, &Matrix::identity(r))?;
    Ok(MatmulConstruction {
        layout,
        params: ElsaParams {
            w1,
            w2,
            w3: Matrix::zeros(n, n),
            b1: Matrix::zeros(m, n),
            b2: Matrix::zeros(m, n),
            b3,
        },
        output_block: layout.output_block(),
    })
}

/// ELSA product on the block-diagonal `H = [[A, O], [O, B]]`:
/// `(H W3) B1^T (H W2)` with `W3` moving `A` right, `B1` bridging rows and
/// `W2` isolating `B`.
pub fn matmul_params_v2(r: usize, s: usize, t: usize) -> Result<MatmulConstruction<ElsaParams>> {
    check_positive(r, s, t)?;
    let layout = MatmulLayout::ElsaBlockDiagonal { r, s, t };
    let (m, n) = layout.input_shape();
    let mut w3 = Matrix::zeros(n, n);
    w3.set_block_at(1, t + 1, &Matrix::identity(s))?;
    let mut w2 = Matrix::zeros(n, n);
    w2.set_block_at(s + 1, s + 1, &Matrix::identity(t))?;
    let mut b1 = Matrix::zeros(m, n);
    b1.set_block_at(r + 1, t + 1, &Matrix::identity(s))?;
    Ok(MatmulConstruction {
        layout,
        params: ElsaParams {
            w1: Matrix::zeros(n, n),
            w2,
            w3,
            b1,
            b2: Matrix::zeros(m, n),
            b3: Matrix::zeros(m, n),
        },
        output_block: layout.output_block(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn sample(rows: usize, cols: usize, seed: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 0.731 + seed).sin())
    }

    #[test]
    fn zero_weights_give_zero() {
        let h = sample(3, 4, 0.2);
        assert!(lsa_forward(&h, &LsaParams::zero(4)).unwrap().is_zero());
    }

    #[test]
    fn lsa_transpose_identity() {
        let h = sample(3, 4, 0.1);
        let p = LsaParams::new(sample(4, 4, 1.0), sample(4, 4, 2.0), sample(4, 4, 3.0));
        let lhs = lsa_forward(&h, &p).unwrap().transpose();
        let ht = h.transpose();
        let rhs = &(&(&p.w2.transpose() * &ht) * &(&p.w1.transpose() * &ht).transpose())
            * &(&p.w3.transpose() * &ht);
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn lsa_three_block_product() {
        let c = lsa_matmul_params(1, 2, 1).unwrap();
        let a = m(&[&[1.0, 2.0]]);
        let b = m(&[&[3.0], &[4.0]]);
        let h = c.layout.pack(&a, &b).unwrap();
        assert_eq!(h.shape(), (3, 5));
        let out = lsa_forward(&h, &c.params).unwrap();
        let mut expected = Matrix::zeros(3, 5);
        expected.set(0, 4, 11.0);
        assert_eq!(out, expected);
    }

    #[test]
    fn elsa_with_zero_bias_is_lsa() {
        let h = sample(3, 4, 0.4);
        let p = LsaParams::new(sample(4, 4, 1.5), sample(4, 4, 2.5), sample(4, 4, 3.5));
        assert_eq!(
            elsa_forward(&h, &p.to_elsa(3)).unwrap(),
            lsa_forward(&h, &p).unwrap()
        );
    }

    #[test]
    fn elsa_shape_errors() {
        let h = sample(3, 4, 0.0);
        let mut p = ElsaParams::zero(3, 4);
        p.b2 = Matrix::zeros(4, 4);
        assert!(matches!(elsa_forward(&h, &p), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            lsa_forward(&h, &LsaParams::zero(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_output_all_cases() {
        for (rows, cols) in [(2, 2), (3, 2), (2, 3)] {
            let c = sample(rows, cols, 7.0);
            let p = const_params(&c, (rows, cols)).unwrap();
            let h = sample(rows, cols, -3.0);
            assert_eq!(elsa_forward(&h, &p).unwrap(), c);
        }
        let c = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(
            elsa_forward(&sample(2, 2, 9.0), &const_params(&c, (2, 2)).unwrap()).unwrap(),
            c
        );
        assert!(elsa_forward(&c, &const_params(&Matrix::zeros(2, 2), (2, 2)).unwrap())
            .unwrap()
            .is_zero());
        assert!(const_params(&c, (3, 2)).is_err());
    }

    #[test]
    fn skip_all_cases() {
        let h = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(elsa_forward(&h, &skip_params((2, 2))).unwrap(), h);
        for (rows, cols) in [(3, 2), (2, 3), (1, 5), (5, 1)] {
            let h = sample(rows, cols, 0.3);
            assert_eq!(elsa_forward(&h, &skip_params((rows, cols))).unwrap(), h);
        }
    }

    #[test]
    fn product_v1_example() {
        let c = matmul_params_v1(1, 2, 1).unwrap();
        let h = c.layout.pack(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(h, m(&[&[1.0, 3.0], &[2.0, 4.0], &[0.0, 0.0]]));
        let out = elsa_forward(&h, &c.params).unwrap();
        assert_eq!(out, m(&[&[0.0, 11.0], &[0.0, 0.0], &[0.0, 0.0]]));
    }

    #[test]
    fn product_v1_identity_factor() {
        let c = matmul_params_v1(2, 2, 2).unwrap();
        let b = sample(2, 2, 4.0);
        assert_eq!(c.multiply(&Matrix::identity(2), &b).unwrap(), b);
    }

    #[test]
    fn product_v2_example() {
        let c = matmul_params_v2(1, 2, 1).unwrap();
        let ab = c.multiply(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(ab, m(&[&[11.0]]));
        let h = c.layout.pack(&Matrix::zeros(1, 2), &m(&[&[3.0], &[4.0]])).unwrap();
        assert!(elsa_forward(&h, &c.params).unwrap().is_zero());
    }

    #[test]
    fn multihead_cases() {
        let h = sample(3, 3, 0.9);
        let p = ElsaParams {
            w1: sample(3, 3, 1.0),
            w2: sample(3, 3, 2.0),
            w3: sample(3, 3, 3.0),
            b1: sample(3, 3, 4.0),
            b2: sample(3, 3, 5.0),
            b3: sample(3, 3, 6.0),
        };
        let single = MultiHead::new(vec![p.clone()]);
        assert_eq!(single.forward(&h).unwrap(), elsa_forward(&h, &p).unwrap());

        let mut neg = p.clone();
        neg.w3 = -&neg.w3;
        neg.b3 = -&neg.b3;
        let pair = MultiHead::new(vec![p, neg]);
        assert!(pair.forward(&h).unwrap().is_zero());

        let empty: MultiHead<ElsaParams> = MultiHead::new(vec![]);
        assert_eq!(empty.forward(&h), Err(Error::EmptyHeads));
    }
}
