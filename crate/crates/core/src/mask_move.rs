//! Selector matrices, the mask-and-move operator and 0/1 masks.
//!
//! `W_K` copies rows (`(W_K A)[i_k,:] = A[j_k,:]`), `V_J` copies columns
//! (`(A V_J)[:,l_j] = A[:,k_j]`), and `MskMov(A) = W_K A V_J` moves the block
//! `A[i:j, k:l]` by `(a, b)` inside an otherwise zero matrix. All indices are
//! 1-based.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BlockSpec, Matrix};

/// Set of 1-based `(row, col)` positions that carry a 1 in a selector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPairSet {
    pub pairs: Vec<(usize, usize)>,
}

impl IndexPairSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn check_range(&self, size: usize) -> Result<()> {
        for &(r, c) in &self.pairs {
            if r < 1 || r > size || c < 1 || c > size {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    rows: size,
                    cols: size,
                });
            }
        }
        Ok(())
    }

    fn fill(&self, size: usize) -> Matrix {
        let mut w = Matrix::zeros(size, size);
        for &(r, c) in &self.pairs {
            w.set(r - 1, c - 1, 1.0);
        }
        w
    }
}

impl FromIterator<(usize, usize)> for IndexPairSet {
    fn from_iter<T: IntoIterator<Item = (usize, usize)>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Row selector `W_K` (`m x m`). Target rows (first components) must be
/// distinct. An empty set gives the zero matrix.
pub fn selector_w(k_set: &IndexPairSet, m: usize) -> Result<Matrix> {
    k_set.check_range(m)?;
    let mut seen = HashSet::new();
    for &(r, _) in &k_set.pairs {
        if !seen.insert(r) {
            return Err(Error::DuplicateTargetRow(r));
        }
    }
    Ok(k_set.fill(m))
}

/// Column selector `V_J` (`n x n`). Target columns (second components) must
/// be distinct.
pub fn selector_v(j_set: &IndexPairSet, n: usize) -> Result<Matrix> {
    j_set.check_range(n)?;
    let mut seen = HashSet::new();
    for &(_, c) in &j_set.pairs {
        if !seen.insert(c) {
            return Err(Error::DuplicateTargetColumn(c));
        }
    }
    Ok(j_set.fill(n))
}

/// Move `A[i:j, k:l]` of an `m x n` matrix to `[i+a : j+a, k+b : l+b]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MskMovSpec {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub a: isize,
    pub b: isize,
}

impl MskMovSpec {
    pub fn new(block: BlockSpec, shape: (usize, usize), a: isize, b: isize) -> Self {
        Self {
            i: block.row_lo,
            j: block.row_hi,
            k: block.col_lo,
            l: block.col_hi,
            m: shape.0,
            n: shape.1,
            a,
            b,
        }
    }

    /// Move `A[from]` so that its top-left corner lands on `to` (1-based).
    pub fn relocate(from: BlockSpec, to: (usize, usize), shape: (usize, usize)) -> Self {
        let a = to.0 as isize - from.row_lo as isize;
        let b = to.1 as isize - from.col_lo as isize;
        Self::new(from, shape, a, b)
    }

    /// Places the block in the upper-right corner: `a = -(i-1)`, `b = n-l`.
    pub fn upper_right(block: BlockSpec, shape: (usize, usize)) -> Self {
        let a = -(block.row_lo as isize - 1);
        let b = (shape.1 - block.col_hi) as isize;
        Self::new(block, shape, a, b)
    }

    pub fn source(&self) -> BlockSpec {
        BlockSpec::new(self.i, self.j, self.k, self.l)
    }

    pub fn target(&self) -> BlockSpec {
        BlockSpec::new(
            (self.i as isize + self.a) as usize,
            (self.j as isize + self.a) as usize,
            (self.k as isize + self.b) as usize,
            (self.l as isize + self.b) as usize,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j, k, l) = (
            self.i as isize,
            self.j as isize,
            self.k as isize,
            self.l as isize,
        );
        let (m, n) = (self.m as isize, self.n as isize);
        let ok = 1 <= i
            && i <= j
            && j <= m
            && 1 <= k
            && k <= l
            && l <= n
            && 1 <= i + self.a
            && j + self.a <= m
            && 1 <= k + self.b
            && l + self.b <= n;
        if ok {
            Ok(())
        } else {
            Err(Error::SpecOutOfRange(format!("{self:?}")))
        }
    }

    /// `K = {(i'+a, i') : i <= i' <= j}`.
    pub fn row_pairs(&self) -> IndexPairSet {
        (self.i..=self.j)
            .map(|r| (((r as isize) + self.a) as usize, r))
            .collect()
    }

    /// `J = {(k', k'+b) : k <= k' <= l}`.
    pub fn col_pairs(&self) -> IndexPairSet {
        (self.k..=self.l)
            .map(|c| (c, ((c as isize) + self.b) as usize))
            .collect()
    }

    /// The pair `(W_K, V_J)` with `MskMov(A) = W_K A V_J`.
    pub fn selectors(&self) -> Result<(Matrix, Matrix)> {
        self.validate()?;
        Ok((
            selector_w(&self.row_pairs(), self.m)?,
            selector_v(&self.col_pairs(), self.n)?,
        ))
    }
}

/// `MskMov(A) = W A V`, computed through the selector products.
pub fn mskmov(a: &Matrix, spec: &MskMovSpec) -> Result<Matrix> {
    if a.shape() != (spec.m, spec.n) {
        return Err(Error::SpecOutOfRange(format!(
            "spec host shape {:?} does not match matrix {:?}",
            (spec.m, spec.n),
            a.shape()
        )));
    }
    let (w, v) = spec.selectors()?;
    w.matmul(a)?.matmul(&v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// 1 inside the block, 0 elsewhere.
    Mask,
    /// 0 inside the block, 1 elsewhere.
    AntiMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub block: BlockSpec,
    pub rows: usize,
    pub cols: usize,
    pub polarity: Polarity,
}

impl MaskSpec {
    pub fn mask(block: BlockSpec, rows: usize, cols: usize) -> Self {
        Self {
            block,
            rows,
            cols,
            polarity: Polarity::Mask,
        }
    }

    pub fn anti_mask(block: BlockSpec, rows: usize, cols: usize) -> Self {
        Self {
            block,
            rows,
            cols,
            polarity: Polarity::AntiMask,
        }
    }

    /// Same block, opposite polarity.
    pub fn complement(&self) -> Self {
        let polarity = match self.polarity {
            Polarity::Mask => Polarity::AntiMask,
            Polarity::AntiMask => Polarity::Mask,
        };
        Self { polarity, ..*self }
    }
}

/// `M^{m,n}_{i,j,k,l}` or its complement.
pub fn mask_matrix(spec: &MaskSpec) -> Result<Matrix> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::SpecOutOfRange("empty host shape".into()));
    }
    spec.block
        .validate(spec.rows, spec.cols)
        .map_err(|_| Error::SpecOutOfRange(format!("{spec:?}")))?;
    let (inside, outside) = match spec.polarity {
        Polarity::Mask => (1.0, 0.0),
        Polarity::AntiMask => (0.0, 1.0),
    };
    Ok(Matrix::from_fn(spec.rows, spec.cols, |s, t| {
        if spec.block.contains(s + 1, t + 1) {
            inside
        } else {
            outside
        }
    }))
}
