//! Monomial block matrices: the normal form of every expression the
//! normalizer accepts.
//!
//! A matrix of dimension `d` acts on `d` copies of the base space. Output
//! component `r` is `chains[r]` applied to input component `col_of_row[r]`,
//! and `col_of_row` is a permutation, so every row and every column holds
//! exactly one entry. Zero entries are chains with the `zero` marker; they
//! keep the factors to their right because those still constrain the domain.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{AtomId, OpExpr, SpaceShape};
use crate::error::{Error, Result};

/// An atom with optional adjoint and inverse markers. With both set the
/// factor is the inverse of the adjoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub atom: AtomId,
    pub adjoint: bool,
    pub inverse: bool,
}

impl Factor {
    pub fn plain(atom: AtomId) -> Self {
        Factor {
            atom,
            adjoint: false,
            inverse: false,
        }
    }

    pub fn named(name: &str) -> Self {
        Factor::plain(AtomId::new(name))
    }

    pub fn is_plain(&self) -> bool {
        !self.adjoint && !self.inverse
    }

    pub fn to_expr(&self) -> OpExpr {
        let mut e = OpExpr::Atom(self.atom.clone());
        if self.adjoint {
            e = e.adjoint();
        }
        if self.inverse {
            e = e.inverse();
        }
        e
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)?;
        if self.adjoint {
            f.write_str("'")?;
        }
        if self.inverse {
            f.write_str("^-1")?;
        }
        Ok(())
    }
}

/// Composition of base-space factors; `factors[0]` is applied last.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chain {
    pub zero: bool,
    pub factors: Vec<Factor>,
}

impl Chain {
    pub fn identity() -> Self {
        Chain::default()
    }

    pub fn zero() -> Self {
        Chain {
            zero: true,
            factors: Vec::new(),
        }
    }

    pub fn of(factors: Vec<Factor>) -> Self {
        Chain {
            zero: false,
            factors,
        }
    }

    pub fn atoms(names: &[&str]) -> Self {
        Chain::of(names.iter().map(|n| Factor::named(n)).collect())
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        !self.zero && self.factors.is_empty()
    }

    /// `self ∘ first`. A zero on the right absorbs everything to its left:
    /// `X ∘ 0 ∘ Y` is defined on all of `dom(Y)` and vanishes there.
    pub fn after(&self, first: &Chain) -> Chain {
        if first.zero {
            return first.clone();
        }
        let mut factors = Vec::with_capacity(self.factors.len() + first.factors.len());
        factors.extend_from_slice(&self.factors);
        factors.extend_from_slice(&first.factors);
        Chain {
            zero: self.zero,
            factors,
        }
    }

    /// Sub-chain of the factors in `range`, without the zero marker.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Chain {
        Chain::of(self.factors[range].to_vec())
    }

    /// Right-nested expression for this chain.
    pub fn to_expr(&self) -> OpExpr {
        let mut iter = self.factors.iter().rev();
        let mut e = match iter.next() {
            Some(last) => last.to_expr(),
            None if self.zero => return OpExpr::Zero(SpaceShape::Base),
            None => return OpExpr::Identity(SpaceShape::Base),
        };
        for factor in iter {
            e = OpExpr::compose(factor.to_expr(), e);
        }
        if self.zero {
            e = OpExpr::compose(OpExpr::Zero(SpaceShape::Base), e);
        }
        e
    }

    /// Compact form used in axiom identifiers, e.g. `A*B`.
    pub fn compact(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if self.zero {
            parts.push("0".into());
        }
        parts.extend(self.factors.iter().map(Factor::to_string));
        if parts.is_empty() {
            "I".into()
        } else {
            parts.join("*")
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.zero {
            parts.push("0".into());
        }
        parts.extend(self.factors.iter().map(Factor::to_string));
        if parts.is_empty() {
            f.write_str("I")
        } else {
            f.write_str(&parts.join(" * "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialMatrix {
    shape: SpaceShape,
    col_of_row: Vec<usize>,
    chains: Vec<Chain>,
}

impl MonomialMatrix {
    pub fn new(shape: SpaceShape, col_of_row: Vec<usize>, chains: Vec<Chain>) -> Result<Self> {
        let dim = shape.dim();
        if col_of_row.len() != dim || chains.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "monomial matrix on {shape} needs {dim} rows"
            )));
        }
        let mut seen = vec![false; dim];
        for &c in &col_of_row {
            if c >= dim || std::mem::replace(&mut seen[c], true) {
                return Err(Error::NonNormalizable(
                    "row-to-column map is not a permutation".into(),
                ));
            }
        }
        Ok(MonomialMatrix {
            shape,
            col_of_row,
            chains,
        })
    }

    pub fn scalar(chain: Chain) -> Self {
        MonomialMatrix {
            shape: SpaceShape::Base,
            col_of_row: vec![0],
            chains: vec![chain],
        }
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let dim = shape.dim();
        MonomialMatrix {
            shape,
            col_of_row: (0..dim).collect(),
            chains: vec![Chain::identity(); dim],
        }
    }

    pub fn zero(shape: SpaceShape) -> Self {
        let dim = shape.dim();
        MonomialMatrix {
            shape,
            col_of_row: (0..dim).collect(),
            chains: vec![Chain::zero(); dim],
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.col_of_row.len()
    }

    pub fn col_of_row(&self) -> &[usize] {
        &self.col_of_row
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn chain(&self, row: usize) -> &Chain {
        &self.chains[row]
    }

    /// The row whose entry reads input component `col`.
    pub fn row_reading(&self, col: usize) -> usize {
        self.col_of_row
            .iter()
            .position(|&c| c == col)
            .expect("col_of_row is a permutation")
    }

    /// Rows in input-column order: entry `c` is the row reading column `c`.
    pub fn rows_by_column(&self) -> Vec<usize> {
        let mut rows = vec![0; self.dim()];
        for (r, &c) in self.col_of_row.iter().enumerate() {
            rows[c] = r;
        }
        rows
    }

    /// The base-space chain when this is a 1×1 matrix.
    pub fn as_scalar(&self) -> Option<&Chain> {
        (self.dim() == 1 && self.shape == SpaceShape::Base).then(|| &self.chains[0])
    }

    /// Formal product `self ∘ first`.
    pub fn compose_blocks(&self, first: &MonomialMatrix) -> Result<MonomialMatrix> {
        if self.shape != first.shape {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply matrices on {} and {}",
                self.shape, first.shape
            )));
        }
        let mut col_of_row = Vec::with_capacity(self.dim());
        let mut chains = Vec::with_capacity(self.dim());
        for (r, &mid) in self.col_of_row.iter().enumerate() {
            col_of_row.push(first.col_of_row[mid]);
            chains.push(self.chains[r].after(&first.chains[mid]));
        }
        Ok(MonomialMatrix {
            shape: self.shape.clone(),
            col_of_row,
            chains,
        })
    }

    /// `self^n` by square-and-multiply; each square is computed once and
    /// reused for every row.
    pub fn expand_power(&self, n: u32) -> Result<MonomialMatrix> {
        if n == 0 {
            return Err(Error::OutOfRange {
                what: "exponent".into(),
                detail: "powers must be positive".into(),
            });
        }
        let mut acc: Option<MonomialMatrix> = None;
        let mut square = self.clone();
        let mut rest = n;
        loop {
            if rest & 1 == 1 {
                acc = Some(match acc {
                    None => square.clone(),
                    Some(a) => a.compose_blocks(&square)?,
                });
            }
            rest >>= 1;
            if rest == 0 {
                break;
            }
            square = square.compose_blocks(&square)?;
        }
        Ok(acc.expect("n >= 1"))
    }

    /// `[upper_left, 0; 0, lower_right]` flattened.
    pub fn block_diag(first: &MonomialMatrix, second: &MonomialMatrix) -> Result<MonomialMatrix> {
        Self::flatten(first, second, false)
    }

    /// `[0, upper; lower, 0]` flattened.
    pub fn block_offdiag(upper: &MonomialMatrix, lower: &MonomialMatrix) -> Result<MonomialMatrix> {
        Self::flatten(upper, lower, true)
    }

    fn flatten(top: &MonomialMatrix, bottom: &MonomialMatrix, cross: bool) -> Result<MonomialMatrix> {
        if top.shape != bottom.shape {
            return Err(Error::ShapeMismatch(format!(
                "block entries act on {} and {}",
                top.shape, bottom.shape
            )));
        }
        let half = top.dim();
        let (top_offset, bottom_offset) = if cross { (half, 0) } else { (0, half) };
        let col_of_row = top
            .col_of_row
            .iter()
            .map(|c| c + top_offset)
            .chain(bottom.col_of_row.iter().map(|c| c + bottom_offset))
            .collect();
        let chains = top.chains.iter().chain(bottom.chains.iter()).cloned().collect();
        Ok(MonomialMatrix {
            shape: SpaceShape::pair(top.shape.clone()),
            col_of_row,
            chains,
        })
    }

    /// Inverse matrix, given how to invert a single chain.
    pub fn invert_with(
        &self,
        mut invert_chain: impl FnMut(&Chain) -> Result<Chain>,
    ) -> Result<MonomialMatrix> {
        let dim = self.dim();
        let mut col_of_row = vec![0; dim];
        let mut chains = vec![Chain::identity(); dim];
        for (r, &c) in self.col_of_row.iter().enumerate() {
            col_of_row[c] = r;
            chains[c] = invert_chain(&self.chains[r])?;
        }
        Ok(MonomialMatrix {
            shape: self.shape.clone(),
            col_of_row,
            chains,
        })
    }

    /// Rebuilds a nested `Block2` expression, when every level is diagonal
    /// or off-diagonal.
    pub fn to_expr(&self) -> Option<OpExpr> {
        self.sub_expr(&self.shape, 0, 0)
    }

    fn sub_expr(&self, shape: &SpaceShape, row0: usize, col0: usize) -> Option<OpExpr> {
        let dim = shape.dim();
        let Some(half_shape) = shape.half() else {
            return (self.col_of_row[row0] == col0).then(|| self.chains[row0].to_expr());
        };
        let half = dim / 2;
        let in_block = |r: usize, c: usize| {
            (row0 + r..row0 + r + half).all(|row| {
                let col = self.col_of_row[row];
                col >= col0 + c && col < col0 + c + half
            })
        };
        if in_block(0, 0) && in_block(half, half) {
            Some(OpExpr::diag(
                self.sub_expr(half_shape, row0, col0)?,
                self.sub_expr(half_shape, row0 + half, col0 + half)?,
                half_shape.clone(),
            ))
        } else if in_block(0, half) && in_block(half, 0) {
            Some(OpExpr::offdiag(
                self.sub_expr(half_shape, row0, col0 + half)?,
                self.sub_expr(half_shape, row0 + half, col0)?,
                half_shape.clone(),
            ))
        } else {
            None
        }
    }
}

impl fmt::Display for MonomialMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (r, (c, chain)) in self.col_of_row.iter().zip(&self.chains).enumerate() {
            if r > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{r}<-{c}: {chain}")?;
        }
        f.write_str("}")
    }
}
