//! Operator expressions, the nested direct-sum spaces they act on, and
//! atom declarations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest nesting depth of a [`SpaceShape`].
pub const MAX_SHAPE_DEPTH: usize = 16;

/// A space built from copies of the base Hilbert space by repeated doubling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpaceShape {
    Base,
    Pair(Arc<SpaceShape>, Arc<SpaceShape>),
}

impl SpaceShape {
    /// The balanced shape with `2^depth` base components.
    pub fn balanced(depth: usize) -> SpaceShape {
        let mut shape = SpaceShape::Base;
        for _ in 0..depth {
            shape = SpaceShape::pair(shape);
        }
        shape
    }

    /// `Pair(half, half)`.
    pub fn pair(half: SpaceShape) -> SpaceShape {
        let half = Arc::new(half);
        SpaceShape::Pair(half.clone(), half)
    }

    pub fn depth(&self) -> usize {
        match self {
            SpaceShape::Base => 0,
            SpaceShape::Pair(left, right) => 1 + left.depth().max(right.depth()),
        }
    }

    /// Number of base components, `2^depth` for balanced shapes.
    pub fn dim(&self) -> usize {
        match self {
            SpaceShape::Base => 1,
            SpaceShape::Pair(left, right) => left.dim() + right.dim(),
        }
    }

    pub fn half(&self) -> Option<&SpaceShape> {
        match self {
            SpaceShape::Base => None,
            SpaceShape::Pair(left, _) => Some(left),
        }
    }
}

impl fmt::Display for SpaceShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceShape::Base => write!(f, "H"),
            SpaceShape::Pair(left, right) => write!(f, "({left} + {right})"),
        }
    }
}

/// Name of a declared (or implicitly referenced) atomic operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(Arc<str>);

impl AtomId {
    pub fn new(name: &str) -> Self {
        AtomId(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AtomId {
    fn from(name: &str) -> Self {
        AtomId::new(name)
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct AtomFlags: u16 {
        const SELF_ADJOINT = 1 << 0;
        const POSITIVE = 1 << 1;
        const INJECTIVE = 1 << 2;
        const BOUNDED = 1 << 3;
        const EVERYWHERE_DEFINED = 1 << 4;
        const DENSELY_DEFINED = 1 << 5;
        const CLOSED = 1 << 6;
        const UNBOUNDED = 1 << 7;
    }
}

const FLAG_NAMES: [(&str, AtomFlags); 8] = [
    ("self_adjoint", AtomFlags::SELF_ADJOINT),
    ("positive", AtomFlags::POSITIVE),
    ("injective", AtomFlags::INJECTIVE),
    ("bounded", AtomFlags::BOUNDED),
    ("everywhere_defined", AtomFlags::EVERYWHERE_DEFINED),
    ("densely_defined", AtomFlags::DENSELY_DEFINED),
    ("closed", AtomFlags::CLOSED),
    ("unbounded", AtomFlags::UNBOUNDED),
];

impl AtomFlags {
    pub fn from_keyword(name: &str) -> Option<AtomFlags> {
        FLAG_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, flag)| *flag)
    }

    pub fn names(self) -> Vec<&'static str> {
        FLAG_NAMES
            .iter()
            .filter(|(_, flag)| self.contains(*flag))
            .map(|(n, _)| *n)
            .collect()
    }

    /// Adds every flag implied by the ones already present.
    pub fn closure(self) -> AtomFlags {
        let mut flags = self;
        if flags.contains(AtomFlags::SELF_ADJOINT) {
            flags |= AtomFlags::CLOSED | AtomFlags::DENSELY_DEFINED;
        }
        if flags.contains(AtomFlags::EVERYWHERE_DEFINED) {
            flags |= AtomFlags::DENSELY_DEFINED;
        }
        if flags.contains(AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED) {
            flags |= AtomFlags::CLOSED;
        }
        flags
    }
}

/// Declaration of an atomic operator.
///
/// `flags` are asserted properties; `excluded` are properties the declaration
/// explicitly denies. A declaration is inconsistent when an implied flag is
/// excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomDecl {
    pub id: AtomId,
    pub flags: AtomFlags,
    pub excluded: AtomFlags,
    pub inverse_of: Option<AtomId>,
    pub adjoint_of: Option<AtomId>,
    pub shape: SpaceShape,
}

impl AtomDecl {
    pub fn new(id: &str, flags: AtomFlags) -> Self {
        AtomDecl {
            id: AtomId::new(id),
            flags,
            excluded: AtomFlags::empty(),
            inverse_of: None,
            adjoint_of: None,
            shape: SpaceShape::Base,
        }
    }

    pub fn excluding(mut self, excluded: AtomFlags) -> Self {
        self.excluded = excluded;
        self
    }

    pub fn inverse_of(mut self, other: &str) -> Self {
        self.inverse_of = Some(AtomId::new(other));
        self
    }

    pub fn adjoint_of(mut self, other: &str) -> Self {
        self.adjoint_of = Some(AtomId::new(other));
        self
    }

    /// Flags after applying the implication closure.
    pub fn effective_flags(&self) -> AtomFlags {
        self.flags.closure()
    }

    fn check_flags(&self) -> Result<()> {
        let inconsistent = |reason: &str| Error::InconsistentFlags {
            id: self.id.to_string(),
            reason: reason.to_string(),
        };
        let flags = self.effective_flags();
        if flags.contains(AtomFlags::BOUNDED | AtomFlags::UNBOUNDED) {
            return Err(inconsistent("bounded and unbounded"));
        }
        let clash = flags & self.excluded;
        if !clash.is_empty() {
            return Err(inconsistent(&format!(
                "implied flags excluded: {}",
                clash.names().join(", ")
            )));
        }
        if self.inverse_of.is_some() && !flags.contains(AtomFlags::INJECTIVE) {
            return Err(inconsistent("inverse-linked atom must be injective"));
        }
        if self.shape.depth() > MAX_SHAPE_DEPTH {
            return Err(inconsistent("shape too deep"));
        }
        Ok(())
    }
}

/// Registry of atom declarations. Undeclared atoms are flagless base-space
/// operators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomTable {
    decls: BTreeMap<AtomId, AtomDecl>,
}

impl AtomTable {
    pub fn declare_atom(&mut self, decl: AtomDecl) -> Result<AtomId> {
        if self.decls.contains_key(&decl.id) {
            return Err(Error::DuplicateId(decl.id.to_string()));
        }
        decl.check_flags()?;
        for link in [&decl.inverse_of, &decl.adjoint_of].into_iter().flatten() {
            if let Some(other) = self.decls.get(link) {
                if other.shape != decl.shape {
                    return Err(Error::ShapeMismatch(format!(
                        "linked atoms `{}` and `{}` act on different spaces",
                        decl.id, other.id
                    )));
                }
            }
        }
        if let Some(target) = decl.inverse_of.as_ref().and_then(|t| self.decls.get(t)) {
            if !target.effective_flags().contains(AtomFlags::INJECTIVE) {
                return Err(Error::InconsistentFlags {
                    id: target.id.to_string(),
                    reason: "inverse-linked atom must be injective".into(),
                });
            }
        }
        let id = decl.id.clone();
        self.decls.insert(id.clone(), decl);
        Ok(id)
    }

    pub fn get(&self, id: &AtomId) -> Option<&AtomDecl> {
        self.decls.get(id)
    }

    pub fn flags(&self, id: &AtomId) -> AtomFlags {
        self.decls
            .get(id)
            .map(AtomDecl::effective_flags)
            .unwrap_or_default()
    }

    pub fn has(&self, id: &AtomId, flags: AtomFlags) -> bool {
        self.flags(id).contains(flags)
    }

    pub fn shape(&self, id: &AtomId) -> SpaceShape {
        self.decls
            .get(id)
            .map(|d| d.shape.clone())
            .unwrap_or(SpaceShape::Base)
    }

    /// The atom linked to `id` as its inverse, in either direction.
    pub fn inverse_partner(&self, id: &AtomId) -> Option<AtomId> {
        if let Some(target) = self.decls.get(id).and_then(|d| d.inverse_of.clone()) {
            return Some(target);
        }
        self.decls
            .values()
            .find(|d| d.inverse_of.as_ref() == Some(id))
            .map(|d| d.id.clone())
    }

    /// The atom linked to `id` as its adjoint, in either direction.
    pub fn adjoint_partner(&self, id: &AtomId) -> Option<AtomId> {
        if let Some(target) = self.decls.get(id).and_then(|d| d.adjoint_of.clone()) {
            return Some(target);
        }
        self.decls
            .values()
            .find(|d| d.adjoint_of.as_ref() == Some(id))
            .map(|d| d.id.clone())
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AtomDecl> {
        self.decls.values()
    }
}

/// Operator expression. `Compose(after, first)` applies `first`, then `after`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpExpr {
    Atom(AtomId),
    Identity(SpaceShape),
    Zero(SpaceShape),
    Adjoint(Box<OpExpr>),
    Inverse(Box<OpExpr>),
    Compose(Box<OpExpr>, Box<OpExpr>),
    Block2(Box<[OpExpr; 4]>),
    Power(Box<OpExpr>, u32),
}

impl OpExpr {
    pub fn atom(id: &str) -> OpExpr {
        OpExpr::Atom(AtomId::new(id))
    }

    pub fn adjoint(self) -> OpExpr {
        OpExpr::Adjoint(Box::new(self))
    }

    pub fn inverse(self) -> OpExpr {
        OpExpr::Inverse(Box::new(self))
    }

    /// `after ∘ first`.
    pub fn compose(after: OpExpr, first: OpExpr) -> OpExpr {
        OpExpr::Compose(Box::new(after), Box::new(first))
    }

    pub fn block(e11: OpExpr, e12: OpExpr, e21: OpExpr, e22: OpExpr) -> OpExpr {
        OpExpr::Block2(Box::new([e11, e12, e21, e22]))
    }

    /// `[0, upper; lower, 0]` with zeros on `half`.
    pub fn offdiag(upper: OpExpr, lower: OpExpr, half: SpaceShape) -> OpExpr {
        OpExpr::block(OpExpr::Zero(half.clone()), upper, lower, OpExpr::Zero(half))
    }

    /// `[first, 0; 0, second]` with zeros on `half`.
    pub fn diag(first: OpExpr, second: OpExpr, half: SpaceShape) -> OpExpr {
        OpExpr::block(first, OpExpr::Zero(half.clone()), OpExpr::Zero(half), second)
    }

    /// The component swap `[0, I; I, 0]` on `Pair(half, half)`.
    pub fn swap(half: SpaceShape) -> OpExpr {
        OpExpr::block(
            OpExpr::Zero(half.clone()),
            OpExpr::Identity(half.clone()),
            OpExpr::Identity(half.clone()),
            OpExpr::Zero(half),
        )
    }

    /// `self^n`; exponent one yields `self` unchanged, zero is rejected.
    pub fn power(self, n: u32) -> Result<OpExpr> {
        match n {
            0 => Err(Error::OutOfRange {
                what: "exponent".into(),
                detail: "powers must be positive".into(),
            }),
            1 => Ok(self),
            _ => Ok(OpExpr::Power(Box::new(self), n)),
        }
    }

    /// The unique space this expression acts on.
    pub fn shape_of(&self, atoms: &AtomTable) -> Result<SpaceShape> {
        match self {
            OpExpr::Atom(id) => Ok(atoms.shape(id)),
            OpExpr::Identity(shape) | OpExpr::Zero(shape) => Ok(shape.clone()),
            OpExpr::Adjoint(e) | OpExpr::Inverse(e) | OpExpr::Power(e, _) => e.shape_of(atoms),
            OpExpr::Compose(after, first) => {
                let left = after.shape_of(atoms)?;
                let right = first.shape_of(atoms)?;
                if left != right {
                    return Err(Error::ShapeMismatch(format!(
                        "cannot compose `{}` on {left} with `{}` on {right}",
                        after.pretty_print(),
                        first.pretty_print()
                    )));
                }
                Ok(left)
            }
            OpExpr::Block2(entries) => {
                let shape = entries[0].shape_of(atoms)?;
                for entry in entries.iter().skip(1) {
                    let other = entry.shape_of(atoms)?;
                    if other != shape {
                        return Err(Error::ShapeMismatch(format!(
                            "block entries act on {shape} and {other}"
                        )));
                    }
                }
                if shape.depth() >= MAX_SHAPE_DEPTH {
                    return Err(Error::ShapeMismatch("block nesting too deep".into()));
                }
                Ok(SpaceShape::pair(shape))
            }
        }
    }

    /// Replaces every `Power` node by a balanced square-and-multiply tree of
    /// `Compose` nodes.
    pub fn desugar_powers(&self) -> OpExpr {
        match self {
            OpExpr::Atom(_) | OpExpr::Identity(_) | OpExpr::Zero(_) => self.clone(),
            OpExpr::Adjoint(e) => e.desugar_powers().adjoint(),
            OpExpr::Inverse(e) => e.desugar_powers().inverse(),
            OpExpr::Compose(a, b) => OpExpr::compose(a.desugar_powers(), b.desugar_powers()),
            OpExpr::Block2(entries) => {
                let [a, b, c, d] = entries.as_ref();
                OpExpr::block(
                    a.desugar_powers(),
                    b.desugar_powers(),
                    c.desugar_powers(),
                    d.desugar_powers(),
                )
            }
            OpExpr::Power(e, n) => balanced_power(&e.desugar_powers(), *n),
        }
    }

    pub fn pretty_print(&self) -> String {
        let mut out = String::new();
        self.write_expr(&mut out);
        out
    }

    fn write_expr(&self, out: &mut String) {
        match self {
            OpExpr::Compose(after, first) => {
                after.write_expr(out);
                out.push_str(" * ");
                first.write_factor(out);
            }
            _ => self.write_factor(out),
        }
    }

    fn write_factor(&self, out: &mut String) {
        match self {
            OpExpr::Atom(id) => out.push_str(id.as_str()),
            OpExpr::Identity(shape) => write_unit(out, "I", shape),
            OpExpr::Zero(shape) => write_unit(out, "0", shape),
            OpExpr::Adjoint(e) => {
                e.write_factor(out);
                out.push('\'');
            }
            OpExpr::Inverse(e) => {
                e.write_factor(out);
                out.push_str("^-1");
            }
            OpExpr::Power(e, n) => {
                e.write_factor(out);
                out.push('^');
                out.push_str(&n.to_string());
            }
            OpExpr::Block2(entries) => {
                let [a, b, c, d] = entries.as_ref();
                out.push('[');
                a.write_expr(out);
                out.push_str(", ");
                b.write_expr(out);
                out.push_str("; ");
                c.write_expr(out);
                out.push_str(", ");
                d.write_expr(out);
                out.push(']');
            }
            OpExpr::Compose(..) => {
                out.push('(');
                self.write_expr(out);
                out.push(')');
            }
        }
    }
}

fn write_unit(out: &mut String, symbol: &str, shape: &SpaceShape) {
    out.push_str(symbol);
    if *shape != SpaceShape::Base {
        out.push('@');
        out.push_str(&shape.depth().to_string());
    }
}

fn balanced_power(base: &OpExpr, n: u32) -> OpExpr {
    debug_assert!(n >= 1);
    if n == 1 {
        return base.clone();
    }
    let half = balanced_power(base, n / 2);
    let square = OpExpr::compose(half.clone(), half);
    if n % 2 == 1 {
        OpExpr::compose(square, base.clone())
    } else {
        square
    }
}

impl fmt::Display for OpExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty_print())
    }
}
