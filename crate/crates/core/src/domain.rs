//! Symbolic descriptions of subspaces and the verdict lattice.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::SpaceShape;
use crate::monomial::{Chain, Factor};

/// A symbolic subset of a (possibly compound) space. Chains inside
/// `Range`, `Kernel` and `Preimage` act on the base space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainSet {
    Whole(SpaceShape),
    Trivial(SpaceShape),
    DomAtom(Factor),
    Range(Chain),
    Kernel(Chain),
    /// `{x ∈ dom(e) : e x ∈ S}`.
    Preimage(Chain, Box<DomainSet>),
    Intersect(Box<DomainSet>, Box<DomainSet>),
    DirectSum(Box<DomainSet>, Box<DomainSet>),
}

impl DomainSet {
    pub fn whole() -> Self {
        DomainSet::Whole(SpaceShape::Base)
    }

    pub fn trivial() -> Self {
        DomainSet::Trivial(SpaceShape::Base)
    }

    pub fn intersect(a: DomainSet, b: DomainSet) -> Self {
        DomainSet::Intersect(Box::new(a), Box::new(b))
    }

    pub fn direct_sum(a: DomainSet, b: DomainSet) -> Self {
        DomainSet::DirectSum(Box::new(a), Box::new(b))
    }

    pub fn preimage(e: Chain, s: DomainSet) -> Self {
        DomainSet::Preimage(e, Box::new(s))
    }

    /// Balanced direct sum of per-component sets; `parts.len()` must be a
    /// power of two.
    pub fn direct_sum_of(parts: &[DomainSet]) -> Self {
        debug_assert!(parts.len().is_power_of_two());
        if parts.len() == 1 {
            return parts[0].clone();
        }
        let (left, right) = parts.split_at(parts.len() / 2);
        DomainSet::direct_sum(Self::direct_sum_of(left), Self::direct_sum_of(right))
    }

    pub fn shape(&self) -> SpaceShape {
        match self {
            DomainSet::Whole(s) | DomainSet::Trivial(s) => s.clone(),
            DomainSet::DirectSum(a, _) => SpaceShape::pair(a.shape()),
            DomainSet::Intersect(a, _) => a.shape(),
            _ => SpaceShape::Base,
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, DomainSet::Trivial(_))
    }

    pub fn is_whole(&self) -> bool {
        matches!(self, DomainSet::Whole(_))
    }
}

fn shape_suffix(f: &mut fmt::Formatter<'_>, shape: &SpaceShape) -> fmt::Result {
    if *shape != SpaceShape::Base {
        write!(f, "@{}", shape.depth())?;
    }
    Ok(())
}

impl fmt::Display for DomainSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSet::Whole(s) => {
                f.write_str("whole")?;
                shape_suffix(f, s)
            }
            DomainSet::Trivial(s) => {
                f.write_str("{0}")?;
                shape_suffix(f, s)
            }
            DomainSet::DomAtom(a) => write!(f, "dom({a})"),
            DomainSet::Range(e) => write!(f, "ran({e})"),
            DomainSet::Kernel(e) => write!(f, "ker({e})"),
            DomainSet::Preimage(e, s) => write!(f, "pre({e}, {s})"),
            DomainSet::Intersect(a, b) => write!(f, "({a} & {b})"),
            DomainSet::DirectSum(a, b) => write!(f, "({a} (+) {b})"),
        }
    }
}

/// Verdict lattice: `Unknown` below everything, `Dense` above `NonTrivial`,
/// `Trivial` incomparable with both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Trivial,
    NonTrivial,
    Dense,
    Unknown,
}

impl Verdict {
    /// Position in a total preorder used to pick the most specific answer.
    pub fn specificity(self) -> u8 {
        match self {
            Verdict::Unknown => 0,
            Verdict::NonTrivial => 1,
            Verdict::Dense | Verdict::Trivial => 2,
        }
    }

    pub fn is_definite(self) -> bool {
        self != Verdict::Unknown
    }

    /// Whether the set is known to contain a nonzero vector.
    pub fn is_nontrivial(self) -> bool {
        matches!(self, Verdict::NonTrivial | Verdict::Dense)
    }

    /// Whether knowing `self` establishes `claim`.
    pub fn entails(self, claim: Verdict) -> bool {
        self == claim
            || claim == Verdict::Unknown
            || (self == Verdict::Dense && claim == Verdict::NonTrivial)
    }

    /// Two verdicts about the same set that cannot both hold.
    pub fn contradicts(self, other: Verdict) -> bool {
        (self == Verdict::Trivial && other.is_nontrivial())
            || (other == Verdict::Trivial && self.is_nontrivial())
    }

    pub fn parse(text: &str) -> Option<Verdict> {
        match text {
            "Trivial" | "trivial" => Some(Verdict::Trivial),
            "NonTrivial" | "nontrivial" => Some(Verdict::NonTrivial),
            "Dense" | "dense" => Some(Verdict::Dense),
            "Unknown" | "unknown" => Some(Verdict::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Trivial => "Trivial",
            Verdict::NonTrivial => "NonTrivial",
            Verdict::Dense => "Dense",
            Verdict::Unknown => "Unknown",
        })
    }
}
