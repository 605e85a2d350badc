//! Premise-guarded adjoint pushing and reduction to monomial normal form.

use crate::ast::{AtomFlags, AtomTable, OpExpr, SpaceShape};
use crate::error::{Error, Result};
use crate::monomial::{Chain, Factor, MonomialMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Diagonal,
    OffDiagonal,
}

/// Classifies a 2×2 block by its structural zeros.
pub fn block_kind(entries: &[OpExpr; 4]) -> Option<BlockKind> {
    let is_zero = |e: &OpExpr| matches!(e, OpExpr::Zero(_));
    if is_zero(&entries[1]) && is_zero(&entries[2]) {
        Some(BlockKind::Diagonal)
    } else if is_zero(&entries[0]) && is_zero(&entries[3]) {
        Some(BlockKind::OffDiagonal)
    } else {
        None
    }
}

/// The entries that sit on the monomial pattern of the block.
fn pattern_entries(entries: &[OpExpr; 4]) -> Option<[&OpExpr; 2]> {
    match block_kind(entries)? {
        BlockKind::Diagonal => Some([&entries[0], &entries[3]]),
        BlockKind::OffDiagonal => Some([&entries[1], &entries[2]]),
    }
}

/// Bounded and defined on the whole space.
pub fn bounded_everywhere(e: &OpExpr, atoms: &AtomTable) -> bool {
    match e {
        OpExpr::Atom(id) => atoms.has(id, AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED),
        OpExpr::Identity(_) | OpExpr::Zero(_) => true,
        OpExpr::Adjoint(z) => bounded_everywhere(z, atoms),
        OpExpr::Inverse(z) => match z.as_ref() {
            OpExpr::Atom(id) => atoms.inverse_partner(id).is_some_and(|p| {
                atoms.has(&p, AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED)
            }),
            _ => false,
        },
        OpExpr::Compose(a, b) => bounded_everywhere(a, atoms) && bounded_everywhere(b, atoms),
        OpExpr::Power(x, _) => bounded_everywhere(x, atoms),
        OpExpr::Block2(entries) => entries.iter().all(|x| bounded_everywhere(x, atoms)),
    }
}

/// Bijective, bounded and everywhere defined, with bounded everywhere
/// defined inverse.
pub fn boundedly_invertible(e: &OpExpr, atoms: &AtomTable) -> bool {
    match e {
        OpExpr::Atom(id) => {
            bounded_everywhere(e, atoms)
                && atoms.inverse_partner(id).is_some_and(|p| {
                    atoms.has(&p, AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED)
                })
        }
        OpExpr::Identity(_) => true,
        OpExpr::Zero(_) => false,
        OpExpr::Adjoint(z) | OpExpr::Inverse(z) | OpExpr::Power(z, _) => {
            boundedly_invertible(z, atoms)
        }
        OpExpr::Compose(a, b) => boundedly_invertible(a, atoms) && boundedly_invertible(b, atoms),
        OpExpr::Block2(entries) => pattern_entries(entries)
            .is_some_and(|pair| pair.iter().all(|x| boundedly_invertible(x, atoms))),
    }
}

pub fn densely_defined(e: &OpExpr, atoms: &AtomTable) -> bool {
    match e {
        OpExpr::Atom(id) => atoms.has(id, AtomFlags::DENSELY_DEFINED),
        OpExpr::Identity(_) | OpExpr::Zero(_) => true,
        OpExpr::Adjoint(z) => closed(z, atoms) && densely_defined(z, atoms),
        OpExpr::Inverse(z) => match z.as_ref() {
            OpExpr::Atom(id) => atoms.has(id, AtomFlags::SELF_ADJOINT | AtomFlags::INJECTIVE),
            _ => false,
        },
        OpExpr::Compose(a, b) => {
            (bounded_everywhere(a, atoms) && densely_defined(b, atoms))
                || (boundedly_invertible(b, atoms) && densely_defined(a, atoms))
        }
        OpExpr::Power(x, _) => bounded_everywhere(x, atoms),
        OpExpr::Block2(entries) => pattern_entries(entries)
            .is_some_and(|pair| pair.iter().all(|x| densely_defined(x, atoms))),
    }
}

pub fn closed(e: &OpExpr, atoms: &AtomTable) -> bool {
    match e {
        OpExpr::Atom(id) => atoms.has(id, AtomFlags::CLOSED),
        OpExpr::Identity(_) | OpExpr::Zero(_) => true,
        OpExpr::Adjoint(z) => densely_defined(z, atoms),
        OpExpr::Inverse(z) => match z.as_ref() {
            OpExpr::Atom(id) => atoms.has(id, AtomFlags::CLOSED | AtomFlags::INJECTIVE),
            _ => false,
        },
        OpExpr::Compose(a, b) => {
            (closed(a, atoms) && bounded_everywhere(b, atoms))
                || (boundedly_invertible(a, atoms) && closed(b, atoms))
        }
        OpExpr::Power(x, _) => bounded_everywhere(x, atoms),
        OpExpr::Block2(entries) => {
            pattern_entries(entries).is_some_and(|pair| pair.iter().all(|x| closed(x, atoms)))
        }
    }
}

/// Rewrites every `Adjoint` node whose premises can be established:
///
/// - ADJ-ATOM: `a* = a` for self-adjoint atoms, else the linked adjoint atom;
/// - ADJ-COMP-BDD: `(D X)* = X* D*` for `D` bounded and everywhere defined,
///   `(X D)* = D* X*` for `D` boundedly invertible, `X` densely defined;
/// - ADJ-BLOCK: diagonal and off-diagonal blocks of closed densely defined
///   entries, e.g. `[0, A; B, 0]* = [0, B*; A*, 0]`;
/// - ADJ-INV: `(a^-1)* = a^-1` for self-adjoint injective atoms;
/// - ADJ-INVOL: `e** = e` for closed densely defined `e`.
///
/// Anything else stays symbolic.
pub fn push_adjoint(e: &OpExpr, atoms: &AtomTable) -> OpExpr {
    match e {
        OpExpr::Atom(_) | OpExpr::Identity(_) | OpExpr::Zero(_) => e.clone(),
        OpExpr::Adjoint(x) => adjoint_of(push_adjoint(x, atoms), atoms),
        OpExpr::Inverse(x) => push_adjoint(x, atoms).inverse(),
        OpExpr::Power(x, n) => OpExpr::Power(Box::new(push_adjoint(x, atoms)), *n),
        OpExpr::Compose(a, b) => OpExpr::compose(push_adjoint(a, atoms), push_adjoint(b, atoms)),
        OpExpr::Block2(entries) => {
            let [a, b, c, d] = entries.as_ref();
            OpExpr::block(
                push_adjoint(a, atoms),
                push_adjoint(b, atoms),
                push_adjoint(c, atoms),
                push_adjoint(d, atoms),
            )
        }
    }
}

/// Adjoint of an already-pushed expression.
fn adjoint_of(y: OpExpr, atoms: &AtomTable) -> OpExpr {
    match &y {
        OpExpr::Atom(id) => {
            if atoms.has(id, AtomFlags::SELF_ADJOINT) {
                y
            } else if let Some(partner) = atoms.adjoint_partner(id) {
                OpExpr::Atom(partner)
            } else {
                y.adjoint()
            }
        }
        OpExpr::Identity(_) | OpExpr::Zero(_) => y,
        OpExpr::Adjoint(z) => {
            if closed(z, atoms) && densely_defined(z, atoms) {
                z.as_ref().clone()
            } else {
                y.adjoint()
            }
        }
        OpExpr::Inverse(z) => match z.as_ref() {
            OpExpr::Atom(id) if atoms.has(id, AtomFlags::SELF_ADJOINT | AtomFlags::INJECTIVE) => y,
            _ => y.adjoint(),
        },
        OpExpr::Compose(after, first) => {
            let left_bounded = bounded_everywhere(after, atoms) && densely_defined(first, atoms);
            let right_invertible =
                boundedly_invertible(first, atoms) && densely_defined(after, atoms);
            if left_bounded || right_invertible {
                OpExpr::compose(
                    adjoint_of(first.as_ref().clone(), atoms),
                    adjoint_of(after.as_ref().clone(), atoms),
                )
            } else {
                y.adjoint()
            }
        }
        OpExpr::Power(x, n) => {
            if bounded_everywhere(x, atoms) {
                OpExpr::Power(Box::new(adjoint_of(x.as_ref().clone(), atoms)), *n)
            } else {
                y.adjoint()
            }
        }
        OpExpr::Block2(entries) => {
            let premises = pattern_entries(entries).is_some_and(|pair| {
                pair.iter()
                    .all(|x| closed(x, atoms) && densely_defined(x, atoms))
            });
            if !premises {
                return y.adjoint();
            }
            let [p, q, r, w] = entries.as_ref().clone();
            match block_kind(entries) {
                Some(BlockKind::Diagonal) => {
                    OpExpr::block(adjoint_of(p, atoms), q, r, adjoint_of(w, atoms))
                }
                Some(BlockKind::OffDiagonal) => {
                    OpExpr::block(p, adjoint_of(r, atoms), adjoint_of(q, atoms), w)
                }
                None => unreachable!("premises imply a monomial block"),
            }
        }
    }
}

/// Inverse of a single factor, resolving inverse links.
pub fn invert_factor(f: &Factor, atoms: &AtomTable) -> Result<Factor> {
    if f.inverse {
        return Ok(Factor {
            inverse: false,
            ..f.clone()
        });
    }
    if f.adjoint {
        return Err(Error::NonNormalizable(format!(
            "inverse of the adjoint `{f}` is not known to exist"
        )));
    }
    if let Some(partner) = atoms.inverse_partner(&f.atom) {
        return Ok(Factor::plain(partner));
    }
    if !atoms.has(&f.atom, AtomFlags::INJECTIVE) {
        return Err(Error::NonNormalizable(format!(
            "`{}` is not declared injective",
            f.atom
        )));
    }
    Ok(Factor {
        inverse: true,
        ..f.clone()
    })
}

/// `(f1 ∘ ... ∘ fk)^-1 = fk^-1 ∘ ... ∘ f1^-1`.
pub fn invert_chain(chain: &Chain, atoms: &AtomTable) -> Result<Chain> {
    if chain.zero {
        return Err(Error::NonNormalizable("the zero operator has no inverse".into()));
    }
    chain
        .factors
        .iter()
        .rev()
        .map(|f| invert_factor(f, atoms))
        .collect::<Result<Vec<_>>>()
        .map(Chain::of)
}

/// Reduces `e` to its monomial normal form.
pub fn normalize(e: &OpExpr, atoms: &AtomTable) -> Result<MonomialMatrix> {
    e.shape_of(atoms)?;
    normalize_inner(e, atoms)
}

fn normalize_inner(e: &OpExpr, atoms: &AtomTable) -> Result<MonomialMatrix> {
    match e {
        OpExpr::Atom(id) => {
            if atoms.shape(id) != SpaceShape::Base {
                return Err(Error::NonNormalizable(format!(
                    "atom `{id}` acts on a compound space"
                )));
            }
            Ok(MonomialMatrix::scalar(Chain::of(vec![Factor::plain(id.clone())])))
        }
        OpExpr::Identity(shape) => Ok(MonomialMatrix::identity(shape.clone())),
        OpExpr::Zero(shape) => Ok(MonomialMatrix::zero(shape.clone())),
        OpExpr::Compose(after, first) => {
            normalize_inner(after, atoms)?.compose_blocks(&normalize_inner(first, atoms)?)
        }
        OpExpr::Power(x, n) => normalize_inner(x, atoms)?.expand_power(*n),
        OpExpr::Inverse(x) => {
            normalize_inner(x, atoms)?.invert_with(|chain| invert_chain(chain, atoms))
        }
        OpExpr::Block2(entries) => {
            let [p, q, r, w] = entries.as_ref();
            match block_kind(entries) {
                Some(BlockKind::Diagonal) => MonomialMatrix::block_diag(
                    &normalize_inner(p, atoms)?,
                    &normalize_inner(w, atoms)?,
                ),
                Some(BlockKind::OffDiagonal) => MonomialMatrix::block_offdiag(
                    &normalize_inner(q, atoms)?,
                    &normalize_inner(r, atoms)?,
                ),
                None => Err(Error::NonNormalizable(format!(
                    "block `{}` has entries outside a monomial pattern",
                    e.pretty_print()
                ))),
            }
        }
        OpExpr::Adjoint(_) => match push_adjoint(e, atoms) {
            OpExpr::Adjoint(inner) => match inner.as_ref() {
                OpExpr::Atom(id) if atoms.shape(id) == SpaceShape::Base => {
                    Ok(MonomialMatrix::scalar(Chain::of(vec![Factor {
                        atom: id.clone(),
                        adjoint: true,
                        inverse: false,
                    }])))
                }
                other => Err(Error::NonNormalizable(format!(
                    "no adjoint rule applies to `{}`",
                    other.pretty_print()
                ))),
            },
            pushed => normalize_inner(&pushed, atoms),
        },
    }
}
