//! Independent derivation checker.
//!
//! Every node is matched against the template of its rule, every cited
//! axiom is looked up in the fact base, and every claimed normal form is
//! recomputed by a separate evaluator below (sequential powers, its own
//! adjoint rules). Nothing here calls into the inference engine or the
//! normalizer.

use std::fmt;

use crate::ast::{AtomFlags, AtomId, OpExpr, SpaceShape};
use crate::derivation::{Derivation, Judgment, Rule};
use crate::domain::{DomainSet, Verdict};
use crate::facts::{Axiom, DomainRhs, FactBase};
use crate::monomial::{Chain, Factor, MonomialMatrix};

/// Where and why a derivation was rejected. `path` lists premise indices
/// from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckFailure {
    pub path: Vec<usize>,
    pub rule: Rule,
    pub reason: String,
}

impl fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(usize::to_string).collect();
        write!(
            f,
            "rule {} at [{}] rejected: {}",
            self.rule,
            path.join("."),
            self.reason
        )
    }
}

impl std::error::Error for CheckFailure {}

pub fn verify_derivation(d: &Derivation, facts: &FactBase) -> Result<(), CheckFailure> {
    let mut path = Vec::new();
    check_node(d, facts, &mut path)
}

pub fn verify(d: &Derivation, facts: &FactBase) -> bool {
    verify_derivation(d, facts).is_ok()
}

fn check_node(d: &Derivation, facts: &FactBase, path: &mut Vec<usize>) -> Result<(), CheckFailure> {
    if let Err(reason) = check_rule(d, facts) {
        return Err(CheckFailure {
            path: path.clone(),
            rule: d.rule,
            reason,
        });
    }
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_node(p, facts, path)?;
        path.pop();
    }
    Ok(())
}

type Check = Result<(), String>;

fn ensure(cond: bool, reason: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(reason())
    }
}

fn arity(d: &Derivation, n: usize) -> Check {
    ensure(d.premises.len() == n, || {
        format!("expected {n} premises, found {}", d.premises.len())
    })
}

fn premise(d: &Derivation, i: usize) -> &Judgment {
    &d.premises[i].conclusion
}

fn set_eq(j: &Judgment) -> Result<(&DomainSet, &DomainSet), String> {
    match j {
        Judgment::SetEq { lhs, rhs } => Ok((lhs, rhs)),
        other => Err(format!("expected a set equality, found `{other}`")),
    }
}

fn domain(j: &Judgment) -> Result<(&Chain, &DomainSet), String> {
    match j {
        Judgment::Domain { chain, set } => Ok((chain, set)),
        other => Err(format!("expected a chain domain, found `{other}`")),
    }
}

fn matrix_domain(j: &Judgment) -> Result<(&MonomialMatrix, &DomainSet), String> {
    match j {
        Judgment::MatrixDomain { matrix, set } => Ok((matrix, set)),
        other => Err(format!("expected a matrix domain, found `{other}`")),
    }
}

fn injective(j: &Judgment) -> Result<&Chain, String> {
    match j {
        Judgment::Injective { chain } => Ok(chain),
        other => Err(format!("expected chain injectivity, found `{other}`")),
    }
}

fn dense(j: &Judgment) -> Result<&DomainSet, String> {
    match j {
        Judgment::Dense { set } => Ok(set),
        other => Err(format!("expected a density claim, found `{other}`")),
    }
}

fn nonzero(j: &Judgment) -> Result<&DomainSet, String> {
    match j {
        Judgment::NonZero { set } => Ok(set),
        other => Err(format!("expected a nonzero claim, found `{other}`")),
    }
}

fn classified(j: &Judgment) -> Result<(&DomainSet, Verdict), String> {
    match j {
        Judgment::Classified { set, verdict } => Ok((set, *verdict)),
        other => Err(format!("expected a classification, found `{other}`")),
    }
}

fn same<T: PartialEq + fmt::Display>(a: &T, b: &T, what: &str) -> Check {
    ensure(a == b, || format!("{what}: `{a}` differs from `{b}`"))
}

fn single_axiom(d: &Derivation, facts: &FactBase, expected: Option<&Axiom>) -> Check {
    let [cited] = d.axioms.as_slice() else {
        return Err(format!("expected one cited axiom, found {}", d.axioms.len()));
    };
    let expected = expected.ok_or_else(|| format!("no axiom in the fact base supports `{}`", d.conclusion))?;
    ensure(facts.has_axiom(cited), || format!("axiom `{cited}` is not in the fact base"))?;
    ensure(*cited == expected.id(), || {
        format!("cited `{cited}` but the matching axiom is `{}`", expected.id())
    })
}

fn plain(f: &Factor) -> Option<&AtomId> {
    (!f.adjoint && !f.inverse).then_some(&f.atom)
}

fn single_factor(c: &Chain) -> Result<&Factor, String> {
    match c.factors.as_slice() {
        [f] if !c.zero => Ok(f),
        _ => Err(format!("expected a single factor, found `{c}`")),
    }
}

/// `c` is exactly `x` followed by `y`, both non-empty.
fn is_split(c: &Chain, x: &Chain, y: &Chain) -> Check {
    ensure(!c.zero && !x.zero && !y.zero, || "split of a zero chain".into())?;
    ensure(!x.factors.is_empty() && !y.factors.is_empty(), || {
        "split with an empty side".into()
    })?;
    let joined: Vec<&Factor> = x.factors.iter().chain(&y.factors).collect();
    let whole: Vec<&Factor> = c.factors.iter().collect();
    ensure(joined == whole, || format!("`{x}` then `{y}` is not `{c}`"))
}

fn balanced_sum(parts: &[DomainSet]) -> DomainSet {
    match parts {
        [one] => one.clone(),
        _ => {
            let mid = parts.len() / 2;
            DomainSet::DirectSum(
                Box::new(balanced_sum(&parts[..mid])),
                Box::new(balanced_sum(&parts[mid..])),
            )
        }
    }
}

fn normal_matches(expr: &OpExpr, claimed: &MonomialMatrix, facts: &FactBase) -> Check {
    let own = Evaluator { facts }.eval(expr)?;
    ensure(own.matches(claimed), || {
        format!("`{claimed}` is not the normal form of `{expr}`")
    })
}

fn no_axioms(d: &Derivation) -> Check {
    ensure(d.axioms.is_empty(), || format!("rule {} cites no axioms", d.rule))
}

fn check_rule(d: &Derivation, facts: &FactBase) -> Check {
    use Rule::*;
    let takes_axiom = matches!(d.rule, FactMeet | RangeFact | FactMatch | DenseAxiom);
    if !takes_axiom {
        no_axioms(d)?;
    }
    let c = &d.conclusion;
    match d.rule {
        Refl => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            same(l, r, "reflexivity")
        }
        Trans => {
            arity(d, 2)?;
            let (l, r) = set_eq(c)?;
            let (a, b) = set_eq(premise(d, 0))?;
            let (b2, c2) = set_eq(premise(d, 1))?;
            same(a, l, "left end")?;
            same(b, b2, "middle")?;
            same(c2, r, "right end")
        }
        CongInt | CongSum => {
            arity(d, 2)?;
            let (l, r) = set_eq(c)?;
            let (a, a2) = set_eq(premise(d, 0))?;
            let (b, b2) = set_eq(premise(d, 1))?;
            let parts = |s: &DomainSet| match (d.rule, s) {
                (CongInt, DomainSet::Intersect(x, y)) | (CongSum, DomainSet::DirectSum(x, y)) => {
                    Ok((x.as_ref().clone(), y.as_ref().clone()))
                }
                _ => Err(format!("`{s}` has the wrong head for {}", d.rule)),
            };
            let (lx, ly) = parts(l)?;
            let (rx, ry) = parts(r)?;
            same(&lx, a, "left operand")?;
            same(&ly, b, "right operand")?;
            same(&rx, a2, "rewritten left operand")?;
            same(&ry, b2, "rewritten right operand")
        }
        CongPre => {
            arity(d, 1)?;
            let (l, r) = set_eq(c)?;
            let (t, t2) = set_eq(premise(d, 0))?;
            match (l, r) {
                (DomainSet::Preimage(e, s), DomainSet::Preimage(e2, s2)) => {
                    same(e, e2, "preimage chain")?;
                    same(s.as_ref(), t, "target")?;
                    same(s2.as_ref(), t2, "rewritten target")
                }
                _ => Err("both sides must be preimages".into()),
            }
        }
        IntTriv => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Intersect(a, b) = l else {
                return Err("left side must be an intersection".into());
            };
            ensure(a.is_trivial() || b.is_trivial(), || "no trivial operand".into())?;
            same(r, &DomainSet::Trivial(a.shape()), "result")
        }
        IntWhole => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Intersect(a, b) = l else {
                return Err("left side must be an intersection".into());
            };
            ensure(
                (a.is_whole() && r == b.as_ref()) || (b.is_whole() && r == a.as_ref()),
                || "intersection with the whole space must return the other operand".into(),
            )
        }
        FactMeet => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            same(r, &DomainSet::trivial(), "result")?;
            let DomainSet::Intersect(a, b) = l else {
                return Err("left side must be an intersection".into());
            };
            let (DomainSet::DomAtom(x), DomainSet::DomAtom(y)) = (a.as_ref(), b.as_ref()) else {
                return Err("meet axioms relate two atom domains".into());
            };
            let (Some(x), Some(y)) = (plain(x), plain(y)) else {
                return Err("meet axioms relate plain atoms".into());
            };
            single_axiom(d, facts, facts.meet_axiom(x, y))
        }
        PreComp => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Preimage(e, t) = l else {
                return Err("left side must be a preimage".into());
            };
            ensure(!e.zero && e.factors.len() >= 2, || "needs at least two factors".into())?;
            let expected = DomainSet::Preimage(
                Chain::of(e.factors[1..].to_vec()),
                Box::new(DomainSet::Preimage(
                    Chain::of(vec![e.factors[0].clone()]),
                    t.clone(),
                )),
            );
            same(r, &expected, "split preimage")
        }
        PreTriv => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Preimage(e, t) = l else {
                return Err("left side must be a preimage".into());
            };
            ensure(t.is_trivial(), || "target must be trivial".into())?;
            same(r, &DomainSet::Kernel(e.clone()), "kernel")
        }
        PreWhole => {
            arity(d, 1)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Preimage(e, t) = l else {
                return Err("left side must be a preimage".into());
            };
            ensure(t.is_whole(), || "target must be the whole space".into())?;
            let (pc, ps) = domain(premise(d, 0))?;
            same(pc, e, "premise chain")?;
            same(ps, r, "domain")
        }
        PreRange => {
            arity(d, 1)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Preimage(e, t) = l else {
                return Err("left side must be a preimage".into());
            };
            single_factor(e)?;
            same(r, &DomainSet::Kernel(e.clone()), "kernel")?;
            let (pl, pr) = set_eq(premise(d, 0))?;
            let probe = DomainSet::Intersect(Box::new(DomainSet::Range(e.clone())), t.clone());
            same(pl, &probe, "range meet")?;
            ensure(pr.is_trivial(), || "range must meet the target trivially".into())
        }
        KerInj => {
            arity(d, 1)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Kernel(e) = l else {
                return Err("left side must be a kernel".into());
            };
            same(r, &DomainSet::trivial(), "result")?;
            same(injective(premise(d, 0))?, e, "injective chain")
        }
        SumTriv => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::DirectSum(a, b) = l else {
                return Err("left side must be a direct sum".into());
            };
            ensure(a.is_trivial() && b.is_trivial(), || "both summands must be trivial".into())?;
            same(r, &DomainSet::Trivial(SpaceShape::pair(a.shape())), "result")
        }
        RangeFact => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Range(e) = l else {
                return Err("left side must be a range".into());
            };
            let atom = plain(single_factor(e)?).ok_or("range axioms name plain atoms")?;
            let axiom = facts.range_axiom(atom);
            if let Some(Axiom::Range { dom_of, .. }) = axiom {
                same(r, &DomainSet::DomAtom(Factor::plain(dom_of.clone())), "range")?;
            }
            single_axiom(d, facts, axiom)
        }
        RangeLink => {
            arity(d, 0)?;
            let (l, r) = set_eq(c)?;
            let DomainSet::Range(e) = l else {
                return Err("left side must be a range".into());
            };
            let f = single_factor(e)?;
            let target = match plain(f) {
                Some(a) => facts
                    .atoms
                    .inverse_partner(a)
                    .ok_or_else(|| format!("`{a}` has no inverse partner"))?,
                None if f.inverse && !f.adjoint => f.atom.clone(),
                None => return Err(format!("no link describes the range of `{f}`")),
            };
            same(r, &DomainSet::DomAtom(Factor::plain(target)), "range")
        }
        DomAtom => {
            arity(d, 0)?;
            let (ch, s) = domain(c)?;
            let f = single_factor(ch)?;
            let everywhere = plain(f)
                .is_some_and(|a| facts.atoms.has(a, AtomFlags::EVERYWHERE_DEFINED));
            let expected = if everywhere {
                DomainSet::whole()
            } else {
                DomainSet::DomAtom(f.clone())
            };
            same(s, &expected, "atom domain")
        }
        DomId => {
            arity(d, 0)?;
            let (ch, s) = domain(c)?;
            ensure(ch.is_identity(), || "chain must be the identity".into())?;
            same(s, &DomainSet::whole(), "identity domain")
        }
        DomZero => {
            arity(d, 1)?;
            let (ch, s) = domain(c)?;
            ensure(ch.zero, || "chain must carry the zero marker".into())?;
            let (pc, ps) = domain(premise(d, 0))?;
            same(pc, &Chain::of(ch.factors.clone()), "factors right of the zero")?;
            same(ps, s, "domain")
        }
        DomComp | DomCompWhole => {
            arity(d, 2)?;
            let (ch, s) = domain(c)?;
            let (x, sx) = domain(premise(d, 0))?;
            let (y, sy) = domain(premise(d, 1))?;
            is_split(ch, x, y)?;
            if d.rule == DomCompWhole {
                ensure(sx.is_whole(), || "left factor must be everywhere defined".into())?;
                same(s, sy, "domain")
            } else {
                let expected = DomainSet::Intersect(
                    Box::new(sy.clone()),
                    Box::new(DomainSet::Preimage(y.clone(), Box::new(sx.clone()))),
                );
                same(s, &expected, "composite domain")
            }
        }
        FactMatch => {
            arity(d, 0)?;
            let (ch, s) = domain(c)?;
            let axiom = facts.domain_axiom(ch);
            if let Some(Axiom::Domain { rhs, .. }) = axiom {
                let expected = match rhs {
                    DomainRhs::Trivial => DomainSet::trivial(),
                    DomainRhs::DomOf(a) => DomainSet::DomAtom(Factor::plain(a.clone())),
                };
                same(s, &expected, "axiom right side")?;
            }
            single_axiom(d, facts, axiom)
        }
        DomSimp => {
            arity(d, 2)?;
            let (ch, s) = domain(c)?;
            let (pc, ps) = domain(premise(d, 0))?;
            let (a, b) = set_eq(premise(d, 1))?;
            same(pc, ch, "chain")?;
            same(ps, a, "rewritten set")?;
            same(b, s, "result")
        }
        DomMono => {
            let (m, s) = matrix_domain(c)?;
            arity(d, m.dim())?;
            let mut parts = Vec::with_capacity(m.dim());
            for col in 0..m.dim() {
                let (pc, ps) = domain(premise(d, col))?;
                let row = m
                    .col_of_row()
                    .iter()
                    .position(|&c| c == col)
                    .ok_or("malformed permutation")?;
                same(pc, m.chain(row), "column chain")?;
                parts.push(ps.clone());
            }
            same(s, &balanced_sum(&parts), "direct sum of column domains")
        }
        MatrixSimp => {
            arity(d, 2)?;
            let (m, s) = matrix_domain(c)?;
            let (pm, ps) = matrix_domain(premise(d, 0))?;
            let (a, b) = set_eq(premise(d, 1))?;
            same(pm, m, "matrix")?;
            same(ps, a, "rewritten set")?;
            same(b, s, "result")
        }
        DomNorm => {
            arity(d, 1)?;
            let Judgment::ExprDomain { expr, set } = c else {
                return Err("expected an expression domain".into());
            };
            let (m, s) = matrix_domain(premise(d, 0))?;
            same(s, set, "domain")?;
            normal_matches(expr, m, facts)
        }
        InjFlag | InjInv | InjId => {
            arity(d, 0)?;
            let ch = injective(c)?;
            match d.rule {
                InjId => ensure(ch.is_identity(), || "chain must be the identity".into()),
                InjFlag => {
                    let a = plain(single_factor(ch)?).ok_or("flags belong to plain atoms")?;
                    ensure(facts.atoms.has(a, AtomFlags::INJECTIVE), || {
                        format!("`{a}` is not declared injective")
                    })
                }
                _ => {
                    let f = single_factor(ch)?;
                    ensure(f.inverse && !f.adjoint, || format!("`{f}` is not an inverse"))
                }
            }
        }
        InjComp => {
            arity(d, 2)?;
            let ch = injective(c)?;
            is_split(ch, injective(premise(d, 0))?, injective(premise(d, 1))?)
        }
        InjBlock => {
            let Judgment::MatrixInjective { matrix } = c else {
                return Err("expected matrix injectivity".into());
            };
            arity(d, matrix.dim())?;
            for (row, chain) in matrix.chains().iter().enumerate() {
                same(injective(premise(d, row))?, chain, "row chain")?;
            }
            Ok(())
        }
        InjNorm => {
            arity(d, 1)?;
            let Judgment::ExprInjective { expr } = c else {
                return Err("expected expression injectivity".into());
            };
            let Judgment::MatrixInjective { matrix } = premise(d, 0) else {
                return Err("premise must be matrix injectivity".into());
            };
            normal_matches(expr, matrix, facts)
        }
        DenseWhole => {
            arity(d, 0)?;
            ensure(dense(c)?.is_whole(), || "set must be the whole space".into())
        }
        DenseFlag | DenseAxiom => {
            arity(d, 0)?;
            let DomainSet::DomAtom(f) = dense(c)? else {
                return Err("expected an atom domain".into());
            };
            let a = plain(f).ok_or("density facts name plain atoms")?;
            if d.rule == DenseAxiom {
                single_axiom(d, facts, facts.dense_axiom(a))
            } else {
                ensure(facts.atoms.has(a, AtomFlags::DENSELY_DEFINED), || {
                    format!("`{a}` is not densely defined")
                })
            }
        }
        DenseSum => {
            arity(d, 2)?;
            let DomainSet::DirectSum(a, b) = dense(c)? else {
                return Err("expected a direct sum".into());
            };
            same(dense(premise(d, 0))?, a.as_ref(), "left summand")?;
            same(dense(premise(d, 1))?, b.as_ref(), "right summand")
        }
        NonZeroDense => {
            arity(d, 1)?;
            same(dense(premise(d, 0))?, nonzero(c)?, "set")
        }
        NonZeroSumLeft | NonZeroSumRight => {
            arity(d, 1)?;
            let DomainSet::DirectSum(a, b) = nonzero(c)? else {
                return Err("expected a direct sum".into());
            };
            let part = if d.rule == NonZeroSumLeft { a } else { b };
            same(nonzero(premise(d, 0))?, part.as_ref(), "summand")
        }
        ClassTrivial => {
            arity(d, 0)?;
            let (s, v) = classified(c)?;
            ensure(v == crate::domain::Verdict::Trivial && s.is_trivial(), || "set is not trivial".into())
        }
        ClassUnknown => {
            arity(d, 0)?;
            let (_, v) = classified(c)?;
            ensure(v == crate::domain::Verdict::Unknown, || "verdict must be Unknown".into())
        }
        ClassDense => {
            arity(d, 1)?;
            let (s, v) = classified(c)?;
            ensure(v == crate::domain::Verdict::Dense, || "verdict must be Dense".into())?;
            same(dense(premise(d, 0))?, s, "set")
        }
        ClassNonTrivial => {
            arity(d, 1)?;
            let (s, v) = classified(c)?;
            ensure(v == crate::domain::Verdict::NonTrivial, || "verdict must be NonTrivial".into())?;
            same(nonzero(premise(d, 0))?, s, "set")
        }
        Verdict => {
            arity(d, 2)?;
            let Judgment::Verdict {
                expr,
                normal,
                verdict,
            } = c
            else {
                return Err("expected a verdict".into());
            };
            let (m, s) = matrix_domain(premise(d, 0))?;
            let (cs, cv) = classified(premise(d, 1))?;
            same(m, normal, "normal form")?;
            same(s, cs, "classified set")?;
            ensure(cv == *verdict, || "verdict differs from its classification".into())?;
            normal_matches(expr, normal, facts)
        }
    }
}

// ---- independent normal-form evaluator -----------------------------------

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    col: usize,
    zero: bool,
    factors: Vec<Factor>,
}

#[derive(Debug, Clone)]
struct Mat {
    shape: SpaceShape,
    rows: Vec<Entry>,
}

impl Mat {
    fn matches(&self, m: &MonomialMatrix) -> bool {
        self.shape == *m.shape()
            && self.rows.len() == m.dim()
            && self.rows.iter().enumerate().all(|(r, e)| {
                let c = m.chain(r);
                e.col == m.col_of_row()[r] && e.zero == c.zero && e.factors == c.factors
            })
    }

    fn then(&self, first: &Mat) -> Result<Mat, String> {
        if self.shape != first.shape {
            return Err(format!("shapes {} and {} differ", self.shape, first.shape));
        }
        let rows = self
            .rows
            .iter()
            .map(|e| {
                let inner = &first.rows[e.col];
                if inner.zero {
                    Entry {
                        col: inner.col,
                        zero: true,
                        factors: inner.factors.clone(),
                    }
                } else {
                    let mut factors = e.factors.clone();
                    factors.extend(inner.factors.iter().cloned());
                    Entry {
                        col: inner.col,
                        zero: e.zero,
                        factors,
                    }
                }
            })
            .collect();
        Ok(Mat {
            shape: self.shape.clone(),
            rows,
        })
    }
}

/// Closure properties of an expression: bounded and everywhere defined,
/// boundedly invertible, densely defined, closed.
#[derive(Debug, Clone, Copy)]
struct Props {
    bounded: bool,
    invertible: bool,
    dense: bool,
    closed: bool,
}

struct Evaluator<'a> {
    facts: &'a FactBase,
}

impl Evaluator<'_> {
    fn has(&self, a: &AtomId, flags: AtomFlags) -> bool {
        self.facts.atoms.flags(a).contains(flags)
    }

    fn bounded_atom(&self, a: &AtomId) -> bool {
        self.has(a, AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED)
    }

    fn props(&self, e: &OpExpr) -> Props {
        let all = Props {
            bounded: true,
            invertible: true,
            dense: true,
            closed: true,
        };
        match e {
            OpExpr::Identity(_) => all,
            OpExpr::Zero(_) => Props {
                invertible: false,
                ..all
            },
            OpExpr::Atom(a) => {
                let bounded = self.bounded_atom(a);
                Props {
                    bounded,
                    invertible: bounded
                        && self
                            .facts
                            .atoms
                            .inverse_partner(a)
                            .is_some_and(|p| self.bounded_atom(&p)),
                    dense: self.has(a, AtomFlags::DENSELY_DEFINED),
                    closed: self.has(a, AtomFlags::CLOSED),
                }
            }
            OpExpr::Adjoint(z) => {
                let p = self.props(z);
                Props {
                    bounded: p.bounded,
                    invertible: p.invertible,
                    dense: p.closed && p.dense,
                    closed: p.dense,
                }
            }
            OpExpr::Inverse(z) => {
                let p = self.props(z);
                match z.as_ref() {
                    OpExpr::Atom(a) => Props {
                        bounded: self
                            .facts
                            .atoms
                            .inverse_partner(a)
                            .is_some_and(|q| self.bounded_atom(&q)),
                        invertible: p.invertible,
                        dense: self.has(a, AtomFlags::SELF_ADJOINT | AtomFlags::INJECTIVE),
                        closed: self.has(a, AtomFlags::CLOSED | AtomFlags::INJECTIVE),
                    },
                    _ => Props {
                        bounded: false,
                        invertible: p.invertible,
                        dense: false,
                        closed: false,
                    },
                }
            }
            OpExpr::Compose(a, b) => {
                let (pa, pb) = (self.props(a), self.props(b));
                Props {
                    bounded: pa.bounded && pb.bounded,
                    invertible: pa.invertible && pb.invertible,
                    dense: (pa.bounded && pb.dense) || (pb.invertible && pa.dense),
                    closed: (pa.closed && pb.bounded) || (pa.invertible && pb.closed),
                }
            }
            OpExpr::Power(x, _) => {
                let p = self.props(x);
                Props {
                    bounded: p.bounded,
                    invertible: p.invertible,
                    dense: p.bounded,
                    closed: p.bounded,
                }
            }
            OpExpr::Block2(entries) => {
                let ps: Vec<Props> = entries.iter().map(|x| self.props(x)).collect();
                let bounded = ps.iter().all(|p| p.bounded);
                match monomial_slots(entries) {
                    Some((i, j)) => Props {
                        bounded,
                        invertible: ps[i].invertible && ps[j].invertible,
                        dense: ps[i].dense && ps[j].dense,
                        closed: ps[i].closed && ps[j].closed,
                    },
                    None => Props {
                        bounded,
                        invertible: false,
                        dense: false,
                        closed: false,
                    },
                }
            }
        }
    }

    /// Moves every adjoint inward as far as its premises allow.
    fn star_inward(&self, e: &OpExpr) -> OpExpr {
        match e {
            OpExpr::Atom(_) | OpExpr::Identity(_) | OpExpr::Zero(_) => e.clone(),
            OpExpr::Adjoint(x) => self.star(self.star_inward(x)),
            OpExpr::Inverse(x) => OpExpr::Inverse(Box::new(self.star_inward(x))),
            OpExpr::Power(x, n) => OpExpr::Power(Box::new(self.star_inward(x)), *n),
            OpExpr::Compose(a, b) => {
                OpExpr::Compose(Box::new(self.star_inward(a)), Box::new(self.star_inward(b)))
            }
            OpExpr::Block2(entries) => {
                let [a, b, c, d] = entries.as_ref();
                OpExpr::Block2(Box::new([
                    self.star_inward(a),
                    self.star_inward(b),
                    self.star_inward(c),
                    self.star_inward(d),
                ]))
            }
        }
    }

    /// Adjoint of an expression whose own adjoints are already moved inward.
    fn star(&self, y: OpExpr) -> OpExpr {
        let symbolic = |y: OpExpr| OpExpr::Adjoint(Box::new(y));
        match y {
            OpExpr::Identity(_) | OpExpr::Zero(_) => y,
            OpExpr::Atom(ref a) => {
                if self.has(a, AtomFlags::SELF_ADJOINT) {
                    y
                } else {
                    match self.facts.atoms.adjoint_partner(a) {
                        Some(p) => OpExpr::Atom(p),
                        None => symbolic(y),
                    }
                }
            }
            OpExpr::Adjoint(ref z) => {
                let p = self.props(z);
                if p.closed && p.dense {
                    z.as_ref().clone()
                } else {
                    symbolic(y)
                }
            }
            OpExpr::Inverse(ref z) => match z.as_ref() {
                OpExpr::Atom(a) if self.has(a, AtomFlags::SELF_ADJOINT | AtomFlags::INJECTIVE) => y,
                _ => symbolic(y),
            },
            OpExpr::Compose(ref a, ref b) => {
                let (pa, pb) = (self.props(a), self.props(b));
                if (pa.bounded && pb.dense) || (pb.invertible && pa.dense) {
                    OpExpr::Compose(
                        Box::new(self.star(b.as_ref().clone())),
                        Box::new(self.star(a.as_ref().clone())),
                    )
                } else {
                    symbolic(y)
                }
            }
            OpExpr::Power(ref x, n) => {
                if self.props(x).bounded {
                    OpExpr::Power(Box::new(self.star(x.as_ref().clone())), n)
                } else {
                    symbolic(y)
                }
            }
            OpExpr::Block2(ref entries) => {
                let Some((i, j)) = monomial_slots(entries) else {
                    return symbolic(y);
                };
                let ok = [i, j].iter().all(|&k| {
                    let p = self.props(&entries[k]);
                    p.closed && p.dense
                });
                if !ok {
                    return symbolic(y);
                }
                let mut out = entries.as_ref().clone();
                if i == 0 {
                    out[0] = self.star(entries[0].clone());
                    out[3] = self.star(entries[3].clone());
                } else {
                    out[1] = self.star(entries[2].clone());
                    out[2] = self.star(entries[1].clone());
                }
                OpExpr::Block2(Box::new(out))
            }
        }
    }

    fn eval(&self, e: &OpExpr) -> Result<Mat, String> {
        match e {
            OpExpr::Atom(a) => {
                if self.facts.atoms.shape(a) != SpaceShape::Base {
                    return Err(format!("atom `{a}` is not a base-space operator"));
                }
                Ok(Mat {
                    shape: SpaceShape::Base,
                    rows: vec![Entry {
                        col: 0,
                        zero: false,
                        factors: vec![Factor::plain(a.clone())],
                    }],
                })
            }
            OpExpr::Identity(shape) | OpExpr::Zero(shape) => Ok(Mat {
                shape: shape.clone(),
                rows: (0..shape.dim())
                    .map(|col| Entry {
                        col,
                        zero: matches!(e, OpExpr::Zero(_)),
                        factors: Vec::new(),
                    })
                    .collect(),
            }),
            OpExpr::Compose(a, b) => self.eval(a)?.then(&self.eval(b)?),
            OpExpr::Power(x, n) => {
                let base = self.eval(x)?;
                if *n == 0 {
                    return Err("zero exponent".into());
                }
                let mut acc = base.clone();
                for _ in 1..*n {
                    acc = acc.then(&base)?;
                }
                Ok(acc)
            }
            OpExpr::Block2(entries) => {
                let (i, j) = monomial_slots(entries).ok_or("block is not monomial")?;
                let top = self.eval(&entries[i])?;
                let bottom = self.eval(&entries[j])?;
                if top.shape != bottom.shape {
                    return Err("block entries act on different spaces".into());
                }
                let half = top.rows.len();
                let (top_shift, bottom_shift) = if i == 0 { (0, half) } else { (half, 0) };
                let mut rows = Vec::with_capacity(2 * half);
                for e in &top.rows {
                    rows.push(Entry {
                        col: e.col + top_shift,
                        ..e.clone()
                    });
                }
                for e in &bottom.rows {
                    rows.push(Entry {
                        col: e.col + bottom_shift,
                        ..e.clone()
                    });
                }
                Ok(Mat {
                    shape: SpaceShape::Pair(top.shape.clone().into(), top.shape.into()),
                    rows,
                })
            }
            OpExpr::Inverse(x) => {
                let m = self.eval(x)?;
                let mut rows: Vec<Option<Entry>> = vec![None; m.rows.len()];
                for (r, e) in m.rows.iter().enumerate() {
                    if e.zero {
                        return Err("zero has no inverse".into());
                    }
                    let factors = e
                        .factors
                        .iter()
                        .rev()
                        .map(|f| self.invert(f))
                        .collect::<Result<Vec<_>, _>>()?;
                    rows[e.col] = Some(Entry {
                        col: r,
                        zero: false,
                        factors,
                    });
                }
                Ok(Mat {
                    shape: m.shape,
                    rows: rows.into_iter().map(|r| r.expect("permutation")).collect(),
                })
            }
            OpExpr::Adjoint(_) => match self.star_inward(e) {
                OpExpr::Adjoint(inner) => match *inner {
                    OpExpr::Atom(a) if self.facts.atoms.shape(&a) == SpaceShape::Base => Ok(Mat {
                        shape: SpaceShape::Base,
                        rows: vec![Entry {
                            col: 0,
                            zero: false,
                            factors: vec![Factor {
                                atom: a,
                                adjoint: true,
                                inverse: false,
                            }],
                        }],
                    }),
                    _ => Err("adjoint cannot be resolved".into()),
                },
                pushed => self.eval(&pushed),
            },
        }
    }

    fn invert(&self, f: &Factor) -> Result<Factor, String> {
        match (f.adjoint, f.inverse) {
            (_, true) => Ok(Factor {
                inverse: false,
                ..f.clone()
            }),
            (true, false) => Err(format!("`{f}` has no known inverse")),
            (false, false) => {
                if let Some(p) = self.facts.atoms.inverse_partner(&f.atom) {
                    Ok(Factor::plain(p))
                } else if self.has(&f.atom, AtomFlags::INJECTIVE) {
                    Ok(Factor {
                        inverse: true,
                        ..f.clone()
                    })
                } else {
                    Err(format!("`{f}` is not injective"))
                }
            }
        }
    }
}

/// Slots holding the two pattern entries of a diagonal (0, 3) or
/// off-diagonal (1, 2) block.
fn monomial_slots(entries: &[OpExpr; 4]) -> Option<(usize, usize)> {
    let zero = |k: usize| matches!(entries[k], OpExpr::Zero(_));
    if zero(1) && zero(2) {
        Some((0, 3))
    } else if zero(0) && zero(3) {
        Some((1, 2))
    } else {
        None
    }
}
