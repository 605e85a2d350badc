//! Domain computation, simplification and verdicts, each with a derivation.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::ast::{AtomFlags, OpExpr};
use crate::derivation::{Derivation, Judgment, Rule};
use crate::domain::{DomainSet, Verdict};
use crate::error::{Error, Result};
use crate::facts::{Axiom, DomainRhs, FactBase};
use crate::monomial::{Chain, Factor, MonomialMatrix};
use crate::normalize::normalize;

/// Chains up to this length are searched over every binary grouping;
/// longer ones only split off their first or last factor.
pub const MAX_REGROUP_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injectivity {
    Yes,
    Unknown,
}

/// A set together with a proof that it equals the set we started from.
#[derive(Debug, Clone)]
pub struct Simplified {
    pub set: DomainSet,
    /// `SetEq { lhs: original, rhs: set }`, or `None` when nothing changed.
    pub proof: Option<Derivation>,
}

#[derive(Debug, Clone)]
pub struct MatrixVerdict {
    pub verdict: Verdict,
    pub set: DomainSet,
    pub domain: Derivation,
    pub class: Derivation,
}

#[derive(Debug, Clone)]
struct ChainDomain {
    set: DomainSet,
    proof: Derivation,
    verdict: Verdict,
}

fn set_eq(lhs: DomainSet, rhs: DomainSet) -> Judgment {
    Judgment::SetEq { lhs, rhs }
}

fn refl(s: &DomainSet) -> Derivation {
    Derivation::leaf(Rule::Refl, set_eq(s.clone(), s.clone()))
}

fn plain_atom(f: &Factor) -> Option<&crate::ast::AtomId> {
    f.is_plain().then_some(&f.atom)
}

/// Chains two optional equality proofs `a = b` and `b = c` into `a = c`.
fn trans(first: Option<Derivation>, second: Option<Derivation>) -> Option<Derivation> {
    match (first, second) {
        (None, d) | (d, None) => d,
        (Some(a), Some(b)) => {
            let (Judgment::SetEq { lhs, .. }, Judgment::SetEq { rhs, .. }) =
                (&a.conclusion, &b.conclusion)
            else {
                unreachable!("trans only combines set equalities");
            };
            let conclusion = set_eq(lhs.clone(), rhs.clone());
            Some(Derivation::node(Rule::Trans, conclusion, vec![a, b]))
        }
    }
}

/// Stateless query helpers over one fact base, plus a per-query memo of
/// chain domains.
pub struct Engine<'a> {
    facts: &'a FactBase,
    memo: HashMap<Chain, ChainDomain>,
    simplified: RefCell<HashMap<DomainSet, Simplified>>,
}

impl<'a> Engine<'a> {
    pub fn new(facts: &'a FactBase) -> Self {
        Engine {
            facts,
            memo: HashMap::new(),
            simplified: RefCell::new(HashMap::new()),
        }
    }

    fn flags(&self, f: &Factor) -> AtomFlags {
        match plain_atom(f) {
            Some(id) => self.facts.atoms.flags(id),
            None => AtomFlags::empty(),
        }
    }

    // ---- structural domains -------------------------------------------

    /// `dom(chain)` by structural recursion, peeling the last-applied factor.
    pub fn structural_domain(&self, chain: &Chain) -> (DomainSet, Derivation) {
        if chain.zero {
            let inner = Chain::of(chain.factors.clone());
            let (set, proof) = self.structural_domain(&inner);
            let conclusion = Judgment::Domain {
                chain: chain.clone(),
                set: set.clone(),
            };
            return (set, Derivation::node(Rule::DomZero, conclusion, vec![proof]));
        }
        match chain.len() {
            0 => {
                let set = DomainSet::whole();
                let conclusion = Judgment::Domain {
                    chain: chain.clone(),
                    set: set.clone(),
                };
                (set, Derivation::leaf(Rule::DomId, conclusion))
            }
            1 => self.atom_domain(chain),
            _ => {
                let after = chain.slice(0..1);
                let first = chain.slice(1..chain.len());
                let (sx, dx) = self.structural_domain(&after);
                let (sy, dy) = self.structural_domain(&first);
                compose_domains(chain, &first, sx, dx, sy, dy).0
            }
        }
    }

    fn atom_domain(&self, chain: &Chain) -> (DomainSet, Derivation) {
        let f = &chain.factors[0];
        let set = if self.flags(f).contains(AtomFlags::EVERYWHERE_DEFINED) {
            DomainSet::whole()
        } else {
            DomainSet::DomAtom(f.clone())
        };
        let conclusion = Judgment::Domain {
            chain: chain.clone(),
            set: set.clone(),
        };
        (set, Derivation::leaf(Rule::DomAtom, conclusion))
    }

    /// Unsimplified domain of a normalized expression: the direct sum over
    /// input components of the domain of the chain reading each component.
    pub fn matrix_domain(&self, m: &MonomialMatrix) -> (DomainSet, Derivation) {
        let mut parts = Vec::with_capacity(m.dim());
        let mut proofs = Vec::with_capacity(m.dim());
        for row in m.rows_by_column() {
            let (set, proof) = self.structural_domain(m.chain(row));
            parts.push(set);
            proofs.push(proof);
        }
        let set = DomainSet::direct_sum_of(&parts);
        let conclusion = Judgment::MatrixDomain {
            matrix: m.clone(),
            set: set.clone(),
        };
        (set, Derivation::node(Rule::DomMono, conclusion, proofs))
    }

    // ---- simplification -------------------------------------------------

    pub fn simplify(&self, s: &DomainSet) -> Simplified {
        if let Some(done) = self.simplified.borrow().get(s) {
            return done.clone();
        }
        let result = self.simplify_uncached(s);
        self.simplified.borrow_mut().insert(s.clone(), result.clone());
        result
    }

    fn simplify_uncached(&self, s: &DomainSet) -> Simplified {
        let (current, congruence) = self.simplify_children(s);
        match self.top_step(&current) {
            None => Simplified {
                set: current,
                proof: congruence,
            },
            Some((next, step)) => {
                let rest = self.simplify(&next);
                Simplified {
                    set: rest.set,
                    proof: trans(trans(congruence, Some(step)), rest.proof),
                }
            }
        }
    }

    fn simplify_children(&self, s: &DomainSet) -> (DomainSet, Option<Derivation>) {
        let (rule, rebuilt, proofs) = match s {
            DomainSet::Intersect(a, b) | DomainSet::DirectSum(a, b) => {
                let sa = self.simplify(a);
                let sb = self.simplify(b);
                if sa.proof.is_none() && sb.proof.is_none() {
                    return (s.clone(), None);
                }
                let (rule, rebuilt) = match s {
                    DomainSet::Intersect(..) => {
                        (Rule::CongInt, DomainSet::intersect(sa.set.clone(), sb.set.clone()))
                    }
                    _ => (Rule::CongSum, DomainSet::direct_sum(sa.set.clone(), sb.set.clone())),
                };
                let pa = sa.proof.unwrap_or_else(|| refl(a));
                let pb = sb.proof.unwrap_or_else(|| refl(b));
                (rule, rebuilt, vec![pa, pb])
            }
            DomainSet::Preimage(e, t) => {
                let st = self.simplify(t);
                let Some(proof) = st.proof else {
                    return (s.clone(), None);
                };
                (Rule::CongPre, DomainSet::preimage(e.clone(), st.set), vec![proof])
            }
            _ => return (s.clone(), None),
        };
        let conclusion = set_eq(s.clone(), rebuilt.clone());
        (rebuilt.clone(), Some(Derivation::node(rule, conclusion, proofs)))
    }

    /// One rewrite at the root of an already simplified set.
    fn top_step(&self, s: &DomainSet) -> Option<(DomainSet, Derivation)> {
        let step = |rule: Rule, next: DomainSet, premises: Vec<Derivation>| {
            let conclusion = set_eq(s.clone(), next.clone());
            Some((next, Derivation::node(rule, conclusion, premises)))
        };
        match s {
            DomainSet::Intersect(a, b) => {
                if a.is_trivial() || b.is_trivial() {
                    return step(Rule::IntTriv, DomainSet::Trivial(s.shape()), vec![]);
                }
                if a.is_whole() {
                    return step(Rule::IntWhole, b.as_ref().clone(), vec![]);
                }
                if b.is_whole() {
                    return step(Rule::IntWhole, a.as_ref().clone(), vec![]);
                }
                if let (DomainSet::DomAtom(x), DomainSet::DomAtom(y)) = (a.as_ref(), b.as_ref()) {
                    let (Some(x), Some(y)) = (plain_atom(x), plain_atom(y)) else {
                        return None;
                    };
                    let axiom = self.facts.meet_axiom(x, y)?;
                    let next = DomainSet::trivial();
                    let conclusion = set_eq(s.clone(), next.clone());
                    return Some((
                        next,
                        Derivation::axiom(Rule::FactMeet, conclusion, axiom.id()),
                    ));
                }
                None
            }
            DomainSet::DirectSum(a, b) => {
                if a.is_trivial() && b.is_trivial() {
                    return step(Rule::SumTriv, DomainSet::Trivial(s.shape()), vec![]);
                }
                None
            }
            DomainSet::Preimage(e, t) => {
                if t.is_trivial() {
                    return step(Rule::PreTriv, DomainSet::Kernel(e.clone()), vec![]);
                }
                if t.is_whole() {
                    let (dom, proof) = self.structural_domain(e);
                    return step(Rule::PreWhole, dom, vec![proof]);
                }
                if e.len() >= 2 {
                    let inner = DomainSet::preimage(e.slice(0..1), t.as_ref().clone());
                    let next = DomainSet::preimage(e.slice(1..e.len()), inner);
                    return step(Rule::PreComp, next, vec![]);
                }
                let probe = DomainSet::intersect(DomainSet::Range(e.clone()), t.as_ref().clone());
                let simplified = self.simplify(&probe);
                if simplified.set.is_trivial() {
                    let proof = simplified.proof.expect("a rewrite produced the trivial set");
                    return step(Rule::PreRange, DomainSet::Kernel(e.clone()), vec![proof]);
                }
                None
            }
            DomainSet::Kernel(e) => {
                let proof = self.injective(e)?;
                step(Rule::KerInj, DomainSet::trivial(), vec![proof])
            }
            DomainSet::Range(e) => {
                if e.zero || e.len() != 1 {
                    return None;
                }
                let f = &e.factors[0];
                if let Some(id) = plain_atom(f) {
                    if let Some(axiom @ Axiom::Range { dom_of, .. }) = self.facts.range_axiom(id) {
                        let next = DomainSet::DomAtom(Factor::plain(dom_of.clone()));
                        let conclusion = set_eq(s.clone(), next.clone());
                        return Some((
                            next,
                            Derivation::axiom(Rule::RangeFact, conclusion, axiom.id()),
                        ));
                    }
                    let partner = self.facts.atoms.inverse_partner(id)?;
                    return step(Rule::RangeLink, DomainSet::DomAtom(Factor::plain(partner)), vec![]);
                }
                if f.inverse && !f.adjoint {
                    let next = DomainSet::DomAtom(Factor::plain(f.atom.clone()));
                    return step(Rule::RangeLink, next, vec![]);
                }
                None
            }
            _ => None,
        }
    }

    // ---- injectivity ----------------------------------------------------

    pub fn injective(&self, chain: &Chain) -> Option<Derivation> {
        if chain.zero {
            return None;
        }
        let conclusion = Judgment::Injective {
            chain: chain.clone(),
        };
        match chain.len() {
            0 => Some(Derivation::leaf(Rule::InjId, conclusion)),
            1 => {
                let f = &chain.factors[0];
                if self.flags(f).contains(AtomFlags::INJECTIVE) {
                    Some(Derivation::leaf(Rule::InjFlag, conclusion))
                } else if f.inverse && !f.adjoint {
                    Some(Derivation::leaf(Rule::InjInv, conclusion))
                } else {
                    None
                }
            }
            n => {
                let left = self.injective(&chain.slice(0..1))?;
                let right = self.injective(&chain.slice(1..n))?;
                Some(Derivation::node(Rule::InjComp, conclusion, vec![left, right]))
            }
        }
    }

    pub fn matrix_injective(&self, m: &MonomialMatrix) -> Option<Derivation> {
        let proofs = m
            .chains()
            .iter()
            .map(|c| self.injective(c))
            .collect::<Option<Vec<_>>>()?;
        let conclusion = Judgment::MatrixInjective { matrix: m.clone() };
        Some(Derivation::node(Rule::InjBlock, conclusion, proofs))
    }

    // ---- density and classification -------------------------------------

    fn dense(&self, s: &DomainSet) -> Option<Derivation> {
        let conclusion = Judgment::Dense { set: s.clone() };
        match s {
            DomainSet::Whole(_) => Some(Derivation::leaf(Rule::DenseWhole, conclusion)),
            DomainSet::DomAtom(f) => {
                let id = plain_atom(f)?;
                if let Some(axiom) = self.facts.dense_axiom(id) {
                    Some(Derivation::axiom(Rule::DenseAxiom, conclusion, axiom.id()))
                } else if self.facts.atoms.has(id, AtomFlags::DENSELY_DEFINED) {
                    Some(Derivation::leaf(Rule::DenseFlag, conclusion))
                } else {
                    None
                }
            }
            DomainSet::DirectSum(a, b) => {
                let pa = self.dense(a)?;
                let pb = self.dense(b)?;
                Some(Derivation::node(Rule::DenseSum, conclusion, vec![pa, pb]))
            }
            _ => None,
        }
    }

    fn nonzero(&self, s: &DomainSet) -> Option<Derivation> {
        let conclusion = Judgment::NonZero { set: s.clone() };
        if let Some(dense) = self.dense(s) {
            return Some(Derivation::node(Rule::NonZeroDense, conclusion, vec![dense]));
        }
        if let DomainSet::DirectSum(a, b) = s {
            if let Some(p) = self.nonzero(a) {
                return Some(Derivation::node(Rule::NonZeroSumLeft, conclusion, vec![p]));
            }
            if let Some(p) = self.nonzero(b) {
                return Some(Derivation::node(Rule::NonZeroSumRight, conclusion, vec![p]));
            }
        }
        None
    }

    /// The most specific verdict the rules establish for an already
    /// simplified set.
    pub fn classify(&self, s: &DomainSet) -> (Verdict, Derivation) {
        let judged = |verdict| Judgment::Classified {
            set: s.clone(),
            verdict,
        };
        if s.is_trivial() {
            return (
                Verdict::Trivial,
                Derivation::leaf(Rule::ClassTrivial, judged(Verdict::Trivial)),
            );
        }
        if let Some(p) = self.dense(s) {
            return (
                Verdict::Dense,
                Derivation::node(Rule::ClassDense, judged(Verdict::Dense), vec![p]),
            );
        }
        if let Some(p) = self.nonzero(s) {
            return (
                Verdict::NonTrivial,
                Derivation::node(Rule::ClassNonTrivial, judged(Verdict::NonTrivial), vec![p]),
            );
        }
        (
            Verdict::Unknown,
            Derivation::leaf(Rule::ClassUnknown, judged(Verdict::Unknown)),
        )
    }

    // ---- grouping search -------------------------------------------------

    /// Best domain of a chain over all binary groupings. Sub-chains are
    /// memoized, so every interval is solved once.
    fn best_domain(&mut self, chain: &Chain) -> Result<ChainDomain> {
        if let Some(found) = self.memo.get(chain) {
            return Ok(found.clone());
        }
        let result = self.solve_chain(chain)?;
        self.memo.insert(chain.clone(), result.clone());
        Ok(result)
    }

    fn solve_chain(&mut self, chain: &Chain) -> Result<ChainDomain> {
        if chain.zero {
            let inner = self.best_domain(&Chain::of(chain.factors.clone()))?;
            let conclusion = Judgment::Domain {
                chain: chain.clone(),
                set: inner.set.clone(),
            };
            return Ok(ChainDomain {
                proof: Derivation::node(Rule::DomZero, conclusion, vec![inner.proof]),
                ..inner
            });
        }
        if chain.len() <= 1 {
            let (set, proof) = self.structural_domain(chain);
            let verdict = self.classify(&set).0;
            return Ok(ChainDomain {
                set,
                proof,
                verdict,
            });
        }

        let mut candidates: Vec<(DomainSet, Derivation)> = Vec::new();
        if let Some(axiom @ Axiom::Domain { rhs, .. }) = self.facts.domain_axiom(chain) {
            let set = match rhs {
                DomainRhs::Trivial => DomainSet::trivial(),
                DomainRhs::DomOf(a) => DomainSet::DomAtom(Factor::plain(a.clone())),
            };
            let conclusion = Judgment::Domain {
                chain: chain.clone(),
                set: set.clone(),
            };
            candidates.push((set, Derivation::axiom(Rule::FactMatch, conclusion, axiom.id())));
        }
        let splits: Vec<usize> = if chain.len() <= MAX_REGROUP_LEN {
            (1..chain.len()).collect()
        } else {
            vec![1, chain.len() - 1]
        };
        for split in splits {
            let after = chain.slice(0..split);
            let first = chain.slice(split..chain.len());
            let rx = self.best_domain(&after)?;
            let ry = self.best_domain(&first)?;
            let ((raw, proof), needs_simplify) =
                compose_domains(chain, &first, rx.set, rx.proof, ry.set, ry.proof);
            if !needs_simplify {
                candidates.push((raw, proof));
                continue;
            }
            let simplified = self.simplify(&raw);
            match simplified.proof {
                None => candidates.push((raw, proof)),
                Some(eq) => {
                    let conclusion = Judgment::Domain {
                        chain: chain.clone(),
                        set: simplified.set.clone(),
                    };
                    candidates.push((
                        simplified.set,
                        Derivation::node(Rule::DomSimp, conclusion, vec![proof, eq]),
                    ));
                }
            }
        }

        let mut best: Option<ChainDomain> = None;
        let mut seen: Vec<Verdict> = Vec::new();
        for (set, proof) in candidates {
            let verdict = self.classify(&set).0;
            if let Some(clash) = seen.iter().find(|v| v.contradicts(verdict)) {
                return Err(Error::ContradictionDetected {
                    chain: chain.to_string(),
                    detail: format!("one grouping gives {clash}, another {verdict}"),
                });
            }
            seen.push(verdict);
            let better = best
                .as_ref()
                .is_none_or(|b| verdict.specificity() > b.verdict.specificity());
            if better {
                best = Some(ChainDomain {
                    set,
                    proof,
                    verdict,
                });
            }
        }
        Ok(best.expect("a chain of length >= 2 has at least one grouping"))
    }

    /// Verdicts of every grouping of `chain`, for consistency checks.
    pub fn grouping_verdicts(&mut self, chain: &Chain) -> Result<Vec<Verdict>> {
        let mut out = Vec::new();
        for split in 1..chain.len() {
            let rx = self.best_domain(&chain.slice(0..split))?;
            let ry = self.best_domain(&chain.slice(split..chain.len()))?;
            let first = chain.slice(split..chain.len());
            let ((raw, _), _) = compose_domains(chain, &first, rx.set, rx.proof, ry.set, ry.proof);
            let set = self.simplify(&raw).set;
            out.push(self.classify(&set).0);
        }
        Ok(out)
    }

    /// Verdict for an already normalized expression.
    /// Returns the verdict, the simplified domain, the proof of the domain and
    /// the classification proof.
    pub fn matrix_verdict(&mut self, m: &MonomialMatrix) -> Result<MatrixVerdict> {
        let mut parts = Vec::with_capacity(m.dim());
        let mut proofs = Vec::with_capacity(m.dim());
        for row in m.rows_by_column() {
            let solved = self.best_domain(m.chain(row))?;
            parts.push(solved.set);
            proofs.push(solved.proof);
        }
        let raw = DomainSet::direct_sum_of(&parts);
        let mut proof = Derivation::node(
            Rule::DomMono,
            Judgment::MatrixDomain {
                matrix: m.clone(),
                set: raw.clone(),
            },
            proofs,
        );
        let simplified = self.simplify(&raw);
        if let Some(eq) = simplified.proof {
            proof = Derivation::node(
                Rule::MatrixSimp,
                Judgment::MatrixDomain {
                    matrix: m.clone(),
                    set: simplified.set.clone(),
                },
                vec![proof, eq],
            );
        }
        let (verdict, class) = self.classify(&simplified.set);
        Ok(MatrixVerdict {
            verdict,
            set: simplified.set,
            domain: proof,
            class,
        })
    }
}

/// `dom(X ∘ Y)` from `dom X` and `dom Y`. The flag is false when the result
/// needs no further simplification.
fn compose_domains(
    chain: &Chain,
    first: &Chain,
    sx: DomainSet,
    dx: Derivation,
    sy: DomainSet,
    dy: Derivation,
) -> ((DomainSet, Derivation), bool) {
    if sx.is_whole() {
        let conclusion = Judgment::Domain {
            chain: chain.clone(),
            set: sy.clone(),
        };
        return ((sy, Derivation::node(Rule::DomCompWhole, conclusion, vec![dx, dy])), false);
    }
    let set = DomainSet::intersect(sy, DomainSet::preimage(first.clone(), sx));
    let conclusion = Judgment::Domain {
        chain: chain.clone(),
        set: set.clone(),
    };
    ((set, Derivation::node(Rule::DomComp, conclusion, vec![dx, dy])), true)
}

/// Domain of `e` computed structurally from its normal form, unsimplified.
pub fn domain_of(e: &OpExpr, facts: &FactBase) -> Result<(DomainSet, Derivation)> {
    let normal = normalize(e, &facts.atoms)?;
    let engine = Engine::new(facts);
    let (set, proof) = engine.matrix_domain(&normal);
    let conclusion = Judgment::ExprDomain {
        expr: e.clone(),
        set: set.clone(),
    };
    Ok((set, Derivation::node(Rule::DomNorm, conclusion, vec![proof])))
}

pub fn simplify_domain(s: &DomainSet, facts: &FactBase) -> (DomainSet, Derivation) {
    let simplified = Engine::new(facts).simplify(s);
    let proof = simplified.proof.unwrap_or_else(|| refl(s));
    (simplified.set, proof)
}

pub fn injectivity_of(e: &OpExpr, facts: &FactBase) -> (Injectivity, Option<Derivation>) {
    let Ok(normal) = normalize(e, &facts.atoms) else {
        return (Injectivity::Unknown, None);
    };
    match Engine::new(facts).matrix_injective(&normal) {
        Some(proof) => {
            let conclusion = Judgment::ExprInjective { expr: e.clone() };
            (
                Injectivity::Yes,
                Some(Derivation::node(Rule::InjNorm, conclusion, vec![proof])),
            )
        }
        None => (Injectivity::Unknown, None),
    }
}

/// Normalizes `e`, searches chain groupings, and returns the most specific
/// verdict about `dom(e)` with its derivation.
pub fn verdict_of(e: &OpExpr, facts: &FactBase) -> Result<(Verdict, Derivation)> {
    let normal = normalize(e, &facts.atoms)?;
    let found = Engine::new(facts).matrix_verdict(&normal)?;
    let conclusion = Judgment::Verdict {
        expr: e.clone(),
        normal,
        verdict: found.verdict,
    };
    let proof = Derivation::node(Rule::Verdict, conclusion, vec![found.domain, found.class]);
    Ok((found.verdict, proof))
}
