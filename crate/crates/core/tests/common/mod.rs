//! Generators and numeric evaluators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use domcalc::derivation::Rule;
use domcalc::{
    AtomDecl, AtomFlags, Chain, Derivation, Factor, FactBase, MonomialMatrix, OpExpr, SpaceShape,
    Verdict,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

pub type CMatrix = DMatrix<Complex64>;

// ---- proptest strategies ---------------------------------------------------

/// Well-shaped expressions on `SpaceShape::balanced(depth)` over `atoms`.
pub fn expr_on(depth: usize, atoms: &'static [&'static str]) -> BoxedStrategy<OpExpr> {
    let shape = SpaceShape::balanced(depth);
    let leaf = if depth == 0 {
        prop_oneof![
            4 => proptest::sample::select(atoms).prop_map(OpExpr::atom),
            1 => Just(OpExpr::Identity(SpaceShape::Base)),
            1 => Just(OpExpr::Zero(SpaceShape::Base)),
        ]
        .boxed()
    } else {
        let inner = expr_on(depth - 1, atoms);
        prop_oneof![
            1 => Just(OpExpr::Identity(shape.clone())),
            1 => Just(OpExpr::Zero(shape.clone())),
            4 => [inner.clone(), inner.clone(), inner.clone(), inner]
                .prop_map(|[a, b, c, d]| OpExpr::block(a, b, c, d)),
        ]
        .boxed()
    };
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| OpExpr::compose(a, b)),
            inner.clone().prop_map(OpExpr::adjoint),
            inner.clone().prop_map(OpExpr::inverse),
            (inner, 2u32..5).prop_map(|(e, n)| OpExpr::Power(Box::new(e), n)),
        ]
    })
    .boxed()
}

/// Monomial expressions (diagonal, off-diagonal and swap blocks) on
/// `balanced(depth)` over plain atoms. Powers only at the outermost level,
/// so chain lengths stay small.
pub fn monomial_expr_on(depth: usize, atoms: &'static [&'static str]) -> BoxedStrategy<OpExpr> {
    monomial_inner(depth, atoms)
        .prop_recursive(2, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| OpExpr::compose(a, b)),
                (inner, 2u32..5).prop_map(|(e, n)| OpExpr::Power(Box::new(e), n)),
            ]
        })
        .boxed()
}

fn monomial_inner(depth: usize, atoms: &'static [&'static str]) -> BoxedStrategy<OpExpr> {
    let leaf = if depth == 0 {
        proptest::sample::select(atoms).prop_map(OpExpr::atom).boxed()
    } else {
        let half = SpaceShape::balanced(depth - 1);
        let inner = monomial_inner(depth - 1, atoms);
        let (h1, h2, h3) = (half.clone(), half.clone(), half);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| OpExpr::diag(a, b, h1.clone())),
            (inner.clone(), inner).prop_map(move |(a, b)| OpExpr::offdiag(a, b, h2.clone())),
            Just(OpExpr::swap(h3)),
        ]
        .boxed()
    };
    leaf.prop_recursive(1, 4, 2, |inner| {
        (inner.clone(), inner).prop_map(|(a, b)| OpExpr::compose(a, b))
    })
    .boxed()
}

// ---- seeded random corpora --------------------------------------------------

pub fn random_chain<R: Rng>(rng: &mut R, atoms: &[&str], max_len: usize) -> Chain {
    let len = rng.gen_range(0..=max_len);
    let factors = (0..len)
        .map(|_| {
            let mut f = Factor::named(atoms.choose(rng).unwrap());
            f.adjoint = rng.gen_bool(0.15);
            f.inverse = rng.gen_bool(0.15);
            f
        })
        .collect();
    Chain {
        zero: rng.gen_bool(0.1),
        factors,
    }
}

pub fn random_monomial<R: Rng>(rng: &mut R, atoms: &[&str]) -> MonomialMatrix {
    let depth = rng.gen_range(0..=3);
    let shape = SpaceShape::balanced(depth);
    let dim = shape.dim();
    let mut cols: Vec<usize> = (0..dim).collect();
    cols.shuffle(rng);
    let chains = (0..dim).map(|_| random_chain(rng, atoms, 3)).collect();
    MonomialMatrix::new(shape, cols, chains).unwrap()
}

/// Random normalizable expression over the atoms of `facts`, built from
/// atoms, inverses of injective atoms, diagonal/off-diagonal blocks, swaps,
/// compositions and powers.
pub fn random_expr<R: Rng>(rng: &mut R, facts: &FactBase, depth: usize, budget: u32) -> OpExpr {
    let names: Vec<String> = facts.atoms.iter().map(|d| d.id.to_string()).collect();
    let injective: Vec<&String> = names
        .iter()
        .filter(|n| facts.atoms.has(&n.as_str().into(), AtomFlags::INJECTIVE))
        .collect();
    random_expr_inner(rng, &names, &injective, depth, budget)
}

/// Like [`random_expr`], without inverses: every subexpression of an
/// expression over bounded, everywhere defined atoms is then bounded and
/// everywhere defined.
pub fn random_bounded_expr<R: Rng>(rng: &mut R, facts: &FactBase, depth: usize, budget: u32) -> OpExpr {
    let names: Vec<String> = facts.atoms.iter().map(|d| d.id.to_string()).collect();
    random_expr_inner(rng, &names, &[], depth, budget)
}

fn random_expr_inner<R: Rng>(
    rng: &mut R,
    names: &[String],
    injective: &[&String],
    depth: usize,
    budget: u32,
) -> OpExpr {
    let leaf = |rng: &mut R| -> OpExpr {
        if depth == 0 {
            match rng.gen_range(0..10) {
                0 if !injective.is_empty() => OpExpr::atom(injective.choose(rng).unwrap()).inverse(),
                1 => OpExpr::atom(names.choose(rng).unwrap()).adjoint(),
                _ => OpExpr::atom(names.choose(rng).unwrap()),
            }
        } else {
            let half = SpaceShape::balanced(depth - 1);
            let a = random_expr_inner(rng, names, injective, depth - 1, budget / 2);
            let b = random_expr_inner(rng, names, injective, depth - 1, budget / 2);
            match rng.gen_range(0..3) {
                0 => OpExpr::diag(a, b, half),
                1 => OpExpr::offdiag(a, b, half),
                _ => OpExpr::swap(half),
            }
        }
    };
    if budget <= 1 {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => {
            let a = random_expr_inner(rng, names, injective, depth, budget / 2);
            let b = random_expr_inner(rng, names, injective, depth, budget / 2);
            OpExpr::compose(a, b)
        }
        1 => match random_expr_inner(rng, names, injective, depth, budget / 2) {
            // No towers of powers: they only make chains long.
            e @ OpExpr::Power(..) => e,
            e => OpExpr::Power(Box::new(e), rng.gen_range(2..5)),
        },
        _ => leaf(rng),
    }
}

// ---- numeric stand-ins --------------------------------------------------------

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let m = random_matrix(rng, n);
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Well-conditioned invertible matrix: identity-dominated.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize, hermitian: bool) -> CMatrix {
    let m = if hermitian {
        random_hermitian(rng, n)
    } else {
        random_matrix(rng, n)
    };
    m * Complex64::new(0.3 / n as f64, 0.0) + CMatrix::identity(n, n)
}

/// Concrete matrices for the atoms of a fact base, consistent with their
/// flags and links: self-adjoint atoms are Hermitian, inverse-linked atoms
/// are matrix inverses of each other, adjoint-linked atoms are conjugate
/// transposes.
pub struct NumericModel {
    pub size: usize,
    pub atoms: BTreeMap<String, CMatrix>,
}

impl NumericModel {
    pub fn new<R: Rng>(rng: &mut R, facts: &FactBase, size: usize) -> Self {
        let mut atoms: BTreeMap<String, CMatrix> = BTreeMap::new();
        // Unlinked atoms first, then the linked ones derived from them.
        for decl in facts.atoms.iter() {
            if decl.inverse_of.is_some() || decl.adjoint_of.is_some() {
                continue;
            }
            let hermitian = decl.effective_flags().contains(AtomFlags::SELF_ADJOINT);
            atoms.insert(decl.id.to_string(), random_invertible(rng, size, hermitian));
        }
        for decl in facts.atoms.iter() {
            if let Some(target) = &decl.inverse_of {
                let m = atoms[target.as_str()].clone().try_inverse().unwrap();
                atoms.insert(decl.id.to_string(), m);
            } else if let Some(target) = &decl.adjoint_of {
                let m = atoms[target.as_str()].adjoint();
                atoms.insert(decl.id.to_string(), m);
            }
        }
        NumericModel { size, atoms }
    }

    fn factor(&self, f: &Factor) -> CMatrix {
        let mut m = self.atoms[f.atom.as_str()].clone();
        if f.adjoint {
            m = m.adjoint();
        }
        if f.inverse {
            m = m.try_inverse().unwrap();
        }
        m
    }

    pub fn chain(&self, c: &Chain) -> CMatrix {
        if c.zero {
            return CMatrix::zeros(self.size, self.size);
        }
        c.factors
            .iter()
            .fold(CMatrix::identity(self.size, self.size), |acc, f| acc * self.factor(f))
    }

    pub fn monomial(&self, m: &MonomialMatrix) -> CMatrix {
        let n = self.size;
        let mut out = CMatrix::zeros(m.dim() * n, m.dim() * n);
        for (r, &c) in m.col_of_row().iter().enumerate() {
            out.view_mut((r * n, c * n), (n, n)).copy_from(&self.chain(m.chain(r)));
        }
        out
    }

    /// Evaluates an expression with matrix operations.
    pub fn expr(&self, e: &OpExpr) -> CMatrix {
        let n = self.size;
        match e {
            OpExpr::Atom(id) => self.atoms[id.as_str()].clone(),
            OpExpr::Identity(s) => CMatrix::identity(s.dim() * n, s.dim() * n),
            OpExpr::Zero(s) => CMatrix::zeros(s.dim() * n, s.dim() * n),
            OpExpr::Adjoint(x) => self.expr(x).adjoint(),
            OpExpr::Inverse(x) => self.expr(x).try_inverse().unwrap(),
            OpExpr::Compose(a, b) => self.expr(a) * self.expr(b),
            OpExpr::Power(x, k) => {
                let m = self.expr(x);
                (1..*k).fold(m.clone(), |acc, _| acc * &m)
            }
            OpExpr::Block2(entries) => {
                let parts: Vec<CMatrix> = entries.iter().map(|x| self.expr(x)).collect();
                let h = parts[0].nrows();
                let mut out = CMatrix::zeros(2 * h, 2 * h);
                for (i, p) in parts.iter().enumerate() {
                    out.view_mut(((i / 2) * h, (i % 2) * h), (h, h)).copy_from(p);
                }
                out
            }
        }
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fact base of `count` bounded, everywhere defined, injective atoms;
/// every third atom is self-adjoint and the last one is the inverse of the
/// one before it, sharing its flags.
pub fn bounded_facts(count: usize) -> FactBase {
    let mut facts = FactBase::new();
    let base = AtomFlags::BOUNDED | AtomFlags::EVERYWHERE_DEFINED | AtomFlags::INJECTIVE;
    for i in 0..count {
        let linked = i + 1 == count && count >= 2;
        let flags = if (if linked { i - 1 } else { i }) % 3 == 0 {
            base | AtomFlags::SELF_ADJOINT
        } else {
            base | AtomFlags::CLOSED | AtomFlags::DENSELY_DEFINED
        };
        let mut decl = AtomDecl::new(&format!("X{i}"), flags);
        if linked {
            decl = decl.inverse_of(&format!("X{}", i - 1));
        }
        facts.declare_atom(decl).unwrap();
    }
    facts
}

// ---- derivation mutations ------------------------------------------------------

/// Corrupts one node of `d`: either swaps its rule for a different one or
/// tampers with the axiom it cites (or makes it cite one). Returns a
/// description of the change.
pub fn mutate<R: Rng>(rng: &mut R, d: &Derivation, facts: &FactBase) -> (Derivation, String) {
    let mut out = d.clone();
    let count = out.nodes().len();
    let index = rng.gen_range(0..count);
    let node = out.node_mut(index).expect("index is in range");
    let description = if rng.gen_bool(0.5) {
        let others: Vec<Rule> = Rule::ALL.iter().copied().filter(|r| *r != node.rule).collect();
        let rule = *others.choose(rng).unwrap();
        let text = format!("node {index}: rule {} -> {}", node.rule, rule);
        node.rule = rule;
        text
    } else {
        let existing: Vec<String> = facts.axioms().map(|a| a.id()).collect();
        let replacement = match existing.iter().filter(|a| !node.axioms.contains(a)).collect::<Vec<_>>().choose(rng) {
            Some(a) if rng.gen_bool(0.5) => (*a).clone(),
            _ => format!("dom(Z{}) = trivial", rng.gen_range(0..1000)),
        };
        let text = format!("node {index}: axioms {:?} -> [{replacement}]", node.axioms);
        if node.axioms.is_empty() || rng.gen_bool(0.3) {
            node.axioms.push(replacement);
        } else {
            let slot = rng.gen_range(0..node.axioms.len());
            node.axioms[slot] = replacement;
        }
        text
    };
    (out, description)
}

/// Checks the monotonicity law on `(power, verdict)` pairs: a nontrivial
/// higher power forbids a trivial lower one.
pub fn check_monotone(verdicts: &[(u32, Verdict)]) -> Result<(), String> {
    for &(n, vn) in verdicts {
        for &(m, vm) in verdicts {
            if m >= n && vm.is_nontrivial() && vn == Verdict::Trivial {
                return Err(format!("power {m} is {vm} but power {n} is {vn}"));
            }
        }
    }
    Ok(())
}
