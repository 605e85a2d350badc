//! Fact bases: atom declarations plus domain, range and density axioms.
//!
//! Line-oriented text format, `#` starts a comment:
//!
//! ```text
//! atom A { self_adjoint, injective, unbounded }
//! atom J { bounded, everywhere_defined, !densely_defined }   # rejected
//! link inverse A Ai
//! axiom dom(A*B) = trivial
//! axiom dom(B*A) = dom(A)
//! axiom meet dom(A) dom(B) = trivial
//! axiom dense dom(A)
//! axiom range Ai = dom(A)
//! ```

use std::collections::BTreeMap;

use crate::ast::{AtomDecl, AtomFlags, AtomId, AtomTable};
use crate::error::{Error, Result};
use crate::monomial::Chain;
use crate::normalize::normalize;
use crate::parser::parse_expr;

/// Right-hand side of a domain axiom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainRhs {
    Trivial,
    DomOf(AtomId),
}

impl DomainRhs {
    fn describe(&self) -> String {
        match self {
            DomainRhs::Trivial => "trivial".into(),
            DomainRhs::DomOf(a) => format!("dom({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Axiom {
    Domain { chain: Chain, rhs: DomainRhs },
    Meet { first: AtomId, second: AtomId },
    Dense { atom: AtomId },
    Range { atom: AtomId, dom_of: AtomId },
}

impl Axiom {
    /// Canonical identifier, also used as the citation string in
    /// derivations.
    pub fn id(&self) -> String {
        match self {
            Axiom::Domain { chain, rhs } => {
                format!("dom({}) = {}", chain.compact(), rhs.describe())
            }
            Axiom::Meet { first, second } => format!("meet dom({first}) dom({second}) = trivial"),
            Axiom::Dense { atom } => format!("dense dom({atom})"),
            Axiom::Range { atom, dom_of } => format!("range {atom} = dom({dom_of})"),
        }
    }

    fn key(&self) -> String {
        match self {
            Axiom::Domain { chain, .. } => format!("dom({})", chain.compact()),
            Axiom::Meet { first, second } => format!("meet {first} {second}"),
            Axiom::Dense { atom } => format!("dense {atom}"),
            Axiom::Range { atom, .. } => format!("range {atom}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactBase {
    pub atoms: AtomTable,
    axioms: BTreeMap<String, Axiom>,
    notes: BTreeMap<String, String>,
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_atom(&mut self, decl: AtomDecl) -> Result<AtomId> {
        self.atoms.declare_atom(decl)
    }

    /// Adds an axiom; axioms are keyed by their normalized left-hand side
    /// and a key may not be bound to two different right-hand sides.
    pub fn add_axiom(&mut self, axiom: Axiom, note: &str) -> Result<()> {
        let axiom = match axiom {
            Axiom::Meet { first, second } if second < first => Axiom::Meet {
                first: second,
                second: first,
            },
            other => other,
        };
        if let Axiom::Domain { chain, .. } = &axiom {
            if chain.zero || chain.is_empty() {
                return Err(Error::ConflictingAxiom {
                    key: axiom.key(),
                    existing: "structural domain rule".into(),
                    new: axiom.id(),
                });
            }
        }
        let key = axiom.key();
        if let Some(existing) = self.axioms.get(&key) {
            if *existing != axiom {
                return Err(Error::ConflictingAxiom {
                    key,
                    existing: existing.id(),
                    new: axiom.id(),
                });
            }
            return Ok(());
        }
        self.notes.insert(axiom.id(), note.to_string());
        self.axioms.insert(key, axiom);
        Ok(())
    }

    pub fn axioms(&self) -> impl Iterator<Item = &Axiom> {
        self.axioms.values()
    }

    pub fn axiom_count(&self) -> usize {
        self.axioms.len()
    }

    pub fn has_axiom(&self, id: &str) -> bool {
        self.axioms.values().any(|a| a.id() == id)
    }

    pub fn note(&self, id: &str) -> Option<&str> {
        self.notes.get(id).map(String::as_str)
    }

    pub fn domain_axiom(&self, chain: &Chain) -> Option<&Axiom> {
        self.axioms.get(&format!("dom({})", chain.compact()))
    }

    pub fn meet_axiom(&self, a: &AtomId, b: &AtomId) -> Option<&Axiom> {
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        self.axioms.get(&format!("meet {first} {second}"))
    }

    pub fn dense_axiom(&self, atom: &AtomId) -> Option<&Axiom> {
        self.axioms.get(&format!("dense {atom}"))
    }

    pub fn range_axiom(&self, atom: &AtomId) -> Option<&Axiom> {
        self.axioms.get(&format!("range {atom}"))
    }
}

fn line_error(line: usize, message: impl Into<String>) -> Error {
    Error::FactsParse {
        line,
        message: message.into(),
    }
}

/// Strips `dom(` ... `)` around an atom or expression.
fn dom_argument(text: &str) -> Option<&str> {
    text.trim()
        .strip_prefix("dom(")
        .and_then(|rest| rest.strip_suffix(')'))
        .map(str::trim)
}

fn atom_name(text: &str, line: usize) -> Result<AtomId> {
    let name = text.trim();
    let valid = !name.is_empty()
        && name != "I"
        && name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if valid {
        Ok(AtomId::new(name))
    } else {
        Err(line_error(line, format!("`{name}` is not an atom name")))
    }
}

fn parse_atom_decl(rest: &str, line: usize) -> Result<AtomDecl> {
    let (name, body) = rest
        .split_once('{')
        .ok_or_else(|| line_error(line, "expected `atom <id> { flags }`"))?;
    let body = body
        .trim()
        .strip_suffix('}')
        .ok_or_else(|| line_error(line, "missing `}`"))?;
    let id = atom_name(name, line)?;
    let mut flags = AtomFlags::empty();
    let mut excluded = AtomFlags::empty();
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (negated, flag_name) = match item.strip_prefix('!') {
            Some(f) => (true, f.trim()),
            None => (false, item),
        };
        let flag = AtomFlags::from_keyword(flag_name)
            .ok_or_else(|| line_error(line, format!("unknown flag `{flag_name}`")))?;
        if negated {
            excluded |= flag;
        } else {
            flags |= flag;
        }
    }
    Ok(AtomDecl::new(id.as_str(), flags).excluding(excluded))
}

/// Parses the facts format. Atoms must be declared before the lines that
/// link them; domain axioms are normalized with the atoms declared so far.
pub fn load_facts(text: &str) -> Result<FactBase> {
    let mut facts = FactBase::new();
    let mut decls: Vec<AtomDecl> = Vec::new();
    let mut pending: Vec<(usize, String)> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        match keyword {
            "atom" => decls.push(parse_atom_decl(rest, line)?),
            "link" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    ["inverse", a, b] | ["adjoint", a, b] => {
                        let a = atom_name(a, line)?;
                        let b = atom_name(b, line)?;
                        let target = decls
                            .iter_mut()
                            .find(|d| d.id == b)
                            .ok_or_else(|| line_error(line, format!("atom `{b}` is not declared")))?;
                        if parts[0] == "inverse" {
                            target.inverse_of = Some(a.clone());
                        } else {
                            target.adjoint_of = Some(a.clone());
                        }
                        if !decls.iter().any(|d| d.id == a) {
                            return Err(line_error(line, format!("atom `{a}` is not declared")));
                        }
                    }
                    _ => return Err(line_error(line, "expected `link inverse <id> <id>`")),
                }
            }
            "axiom" => pending.push((line, rest.trim().to_string())),
            other => return Err(line_error(line, format!("unknown directive `{other}`"))),
        }
    }

    // Declare targets of links before the atoms that point at them.
    let mut remaining = decls;
    while !remaining.is_empty() {
        let before = remaining.len();
        let mut deferred = Vec::new();
        for decl in remaining {
            let ready = [&decl.inverse_of, &decl.adjoint_of]
                .into_iter()
                .flatten()
                .all(|t| facts.atoms.get(t).is_some() || *t == decl.id);
            if ready {
                facts.declare_atom(decl)?;
            } else {
                deferred.push(decl);
            }
        }
        if deferred.len() == before {
            // Mutual links: declare in order, the atom table resolves both
            // directions.
            for decl in deferred {
                facts.declare_atom(decl)?;
            }
            break;
        }
        remaining = deferred;
    }

    for (line, body) in pending {
        let axiom = parse_axiom(&body, line, &facts)?;
        facts.add_axiom(axiom, &format!("line {line}"))?;
    }
    Ok(facts)
}

fn parse_axiom(body: &str, line: usize, facts: &FactBase) -> Result<Axiom> {
    if let Some(rest) = body.strip_prefix("meet ") {
        let (lhs, rhs) = rest
            .split_once('=')
            .ok_or_else(|| line_error(line, "expected `meet dom(a) dom(b) = trivial`"))?;
        if rhs.trim() != "trivial" {
            return Err(line_error(line, "meet axioms must equal `trivial`"));
        }
        let lhs = lhs.trim();
        let split = lhs
            .find(")")
            .ok_or_else(|| line_error(line, "expected two `dom(..)` terms"))?;
        let first = dom_argument(&lhs[..=split])
            .ok_or_else(|| line_error(line, "expected `dom(<atom>)`"))?;
        let second = dom_argument(&lhs[split + 1..])
            .ok_or_else(|| line_error(line, "expected `dom(<atom>)`"))?;
        return Ok(Axiom::Meet {
            first: atom_name(first, line)?,
            second: atom_name(second, line)?,
        });
    }
    if let Some(rest) = body.strip_prefix("dense ") {
        let atom = dom_argument(rest).ok_or_else(|| line_error(line, "expected `dense dom(<atom>)`"))?;
        return Ok(Axiom::Dense {
            atom: atom_name(atom, line)?,
        });
    }
    if let Some(rest) = body.strip_prefix("range ") {
        let (atom, rhs) = rest
            .split_once('=')
            .ok_or_else(|| line_error(line, "expected `range <atom> = dom(<atom>)`"))?;
        let dom_of = dom_argument(rhs).ok_or_else(|| line_error(line, "expected `dom(<atom>)`"))?;
        return Ok(Axiom::Range {
            atom: atom_name(atom, line)?,
            dom_of: atom_name(dom_of, line)?,
        });
    }
    if body.starts_with("dom(") {
        let (lhs, rhs) = body
            .rsplit_once('=')
            .ok_or_else(|| line_error(line, "expected `dom(<expr>) = ...`"))?;
        let expr_text =
            dom_argument(lhs).ok_or_else(|| line_error(line, "expected `dom(<expr>)`"))?;
        let expr = parse_expr(expr_text, &facts.atoms).map_err(|e| line_error(line, e.to_string()))?;
        let normal = normalize(&expr, &facts.atoms).map_err(|e| line_error(line, e.to_string()))?;
        let chain = normal
            .as_scalar()
            .cloned()
            .ok_or_else(|| line_error(line, "domain axioms must concern base-space operators"))?;
        let rhs = rhs.trim();
        let rhs = if rhs == "trivial" {
            DomainRhs::Trivial
        } else {
            let atom = dom_argument(rhs)
                .ok_or_else(|| line_error(line, "expected `trivial` or `dom(<atom>)`"))?;
            DomainRhs::DomOf(atom_name(atom, line)?)
        };
        return Ok(Axiom::Domain { chain, rhs });
    }
    Err(line_error(line, format!("unrecognized axiom `{body}`")))
}
