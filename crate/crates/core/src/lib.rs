//! Symbolic domain calculus for compositions and block matrices of
//! unbounded operators, with checkable derivations and a numeric probe.

pub mod ast;
pub mod checker;
pub mod derivation;
pub mod domain;
pub mod error;
pub mod facts;
pub mod infer;
pub mod monomial;
pub mod normalize;
pub mod parser;
pub mod probe;
pub mod scenario;

pub use ast::{AtomDecl, AtomFlags, AtomId, AtomTable, OpExpr, SpaceShape};
pub use checker::{verify, verify_derivation, CheckFailure};
pub use derivation::{export_trace, Derivation, Judgment, Rule, TraceFormat};
pub use domain::{DomainSet, Verdict};
pub use error::{Error, Result};
pub use facts::{load_facts, Axiom, FactBase};
pub use infer::{domain_of, injectivity_of, simplify_domain, verdict_of, Injectivity};
pub use monomial::{Chain, Factor, MonomialMatrix};
pub use normalize::{normalize, push_adjoint};
pub use parser::parse_expr;
