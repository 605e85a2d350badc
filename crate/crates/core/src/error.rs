use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("atom `{0}` is already declared")]
    DuplicateId(String),
    #[error("inconsistent flags for atom `{id}`: {reason}")]
    InconsistentFlags { id: String, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at byte {pos}: expected {expected}, found {found}")]
    Parse {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("facts file line {line}: {message}")]
    FactsParse { line: usize, message: String },
    #[error("conflicting axiom for {key}: `{existing}` vs `{new}`")]
    ConflictingAxiom {
        key: String,
        existing: String,
        new: String,
    },
    #[error("expression has no monomial normal form: {0}")]
    NonNormalizable(String),
    #[error("contradictory groupings for {chain}: {detail}")]
    ContradictionDetected { chain: String, detail: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{what} out of range: {detail}")]
    OutOfRange { what: String, detail: String },
    #[error("fitting window is degenerate: {underflowed} of {total} samples underflow")]
    DegenerateWindow { underflowed: usize, total: usize },
    #[error("derivation does not verify: {0}")]
    UnverifiedDerivation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
