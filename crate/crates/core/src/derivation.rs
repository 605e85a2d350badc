//! Derivation trees: named rule applications over structured judgments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::OpExpr;
use crate::domain::{DomainSet, Verdict};
use crate::error::{Error, Result};
use crate::monomial::{Chain, MonomialMatrix};

macro_rules! rules {
    ($($variant:ident => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum Rule {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl Rule {
            pub const ALL: &'static [Rule] = &[$(Rule::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Rule::$variant => $name,)*
                }
            }
        }
    };
}

rules! {
    Refl => "REFL",
    Trans => "TRANS",
    CongInt => "CONG-INT",
    CongSum => "CONG-SUM",
    CongPre => "CONG-PRE",
    IntTriv => "S-INT-TRIV",
    IntWhole => "S-INT-WHOLE",
    FactMeet => "FACT-MEET",
    PreComp => "S-PRE-COMP",
    PreTriv => "S-PRE-TRIV",
    PreRange => "S-PRE-RANGE",
    PreWhole => "S-PRE-WHOLE",
    KerInj => "S-KER-INJ",
    SumTriv => "S-SUM-TRIV",
    RangeFact => "RANGE-FACT",
    RangeLink => "RANGE-LINK",
    DomAtom => "D-ATOM",
    DomId => "D-ID",
    DomZero => "D-ZERO",
    DomComp => "D-COMP",
    DomCompWhole => "D-COMP-WHOLE",
    FactMatch => "FACT-MATCH",
    DomSimp => "D-SIMP",
    DomMono => "D-MONO",
    MatrixSimp => "MD-SIMP",
    DomNorm => "D-NORM",
    InjFlag => "INJ-FLAG",
    InjInv => "INJ-INV",
    InjId => "INJ-ID",
    InjComp => "INJ-COMP",
    InjBlock => "INJ-BLOCK",
    InjNorm => "INJ-NORM",
    DenseWhole => "DENSE-WHOLE",
    DenseFlag => "DENSE-FLAG",
    DenseAxiom => "DENSE-AXIOM",
    DenseSum => "DENSE-SUM",
    NonZeroDense => "NZ-DENSE",
    NonZeroSumLeft => "NZ-SUM-L",
    NonZeroSumRight => "NZ-SUM-R",
    ClassTrivial => "V-TRIV",
    ClassDense => "V-DENSE",
    ClassNonTrivial => "V-NONTRIV",
    ClassUnknown => "V-UNKNOWN",
    Verdict => "VERDICT",
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Judgment {
    /// `lhs = rhs` as sets.
    SetEq { lhs: DomainSet, rhs: DomainSet },
    /// `dom(chain) = set`.
    Domain { chain: Chain, set: DomainSet },
    MatrixDomain { matrix: MonomialMatrix, set: DomainSet },
    ExprDomain { expr: OpExpr, set: DomainSet },
    Injective { chain: Chain },
    MatrixInjective { matrix: MonomialMatrix },
    ExprInjective { expr: OpExpr },
    Dense { set: DomainSet },
    NonZero { set: DomainSet },
    Classified { set: DomainSet, verdict: Verdict },
    Verdict {
        expr: OpExpr,
        normal: MonomialMatrix,
        verdict: Verdict,
    },
}

impl Judgment {
    /// The set a domain-valued judgment concludes, if any.
    pub fn domain_set(&self) -> Option<&DomainSet> {
        match self {
            Judgment::Domain { set, .. }
            | Judgment::MatrixDomain { set, .. }
            | Judgment::ExprDomain { set, .. } => Some(set),
            _ => None,
        }
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgment::SetEq { lhs, rhs } => write!(f, "{lhs} = {rhs}"),
            Judgment::Domain { chain, set } => write!(f, "dom({chain}) = {set}"),
            Judgment::MatrixDomain { matrix, set } => write!(f, "dom({matrix}) = {set}"),
            Judgment::ExprDomain { expr, set } => write!(f, "dom({expr}) = {set}"),
            Judgment::Injective { chain } => write!(f, "injective({chain})"),
            Judgment::MatrixInjective { matrix } => write!(f, "injective({matrix})"),
            Judgment::ExprInjective { expr } => write!(f, "injective({expr})"),
            Judgment::Dense { set } => write!(f, "dense({set})"),
            Judgment::NonZero { set } => write!(f, "nonzero({set})"),
            Judgment::Classified { set, verdict } => write!(f, "{set} is {verdict}"),
            Judgment::Verdict {
                expr,
                normal,
                verdict,
            } => write!(f, "dom({expr}) is {verdict} [normal form {normal}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Judgment,
    pub premises: Vec<Derivation>,
    pub axioms: Vec<String>,
}

impl Derivation {
    pub fn leaf(rule: Rule, conclusion: Judgment) -> Self {
        Derivation {
            rule,
            conclusion,
            premises: Vec::new(),
            axioms: Vec::new(),
        }
    }

    pub fn node(rule: Rule, conclusion: Judgment, premises: Vec<Derivation>) -> Self {
        Derivation {
            rule,
            conclusion,
            premises,
            axioms: Vec::new(),
        }
    }

    pub fn axiom(rule: Rule, conclusion: Judgment, axiom: String) -> Self {
        Derivation {
            rule,
            conclusion,
            premises: Vec::new(),
            axioms: vec![axiom],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn nodes(&self) -> Vec<&Derivation> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.premises.iter().rev());
        }
        out
    }

    /// Mutable node by pre-order index.
    pub fn node_mut(&mut self, index: usize) -> Option<&mut Derivation> {
        fn walk<'a>(d: &'a mut Derivation, index: &mut usize) -> Option<&'a mut Derivation> {
            if *index == 0 {
                return Some(d);
            }
            *index -= 1;
            for p in d.premises.iter_mut() {
                if let Some(found) = walk(p, index) {
                    return Some(found);
                }
            }
            None
        }
        let mut index = index;
        walk(self, &mut index)
    }

    /// Every axiom identifier cited anywhere in the tree, in pre-order.
    pub fn cited_axioms(&self) -> Vec<&str> {
        self.nodes()
            .into_iter()
            .flat_map(|n| n.axioms.iter().map(String::as_str))
            .collect()
    }
}

/// Exported node layout.
#[derive(Debug, Serialize)]
struct TraceNode {
    rule: &'static str,
    conclusion: String,
    premises: Vec<TraceNode>,
    axioms: Vec<String>,
}

impl From<&Derivation> for TraceNode {
    fn from(d: &Derivation) -> Self {
        TraceNode {
            rule: d.rule.as_str(),
            conclusion: d.conclusion.to_string(),
            premises: d.premises.iter().map(TraceNode::from).collect(),
            axioms: d.axioms.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Json,
    Markdown,
}

impl TraceFormat {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "json" => Some(TraceFormat::Json),
            "md" | "markdown" => Some(TraceFormat::Markdown),
            _ => None,
        }
    }
}

pub fn to_json(d: &Derivation) -> String {
    serde_json::to_string_pretty(&TraceNode::from(d)).expect("trace nodes serialize")
}

pub fn to_markdown(d: &Derivation) -> String {
    fn walk(d: &Derivation, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str("- `");
        out.push_str(d.rule.as_str());
        out.push_str("` ");
        out.push_str(&d.conclusion.to_string());
        if !d.axioms.is_empty() {
            out.push_str(" [axioms: ");
            out.push_str(&d.axioms.join("; "));
            out.push(']');
        }
        out.push('\n');
        for p in &d.premises {
            walk(p, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(d, 0, &mut out);
    out
}

/// Serializes a derivation that has already passed the checker. `None`
/// stands for a missing derivation and is always rejected.
pub fn export_trace(
    d: Option<&Derivation>,
    facts: &crate::facts::FactBase,
    format: TraceFormat,
) -> Result<String> {
    let d = d.ok_or_else(|| Error::UnverifiedDerivation("empty derivation".into()))?;
    crate::checker::verify_derivation(d, facts)
        .map_err(|failure| Error::UnverifiedDerivation(failure.to_string()))?;
    Ok(match format {
        TraceFormat::Json => to_json(d),
        TraceFormat::Markdown => to_markdown(d),
    })
}
