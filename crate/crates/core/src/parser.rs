//! Recursive-descent parser for the operator DSL.
//!
//! ```text
//! expr    := factor { "*" factor }
//! factor  := primary { "'" | "^-1" | "^" nat }
//! primary := ident | unit | "(" expr ")" | "[" expr "," expr ";" expr "," expr "]"
//! unit    := ("I" | "0") [ "@" nat ]
//! ```
//!
//! `*` is composition with the left factor applied last. `I@d` and `0@d` pin
//! the identity or zero to the balanced space of depth `d`; without the
//! annotation the space is inferred from the surrounding expression.

use crate::ast::{AtomId, AtomTable, OpExpr, SpaceShape, MAX_SHAPE_DEPTH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Nat(u32),
    Star,
    Quote,
    Caret,
    Minus,
    At,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Nat(n) => format!("`{n}`"),
            Tok::Star => "`*`".into(),
            Tok::Quote => "`'`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Minus => "`-`".into(),
            Tok::At => "`@`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '*' => Tok::Star,
            '\'' => Tok::Quote,
            '^' => Tok::Caret,
            '-' => Tok::Minus,
            '@' => Tok::At,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '0'..='9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let digits = &text[start..i];
                let n = digits.parse::<u32>().map_err(|_| Error::Parse {
                    pos: start,
                    expected: "a number below 2^32".into(),
                    found: digits.into(),
                })?;
                out.push((start, Tok::Nat(n)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            other => {
                return Err(Error::Parse {
                    pos: start,
                    expected: "an operator expression".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

#[derive(Debug, Clone)]
enum UnitKind {
    Identity,
    Zero,
}

/// Parse tree before shape inference.
#[derive(Debug, Clone)]
enum Raw {
    Atom(String),
    Unit(UnitKind, Option<usize>),
    Adjoint(Box<Raw>),
    Inverse(Box<Raw>),
    Power(Box<Raw>, u32),
    Compose(Box<Raw>, Box<Raw>),
    Block(Box<[Raw; 4]>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.at].1.clone();
        if tok != Tok::End {
            self.at += 1;
        }
        tok
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    fn expr(&mut self) -> Result<Raw> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.factor()?;
            lhs = Raw::Compose(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Raw> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Quote => {
                    self.bump();
                    e = Raw::Adjoint(Box::new(e));
                }
                Tok::Caret => {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Minus => {
                            self.bump();
                            if *self.peek() != Tok::Nat(1) {
                                return self.fail("`1` after `^-`");
                            }
                            self.bump();
                            e = Raw::Inverse(Box::new(e));
                        }
                        Tok::Nat(0) => return self.fail("a positive exponent"),
                        Tok::Nat(n) => {
                            self.bump();
                            if n > 1 {
                                e = Raw::Power(Box::new(e), n);
                            }
                        }
                        _ => return self.fail("`-1` or a positive exponent after `^`"),
                    }
                }
                _ => return Ok(e),
            }
        }
    }

    fn unit_depth(&mut self) -> Result<Option<usize>> {
        if *self.peek() != Tok::At {
            return Ok(None);
        }
        self.bump();
        match self.peek().clone() {
            Tok::Nat(d) if (d as usize) <= MAX_SHAPE_DEPTH => {
                self.bump();
                Ok(Some(d as usize))
            }
            _ => self.fail("a shape depth of at most 16 after `@`"),
        }
    }

    fn primary(&mut self) -> Result<Raw> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                if name == "I" {
                    Ok(Raw::Unit(UnitKind::Identity, self.unit_depth()?))
                } else {
                    Ok(Raw::Atom(name))
                }
            }
            Tok::Nat(0) => {
                self.bump();
                Ok(Raw::Unit(UnitKind::Zero, self.unit_depth()?))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let e11 = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let e12 = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                let e21 = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let e22 = self.expr()?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Raw::Block(Box::new([e11, e12, e21, e22])))
            }
            _ => self.fail("an identifier, `I`, `0`, `(` or `[`"),
        }
    }
}

/// Shape determinable without context.
fn synth(raw: &Raw, atoms: &AtomTable) -> Option<SpaceShape> {
    match raw {
        Raw::Atom(name) => Some(atoms.shape(&AtomId::new(name))),
        Raw::Unit(_, depth) => depth.map(SpaceShape::balanced),
        Raw::Adjoint(e) | Raw::Inverse(e) | Raw::Power(e, _) => synth(e, atoms),
        Raw::Compose(a, b) => synth(a, atoms).or_else(|| synth(b, atoms)),
        Raw::Block(entries) => entries
            .iter()
            .find_map(|e| synth(e, atoms))
            .map(SpaceShape::pair),
    }
}

fn infer(raw: &Raw, expected: Option<&SpaceShape>, atoms: &AtomTable) -> Result<OpExpr> {
    let target = expected.cloned().or_else(|| synth(raw, atoms));
    let check = |found: SpaceShape| -> Result<SpaceShape> {
        match &target {
            Some(t) if *t != found => Err(Error::ShapeMismatch(format!(
                "expected an operator on {t}, found one on {found}"
            ))),
            _ => Ok(found),
        }
    };
    Ok(match raw {
        Raw::Atom(name) => {
            let id = AtomId::new(name);
            check(atoms.shape(&id))?;
            OpExpr::Atom(id)
        }
        Raw::Unit(kind, depth) => {
            let shape = match depth {
                Some(d) => check(SpaceShape::balanced(*d))?,
                None => target.clone().unwrap_or(SpaceShape::Base),
            };
            match kind {
                UnitKind::Identity => OpExpr::Identity(shape),
                UnitKind::Zero => OpExpr::Zero(shape),
            }
        }
        Raw::Adjoint(e) => infer(e, target.as_ref(), atoms)?.adjoint(),
        Raw::Inverse(e) => infer(e, target.as_ref(), atoms)?.inverse(),
        Raw::Power(e, n) => OpExpr::Power(Box::new(infer(e, target.as_ref(), atoms)?), *n),
        Raw::Compose(a, b) => OpExpr::compose(
            infer(a, target.as_ref(), atoms)?,
            infer(b, target.as_ref(), atoms)?,
        ),
        Raw::Block(entries) => {
            let half = match &target {
                Some(SpaceShape::Base) => {
                    return Err(Error::ShapeMismatch(
                        "a block matrix cannot act on the base space".into(),
                    ))
                }
                Some(shape) => shape.half().cloned(),
                None => Some(SpaceShape::Base),
            };
            let [a, b, c, d] = entries.as_ref();
            OpExpr::block(
                infer(a, half.as_ref(), atoms)?,
                infer(b, half.as_ref(), atoms)?,
                infer(c, half.as_ref(), atoms)?,
                infer(d, half.as_ref(), atoms)?,
            )
        }
    })
}

/// Parses DSL text into a shape-checked expression. Atoms are looked up in
/// `atoms` for their shape; unknown atoms act on the base space.
pub fn parse_expr(text: &str, atoms: &AtomTable) -> Result<OpExpr> {
    let mut parser = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let raw = parser.expr()?;
    if *parser.peek() != Tok::End {
        return parser.fail("`*` or end of input");
    }
    let expr = infer(&raw, None, atoms)?;
    expr.shape_of(atoms)?;
    Ok(expr)
}
