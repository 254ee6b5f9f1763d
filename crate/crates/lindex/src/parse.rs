//! Expression grammar for `F`, the components of **L**, and PDE coefficients.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := ('-')? atom ('^' uint)?
//! atom   := number | 'z'uint | '|z'uint'|' | '|z|' | '(' expr ')'
//!         | 'exp(' expr ')' | number '/(' expr ')'
//! ```
//!
//! `1/(` is the common case of the last form. Variables are 1-based in the text
//! and 0-based in the trees.

use std::fmt;

use thiserror::Error;

use crate::expr::{Expr, RealExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {span}: {msg}")]
    Syntax { span: Span, msg: String },
    #[error("arity error at {span}: variable z{index} but n = {n}")]
    Arity { span: Span, index: usize, n: usize },
    #[error("domain error at {span}: {msg}")]
    Domain { span: Span, msg: String },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Arity { span, .. }
            | ParseError::Domain { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Num(f64),
    Var(usize),
    AbsVar(usize),
    Norm,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, u32),
    Div(f64, Box<Node>),
    Exp(Box<Node>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn span_at(&self, pos: usize) -> Span {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let col = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        Span { line, col }
    }

    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            span: self.span_at(pos),
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map(|b| format!("'{}'", b as char))
                .unwrap_or("end of input".into());
            self.err(self.pos, format!("expected '{}', found {found}", c as char))
        }
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err(start, "expected an unsigned integer");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err(start, "integer out of range"))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut p = self.pos;
        while p < s.len() && s[p].is_ascii_digit() {
            p += 1;
        }
        if p < s.len() && s[p] == b'.' {
            p += 1;
            while p < s.len() && s[p].is_ascii_digit() {
                p += 1;
            }
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                while q < s.len() && s[q].is_ascii_digit() {
                    q += 1;
                }
                p = q;
            }
        }
        self.pos = p;
        std::str::from_utf8(&s[start..p])
            .unwrap()
            .parse()
            .or_else(|_| self.err(start, "malformed number"))
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let at = self.pos;
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Node {
                    kind: NodeKind::Add(Box::new(lhs), Box::new(rhs)),
                    span: self.span_at(at),
                };
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Node {
                    kind: NodeKind::Sub(Box::new(lhs), Box::new(rhs)),
                    span: self.span_at(at),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let at = self.pos;
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Node {
                    kind: NodeKind::Mul(Box::new(lhs), Box::new(rhs)),
                    span: self.span_at(at),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let at = self.pos;
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                span: self.span_at(at),
            });
        }
        let base = self.atom()?;
        let at = self.pos;
        if self.eat(b'^') {
            let m = self.uint()?;
            let m = u32::try_from(m).or_else(|_| self.err(at, "exponent out of range"))?;
            return Ok(Node {
                kind: NodeKind::Pow(Box::new(base), m),
                span: self.span_at(at),
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return self.err(self.pos, "unexpected end of input"),
        };
        let at = self.pos;
        let span = self.span_at(at);
        match c {
            b'(' => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            b'z' => {
                self.pos += 1;
                let j = self.uint()? as usize;
                Ok(Node {
                    kind: NodeKind::Var(j),
                    span,
                })
            }
            b'|' => {
                self.pos += 1;
                if !self.eat(b'z') {
                    return self.err(self.pos, "expected 'z' after '|'");
                }
                if self.eat(b'|') {
                    return Ok(Node {
                        kind: NodeKind::Norm,
                        span,
                    });
                }
                let j = self.uint()? as usize;
                self.expect(b'|')?;
                Ok(Node {
                    kind: NodeKind::AbsVar(j),
                    span,
                })
            }
            b'e' if self.src[at..].starts_with(b"exp") => {
                self.pos += 3;
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(Node {
                    kind: NodeKind::Exp(Box::new(e)),
                    span,
                })
            }
            b'0'..=b'9' | b'.' => {
                let v = self.number()?;
                let save = self.pos;
                if self.eat(b'/') {
                    if !self.eat(b'(') {
                        return self.err(self.pos, "division is only allowed as 'number/(expr)'");
                    }
                    let e = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Node {
                        kind: NodeKind::Div(v, Box::new(e)),
                        span,
                    });
                }
                self.pos = save;
                Ok(Node {
                    kind: NodeKind::Num(v),
                    span,
                })
            }
            other => self.err(at, format!("unexpected character '{}'", other as char)),
        }
    }
}

/// Parses text into the untyped tree.
pub fn parse_ast(text: &str) -> Result<Node, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let node = p.expr()?;
    if p.peek().is_some() {
        return p.err(p.pos, "trailing input");
    }
    Ok(node)
}

fn check_var(j: usize, n: usize, span: Span) -> Result<usize, ParseError> {
    if j == 0 || j > n {
        return Err(ParseError::Arity { span, index: j, n });
    }
    Ok(j - 1)
}

fn to_complex(node: &Node, n: usize) -> Result<Expr, ParseError> {
    let span = node.span;
    Ok(match &node.kind {
        NodeKind::Num(v) => Expr::real(*v),
        NodeKind::Var(j) => Expr::var(check_var(*j, n, span)?),
        NodeKind::AbsVar(_) | NodeKind::Norm => {
            return Err(ParseError::Domain {
                span,
                msg: "modulus is not analytic; use it only in L components".into(),
            })
        }
        NodeKind::Add(a, b) => to_complex(a, n)? + to_complex(b, n)?,
        NodeKind::Sub(a, b) => to_complex(a, n)? - to_complex(b, n)?,
        NodeKind::Mul(a, b) => to_complex(a, n)? * to_complex(b, n)?,
        NodeKind::Neg(a) => -to_complex(a, n)?,
        NodeKind::Pow(a, m) => Expr::powi(to_complex(a, n)?, *m),
        NodeKind::Div(c, a) => {
            let r = Expr::recip(to_complex(a, n)?);
            if *c == 1.0 {
                r
            } else {
                Expr::real(*c) * r
            }
        }
        NodeKind::Exp(a) => Expr::exp(to_complex(a, n)?),
    })
}

fn to_real(node: &Node, n: usize) -> Result<RealExpr, ParseError> {
    let span = node.span;
    Ok(match &node.kind {
        NodeKind::Num(v) => RealExpr::Const(*v),
        NodeKind::Var(_) => {
            return Err(ParseError::Domain {
                span,
                msg: "complex variable in a real expression; write |zj|".into(),
            })
        }
        NodeKind::AbsVar(j) => RealExpr::AbsVar(check_var(*j, n, span)?),
        NodeKind::Norm => RealExpr::Norm,
        NodeKind::Add(a, b) => RealExpr::add(to_real(a, n)?, to_real(b, n)?),
        NodeKind::Sub(a, b) => RealExpr::sub(to_real(a, n)?, to_real(b, n)?),
        NodeKind::Mul(a, b) => RealExpr::mul(to_real(a, n)?, to_real(b, n)?),
        NodeKind::Neg(a) => RealExpr::Neg(Box::new(to_real(a, n)?)),
        NodeKind::Pow(a, m) => RealExpr::powi(to_real(a, n)?, *m),
        NodeKind::Div(c, a) => {
            let r = RealExpr::recip(to_real(a, n)?);
            if *c == 1.0 {
                r
            } else {
                r.scale(*c)
            }
        }
        NodeKind::Exp(a) => RealExpr::exp(to_real(a, n)?),
    })
}

/// Complex-analytic expression in `z1..zn`.
pub fn parse_complex(text: &str, n: usize) -> Result<Expr, ParseError> {
    Ok(to_complex(&parse_ast(text)?, n)?.fold_affine())
}

/// Real expression in `|z1|..|zn|` and `|z|`.
pub fn parse_real(text: &str, n: usize) -> Result<RealExpr, ParseError> {
    to_real(&parse_ast(text)?, n)
}

/// Either tree, as produced by [`parse_expression`].
#[derive(Clone, Debug, PartialEq)]
pub enum Parsed {
    Complex(Expr),
    Real(RealExpr),
}

/// Parses in the complex grammar, falling back to the real grammar when the text
/// uses moduli.
pub fn parse_expression(text: &str, n: usize) -> Result<Parsed, ParseError> {
    let ast = parse_ast(text)?;
    match to_complex(&ast, n) {
        Ok(e) => Ok(Parsed::Complex(e.fold_affine())),
        Err(ParseError::Domain { .. }) => Ok(Parsed::Real(to_real(&ast, n)?)),
        Err(e) => Err(e),
    }
}
