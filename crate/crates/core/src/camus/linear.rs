//! Linear constraints over input and output scalars, as written in property
//! files: `in0 = 0`, `out1 - out0 >= 1/2`, `2*in3 + in4 <= 1`.
//!
//! `in<k>` and `out<k>` name the `k`-th element (row-major) of the graph's
//! first input and output; any other identifier is taken as a full
//! variable name.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lowering::{Expr, Formula};
use crate::rational::{parse_rational, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Input(usize),
    Output(usize),
    Named(String),
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Input(k) => write!(f, "in{k}"),
            VarRef::Output(k) => write!(f, "out{k}"),
            VarRef::Named(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

/// `sum(coef * var) op rhs`, with like terms merged and zero terms dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearConstraint {
    pub terms: Vec<(Rational, VarRef)>,
    pub op: CmpOp,
    pub rhs: Rational,
}

impl LinearConstraint {
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text)?.constraint()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarRef> {
        self.terms.iter().map(|(_, v)| v)
    }

    fn lhs(&self, resolve: &dyn Fn(&VarRef) -> Result<String>) -> Result<Expr> {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (c, v) in &self.terms {
            let var = Expr::var(resolve(v)?);
            parts.push(if c.is_one() { var } else { Expr::Mul(vec![Expr::lit(c.clone()), var]) });
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::Add(parts) })
    }

    /// The constraint as a formula, with variables named by `resolve`.
    pub fn to_formula(&self, resolve: &dyn Fn(&VarRef) -> Result<String>) -> Result<Formula> {
        let (a, b) = (self.lhs(resolve)?, Expr::lit(self.rhs.clone()));
        Ok(match self.op {
            CmpOp::Eq => Formula::Eq(a, b),
            CmpOp::Le => Formula::Le(a, b),
            CmpOp::Lt => Formula::Lt(a, b),
            CmpOp::Ge => Formula::Ge(a, b),
            CmpOp::Gt => Formula::Gt(a, b),
        })
    }

    /// The negated constraint, written without `not`.
    pub fn negated_formula(&self, resolve: &dyn Fn(&VarRef) -> Result<String>) -> Result<Formula> {
        let (a, b) = (self.lhs(resolve)?, Expr::lit(self.rhs.clone()));
        Ok(match self.op {
            CmpOp::Eq => Formula::ne(a, b),
            CmpOp::Le => Formula::Gt(a, b),
            CmpOp::Lt => Formula::Ge(a, b),
            CmpOp::Ge => Formula::Lt(a, b),
            CmpOp::Gt => Formula::Le(a, b),
        })
    }

    /// Exact truth value; `None` if a variable has no value.
    pub fn holds(&self, value: &dyn Fn(&VarRef) -> Option<Rational>) -> Option<bool> {
        let mut lhs = Rational::zero();
        for (c, v) in &self.terms {
            lhs += c * value(v)?;
        }
        Some(self.op.holds(&lhs, &self.rhs))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Cmp(CmpOp),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    source: String,
}

fn invalid(source: &str, what: &str) -> Error {
    Error::InvalidSpec(format!("constraint {source:?}: {what}"))
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '<' | '>' | '=' => {
                let two = chars.get(i + 1) == Some(&'=');
                let op = match (c, two) {
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('>', true) => CmpOp::Ge,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Eq,
                };
                tokens.push(Token::Cmp(op));
                i += if two { 2 } else { 1 };
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '.' | '/')) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = parse_rational(&s).ok_or_else(|| invalid(text, &format!("bad number {s:?}")))?;
                tokens.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '|' => {
                let quoted = c == '|';
                let start = if quoted { i + 1 } else { i };
                i = start;
                while i < chars.len()
                    && (if quoted { chars[i] != '|' } else { chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.') })
                {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
                if quoted {
                    i += 1;
                }
            }
            other => return Err(invalid(text, &format!("unexpected character {other:?}"))),
        }
    }
    Ok(tokens)
}

fn var_ref(name: &str) -> VarRef {
    let indexed = |prefix: &str| {
        name.strip_prefix(prefix)
            .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|rest| rest.parse().ok())
    };
    if let Some(k) = indexed("in") {
        VarRef::Input(k)
    } else if let Some(k) = indexed("out") {
        VarRef::Output(k)
    } else {
        VarRef::Named(name.to_string())
    }
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Self { tokens: tokenize(text)?, pos: 0, source: text.to_string() })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    /// One side: signed terms, accumulated into `terms` and `constant`
    /// scaled by `side` (+1 for the left, -1 for the right).
    fn side(&mut self, side: &Rational, terms: &mut Vec<(Rational, VarRef)>, constant: &mut Rational) -> Result<()> {
        let mut first = true;
        loop {
            let mut sign = Rational::one();
            match self.peek() {
                Some(Token::Plus) if !first => {
                    self.pos += 1;
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    sign = -sign;
                }
                _ if first => {}
                _ => return Ok(()),
            }
            first = false;
            let coef = sign * side;
            match self.next() {
                Some(Token::Num(n)) => {
                    if self.peek() == Some(&Token::Star) {
                        self.pos += 1;
                        match self.next() {
                            Some(Token::Ident(name)) => terms.push((coef * n, var_ref(&name))),
                            _ => return Err(invalid(&self.source, "expected a variable after '*'")),
                        }
                    } else {
                        *constant += coef * n;
                    }
                }
                Some(Token::Ident(name)) => terms.push((coef, var_ref(&name))),
                _ => return Err(invalid(&self.source, "expected a number or variable")),
            }
        }
    }

    fn constraint(&mut self) -> Result<LinearConstraint> {
        let mut raw = Vec::new();
        let mut constant = Rational::zero();
        self.side(&Rational::one(), &mut raw, &mut constant)?;
        let op = match self.next() {
            Some(Token::Cmp(op)) => op,
            _ => return Err(invalid(&self.source, "expected one of = <= >= < >")),
        };
        self.side(&-Rational::one(), &mut raw, &mut constant)?;
        if self.pos < self.tokens.len() {
            return Err(invalid(&self.source, "trailing input"));
        }
        // Merge like terms, keeping first-appearance order.
        let mut terms: Vec<(Rational, VarRef)> = Vec::new();
        for (c, v) in raw {
            match terms.iter_mut().find(|(_, u)| *u == v) {
                Some((acc, _)) => *acc += c,
                None => terms.push((c, v)),
            }
        }
        terms.retain(|(c, _)| !c.is_zero());
        if terms.is_empty() {
            return Err(invalid(&self.source, "no variables"));
        }
        Ok(LinearConstraint { terms, op, rhs: -constant })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowering::RenderStyle;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn names(v: &VarRef) -> Result<String> {
        Ok(v.to_string())
    }

    #[test]
    fn simple_forms() {
        let c = LinearConstraint::parse("in0 = 0").unwrap();
        assert_eq!(c.terms, vec![(r(1, 1), VarRef::Input(0))]);
        assert_eq!(c.op, CmpOp::Eq);
        let c = LinearConstraint::parse("out0 >= 1/2").unwrap();
        assert_eq!(c.rhs, r(1, 2));
        let f = c.negated_formula(&names).unwrap();
        assert_eq!(f.render(RenderStyle::default()), "(< out0 (/ 1 2))");
    }

    #[test]
    fn moves_terms_left() {
        let c = LinearConstraint::parse("2*in3 + 1 <= out1 - 0.5").unwrap();
        assert_eq!(c.terms, vec![(r(2, 1), VarRef::Input(3)), (r(-1, 1), VarRef::Output(1))]);
        assert_eq!(c.rhs, r(-3, 2));
        let c = LinearConstraint::parse("actual_output_0_0_0_1 - actual_output_0_0_0_1 + in0 > 0").unwrap();
        assert_eq!(c.terms.len(), 1);
    }

    #[test]
    fn evaluates_exactly() {
        let c = LinearConstraint::parse("out1 - out0 > 1/3").unwrap();
        let val = |v: &VarRef| match v {
            VarRef::Output(1) => Some(r(1, 2)),
            VarRef::Output(0) => Some(r(1, 6)),
            _ => None,
        };
        assert_eq!(c.holds(&val), Some(false));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "in0", "in0 = ", "3 = 4", "in0 ! 2", "in0 = 1 2"] {
            assert!(LinearConstraint::parse(bad).is_err(), "{bad}");
        }
    }
}
