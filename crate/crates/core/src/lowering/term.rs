//! Real-valued terms and boolean constraints, with SMT-LIB rendering and
//! exact evaluation.

use std::fmt::Write;

use num_traits::Zero;

use crate::rational::{smt_literal, NumeralStyle, Rational};

/// A Real-sorted term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Lit(Rational),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Ite(Box<Formula>, Box<Expr>, Box<Expr>),
}

/// A Bool-sorted constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Eq(Expr, Expr),
    Le(Expr, Expr),
    Lt(Expr, Expr),
    Ge(Expr, Expr),
    Gt(Expr, Expr),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

/// How symbols and numerals are spelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderStyle {
    pub numerals: NumeralStyle,
    /// Wrap every symbol in `|...|`.
    pub quote_symbols: bool,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn lit(value: Rational) -> Self {
        Expr::Lit(value)
    }

    pub fn int(value: i64) -> Self {
        Expr::Lit(Rational::from_integer(value.into()))
    }

    /// Sum with literal terms merged into one trailing constant.
    pub fn sum(terms: Vec<Expr>) -> Self {
        let mut constant = Rational::zero();
        let mut rest = Vec::with_capacity(terms.len());
        for t in terms {
            match t {
                Expr::Lit(v) => constant += v,
                other => rest.push(other),
            }
        }
        if !constant.is_zero() || rest.is_empty() {
            rest.push(Expr::Lit(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Expr::Add(rest)
        }
    }

    /// Product of two terms. Literal factors fold; a zero literal gives
    /// `None` so callers can drop the term from a sum.
    pub fn product(a: &Expr, b: &Expr) -> Option<Expr> {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => {
                let p = x * y;
                (!p.is_zero()).then_some(Expr::Lit(p))
            }
            (Expr::Lit(x), other) | (other, Expr::Lit(x)) => {
                if x.is_zero() {
                    None
                } else if x == &Rational::from_integer(1.into()) {
                    Some(other.clone())
                } else {
                    Some(Expr::Mul(vec![Expr::Lit(x.clone()), other.clone()]))
                }
            }
            _ => Some(Expr::Mul(vec![a.clone(), b.clone()])),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Var(_) => false,
            Expr::Lit(_) => true,
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().all(Expr::is_constant),
            Expr::Sub(a, b) => a.is_constant() && b.is_constant(),
            Expr::Ite(c, a, b) => c.is_constant() && a.is_constant() && b.is_constant(),
        }
    }

    /// First product of two non-constant factors, if any.
    pub fn find_nonlinear(&self) -> Option<&Expr> {
        match self {
            Expr::Var(_) | Expr::Lit(_) => None,
            Expr::Mul(ts) => {
                if ts.iter().filter(|t| !t.is_constant()).count() > 1 {
                    Some(self)
                } else {
                    ts.iter().find_map(Expr::find_nonlinear)
                }
            }
            Expr::Add(ts) => ts.iter().find_map(Expr::find_nonlinear),
            Expr::Sub(a, b) => a.find_nonlinear().or_else(|| b.find_nonlinear()),
            Expr::Ite(c, a, b) => c
                .find_nonlinear()
                .or_else(|| a.find_nonlinear())
                .or_else(|| b.find_nonlinear()),
        }
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Rational>) -> Option<Rational> {
        Some(match self {
            Expr::Var(n) => env(n)?,
            Expr::Lit(v) => v.clone(),
            Expr::Add(ts) => {
                let mut acc = Rational::zero();
                for t in ts {
                    acc += t.eval(env)?;
                }
                acc
            }
            Expr::Mul(ts) => {
                let mut acc = Rational::from_integer(1.into());
                for t in ts {
                    acc *= t.eval(env)?;
                }
                acc
            }
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Ite(c, a, b) => {
                if c.eval(env)? {
                    a.eval(env)?
                } else {
                    b.eval(env)?
                }
            }
        })
    }

    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a str)) {
        match self {
            Expr::Var(n) => f(n),
            Expr::Lit(_) => {}
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().for_each(|t| t.for_each_var(f)),
            Expr::Sub(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Ite(c, a, b) => {
                c.for_each_var(f);
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn render(&self, style: RenderStyle) -> String {
        let mut out = String::new();
        self.write(&mut out, style);
        out
    }

    fn write(&self, out: &mut String, style: RenderStyle) {
        match self {
            Expr::Var(n) => write_symbol(out, n, style.quote_symbols),
            Expr::Lit(v) => out.push_str(&smt_literal(v, style.numerals)),
            Expr::Add(ts) => write_app(out, "+", ts, style),
            Expr::Mul(ts) => write_app(out, "*", ts, style),
            Expr::Sub(a, b) => {
                out.push_str("(- ");
                a.write(out, style);
                out.push(' ');
                b.write(out, style);
                out.push(')');
            }
            Expr::Ite(c, a, b) => {
                out.push_str("(ite ");
                c.write(out, style);
                out.push(' ');
                a.write(out, style);
                out.push(' ');
                b.write(out, style);
                out.push(')');
            }
        }
    }
}

fn write_symbol(out: &mut String, name: &str, quote: bool) {
    if quote {
        let _ = write!(out, "|{name}|");
    } else {
        out.push_str(name);
    }
}

fn write_app(out: &mut String, op: &str, args: &[Expr], style: RenderStyle) {
    out.push('(');
    out.push_str(op);
    for a in args {
        out.push(' ');
        a.write(out, style);
    }
    out.push(')');
}

impl Formula {
    /// Disjunction; a single disjunct is returned bare.
    pub fn or(mut parts: Vec<Formula>) -> Formula {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        }
    }

    /// Conjunction; a single conjunct is returned bare.
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        }
    }

    /// `a != b` written without `not`/`distinct`.
    pub fn ne(a: Expr, b: Expr) -> Formula {
        Formula::Or(vec![Formula::Lt(a.clone(), b.clone()), Formula::Gt(a, b)])
    }

    fn sides(&self) -> Option<(&Expr, &Expr)> {
        match self {
            Formula::Eq(a, b)
            | Formula::Le(a, b)
            | Formula::Lt(a, b)
            | Formula::Ge(a, b)
            | Formula::Gt(a, b) => Some((a, b)),
            Formula::And(_) | Formula::Or(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_constant),
            _ => {
                let (a, b) = self.sides().unwrap();
                a.is_constant() && b.is_constant()
            }
        }
    }

    pub fn find_nonlinear(&self) -> Option<&Expr> {
        match self {
            Formula::And(fs) | Formula::Or(fs) => fs.iter().find_map(Formula::find_nonlinear),
            _ => {
                let (a, b) = self.sides().unwrap();
                a.find_nonlinear().or_else(|| b.find_nonlinear())
            }
        }
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Rational>) -> Option<bool> {
        Some(match self {
            Formula::And(fs) => {
                let mut all = true;
                for f in fs {
                    all &= f.eval(env)?;
                }
                all
            }
            Formula::Or(fs) => {
                let mut any = false;
                for f in fs {
                    any |= f.eval(env)?;
                }
                any
            }
            Formula::Eq(a, b) => a.eval(env)? == b.eval(env)?,
            Formula::Le(a, b) => a.eval(env)? <= b.eval(env)?,
            Formula::Lt(a, b) => a.eval(env)? < b.eval(env)?,
            Formula::Ge(a, b) => a.eval(env)? >= b.eval(env)?,
            Formula::Gt(a, b) => a.eval(env)? > b.eval(env)?,
        })
    }

    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a str)) {
        match self {
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|x| x.for_each_var(f)),
            _ => {
                let (a, b) = self.sides().unwrap();
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn render(&self, style: RenderStyle) -> String {
        let mut out = String::new();
        self.write(&mut out, style);
        out
    }

    fn write(&self, out: &mut String, style: RenderStyle) {
        let (op, parts) = match self {
            Formula::And(fs) => ("and", fs),
            Formula::Or(fs) => ("or", fs),
            _ => {
                let op = match self {
                    Formula::Eq(..) => "=",
                    Formula::Le(..) => "<=",
                    Formula::Lt(..) => "<",
                    Formula::Ge(..) => ">=",
                    _ => ">",
                };
                let (a, b) = self.sides().unwrap();
                let _ = write!(out, "({op} ");
                a.write(out, style);
                out.push(' ');
                b.write(out, style);
                out.push(')');
                return;
            }
        };
        let _ = write!(out, "({op}");
        for f in parts {
            out.push(' ');
            f.write(out, style);
        }
        out.push(')');
    }
}

/// `max(a, b)` as a conditional term.
pub fn max2(a: Expr, b: Expr) -> Expr {
    Expr::Ite(Box::new(Formula::Ge(a.clone(), b.clone())), Box::new(a), Box::new(b))
}

/// `|x|` as a conditional term.
pub fn abs(x: Expr) -> Expr {
    Expr::Ite(
        Box::new(Formula::Ge(x.clone(), Expr::int(0))),
        Box::new(x.clone()),
        Box::new(Expr::Sub(Box::new(Expr::int(0)), Box::new(x))),
    )
}
