use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{parse_rational, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn unparseable(fragment: impl fmt::Display) -> Error {
    let mut s = fragment.to_string();
    if s.len() > 200 {
        let cut = (0..=200).rev().find(|&i| s.is_char_boundary(i)).unwrap_or(0);
        s.truncate(cut);
        s.push_str("...");
    }
    Error::UnparseableModel(s)
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            ';' => {
                for (_, c) in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| unparseable(&text[i..]))?;
                stack.last_mut().unwrap().push(Sexp::List(list));
            }
            '|' => {
                let mut atom = String::new();
                loop {
                    match chars.next() {
                        Some((_, '|')) => break,
                        Some((_, c)) => atom.push(c),
                        None => return Err(unparseable(&text[i..])),
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(atom));
            }
            '"' => {
                let mut atom = String::from('"');
                loop {
                    match chars.next() {
                        Some((_, '"')) => {
                            if chars.peek().map(|&(_, c)| c) == Some('"') {
                                chars.next();
                                atom.push('"');
                            } else {
                                break;
                            }
                        }
                        Some((_, c)) => atom.push(c),
                        None => return Err(unparseable(&text[i..])),
                    }
                }
                atom.push('"');
                stack.last_mut().unwrap().push(Sexp::Atom(atom));
            }
            _ => {
                let mut atom = String::from(c);
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '|' | '"') {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(atom));
            }
        }
    }
    if stack.len() != 1 {
        return Err(unparseable("unbalanced parentheses"));
    }
    Ok(stack.pop().unwrap())
}

fn value(v: &Sexp) -> Result<Rational> {
    match v {
        Sexp::Atom(a) => parse_rational(a)
            .filter(|_| a.chars().all(|c| c.is_ascii_digit() || c == '.'))
            .ok_or_else(|| unparseable(v)),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => Ok(-value(x)?),
            [Sexp::Atom(op), a, b] if op == "/" => {
                let (a, b) = (value(a)?, value(b)?);
                if b.is_zero() {
                    return Err(unparseable(v));
                }
                Ok(a / b)
            }
            _ => Err(unparseable(v)),
        },
    }
}

fn collect_definitions(items: &[Sexp], out: &mut BTreeMap<String, Rational>, depth: usize) -> Result<()> {
    for item in items {
        let Sexp::List(parts) = item else {
            // `model` keyword of older z3 output.
            if depth > 0 && matches!(item, Sexp::Atom(a) if a == "model") {
                continue;
            }
            return Err(unparseable(item));
        };
        match parts.first() {
            Some(Sexp::Atom(head)) if head == "define-fun" => match parts.as_slice() {
                [_, Sexp::Atom(name), Sexp::List(params), Sexp::Atom(sort), v]
                    if params.is_empty() && (sort == "Real" || sort == "Int") =>
                {
                    out.insert(name.clone(), value(v)?);
                }
                _ => return Err(unparseable(item)),
            },
            _ if depth == 0 => collect_definitions(parts, out, depth + 1)?,
            _ => return Err(unparseable(item)),
        }
    }
    Ok(())
}

/// Parses a `(get-model)` response into exact values. Accepts nullary
/// `define-fun` of sort Real or Int whose value is an integer, a decimal,
/// `(- v)` or `(/ a b)` built from those.
pub fn parse_model(text: &str) -> Result<BTreeMap<String, Rational>> {
    let mut out = BTreeMap::new();
    collect_definitions(&parse_sexps(text)?, &mut out, 0)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn value_forms() {
        let m = parse_model(
            "(\n  (define-fun |actual_input_0_0_0_3| () Real\n    1.0)\n  (define-fun x () Real (- (/ 1 2)))\n  (define-fun y () Real (/ (- 3.0) 4.0))\n  (define-fun z () Real 0.125)\n)",
        )
        .unwrap();
        assert_eq!(m["actual_input_0_0_0_3"], r(1, 1));
        assert_eq!(m["x"], r(-1, 2));
        assert_eq!(m["y"], r(-3, 4));
        assert_eq!(m["z"], r(1, 8));
    }

    #[test]
    fn flat_and_model_keyword() {
        let m = parse_model("(model (define-fun a () Real 2) )").unwrap();
        assert_eq!(m["a"], r(2, 1));
        let m = parse_model("(define-fun a () Real 2)\n(define-fun b () Int 3)").unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn rejects_functions_and_algebraic_numbers() {
        for bad in [
            "((define-fun f ((x Real)) Real x))",
            "((define-fun a () Real (root-obj (+ (^ x 2) (- 2)) 1)))",
            "((define-fun a () Real (/ 1 0)))",
            "((define-fun a () Bool true))",
            "((define-fun a () Real 1e3))",
            "((define-fun a () Real 1)",
        ] {
            assert!(matches!(parse_model(bad), Err(Error::UnparseableModel(_))), "{bad}");
        }
    }
}
