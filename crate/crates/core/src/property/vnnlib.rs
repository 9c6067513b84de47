//! VNN-LIB subset: `declare-const` over `X_i`/`Y_j` and linear assertions.
//!
//! The assertions describe the region that must be unreachable, so the
//! predicate to prove is their negation.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::interval::{div_down, div_up};

use super::{box_from_bounds, Goal, LinearAtom, NormalizedProperty, Predicate};

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String, usize, usize),
    List(Vec<Sexp>, usize, usize),
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom(_, l, c) | Sexp::List(_, l, c) => (*l, *c),
        }
    }
}

fn err_at(pos: (usize, usize), msg: impl Into<String>) -> Error {
    Error::parse("vnnlib", pos.0, pos.1, msg)
}

fn read(text: &str) -> Result<Vec<Sexp>> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = vec![(Vec::new(), 0, 0)];
    let mut token = String::new();
    let mut token_pos = (0, 0);
    let (mut line, mut col) = (1, 0);
    let mut comment = false;
    let flush = |token: &mut String, pos: (usize, usize), stack: &mut Vec<(Vec<Sexp>, usize, usize)>| {
        if !token.is_empty() {
            stack.last_mut().unwrap().0.push(Sexp::Atom(std::mem::take(token), pos.0, pos.1));
        }
    };
    for ch in text.chars() {
        col += 1;
        if ch == '\n' {
            comment = false;
        }
        if comment {
            continue;
        }
        match ch {
            ';' => {
                flush(&mut token, token_pos, &mut stack);
                comment = true;
            }
            '(' => {
                flush(&mut token, token_pos, &mut stack);
                stack.push((Vec::new(), line, col));
            }
            ')' => {
                flush(&mut token, token_pos, &mut stack);
                if stack.len() == 1 {
                    return Err(err_at((line, col), "unbalanced ')'"));
                }
                let (items, l, c) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, l, c));
            }
            c if c.is_whitespace() => flush(&mut token, token_pos, &mut stack),
            c => {
                if token.is_empty() {
                    token_pos = (line, col);
                }
                token.push(c);
            }
        }
        if ch == '\n' {
            line += 1;
            col = 0;
        }
    }
    flush(&mut token, token_pos, &mut stack);
    if stack.len() != 1 {
        let (_, l, c) = stack.pop().unwrap();
        return Err(err_at((l, c), "unclosed '('"));
    }
    Ok(stack.pop().unwrap().0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Var {
    X(usize),
    Y(usize),
}

/// Linear expression `sum c_v v + constant`.
#[derive(Debug, Clone, Default)]
struct Linear {
    terms: Vec<(Var, f64)>,
    constant: f64,
}

impl Linear {
    fn scaled(mut self, k: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= k);
        self.constant *= k;
        self
    }

    fn plus(mut self, o: Linear) -> Self {
        for (v, c) in o.terms {
            match self.terms.iter_mut().find(|t| t.0 == v) {
                Some(t) => t.1 += c,
                None => self.terms.push((v, c)),
            }
        }
        self.constant += o.constant;
        self
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }
}

struct Parser {
    declared: HashSet<String>,
}

impl Parser {
    fn var(&self, name: &str, pos: (usize, usize)) -> Result<Var> {
        if !self.declared.contains(name) {
            return Err(err_at(pos, format!("unknown symbol {name}")));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| err_at(pos, format!("unsupported variable name {name}")));
        if let Some(i) = name.strip_prefix("X_") {
            Ok(Var::X(idx(i)?))
        } else if let Some(j) = name.strip_prefix("Y_") {
            Ok(Var::Y(idx(j)?))
        } else {
            Err(err_at(pos, format!("unsupported variable name {name}")))
        }
    }

    fn term(&self, e: &Sexp) -> Result<Linear> {
        match e {
            Sexp::Atom(s, ..) => {
                if let Ok(v) = s.parse::<f64>() {
                    return Ok(Linear { terms: Vec::new(), constant: v });
                }
                Ok(Linear { terms: vec![(self.var(s, e.pos())?, 1.0)], constant: 0.0 })
            }
            Sexp::List(items, ..) => {
                let (head, args) = split_head(items, e.pos())?;
                let parts = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>>>()?;
                match head {
                    "+" => Ok(parts.into_iter().fold(Linear::default(), Linear::plus)),
                    "-" if parts.len() == 1 => Ok(parts.into_iter().next().unwrap().scaled(-1.0)),
                    "-" if !parts.is_empty() => {
                        let mut it = parts.into_iter();
                        let first = it.next().unwrap();
                        Ok(it.fold(first, |acc, p| acc.plus(p.scaled(-1.0))))
                    }
                    "*" => {
                        let mut out = Linear { terms: Vec::new(), constant: 1.0 };
                        for p in parts {
                            out = if p.is_constant() {
                                out.scaled(p.constant)
                            } else if out.is_constant() {
                                p.scaled(out.constant)
                            } else {
                                return Err(err_at(e.pos(), "nonlinear term"));
                            };
                        }
                        Ok(out)
                    }
                    "/" if parts.len() == 2 && parts[1].is_constant() && parts[1].constant != 0.0 => {
                        let d = parts[1].constant;
                        Ok(parts[0].clone().scaled(1.0 / d))
                    }
                    other => Err(err_at(e.pos(), format!("unsupported term operator {other}"))),
                }
            }
        }
    }

    fn formula(&self, e: &Sexp) -> Result<Predicate> {
        let Sexp::List(items, ..) = e else {
            return Err(err_at(e.pos(), "expected a formula"));
        };
        let (head, args) = split_head(items, e.pos())?;
        match head {
            "and" => Ok(Predicate::And(args.iter().map(|a| self.formula(a)).collect::<Result<_>>()?)),
            "or" => Ok(Predicate::Or(args.iter().map(|a| self.formula(a)).collect::<Result<_>>()?)),
            "not" if args.len() == 1 => Ok(Predicate::Not(Box::new(self.formula(&args[0])?))),
            "<=" | "<" | ">=" | ">" | "=" if args.len() == 2 => {
                let (a, b) = (self.term(&args[0])?, self.term(&args[1])?);
                let le = |lhs: Linear, rhs: Linear, strict: bool| atom(lhs.plus(rhs.scaled(-1.0)), strict);
                Ok(match head {
                    "<=" => le(a, b, false),
                    "<" => le(a, b, true),
                    ">=" => le(b, a, false),
                    ">" => le(b, a, true),
                    _ => Predicate::And(vec![le(a.clone(), b.clone(), false), le(b, a, false)]),
                })
            }
            other => Err(err_at(e.pos(), format!("unsupported formula {other}"))),
        }
    }
}

fn split_head(items: &[Sexp], pos: (usize, usize)) -> Result<(&str, &[Sexp])> {
    match items.split_first() {
        Some((Sexp::Atom(h, ..), rest)) => Ok((h.as_str(), rest)),
        _ => Err(err_at(pos, "expected an operator")),
    }
}

/// `lin <= 0` (or `< 0`) as an atom with the constant moved right.
fn atom(lin: Linear, strict: bool) -> Predicate {
    let mut outputs = Vec::new();
    let mut inputs = Vec::new();
    for (v, c) in lin.terms {
        if c == 0.0 {
            continue;
        }
        match v {
            Var::X(i) => inputs.push((i, c)),
            Var::Y(j) => outputs.push((j, c)),
        }
    }
    outputs.sort_by_key(|t| t.0);
    inputs.sort_by_key(|t| t.0);
    Predicate::Atom(LinearAtom { outputs, inputs, rhs: -lin.constant, strict })
}

/// Split top-level conjunctions.
fn conjuncts(p: Predicate, out: &mut Vec<Predicate>) {
    match p {
        Predicate::And(ps) => ps.into_iter().for_each(|q| conjuncts(q, out)),
        other => out.push(other),
    }
}

pub fn parse(text: &str) -> Result<NormalizedProperty> {
    let forms = read(text)?;
    let mut parser = Parser { declared: HashSet::new() };
    let mut asserted = Vec::new();
    let mut n_inputs = 0;
    for f in &forms {
        let Sexp::List(items, ..) = f else {
            return Err(err_at(f.pos(), "expected a command"));
        };
        let (head, args) = split_head(items, f.pos())?;
        match (head, args) {
            ("declare-const", [Sexp::Atom(name, ..), Sexp::Atom(ty, ..)]) => {
                if ty != "Real" {
                    return Err(err_at(f.pos(), format!("unsupported sort {ty}")));
                }
                parser.declared.insert(name.clone());
                if let Var::X(i) = parser.var(name, f.pos())? {
                    n_inputs = n_inputs.max(i + 1);
                }
            }
            ("assert", [body]) => conjuncts(parser.formula(body)?, &mut asserted),
            _ => return Err(err_at(f.pos(), format!("unsupported command {head}"))),
        }
    }

    let mut lower = vec![None; n_inputs];
    let mut upper = vec![None; n_inputs];
    let mut output_part = Vec::new();
    for p in asserted {
        match &p {
            Predicate::Atom(a) if a.outputs.is_empty() && a.inputs.len() == 1 => {
                let (i, c) = a.inputs[0];
                if i >= n_inputs {
                    return Err(Error::Property(format!("input {i} is not declared")));
                }
                if c > 0.0 {
                    let v = div_up(a.rhs, c);
                    upper[i] = Some(upper[i].map_or(v, |u: f64| u.min(v)));
                } else {
                    let v = div_down(a.rhs, c);
                    lower[i] = Some(lower[i].map_or(v, |l: f64| l.max(v)));
                }
            }
            other if other.atoms().iter().all(|a| a.outputs.is_empty()) => {
                return Err(Error::Unsupported("input constraints beyond per-variable bounds".into()));
            }
            _ => output_part.push(p),
        }
    }
    let input_box = box_from_bounds(&lower, &upper)?;
    if output_part.is_empty() {
        return Err(Error::Property("no output constraints asserted".into()));
    }
    let unsafe_region = if output_part.len() == 1 { output_part.pop().unwrap() } else { Predicate::And(output_part) };
    Ok(NormalizedProperty { input_box, predicate: Predicate::Not(Box::new(unsafe_region)).nnf(), goal: Goal::RefuteAssertion })
}
