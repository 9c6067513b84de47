//! Native property syntax.
//!
//! ```text
//! property   := statement ((';' | newline) statement)*
//! statement  := 'x[' int ']' 'in' '[' number ',' number ']'
//!             | 'ball' '(' center ',' number [',' '[' number ',' number ']'] ')'
//!             | 'prove' expr
//! center     := '[' number (',' number)* ']' | string
//! expr       := conj ('or' conj)*
//! conj       := unary ('and' unary)*
//! unary      := 'not' unary | '(' expr ')' | 'argmax' ('==' | '!=') int
//!             | linear cmp linear
//! cmp        := '<=' | '<' | '>=' | '>' | '=='
//! linear     := ['-'] term (('+' | '-') term)*
//! term       := number ['*' var] | var
//! var        := 'y[' int ']' | 'x[' int ']'
//! ```
//!
//! `#` starts a comment. `ball` files hold numbers separated by commas or
//! whitespace, resolved relative to the property file.

use std::path::Path;

use crate::error::{Error, Result};

use super::{box_from_bounds, Goal, LinearAtom, NormalizedProperty, Predicate};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Str(String),
    Sym(&'static str),
    Sep,
}

const SYMBOLS: [&str; 14] = ["<=", ">=", "==", "!=", "<", ">", "[", "]", "(", ")", ",", "+", "-", "*"];

fn lex(text: &str) -> Result<Vec<(Tok, usize, usize)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = (ln + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
            } else if c == ';' {
                out.push((Tok::Sep, pos.0, pos.1));
                i += 1;
            } else if c == '"' {
                let end = chars[i + 1..].iter().position(|&d| d == '"').ok_or_else(|| Error::parse("property", pos.0, pos.1, "unterminated string"))?;
                out.push((Tok::Str(chars[i + 1..i + 1 + end].iter().collect()), pos.0, pos.1));
                i += end + 2;
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || ((chars[i] == 'e' || chars[i] == 'E') && i > start)
                        || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| Error::parse("property", pos.0, pos.1, format!("invalid number {s:?}")))?;
                out.push((Tok::Num(v), pos.0, pos.1));
            } else if c.is_alphabetic() || c == '_' || c == '/' || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || "_./".contains(chars[i])) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos.0, pos.1));
            } else if let Some(s) = SYMBOLS.iter().find(|s| chars[i..].starts_with(&s.chars().collect::<Vec<_>>())) {
                out.push((Tok::Sym(s), pos.0, pos.1));
                i += s.len();
            } else {
                return Err(Error::parse("property", pos.0, pos.1, format!("unexpected character {c:?}")));
            }
        }
        out.push((Tok::Sep, ln + 1, chars.len() + 1));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    outputs: Option<usize>,
    base: &'a Path,
}

#[derive(Default, Clone)]
struct LinearExpr {
    outputs: Vec<(usize, f64)>,
    inputs: Vec<(usize, f64)>,
    constant: f64,
}

impl LinearExpr {
    fn add_scaled(&mut self, o: LinearExpr, k: f64) {
        let merge = |dst: &mut Vec<(usize, f64)>, src: Vec<(usize, f64)>| {
            for (i, c) in src {
                match dst.iter_mut().find(|t| t.0 == i) {
                    Some(t) => t.1 += k * c,
                    None => dst.push((i, k * c)),
                }
            }
        };
        merge(&mut self.outputs, o.outputs);
        merge(&mut self.inputs, o.inputs);
        self.constant += k * o.constant;
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        let (l, c) = self.toks.get(self.pos).or(self.toks.last()).map_or((1, 1), |t| (t.1, t.2));
        Error::parse("property", l, c, msg)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{sym}'")))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        let neg = self.eat("-");
        match self.next() {
            Some(Tok::Num(v)) => Ok(if neg { -v } else { v }),
            Some(Tok::Ident(s)) if s == "inf" => Ok(if neg { f64::NEG_INFINITY } else { f64::INFINITY }),
            _ => {
                self.pos -= 1;
                Err(self.error("expected a number"))
            }
        }
    }

    fn index(&mut self) -> Result<usize> {
        self.expect("[")?;
        let v = match self.next() {
            Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 => v as usize,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected an index"));
            }
        };
        self.expect("]")?;
        Ok(v)
    }

    fn range(&mut self) -> Result<(f64, f64)> {
        self.expect("[")?;
        let a = self.number()?;
        self.expect(",")?;
        let b = self.number()?;
        self.expect("]")?;
        Ok((a, b))
    }

    fn term(&mut self) -> Result<LinearExpr> {
        let mut e = LinearExpr::default();
        let coeff = if let Some(Tok::Num(v)) = self.peek().cloned() {
            self.pos += 1;
            if !self.eat("*") {
                e.constant = v;
                return Ok(e);
            }
            v
        } else {
            1.0
        };
        match self.next() {
            Some(Tok::Ident(s)) if s == "y" => e.outputs.push((self.index()?, coeff)),
            Some(Tok::Ident(s)) if s == "x" => e.inputs.push((self.index()?, coeff)),
            _ => {
                self.pos -= 1;
                return Err(self.error("expected y[i], x[i] or a number"));
            }
        }
        Ok(e)
    }

    fn linear(&mut self) -> Result<LinearExpr> {
        let mut out = LinearExpr::default();
        let mut sign = if self.eat("-") { -1.0 } else { 1.0 };
        loop {
            let t = self.term()?;
            out.add_scaled(t, sign);
            if self.eat("+") {
                sign = 1.0;
            } else if self.eat("-") {
                sign = -1.0;
            } else {
                return Ok(out);
            }
        }
    }

    fn unary(&mut self) -> Result<Predicate> {
        if self.keyword("not") {
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if self.keyword("argmax") {
            let eq = if self.eat("==") {
                true
            } else if self.eat("!=") {
                false
            } else {
                return Err(self.error("expected '==' or '!=' after argmax"));
            };
            let class = match self.next() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 => v as usize,
                _ => {
                    self.pos -= 1;
                    return Err(self.error("expected a class index"));
                }
            };
            let n = self.outputs.ok_or_else(|| self.error("argmax needs the number of network outputs"))?;
            if class >= n {
                return Err(self.error(format!("class {class} out of range for {n} outputs")));
            }
            let p = argmax(class, n);
            return Ok(if eq { p } else { Predicate::Not(Box::new(p)) });
        }
        let a = self.linear()?;
        let cmp = match self.next() {
            Some(Tok::Sym(s)) if ["<=", "<", ">=", ">", "=="].contains(&s) => s,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a comparison"));
            }
        };
        let b = self.linear()?;
        let le = |lhs: &LinearExpr, rhs: &LinearExpr, strict: bool| {
            let mut d = lhs.clone();
            d.add_scaled(rhs.clone(), -1.0);
            let mut outputs: Vec<_> = d.outputs.into_iter().filter(|t| t.1 != 0.0).collect();
            let mut inputs: Vec<_> = d.inputs.into_iter().filter(|t| t.1 != 0.0).collect();
            outputs.sort_by_key(|t| t.0);
            inputs.sort_by_key(|t| t.0);
            Predicate::Atom(LinearAtom { outputs, inputs, rhs: -d.constant, strict })
        };
        Ok(match cmp {
            "<=" => le(&a, &b, false),
            "<" => le(&a, &b, true),
            ">=" => le(&b, &a, false),
            ">" => le(&b, &a, true),
            _ => Predicate::And(vec![le(&a, &b, false), le(&b, &a, false)]),
        })
    }

    fn conj(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.unary()?];
        while self.keyword("and") {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::And(parts) })
    }

    fn expr(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.conj()?];
        while self.keyword("or") {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::Or(parts) })
    }

    fn center(&mut self) -> Result<Vec<f64>> {
        if self.eat("[") {
            let mut v = vec![self.number()?];
            while self.eat(",") {
                v.push(self.number()?);
            }
            self.expect("]")?;
            return Ok(v);
        }
        let path = match self.next() {
            Some(Tok::Str(s)) | Some(Tok::Ident(s)) => s,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a center list or file"));
            }
        };
        let text = std::fs::read_to_string(self.base.join(&path)).map_err(|e| self.error(format!("cannot read {path}: {e}")))?;
        text.split(|c: char| c == ',' || c.is_whitespace() || c == '[' || c == ']')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| self.error(format!("invalid number {t:?} in {path}"))))
            .collect()
    }
}

/// `y[c] > y[i]` for every other output `i`.
pub fn argmax(class: usize, outputs: usize) -> Predicate {
    let atoms: Vec<Predicate> = (0..outputs)
        .filter(|&i| i != class)
        .map(|i| Predicate::Atom(LinearAtom { outputs: vec![(i, 1.0), (class, -1.0)], inputs: vec![], rhs: 0.0, strict: true }))
        .collect();
    if atoms.len() == 1 {
        atoms.into_iter().next().unwrap()
    } else {
        Predicate::And(atoms)
    }
}

/// Parse native syntax. `outputs` is the network output count, needed by
/// `argmax`; `base` resolves `ball` files.
pub fn parse(text: &str, outputs: Option<usize>, base: &Path) -> Result<NormalizedProperty> {
    let mut p = Parser { toks: lex(text)?, pos: 0, outputs, base };
    let mut lower: Vec<Option<f64>> = Vec::new();
    let mut upper: Vec<Option<f64>> = Vec::new();
    let mut set = |i: usize, lo: f64, hi: f64| {
        if lower.len() <= i {
            lower.resize(i + 1, None);
            upper.resize(i + 1, None);
        }
        lower[i] = Some(lower[i].map_or(lo, |v: f64| v.max(lo)));
        upper[i] = Some(upper[i].map_or(hi, |v: f64| v.min(hi)));
    };
    let mut goals = Vec::new();
    while p.pos < p.toks.len() {
        if p.peek() == Some(&Tok::Sep) {
            p.pos += 1;
            continue;
        }
        if p.keyword("prove") {
            goals.push(p.expr()?);
        } else if p.keyword("ball") {
            p.expect("(")?;
            let c = p.center()?;
            p.expect(",")?;
            let eps = p.number()?;
            if !(eps >= 0.0) {
                return Err(p.error("radius must be non-negative"));
            }
            let clamp = if p.eat(",") { Some(p.range()?) } else { None };
            p.expect(")")?;
            for (i, v) in c.into_iter().enumerate() {
                let (mut lo, mut hi) = (crate::interval::add_down(v, -eps), crate::interval::add_up(v, eps));
                if let Some((a, b)) = clamp {
                    lo = lo.max(a);
                    hi = hi.min(b);
                }
                set(i, lo, hi);
            }
        } else if matches!(p.peek(), Some(Tok::Ident(s)) if s == "x") {
            p.pos += 1;
            let i = p.index()?;
            if !p.keyword("in") {
                return Err(p.error("expected 'in'"));
            }
            let (lo, hi) = p.range()?;
            set(i, lo, hi);
        } else {
            return Err(p.error("expected 'x[i] in', 'ball' or 'prove'"));
        }
        if !matches!(p.peek(), None | Some(Tok::Sep)) {
            return Err(p.error("expected end of statement"));
        }
    }
    let predicate = match goals.len() {
        0 => return Err(Error::Property("no prove statement".into())),
        1 => goals.pop().unwrap(),
        _ => Predicate::And(goals),
    };
    Ok(NormalizedProperty { input_box: box_from_bounds(&lower, &upper)?, predicate, goal: Goal::Prove })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<NormalizedProperty> {
        parse(s, Some(3), Path::new("."))
    }

    #[test]
    fn boxes_and_atoms() {
        let p = parse_str("x[0] in [0, 1]; x[1] in [-2, 2e0]\nprove y[0] <= 1500").unwrap();
        assert_eq!(p.input_box.len(), 2);
        assert_eq!(p.input_box.get(1).lo, -2.0);
        assert_eq!(p.predicate, Predicate::Atom(LinearAtom::output_le(vec![(0, 1.0)], 1500.0)));
    }

    #[test]
    fn precedence_and_linear_terms() {
        let p = parse_str("x[0] in [0,1]\nprove y[0] - 2*y[1] + 1 < x[0] or not (y[2] >= 0 and y[1] == 3)").unwrap();
        let Predicate::Or(parts) = &p.predicate else { panic!() };
        assert_eq!(
            parts[0],
            Predicate::Atom(LinearAtom { outputs: vec![(0, 1.0), (1, -2.0)], inputs: vec![(0, -1.0)], rhs: -1.0, strict: true })
        );
        assert!(matches!(&parts[1], Predicate::Not(inner) if matches!(**inner, Predicate::And(ref v) if v.len() == 2)));
    }

    #[test]
    fn ball_and_argmax() {
        let p = parse_str("ball([0.5, 0.0], 0.1, [0, 1])\nprove argmax == 1").unwrap();
        assert_eq!(p.input_box.get(1).lo, 0.0);
        assert!((p.input_box.get(0).hi - 0.6).abs() < 1e-15);
        assert_eq!(p.predicate.atoms().len(), 2);
        assert!(p.predicate.holds_at(&[0.0, 0.0], &[0.0, 1.0, 0.5]));
        assert!(!p.predicate.holds_at(&[0.0, 0.0], &[1.0, 1.0, 0.5]));
    }

    #[test]
    fn errors_have_positions() {
        let err = parse_str("x[0] in [0, 1]\nprove y[0] <=").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_str("x[1] in [0, 1]\nprove y[0] <= 0").unwrap_err().to_string();
        assert!(err.contains("unbounded input 0"), "{err}");
        assert!(parse_str("x[0] in [0, 1]\nprove argmax == 7").is_err());
    }
}
