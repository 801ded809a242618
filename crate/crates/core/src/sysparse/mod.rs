//! Text format for polynomial control systems and schedule literals.
//!
//! ```text
//! # comments run to end of line
//! system brockett
//! dim 3
//! controls 2
//! x0 = [0, 0, 0]          # optional basepoint
//! X0 = [0, 0, 0]
//! X1 = [1, 0, -x2]
//! X2 = [0, 1, x1]
//! ```
//!
//! Coefficients are exact: integers, fractions `3/2` and finite decimals
//! `0.25`. There is no division operator and no scientific notation.

mod lexer;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{ToPrimitive, Zero};

use crate::error::Result;
use crate::polyalg::{Poly, Rational};
use crate::system::{ControlSystem, Schedule, SystemDraft};
use lexer::{parse_error, tokenize, Tok, Token};

/// Largest exponent accepted after `^`.
pub const MAX_EXPONENT: u32 = 256;

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    /// Newlines are skipped while inside `(` or `[`.
    depth: usize,
    end: (usize, usize),
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], src: &str) -> Self {
        let line = src.lines().count().max(1);
        let column = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        let end = if src.ends_with('\n') { (line + 1, 1) } else { (line, column) };
        Parser { toks, pos: 0, depth: 0, end }
    }

    fn skip_soft_newlines(&mut self) {
        if self.depth > 0 {
            while matches!(self.toks.get(self.pos), Some(Token { tok: Tok::Newline, .. })) {
                self.pos += 1;
            }
        }
    }

    fn peek(&mut self) -> Option<&'a Token> {
        self.skip_soft_newlines();
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&mut self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.column),
            None => self.end,
        }
    }

    fn fail<T>(&mut self, message: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(parse_error(l, c, message))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<&'a Token> {
        match self.peek() {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => {
                let found = describe(&t.tok);
                self.fail(format!("expected {what}, found {found}"))
            }
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn open(&mut self, want: Tok, what: &str) -> Result<&'a Token> {
        let t = self.expect(want, what)?;
        self.depth += 1;
        Ok(t)
    }

    fn close(&mut self, want: Tok, what: &str) -> Result<()> {
        self.expect(want, what)?;
        self.depth -= 1;
        Ok(())
    }

    fn expr(&mut self, dim: usize) -> Result<Poly> {
        let mut acc = self.term(dim)?;
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = &acc + &self.term(dim)?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = &acc - &self.term(dim)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self, dim: usize) -> Result<Poly> {
        let mut acc = self.unary(dim)?;
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Star)) {
            self.pos += 1;
            acc = &acc * &self.unary(dim)?;
        }
        Ok(acc)
    }

    fn unary(&mut self, dim: usize) -> Result<Poly> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-&self.unary(dim)?)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary(dim)
            }
            _ => self.power(dim),
        }
    }

    fn power(&mut self, dim: usize) -> Result<Poly> {
        let base = self.atom(dim)?;
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::Caret)) {
            return Ok(base);
        }
        self.pos += 1;
        let e = match self.peek().map(|t| &t.tok) {
            Some(Tok::Num { value, integral: true }) => value.to_integer(),
            Some(Tok::Minus) => return self.fail("negative exponents are not allowed"),
            Some(Tok::Num { .. }) => return self.fail("exponent must be a non-negative integer"),
            _ => return self.fail("expected exponent after '^'"),
        };
        match e.to_u32().filter(|&e| e <= MAX_EXPONENT) {
            Some(e) => {
                self.pos += 1;
                Ok(base.pow(e))
            }
            None => self.fail(format!("exponent exceeds {MAX_EXPONENT}")),
        }
    }

    fn atom(&mut self, dim: usize) -> Result<Poly> {
        let Some(t) = self.peek() else {
            return self.fail("unexpected end of input in expression");
        };
        match &t.tok {
            Tok::Num { value, .. } => {
                self.pos += 1;
                Ok(Poly::constant(dim, value.clone()))
            }
            Tok::Ident(name) => match variable_index(name) {
                Some(i) if (1..=dim).contains(&i) => {
                    self.pos += 1;
                    Ok(Poly::var(dim, i - 1))
                }
                _ => self.fail(format!("unknown variable '{name}' (variables are x1..x{dim})")),
            },
            Tok::LParen => {
                self.open(Tok::LParen, "'('")?;
                let inner = self.expr(dim)?;
                self.close(Tok::RParen, "')'")?;
                Ok(inner)
            }
            other => {
                let found = describe(other);
                self.fail(format!("expected a number, variable or '(', found {found}"))
            }
        }
    }

    /// `[e1, ..., ek]`; returns the entries with the position of `[`.
    fn list(&mut self, dim: usize) -> Result<(Vec<Poly>, (usize, usize))> {
        let open = self.open(Tok::LBracket, "'['")?;
        let at = (open.line, open.column);
        let mut items = Vec::new();
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::RBracket)) {
            self.close(Tok::RBracket, "']'")?;
            return Ok((items, at));
        }
        loop {
            items.push(self.expr(dim)?);
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RBracket) => {
                    self.close(Tok::RBracket, "']'")?;
                    return Ok((items, at));
                }
                _ => return self.fail("expected ',' or ']'"),
            }
        }
    }

    fn end_of_statement(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(Token { tok: Tok::Newline, .. }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let found = describe(&t.tok);
                self.fail(format!("expected end of line, found {found}"))
            }
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Num { value, integral: true }) => match value.to_integer().to_usize() {
                Some(v) => {
                    self.pos += 1;
                    Ok(v)
                }
                None => self.fail(format!("{what} is too large")),
            },
            _ => self.fail(format!("expected a non-negative integer for {what}")),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num { value, .. } => format!("number {value}"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Eq => "'='".into(),
        Tok::Colon => "':'".into(),
        Tok::Semi => "';'".into(),
        Tok::Newline => "end of line".into(),
    }
}

/// `x<k>` with `k >= 1` and no leading zero.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// `X<i>` field label.
fn field_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('X')?;
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    digits.parse().ok()
}

/// Parses one polynomial expression in `x1..x<dim>`.
pub fn parse_poly(text: &str, dim: usize) -> Result<Poly> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    p.depth = 1; // newlines are whitespace inside a bare expression
    let poly = p.expr(dim)?;
    match p.peek() {
        None => Ok(poly),
        Some(t) => {
            let found = describe(&t.tok);
            p.fail(format!("unexpected {found} after expression"))
        }
    }
}

/// Parses a system document into a validated [`ControlSystem`].
pub fn parse_system(text: &str) -> Result<ControlSystem> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    let mut name: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut controls: Option<(usize, (usize, usize))> = None;
    let mut basepoint: Option<Vec<Rational>> = None;
    let mut fields: BTreeMap<usize, (Vec<Poly>, (usize, usize))> = BTreeMap::new();

    while let Some(t) = p.peek() {
        let (line, column) = (t.line, t.column);
        let dup = |what: &str| Err(parse_error(line, column, format!("duplicate '{what}' declaration")));
        match &t.tok {
            Tok::Newline => {
                p.pos += 1;
                continue;
            }
            Tok::Ident(kw) if kw == "system" => {
                p.pos += 1;
                if name.is_some() {
                    return dup("system");
                }
                match p.peek().map(|t| &t.tok) {
                    Some(Tok::Ident(n)) => {
                        name = Some(n.clone());
                        p.pos += 1;
                    }
                    _ => return p.fail("expected a system name"),
                }
            }
            Tok::Ident(kw) if kw == "dim" => {
                p.pos += 1;
                if dim.is_some() {
                    return dup("dim");
                }
                let n = p.count("dim")?;
                if n == 0 {
                    return Err(parse_error(line, column, "dim must be positive"));
                }
                dim = Some(n);
            }
            Tok::Ident(kw) if kw == "controls" => {
                p.pos += 1;
                if controls.is_some() {
                    return dup("controls");
                }
                controls = Some((p.count("controls")?, (line, column)));
            }
            Tok::Ident(kw) if kw == "x0" => {
                p.pos += 1;
                if basepoint.is_some() {
                    return dup("x0");
                }
                let Some(n) = dim else {
                    return Err(parse_error(line, column, "'dim' must be declared before 'x0'"));
                };
                p.expect(Tok::Eq, "'='")?;
                let (entries, at) = p.list(n)?;
                if entries.len() != n {
                    return Err(parse_error(
                        at.0,
                        at.1,
                        format!("x0 has {} entries, expected {n}", entries.len()),
                    ));
                }
                let mut values = Vec::with_capacity(n);
                for e in entries {
                    match e.as_constant() {
                        Some(c) => values.push(c),
                        None => return Err(parse_error(at.0, at.1, "x0 entries must be constants")),
                    }
                }
                basepoint = Some(values);
            }
            Tok::Ident(kw) if field_index(kw).is_some() => {
                let i = field_index(kw).expect("checked");
                p.pos += 1;
                if fields.contains_key(&i) {
                    return dup(kw);
                }
                let Some(n) = dim else {
                    return Err(parse_error(line, column, format!("'dim' must be declared before '{kw}'")));
                };
                p.expect(Tok::Eq, "'='")?;
                let (comps, at) = p.list(n)?;
                if comps.len() != n {
                    return Err(parse_error(
                        at.0,
                        at.1,
                        format!("{kw} has {} components, expected {n}", comps.len()),
                    ));
                }
                fields.insert(i, (comps, (line, column)));
            }
            other => {
                let found = describe(other);
                return p.fail(format!(
                    "expected 'system', 'dim', 'controls', 'x0' or a field 'X<i>', found {found}"
                ));
            }
        }
        p.end_of_statement()?;
    }

    let end = p.end;
    let missing = |what: &str| Err(parse_error(end.0, end.1, format!("missing '{what}' declaration")));
    let Some(name) = name else { return missing("system") };
    let Some(dim) = dim else { return missing("dim") };
    let Some((m, m_at)) = controls else { return missing("controls") };
    if let Some((&i, (_, at))) = fields.iter().find(|(&i, _)| i > m) {
        return Err(parse_error(
            at.0,
            at.1,
            format!("field X{i} declared but controls = {m} (fields are X0..X{m})"),
        ));
    }
    if let Some(i) = (0..=m).find(|i| !fields.contains_key(i)) {
        return Err(parse_error(m_at.0, m_at.1, format!("missing field X{i} (controls = {m})")));
    }
    ControlSystem::from_draft(SystemDraft {
        name,
        dim,
        m,
        fields: fields.into_values().map(|(c, _)| c).collect(),
        basepoint,
    })
}

/// Canonical text form; `parse_system(&serialize_system(s))` reproduces `s`.
pub fn serialize_system(sys: &ControlSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {}", sys.name());
    let _ = writeln!(out, "dim {}", sys.dim());
    let _ = writeln!(out, "controls {}", sys.m());
    if let Some(x0) = sys.basepoint() {
        let v: Vec<String> = x0.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "x0 = [{}]", v.join(", "));
    }
    for (i, f) in sys.fields().iter().enumerate() {
        let v: Vec<String> = f.components().iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "X{i} = [{}]", v.join(", "));
    }
    out
}

/// Schedule literal with exact controls and durations, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleLiteral {
    pub controls: Vec<Vec<Rational>>,
    pub durations: Vec<Rational>,
}

impl ScheduleLiteral {
    pub fn to_schedule(&self) -> Result<Schedule> {
        Schedule::from_exact(&self.controls, &self.durations)
    }
}

/// Parses `(u1,...,um):s;(u1,...,um):s;...`; controls must lie in `[-1, 1]`
/// and durations must be non-negative.
pub fn parse_schedule(text: &str, m: usize) -> Result<ScheduleLiteral> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    p.depth = 1;
    let mut lit = ScheduleLiteral {
        controls: Vec::new(),
        durations: Vec::new(),
    };
    if p.peek().is_none() {
        return p.fail("empty schedule");
    }
    loop {
        let (entries, at) = {
            let open = p.expect(Tok::LParen, "'('")?;
            let at = (open.line, open.column);
            let mut items = Vec::new();
            if !matches!(p.peek().map(|t| &t.tok), Some(Tok::RParen)) {
                loop {
                    items.push(constant(&mut p)?);
                    match p.peek().map(|t| &t.tok) {
                        Some(Tok::Comma) => p.pos += 1,
                        _ => break,
                    }
                }
            }
            p.expect(Tok::RParen, "')'")?;
            (items, at)
        };
        if entries.len() != m {
            return Err(parse_error(
                at.0,
                at.1,
                format!("control has {} entries, expected {m}", entries.len()),
            ));
        }
        let one = Rational::from_integer(1.into());
        if entries.iter().any(|u| u > &one || u < &-one.clone()) {
            return Err(parse_error(at.0, at.1, "control outside [-1, 1]"));
        }
        p.expect(Tok::Colon, "':'")?;
        let (dl, dc) = p.here();
        let d = constant(&mut p)?;
        if d < Rational::zero() {
            return Err(parse_error(dl, dc, "negative duration"));
        }
        lit.controls.push(entries);
        lit.durations.push(d);
        match p.next().map(|t| &t.tok) {
            None => return Ok(lit),
            Some(Tok::Semi) if p.peek().is_none() => return Ok(lit),
            Some(Tok::Semi) => {}
            Some(_) => {
                p.pos -= 1;
                return p.fail("expected ';' between segments");
            }
        }
    }
}

fn constant(p: &mut Parser<'_>) -> Result<Rational> {
    let (l, c) = p.here();
    let e = p.unary(0)?;
    e.as_constant()
        .ok_or_else(|| parse_error(l, c, "expected a constant"))
}

/// Parses a comma-separated vector of constants such as `0, 1/2, -0.25`
/// (brackets optional).
pub fn parse_vector(text: &str) -> Result<Vec<Rational>> {
    let trimmed = text.trim();
    let inner = trimmed
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(trimmed);
    let wrapped = format!("[{inner}]");
    let toks = tokenize(&wrapped)?;
    let mut p = Parser::new(&toks, &wrapped);
    let (items, _) = p.list(0)?;
    if let Some(t) = p.peek() {
        let found = describe(&t.tok);
        return p.fail(format!("unexpected {found}"));
    }
    Ok(items
        .into_iter()
        .map(|q| q.as_constant().unwrap_or_else(Rational::zero))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::polyalg::MultiIndex;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    const BROCKETT: &str = "system brockett\ndim 3\ncontrols 2\nX0 = [0, 0, 0]\nX1 = [1, 0, -x2]\nX2 = [0, 1, x1]\n";

    #[test]
    fn polynomial_expressions() {
        let p = parse_poly("3/2*x1^2*x2 - x3", 3).unwrap();
        assert_eq!(p.to_string(), "3/2*x1^2*x2 - x3");
        let p = parse_poly("-(x1 + 1)^2 + 0.5", 1).unwrap();
        assert_eq!(p.to_string(), "-x1^2 - 2*x1 - 1/2");
        assert_eq!(parse_poly("--x1", 1).unwrap(), Poly::var(1, 0));
        assert_eq!(parse_poly("2^3", 1).unwrap().as_constant(), Some(q(8, 1)));
    }

    #[test]
    fn positioned_expression_errors() {
        let at = |s: &str, dim| match parse_poly(s, dim) {
            Err(Error::Parse { line, column, .. }) => (line, column),
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(at("x1 + x4", 3), (1, 6));
        assert_eq!(at("x1^-2", 1), (1, 4));
        assert_eq!(at("x1^1.5", 1), (1, 4));
        assert_eq!(at("(x1 + 1", 1), (1, 8));
        assert_eq!(at("x1 x2", 2), (1, 4));
        assert_eq!(at("2e3", 1), (1, 2));
        assert_eq!(at("", 1), (1, 1));
        assert_eq!(at("x0", 2), (1, 1));
    }

    #[test]
    fn brockett_document() {
        let sys = parse_system(BROCKETT).unwrap();
        assert_eq!((sys.dim(), sys.m(), sys.name()), (3, 2, "brockett"));
        assert_eq!(sys.field(1).component(2), &-&Poly::var(3, 1));
        assert!(sys.basepoint().is_none());
        assert_eq!(serialize_system(&sys), BROCKETT);
    }

    #[test]
    fn comments_multiline_lists_and_basepoint() {
        let doc = "# header\nsystem s  # name\ndim 2\ncontrols 1\nx0 = [1/2, -0.25]\nX0 = [x2,\n      0]\nX1 = [0, 1]\n";
        let sys = parse_system(doc).unwrap();
        assert_eq!(sys.basepoint().unwrap(), &[q(1, 2), q(-1, 4)]);
        assert_eq!(parse_system(&serialize_system(&sys)).unwrap(), sys);
    }

    #[test]
    fn document_errors() {
        let err = |doc: &str| match parse_system(doc) {
            Err(Error::Parse { line, message, .. }) => (line, message),
            other => panic!("{doc}: {other:?}"),
        };
        let (line, msg) = err("system a\ndim 2\ncontrols 1\nX0 = [0, 0]\nX1 = [1]\n");
        assert_eq!(line, 5);
        assert!(msg.contains("X1 has 1 components"), "{msg}");
        let (line, msg) = err("system a\ndim 1\ncontrols 2\nX0 = [0]\nX1 = [1]\nX2 = [1]\nX3 = [1]\n");
        assert_eq!(line, 7);
        assert!(msg.contains("X3"), "{msg}");
        let (_, msg) = err("system a\ndim 1\ncontrols 1\nX0 = [0]\n");
        assert!(msg.contains("missing field X1"), "{msg}");
        let (line, msg) = err("system a\ndim 1\ndim 1\n");
        assert_eq!(line, 3);
        assert!(msg.contains("duplicate"));
        let (_, msg) = err("system a\ncontrols 0\nX0 = [0]\n");
        assert!(msg.contains("dim"));
        let (line, _) = err("system a\ndim 1\ncontrols 0\nX0 = [y]\n");
        assert_eq!(line, 4);
    }

    #[test]
    fn schedule_literals() {
        let lit = parse_schedule("(1,0):0.1;(0,-1):1/5", 2).unwrap();
        assert_eq!(lit.controls, vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(-1, 1)]]);
        assert_eq!(lit.durations, vec![q(1, 10), q(1, 5)]);
        let s = lit.to_schedule().unwrap();
        assert_eq!(s.to_string(), "(1,0):0.1;(0,-1):0.2");
        assert_eq!(parse_schedule(&s.to_string(), 2).unwrap(), lit);
        assert_eq!(parse_schedule("():0.5", 0).unwrap().durations, vec![q(1, 2)]);
        assert!(parse_schedule("(2,0):0.1", 2).is_err());
        assert!(parse_schedule("(1):0.1", 2).is_err());
        assert!(parse_schedule("(1,0):-0.1", 2).is_err());
        assert!(parse_schedule("(1,0) 0.1", 2).is_err());
        assert!(parse_schedule("", 2).is_err());
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("0, 1/2, -0.25").unwrap(), vec![q(0, 1), q(1, 2), q(-1, 4)]);
        assert_eq!(parse_vector("[1]").unwrap(), vec![q(1, 1)]);
        assert!(parse_vector("1,,2").is_err());
    }

    #[test]
    fn large_exponent_term() {
        let p = parse_poly("x1^58", 4).unwrap();
        assert_eq!(p.coeff(&MultiIndex::new(vec![58, 0, 0, 0])), q(1, 1));
        assert!(parse_poly("x1^100000", 1).is_err());
    }
}
