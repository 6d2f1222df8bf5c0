//! Arithmetic expressions in `theta` and `phi` for specifying fields on the
//! grid.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'theta' | 'phi' | func '(' expr ')' | '(' expr ')'
//! func  := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{ConvexSurface, GridField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Theta,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::Theta) => theta,
            Expr::Var(Var::Phi) => phi,
            Expr::Neg(e) => -e.eval(theta, phi),
            Expr::Call(f, e) => f.apply(e.eval(theta, phi)),
            Expr::Binary(op, a, b) => {
                let (x, y) = (a.eval(theta, phi), b.eval(theta, phi));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
        }
    }

    pub fn uses_phi(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::Theta) => false,
            Expr::Var(Var::Phi) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_phi(),
            Expr::Binary(_, a, b) => a.uses_phi() || b.uses_phi(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => ATOM_PRECEDENCE,
            Expr::Neg(_) => NEG_PRECEDENCE,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Canonical form: minimal parentheses, no whitespace.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::Theta) => f.write_str("theta"),
            Expr::Var(Var::Phi) => f.write_str("phi"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_wrapped(f, e, e.precedence() < NEG_PRECEDENCE)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (wrap_a, wrap_b) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < NEG_PRECEDENCE)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_wrapped(f, a, wrap_a)?;
                f.write_str(op.symbol())?;
                write_wrapped(f, b, wrap_b)
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::SyntaxError {
            offset,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(self.pos, format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.syntax(self.pos, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let len = self.src[start..]
                    .bytes()
                    .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
                    .count();
                self.pos += len;
                let name = &self.src[start..start + len];
                let func = match name {
                    "theta" => return Ok(Expr::Var(Var::Theta)),
                    "phi" => return Ok(Expr::Var(Var::Phi)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    _ => {
                        return Err(Error::UnknownIdentifier {
                            name: name.to_string(),
                            offset: start,
                        })
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.syntax(self.pos, format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let digits = |mut i: usize| {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut end = digits(start);
        if end < bytes.len() && bytes[end] == b'.' {
            end = digits(end + 1);
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut i = end + 1;
            if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                i += 1;
            }
            let j = digits(i);
            if j > i {
                end = j;
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| self.syntax(start, format!("malformed number `{text}`")))?;
        self.pos = end;
        Ok(Expr::Num(value))
    }
}

/// A parsed expression in `theta` and `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct HExpression {
    root: Expr,
}

impl HExpression {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0 };
        if p.peek().is_none() {
            return Err(p.syntax(p.pos, "empty expression"));
        }
        let root = p.expr()?;
        if p.peek().is_some() {
            let c = text.as_bytes()[p.pos] as char;
            return Err(p.syntax(p.pos, format!("unexpected `{c}`")));
        }
        Ok(HExpression { root })
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.root.eval(theta, phi)
    }

    /// Samples the expression on the grid of `surface`, axisymmetrically when
    /// it does not mention `phi`, and checks that every value is positive.
    pub fn evaluate_on(&self, surface: &ConvexSurface) -> Result<GridField> {
        let field = if self.root.uses_phi() {
            GridField::from_fn(surface, |t, p| self.eval(t, p))
        } else {
            GridField::axisymmetric(surface, |t| self.eval(t, 0.0))
        };
        let np = field.n_phi();
        for (i, v) in field.values().iter().enumerate() {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveOnGrid {
                    theta: surface.theta(i / np),
                    phi: if np == 1 { 0.0 } else { surface.phi(i % np) },
                    value: *v,
                });
            }
        }
        Ok(field)
    }
}

impl fmt::Display for HExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for HExpression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HExpression::parse(s)
    }
}

impl Serialize for HExpression {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HExpression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        HExpression::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, SurfaceSpec};

    fn eval(s: &str, t: f64, p: f64) -> f64 {
        HExpression::parse(s).unwrap().eval(t, p)
    }

    #[test]
    fn arithmetic() {
        assert!((eval("2*(1+0.3*cos(theta))", 0.0, 0.0) - 2.6).abs() < 1e-15);
        assert_eq!(eval("2", 1.0, 2.0), 2.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(eval("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(eval("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(eval("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(eval("1.5e2 + .5", 0.0, 0.0), 150.5);
        assert!(matches!(HExpression::parse("1e999"), Err(Error::SyntaxError { offset: 0, .. })));
        assert_eq!(eval("sqrt(exp(0)) * phi", 0.0, 3.0), 3.0);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            HExpression::parse("2*(1+x)"),
            Err(Error::UnknownIdentifier {
                name: "x".into(),
                offset: 5
            })
        );
        assert!(matches!(HExpression::parse("2*(1+"), Err(Error::SyntaxError { offset: 5, .. })));
        assert!(matches!(HExpression::parse("2 3"), Err(Error::SyntaxError { offset: 2, .. })));
        assert!(matches!(HExpression::parse("  "), Err(Error::SyntaxError { .. })));
        assert!(matches!(HExpression::parse("cos theta"), Err(Error::SyntaxError { offset: 4, .. })));
        assert!(matches!(HExpression::parse("2*#"), Err(Error::SyntaxError { offset: 2, .. })));
    }

    #[test]
    fn canonical_form() {
        let cases = [
            ("2 * ( 1 + 0.3*cos(theta) )", "2*(1+0.3*cos(theta))"),
            ("(2^3)^2", "(2^3)^2"),
            ("2^(3^2)", "2^3^2"),
            ("(-2)^2", "(-2)^2"),
            ("-(2^2)", "-2^2"),
            ("1-(2-3)", "1-(2-3)"),
            ("(1-2)-3", "1-2-3"),
        ];
        for (src, want) in cases {
            let e = HExpression::parse(src).unwrap();
            assert_eq!(e.to_string(), want);
            assert_eq!(HExpression::parse(want).unwrap(), e);
        }
    }

    #[test]
    fn grid_evaluation() {
        let s = build_surface(&SurfaceSpec::sphere(1.0, 32).with_n_phi(16)).unwrap();
        let a = HExpression::parse("2*(1+0.3*cos(theta))").unwrap().evaluate_on(&s).unwrap();
        assert_eq!(a.n_phi(), 1);
        let b = HExpression::parse("2*(1+0.5*sin(theta)*cos(phi))")
            .unwrap()
            .evaluate_on(&s)
            .unwrap();
        assert_eq!(b.n_phi(), 16);
        assert!(b.min() >= 1.0);
        match HExpression::parse("cos(theta)").unwrap().evaluate_on(&s) {
            Err(Error::NonPositiveOnGrid { theta, value, .. }) => {
                assert_eq!(theta, s.theta(16));
                assert!(value <= 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serde_uses_canonical_text() {
        let e = HExpression::parse("2 *(1+ theta)").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"2*(1+theta)\"");
        let back: HExpression = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<HExpression>("\"2*y\"").is_err());
    }
}
