//! Scalar load expressions in the coordinates x1..x3 and cell variables y1..y3.
//!
//! Grammar: sums and products of numbers, variables and parenthesized terms,
//! unary minus, and `^` with a non-negative integer exponent. All literals are
//! floats, so `1/2` is 0.5.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    /// 0..3 for x1..x3, 3..6 for y1..y3.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
}

impl Node {
    fn eval(&self, v: &[f64; 6]) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(i) => v[*i],
            Node::Neg(a) => -a.eval(v),
            Node::Add(a, b) => a.eval(v) + b.eval(v),
            Node::Sub(a, b) => a.eval(v) - b.eval(v),
            Node::Mul(a, b) => a.eval(v) * b.eval(v),
            Node::Div(a, b) => a.eval(v) / b.eval(v),
            Node::Pow(a, k) => a.eval(v).powi(*k as i32),
        }
    }

    fn uses(&self, vars: std::ops::Range<usize>) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(i) => vars.contains(i),
            Node::Neg(a) | Node::Pow(a, _) => a.uses(vars),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.uses(vars.clone()) || b.uses(vars),
        }
    }
}

const MAX_DEPTH: usize = 64;
const MAX_EXPONENT: u32 = 64;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr { pos: self.pos, msg: msg.into() })
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

    fn expr(&mut self) -> Result<Node> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("expression nested too deeply");
        }
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' { Node::Add(Box::new(lhs), Box::new(rhs)) } else { Node::Sub(Box::new(lhs), Box::new(rhs)) };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' { Node::Mul(Box::new(lhs), Box::new(rhs)) } else { Node::Div(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.depth += 1;
                if self.depth > MAX_DEPTH {
                    return self.err("expression nested too deeply");
                }
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(Node::Neg(Box::new(inner)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("exponent must be a non-negative integer");
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            match text.parse::<u32>() {
                Ok(k) if k <= MAX_EXPONENT => return Ok(Node::Pow(Box::new(base), k)),
                _ => return self.err(format!("exponent {text} out of range")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c @ (b'x' | b'y')) => {
                let d = self.src.get(self.pos + 1).copied();
                match d {
                    Some(k @ b'1'..=b'3') => {
                        self.pos += 2;
                        if self.src.get(self.pos).is_some_and(|b| b.is_ascii_alphanumeric()) {
                            return self.err("unknown variable");
                        }
                        let i = (k - b'1') as usize;
                        Ok(Node::Var(if c == b'x' { i } else { 3 + i }))
                    }
                    _ => self.err("unknown variable (expected x1..x3 or y1..y3)"),
                }
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of expression"),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Node::Num(v)),
            _ => {
                self.pos = start;
                self.err(format!("invalid number '{text}'"))
            }
        }
    }
}

/// A parsed scalar expression; keeps its source text for serialization.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl std::str::FromStr for Expr {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, depth: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(Self { source: src.to_string(), root })
    }

    pub fn constant(c: f64) -> Self {
        Self { source: format!("{c:?}"), root: Node::Num(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        self.root.eval(&[x[0], x[1], x[2], y[0], y[1], y[2]])
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    pub fn depends_on_cell(&self) -> bool {
        self.root.uses(3..6)
    }

    pub fn depends_on_position(&self) -> bool {
        self.root.uses(0..3)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Expr::constant(c)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Three component expressions of a vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorExpr(pub [Expr; 3]);

impl VectorExpr {
    pub fn constant(v: [f64; 3]) -> Self {
        Self(v.map(Expr::constant))
    }

    pub fn zero() -> Self {
        Self::constant([0.0; 3])
    }

    pub fn eval(&self, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        [self.0[0].eval(x, y), self.0[1].eval(x, y), self.0[2].eval(x, y)]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|e| e.as_constant() == Some(0.0))
    }
}

impl Default for VectorExpr {
    fn default() -> Self {
        Self::zero()
    }
}
