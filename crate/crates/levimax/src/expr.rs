//! Expression ASTs over the real coordinates `x1..x{2n}`.
//!
//! Grammar (EBNF, whitespace-insensitive):
//!
//! ```text
//! expr    := term { ("+" | "-") term } ;
//! term    := factor { ("*" | "/") factor } ;
//! factor  := ["-"] power ;
//! power   := atom [ "^" integer ] ;
//! atom    := number | variable | function "(" expr ")" | "(" expr ")" ;
//! function := "exp" | "log" | "sin" | "cos" | "sqrt" ;
//! variable := "x" digits ;
//! ```
//!
//! The coordinate convention is `z_j = x_{2j-1} + i x_{2j}`; a dimension-`n`
//! expression may use `x1..x{2n}`.

use crate::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 1-based coordinate index.
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    /// Integer power; negative exponents allowed.
    Pow(Arc<Expr>, i32),
    Neg(Arc<Expr>),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Sqrt(Arc<Expr>),
}

/// A parsed expression together with the complex dimension it was declared
/// for. Variable indices are guaranteed to lie in `1..=2n`.
#[derive(Debug, Clone)]
pub struct Expression {
    pub n: usize,
    pub root: Arc<Expr>,
}

impl Expression {
    pub fn parse(text: &str, n: usize) -> Result<Expression> {
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
            max_var: 2 * n,
            n,
        };
        p.skip_ws();
        if p.pos >= p.bytes.len() {
            return Err(Error::Syntax {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let root = p.parse_expr()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(Error::Syntax {
                position: p.pos,
                message: format!("unexpected trailing input `{}`", &text[p.pos..]),
            });
        }
        Ok(Expression { n, root: Arc::new(root) })
    }

    pub fn constant(n: usize, c: f64) -> Expression {
        Expression { n, root: Arc::new(Expr::Const(c)) }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        debug_assert!(x.len() >= 2 * self.n);
        eval_node(&self.root, x)
    }

    /// Symbolic partial derivative with respect to `x_idx` (1-based).
    pub fn diff(&self, idx: usize) -> Expression {
        Expression {
            n: self.n,
            root: diff_node(&self.root, idx),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "{a}^{k}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

fn eval_node(e: &Expr, x: &[f64]) -> Result<f64> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Var(i) => x[*i - 1],
        Expr::Add(a, b) => eval_node(a, x)? + eval_node(b, x)?,
        Expr::Sub(a, b) => eval_node(a, x)? - eval_node(b, x)?,
        Expr::Mul(a, b) => eval_node(a, x)? * eval_node(b, x)?,
        Expr::Div(a, b) => eval_node(a, x)? / eval_node(b, x)?,
        Expr::Pow(a, k) => eval_node(a, x)?.powi(*k),
        Expr::Neg(a) => -eval_node(a, x)?,
        Expr::Exp(a) => eval_node(a, x)?.exp(),
        Expr::Log(a) => {
            let v = eval_node(a, x)?;
            if v <= 0.0 {
                return Err(Error::Domain { op: "log", arg: v });
            }
            v.ln()
        }
        Expr::Sin(a) => eval_node(a, x)?.sin(),
        Expr::Cos(a) => eval_node(a, x)?.cos(),
        Expr::Sqrt(a) => {
            let v = eval_node(a, x)?;
            if v < 0.0 {
                return Err(Error::Domain { op: "sqrt", arg: v });
            }
            v.sqrt()
        }
    })
}

// Light constant folding keeps second derivatives from blowing up in size.
fn add(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Const(x), Expr::Const(y)) => Arc::new(Expr::Const(x + y)),
        (Expr::Const(c), _) if *c == 0.0 => b,
        (_, Expr::Const(c)) if *c == 0.0 => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

fn sub(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Const(x), Expr::Const(y)) => Arc::new(Expr::Const(x - y)),
        (_, Expr::Const(c)) if *c == 0.0 => a,
        (Expr::Const(c), _) if *c == 0.0 => Arc::new(Expr::Neg(b)),
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

fn mul(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Const(x), Expr::Const(y)) => Arc::new(Expr::Const(x * y)),
        (Expr::Const(c), _) if *c == 0.0 => a,
        (_, Expr::Const(c)) if *c == 0.0 => b,
        (Expr::Const(c), _) if *c == 1.0 => b,
        (_, Expr::Const(c)) if *c == 1.0 => a,
        _ => Arc::new(Expr::Mul(a, b)),
    }
}

fn div(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Const(c), _) if *c == 0.0 => a,
        (_, Expr::Const(c)) if *c == 1.0 => a,
        _ => Arc::new(Expr::Div(a, b)),
    }
}

fn diff_node(e: &Expr, idx: usize) -> Arc<Expr> {
    let zero = || Arc::new(Expr::Const(0.0));
    match e {
        Expr::Const(_) => zero(),
        Expr::Var(i) => Arc::new(Expr::Const(if *i == idx { 1.0 } else { 0.0 })),
        Expr::Add(a, b) => add(diff_node(a, idx), diff_node(b, idx)),
        Expr::Sub(a, b) => sub(diff_node(a, idx), diff_node(b, idx)),
        Expr::Mul(a, b) => add(
            mul(diff_node(a, idx), b.clone()),
            mul(a.clone(), diff_node(b, idx)),
        ),
        Expr::Div(a, b) => {
            let num = sub(
                mul(diff_node(a, idx), b.clone()),
                mul(a.clone(), diff_node(b, idx)),
            );
            div(num, Arc::new(Expr::Pow(b.clone(), 2)))
        }
        Expr::Pow(a, k) => {
            if *k == 0 {
                return zero();
            }
            mul(
                mul(
                    Arc::new(Expr::Const(*k as f64)),
                    Arc::new(Expr::Pow(a.clone(), k - 1)),
                ),
                diff_node(a, idx),
            )
        }
        Expr::Neg(a) => Arc::new(Expr::Neg(diff_node(a, idx))),
        Expr::Exp(a) => mul(Arc::new(Expr::Exp(a.clone())), diff_node(a, idx)),
        Expr::Log(a) => div(diff_node(a, idx), a.clone()),
        Expr::Sin(a) => mul(Arc::new(Expr::Cos(a.clone())), diff_node(a, idx)),
        Expr::Cos(a) => Arc::new(Expr::Neg(mul(
            Arc::new(Expr::Sin(a.clone())),
            diff_node(a, idx),
        ))),
        Expr::Sqrt(a) => div(
            diff_node(a, idx),
            mul(Arc::new(Expr::Const(2.0)), Arc::new(Expr::Sqrt(a.clone()))),
        ),
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    max_var: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(Arc::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.parse_int_exponent()?;
            return Ok(Expr::Pow(Arc::new(base), k));
        }
        Ok(base)
    }

    fn parse_int_exponent(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        let mut sign = 1i32;
        if self.bytes.get(self.pos) == Some(&b'-') {
            sign = -1;
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(Error::Syntax {
                position: start,
                message: "expected integer exponent after `^`".into(),
            });
        }
        let s = std::str::from_utf8(&self.bytes[digits_start..self.pos]).unwrap();
        let k: i32 = s.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("exponent `{s}` out of range"),
        })?;
        Ok(sign * k)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_identifier(),
            Some(c) => Err(self.err(format!("unexpected character `{}`", c as char))),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self.bytes[start..self.pos].iter().any(u8::is_ascii_digit)
            {
                self.pos += 1;
                if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: f64 = s.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("malformed number `{s}`"),
        })?;
        Ok(Expr::Const(v))
    }

    fn parse_identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = rest.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("variable index `{rest}` out of range"),
                })?;
                if index == 0 || index > self.max_var {
                    return Err(Error::VariableOutOfRange {
                        index,
                        n: self.n,
                        max: self.max_var,
                    });
                }
                return Ok(Expr::Var(index));
            }
        }
        let func = match name {
            "exp" | "log" | "sin" | "cos" | "sqrt" => name.to_string(),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            _ => return Err(Error::UnknownIdentifier(name.to_string())),
        };
        if self.peek() != Some(b'(') {
            return Err(self.err(format!("expected `(` after `{func}`")));
        }
        self.pos += 1;
        let arg = Arc::new(self.parse_expr()?);
        if self.peek() != Some(b')') {
            return Err(self.err("expected `)`"));
        }
        self.pos += 1;
        Ok(match func.as_str() {
            "exp" => Expr::Exp(arg),
            "log" => Expr::Log(arg),
            "sin" => Expr::Sin(arg),
            "cos" => Expr::Cos(arg),
            "sqrt" => Expr::Sqrt(arg),
            _ => unreachable!(),
        })
    }
}
