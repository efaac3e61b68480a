//! Scalar field expressions over base coordinates `x1 … xn`.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := atom ("^" int)? | "-" factor
//! atom   := number | ident | "(" expr ")" | func "(" expr ")"
//! func   := "sqrt" | "sin" | "cos" | "exp"
//! ident  := "x" int            (1-based)
//! number := decimal literal, or an integer fraction "p/q"
//! ```
//!
//! An integer literal immediately followed by `/ int` is read as an exact
//! fraction unless the denominator is itself raised to a power, so `1/2^2`
//! still means `1/(2^2)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        match s {
            "sqrt" => Some(Func::Sqrt),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree. `Var(i)` is the 0-based coordinate index.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Rational(u64, u64),
    Var(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Largest variable index + 1, i.e. the smallest admissible base dimension.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Rational(..) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => a.min_dim(),
            Expr::Bin(_, a, b) => a.min_dim().max(b.min_dim()),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let need = self.min_dim();
        if need > dim {
            return Err(Error::VariableOutOfRange {
                index: need,
                dim,
            });
        }
        Ok(())
    }

    /// Plain floating point evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Rational(p, q) => {
                if *q == 0 {
                    return Err(Error::DivisionByZeroConstantTerm);
                }
                *p as f64 / *q as f64
            }
            Expr::Var(i) => *x.get(*i).ok_or(Error::VariableOutOfRange {
                index: i + 1,
                dim: x.len(),
            })?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Call(f, a) => {
                let a = a.eval(x)?;
                match f {
                    Func::Sqrt => {
                        if a <= 0.0 {
                            return Err(Error::SqrtOfNonpositive(a));
                        }
                        a.sqrt()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                }
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::DivisionByZeroConstantTerm);
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, n) => {
                let a = a.eval(x)?;
                if *n < 0 && a == 0.0 {
                    return Err(Error::DivisionByZeroConstantTerm);
                }
                a.powi(*n)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("non-finite value in {self}")))
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            // Rationals print as "p/q", which only re-lexes as a literal in
            // multiplicative position; guard them like a product.
            Expr::Rational(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.write_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write_number(f, *v),
            Expr::Rational(p, q) => write!(f, "{p}/{q}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_prec(f, 3)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                write!(f, ")")
            }
            Expr::Pow(a, n) => {
                a.write_prec(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                };
                a.write_prec(f, lp)?;
                write!(f, "{sym}")?;
                let literal_rhs = matches!(**b, Expr::Num(_) | Expr::Rational(..));
                if *op == BinOp::Div && literal_rhs {
                    write!(f, "(")?;
                    b.write_prec(f, 0)?;
                    write!(f, ")")
                } else {
                    b.write_prec(f, rp)
                }
            }
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        // Only reachable for hand-built trees; keeps the output parseable.
        write!(f, "(-")?;
        write_number(f, -v)?;
        return write!(f, ")");
    }
    if v.fract() == 0.0 && v < 1e15 {
        write!(f, "{}", v as u64)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

// ---------------------------------------------------------------------------
// Lexer / parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Float(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            toks: Vec::new(),
        };
        let mut i = 0;
        while i < lx.src.len() {
            let c = lx.src[i];
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => i += 1,
                b'+' => lx.push(Tok::Plus, &mut i),
                b'-' => lx.push(Tok::Minus, &mut i),
                b'*' => lx.push(Tok::Star, &mut i),
                b'/' => lx.push(Tok::Slash, &mut i),
                b'^' => lx.push(Tok::Caret, &mut i),
                b'(' => lx.push(Tok::LParen, &mut i),
                b')' => lx.push(Tok::RParen, &mut i),
                b'0'..=b'9' | b'.' => i = lx.number(i)?,
                c if c.is_ascii_alphabetic() => {
                    let start = i;
                    while i < lx.src.len() && lx.src[i].is_ascii_alphanumeric() {
                        i += 1;
                    }
                    let word = std::str::from_utf8(&lx.src[start..i]).unwrap().to_string();
                    lx.toks.push((Tok::Ident(word), start));
                }
                _ => {
                    return Err(Error::Parse {
                        offset: i,
                        expected: vec!["number", "identifier", "operator", "("],
                    })
                }
            }
        }
        lx.toks.push((Tok::End, lx.src.len()));
        Ok(lx.toks)
    }

    fn push(&mut self, t: Tok, i: &mut usize) {
        self.toks.push((t, *i));
        *i += 1;
    }

    fn number(&mut self, start: usize) -> Result<usize> {
        let s = self.src;
        let mut i = start;
        let digits = |i: &mut usize| {
            let b = *i;
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > b
        };
        let int_part = digits(&mut i);
        let mut is_int = true;
        if i < s.len() && s[i] == b'.' {
            is_int = false;
            i += 1;
            let frac = digits(&mut i);
            if !int_part && !frac {
                return Err(Error::Parse {
                    offset: start,
                    expected: vec!["digit"],
                });
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                is_int = false;
                i = j;
                digits(&mut i);
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap();
        let tok = if is_int {
            match text.parse::<u64>() {
                Ok(v) => Tok::Int(v),
                Err(_) => Tok::Float(text.parse::<f64>().unwrap_or(f64::INFINITY)),
            }
        } else {
            Tok::Float(text.parse::<f64>().map_err(|_| Error::Parse {
                offset: start,
                expected: vec!["number"],
            })?)
        };
        self.toks.push((tok, start));
        Ok(i)
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: Vec<&'static str>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            expected,
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.factor()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let neg = if *self.peek() == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            match self.bump() {
                Tok::Int(n) if n <= i32::MAX as u64 => {
                    let n = n as i32;
                    return Ok(Expr::pow(base, if neg { -n } else { n }));
                }
                _ => {
                    self.pos -= 1;
                    return self.fail(vec!["integer exponent"]);
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(p) => {
                self.bump();
                // "p/q" literal
                if let (Tok::Slash, Tok::Int(q)) = (self.peek(), self.peek_at(1)) {
                    let q = *q;
                    if q != 0 && *self.peek_at(2) != Tok::Caret {
                        self.bump();
                        self.bump();
                        return Ok(Expr::Rational(p, q));
                    }
                }
                Ok(Expr::Num(p as f64))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return self.fail(vec!["("]);
                    }
                    self.bump();
                    let e = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(func, e));
                }
                let idx = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1);
                match idx {
                    Some(k) => {
                        self.bump();
                        if k > self.dim {
                            return Err(Error::VariableOutOfRange {
                                index: k,
                                dim: self.dim,
                            });
                        }
                        Ok(Expr::Var(k - 1))
                    }
                    None => Err(Error::Parse {
                        offset: at,
                        expected: vec!["x<int>", "sqrt", "sin", "cos", "exp"],
                    }),
                }
            }
            _ => self.fail(vec!["number", "x<int>", "function", "(", "-"]),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.fail(vec![")", "operator"])
        }
    }
}

/// Parse `src` as an expression over coordinates `x1 … x{dim}`.
pub fn parse_expression(src: &str, dim: usize) -> Result<Expr> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(vec!["operator", "end of input"]);
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = Error;

    /// Parses without a dimension bound.
    fn from_str(s: &str) -> Result<Expr> {
        parse_expression(s, usize::MAX)
    }
}
