//! Expressions for sections, embeddings and perturbation pieces.
//!
//! Grammar (loosest to tightest): `+ -`, `* /`, unary `-`, `^n`, atoms.
//! Atoms are variables `x1..xn`, literals (`3`, `2/5`, `0.25`; a literal
//! `p/q` is a single token and must not contain spaces), `sinpi(e)`,
//! `cospi(e)`, the constant `pi` and parenthesised expressions. Printing
//! writes division as ` / ` so it never collides with a literal.

use crate::linalg::{rat, to_f64, RationalMatrix, Q};
use num::bigint::BigInt;
use num::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Always nonnegative; negative constants are `Neg(Const)`.
    Const(Q),
    /// The constant π; only needed for derivatives of `sinpi`/`cospi`.
    Pi,
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    SinPi(Box<Expr>),
    CosPi(Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{location}`")]
    DivisionByZero { location: String },
    #[error("variable x{index} outside dimension {dim}")]
    Dimension { index: usize, dim: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

pub fn constant(c: Q) -> Expr {
    if c.is_negative() {
        Expr::Neg(Box::new(Expr::Const(-c)))
    } else {
        Expr::Const(c)
    }
}

pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

impl Expr {
    pub fn as_const(&self) -> Option<Q> {
        match self {
            Expr::Const(c) => Some(c.clone()),
            Expr::Neg(a) => a.as_const().map(|c| -c),
            _ => None,
        }
    }

    fn is_zero_const(&self) -> bool {
        self.as_const().map_or(false, |c| c.is_zero())
    }

    fn is_one_const(&self) -> bool {
        self.as_const().map_or(false, |c| c.is_one())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return constant(x + y);
        }
        if a.is_zero_const() {
            return b;
        }
        if b.is_zero_const() {
            return a;
        }
        if let Expr::Neg(inner) = &b {
            return Expr::Sub(Box::new(a), inner.clone());
        }
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return constant(x - y);
        }
        if b.is_zero_const() {
            return a;
        }
        if a.is_zero_const() {
            return Expr::neg(b);
        }
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return constant(x * y);
        }
        if a.is_zero_const() || b.is_zero_const() {
            return Expr::Const(Q::zero());
        }
        if a.is_one_const() {
            return b;
        }
        if b.is_one_const() {
            return a;
        }
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if !y.is_zero() {
                return constant(x / y);
            }
        }
        if b.is_one_const() {
            return a;
        }
        if a.is_zero_const() {
            return Expr::Const(Q::zero());
        }
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Neg(inner) => *inner,
            Expr::Const(c) if c.is_zero() => Expr::Const(c),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        match n {
            0 => Expr::Const(Q::one()),
            1 => a,
            _ => match a.as_const() {
                Some(c) => constant(num::pow(c, n as usize)),
                None => Expr::Pow(Box::new(a), n),
            },
        }
    }

    pub fn sinpi(a: Expr) -> Expr {
        Expr::SinPi(Box::new(a))
    }

    pub fn cospi(a: Expr) -> Expr {
        Expr::CosPi(Box::new(a))
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.arity().max(b.arity()),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::SinPi(a) | Expr::CosPi(a) => a.arity(),
        }
    }

    pub fn has_trig(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::SinPi(_) | Expr::CosPi(_) | Expr::Pi => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.has_trig() || b.has_trig(),
            Expr::Neg(a) | Expr::Pow(a, _) => a.has_trig(),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::SinPi(_) | Expr::CosPi(_) | Expr::Pi => false,
            Expr::Div(a, b) => a.is_polynomial() && b.as_const().map_or(false, |c| !c.is_zero()),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_polynomial() && b.is_polynomial(),
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_polynomial(),
        }
    }

    /// `(coefficients, constant)` when the expression is affine in
    /// `x_1..x_dim`.
    pub fn affine_form(&self, dim: usize) -> Option<(Vec<Q>, Q)> {
        match self {
            Expr::Const(c) => Some((vec![Q::zero(); dim], c.clone())),
            Expr::Pi => None,
            Expr::Var(i) => {
                if *i >= dim {
                    return None;
                }
                let mut v = vec![Q::zero(); dim];
                v[*i] = Q::one();
                Some((v, Q::zero()))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (ca, ka) = a.affine_form(dim)?;
                let (cb, kb) = b.affine_form(dim)?;
                let s = if matches!(self, Expr::Add(..)) { Q::one() } else { -Q::one() };
                Some((ca.iter().zip(&cb).map(|(x, y)| x + &s * y).collect(), ka + s * kb))
            }
            Expr::Neg(a) => {
                let (c, k) = a.affine_form(dim)?;
                Some((c.into_iter().map(|x| -x).collect(), -k))
            }
            Expr::Mul(a, b) => {
                let (ca, ka) = a.affine_form(dim)?;
                let (cb, kb) = b.affine_form(dim)?;
                if ca.iter().all(|x| x.is_zero()) {
                    Some((cb.iter().map(|x| x * &ka).collect(), ka * kb))
                } else if cb.iter().all(|x| x.is_zero()) {
                    Some((ca.iter().map(|x| x * &kb).collect(), ka * kb))
                } else {
                    None
                }
            }
            Expr::Div(a, b) => {
                let d = b.as_const()?;
                if d.is_zero() {
                    return None;
                }
                let (c, k) = a.affine_form(dim)?;
                Some((c.into_iter().map(|x| x / &d).collect(), k / d))
            }
            Expr::Pow(a, n) => {
                let (c, k) = a.affine_form(dim)?;
                if c.iter().all(|x| x.is_zero()) {
                    Some((c, num::pow(k, *n as usize)))
                } else if *n == 1 {
                    Some((c, k))
                } else {
                    None
                }
            }
            Expr::SinPi(a) | Expr::CosPi(a) => {
                let (c, k) = a.affine_form(dim)?;
                if !c.iter().all(|x| x.is_zero()) {
                    return None;
                }
                let v = if matches!(self, Expr::SinPi(_)) { exact_sinpi(&k)? } else { exact_cospi(&k)? };
                Some((c, v))
            }
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => to_f64(c),
            Expr::Pi => PI,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::Dimension { index: i + 1, dim: x.len() })?,
            Expr::Add(a, b) => a.eval_f64(x)? + b.eval_f64(x)?,
            Expr::Sub(a, b) => a.eval_f64(x)? - b.eval_f64(x)?,
            Expr::Mul(a, b) => a.eval_f64(x)? * b.eval_f64(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_f64(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero { location: self.to_string() });
                }
                a.eval_f64(x)? / d
            }
            Expr::Neg(a) => -a.eval_f64(x)?,
            Expr::Pow(a, n) => a.eval_f64(x)?.powi(*n as i32),
            Expr::SinPi(a) => sinpi_f64(a.eval_f64(x)?),
            Expr::CosPi(a) => sinpi_f64(a.eval_f64(x)? + 0.5),
        })
    }

    /// Exact value at a rational point; `Ok(None)` when a trig term lands
    /// on an irrational value.
    pub fn eval_exact(&self, x: &[Q]) -> Result<Option<Q>, EvalError> {
        macro_rules! sub {
            ($e:expr) => {
                match $e.eval_exact(x)? {
                    Some(v) => v,
                    None => return Ok(None),
                }
            };
        }
        Ok(Some(match self {
            Expr::Const(c) => c.clone(),
            Expr::Pi => return Ok(None),
            Expr::Var(i) => x.get(*i).ok_or(EvalError::Dimension { index: i + 1, dim: x.len() })?.clone(),
            Expr::Add(a, b) => sub!(a) + sub!(b),
            Expr::Sub(a, b) => sub!(a) - sub!(b),
            Expr::Mul(a, b) => sub!(a) * sub!(b),
            Expr::Div(a, b) => {
                let n = sub!(a);
                let d = sub!(b);
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero { location: self.to_string() });
                }
                n / d
            }
            Expr::Neg(a) => -sub!(a),
            Expr::Pow(a, n) => num::pow(sub!(a), *n as usize),
            Expr::SinPi(a) => match exact_sinpi(&sub!(a)) {
                Some(v) => v,
                None => return Ok(None),
            },
            Expr::CosPi(a) => match exact_cospi(&sub!(a)) {
                Some(v) => v,
                None => return Ok(None),
            },
        }))
    }

    /// Exact value when available, otherwise the float value rationalized.
    pub fn eval_q(&self, x: &[Q]) -> Result<Q, EvalError> {
        match self.eval_exact(x)? {
            Some(v) => Ok(v),
            None => {
                let xf: Vec<f64> = x.iter().map(to_f64).collect();
                Ok(rat(self.eval_f64(&xf)?))
            }
        }
    }

    pub fn diff(&self, v: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Pi => Expr::Const(Q::zero()),
            Expr::Var(i) => Expr::Const(if *i == v { Q::one() } else { Q::zero() }),
            Expr::Add(a, b) => Expr::add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => Expr::sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(v), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero_const() {
                    Expr::div(da, (**b).clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                        Expr::pow((**b).clone(), 2),
                    )
                }
            }
            Expr::Neg(a) => Expr::neg(a.diff(v)),
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::Const(Q::from_integer(BigInt::from(*n))), Expr::pow((**a).clone(), n - 1)),
                a.diff(v),
            ),
            Expr::SinPi(a) => Expr::mul(Expr::mul(Expr::Pi, Expr::cospi((**a).clone())), a.diff(v)),
            Expr::CosPi(a) => Expr::neg(Expr::mul(Expr::mul(Expr::Pi, Expr::sinpi((**a).clone())), a.diff(v))),
        }
    }

    /// Substitute expressions for the variables.
    pub fn substitute(&self, args: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.clone()),
            Expr::Pi => Expr::Pi,
            Expr::Var(i) => args[*i].clone(),
            Expr::Add(a, b) => Expr::add(a.substitute(args), b.substitute(args)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(args), b.substitute(args)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(args), b.substitute(args)),
            Expr::Div(a, b) => Expr::div(a.substitute(args), b.substitute(args)),
            Expr::Neg(a) => Expr::neg(a.substitute(args)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(args), *n),
            Expr::SinPi(a) => Expr::sinpi(a.substitute(args)),
            Expr::CosPi(a) => Expr::cospi(a.substitute(args)),
        }
    }

    pub fn parse(s: &str) -> Result<Expr, ParseError> {
        let toks = lex(s)?;
        let mut p = Parser { toks, i: 0, len: s.len() };
        let e = p.expr()?;
        if p.i < p.toks.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if !c.is_integer() => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " + ")?;
                b.write_at(f, 2)
            }
            Expr::Sub(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " - ")?;
                b.write_at(f, 2)
            }
            Expr::Mul(a, b) => {
                a.write_at(f, 2)?;
                write!(f, " * ")?;
                b.write_at(f, 3)
            }
            Expr::Div(a, b) => {
                a.write_at(f, 2)?;
                write!(f, " / ")?;
                b.write_at(f, 3)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 3)
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::SinPi(a) => {
                write!(f, "sinpi(")?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
            Expr::CosPi(a) => {
                write!(f, "cospi(")?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

fn sinpi_f64(t: f64) -> f64 {
    let r = t.rem_euclid(2.0);
    // exact at multiples of 1/2 so that sign tests do not see 1e-16 noise
    if r == 0.0 || r == 1.0 {
        0.0
    } else if r == 0.5 {
        1.0
    } else if r == 1.5 {
        -1.0
    } else {
        (PI * r).sin()
    }
}

/// `sin(π t)` when it is rational.
pub fn exact_sinpi(t: &Q) -> Option<Q> {
    let two = Q::from_integer(BigInt::from(2));
    let r = t - (t / &two).floor() * &two;
    let k = &r * Q::from_integer(BigInt::from(6));
    if !k.is_integer() {
        return None;
    }
    let half = Q::new(BigInt::from(1), BigInt::from(2));
    match k.to_integer().to_i64()? {
        0 | 6 => Some(Q::zero()),
        1 | 5 => Some(half),
        3 => Some(Q::one()),
        7 | 11 => Some(-half),
        9 => Some(-Q::one()),
        _ => None,
    }
}

pub fn exact_cospi(t: &Q) -> Option<Q> {
    exact_sinpi(&(t + Q::new(BigInt::from(1), BigInt::from(2))))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Q),
    Pi,
    Var(usize),
    Func(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mut val: Q = Q::from_integer(s[start..i].parse::<BigInt>().unwrap());
            if i < b.len() && b[i] == b'.' {
                let fs = i + 1;
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                if fs == i {
                    return Err(ParseError { pos: i, msg: "digits expected after '.'".into() });
                }
                let frac: BigInt = s[fs..i].parse().unwrap();
                val += Q::new(frac, num::pow(BigInt::from(10), i - fs));
            }
            if i + 1 < b.len() && b[i] == b'/' && b[i + 1].is_ascii_digit() {
                let ds = i + 1;
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let d: BigInt = s[ds..i].parse().unwrap();
                if d.is_zero() {
                    return Err(ParseError { pos: ds, msg: "zero denominator".into() });
                }
                val /= Q::from_integer(d);
            }
            out.push((Tok::Num(val), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let w = &s[start..i];
            if let Some(n) = w.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
                if n == 0 {
                    return Err(ParseError { pos: start, msg: "variables start at x1".into() });
                }
                out.push((Tok::Var(n - 1), start));
            } else if w == "pi" {
                out.push((Tok::Pi, start));
            } else if w == "sinpi" || w == "cospi" {
                out.push((Tok::Func(w.to_string()), start));
            } else {
                return Err(ParseError { pos: start, msg: format!("unknown identifier `{w}`") });
            }
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ParseError { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    len: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> ParseError {
        let pos = self.toks.get(self.i).map_or(self.len, |t| t.1);
        ParseError { pos, msg: msg.into() }
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.i) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.i += 1;
            let r = self.term()?;
            e = if c == '+' { Expr::Add(Box::new(e), Box::new(r)) } else { Expr::Sub(Box::new(e), Box::new(r)) };
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.i += 1;
            let r = self.unary()?;
            e = if c == '*' { Expr::Mul(Box::new(e), Box::new(r)) } else { Expr::Div(Box::new(e), Box::new(r)) };
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op() == Some('-') {
            self.i += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.peek_op() == Some('^') {
            self.i += 1;
            match self.toks.get(self.i) {
                Some((Tok::Num(n), _)) if n.is_integer() => {
                    let k = n.to_integer().to_u32().ok_or_else(|| self.err("exponent too large"))?;
                    self.i += 1;
                    e = Expr::Pow(Box::new(e), k);
                }
                _ => return Err(self.err("natural exponent expected")),
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((t, _)) = self.toks.get(self.i).cloned() else {
            return Err(self.err("unexpected end of input"));
        };
        self.i += 1;
        match t {
            Tok::Num(q) => Ok(Expr::Const(q)),
            Tok::Pi => Ok(Expr::Pi),
            Tok::Var(v) => Ok(Expr::Var(v)),
            Tok::Func(name) => {
                self.expect('(')?;
                let a = self.expr()?;
                self.expect(')')?;
                Ok(if name == "sinpi" { Expr::SinPi(Box::new(a)) } else { Expr::CosPi(Box::new(a)) })
            }
            Tok::Op('(') => {
                let a = self.expr()?;
                self.expect(')')?;
                Ok(a)
            }
            Tok::Op(c) => {
                self.i -= 1;
                Err(self.err(&format!("unexpected `{c}`")))
            }
        }
    }
}

/// A map `R^in_dim -> R^out_dim` given componentwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExprMap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub components: Vec<Expr>,
}

impl ExprMap {
    pub fn new(in_dim: usize, components: Vec<Expr>) -> ExprMap {
        assert!(components.iter().all(|c| c.arity() <= in_dim), "free variable beyond x{in_dim}");
        ExprMap { in_dim, out_dim: components.len(), components }
    }

    pub fn identity(dim: usize) -> ExprMap {
        ExprMap::new(dim, (0..dim).map(Expr::Var).collect())
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> ExprMap {
        ExprMap::new(in_dim, vec![Expr::Const(Q::zero()); out_dim])
    }

    /// Affine map `x -> A x + b`.
    pub fn affine(a: &RationalMatrix, b: &[Q]) -> ExprMap {
        let comps = (0..a.rows)
            .map(|i| {
                let mut e = constant(b[i].clone());
                for j in 0..a.cols {
                    let c = a[(i, j)].clone();
                    if c.is_zero() {
                        continue;
                    }
                    let term = Expr::mul(constant(c), Expr::Var(j));
                    e = Expr::add(e, term);
                }
                e
            })
            .collect();
        ExprMap::new(a.cols, comps)
    }

    pub fn parse(in_dim: usize, parts: &[&str]) -> Result<ExprMap, ParseError> {
        let comps = parts.iter().map(|p| Expr::parse(p)).collect::<Result<Vec<_>, _>>()?;
        if let Some(c) = comps.iter().find(|c| c.arity() > in_dim) {
            return Err(ParseError { pos: 0, msg: format!("`{c}` uses a variable beyond x{in_dim}") });
        }
        Ok(ExprMap { in_dim, out_dim: comps.len(), components: comps })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval_f64(x)).collect()
    }

    pub fn eval_exact(&self, x: &[Q]) -> Result<Option<Vec<Q>>, EvalError> {
        let mut out = Vec::with_capacity(self.out_dim);
        for c in &self.components {
            match c.eval_exact(x)? {
                Some(v) => out.push(v),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    pub fn eval_q(&self, x: &[Q]) -> Result<Vec<Q>, EvalError> {
        self.components.iter().map(|c| c.eval_q(x)).collect()
    }

    /// Symbolic partial derivatives, `out_dim x in_dim`.
    pub fn derivative(&self) -> Vec<Vec<Expr>> {
        self.components.iter().map(|c| (0..self.in_dim).map(|j| c.diff(j)).collect()).collect()
    }

    /// Jacobian at a rational point: exact where the entries are rational,
    /// rationalized floats otherwise.
    pub fn jacobian(&self, x: &[Q]) -> RationalMatrix {
        let d = self.derivative();
        let rows: Vec<Vec<Q>> = d
            .iter()
            .map(|r| r.iter().map(|e| e.eval_q(x).expect("jacobian evaluation")).collect())
            .collect();
        let mut m = RationalMatrix::zeros(self.out_dim, self.in_dim);
        for (i, r) in rows.into_iter().enumerate() {
            for (j, v) in r.into_iter().enumerate() {
                m.entries[i * self.in_dim + j] = v;
            }
        }
        m
    }

    pub fn jacobian_f64(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.derivative().iter().map(|r| r.iter().map(|e| e.eval_f64(x)).collect()).collect()
    }

    /// Central differences with the given step.
    pub fn finite_difference_jacobian(&self, x: &[f64], step: f64) -> Result<Vec<Vec<f64>>, EvalError> {
        let mut out = vec![vec![0.0; self.in_dim]; self.out_dim];
        let mut y = x.to_vec();
        for j in 0..self.in_dim {
            y[j] = x[j] + step;
            let fp = self.eval(&y)?;
            y[j] = x[j] - step;
            let fm = self.eval(&y)?;
            y[j] = x[j];
            for i in 0..self.out_dim {
                out[i][j] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        Ok(out)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ExprMap) -> ExprMap {
        assert_eq!(self.in_dim, inner.out_dim);
        ExprMap::new(inner.in_dim, self.components.iter().map(|c| c.substitute(&inner.components)).collect())
    }

    pub fn is_polynomial(&self) -> bool {
        self.components.iter().all(Expr::is_polynomial)
    }

    pub fn has_trig(&self) -> bool {
        self.components.iter().any(Expr::has_trig)
    }

    /// `(A, b)` when the map is affine.
    pub fn affine_form(&self) -> Option<(RationalMatrix, Vec<Q>)> {
        let mut a = RationalMatrix::zeros(self.out_dim, self.in_dim);
        let mut b = Vec::with_capacity(self.out_dim);
        for (i, c) in self.components.iter().enumerate() {
            let (row, k) = c.affine_form(self.in_dim)?;
            for (j, v) in row.into_iter().enumerate() {
                a.entries[i * self.in_dim + j] = v;
            }
            b.push(k);
        }
        Some((a, b))
    }
}

impl fmt::Display for ExprMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{q, qi};

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let m = ExprMap::parse(2, &["x2"]).unwrap();
        assert_eq!(m.eval_exact(&[qi(3), qi(5)]).unwrap(), Some(vec![qi(5)]));
        let m = ExprMap::parse(1, &["x1^2 - 1"]).unwrap();
        assert_eq!(m.eval_exact(&[qi(1)]).unwrap(), Some(vec![qi(0)]));
        let m = ExprMap::parse(1, &["sinpi(x1)"]).unwrap();
        assert_eq!(m.eval_exact(&[q(1, 2)]).unwrap(), Some(vec![qi(1)]));
        assert_eq!(m.eval_exact(&[q(1, 3)]).unwrap(), None);
        assert!(matches!(e("1 / (x1 - 1)").eval_exact(&[qi(1)]), Err(EvalError::DivisionByZero { .. })));
    }

    #[test]
    fn jacobian_examples() {
        let m = ExprMap::parse(2, &["x2"]).unwrap();
        assert_eq!(m.jacobian(&[q(7, 3), qi(-2)]), RationalMatrix::from_i64(&[&[0, 1]]));
        let m = ExprMap::parse(1, &["x1^2 - 1"]).unwrap();
        assert_eq!(m.jacobian(&[qi(1)]), RationalMatrix::from_i64(&[&[2]]));
        let m = ExprMap::parse(2, &["x1 * x2", "x1 + x2"]).unwrap();
        let j = m.jacobian(&[qi(1), qi(2)]);
        assert_eq!(j, RationalMatrix::from_i64(&[&[2, 1], &[1, 1]]));
        let fd = m.finite_difference_jacobian(&[1.0, 2.0], 1e-5).unwrap();
        for (r, row) in fd.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((v - to_f64(&j[(r, c)])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "x1 + x2 * x3",
            "(x1 + x2) * x3",
            "-x1^2",
            "(-x1)^2",
            "x1 - (x2 - x3)",
            "1/2 * x1 / 3",
            "sinpi(2 * x1) - -cospi(x2)",
            "-(x1 * x2)",
            "(1/2)^3 + x1^2^2",
            "pi * cospi(x1) / 2",
        ] {
            let a = e(s);
            let printed = a.to_string();
            assert_eq!(e(&printed), a, "{s} -> {printed}");
        }
        assert_eq!(e("0.25 * x1"), Expr::Mul(Box::new(Expr::Const(q(1, 4))), Box::new(Expr::Var(0))));
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("x1 +").is_err());
        assert!(Expr::parse("foo(x1)").is_err());
    }

    #[test]
    fn affine_detection() {
        let m = ExprMap::parse(2, &["x1 + 1/2", "2 * x2 - x1"]).unwrap();
        let (a, b) = m.affine_form().unwrap();
        assert_eq!(a, RationalMatrix::from_rows(&[vec![qi(1), qi(0)], vec![qi(-1), qi(2)]]));
        assert_eq!(b, vec![q(1, 2), qi(0)]);
        assert!(ExprMap::parse(1, &["x1^2"]).unwrap().affine_form().is_none());
    }
}
