//! Scalar expression mini-language.
//!
//! Expressions are built from real constants, named variables, the four
//! arithmetic operators, integer powers and `exp`. The variable named `s` is
//! reserved for the Laplace variable; every other name is a parameter.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := primary ('^' exponent)*
//! exponent := ('-' | '+')? INTEGER | '(' ('-' | '+')? INTEGER ')'
//! primary  := NUMBER | IDENT | 'exp' '(' expr ')' | '(' expr ')'
//! ```
//!
//! All binary operators are left-associative. Unary minus binds looser than
//! `^`, so `-x^2` is `-(x^2)`.

mod diff;
mod interval;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops;

use num_complex::Complex64;
use thiserror::Error;

pub use interval::Interval;
pub use parse::{parse, ParseError};

/// Name of the Laplace variable.
pub const LAPLACE: &str = "s";

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("interval of `{0}` contains zero in a denominator")]
    IntervalDivision(String),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn laplace() -> Expr {
        Expr::Var(LAPLACE.to_string())
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (_, Some(y)) if y == 0.0 => a,
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn powi(a: Expr, n: i32) -> Expr {
        match (n, a.as_const()) {
            (0, _) => Expr::one(),
            (1, _) => a,
            (_, Some(c)) if n > 0 || c != 0.0 => Expr::Const(c.powi(n)),
            _ => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(c.exp()),
            None => Expr::Exp(Box::new(a)),
        }
    }

    /// All variable names, including `s` when present.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Parameter names, i.e. every variable except `s`.
    pub fn params(&self) -> BTreeSet<String> {
        let mut vars = self.variables();
        vars.remove(LAPLACE);
        vars
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => a.depends_on(name),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(name) || b.depends_on(name)
            }
        }
    }

    pub fn depends_on_laplace(&self) -> bool {
        self.depends_on(LAPLACE)
    }

    /// Evaluates at a complex Laplace value with parameters taken from a map.
    pub fn eval(&self, s: Complex64, params: &HashMap<String, f64>) -> Result<Complex64, EvalError> {
        self.eval_with(s, &|name: &str| params.get(name).copied())
    }

    /// Evaluates with an arbitrary parameter lookup.
    pub fn eval_with<F>(&self, s: Complex64, lookup: &F) -> Result<Complex64, EvalError>
    where
        F: Fn(&str) -> Option<f64> + ?Sized,
    {
        Ok(match self {
            Expr::Const(c) => Complex64::new(*c, 0.0),
            Expr::Var(name) if name == LAPLACE => s,
            Expr::Var(name) => Complex64::new(
                lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
                0.0,
            ),
            Expr::Neg(a) => -a.eval_with(s, lookup)?,
            Expr::Add(a, b) => a.eval_with(s, lookup)? + b.eval_with(s, lookup)?,
            Expr::Sub(a, b) => a.eval_with(s, lookup)? - b.eval_with(s, lookup)?,
            Expr::Mul(a, b) => a.eval_with(s, lookup)? * b.eval_with(s, lookup)?,
            Expr::Div(a, b) => {
                let num = a.eval_with(s, lookup)?;
                let den = b.eval_with(s, lookup)?;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                num / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval_with(s, lookup)?;
                if *n < 0 && base == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                base.powi(*n)
            }
            Expr::Exp(a) => a.eval_with(s, lookup)?.exp(),
        })
    }

    /// Real evaluation of a parameter-only expression. `s` is reported as unbound.
    pub fn eval_real<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64> + ?Sized,
    {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(name) if name == LAPLACE => return Err(EvalError::Unbound(name.clone())),
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval_real(lookup)?,
            Expr::Add(a, b) => a.eval_real(lookup)? + b.eval_real(lookup)?,
            Expr::Sub(a, b) => a.eval_real(lookup)? - b.eval_real(lookup)?,
            Expr::Mul(a, b) => a.eval_real(lookup)? * b.eval_real(lookup)?,
            Expr::Div(a, b) => {
                let num = a.eval_real(lookup)?;
                let den = b.eval_real(lookup)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                num / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval_real(lookup)?;
                if *n < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                base.powi(*n)
            }
            Expr::Exp(a) => a.eval_real(lookup)?.exp(),
        })
    }

    /// Interval enclosure of a parameter-only expression over a box.
    pub fn eval_interval<F>(&self, lookup: &F) -> Result<Interval, EvalError>
    where
        F: Fn(&str) -> Option<Interval> + ?Sized,
    {
        Ok(match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(name) if name == LAPLACE => return Err(EvalError::Unbound(name.clone())),
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval_interval(lookup)?,
            Expr::Add(a, b) => a.eval_interval(lookup)? + b.eval_interval(lookup)?,
            Expr::Sub(a, b) => a.eval_interval(lookup)? - b.eval_interval(lookup)?,
            Expr::Mul(a, b) => a.eval_interval(lookup)? * b.eval_interval(lookup)?,
            Expr::Div(a, b) => a
                .eval_interval(lookup)?
                .checked_div(b.eval_interval(lookup)?)
                .ok_or_else(|| EvalError::IntervalDivision(self.to_string()))?,
            Expr::Pow(a, n) => a
                .eval_interval(lookup)?
                .powi(*n)
                .ok_or_else(|| EvalError::IntervalDivision(self.to_string()))?,
            Expr::Exp(a) => a.eval_interval(lookup)?.exp(),
        })
    }

    /// Symbolic partial derivative with respect to a parameter.
    pub fn diff(&self, param: &str) -> Expr {
        diff::derivative(self, param)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_finite() {
                    write!(f, "{c}")
                } else if c.is_nan() {
                    write!(f, "(0/0)")
                } else if *c > 0.0 {
                    write!(f, "(1/0)")
                } else {
                    write!(f, "(-1/0)")
                }
            }
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 4)
            }
            Expr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " + ")?;
                b.fmt_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " - ")?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 3)
            }
            Expr::Pow(a, n) => {
                a.fmt_child(f, 4)?;
                write!(f, "^{n}")
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse(text)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
