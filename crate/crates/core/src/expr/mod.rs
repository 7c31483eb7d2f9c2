//! Expression trees for model right-hand sides and constraints.

mod diff;
mod parser;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use diff::differentiate;
pub use parser::parse_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
}

impl UnaryOp {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Self::Sin),
            "cos" => Some(Self::Cos),
            "tan" => Some(Self::Tan),
            "exp" => Some(Self::Exp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Neg => "-",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Exp => "exp",
        }
    }
}

pub const FUNCTION_NAMES: [&str; 4] = ["sin", "cos", "tan", "exp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Variable lookup used by [`Expr::eval`].
pub trait Env<T> {
    fn lookup(&self, name: &str) -> Option<T>;
}

impl<T: Copy> Env<T> for HashMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Env<T> for BTreeMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Env<T> for [(&str, T)] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<T: Copy, const K: usize> Env<T> for [(&str, T); K] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.as_slice().lookup(name)
    }
}

/// Parallel name and value slices.
pub struct Bindings<'a, T> {
    pub names: &'a [String],
    pub values: &'a [T],
}

impl<T: Copy> Env<T> for Bindings<'_, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
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

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn eval<T: Scalar, E: Env<T> + ?Sized>(&self, env: &E) -> Result<T> {
        let v = match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(name) => env
                .lookup(name)
                .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
            Expr::Unary(op, a) => {
                let a = a.eval(env)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Tan => {
                        let c = a.cos();
                        if c.abs() <= T::epsilon() * (T::one() + a.abs()) {
                            return Err(Error::Domain(format!("tan at pole {a}")));
                        }
                        a.sin() / c
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b.is_zero() {
                            return Err(Error::Domain("division by zero".into()));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, k) => a.eval(env)?.powi(*k as i32),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("non-finite value from `{self}`")))
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 0,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 1,
            Expr::Pow(..) => 2,
            _ => 3,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "({c})")
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                // `-2` would read back as a negative literal.
                if matches!(**a, Expr::Const(_)) {
                    write!(f, "(")?;
                    a.write_at(f, 0)?;
                    write!(f, ")")
                } else {
                    a.write_at(f, 3)
                }
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
            Expr::Binary(op, a, b) => {
                let (sym, lhs, rhs) = match op {
                    BinaryOp::Add => (" + ", 0, 1),
                    BinaryOp::Sub => (" - ", 0, 1),
                    BinaryOp::Mul => ("*", 1, 2),
                    BinaryOp::Div => ("/", 1, 2),
                };
                a.write_at(f, lhs)?;
                write!(f, "{sym}")?;
                b.write_at(f, rhs)
            }
            Expr::Pow(a, k) => {
                if matches!(**a, Expr::Unary(UnaryOp::Neg, _)) {
                    write!(f, "(")?;
                    a.write_at(f, 0)?;
                    write!(f, ")")?;
                } else {
                    a.write_at(f, 3)?;
                }
                write!(f, "^{k}")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

// Simplifying constructors: constant folding plus the identities 0·e, e+0, 1·e.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(BinaryOp::Sub, Box::new(a), inner),
            b => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
        },
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(BinaryOp::Add, Box::new(a), inner),
            b => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
        },
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, k: u32) -> Expr {
    match (k, a.as_const()) {
        (0, _) => Expr::Const(1.0),
        (1, _) => a,
        (_, Some(c)) => Expr::Const(c.powi(k as i32)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

pub fn sin(a: Expr) -> Expr {
    Expr::Unary(UnaryOp::Sin, Box::new(a))
}

pub fn cos(a: Expr) -> Expr {
    Expr::Unary(UnaryOp::Cos, Box::new(a))
}

pub fn tan(a: Expr) -> Expr {
    Expr::Unary(UnaryOp::Tan, Box::new(a))
}

pub fn exp(a: Expr) -> Expr {
    Expr::Unary(UnaryOp::Exp, Box::new(a))
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    match op {
        UnaryOp::Neg => neg(a),
        op => Expr::Unary(op, Box::new(a)),
    }
}
