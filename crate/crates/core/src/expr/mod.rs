//! Scalar coefficient language.
//!
//! Coefficients `c_i, a_ij, b_ij, I_i` and weights are functions of `t`;
//! activations are functions of `x`. Both are written in a tiny infix
//! language:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ('-')* atom)*
//! atom   := number | 'pi' | 'e' | 't' | 'x' | func '(' expr ')' | '(' expr ')'
//! func   := 'abs' | 'sin' | 'cos' | 'exp' | 'sqrt' | 'ln'
//! ```
//!
//! All binary operators, `^` included, associate to the left.

mod parse;
pub mod range;

use std::fmt;

use thiserror::Error;

use crate::timescale::Grid;

pub use parse::parse;

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: expected {expected}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

/// Evaluation outside the real domain of an operation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{node}` at {var} = {at}: {reason}")]
pub struct DomainError {
    pub node: String,
    pub var: char,
    pub at: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
}

impl Var {
    fn name(self) -> char {
        match self {
            Var::T => 't',
            Var::X => 'x',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "ln" => Func::Ln,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

/// Abstract syntax tree of a coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluate with `v` substituted for the free variable.
    pub fn eval(&self, v: f64) -> Result<f64, DomainError> {
        let value = match self {
            Expr::Num(x) => *x,
            Expr::Const(Constant::Pi) => std::f64::consts::PI,
            Expr::Const(Constant::E) => std::f64::consts::E,
            Expr::Var(_) => v,
            Expr::Neg(e) => -e.eval(v)?,
            Expr::Call(f, arg) => {
                let x = arg.eval(v)?;
                match f {
                    Func::Abs => x.abs(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt if x < 0.0 => return Err(self.domain(v, "square root of a negative number")),
                    Func::Sqrt => x.sqrt(),
                    Func::Ln if x <= 0.0 => return Err(self.domain(v, "logarithm of a non-positive number")),
                    Func::Ln => x.ln(),
                }
            }
            Expr::Binary(op, l, r) => {
                let (x, y) = (l.eval(v)?, r.eval(v)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div if y == 0.0 => return Err(self.domain(v, "division by zero")),
                    BinOp::Div => x / y,
                    BinOp::Pow => {
                        if x < 0.0 && y.fract() != 0.0 {
                            return Err(self.domain(v, "non-integer power of a negative base"));
                        }
                        if x == 0.0 && y < 0.0 {
                            return Err(self.domain(v, "negative power of zero"));
                        }
                        x.powf(y)
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain(v, "non-finite result"))
        }
    }

    fn domain(&self, v: f64, reason: &str) -> DomainError {
        DomainError {
            node: self.to_string(),
            var: self.var().unwrap_or(Var::T).name(),
            at: v,
            reason: reason.to_string(),
        }
    }

    /// The free variable used by this expression, if any.
    pub fn var(&self) -> Option<Var> {
        match self {
            Expr::Num(_) | Expr::Const(_) => None,
            Expr::Var(v) => Some(*v),
            Expr::Neg(e) | Expr::Call(_, e) => e.var(),
            Expr::Binary(_, l, r) => l.var().or_else(|| r.var()),
        }
    }

    pub(crate) fn uses_var(&self, which: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Var(v) => *v == which,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_var(which),
            Expr::Binary(_, l, r) => l.uses_var(which) || r.uses_var(which),
        }
    }

    /// True when the expression does not depend on its variable.
    pub fn is_constant(&self) -> bool {
        self.var().is_none()
    }

    /// Visit every `abs(...)` argument.
    pub(crate) fn abs_arguments<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.abs_arguments(out),
            Expr::Call(f, e) => {
                if *f == Func::Abs {
                    out.push(e);
                }
                e.abs_arguments(out);
            }
            Expr::Binary(_, l, r) => {
                l.abs_arguments(out);
                r.abs_arguments(out);
            }
        }
    }

    /// Raw `(sup, inf)` of the expression over the grid nodes and dense
    /// midpoints; the sup is an estimate from below and the inf from above.
    pub fn sup_inf_estimate(&self, grid: &Grid) -> Result<(f64, f64), DomainError> {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for t in grid.sample_points() {
            let v = self.eval(t)?;
            sup = sup.max(v);
            inf = inf.min(v);
        }
        Ok((sup, inf))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "(-{})", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Const(Constant::Pi) => write!(f, "pi"),
            Expr::Const(Constant::E) => write!(f, "e"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}
