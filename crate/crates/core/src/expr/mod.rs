//! Symbolic expressions over named real coordinates.
//!
//! An [`Expr`] is an immutable tree of constants, variables, unary function
//! applications and binary arithmetic. The printed form (`Display`) uses
//! minimal parentheses and `^` for powers; it re-parses to a tree that
//! evaluates bit-identically, which makes it the interchange format used by
//! the JSON system definitions and family exports.

mod diff;
mod eval;
mod parse;
mod simplify;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use eval::{evaluate, Compiled, Point};
pub use parse::parse;
pub use simplify::simplify;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain violation in `{subterm}`: {reason}")]
    Domain { subterm: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub const FUNCTIONS: [UnaryOp; 8] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Sinh,
        UnaryOp::Cosh,
        UnaryOp::Tanh,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        UnaryOp::FUNCTIONS.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree. Structural equality and ordering treat constants by their
/// bit pattern (`f64::total_cmp`), so `Expr` is a total order usable for
/// canonical sorting.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, self, exponent)
    }

    pub fn powi(self, n: i32) -> Expr {
        self.pow(Expr::Const(n as f64))
    }

    pub fn apply(self, op: UnaryOp) -> Expr {
        Expr::unary(op, self)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True for the literal constant zero (either sign).
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Unary(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(name) => name == var,
            Expr::Unary(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(name) => map.get(name).cloned().unwrap_or_else(|| self.clone()),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(map)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(map), b.substitute(map)),
        }
    }

    /// Simultaneous renaming of variables.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(name) => Expr::Var(map.get(name).cloned().unwrap_or_else(|| name.clone())),
            Expr::Unary(op, a) => Expr::unary(*op, a.rename(map)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.rename(map), b.rename(map)),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn differentiate(&self, var: &str) -> Expr {
        diff::differentiate(self, var)
    }

    pub fn simplify(&self) -> Expr {
        simplify::simplify(self)
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Binary(op, _, _) => 2 + *op as u8,
            Expr::Unary(op, _) => 7 + *op as u8,
        }
    }

    /// Printing precedence: 1 additive, 2 multiplicative, 3 prefix minus,
    /// 4 power, 5 atoms and calls.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Unary(_, _) => 5,
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
            Expr::Binary(BinaryOp::Pow, _, _) => 4,
        }
    }
}

pub fn num(value: f64) -> Expr {
    Expr::num(value)
}

/// Serde adapter storing an expression as its printed form.
pub mod serde_printed {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{parse, Expr};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(e)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

pub fn var(name: &str) -> Expr {
    Expr::var(name)
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    /// Lexicographic on (operator rank, children).
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            (Expr::Unary(_, a), Expr::Unary(_, b)) => a.cmp(b),
            (Expr::Binary(_, a1, b1), Expr::Binary(_, a2, b2)) => a1.cmp(a2).then_with(|| b1.cmp(b2)),
            _ => Ordering::Equal,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 3)
            }
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => {
                let prec = self.precedence();
                let (left_paren, right_paren) = match op {
                    // ^ is right associative and binds tighter than prefix minus
                    BinaryOp::Pow => (a.precedence() <= prec, b.precedence() < 3),
                    // the right operand of a left-associative operator keeps
                    // its grouping: a - (b + c), a / (b * c), a + (b + c)
                    _ => (a.precedence() < prec, b.precedence() <= prec),
                };
                write_operand(f, a, left_paren)?;
                match op {
                    BinaryOp::Pow | BinaryOp::Mul | BinaryOp::Div => f.write_str(op.symbol())?,
                    _ => write!(f, " {} ", op.symbol())?,
                }
                write_operand(f, b, right_paren)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl std::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::Const(rhs))
            }
        }
        impl std::ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::Const(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        assert_eq!(p("x^2+y^2+z^2").to_string(), "x^2 + y^2 + z^2");
        assert_eq!(p("sin(k*z)/k").to_string(), "sin(k*z)/k");
        assert_eq!(p("a-(b+c)").to_string(), "a - (b + c)");
        assert_eq!(p("(a-b)+c").to_string(), "a - b + c");
        assert_eq!(p("(x^2)^3").to_string(), "(x^2)^3");
        assert_eq!(p("x^2^3").to_string(), "x^2^3");
        assert_eq!(p("(-x)^2").to_string(), "(-x)^2");
        assert_eq!(p("-x^2").to_string(), "-x^2");
        assert_eq!(p("x^-2").to_string(), "x^-2");
        assert_eq!(p("a/(b*c)").to_string(), "a/(b*c)");
        assert_eq!(p("2*(x+y)").to_string(), "2*(x + y)");
    }

    #[test]
    fn negative_constants_print_reparseably() {
        let e = Expr::Const(-2.0).pow(num(2.0));
        assert_eq!(e.to_string(), "(-2)^2");
        let e = Expr::var("x") * Expr::Const(-0.5);
        assert_eq!(e.to_string(), "x*-0.5");
        assert_eq!(parse(&e.to_string()).unwrap().to_string(), "x*-0.5");
    }

    #[test]
    fn ordering_is_total_and_rank_first() {
        let mut v = [p("sin(x)"), p("y"), p("x*y"), p("2"), p("x")];
        v.sort();
        let printed: Vec<String> = v.iter().map(|e| e.to_string()).collect();
        assert_eq!(printed, ["2", "x", "y", "x*y", "sin(x)"]);
    }

    #[test]
    fn substitute_is_simultaneous() {
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), p("y"));
        m.insert("y".to_string(), p("x"));
        assert_eq!(p("x-y").substitute(&m).to_string(), "y - x");
    }
}
