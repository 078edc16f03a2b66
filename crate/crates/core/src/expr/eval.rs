use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BinaryOp, Expr, ExprError, UnaryOp};

/// Assignment of real values to coordinate and parameter names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub BTreeMap<String, f64>);

impl Point {
    pub fn new() -> Self {
        Point(BTreeMap::new())
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Point(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    /// Values for `names` in order; `None` if any is unbound.
    pub fn values(&self, names: &[String]) -> Option<Vec<f64>> {
        names.iter().map(|n| self.get(n)).collect()
    }

    /// Union of two assignments; entries of `other` win.
    pub fn merged(&self, other: &Point) -> Point {
        let mut out = self.clone();
        out.0.extend(other.0.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }
}

pub fn evaluate(e: &Expr, p: &Point) -> Result<f64, ExprError> {
    eval_tree(e, &|name| p.get(name))
}

fn domain(e: &Expr, reason: &str) -> ExprError {
    ExprError::Domain { subterm: e.to_string(), reason: reason.to_string() }
}

fn eval_tree(e: &Expr, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
    let value = match e {
        Expr::Const(c) => return Ok(*c),
        Expr::Var(name) => return lookup(name).ok_or_else(|| ExprError::Unbound(name.clone())),
        Expr::Unary(op, a) => {
            let x = eval_tree(a, lookup)?;
            apply_unary(*op, x).map_err(|reason| domain(e, reason))?
        }
        Expr::Binary(op, a, b) => {
            let x = eval_tree(a, lookup)?;
            let y = eval_tree(b, lookup)?;
            apply_binary(*op, x, y).map_err(|reason| domain(e, reason))?
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(e, "non-finite result"))
    }
}

fn apply_unary(op: UnaryOp, x: f64) -> Result<f64, &'static str> {
    Ok(match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Sinh => x.sinh(),
        UnaryOp::Cosh => x.cosh(),
        UnaryOp::Tanh => x.tanh(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Log => {
            if x <= 0.0 {
                return Err("logarithm of non-positive value");
            }
            x.ln()
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err("square root of negative value");
            }
            x.sqrt()
        }
    })
}

fn apply_binary(op: BinaryOp, x: f64, y: f64) -> Result<f64, &'static str> {
    Ok(match op {
        BinaryOp::Add => x + y,
        BinaryOp::Sub => x - y,
        BinaryOp::Mul => x * y,
        BinaryOp::Div => {
            if y == 0.0 {
                return Err("division by zero");
            }
            x / y
        }
        BinaryOp::Pow => power(x, y)?,
    })
}

/// Integer exponents use repeated squaring so results are reproducible across
/// targets; other exponents require a non-negative base.
pub(crate) fn power(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        let n = exponent as i64;
        if n < 0 && base == 0.0 {
            return Err("division by zero");
        }
        let mut acc = 1.0;
        let mut b = base;
        let mut m = n.unsigned_abs();
        let mut first = true;
        while m > 0 {
            if m & 1 == 1 {
                acc = if first { b } else { acc * b };
                first = false;
            }
            m >>= 1;
            if m > 0 {
                b *= b;
            }
        }
        return Ok(if n < 0 { 1.0 / acc } else { acc });
    }
    if base < 0.0 {
        return Err("non-integer power of negative value");
    }
    if base == 0.0 && exponent < 0.0 {
        return Err("division by zero");
    }
    Ok(base.powf(exponent))
}

#[derive(Debug, Clone)]
enum Instr {
    Const(f64),
    Load(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

/// An expression compiled against a fixed slot layout for repeated
/// evaluation. Produces bit-identical results to [`evaluate`].
#[derive(Debug, Clone)]
pub struct Compiled {
    program: Vec<Instr>,
    source: Expr,
    slots: Vec<String>,
    max_stack: usize,
}

impl Compiled {
    pub fn new(e: &Expr, slots: &[String]) -> Result<Compiled, ExprError> {
        let mut program = Vec::with_capacity(e.size());
        emit(e, slots, &mut program)?;
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for instr in &program {
            match instr {
                Instr::Const(_) | Instr::Load(_) => depth += 1,
                Instr::Unary(_) => {}
                Instr::Binary(_) => depth -= 1,
            }
            max_stack = max_stack.max(depth);
        }
        Ok(Compiled { program, source: e.clone(), slots: slots.to_vec(), max_stack })
    }

    pub fn expr(&self) -> &Expr {
        &self.source
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        for instr in &self.program {
            let ok = match instr {
                Instr::Const(c) => {
                    stack.push(*c);
                    true
                }
                Instr::Load(i) => {
                    stack.push(values[*i]);
                    true
                }
                Instr::Unary(op) => {
                    let x = stack.pop().unwrap_or(f64::NAN);
                    match apply_unary(*op, x) {
                        Ok(v) if v.is_finite() => {
                            stack.push(v);
                            true
                        }
                        _ => false,
                    }
                }
                Instr::Binary(op) => {
                    let y = stack.pop().unwrap_or(f64::NAN);
                    let x = stack.pop().unwrap_or(f64::NAN);
                    match apply_binary(*op, x, y) {
                        Ok(v) if v.is_finite() => {
                            stack.push(v);
                            true
                        }
                        _ => false,
                    }
                }
            };
            if !ok {
                // rerun on the tree to name the offending subterm
                return Err(self.diagnose(values));
            }
        }
        Ok(stack.pop().unwrap_or(f64::NAN))
    }

    fn diagnose(&self, values: &[f64]) -> ExprError {
        let lookup = |name: &str| self.slots.iter().position(|s| s == name).map(|i| values[i]);
        match eval_tree(&self.source, &lookup) {
            Err(e) => e,
            Ok(_) => ExprError::Domain { subterm: self.source.to_string(), reason: "evaluation failed".into() },
        }
    }
}

fn emit(e: &Expr, slots: &[String], out: &mut Vec<Instr>) -> Result<(), ExprError> {
    match e {
        Expr::Const(c) => out.push(Instr::Const(*c)),
        Expr::Var(name) => {
            let i = slots.iter().position(|s| s == name).ok_or_else(|| ExprError::Unbound(name.clone()))?;
            out.push(Instr::Load(i));
        }
        Expr::Unary(op, a) => {
            emit(a, slots, out)?;
            out.push(Instr::Unary(*op));
        }
        Expr::Binary(op, a, b) => {
            emit(a, slots, out)?;
            emit(b, slots, out)?;
            out.push(Instr::Binary(*op));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pt(pairs: &[(&str, f64)]) -> Point {
        Point::from_pairs(pairs.iter().map(|(k, v)| (*k, *v)))
    }

    #[test]
    fn sum_of_squares() {
        let e = parse("x^2+y^2+z^2").unwrap();
        assert_eq!(evaluate(&e, &pt(&[("x", 1.0), ("y", 2.0), ("z", 3.0)])).unwrap(), 14.0);
    }

    #[test]
    fn division_by_zero_is_a_domain_violation() {
        let e = parse("sin(k*z)/k").unwrap();
        match evaluate(&e, &pt(&[("k", 0.0), ("z", 1.0)])) {
            Err(ExprError::Domain { subterm, reason }) => {
                assert_eq!(subterm, "sin(k*z)/k");
                assert_eq!(reason, "division by zero");
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn small_k_deformation_approaches_its_limit() {
        // series: (4/k^2) sinh^2(kz/2) = z^2 + k^2 z^4 / 12 + O(k^4)
        let e = parse("4/k^2 * sinh(k*z/2)^2").unwrap();
        let (k, z): (f64, f64) = (1e-4, 2.0);
        let series = z * z + k * k * z.powi(4) / 12.0;
        let v = evaluate(&e, &pt(&[("k", k), ("z", z)])).unwrap();
        assert!((v - 4.0).abs() < 1e-7);
        assert!((v - series).abs() < 1e-9);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = parse("x + w").unwrap();
        assert_eq!(evaluate(&e, &pt(&[("x", 1.0)])), Err(ExprError::Unbound("w".into())));
    }

    #[test]
    fn domain_errors_name_the_subterm() {
        let e = parse("1 + sqrt(x - 2)").unwrap();
        match evaluate(&e, &pt(&[("x", 1.0)])) {
            Err(ExprError::Domain { subterm, .. }) => assert_eq!(subterm, "sqrt(x - 2)"),
            other => panic!("{other:?}"),
        }
        let e = parse("log(x)").unwrap();
        assert!(evaluate(&e, &pt(&[("x", 0.0)])).is_err());
        let e = parse("x^0.5").unwrap();
        assert!(evaluate(&e, &pt(&[("x", -1.0)])).is_err());
        // integer exponents accept negative bases
        let e = parse("x^3").unwrap();
        assert_eq!(evaluate(&e, &pt(&[("x", -2.0)])).unwrap(), -8.0);
        let e = parse("x^-2").unwrap();
        assert_eq!(evaluate(&e, &pt(&[("x", -2.0)])).unwrap(), 0.25);
        assert!(evaluate(&e, &pt(&[("x", 0.0)])).is_err());
    }

    #[test]
    fn compiled_matches_tree_evaluation_bitwise() {
        let e = parse("exp(-k*z/2)*x + sqrt(a^2 - 4*g/k^2*sinh(k*p/2)^2)*cos(d*q)").unwrap();
        let slots: Vec<String> = ["x", "z", "k", "a", "g", "p", "d", "q"].iter().map(|s| s.to_string()).collect();
        let c = Compiled::new(&e, &slots).unwrap();
        let vals = [0.3, -1.2, 0.5, 1.0, 1.0, 0.4, 1.0, 2.2];
        let p = Point::from_pairs(slots.iter().cloned().zip(vals));
        assert_eq!(c.eval(&vals).unwrap().to_bits(), evaluate(&e, &p).unwrap().to_bits());
        let bad = [0.3, -1.2, 0.5, 0.0, 1.0, 1.9, 1.0, 2.2];
        match c.eval(&bad) {
            Err(ExprError::Domain { subterm, .. }) => assert!(subterm.starts_with("sqrt(")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compile_rejects_unknown_slots() {
        let e = parse("x*y").unwrap();
        assert!(matches!(Compiled::new(&e, &["x".to_string()]), Err(ExprError::Unbound(v)) if v == "y"));
    }
}
