//! Best-effort canonical simplification.
//!
//! Sums are flattened into `coefficient × product` terms; products are
//! flattened into integer powers of canonically ordered factors. Like terms
//! and like factors are merged, constants are folded, and a sum appearing as
//! a factor is sign-normalised (leading coefficient positive) so that `A·S`
//! and `A·(-S)` collect into one term. No distribution over sums is
//! performed.

use super::eval::power;
use super::{BinaryOp, Expr, UnaryOp};

pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Unary(UnaryOp::Neg, a) => normalize(&Expr::unary(UnaryOp::Neg, simplify(a))),
        Expr::Unary(op, a) => {
            let a = simplify(a);
            if let Some(c) = a.as_const() {
                if let Ok(v) = super::evaluate(&Expr::unary(*op, Expr::Const(c)), &Default::default()) {
                    return Expr::Const(v);
                }
            }
            Expr::unary(*op, a)
        }
        Expr::Binary(BinaryOp::Pow, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(x), Some(y)) => match power(x, y) {
                    Ok(v) if v.is_finite() => Expr::Const(v),
                    _ => a.pow(b),
                },
                (_, Some(0.0)) => Expr::one(),
                (_, Some(1.0)) => a,
                (_, Some(y)) if integral(y) => normalize(&a.pow(b)),
                (Some(1.0), _) => Expr::one(),
                _ => a.pow(b),
            }
        }
        Expr::Binary(op, a, b) => normalize(&Expr::binary(*op, simplify(a), simplify(b))),
    }
}

fn integral(y: f64) -> bool {
    y.fract() == 0.0 && y.abs() <= 1024.0
}

#[derive(Debug, Clone)]
struct Term {
    coef: f64,
    /// (base, power) sorted by base, bases distinct, powers non-zero.
    factors: Vec<(Expr, i32)>,
}

fn normalize(e: &Expr) -> Expr {
    let mut terms = Vec::new();
    collect_terms(e, 1.0, &mut terms);
    build_sum(combine_terms(terms))
}

fn collect_terms(e: &Expr, sign: f64, out: &mut Vec<Term>) {
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, sign, out);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, -sign, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => collect_terms(a, -sign, out),
        _ => {
            let mut term = Term { coef: sign, factors: Vec::new() };
            multiply_into(e, 1, &mut term);
            term.factors = combine_factors(std::mem::take(&mut term.factors));
            out.push(term);
        }
    }
}

fn multiply_into(e: &Expr, p: i32, term: &mut Term) {
    match e {
        Expr::Const(c) => {
            if p < 0 && *c == 0.0 {
                // keep the division by zero visible
                term.factors.push((e.clone(), p));
            } else {
                term.coef *= power(*c, p as f64).unwrap_or(f64::NAN);
            }
        }
        Expr::Binary(BinaryOp::Mul, a, b) => {
            multiply_into(a, p, term);
            multiply_into(b, p, term);
        }
        Expr::Binary(BinaryOp::Div, a, b) => {
            multiply_into(a, p, term);
            multiply_into(b, -p, term);
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            if p % 2 != 0 {
                term.coef = -term.coef;
            }
            multiply_into(a, p, term);
        }
        Expr::Binary(BinaryOp::Pow, a, b) => match b.as_const() {
            Some(n) if integral(n) && (n as i64 * p as i64).abs() <= 1024 => multiply_into(a, p * n as i32, term),
            _ => term.factors.push((e.clone(), p)),
        },
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => {
            let mut inner = Vec::new();
            collect_terms(e, 1.0, &mut inner);
            let mut inner = combine_terms(inner);
            match inner.len() {
                0 => term.coef = 0.0,
                1 => {
                    let t = inner.pop().unwrap_or(Term { coef: 0.0, factors: Vec::new() });
                    term.coef *= power(t.coef, p as f64).unwrap_or(f64::NAN);
                    for (base, q) in t.factors {
                        term.factors.push((base, q * p));
                    }
                }
                _ => {
                    if inner[0].coef < 0.0 {
                        for t in &mut inner {
                            t.coef = -t.coef;
                        }
                        if p % 2 != 0 {
                            term.coef = -term.coef;
                        }
                    }
                    term.factors.push((build_sum(inner), p));
                }
            }
        }
        _ => term.factors.push((e.clone(), p)),
    }
}

fn combine_factors(mut factors: Vec<(Expr, i32)>) -> Vec<(Expr, i32)> {
    factors.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(Expr, i32)> = Vec::with_capacity(factors.len());
    for (base, p) in factors {
        match out.last_mut() {
            Some((last, q)) if *last == base => *q += p,
            _ => out.push((base, p)),
        }
    }
    out.retain(|(_, p)| *p != 0);
    out
}

fn cmp_factors(a: &[(Expr, i32)], b: &[(Expr, i32)]) -> std::cmp::Ordering {
    // constant terms last
    match (a.is_empty(), b.is_empty()) {
        (true, false) => return std::cmp::Ordering::Greater,
        (false, true) => return std::cmp::Ordering::Less,
        _ => {}
    }
    for ((ea, pa), (eb, pb)) in a.iter().zip(b) {
        let ord = ea.cmp(eb).then(pa.cmp(pb));
        if ord.is_ne() {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

fn combine_terms(mut terms: Vec<Term>) -> Vec<Term> {
    terms.retain(|t| t.coef != 0.0);
    terms.sort_by(|a, b| cmp_factors(&a.factors, &b.factors));
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if cmp_factors(&last.factors, &t.factors).is_eq() => last.coef += t.coef,
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

fn build_sum(terms: Vec<Term>) -> Expr {
    let mut acc: Option<Expr> = None;
    for t in terms {
        acc = Some(match acc {
            None => build_term(t.coef, &t.factors),
            Some(prev) if t.coef < 0.0 => prev - build_term(-t.coef, &t.factors),
            Some(prev) => prev + build_term(t.coef, &t.factors),
        });
    }
    acc.unwrap_or_else(Expr::zero)
}

fn product_of<'a>(factors: impl Iterator<Item = (&'a Expr, i32)>) -> Option<Expr> {
    factors.fold(None, |acc, (base, p)| {
        let f = if p == 1 { base.clone() } else { base.clone().powi(p) };
        Some(match acc {
            None => f,
            Some(prev) => prev * f,
        })
    })
}

fn build_term(coef: f64, factors: &[(Expr, i32)]) -> Expr {
    let num = product_of(factors.iter().filter(|(_, p)| *p > 0).map(|(b, p)| (b, *p)));
    let den = product_of(factors.iter().filter(|(_, p)| *p < 0).map(|(b, p)| (b, -*p)));
    let Some(num) = num else {
        return match den {
            None => Expr::Const(coef),
            Some(den) => Expr::Const(coef) / den,
        };
    };
    let magnitude = coef.abs();
    let reciprocal = 1.0 / magnitude;
    let numerator = if coef == 1.0 {
        num
    } else if coef == -1.0 {
        -num
    } else if den.is_none() && magnitude < 1.0 && reciprocal.fract() == 0.0 && 1.0 / reciprocal == magnitude {
        // 0.5*x prints as x/2
        let scaled = num / reciprocal;
        return if coef < 0.0 { -scaled } else { scaled };
    } else {
        Expr::Const(coef) * num
    };
    match den {
        None => numerator,
        Some(den) => numerator / den,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse, Point};

    fn s(text: &str) -> String {
        simplify(&parse(text).unwrap()).to_string()
    }

    #[test]
    fn identical_terms_cancel() {
        assert_eq!(s("x - x"), "0");
        assert_eq!(s("1*(y+0)"), "y");
        assert_eq!(s("z*(2*x) - 2*(x*z)"), "0");
    }

    #[test]
    fn constants_fold_and_collect() {
        assert_eq!(s("2*3 + x*0 + sin(0)"), "6");
        assert_eq!(s("x + x + 1 + 2"), "2*x + 3");
        assert_eq!(s("x*x*y/x"), "x*y");
        assert_eq!(s("-(-x)"), "x");
        assert_eq!(s("2*x^1*1 + 0"), "2*x");
        assert_eq!(s("(x^2)^3"), "x^6");
        assert_eq!(s("x^0"), "1");
        assert_eq!(s("k*z/2"), "k*z/2");
        assert_eq!(s("0.5*x*2"), "x");
    }

    #[test]
    fn sign_normalised_sum_factors_cancel() {
        assert_eq!(s("a*(x - y) + a*(y - x)"), "0");
        assert_eq!(s("(y - x)*a"), "-(a*(x - y))");
    }

    #[test]
    fn division_by_literal_zero_survives() {
        let e = simplify(&parse("x/0").unwrap());
        assert!(evaluate(&e, &Point::from_pairs([("x", 1.0)])).is_err());
        assert_eq!(s("sqrt(-1)"), "sqrt(-1)");
    }

    #[test]
    fn idempotent_on_printed_form() {
        for text in [
            "alpha*x^2 + beta*y^2 + 4*gamma/k^2*sinh(k*z/2)^2",
            "(x1 + x2)^2 + (y1 + y2)^2 - x1^2",
            "a*(x - y)/(b - c) - 3*x/y",
            "-x + y",
        ] {
            let once = simplify(&parse(text).unwrap());
            let twice = simplify(&once);
            assert_eq!(once, twice, "{text}");
            assert_eq!(simplify(&parse(&once.to_string()).unwrap()), once, "{text}");
        }
    }
}
