use super::{simplify, BinaryOp, Expr, UnaryOp};

/// Exact partial derivative with respect to `var`, simplified.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    simplify(&raw(e, var))
}

fn raw(e: &Expr, v: &str) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(name) => {
            if name == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Unary(op, a) => {
            let da = raw(a, v);
            let a = (**a).clone();
            let outer = match op {
                UnaryOp::Neg => return -da,
                UnaryOp::Sin => a.apply(UnaryOp::Cos),
                UnaryOp::Cos => -a.apply(UnaryOp::Sin),
                UnaryOp::Sinh => a.apply(UnaryOp::Cosh),
                UnaryOp::Cosh => a.apply(UnaryOp::Sinh),
                UnaryOp::Tanh => 1.0 - a.apply(UnaryOp::Tanh).powi(2),
                UnaryOp::Exp => a.apply(UnaryOp::Exp),
                UnaryOp::Log => 1.0 / a,
                UnaryOp::Sqrt => 1.0 / (2.0 * a.apply(UnaryOp::Sqrt)),
            };
            outer * da
        }
        Expr::Binary(op, a, b) => {
            let (fa, fb) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => raw(a, v) + raw(b, v),
                BinaryOp::Sub => raw(a, v) - raw(b, v),
                BinaryOp::Mul => raw(a, v) * fb + fa * raw(b, v),
                BinaryOp::Div => {
                    if !b.depends_on(v) {
                        raw(a, v) / fb
                    } else {
                        (raw(a, v) * fb.clone() - fa * raw(b, v)) / fb.powi(2)
                    }
                }
                BinaryOp::Pow => {
                    if !b.depends_on(v) {
                        // n * a^(n-1) * a'
                        let reduced = match fb.as_const() {
                            Some(n) => Expr::Const(n - 1.0),
                            None => fb.clone() - 1.0,
                        };
                        fb * fa.pow(reduced) * raw(a, v)
                    } else if !a.depends_on(v) {
                        e.clone() * fa.apply(UnaryOp::Log) * raw(b, v)
                    } else {
                        e.clone() * (raw(b, v) * fa.clone().apply(UnaryOp::Log) + fb * raw(a, v) / fa)
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{evaluate, parse, Point};

    fn d(s: &str, v: &str) -> String {
        parse(s).unwrap().differentiate(v).to_string()
    }

    #[test]
    fn power_rule() {
        assert_eq!(d("x^2+y^2", "x"), "2*x");
        assert_eq!(d("x^2+y^2", "w"), "0");
    }

    #[test]
    fn chain_rule_through_sinh_squared() {
        assert_eq!(d("sinh(k*z/2)^2", "z"), "k*sinh(k*z/2)*cosh(k*z/2)");
    }

    #[test]
    fn other_variables_are_constants() {
        assert_eq!(d("a*x*y", "x"), "a*y");
        assert_eq!(d("exp(k*z)", "k"), "z*exp(k*z)");
    }

    #[test]
    fn variable_exponent_matches_finite_differences() {
        let e = parse("x^y + 2^x").unwrap();
        let dx = e.differentiate("x");
        let dy = e.differentiate("y");
        let p = Point::from_pairs([("x", 1.3), ("y", 0.7)]);
        let h = 1e-6;
        let fd = |var: &str| {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi.set(var, p.get(var).unwrap() + h);
            lo.set(var, p.get(var).unwrap() - h);
            (evaluate(&e, &hi).unwrap() - evaluate(&e, &lo).unwrap()) / (2.0 * h)
        };
        assert!((evaluate(&dx, &p).unwrap() - fd("x")).abs() < 1e-8);
        assert!((evaluate(&dy, &p).unwrap() - fd("y")).abs() < 1e-8);
    }

    #[test]
    fn elementary_functions() {
        let p = Point::from_pairs([("x", 0.4)]);
        for (f, df) in [
            ("sin(x)", "cos(x)"),
            ("cos(x)", "-sin(x)"),
            ("tanh(x)", "1 - tanh(x)^2"),
            ("log(x)", "1/x"),
            ("sqrt(x)", "0.5/sqrt(x)"),
            ("exp(2*x)", "2*exp(2*x)"),
            ("1/x", "-1/x^2"),
        ] {
            let got = evaluate(&parse(f).unwrap().differentiate("x"), &p).unwrap();
            let want = evaluate(&parse(df).unwrap(), &p).unwrap();
            assert!((got - want).abs() < 1e-14, "{f}: {got} vs {want}");
        }
    }
}
