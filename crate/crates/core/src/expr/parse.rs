use super::{BinaryOp, Expr, ExprError, UnaryOp};

/// Parse infix text into an expression.
///
/// Grammar (standard precedence, `^` right associative and binding tighter
/// than prefix minus):
///
/// ```text
/// sum     := product (('+' | '-') product)*
/// product := unary (('*' | '/') unary)*
/// unary   := '-' unary | power
/// power   := atom ('^' unary)?
/// atom    := number | ident | ident '(' sum ')' | '(' sum ')'
/// ```
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len() };
    let e = parser.sum()?;
    match parser.peek() {
        None => Ok(e),
        Some(tok) => Err(syntax(tok.offset, format!("unexpected {}", tok.kind.describe()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Number(v) => format!("number {v}"),
            Kind::Ident(s) => format!("identifier `{s}`"),
            Kind::Op(c) => format!("`{c}`"),
            Kind::LParen => "`(`".to_string(),
            Kind::RParen => "`)`".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax { offset, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal.parse().map_err(|_| syntax(start, format!("malformed number `{literal}`")))?;
                out.push(Token { kind: Kind::Number(value), offset: start });
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { kind: Kind::Ident(text[start..i].to_string()), offset: start });
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token { kind: Kind::Op(c as char), offset: i });
                i += 1;
            }
            b'(' => {
                out.push(Token { kind: Kind::LParen, offset: i });
                i += 1;
            }
            b')' => {
                out.push(Token { kind: Kind::RParen, offset: i });
                i += 1;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::unary(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let end = self.end;
        let tok = self.next().ok_or_else(|| syntax(end, "unexpected end of input"))?;
        match tok.kind {
            Kind::Number(v) => Ok(Expr::Const(v)),
            Kind::Ident(name) => {
                if matches!(self.peek(), Some(Token { kind: Kind::LParen, .. })) {
                    let op = UnaryOp::from_name(&name)
                        .ok_or(ExprError::UnknownFunction { name: name.clone(), offset: tok.offset })?;
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    Ok(Expr::unary(op, arg))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Kind::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(syntax(tok.offset, format!("unexpected {}", other.describe()))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let end = self.end;
        match self.next() {
            Some(Token { kind: Kind::RParen, .. }) => Ok(()),
            Some(tok) => Err(syntax(tok.offset, format!("expected `)`, found {}", tok.kind.describe()))),
            None => Err(syntax(end, "expected `)`, found end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{num, var};

    #[test]
    fn sum_of_squares_is_left_nested() {
        let expected = (var("x").powi(2) + var("y").powi(2)) + var("z").powi(2);
        assert_eq!(parse("x^2+y^2+z^2").unwrap(), expected);
    }

    #[test]
    fn function_call_and_division() {
        let expected = (var("k") * var("z")).apply(UnaryOp::Sin) / var("k");
        assert_eq!(parse("sin(k*z)/k").unwrap(), expected);
    }

    #[test]
    fn malformed_operator_sequence_reports_offset() {
        match parse("x+*y") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_is_named() {
        match parse("2*tan(x)") {
            Err(ExprError::UnknownFunction { name, offset }) => {
                assert_eq!(name, "tan");
                assert_eq!(offset, 2);
            }
            other => panic!("expected unknown function, got {other:?}"),
        }
    }

    #[test]
    fn power_is_right_associative_and_beats_minus() {
        assert_eq!(parse("x^2^3").unwrap(), var("x").pow(num(2.0).pow(num(3.0))));
        assert_eq!(parse("-x^2").unwrap(), -(var("x").powi(2)));
        assert_eq!(parse("x^-1").unwrap(), var("x").pow(-num(1.0)));
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(parse("1.5e-3").unwrap(), num(1.5e-3));
        assert_eq!(parse("2E+2*x").unwrap(), num(200.0) * var("x"));
        // `e` not followed by digits belongs to the next identifier
        assert!(matches!(parse("2e"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn unbalanced_parentheses() {
        assert!(matches!(parse("(x+1"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("x+1)"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("x $ y"), Err(ExprError::Syntax { offset: 2, .. })));
    }
}
