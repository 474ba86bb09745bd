//! Tiny recursive-descent parser for closed-form scaling functions in the
//! variable `t`.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 't' | 'pi' | 'e'
//!         | ident '(' expr (',' expr)* ')'
//!         | '(' expr ')'
//! ```
//!
//! Functions: `ln`, `exp`, `sqrt`, `abs`, `min`, `max`, `pow`.

use crate::error::{Error, Result};

/// A parsed expression tree, evaluable at any `t`.
#[derive(Debug, Clone)]
pub enum Ast {
    Num(f64),
    Var,
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>),
    Call(Func, Vec<Ast>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Ln | Func::Exp | Func::Sqrt | Func::Abs => 1,
            Func::Min | Func::Max | Func::Pow => 2,
        }
    }
}

impl Ast {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Ast::Num(v) => *v,
            Ast::Var => t,
            Ast::Neg(a) => -a.eval(t),
            Ast::Add(a, b) => a.eval(t) + b.eval(t),
            Ast::Sub(a, b) => a.eval(t) - b.eval(t),
            Ast::Mul(a, b) => a.eval(t) * b.eval(t),
            Ast::Div(a, b) => a.eval(t) / b.eval(t),
            Ast::Pow(a, b) => a.eval(t).powf(b.eval(t)),
            Ast::Call(f, args) => {
                let x = args[0].eval(t);
                match f {
                    Func::Ln => x.ln(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(t)),
                    Func::Max => x.max(args[1].eval(t)),
                    Func::Pow => x.powf(args[1].eval(t)),
                }
            }
        }
    }
}

/// Parse a formula in the variable `t`.
pub fn parse_expression(src: &str) -> Result<Ast> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0, src };
    let ast = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.err(format!("unexpected trailing input at token {}", p.pos)));
    }
    Ok(ast)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && {
                            let n = bytes[i + 1] as char;
                            n.is_ascii_digit() || n == '+' || n == '-'
                        }
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| {
                    Error::Descriptor(format!("invalid number '{text}' in expression '{src}'"))
                })?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            other => {
                return Err(Error::Descriptor(format!(
                    "unexpected character '{other}' in expression '{src}'"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: String) -> Error {
        Error::Descriptor(format!("{msg} in expression '{}'", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(self.err(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Ast::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Ast::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Ast::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.factor()?; // right-assoc, allows -x in exponent
            return Ok(Ast::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Ast::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "t" => Ok(Ast::Var),
                "pi" => Ok(Ast::Num(std::f64::consts::PI)),
                "e" => Ok(Ast::Num(std::f64::consts::E)),
                _ => {
                    let func = match name.as_str() {
                        "ln" | "log" => Func::Ln,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "min" => Func::Min,
                        "max" => Func::Max,
                        "pow" => Func::Pow,
                        _ => return Err(self.err(format!("unknown identifier '{name}'"))),
                    };
                    self.expect(Tok::LParen)?;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != func.arity() {
                        return Err(self.err(format!(
                            "'{name}' takes {} argument(s), got {}",
                            func.arity(),
                            args.len()
                        )));
                    }
                    Ok(Ast::Call(func, args))
                }
            },
            other => Err(self.err(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_and_precedence() {
        let e = parse_expression("2 + 3 * t ^ 2").unwrap();
        assert_relative_eq!(e.eval(2.0), 14.0);
        let e = parse_expression("(2 + 3) * t").unwrap();
        assert_relative_eq!(e.eval(2.0), 10.0);
        let e = parse_expression("2 ^ 3 ^ 2").unwrap(); // right-assoc: 2^9
        assert_relative_eq!(e.eval(0.0), 512.0);
        let e = parse_expression("-t^2").unwrap(); // -(t^2)
        assert_relative_eq!(e.eval(3.0), -9.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = parse_expression("sqrt(t) * (1 + min(t, 1))").unwrap();
        assert_relative_eq!(e.eval(4.0), 4.0);
        assert_relative_eq!(e.eval(0.25), 0.5 * 1.25);
        let e = parse_expression("exp(ln(t))").unwrap();
        assert_relative_eq!(e.eval(7.0), 7.0, max_relative = 1e-12);
        let e = parse_expression("pi * e").unwrap();
        assert_relative_eq!(e.eval(0.0), std::f64::consts::PI * std::f64::consts::E);
        let e = parse_expression("pow(t, 0.5)").unwrap();
        assert_relative_eq!(e.eval(9.0), 3.0);
        let e = parse_expression("min(t, 2) / t").unwrap();
        assert_relative_eq!(e.eval(8.0), 0.25);
        let e = parse_expression("max(t, 2)").unwrap();
        assert_relative_eq!(e.eval(8.0), 8.0);
    }

    #[test]
    fn scientific_notation() {
        let e = parse_expression("1e-3 + 2.5E+2 * t").unwrap();
        assert_relative_eq!(e.eval(2.0), 500.001);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_expression("2 +").is_err());
        assert!(parse_expression("foo(t)").is_err());
        assert!(parse_expression("min(t)").is_err());
        assert!(parse_expression("t $ 2").is_err());
        assert!(parse_expression("(t").is_err());
        assert!(parse_expression("t 2").is_err());
    }
}
