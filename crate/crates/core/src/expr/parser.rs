//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := base ("^" integer)?
//! base   := number | ident | "(" expr ")" | "-" base | func "(" expr ")"
//! ```
//!
//! `-` applied directly to a numeric literal folds into a negative constant.

use super::{BinaryOp, Expr, UnaryOp};
use crate::error::{Error, Result};

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinaryOp::Add,
                Some('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinaryOp::Mul,
                Some('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        let text = self.number_text().to_string();
        if text.is_empty() {
            return Err(self.err("expected integer exponent"));
        }
        match text.parse::<u32>() {
            Ok(k) => Ok(Expr::Pow(Box::new(base), k)),
            Err(_) => {
                self.pos = start;
                Err(self.err(format!(
                    "exponent `{text}` is not a non-negative integer"
                )))
            }
        }
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some('-') => {
                self.pos += 1;
                if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
                    match self.number()? {
                        Expr::Const(c) => Ok(Expr::Const(-c)),
                        _ => unreachable!(),
                    }
                } else {
                    Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.base()?)))
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while matches!(self.peek_raw(), Some(c) if c.is_ascii_alphanumeric() || c == '_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if self.peek() == Some('(') {
                    let op = UnaryOp::from_name(name).ok_or_else(|| {
                        Error::UnknownFunction(name.to_string())
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Unary(op, Box::new(arg)))
                } else if UnaryOp::from_name(name).is_some() {
                    Err(self.err(format!("function `{name}` requires an argument")))
                } else {
                    Ok(Expr::Var(name.to_string()))
                }
            }
            Some(c) => Err(self.err(format!("unexpected character `{c}`"))),
        }
    }

    /// Scans `digits [. digits] [e [+-] digits]`.
    fn number_text(&mut self) -> &str {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
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
        self.pos = i;
        &self.src[start..i]
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let text = self.number_text().to_string();
        text.parse::<f64>().map(Expr::Const).map_err(|_| {
            self.pos = start;
            self.err(format!("malformed number `{text}`"))
        })
    }
}
