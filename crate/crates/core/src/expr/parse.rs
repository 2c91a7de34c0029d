//! Text grammar for expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' uint)?
//! atom   := number | 'pi' | ident '(' expr ')' | var | '(' expr ')'
//! var    := 'x' uint | 'u' uint
//! ```
//!
//! `^` binds tightest, then unary minus, then `*` `/`, then `+` `-`, so
//! `-x0^2` parses as `-(x0^2)`. Function names are `sin cos exp tanh sigmoid
//! softplus`. State variables `x0..x{n-1}` map to `Var(0..n)`, input
//! variables `u0..u{m-1}` to `Var(n..n+m)`.

use super::Expr;

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
}

impl ParseError {
    fn new(message: impl Into<String>, offset: usize) -> ParseError {
        ParseError {
            message: message.into(),
            offset,
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    dim_state: usize,
    dim_input: usize,
}

/// Parse `text` into an expression over `dim_state` state variables and
/// `dim_input` input variables.
pub fn parse(text: &str, dim_state: usize, dim_input: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        dim_state,
        dim_input,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.text.len() {
        return Err(ParseError::new("unexpected trailing input", p.pos));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(ParseError::new(format!("expected '{}'", c as char), self.pos))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::add(lhs, rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::sub(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Expr::mul(lhs, rhs);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Expr::div(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(Expr::neg(self.factor()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let at = self.pos;
            let k = self.uint()?;
            if k > 64 {
                return Err(ParseError::new("exponent too large", at));
            }
            Ok(Expr::pow(base, k))
        } else {
            Ok(base)
        }
    }

    fn uint(&mut self) -> Result<u32, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ParseError::new("expected non-negative integer", start));
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        let v = s
            .parse::<u32>()
            .map_err(|_| ParseError::new("integer out of range", start))?;
        self.skip_ws();
        Ok(v)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        match self.peek() {
            None => Err(ParseError::new("unexpected end of input", self.pos)),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
                self.skip_ws();
                self.ident(name, start)
            }
            Some(c) => Err(ParseError::new(
                format!("unexpected character '{}'", c as char),
                self.pos,
            )),
        }
    }

    fn ident(&mut self, name: &str, start: usize) -> Result<Expr, ParseError> {
        let func: Option<fn(Expr) -> Expr> = match name {
            "sin" => Some(Expr::sin),
            "cos" => Some(Expr::cos),
            "exp" => Some(Expr::exp),
            "tanh" => Some(Expr::tanh),
            "sigmoid" => Some(Expr::sigmoid_of),
            "softplus" => Some(Expr::softplus_of),
            _ => None,
        };
        if let Some(func) = func {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(func(arg));
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(idx) = name.strip_prefix('x') {
            let i: usize = idx
                .parse()
                .map_err(|_| ParseError::new(format!("unknown identifier '{name}'"), start))?;
            if i >= self.dim_state {
                return Err(ParseError::new(
                    format!("state variable x{i} out of range (dimension {})", self.dim_state),
                    start,
                ));
            }
            return Ok(Expr::var(i));
        }
        if let Some(idx) = name.strip_prefix('u') {
            let j: usize = idx
                .parse()
                .map_err(|_| ParseError::new(format!("unknown identifier '{name}'"), start))?;
            if j >= self.dim_input {
                return Err(ParseError::new(
                    format!("input variable u{j} out of range ({} inputs)", self.dim_input),
                    start,
                ));
            }
            return Ok(Expr::var(self.dim_state + j));
        }
        Err(ParseError::new(format!("unknown identifier '{name}'"), start))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        // optional exponent part, e.g. 1e-3
        if self.peek() == Some(b'e') || self.peek() == Some(b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'+') || self.peek() == Some(b'-') {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        let v = s
            .parse::<f64>()
            .map_err(|_| ParseError::new(format!("malformed number '{s}'"), start))?;
        if !v.is_finite() {
            return Err(ParseError::new("number overflows f64", start));
        }
        self.skip_ws();
        Ok(Expr::Const(v))
    }
}
