use super::{Dims, Expr, ExprError, Var};

/// Recursive-descent parser over the byte string; offsets in errors are byte offsets.
pub(super) struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dims: Dims,
}

impl<'a> Parser<'a> {
    pub(super) fn new(text: &'a str, dims: Dims) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            dims,
        }
    }

    pub(super) fn parse_all(mut self) -> Result<Expr, ExprError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    fn syntax(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.syntax("expected integer exponent"));
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let n: u32 = digits.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                let a = self.atom()?;
                Ok(Expr::Neg(Box::new(a)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits_start = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits_start == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number '{text}'"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "abs" | "min" | "max" => {
                // Function names must be immediately followed by '('.
                if self.src.get(self.pos) != Some(&b'(') {
                    return Err(self.syntax("expected '(' after function name"));
                }
                self.pos += 1;
                let a = self.expr()?;
                if name == "abs" {
                    self.expect(b')')?;
                    return Ok(Expr::Abs(Box::new(a)));
                }
                self.expect(b',')?;
                let b = self.expr()?;
                self.expect(b')')?;
                Ok(if name == "min" {
                    Expr::Min(Box::new(a), Box::new(b))
                } else {
                    Expr::Max(Box::new(a), Box::new(b))
                })
            }
            "xi" | "x" | "z" => {
                let digits_start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let full = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if digits_start == self.pos {
                    return Err(ExprError::UnknownIdentifier {
                        offset: start,
                        name: full.to_string(),
                    });
                }
                let idx: usize = full[name.len()..].parse().unwrap_or(0);
                let (limit, var) = match name {
                    "xi" => (self.dims.p, Var::Xi(idx.wrapping_sub(1))),
                    "x" => (self.dims.n, Var::X(idx.wrapping_sub(1))),
                    _ => (self.dims.nz, Var::Z(idx.wrapping_sub(1))),
                };
                if idx == 0 || idx > limit {
                    return Err(ExprError::IndexOutOfRange {
                        offset: start,
                        name: full.to_string(),
                        limit,
                    });
                }
                Ok(Expr::Var(var))
            }
            _ => Err(ExprError::UnknownIdentifier {
                offset: start,
                name: name.to_string(),
            }),
        }
    }
}
