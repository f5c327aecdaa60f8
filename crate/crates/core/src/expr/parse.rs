use super::{BinOp, Constant, Expr, Func, ParseError, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let at = self.pos;
        let Some(c) = self.peek() else {
            return Ok((at, Tok::End));
        };
        let tok = match c {
            '0'..='9' | '.' => return self.number(),
            'a'..='z' | 'A'..='Z' | '_' => {
                let len = self.src[at..]
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(self.src.len() - at);
                self.pos += len;
                return Ok((at, Tok::Ident(self.src[at..at + len].to_string())));
            }
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(ParseError { offset: at, expected: format!("a token, found `{c}`") });
            }
        };
        self.pos += c.len_utf8();
        Ok((at, tok))
    }

    fn number(&mut self) -> Result<(usize, Tok), ParseError> {
        let at = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = at;
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
        self.pos = i;
        self.src[at..i]
            .parse::<f64>()
            .map(|v| (at, Tok::Num(v)))
            .map_err(|_| ParseError { offset: at, expected: "a number".into() })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].1
    }

    fn offset(&self) -> usize {
        self.toks[self.i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].1.clone();
        if t != Tok::End {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), expected: expected.to_string() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.signed_atom()?;
            base = Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent));
        }
        Ok(base)
    }

    fn signed_atom(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.signed_atom()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::Var(Var::T)),
                "x" => Ok(Expr::Var(Var::X)),
                "pi" => Ok(Expr::Const(Constant::Pi)),
                "e" => Ok(Expr::Const(Constant::E)),
                other => match Func::from_name(other) {
                    Some(func) => {
                        if *self.peek() != Tok::LParen {
                            return self.fail("`(` after function name");
                        }
                        self.bump();
                        let arg = self.expr()?;
                        self.close()?;
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                    None => Err(ParseError {
                        offset: at,
                        expected: format!("a known identifier, found `{other}`"),
                    }),
                },
            },
            _ => Err(ParseError { offset: at, expected: "a number, identifier or `(`".into() }),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.fail("`)`")
        }
    }
}

/// Parse an expression; see the module docs for the grammar.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail("end of input");
    }
    if e.uses_var(Var::T) && e.uses_var(Var::X) {
        return Err(ParseError { offset: 0, expected: "a single free variable (`t` or `x`)".into() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            Just(Expr::Var(Var::T)),
            Just(Expr::Const(Constant::Pi)),
            Just(Expr::Const(Constant::E)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            let func = prop_oneof![
                Just(Func::Abs),
                Just(Func::Sin),
                Just(Func::Cos),
                Just(Func::Exp),
                Just(Func::Sqrt),
                Just(Func::Ln)
            ];
            let op = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Pow)
            ];
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (func, inner.clone()).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
                (op, inner.clone(), inner).prop_map(|(o, l, r)| Expr::Binary(o, Box::new(l), Box::new(r))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(reparsed, e);
        }

        #[test]
        fn never_panics(s in "[ -~]{0,40}") {
            match parse(&s) {
                Ok(e) => { let _ = e.eval(0.5); }
                Err(err) => prop_assert!(err.offset <= s.len()),
            }
        }
    }
}
