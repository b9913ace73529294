//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' integer)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-x^2` is `-(x^2)`) and is
//! right-associative. Exponents must be integer literals, optionally signed
//! or parenthesized: `x^2`, `x^-1`, `x^(-3)`.

use super::{Expr, Func, Node};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("unknown function `{name}` at position {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("non-integer exponent at position {position}")]
    NonIntegerExponent { position: usize },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::UnknownFunction { position, .. }
            | ParseError::NonIntegerExponent { position } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number {}", v),
            Token::Ident(s) => format!("identifier `{}`", s),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent part only if digits follow, so `2e` is not swallowed.
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
                let lexeme = &text[start..i];
                let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                    position: start,
                    message: format!("malformed number `{}`", lexeme),
                })?;
                out.push((Token::Number(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{}`", ch),
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

struct Parser<'a, S> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    known: Option<&'a [S]>,
}

impl<'a, S: AsRef<str>> Parser<'a, S> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            position: self.offset(),
            message: format!("expected {}, found {}", expected, self.peek().describe()),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.bump();
                    lhs = Expr::from_node(Node::Add(lhs, self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = Expr::from_node(Node::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.bump();
                    lhs = Expr::from_node(Node::Mul(lhs, self.factor()?));
                }
                Token::Slash => {
                    self.bump();
                    lhs = Expr::from_node(Node::Div(lhs, self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.bump();
            let literal = matches!(self.peek(), Token::Number(_));
            let operand = self.factor()?;
            // A minus sign written directly before a number literal is part
            // of the literal, unless an exponent follows it.
            return Ok(match operand.node() {
                Node::Num(v) if literal => Expr::num(-v),
                _ => Expr::from_node(Node::Neg(operand)),
            });
        }
        let base = self.base()?;
        if *self.peek() == Token::Caret {
            self.bump();
            let exponent = self.exponent()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    /// Parses an integer exponent and any right-associated `^` chain after it.
    fn exponent(&mut self) -> Result<i32, ParseError> {
        let position = self.offset();
        let value = match self.peek() {
            Token::LParen => {
                self.bump();
                let v = self.signed_integer()?;
                if *self.peek() != Token::RParen {
                    return Err(match self.peek() {
                        Token::Plus | Token::Minus | Token::Star | Token::Slash | Token::Ident(_) => {
                            ParseError::NonIntegerExponent { position }
                        }
                        _ => self.unexpected("`)`"),
                    });
                }
                self.bump();
                v
            }
            _ => self.signed_integer()?,
        };
        if *self.peek() == Token::Caret {
            self.bump();
            let rest = self.exponent()?;
            if rest < 0 {
                return Err(ParseError::NonIntegerExponent { position });
            }
            let rest = u32::try_from(rest).map_err(|_| ParseError::NonIntegerExponent { position })?;
            return value.checked_pow(rest).ok_or(ParseError::Syntax {
                position,
                message: "exponent overflow".into(),
            });
        }
        Ok(value)
    }

    fn signed_integer(&mut self) -> Result<i32, ParseError> {
        let position = self.offset();
        let negative = if *self.peek() == Token::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Token::Number(v) => {
                self.bump();
                if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    return Err(ParseError::NonIntegerExponent { position });
                }
                let n = v as i32;
                Ok(if negative { -n } else { n })
            }
            Token::Ident(_) | Token::LParen => Err(ParseError::NonIntegerExponent { position }),
            _ => Err(self.unexpected("integer exponent")),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let position = self.offset();
        let start = self.pos;
        match self.bump() {
            Token::Number(v) => Ok(Expr::num(v)),
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        position,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Token::RParen {
                        return Err(self.unexpected("`)`"));
                    }
                    self.bump();
                    return Ok(Expr::call(func, arg));
                }
                if let Some(known) = self.known {
                    if !known.iter().any(|k| k.as_ref() == name) {
                        return Err(ParseError::UnknownIdentifier { name, position });
                    }
                }
                Ok(Expr::sym(&name))
            }
            Token::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Token::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => {
                self.pos = start;
                Err(self.unexpected("an operand"))
            }
        }
    }
}

/// Parses `text`. When `known_symbols` is given, identifiers outside it are
/// rejected.
pub fn parse_expression<S: AsRef<str>>(text: &str, known_symbols: Option<&[S]>) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        known: known_symbols,
    };
    let e = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.unexpected("operator or end of input"));
    }
    Ok(e)
}
