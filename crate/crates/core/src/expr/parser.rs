//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Unary minus is an atom, so `-x^2` parses as `(-x)^2`.

use super::ast::{Expression, Func, Node};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown function `{name}` at line {line}, column {column}")]
    UnknownFunction {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("non-integer exponent `{text}` at line {line}, column {column}")]
    NonIntegerExponent {
        text: String,
        line: usize,
        column: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::UnknownFunction { line, column, .. }
            | ParseError::NonIntegerExponent { line, column, .. } => (*line, *column),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(String),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                s.push('.');
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        s.push(chars[i]);
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        s.push(chars[i]);
                        i += 1;
                    }
                }
            }
            col += s.chars().count();
            out.push(Token {
                tok: Tok::Number(s),
                line,
                column: start_col,
            });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                line,
                column: start_col,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ParseError::Syntax {
            line,
            column: col,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    open_parens: Vec<(usize, usize)>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: &str) -> ParseError {
        let t = self.peek();
        if t.tok == Tok::End {
            // Point at the innermost unclosed parenthesis when input ends early.
            if let Some(&(line, column)) = self.open_parens.last() {
                return ParseError::Syntax {
                    line,
                    column,
                    message: "unexpected end of input inside unclosed `(`".into(),
                };
            }
            return ParseError::Syntax {
                line: t.line,
                column: t.column,
                message: "unexpected end of input".into(),
            };
        }
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("{message}, found {}", describe(&t.tok)),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Sym('-') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Sym('/') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let mut negative = false;
        if self.peek().tok == Tok::Sym('-') {
            self.bump();
            negative = true;
        }
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(text) => {
                self.bump();
                let bad = || ParseError::NonIntegerExponent {
                    text: text.clone(),
                    line: t.line,
                    column: t.column,
                };
                if !text.chars().all(|c| c.is_ascii_digit()) {
                    return Err(bad());
                }
                let k: i32 = text.parse().map_err(|_| bad())?;
                Ok(Node::Pow(Box::new(base), if negative { -k } else { k }))
            }
            Tok::End => Err(self.error_here("expected integer exponent")),
            other => Err(ParseError::NonIntegerExponent {
                text: describe(other),
                line: t.line,
                column: t.column,
            }),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(text) => {
                self.bump();
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    line: t.line,
                    column: t.column,
                    message: format!("malformed number `{text}`"),
                })?;
                Ok(Node::Num(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::Sym('(') {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    })?;
                    let inner = self.parenthesized()?;
                    Ok(Node::Call(func, Box::new(inner)))
                } else {
                    Ok(Node::Var(name))
                }
            }
            Tok::Sym('(') => self.parenthesized(),
            Tok::Sym('-') => {
                self.bump();
                let inner = self.atom()?;
                Ok(Node::Neg(Box::new(inner)))
            }
            _ => Err(self.error_here("expected number, identifier, `(` or `-`")),
        }
    }

    fn parenthesized(&mut self) -> Result<Node, ParseError> {
        let open = self.bump();
        self.open_parens.push((open.line, open.column));
        let inner = self.expr()?;
        if self.peek().tok != Tok::Sym(')') {
            return Err(self.error_here("expected `)`"));
        }
        self.bump();
        self.open_parens.pop();
        Ok(inner)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Number(s) => format!("number `{s}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

/// Parse DSL text into an [`Expression`].
pub fn parse(text: &str) -> Result<Expression, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        open_parens: Vec::new(),
    };
    let root = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.error_here("unexpected trailing input"));
    }
    Ok(Expression::new(root))
}
