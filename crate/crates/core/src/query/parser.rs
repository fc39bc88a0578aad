//! Recursive-descent parser for the PATTERN / WHERE / WITHIN language.
//!
//! ```text
//! query   := PATTERN expr [WHERE '[' ident ']'] WITHIN number unit
//! expr    := ident | op '(' expr ',' expr ')'
//! op      := SEQ | AND
//! unit    := us | ms | s | sec | min
//! ```
//! Keywords and operator names are case-insensitive.

use std::collections::HashSet;

use thiserror::Error;

use super::ast::{PatternExpr, PatternQuery};
use crate::event::{EventType, Micros};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown operator {name}")]
    UnknownOperator { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {op} takes exactly 2 operands, got {found}")]
    Arity {
        line: usize,
        col: usize,
        op: String,
        found: usize,
    },
    #[error("window must be positive")]
    NonPositiveWindow,
    #[error("event type {0} appears more than once in the pattern")]
    DuplicateLeaf(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line, col });
            i += 1;
            col += 1;
        } else if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                line: start.0,
                col: start.1,
                msg: format!("bad number {text:?}"),
            })?;
            out.push(Token {
                tok: Tok::Number(value),
                line: start.0,
                col: start.1,
            });
        } else if c.is_alphanumeric() || c == '_' || c == 'µ' {
            let begin = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == 'µ') {
                i += 1;
            }
            col += i - begin;
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start.0,
                col: start.1,
            });
        } else {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, tok: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: tok.line,
            col: tok.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            self.error(&t, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s.eq_ignore_ascii_case(kw) => Ok(()),
            other => self.error(&t, format!("expected {kw}, found {}", describe(other))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn expr(&mut self) -> Result<PatternExpr, ParseError> {
        let t = self.next();
        let Tok::Ident(name) = &t.tok else {
            return self.error(&t, format!("expected event type or operator, found {}", describe(&t.tok)));
        };
        if self.peek().tok != Tok::LParen {
            return Ok(PatternExpr::Leaf(EventType::new(name).expect("identifier is non-empty")));
        }
        let op = name.to_ascii_uppercase();
        if op != "SEQ" && op != "AND" {
            return Err(ParseError::UnknownOperator {
                line: t.line,
                col: t.col,
                name: name.clone(),
            });
        }
        self.expect(Tok::LParen, "'('")?;
        let mut args = vec![self.expr()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "')'")?;
        if args.len() != 2 {
            return Err(ParseError::Arity {
                line: t.line,
                col: t.col,
                op,
                found: args.len(),
            });
        }
        let right = args.pop().expect("two operands");
        let left = args.pop().expect("two operands");
        Ok(if op == "SEQ" {
            PatternExpr::seq(left, right)
        } else {
            PatternExpr::and(left, right)
        })
    }

    fn window(&mut self) -> Result<Micros, ParseError> {
        let t = self.next();
        let Tok::Number(amount) = t.tok else {
            return self.error(&t, format!("expected window length, found {}", describe(&t.tok)));
        };
        let u = self.next();
        let scale = match &u.tok {
            Tok::Ident(unit) => match unit.to_ascii_lowercase().as_str() {
                "us" | "µs" | "micros" => 1.0,
                "ms" | "millis" => 1e3,
                "s" | "sec" | "secs" | "second" | "seconds" => 1e6,
                "min" | "mins" | "minute" | "minutes" => 60e6,
                other => return self.error(&u, format!("unknown time unit {other:?}")),
            },
            other => return self.error(&u, format!("expected time unit, found {}", describe(other))),
        };
        let us = (amount * scale).round() as Micros;
        if us <= 0 {
            return Err(ParseError::NonPositiveWindow);
        }
        Ok(us)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("{s:?}"),
        Tok::Number(n) => format!("number {n}"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses query text into a [`PatternQuery`].
pub fn parse_query(text: &str) -> Result<PatternQuery, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    p.keyword("PATTERN")?;
    let pattern = p.expr()?;
    let mut where_key = None;
    if p.at_keyword("WHERE") {
        p.next();
        p.expect(Tok::LBracket, "'['")?;
        let t = p.next();
        match t.tok {
            Tok::Ident(key) => where_key = Some(key),
            ref other => return p.error(&t, format!("expected attribute name, found {}", describe(other))),
        }
        p.expect(Tok::RBracket, "']'")?;
    }
    p.keyword("WITHIN")?;
    let window = p.window()?;
    let end = p.next();
    if end.tok != Tok::Eof {
        return p.error(&end, format!("unexpected {} after query", describe(&end.tok)));
    }

    let mut seen = HashSet::new();
    for leaf in pattern.leaves() {
        if !seen.insert(leaf.clone()) {
            return Err(ParseError::DuplicateLeaf(leaf.to_string()));
        }
    }
    Ok(PatternQuery {
        pattern,
        where_key,
        window,
    })
}
