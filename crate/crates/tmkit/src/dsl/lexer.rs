//! Tokenizer for the model language.
//!
//! Identifiers are case-sensitive and may contain hyphens when the hyphen
//! is directly followed by a letter or digit (so `E2-3-5-6-7` is one name
//! while `a ->b` stays an arrow). The prefix `end:` fuses into the
//! following identifier, naming an end-marker event. `→` and `->` are the
//! same token. Comments are `/* … */` and may span lines.

use crate::diag::{DiagCode, DiagLoc, Diagnostic};

use super::ast::Pos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Int(i64),
    Str(String),
    /// One of `{ } ( ) = , ; : ->`
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub pos: Pos,
}

pub struct LexOutput {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Lexer<'s> {
    chars: Vec<char>,
    i: usize,
    line: u32,
    col: u32,
    src: std::marker::PhantomData<&'s str>,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.i + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.i).copied()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenizes `src`, collecting recoverable problems instead of stopping.
pub fn lex(src: &str) -> LexOutput {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
        src: std::marker::PhantomData,
    };
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();

    while let Some(c) = lx.peek() {
        let pos = lx.pos();
        // Whitespace.
        if c.is_whitespace() {
            lx.bump();
            continue;
        }
        // Comments: /* … */
        if c == '/' && lx.peek2() == Some('*') {
            lx.bump();
            lx.bump();
            let mut closed = false;
            while let Some(c) = lx.bump() {
                if c == '*' && lx.peek() == Some('/') {
                    lx.bump();
                    closed = true;
                    break;
                }
            }
            if !closed {
                diagnostics.push(Diagnostic::error(
                    DiagCode::Syntax,
                    DiagLoc::pos(pos.line, pos.col),
                    "comment opened here is never closed",
                ));
            }
            continue;
        }
        // Strings.
        if c == '"' {
            lx.bump();
            let mut s = String::new();
            let mut closed = false;
            while let Some(c) = lx.bump() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match lx.bump() {
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some(other) => {
                            diagnostics.push(Diagnostic::error(
                                DiagCode::Syntax,
                                DiagLoc::pos(pos.line, pos.col),
                                format!("unknown escape `\\{other}` in string"),
                            ));
                        }
                        None => break,
                    },
                    '\n' => {
                        diagnostics.push(Diagnostic::error(
                            DiagCode::Syntax,
                            DiagLoc::pos(pos.line, pos.col),
                            "string opened here is never closed",
                        ));
                        break;
                    }
                    other => s.push(other),
                }
            }
            if !closed && lx.peek().is_none() && !s.contains('\n') {
                // Hit end of input inside the string.
                if diagnostics
                    .last()
                    .map(|d| !d.message.contains("never closed"))
                    .unwrap_or(true)
                {
                    diagnostics.push(Diagnostic::error(
                        DiagCode::Syntax,
                        DiagLoc::pos(pos.line, pos.col),
                        "string opened here is never closed",
                    ));
                }
            }
            tokens.push(Token { kind: TokKind::Str(s), pos });
            continue;
        }
        // Numbers (and negative numbers: `-` directly before a digit).
        if c.is_ascii_digit() || (c == '-' && lx.peek2().is_some_and(|d| d.is_ascii_digit())) {
            let mut text = String::new();
            if c == '-' {
                text.push('-');
                lx.bump();
            }
            while lx.peek().is_some_and(|d| d.is_ascii_digit()) {
                text.push(lx.bump().unwrap());
            }
            match text.parse::<i64>() {
                Ok(n) => tokens.push(Token { kind: TokKind::Int(n), pos }),
                Err(_) => diagnostics.push(Diagnostic::error(
                    DiagCode::Syntax,
                    DiagLoc::pos(pos.line, pos.col),
                    format!("integer literal `{text}` is out of range"),
                )),
            }
            continue;
        }
        // Identifiers, with hyphen continuation and the end: prefix.
        if is_ident_start(c) {
            let mut name = String::new();
            name.push(lx.bump().unwrap());
            loop {
                match lx.peek() {
                    Some(c) if is_ident_continue(c) => {
                        name.push(lx.bump().unwrap());
                    }
                    Some('-') if lx.peek2().is_some_and(is_ident_continue) => {
                        name.push(lx.bump().unwrap());
                    }
                    Some(':') if name == "end" && lx.peek2().is_some_and(is_ident_start) => {
                        name.push(lx.bump().unwrap());
                    }
                    _ => break,
                }
            }
            tokens.push(Token { kind: TokKind::Ident(name), pos });
            continue;
        }
        // Arrows.
        if c == '→' {
            lx.bump();
            tokens.push(Token { kind: TokKind::Sym("->"), pos });
            continue;
        }
        if c == '-' && lx.peek2() == Some('>') {
            lx.bump();
            lx.bump();
            tokens.push(Token { kind: TokKind::Sym("->"), pos });
            continue;
        }
        // Single-character symbols.
        let sym = match c {
            '{' => Some("{"),
            '}' => Some("}"),
            '(' => Some("("),
            ')' => Some(")"),
            '=' => Some("="),
            ',' => Some(","),
            ';' => Some(";"),
            ':' => Some(":"),
            _ => None,
        };
        if let Some(sym) = sym {
            lx.bump();
            tokens.push(Token { kind: TokKind::Sym(sym), pos });
            continue;
        }
        diagnostics.push(Diagnostic::error(
            DiagCode::Syntax,
            DiagLoc::pos(pos.line, pos.col),
            format!("unexpected character `{c}`"),
        ));
        lx.bump();
    }

    LexOutput { tokens, diagnostics }
}
