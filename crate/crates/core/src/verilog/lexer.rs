// SPDX-License-Identifier: Apache-2.0

use super::syntax::{Literal, Span};
use super::VerilogError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(Literal),
    /// `$name`
    System(String),
    /// `` `name ``
    Directive(String),
    Str,
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(l) => format!("number `{}`", l.text),
            Tok::System(s) => format!("`${s}`"),
            Tok::Directive(s) => format!("`` `{s} ``"),
            Tok::Str => "string literal".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCT: &[&str] = &[
    "<<<", ">>>", "===", "!==", "<<", ">>", "==", "!=", "<=", ">=", "&&", "||", "~&", "~|", "~^",
    "^~", "**", "+:", "-:", "(", ")", "[", "]", "{", "}", ";", ",", ":", ".", "=", "?", "@", "#",
    "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn span(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self, k: usize) -> Option<u8> {
        self.src.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), VerilogError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b'/'), Some(b'/')) => {
                    while !matches!(self.peek(0), None | Some(b'\n')) {
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let start = self.span();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(VerilogError::lex(start, "unterminated block comment"))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'$' {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn digits(&mut self, allowed: impl Fn(u8) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if allowed(c) || c == b'_' {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self, start: Span) -> Result<Tok, VerilogError> {
        let size_text = if self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
            self.digits(|c| c.is_ascii_digit())
        } else {
            String::new()
        };
        if self.peek(0) == Some(b'.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            return Err(VerilogError::unsupported(start, "real literal"));
        }
        if self.peek(0) != Some(b'\'') {
            let clean: String = size_text.chars().filter(|&c| c != '_').collect();
            return Ok(Tok::Number(Literal {
                size: None,
                value: clean.parse().ok(),
                text: size_text,
            }));
        }
        self.bump();
        if matches!(self.peek(0), Some(b's' | b'S')) {
            self.bump();
        }
        let base = match self.bump().map(|c| c.to_ascii_lowercase()) {
            Some(b @ (b'b' | b'o' | b'd' | b'h')) => b,
            _ => return Err(VerilogError::lex(start, "expected base b, o, d or h after `'`")),
        };
        while matches!(self.peek(0), Some(b' ' | b'\t')) {
            self.bump();
        }
        let radix = match base {
            b'b' => 2,
            b'o' => 8,
            b'd' => 10,
            _ => 16,
        };
        let body = self.digits(|c| {
            c.is_ascii_hexdigit() || matches!(c.to_ascii_lowercase(), b'x' | b'z' | b'?')
        });
        let clean: String = body.chars().filter(|&c| c != '_').collect();
        if clean.is_empty() {
            return Err(VerilogError::lex(start, "literal has no digits"));
        }
        let has_xz = clean.chars().any(|c| matches!(c.to_ascii_lowercase(), 'x' | 'z' | '?'));
        if !has_xz && clean.chars().any(|c| c.to_digit(radix).is_none()) {
            return Err(VerilogError::lex(
                start,
                format!("digit out of range for base {radix} in `{body}`"),
            ));
        }
        let size = if size_text.is_empty() {
            None
        } else {
            let clean_size: String = size_text.chars().filter(|&c| c != '_').collect();
            match clean_size.parse::<u32>() {
                Ok(0) | Err(_) => {
                    return Err(VerilogError::lex(start, format!("bad literal size `{size_text}`")))
                }
                Ok(n) => Some(n),
            }
        };
        let value = if has_xz {
            None
        } else {
            u64::from_str_radix(&clean, radix).ok()
        };
        let text = format!("{size_text}'{}{body}", base as char);
        Ok(Tok::Number(Literal { size, value, text }))
    }

    fn next(&mut self) -> Result<Token, VerilogError> {
        self.skip_trivia()?;
        let span = self.span();
        let Some(c) = self.peek(0) else {
            return Ok(Token { tok: Tok::Eof, span });
        };
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            Tok::Ident(self.word())
        } else if c.is_ascii_digit() || c == b'\'' {
            self.number(span)?
        } else if c == b'$' {
            self.bump();
            Tok::System(self.word())
        } else if c == b'`' {
            self.bump();
            Tok::Directive(self.word())
        } else if c == b'"' {
            self.bump();
            loop {
                match self.bump() {
                    Some(b'"') => break,
                    Some(b'\\') => {
                        self.bump();
                    }
                    Some(b'\n') | None => {
                        return Err(VerilogError::lex(span, "unterminated string literal"))
                    }
                    Some(_) => {}
                }
            }
            Tok::Str
        } else if c == b'\\' {
            return Err(VerilogError::unsupported(span, "escaped identifier"));
        } else {
            let rest = &self.src[self.pos..];
            let Some(p) = PUNCT.iter().find(|p| rest.starts_with(p.as_bytes())) else {
                let ch = std::str::from_utf8(rest)
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or(c as char);
                return Err(VerilogError::lex(span, format!("unexpected character {ch:?}")));
            };
            for _ in 0..p.len() {
                self.bump();
            }
            Tok::Punct(p)
        };
        Ok(Token { tok, span })
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, VerilogError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}
