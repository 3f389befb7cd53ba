use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    /// Any bare word: query keywords, builtin function names, `a`, `true`.
    Keyword,
    Variable,
    Iri,
    /// `prefix:local`, a bare `prefix:` namespace, or a `_:label` blank node.
    PrefixedName,
    /// A quoted string, including any `@lang` suffix.
    Literal,
    Punct,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the token's first character in the source text.
    pub offset: usize,
}

impl Token {
    pub fn is_keyword(&self, word: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(word)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    /// Prefix of a prefixed name, without the colon.
    pub fn prefix(&self) -> Option<&str> {
        if self.kind != TokenKind::PrefixedName {
            return None;
        }
        self.text.split_once(':').map(|(p, _)| p)
    }

    /// Content of a literal token between its delimiters, without any
    /// language tag.
    pub fn literal_body(&self) -> Option<&str> {
        if self.kind != TokenKind::Literal {
            return None;
        }
        let t = self.text.as_str();
        let delim = if t.starts_with("\"\"\"") || t.starts_with("'''") { 3 } else { 1 };
        let quote = &t[..delim];
        let end = t.rfind(quote).filter(|&e| e >= delim)?;
        Some(&t[delim..end])
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting at offset {offset}")]
    UnterminatedLiteral { offset: usize },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match self {
            LexError::UnterminatedLiteral { offset } => *offset,
        }
    }
}

const TWO_CHAR_PUNCT: [&str; 6] = ["^^", "<=", ">=", "!=", "&&", "||"];

/// Split SPARQL text into tokens. Whitespace and `#` comments are dropped;
/// every other byte of the input is covered by exactly one token.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    Lexer { src: text, pos: 0 }.run()
}

/// Join token texts with single spaces.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_pname_char(c: char) -> bool {
    is_name_char(c) || c == '-' || c == '.'
}

fn is_local_char(c: char) -> bool {
    is_pname_char(c) || c == ':' || c == '%'
}

fn is_iri_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        let len = self.rest().char_indices().find(|&(_, c)| !pred(c)).map(|(i, _)| i).unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..self.pos]
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            if c == '#' {
                self.take_while(|c| c != '\n');
                continue;
            }
            let start = self.pos;
            let kind = self.next_kind(c)?;
            tokens.push(Token { kind, text: self.src[start..self.pos].to_string(), offset: start });
        }
        Ok(tokens)
    }

    fn next_kind(&mut self, c: char) -> Result<TokenKind, LexError> {
        match c {
            '"' | '\'' => self.literal(c),
            '?' | '$' if self.peek_at(1).is_some_and(is_name_char) => {
                self.pos += 1;
                self.take_while(is_name_char);
                Ok(TokenKind::Variable)
            }
            '<' if self.iri_len().is_some() => {
                self.pos += self.iri_len().unwrap_or(0);
                Ok(TokenKind::Iri)
            }
            c if c.is_ascii_digit() => {
                self.number();
                Ok(TokenKind::Number)
            }
            ':' => {
                self.pos += 1;
                self.local_part();
                Ok(TokenKind::PrefixedName)
            }
            c if c.is_alphabetic() || c == '_' => Ok(self.word()),
            _ => {
                let len = TWO_CHAR_PUNCT
                    .iter()
                    .find(|p| self.rest().starts_with(*p))
                    .map(|p| p.len())
                    .unwrap_or(c.len_utf8());
                self.pos += len;
                Ok(TokenKind::Punct)
            }
        }
    }

    fn iri_len(&self) -> Option<usize> {
        let rest = self.rest();
        let body = &rest[1..];
        let end = body.char_indices().find(|&(_, c)| !is_iri_char(c));
        match end {
            Some((i, '>')) => Some(i + 2),
            _ => None,
        }
    }

    fn literal(&mut self, quote: char) -> Result<TokenKind, LexError> {
        let start = self.pos;
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let long = self.rest().starts_with(&triple);
        self.pos += if long { 3 } else { 1 };
        loop {
            let Some(c) = self.peek() else {
                return Err(LexError::UnterminatedLiteral { offset: start });
            };
            if c == '\\' {
                self.pos += 1;
                if let Some(n) = self.peek() {
                    self.pos += n.len_utf8();
                }
                continue;
            }
            if long {
                if self.rest().starts_with(&triple) {
                    self.pos += 3;
                    break;
                }
            } else if c == quote {
                self.pos += 1;
                break;
            }
            self.pos += c.len_utf8();
        }
        if self.peek() == Some('@') && self.peek_at(1).is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
        }
        Ok(TokenKind::Literal)
    }

    fn number(&mut self) {
        self.take_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let digit_at = if matches!(self.peek_at(1), Some('+' | '-')) { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += digit_at;
                self.take_while(|c| c.is_ascii_digit());
            }
        }
    }

    /// Consume a prefixed-name local part, leaving any trailing dots (they
    /// terminate the triple, not the name).
    fn local_part(&mut self) {
        let start = self.pos;
        self.take_while(is_local_char);
        while self.pos > start && self.src[..self.pos].ends_with('.') {
            self.pos -= 1;
        }
    }

    fn word(&mut self) -> TokenKind {
        let start = self.pos;
        let candidate = self.take_while(is_pname_char);
        if self.peek() == Some(':') && !candidate.ends_with('.') {
            self.pos += 1;
            self.local_part();
            return TokenKind::PrefixedName;
        }
        self.pos = start;
        self.take_while(is_name_char);
        TokenKind::Keyword
    }
}
