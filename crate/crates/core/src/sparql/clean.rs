//! Whitespace and escape cleanup applied to SPARQL text before it is placed
//! in a prompt and again before it is sent to an endpoint.
//!
//! Quoted string literals are opaque: nothing between a literal's opening
//! and closing delimiter is ever rewritten. That keeps differences such as
//! `" Jacquard dataset"` versus `"Jacquard dataset"` visible to evaluation.

/// Which two-character backslash sequences outside literals are unescaped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanOptions {
    /// Characters `c` such that the sequence `\c` is unescaped. `n`, `r` and
    /// `t` become whitespace; `"` and `'` become literal delimiters.
    pub unescape: Vec<char>,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self { unescape: vec!['n', 't', '"'] }
    }
}

/// Clean with the default unescape set `{\n, \t, \"}`.
pub fn clean(text: &str) -> String {
    clean_with(text, &CleanOptions::default())
}

#[derive(Clone, Copy)]
enum State {
    Outside,
    /// Inside a literal. `escaped` is set when the literal was opened by a
    /// `\"` sequence, in which case `\"` (or a bare quote) closes it.
    Literal {
        quote: char,
        escaped: bool,
    },
}

struct Out {
    buf: String,
    pending_space: bool,
}

impl Out {
    fn emit(&mut self, c: char) {
        if self.pending_space && !self.buf.is_empty() {
            self.buf.push(' ');
        }
        self.pending_space = false;
        self.buf.push(c);
    }

    fn raw(&mut self, c: char) {
        self.buf.push(c);
    }
}

pub fn clean_with(text: &str, opts: &CleanOptions) -> String {
    let mut out = Out { buf: String::with_capacity(text.len()), pending_space: false };
    let mut state = State::Outside;
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        match state {
            State::Outside => match c {
                ' ' | '\n' | '\t' | '\r' => out.pending_space = true,
                '\\' => match chars.peek().copied() {
                    Some(next) if opts.unescape.contains(&next) => {
                        chars.next();
                        match next {
                            '"' | '\'' => {
                                out.emit(next);
                                state = State::Literal { quote: next, escaped: true };
                            }
                            'n' | 't' | 'r' => out.pending_space = true,
                            other => out.emit(other),
                        }
                    }
                    _ => out.emit('\\'),
                },
                '"' | '\'' => {
                    out.emit(c);
                    state = State::Literal { quote: c, escaped: false };
                }
                _ => out.emit(c),
            },
            State::Literal { quote, escaped } => {
                if c == '\\' {
                    match chars.peek().copied() {
                        Some(next) if escaped && next == quote => {
                            chars.next();
                            out.raw(quote);
                            state = State::Outside;
                        }
                        Some(next) => {
                            chars.next();
                            out.raw('\\');
                            out.raw(next);
                        }
                        None => out.raw('\\'),
                    }
                } else {
                    out.raw(c);
                    if c == quote {
                        state = State::Outside;
                    }
                }
            }
        }
    }
    out.buf
}
