//! Tokenizer for the dLPA^ω surface syntax. `--` comments run to end of line;
//! whitespace is insignificant. Co-variables are quoted identifiers (`'k`) or
//! one of the bare names alpha, beta, tp, star.

use super::{Diagnostic, Severity, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `'name`
    Covar(String),
    Num(u64),
    LAngle,
    RAngle,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Pipe,
    Comma,
    Semi,
    Dot,
    Colon,
    ColonEq,
    Arrow,
    Eq,
    Tilde,
    Caret,
    Slash,     // unused alone; kept for error recovery
    AndSym,    // /\
    OrSym,     // \/
    Under,     // _
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(fm, "{s}"),
            Tok::Covar(s) => write!(fm, "{s}"),
            Tok::Num(n) => write!(fm, "{n}"),
            Tok::LAngle => write!(fm, "<"),
            Tok::RAngle => write!(fm, ">"),
            Tok::LParen => write!(fm, "("),
            Tok::RParen => write!(fm, ")"),
            Tok::LBracket => write!(fm, "["),
            Tok::RBracket => write!(fm, "]"),
            Tok::LBrace => write!(fm, "{{"),
            Tok::RBrace => write!(fm, "}}"),
            Tok::Pipe => write!(fm, "|"),
            Tok::Comma => write!(fm, ","),
            Tok::Semi => write!(fm, ";"),
            Tok::Dot => write!(fm, "."),
            Tok::Colon => write!(fm, ":"),
            Tok::ColonEq => write!(fm, ":="),
            Tok::Arrow => write!(fm, "->"),
            Tok::Eq => write!(fm, "="),
            Tok::Tilde => write!(fm, "~"),
            Tok::Caret => write!(fm, "^"),
            Tok::Slash => write!(fm, "/"),
            Tok::AndSym => write!(fm, "/\\"),
            Tok::OrSym => write!(fm, "\\/"),
            Tok::Under => write!(fm, "_"),
            Tok::Eof => write!(fm, "<eof>"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1usize;
    let mut col = 1usize;
    let push = |toks: &mut Vec<Token>, tok, begin, end, line, col| {
        toks.push(Token { tok, span: SourceSpan { begin, end, line, col } });
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (l0, c0, i0) = (line, col, i);
        macro_rules! adv {
            ($n:expr) => {{
                i += $n;
                col += $n;
            }};
        }
        match c {
            ' ' | '\t' | '\r' => adv!(1),
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                adv!(2);
                push(&mut toks, Tok::Arrow, i0, i, l0, c0);
            }
            '<' => {
                adv!(1);
                push(&mut toks, Tok::LAngle, i0, i, l0, c0);
            }
            '>' => {
                adv!(1);
                push(&mut toks, Tok::RAngle, i0, i, l0, c0);
            }
            '(' => {
                adv!(1);
                push(&mut toks, Tok::LParen, i0, i, l0, c0);
            }
            ')' => {
                adv!(1);
                push(&mut toks, Tok::RParen, i0, i, l0, c0);
            }
            '[' => {
                adv!(1);
                push(&mut toks, Tok::LBracket, i0, i, l0, c0);
            }
            ']' => {
                adv!(1);
                push(&mut toks, Tok::RBracket, i0, i, l0, c0);
            }
            '{' => {
                adv!(1);
                push(&mut toks, Tok::LBrace, i0, i, l0, c0);
            }
            '}' => {
                adv!(1);
                push(&mut toks, Tok::RBrace, i0, i, l0, c0);
            }
            '|' => {
                adv!(1);
                push(&mut toks, Tok::Pipe, i0, i, l0, c0);
            }
            ',' => {
                adv!(1);
                push(&mut toks, Tok::Comma, i0, i, l0, c0);
            }
            ';' => {
                adv!(1);
                push(&mut toks, Tok::Semi, i0, i, l0, c0);
            }
            '.' => {
                adv!(1);
                push(&mut toks, Tok::Dot, i0, i, l0, c0);
            }
            '~' => {
                adv!(1);
                push(&mut toks, Tok::Tilde, i0, i, l0, c0);
            }
            '^' => {
                adv!(1);
                push(&mut toks, Tok::Caret, i0, i, l0, c0);
            }
            '_' if !bytes
                .get(i + 1)
                .map(|b| (*b as char).is_alphanumeric())
                .unwrap_or(false) =>
            {
                adv!(1);
                push(&mut toks, Tok::Under, i0, i, l0, c0);
            }
            '=' => {
                adv!(1);
                push(&mut toks, Tok::Eq, i0, i, l0, c0);
            }
            ':' if bytes.get(i + 1) == Some(&b'=') => {
                adv!(2);
                push(&mut toks, Tok::ColonEq, i0, i, l0, c0);
            }
            ':' => {
                adv!(1);
                push(&mut toks, Tok::Colon, i0, i, l0, c0);
            }
            '/' if bytes.get(i + 1) == Some(&b'\\') => {
                adv!(2);
                push(&mut toks, Tok::AndSym, i0, i, l0, c0);
            }
            '\\' if bytes.get(i + 1) == Some(&b'/') => {
                adv!(2);
                push(&mut toks, Tok::OrSym, i0, i, l0, c0);
            }
            '\'' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && ((bytes[j] as char).is_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(Diagnostic {
                        severity: Severity::Error,
                        message: "expected identifier after ' (co-variable)".into(),
                        span: SourceSpan { begin: i0, end: i + 1, line: l0, col: c0 },
                        expected: vec![],
                    });
                }
                let name = src[i..j].to_string();
                let n = j - i;
                adv!(n);
                push(&mut toks, Tok::Covar(name), i0, i, l0, c0);
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    j += 1;
                }
                let n: u64 = src[i..j].parse().map_err(|_| Diagnostic {
                    severity: Severity::Error,
                    message: "numeral too large".into(),
                    span: SourceSpan { begin: i0, end: j, line: l0, col: c0 },
                    expected: vec![],
                })?;
                let len = j - i;
                adv!(len);
                push(&mut toks, Tok::Num(n), i0, i, l0, c0);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len()
                    && ((bytes[j] as char).is_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'\'')
                {
                    j += 1;
                }
                let name = src[i..j].to_string();
                let len = j - i;
                adv!(len);
                push(&mut toks, Tok::Ident(name), i0, i, l0, c0);
            }
            other => {
                return Err(Diagnostic {
                    severity: Severity::Error,
                    message: format!("unexpected character {other:?}"),
                    span: SourceSpan { begin: i0, end: i0 + 1, line: l0, col: c0 },
                    expected: vec![],
                })
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: SourceSpan { begin: src.len(), end: src.len(), line, col },
    });
    Ok(toks)
}
