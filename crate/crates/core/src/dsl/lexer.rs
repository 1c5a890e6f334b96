use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::Diagnostic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Word(String),
    Int(i64),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Le,
    Lt,
    Ge,
    Gt,
    Plus,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut col);
            }
            continue;
        }
        let two = |n: char| chars.get(i + 1) == Some(&n);
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ';' => Tok::Semi,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '<' if two('=') => Tok::Le,
            '<' => Tok::Lt,
            '>' if two('=') => Tok::Ge,
            '>' => Tok::Gt,
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '"' {
                    return Err(Diagnostic::new(tl, tc, "unterminated string literal"));
                }
                let s: String = chars[start..j].iter().collect();
                advance(j + 1 - i, &mut i, &mut col);
                out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
                continue;
            }
            d if d.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == '.' || chars[j].is_alphabetic()) {
                    let mut k = j;
                    while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '.') {
                        k += 1;
                    }
                    let text: String = chars[i..k].iter().collect();
                    return Err(Diagnostic::new(
                        tl,
                        tc,
                        alloc::format!("non-integer literal `{text}`; only integers are allowed"),
                    ));
                }
                let text: String = chars[i..j].iter().collect();
                let value = text
                    .parse::<i64>()
                    .map_err(|_| Diagnostic::new(tl, tc, alloc::format!("integer `{text}` is out of range")))?;
                advance(j - i, &mut i, &mut col);
                out.push(Token { tok: Tok::Int(value), line: tl, column: tc });
                continue;
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let w: String = chars[i..j].iter().collect();
                advance(j - i, &mut i, &mut col);
                out.push(Token { tok: Tok::Word(w), line: tl, column: tc });
                continue;
            }
            other => {
                return Err(Diagnostic::new(tl, tc, alloc::format!("unexpected character `{other}`")));
            }
        };
        let width = if matches!(tok, Tok::Le | Tok::Ge) { 2 } else { 1 };
        advance(width, &mut i, &mut col);
        out.push(Token { tok, line: tl, column: tc });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}
