use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::QasmError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    Str(String),
    /// `// @param a b` comment pragma.
    ParamPragma(Vec<String>),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semicolon,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    EqEq,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Cursor<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, out: &mut String, pred: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn pragma(comment: &str) -> Option<Vec<String>> {
    let rest = comment.trim().strip_prefix("@param")?;
    if !rest.is_empty() && !rest.starts_with(|c: char| c.is_whitespace()) {
        return None;
    }
    Some(
        rest.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(ToString::to_string)
            .collect(),
    )
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, QasmError> {
    let mut cur = Cursor { chars: src.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek() else {
            out.push(Token { tok: Tok::Eof, line, col });
            return Ok(out);
        };
        let lex_err = |message: String| QasmError::Lex { line, col, message };
        let tok = match c {
            c if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    cur.bump();
                    let mut text = String::new();
                    cur.take_while(&mut text, |c| c != '\n');
                    match pragma(&text) {
                        Some(names) => Tok::ParamPragma(names),
                        None => continue,
                    }
                } else if cur.peek() == Some('*') {
                    return Err(lex_err("block comments are not supported".into()));
                } else {
                    Tok::Slash
                }
            }
            '-' => {
                cur.bump();
                if cur.peek() == Some('>') {
                    cur.bump();
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            '=' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    Tok::EqEq
                } else {
                    return Err(lex_err("unexpected `=`".into()));
                }
            }
            '"' => {
                cur.bump();
                let mut text = String::new();
                cur.take_while(&mut text, |c| c != '"' && c != '\n');
                if cur.bump() != Some('"') {
                    return Err(lex_err("unterminated string".into()));
                }
                Tok::Str(text)
            }
            c if is_ident_start(c) => {
                let mut text = String::new();
                cur.take_while(&mut text, is_ident_char);
                Tok::Ident(text)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut text = String::new();
                cur.take_while(&mut text, |c| c.is_ascii_digit());
                let mut real = false;
                if cur.peek() == Some('.') {
                    real = true;
                    text.push('.');
                    cur.bump();
                    cur.take_while(&mut text, |c| c.is_ascii_digit());
                }
                if matches!(cur.peek(), Some('e' | 'E')) {
                    real = true;
                    text.push('e');
                    cur.bump();
                    if let Some(sign @ ('+' | '-')) = cur.peek() {
                        text.push(sign);
                        cur.bump();
                    }
                    let before = text.len();
                    cur.take_while(&mut text, |c| c.is_ascii_digit());
                    if text.len() == before {
                        return Err(lex_err(alloc::format!("malformed exponent in `{text}`")));
                    }
                }
                if real {
                    let v: f64 = text.parse().map_err(|_| lex_err(alloc::format!("malformed number `{text}`")))?;
                    Tok::Real(v)
                } else {
                    let v: u64 = text.parse().map_err(|_| lex_err(alloc::format!("integer `{text}` out of range")))?;
                    Tok::Int(v)
                }
            }
            _ => {
                cur.bump();
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ';' => Tok::Semicolon,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    other => return Err(lex_err(alloc::format!("unexpected character `{}`", other.escape_debug()))),
                }
            }
        };
        out.push(Token { tok, line, col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_arrows() {
        assert_eq!(
            toks("measure q[0] -> c[1]; 1.5e-3 2 .5"),
            vec![
                Tok::Ident("measure".into()),
                Tok::Ident("q".into()),
                Tok::LBracket,
                Tok::Int(0),
                Tok::RBracket,
                Tok::Arrow,
                Tok::Ident("c".into()),
                Tok::LBracket,
                Tok::Int(1),
                Tok::RBracket,
                Tok::Semicolon,
                Tok::Real(1.5e-3),
                Tok::Int(2),
                Tok::Real(0.5),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn pragma_comment() {
        assert_eq!(
            toks("// @param theta, phi\n// plain comment\n"),
            vec![Tok::ParamPragma(vec!["theta".into(), "phi".into()]), Tok::Eof]
        );
        assert_eq!(toks("// @parameters x"), vec![Tok::Eof]);
    }

    #[test]
    fn positioned_lex_error() {
        let err = tokenize("qreg q[2];\n  h q[0] $").unwrap_err();
        assert_eq!(err, QasmError::Lex { line: 2, col: 10, message: "unexpected character `$`".into() });
    }

    #[test]
    fn bad_exponent() {
        assert!(matches!(tokenize("1e+"), Err(QasmError::Lex { line: 1, col: 1, .. })));
    }
}
