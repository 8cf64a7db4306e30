use std::sync::Arc;

use super::ParseError;
use crate::span::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Func,
    Trait,
    Class,
    Implements,
    Const,
    Constructor,
    Requires,
    Ensures,
    Decreases,
    Ghost,
    Var,
    This,
    Return,
    If,
    Else,
    New,
    True,
    False,
    Result,
    IntTy,
    BoolTy,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    FatArrow,
    Assign,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Implies,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Func => "func",
            Tok::Trait => "trait",
            Tok::Class => "class",
            Tok::Implements => "implements",
            Tok::Const => "const",
            Tok::Constructor => "constructor",
            Tok::Requires => "requires",
            Tok::Ensures => "ensures",
            Tok::Decreases => "decreases",
            Tok::Ghost => "ghost",
            Tok::Var => "var",
            Tok::This => "this",
            Tok::Return => "return",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::New => "new",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Result => "result",
            Tok::IntTy => "int",
            Tok::BoolTy => "bool",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Arrow => "->",
            Tok::FatArrow => "=>",
            Tok::Assign => ":=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Implies => "==>",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "func" => Tok::Func,
        "trait" => Tok::Trait,
        "class" => Tok::Class,
        "implements" => Tok::Implements,
        "const" => Tok::Const,
        "constructor" => Tok::Constructor,
        "requires" => Tok::Requires,
        "ensures" => Tok::Ensures,
        "decreases" => Tok::Decreases,
        "ghost" => Tok::Ghost,
        "var" => Tok::Var,
        "this" => Tok::This,
        "return" => Tok::Return,
        "if" => Tok::If,
        "else" => Tok::Else,
        "new" => Tok::New,
        "true" => Tok::True,
        "false" => Tok::False,
        "result" => Tok::Result,
        "int" => Tok::IntTy,
        "bool" => Tok::BoolTy,
        _ => return None,
    })
}

pub fn is_keyword(s: &str) -> bool {
    keyword(s).is_some()
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub fn tokenize(source: &str, file: &Arc<str>) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;

    let span = |start: usize, end: usize, line: u32, line_start: usize| {
        let col = source[line_start..start].chars().count() as u32 + 1;
        SourceSpan::new(file.clone(), start, end, line, col)
    };

    while pos < bytes.len() {
        let c = bytes[pos];
        if c == b'\n' {
            pos += 1;
            line += 1;
            line_start = pos;
            continue;
        }
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'/') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        if c.is_ascii_alphabetic() || c == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            let word = &source[start..pos];
            let tok = keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()));
            out.push(Token {
                tok,
                span: span(start, pos, line, line_start),
            });
            continue;
        }
        if c.is_ascii_digit() {
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let sp = span(start, pos, line, line_start);
            let value = source[start..pos].parse::<i64>().map_err(|_| ParseError {
                span: sp.clone(),
                message: format!("integer literal `{}` out of range", &source[start..pos]),
            })?;
            out.push(Token {
                tok: Tok::Int(value),
                span: sp,
            });
            continue;
        }
        let rest = &bytes[pos..];
        let (tok, len) = match rest {
            [b'=', b'=', b'>', ..] => (Tok::Implies, 3),
            [b'=', b'=', ..] => (Tok::EqEq, 2),
            [b'=', b'>', ..] => (Tok::FatArrow, 2),
            [b'!', b'=', ..] => (Tok::NotEq, 2),
            [b'<', b'=', ..] => (Tok::Le, 2),
            [b'>', b'=', ..] => (Tok::Ge, 2),
            [b'&', b'&', ..] => (Tok::AndAnd, 2),
            [b'|', b'|', ..] => (Tok::OrOr, 2),
            [b':', b'=', ..] => (Tok::Assign, 2),
            [b'-', b'>', ..] => (Tok::Arrow, 2),
            [b'(', ..] => (Tok::LParen, 1),
            [b')', ..] => (Tok::RParen, 1),
            [b'{', ..] => (Tok::LBrace, 1),
            [b'}', ..] => (Tok::RBrace, 1),
            [b',', ..] => (Tok::Comma, 1),
            [b';', ..] => (Tok::Semi, 1),
            [b':', ..] => (Tok::Colon, 1),
            [b'.', ..] => (Tok::Dot, 1),
            [b'+', ..] => (Tok::Plus, 1),
            [b'-', ..] => (Tok::Minus, 1),
            [b'*', ..] => (Tok::Star, 1),
            [b'<', ..] => (Tok::Lt, 1),
            [b'>', ..] => (Tok::Gt, 1),
            [b'!', ..] => (Tok::Bang, 1),
            _ => {
                let ch = source[pos..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    span: span(start, start + ch.len_utf8(), line, line_start),
                    message: format!("unexpected character {ch:?}"),
                });
            }
        };
        pos += len;
        out.push(Token {
            tok,
            span: span(start, pos, line, line_start),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: span(pos, pos, line, line_start),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, &Arc::from("t.moo"))
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn longest_match_operators() {
        assert_eq!(
            toks("a ==> b == c => :="),
            vec![
                Tok::Ident("a".into()),
                Tok::Implies,
                Tok::Ident("b".into()),
                Tok::EqEq,
                Tok::Ident("c".into()),
                Tok::FatArrow,
                Tok::Assign,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let ts = tokenize("// hi\n  func", &Arc::from("f")).unwrap();
        assert_eq!(ts[0].tok, Tok::Func);
        assert_eq!((ts[0].span.line, ts[0].span.col), (2, 3));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("x = 1", &Arc::from("f")).unwrap_err();
        assert!(err.message.contains("unexpected character"));
        assert_eq!(err.span.col, 3);
    }

    #[test]
    fn integer_overflow_is_an_error() {
        assert!(tokenize("99999999999999999999", &Arc::from("f")).is_err());
    }
}
