use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    /// Bare or double-quoted identifier; keywords are identifiers too.
    Ident(String, bool),
    Number(String),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Eq,
    /// Any other operator (`<`, `<=`, `<>`, `!=`, `+`, ...), kept for diagnostics.
    Op(String),
    Semicolon,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match self {
            Token::Ident(s, false) => s.clone(),
            Token::Ident(s, true) => format!("\"{s}\""),
            Token::Number(n) => n.clone(),
            Token::Str(s) => format!("'{s}'"),
            Token::Comma => ",".into(),
            Token::Dot => ".".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
            Token::Star => "*".into(),
            Token::Eq => "=".into(),
            Token::Op(op) => op.clone(),
            Token::Semicolon => ";".into(),
        }
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self, Token::Ident(s, false) if s.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub offset: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'\'' => {
                let mut value = String::new();
                i += 1;
                loop {
                    match text[i..].find('\'') {
                        None => return Err(ParseError::syntax(start, "terminated string", "end of input")),
                        Some(rel) => {
                            value.push_str(&text[i..i + rel]);
                            i += rel + 1;
                            if bytes.get(i) == Some(&b'\'') {
                                value.push('\'');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                out.push(Spanned { token: Token::Str(value), offset: start });
                continue;
            }
            b'"' => {
                let Some(rel) = text[i + 1..].find('"') else {
                    return Err(ParseError::syntax(start, "terminated identifier", "end of input"));
                };
                let name = text[i + 1..i + 1 + rel].to_string();
                i += rel + 2;
                out.push(Spanned { token: Token::Ident(name, true), offset: start });
                continue;
            }
            _ => {}
        }

        let token = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Token::Ident(text[start..i].to_string(), false)
        } else if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            Token::Number(text[start..i].to_string())
        } else {
            i += 1;
            match c {
                b',' => Token::Comma,
                b'.' => Token::Dot,
                b'(' => Token::LParen,
                b')' => Token::RParen,
                b'*' => Token::Star,
                b';' => Token::Semicolon,
                b'=' => Token::Eq,
                b'<' | b'>' | b'!' => {
                    if matches!(bytes.get(i), Some(b'=') | Some(b'>')) {
                        i += 1;
                    }
                    Token::Op(text[start..i].to_string())
                }
                b'+' | b'-' | b'/' | b'%' | b'|' => Token::Op((c as char).to_string()),
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError::syntax(start, "a token", &ch.to_string()));
                }
            }
        };
        out.push(Spanned { token, offset: start });
    }
    Ok(out)
}
