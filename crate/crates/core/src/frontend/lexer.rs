use crate::dispatch::Span;

use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// `@name`, an intrinsic reference.
    At(String),
    Op(&'static str),
    Newline,
    Semi,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// Whitespace directly precedes the token (significant inside `[...]`).
    pub space_before: bool,
}

const OPS: &[&str] = &[
    "...", "<:", ">:", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "^=", "//", "::", "≠", "≤", "≥",
    "+", "-", "*", "/", "%", "^", "<", ">", "=", "!", "(", ")", "[", "]", "{", "}", ",", ".", ":", "?", "'", "÷",
];

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || (!c.is_ascii() && !is_unicode_op(c) && !c.is_whitespace())
}

fn ident_char(c: char) -> bool {
    ident_start(c) || c.is_ascii_digit() || c == '′'
}

fn is_unicode_op(c: char) -> bool {
    matches!(c, '≠' | '≤' | '≥' | '÷' | '′') || ('\u{2190}'..='\u{22FF}').contains(&c)
}

pub fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let (mut line, mut col) = (1u32, 1u32);
    let mut i = 0;
    let mut space = false;
    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c == '\n' {
            out.push(Token { tok: Tok::Newline, span, space_before: space });
            advance!(1);
            space = true;
            continue;
        }
        if c.is_whitespace() {
            advance!(1);
            space = true;
            continue;
        }
        let push = |out: &mut Vec<Token>, tok: Tok| out.push(Token { tok, span, space_before: space });
        if c == ';' {
            push(&mut out, Tok::Semi);
            advance!(1);
            space = false;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                is_float = true;
                advance!(1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!(1);
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let signed = matches!(chars.get(i + 1), Some('+' | '-'));
                let digit_at = if signed { i + 2 } else { i + 1 };
                if chars.get(digit_at).is_some_and(char::is_ascii_digit) {
                    is_float = true;
                    advance!(digit_at - i);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!(1);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| SyntaxError::new(span, format!("bad number `{text}`")))?)
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| SyntaxError::new(span, format!("integer literal `{text}` out of range")))?,
                )
            };
            push(&mut out, tok);
            space = false;
            continue;
        }
        if c == '"' {
            advance!(1);
            let mut s = String::new();
            loop {
                let Some(&c) = chars.get(i) else {
                    return Err(SyntaxError::new(span, "unterminated string"));
                };
                advance!(1);
                match c {
                    '"' => break,
                    '\\' => {
                        let Some(&e) = chars.get(i) else {
                            return Err(SyntaxError::new(span, "unterminated string"));
                        };
                        advance!(1);
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            '"' => '"',
                            '\\' => '\\',
                            other => return Err(SyntaxError::new(span, format!("unknown escape `\\{other}`"))),
                        });
                    }
                    c => s.push(c),
                }
            }
            push(&mut out, Tok::Str(s));
            space = false;
            continue;
        }
        if c == '@' && chars.get(i + 1).is_some_and(|c| ident_start(*c)) {
            advance!(1);
            let start = i;
            while i < chars.len() && (ident_char(chars[i]) || (chars[i] == '!' && chars.get(i + 1) != Some(&'='))) {
                advance!(1);
            }
            push(&mut out, Tok::At(chars[start..i].iter().collect()));
            space = false;
            continue;
        }
        if ident_start(c) {
            let start = i;
            while i < chars.len() && (ident_char(chars[i]) || (chars[i] == '!' && chars.get(i + 1) != Some(&'='))) {
                advance!(1);
            }
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            space = false;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let Some(op) = OPS.iter().find(|op| rest.starts_with(**op)) else {
            return Err(SyntaxError::new(span, format!("unexpected character `{c}`")));
        };
        // a quote is a transpose only directly after an operand
        if *op == "'" {
            let postfix = !space
                && out.last().is_some_and(|t| {
                    matches!(t.tok, Tok::Ident(_) | Tok::Int(_) | Tok::Float(_) | Tok::Op(")" | "]" | "'"))
                });
            if !postfix {
                return Err(SyntaxError::new(span, "unexpected `'`"));
            }
        }
        push(&mut out, Tok::Op(op));
        advance!(op.chars().count());
        space = false;
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col }, space_before: space });
    Ok(out)
}
