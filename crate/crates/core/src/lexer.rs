//! Tokenizer shared by the specification parser and the skeleton-language parser.

use crate::diag::{Diagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    /// Punctuation or operator.
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    /// Whitespace (or a comment) immediately precedes this token.
    pub spaced: bool,
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "::", ":=", "..", "=>", "!=", "<=", ">=", "++", "(", ")", "{", "}", "[", "]", ",", ":", ".",
    ";", "=", "<", ">", "+", "-", "*", "/", "|",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut spaced = true;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            spaced = true;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            spaced = true;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            spaced = true;
            continue;
        }
        let start = (line, col);
        let begin = i;
        let tok = if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[begin..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_real = false;
            // `1..4` is a range, not a real.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            if is_real {
                match text.parse::<f64>() {
                    Ok(r) => Tok::Real(r),
                    Err(_) => {
                        errs.push(Diagnostic::error(
                            "LEX_ERROR",
                            Some(SourceSpan::new(start.0, start.1, i - begin)),
                            format!("malformed real literal `{text}`"),
                        ));
                        Tok::Real(0.0)
                    }
                }
            } else {
                match text.parse::<i64>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => {
                        errs.push(Diagnostic::error(
                            "LEX_ERROR",
                            Some(SourceSpan::new(start.0, start.1, i - begin)),
                            format!("integer literal `{text}` out of range"),
                        ));
                        Tok::Int(0)
                    }
                }
            }
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() {
                match chars[i] {
                    '"' => {
                        closed = true;
                        i += 1;
                        break;
                    }
                    '\n' => break,
                    '\\' if i + 1 < chars.len() => {
                        let esc = chars[i + 1];
                        match esc {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            '"' => s.push('"'),
                            '\\' => s.push('\\'),
                            other => {
                                errs.push(Diagnostic::error(
                                    "LEX_ERROR",
                                    Some(SourceSpan::new(line, col + (i - begin), 2)),
                                    format!("unknown escape `\\{other}`"),
                                ));
                            }
                        }
                        i += 2;
                    }
                    ch => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            if !closed {
                errs.push(Diagnostic::error(
                    "UNTERMINATED_STRING",
                    Some(SourceSpan::new(start.0, start.1, i - begin)),
                    "string literal is not terminated",
                ));
            }
            Tok::Str(s)
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(sym) => {
                    i += sym.chars().count();
                    Tok::Sym(sym)
                }
                None => {
                    errs.push(Diagnostic::error(
                        "LEX_ERROR",
                        Some(SourceSpan::new(line, col, 1)),
                        format!("unexpected character `{c}`"),
                    ));
                    i += 1;
                    col += 1;
                    spaced = false;
                    continue;
                }
            }
        };
        let len = i - begin;
        toks.push(Token { tok, span: SourceSpan::new(start.0, start.1, len), spaced });
        col += len;
        spaced = false;
    }
    toks.push(Token { tok: Tok::Eof, span: SourceSpan::new(line, col, 0), spaced: true });

    check_balance(&toks, &mut errs);
    if errs.is_empty() {
        Ok(toks)
    } else {
        Err(errs)
    }
}

fn check_balance(toks: &[Token], errs: &mut Vec<Diagnostic>) {
    let mut stack: Vec<(&'static str, &SourceSpan)> = Vec::new();
    for t in toks {
        if let Tok::Sym(s) = t.tok {
            match s {
                "(" | "[" | "{" => stack.push((s, &t.span)),
                ")" | "]" | "}" => {
                    let want = match s {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    match stack.pop() {
                        Some((open, _)) if open == want => {}
                        Some((open, span)) => {
                            errs.push(Diagnostic::error(
                                "UNBALANCED",
                                Some(t.span.clone()),
                                format!("`{s}` does not close `{open}` opened at {span}"),
                            ));
                            return;
                        }
                        None => {
                            errs.push(Diagnostic::error(
                                "UNBALANCED",
                                Some(t.span.clone()),
                                format!("unmatched `{s}`"),
                            ));
                            return;
                        }
                    }
                }
                _ => {}
            }
        }
    }
    if let Some((open, span)) = stack.pop() {
        errs.push(Diagnostic::error("UNBALANCED", Some(span.clone()), format!("unclosed `{open}`")));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn range_is_not_a_real() {
        assert_eq!(
            kinds("1..4"),
            vec![Tok::Int(1), Tok::Sym(".."), Tok::Int(4), Tok::Eof]
        );
        assert_eq!(kinds("2.5e1"), vec![Tok::Real(25.0), Tok::Eof]);
    }

    #[test]
    fn spacing_before_dot_is_recorded() {
        let toks = tokenize("n . t.amount").unwrap();
        assert!(toks[1].spaced);
        assert!(!toks[3].spaced);
    }

    #[test]
    fn crlf_and_comments_are_whitespace() {
        assert_eq!(kinds("a // c\r\nb"), vec![Tok::Ident("a".into()), Tok::Ident("b".into()), Tok::Eof]);
    }

    #[test]
    fn unbalanced_delimiters_are_reported() {
        let errs = tokenize("class A { case B(").unwrap_err();
        assert!(errs.iter().any(|d| d.code == "UNBALANCED"));
        let errs = tokenize("(]").unwrap_err();
        assert_eq!(errs[0].code, "UNBALANCED");
    }

    #[test]
    fn unterminated_string() {
        let errs = tokenize("\"abc").unwrap_err();
        assert_eq!(errs[0].code, "UNTERMINATED_STRING");
    }
}
