use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::polyalg::Rational;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Rational literal; `integral` is false for decimals and fractions.
    Num { value: Rational, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Colon,
    Semi,
    Newline,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn digits_value(s: &str) -> BigInt {
    s.parse::<BigInt>().expect("only ascii digits are collected")
}

/// Tokenizes the whole input. `#` starts a comment that runs to end of line.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let single = |tok: Tok| Token { tok, line: tl, column: tc };
        match c {
            '\n' => {
                out.push(single(Tok::Newline));
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '+' => out.push(single(Tok::Plus)),
            '-' => out.push(single(Tok::Minus)),
            '*' => out.push(single(Tok::Star)),
            '^' => out.push(single(Tok::Caret)),
            '(' => out.push(single(Tok::LParen)),
            ')' => out.push(single(Tok::RParen)),
            '[' => out.push(single(Tok::LBracket)),
            ']' => out.push(single(Tok::RBracket)),
            ',' => out.push(single(Tok::Comma)),
            '=' => out.push(single(Tok::Eq)),
            ':' => out.push(single(Tok::Colon)),
            ';' => out.push(single(Tok::Semi)),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part: String = chars[start..i].iter().collect();
                let mut value;
                let mut integral = true;
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    let fstart = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let frac: String = chars[fstart..i].iter().collect();
                    if int_part.is_empty() && frac.is_empty() {
                        return Err(parse_error(tl, tc, "malformed number '.'"));
                    }
                    let whole = if int_part.is_empty() { BigInt::zero() } else { digits_value(&int_part) };
                    let scale = num_traits::pow(BigInt::from(10), frac.len());
                    let frac_val = if frac.is_empty() { BigInt::zero() } else { digits_value(&frac) };
                    value = Rational::new(whole * &scale + frac_val, scale);
                    integral = false;
                } else {
                    value = Rational::from_integer(digits_value(&int_part));
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    return Err(parse_error(line, col + (i - start), "scientific notation is not supported"));
                }
                if i + 1 < chars.len() && chars[i] == '/' && chars[i + 1].is_ascii_digit() {
                    if !integral {
                        return Err(parse_error(tl, tc, "fraction numerator must be an integer"));
                    }
                    i += 1;
                    let dstart = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let den = digits_value(&chars[dstart..i].iter().collect::<String>());
                    if den.is_zero() {
                        return Err(parse_error(tl, tc, "zero denominator"));
                    }
                    value /= Rational::from_integer(den);
                    integral = false;
                }
                if i < chars.len() && chars[i] == '/' {
                    return Err(parse_error(line, col + (i - start), "division is not supported"));
                }
                col += i - start;
                out.push(Token {
                    tok: Tok::Num { value, integral },
                    line: tl,
                    column: tc,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.' | '-')) {
                    // a '-' only continues a name when followed by a name character
                    if chars[i] == '-' && !chars.get(i + 1).is_some_and(|c| c.is_ascii_alphabetic()) {
                        break;
                    }
                    if chars[i] == '-' && is_variable_prefix(&chars[start..i]) {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Token {
                    tok: Tok::Ident(word),
                    line: tl,
                    column: tc,
                });
                continue;
            }
            other => return Err(parse_error(tl, tc, format!("unexpected character '{other}'"))),
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

/// `x` followed only by digits: an expression variable, never part of a name.
fn is_variable_prefix(chars: &[char]) -> bool {
    chars.first() == Some(&'x') && chars.len() > 1 && chars[1..].iter().all(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn exact_decimals_and_fractions() {
        let t = toks("0.25 3/2 7");
        assert_eq!(
            t[0],
            Tok::Num { value: Rational::new(1.into(), 4.into()), integral: false }
        );
        assert_eq!(
            t[1],
            Tok::Num { value: Rational::new(3.into(), 2.into()), integral: false }
        );
        assert_eq!(t[2], Tok::Num { value: Rational::from_integer(7.into()), integral: true });
    }

    #[test]
    fn rejects_scientific_and_division() {
        assert!(matches!(tokenize("1e5"), Err(Error::Parse { column: 2, .. })));
        assert!(tokenize("x1/2").is_err());
        assert!(tokenize("3/0").is_err());
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("x1 # comment\n  x2-x3").unwrap();
        assert_eq!(t[1].tok, Tok::Newline);
        assert_eq!((t[2].line, t[2].column), (2, 3));
        assert_eq!(t[3].tok, Tok::Minus);
        assert_eq!(t[4].tok, Tok::Ident("x3".into()));
    }

    #[test]
    fn hyphenated_names() {
        assert_eq!(toks("brockett-cubic")[0], Tok::Ident("brockett-cubic".into()));
    }
}
