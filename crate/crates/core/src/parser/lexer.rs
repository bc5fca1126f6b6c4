//! Minimal quote-aware shell lexer.
//!
//! Only what command normalization needs: words (with their raw spelling
//! kept for re-rendering) and the control operators that separate pipeline
//! stages. Subshells, heredocs and substitutions are left inside words.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    Word { raw: String, value: String },
    Op(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LexError {
    UnbalancedQuote,
    TrailingEscape,
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut raw = String::new();
    let mut value = String::new();
    let mut in_word = false;
    let mut chars = text.chars().peekable();

    fn flush(tokens: &mut Vec<Token>, raw: &mut String, value: &mut String, in_word: &mut bool) {
        if *in_word {
            tokens.push(Token::Word {
                raw: std::mem::take(raw),
                value: std::mem::take(value),
            });
            *in_word = false;
        }
    }

    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => flush(&mut tokens, &mut raw, &mut value, &mut in_word),
            '\'' | '"' => {
                in_word = true;
                raw.push(c);
                let mut closed = false;
                while let Some(q) = chars.next() {
                    raw.push(q);
                    if q == c {
                        closed = true;
                        break;
                    }
                    if q == '\\' && c == '"' {
                        if let Some(&n) = chars.peek() {
                            raw.push(n);
                            value.push(n);
                            chars.next();
                            continue;
                        }
                    }
                    value.push(q);
                }
                if !closed {
                    return Err(LexError::UnbalancedQuote);
                }
            }
            '\\' => {
                let Some(n) = chars.next() else {
                    return Err(LexError::TrailingEscape);
                };
                in_word = true;
                raw.push(c);
                raw.push(n);
                value.push(n);
            }
            '|' | '&' | ';' => {
                flush(&mut tokens, &mut raw, &mut value, &mut in_word);
                let mut op = String::from(c);
                if c != ';' && chars.peek() == Some(&c) {
                    op.push(c);
                    chars.next();
                }
                tokens.push(Token::Op(op));
            }
            _ => {
                in_word = true;
                raw.push(c);
                value.push(c);
            }
        }
    }
    flush(&mut tokens, &mut raw, &mut value, &mut in_word);
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ts: &[Token]) -> Vec<&str> {
        ts.iter()
            .map(|t| match t {
                Token::Word { value, .. } => value.as_str(),
                Token::Op(o) => o.as_str(),
            })
            .collect()
    }

    #[test]
    fn splits_pipeline() {
        let t = lex("cat /a/b.log | grep  'x y'").unwrap();
        assert_eq!(words(&t), ["cat", "/a/b.log", "|", "grep", "x y"]);
        match &t[4] {
            Token::Word { raw, .. } => assert_eq!(raw, "'x y'"),
            _ => unreachable!(),
        }
    }

    #[test]
    fn double_ops() {
        let t = lex("make && make install || true; ls").unwrap();
        assert_eq!(
            words(&t),
            ["make", "&&", "make", "install", "||", "true", ";", "ls"]
        );
    }

    #[test]
    fn unbalanced() {
        assert_eq!(lex("cat 'unterminated"), Err(LexError::UnbalancedQuote));
        assert_eq!(lex("echo \"a"), Err(LexError::UnbalancedQuote));
        assert_eq!(lex("echo a\\"), Err(LexError::TrailingEscape));
    }

    #[test]
    fn escaped_quote_inside_double() {
        let t = lex(r#"echo "a\"b""#).unwrap();
        assert_eq!(words(&t), ["echo", "a\"b"]);
    }
}
