//! Whitespace tokenization with lowercasing and punctuation detachment.
//!
//! Bracketed tokens (`[value_food]`, `[restaurant]`, `<db>`) stay atomic.
//! A colon splits off as its own token except between digits, so times like
//! `12:30` survive as one token. An apostrophe starts a new token, giving the
//! `that 's` convention for contractions.

const DETACH: &[char] = &[',', '.', '?', '!', ';', '"', '(', ')'];

/// Tokenizes raw text into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    for word in lowered.split_whitespace() {
        split_word(word, &mut out);
    }
    out
}

/// Joins tokens back into a display string.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

fn split_word(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut buf = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '[' | '<' => {
                let close = if c == '[' { ']' } else { '>' };
                if let Some(j) = chars[i..].iter().position(|&x| x == close) {
                    flush(&mut buf, out);
                    out.push(chars[i..=i + j].iter().collect());
                    i += j + 1;
                    continue;
                }
                buf.push(c);
            }
            ':' => {
                let prev_digit = buf.chars().last().is_some_and(|p| p.is_ascii_digit());
                let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if prev_digit && next_digit {
                    buf.push(c);
                } else {
                    flush(&mut buf, out);
                    out.push(":".to_string());
                }
            }
            '\'' => {
                flush(&mut buf, out);
                buf.push(c);
            }
            _ if DETACH.contains(&c) => {
                flush(&mut buf, out);
                out.push(c.to_string());
            }
            _ => buf.push(c),
        }
        i += 1;
    }
    flush(&mut buf, out);
}

fn flush(buf: &mut String, out: &mut Vec<String>) {
    if !buf.is_empty() {
        out.push(std::mem::take(buf));
    }
}

/// Convenience for building token lists in tests and fixtures.
pub fn toks(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_detaches_punctuation() {
        assert_eq!(
            tokenize("Hi, I am looking for North Indian food."),
            toks("hi , i am looking for north indian food .")
        );
    }

    #[test]
    fn keeps_placeholders_and_markers_atomic() {
        assert_eq!(
            tokenize("no restaurants serving [value_food] food <db> [db_0]"),
            toks("no restaurants serving [value_food] food <db> [db_0]")
        );
    }

    #[test]
    fn placeholder_with_trailing_punctuation() {
        assert_eq!(
            tokenize("recommend [value_name]."),
            toks("recommend [value_name] .")
        );
    }

    #[test]
    fn colon_splits_except_inside_times() {
        assert_eq!(tokenize("food: chinese at 12:30"), toks("food : chinese at 12:30"));
    }

    #[test]
    fn apostrophe_starts_new_token() {
        assert_eq!(tokenize("that's too bad"), toks("that 's too bad"));
    }

    #[test]
    fn already_spaced_text_is_stable() {
        let text = "that 's too bad . how about chinese ?";
        assert_eq!(tokenize(text), toks(text));
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }
}
