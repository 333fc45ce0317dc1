//! Text normalization used when a program cannot be compiled.
//!
//! Comments are dropped, string and character literals collapse to the
//! single byte [`PLACEHOLDER`], and whitespace runs become one space. The
//! output contains no quote that opens a literal and no comment opener, so
//! normalizing it again is a no-op.

use super::{ArtifactOrigin, BpeaArtifact, SourceLanguage};
use crate::error::{Error, Result};

/// Stand-in byte for every removed string or character literal (`'S'`).
pub const PLACEHOLDER: u8 = b'S';

pub fn normalize_fallback(source: &[u8], language: SourceLanguage) -> Result<BpeaArtifact> {
    let text = String::from_utf8_lossy(source);
    let stripped = match language {
        SourceLanguage::Python => strip_python(&text),
        _ => strip_c_family(&text),
    };
    let collapsed = collapse_whitespace(&stripped);
    if collapsed.is_empty() {
        return Err(Error::EmptyArtifact(
            "nothing left after normalization".into(),
        ));
    }
    BpeaArtifact::new(
        collapsed.into_bytes(),
        ArtifactOrigin::FallbackNormalized,
        language,
        String::new(),
    )
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Skips a quoted literal starting at `i` (which holds `quote`); returns the
/// index just past it. Unterminated literals end at the line break.
fn skip_quoted(chars: &[char], i: usize, quote: char) -> usize {
    let mut j = i + 1;
    while j < chars.len() {
        match chars[j] {
            '\\' => j += 2,
            '\n' => return j,
            c if c == quote => return j + 1,
            _ => j += 1,
        }
    }
    chars.len()
}

fn strip_c_family(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match (c, next) {
            ('/', Some('/')) => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ('/', Some('*')) => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    i += 1;
                }
                i = (i + 2).min(chars.len());
                // a removed block comment still separates tokens
                out.push(' ');
            }
            ('"', _) | ('\'', _) => {
                i = skip_quoted(&chars, i, c);
                out.push(PLACEHOLDER as char);
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

fn strip_python(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '"' | '\'' => {
                let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                if triple {
                    i += 3;
                    loop {
                        if i >= chars.len() {
                            break;
                        }
                        if chars[i] == '\\' {
                            i += 2;
                            continue;
                        }
                        if chars[i] == c
                            && chars.get(i + 1) == Some(&c)
                            && chars.get(i + 2) == Some(&c)
                        {
                            i += 3;
                            break;
                        }
                        i += 1;
                    }
                    i = i.min(chars.len());
                } else {
                    i = skip_quoted(&chars, i, c);
                }
                out.push(PLACEHOLDER as char);
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}
