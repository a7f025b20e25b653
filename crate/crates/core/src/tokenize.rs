//! Unicode-aware word tokenization.
//!
//! A token is a maximal run of alphanumeric characters, lowercased. Everything
//! else (punctuation, whitespace, symbols) separates tokens.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased token text.
    pub text: String,
    /// Byte offset of the first character in the source string.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (offset, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            let (_, buf) = current.get_or_insert_with(|| (offset, String::new()));
            buf.extend(ch.to_lowercase());
        } else if let Some((start, buf)) = current.take() {
            tokens.push(Token {
                text: buf,
                start,
                end: offset,
            });
        }
    }
    if let Some((start, buf)) = current {
        tokens.push(Token {
            text: buf,
            start,
            end: text.len(),
        });
    }
    tokens
}

/// Token texts only.
pub fn token_texts(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}
