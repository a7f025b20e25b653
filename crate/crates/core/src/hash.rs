//! Content digests used as cache keys and result identifiers.

use alloc::string::String;
use core::fmt::Write;

use sha2::{Digest, Sha256};

/// Collapses every whitespace run to one space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Lowercase hex SHA-256 of the whitespace-normalized text.
pub fn input_hash(text: &str) -> String {
    hex_digest(normalize_whitespace(text).as_bytes())
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
