//! Human-readable token rendering: leading spaces become `␣`, control
//! characters are escaped and invalid UTF-8 shows as `\xNN`.

use crate::model::{TokenId, TokenizerModel};

pub const VISIBLE_SPACE: char = '␣';

pub fn display_bytes(bytes: &[u8]) -> String {
    let mut out = String::new();
    let mut leading = true;
    for chunk in bytes.utf8_chunks() {
        for c in chunk.valid().chars() {
            if leading && c == ' ' {
                out.push(VISIBLE_SPACE);
                continue;
            }
            leading = false;
            match c {
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => out.push_str("\\r"),
                c if c.is_control() => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
                c => out.push(c),
            }
        }
        for b in chunk.invalid() {
            leading = false;
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

pub fn display_token(model: &TokenizerModel, id: TokenId) -> String {
    model
        .token_bytes(id)
        .map(display_bytes)
        .unwrap_or_else(|| format!("<{id}>"))
}

/// Renders a token sequence with `|` separators.
pub fn display_sequence(model: &TokenizerModel, ids: &[TokenId]) -> String {
    ids.iter()
        .map(|id| display_token(model, *id))
        .collect::<Vec<_>>()
        .join("|")
}
