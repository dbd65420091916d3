//! Small text helpers shared across modules.

use sha2::{Digest, Sha256};

/// Lower-cases `s` and collapses every run of non-alphanumeric characters
/// into a single `_`, trimming separators at both ends.
///
/// `"T-junction"`, `"t junction"` and `" T_Junction "` all map to `t_junction`.
pub fn normalize_term(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_sep = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Stable fingerprint of a description text: SHA-256 over the lower-cased,
/// whitespace-collapsed text, first 16 hex digits.
pub fn fingerprint(text: &str) -> String {
    let normalized = text
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    let digest = Sha256::digest(normalized.as_bytes());
    hex16(&digest)
}

/// SHA-256 of the raw bytes, first 16 hex digits.
pub fn short_hash(bytes: &[u8]) -> String {
    hex16(&Sha256::digest(bytes))
}

fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Formats a number for XML attributes: integers without a fraction,
/// everything else with at most three decimals and no trailing zeros.
pub fn fmt_num(v: f64) -> String {
    let rounded = (v * 1000.0).round() / 1000.0;
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        let i = rounded as i64;
        return i.to_string();
    }
    let s = format!("{rounded:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Escapes the five XML special characters.
pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Seed derivation for independent per-purpose random streams.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_handles_case_and_punctuation() {
        assert_eq!(normalize_term("T-junction"), "t_junction");
        assert_eq!(normalize_term("  Go   Forward "), "go_forward");
        assert_eq!(normalize_term("straight-forward!"), "straight_forward");
        assert_eq!(normalize_term("--"), "");
    }

    #[test]
    fn fingerprint_ignores_case_and_spacing() {
        assert_eq!(
            fingerprint("Unprotected left turn"),
            fingerprint("  unprotected   LEFT turn\n")
        );
        assert_ne!(fingerprint("a"), fingerprint("b"));
        assert_eq!(fingerprint("a").len(), 16);
    }

    #[test]
    fn numbers_format_compactly() {
        assert_eq!(fmt_num(15.0), "15");
        assert_eq!(fmt_num(11.1112), "11.111");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-3.0), "-3");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn escape_covers_specials() {
        assert_eq!(xml_escape(r#"a<b>&"c"'"#), "a&lt;b&gt;&amp;&quot;c&quot;&apos;");
    }
}
