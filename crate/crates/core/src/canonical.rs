//! Canonical JSON and digests shared by every artifact writer.
//!
//! Artifacts are written with object keys sorted lexicographically and a
//! trailing newline so that identical inputs give byte-identical files.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Serializes `value` as pretty JSON with sorted object keys.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json::Map is a BTreeMap unless `preserve_order` is enabled, so the
    // round trip through Value sorts every object.
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> serde_json::Result<T> {
    serde_json::from_str(text)
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(Serialize)]
    struct Unordered {
        zeta: u8,
        alpha: u8,
        nested: HashMap<String, u8>,
    }

    #[test]
    fn keys_are_sorted_at_every_level() {
        let mut nested = HashMap::new();
        nested.insert("b".to_string(), 2);
        nested.insert("a".to_string(), 1);
        let text = to_canonical_json(&Unordered { zeta: 1, alpha: 2, nested }).unwrap();
        let alpha = text.find("\"alpha\"").unwrap();
        let zeta = text.find("\"zeta\"").unwrap();
        assert!(alpha < zeta);
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
