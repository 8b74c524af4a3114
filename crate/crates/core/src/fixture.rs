//! Naming scheme shared by every replay fixture directory.

use sha2::{Digest, Sha256};

/// Short stable file key for an arbitrary string (URL, query, entity).
pub fn fixture_key(s: &str) -> String {
    let digest = Sha256::digest(s.as_bytes());
    hex::encode(&digest[..8])
}

/// Lowercases and collapses whitespace so trivially different spellings of a
/// query replay the same fixture.
pub fn normalize_query(q: &str) -> String {
    q.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
