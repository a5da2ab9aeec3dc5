//! Content hashing for cache keys and artifact identifiers.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON encoding. Struct fields serialize in declaration
/// order and maps are `BTreeMap`s, so equal values always hash equally.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize infallibly");
    sha256_hex(&bytes)
}

/// Short identifier derived from a full hash.
pub fn short_id(hash: &str) -> String {
    hash.chars().take(16).collect()
}
