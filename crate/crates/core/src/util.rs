//! Canonical serialization, content digests, and seed derivation.
//!
//! Everything that must be byte-stable across runs funnels through here:
//! - canonical JSON (sorted keys, compact separators),
//! - 64-bit FNV-1a digests of canonical bytes,
//! - named seed derivation so all randomness flows from one root seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Serialize to canonical JSON: object keys sorted, compact separators.
///
/// Round-tripping through `serde_json::Value` sorts keys because the
/// default map representation is a BTreeMap.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("canonical json")
}

/// Content digest of a serializable value: FNV-1a 64 of its canonical
/// JSON bytes, rendered as 16 lowercase hex digits.
pub fn digest<T: Serialize>(value: &T) -> String {
    format!("{:016x}", fnv1a64(canonical_json(value).as_bytes()))
}

/// Digest of raw bytes (for file contents).
pub fn digest_bytes(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Derive a child seed from a parent seed and a named path.
///
/// Mixing is FNV-1a over the parent seed's little-endian bytes followed
/// by each path segment separated by a NUL byte.
pub fn derive_seed(parent: u64, path: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in parent.to_le_bytes().iter() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    for seg in path {
        for &b in seg.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        h ^= 0;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic RNG for a derived seed.
pub fn rng_for(parent: u64, path: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vector() {
        // FNV-1a("", 64) is the offset basis; "a" is a published vector.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let raw: serde_json::Value =
            serde_json::from_str(r#"{"tool":"x","arguments":{"b":1,"a":2}}"#).unwrap();
        assert_eq!(canonical_json(&raw), r#"{"arguments":{"a":2,"b":1},"tool":"x"}"#);
    }

    #[test]
    fn derive_seed_distinguishes_paths() {
        let a = derive_seed(7, &["tool", "0"]);
        let b = derive_seed(7, &["tool", "1"]);
        let c = derive_seed(8, &["tool", "0"]);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rng_is_reproducible() {
        use rand::Rng;
        let mut r1 = rng_for(42, &["x"]);
        let mut r2 = rng_for(42, &["x"]);
        let v1: [u64; 4] = core::array::from_fn(|_| r1.gen());
        let v2: [u64; 4] = core::array::from_fn(|_| r2.gen());
        assert_eq!(v1, v2);
    }
}
