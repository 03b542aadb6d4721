use serde::Serialize;
use sha2::{Digest, Sha256};

/// Short stable fingerprint of a serializable config: the first 16 hex
/// digits of the SHA-256 of its JSON form.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes to JSON");
    let hash = Sha256::digest(&json);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = config_digest(&("rs", 1u32, 0.05f64));
        assert_eq!(a.len(), 16);
        assert_eq!(a, config_digest(&("rs", 1u32, 0.05f64)));
        assert_ne!(a, config_digest(&("rs", 2u32, 0.05f64)));
    }
}
