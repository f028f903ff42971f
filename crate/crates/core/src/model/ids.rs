use sha2::{Digest, Sha256};

/// Content-derived claim identifier: SHA-256 over utterance, actor and
/// article id (NUL separated), truncated to 16 hex characters.
pub fn claim_id(utterance: &str, actor_name: &str, article_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(utterance.as_bytes());
    hasher.update([0u8]);
    hasher.update(actor_name.as_bytes());
    hasher.update([0u8]);
    hasher.update(article_id.as_bytes());
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Identifier of one (claim, viewpoint) benchmark row.
pub fn instance_id(claim_id: &str, viewpoint_id: u32) -> String {
    format!("{claim_id}:{viewpoint_id}")
}

/// Full hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_id_is_stable_and_short() {
        let a = claim_id("Levels of migration are too high", "Tom Hunt", "a1");
        let b = claim_id("Levels of migration are too high", "Tom Hunt", "a1");
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn claim_id_separates_fields() {
        // "ab" + "c" must not collide with "a" + "bc"
        assert_ne!(claim_id("ab", "c", "x"), claim_id("a", "bc", "x"));
    }
}
