use sha2::{Digest, Sha256};

/// Version string mixed into every run id.
pub const CODE_VERSION: &str = concat!("plasma2d ", env!("CARGO_PKG_VERSION"));

/// First 16 hex digits of the SHA-256 of `text`.
pub fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
