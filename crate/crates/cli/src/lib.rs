//! Configuration and persistence layer for the `disloc` command-line tool.
//! Kept as a library so integration tests can drive the archive format and
//! config schema directly.

pub mod archive;
pub mod config;

use sha2::{Digest, Sha256};

/// Version string stamped into archives and CSV comment headers.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the raw configuration text, recorded in every output so
/// artifacts can be traced back to their exact inputs.
pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
