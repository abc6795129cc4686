//! Run manifest embedded in every report: the inputs that determine the
//! numeric output, and nothing else. Wall-clock timings live in a separate
//! file so that reruns with identical manifests stay byte-identical.

use agler_core::Tolerances;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the input function file.
    pub input_digest: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub versions: Versions,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: String,
}

impl RunManifest {
    pub fn new(command: &str, input_digest: &str, seed: u64, tols: &Tolerances) -> Self {
        Self {
            command: command.to_string(),
            input_digest: input_digest.to_string(),
            seed,
            tolerances: *tols,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
