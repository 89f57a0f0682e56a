//! Run state on disk: a JSON envelope holding the serialized state and its
//! SHA-256, written atomically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DriverError, SearchState};

const FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: u32,
    sha256: String,
    state: String,
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn checkpoint_to_bytes(state: &SearchState) -> Vec<u8> {
    let payload = serde_json::to_string(state).expect("search state serializes");
    let env = Envelope { format: FORMAT, sha256: digest(&payload), state: payload };
    serde_json::to_vec(&env).expect("envelope serializes")
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<SearchState, DriverError> {
    let corrupt = |m: String| DriverError::CorruptCheckpoint(m);
    let env: Envelope = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
    if env.format != FORMAT {
        return Err(corrupt(format!("unsupported format {}", env.format)));
    }
    if digest(&env.state) != env.sha256 {
        return Err(corrupt("checksum mismatch".into()));
    }
    serde_json::from_str(&env.state).map_err(|e| corrupt(e.to_string()))
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn save_checkpoint(path: &Path, state: &SearchState) -> Result<(), DriverError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, checkpoint_to_bytes(state)).map_err(|e| DriverError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| DriverError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<SearchState, DriverError> {
    let bytes = std::fs::read(path).map_err(|e| DriverError::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
