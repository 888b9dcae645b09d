//! Versioned JSON envelopes for serialized models.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so parameters survive a save/load cycle bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::NumericError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

const FORMAT: &str = "fragmgan-checkpoint";

pub fn write_checkpoint<T: Serialize>(
    path: &Path,
    kind: &str,
    payload: &T,
) -> Result<(), NumericError> {
    let env = Envelope {
        format: FORMAT.to_owned(),
        version: CHECKPOINT_VERSION,
        kind: kind.to_owned(),
        payload,
    };
    let text = serde_json::to_string(&env).map_err(|e| NumericError::Checkpoint(e.to_string()))?;
    std::fs::write(path, text)
        .map_err(|e| NumericError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, NumericError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NumericError::Checkpoint(format!("{}: {e}", path.display())))?;
    let env: Envelope<T> =
        serde_json::from_str(&text).map_err(|e| NumericError::Checkpoint(e.to_string()))?;
    if env.format != FORMAT {
        return Err(NumericError::Checkpoint(format!(
            "unknown format {:?}",
            env.format
        )));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(NumericError::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            env.version
        )));
    }
    if env.kind != kind {
        return Err(NumericError::Checkpoint(format!(
            "expected a {kind} checkpoint, found {}",
            env.kind
        )));
    }
    Ok(env.payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Activation, Mlp};
    use rand::SeedableRng;

    #[test]
    fn network_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(
            7,
            &[(14, Activation::Relu), (3, Activation::Softmax)],
            &mut rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        write_checkpoint(&path, "mlp", &net).unwrap();
        let back: Mlp = read_checkpoint(&path, "mlp").unwrap();
        assert_eq!(back.checksum(), net.checksum());
        assert_eq!(back, net);
        assert!(read_checkpoint::<Mlp>(&path, "model").is_err());
    }
}
