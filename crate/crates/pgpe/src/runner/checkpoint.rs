//! Checkpointing: the full mid-run state serialized to JSON, so a run can be
//! stopped and resumed with bit-identical continuation.
//!
//! The file captures the config, the search state (distribution + optimizer),
//! observation statistics, and the sampler RNG. Loading verifies a version
//! tag first so incompatible files fail with a clear error instead of a
//! garbled deserialization message.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::Pgpe;
use crate::error::{Error, Result};
use crate::runner::config::ExperimentConfig;
use crate::stats::RunningStats;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub repetition: u64,
    pub run_seed: u64,
    /// Next iteration index to execute.
    pub iteration: u64,
    pub timesteps_total: u64,
    pub algorithm: Pgpe,
    pub stats: RunningStats,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::CorruptCheckpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| {
                Error::CorruptCheckpoint(format!("{}: missing version tag", path.display()))
            })?;
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::CheckpointVersion { found, expected: CHECKPOINT_VERSION });
        }
        serde_json::from_value(value)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))
    }
}
