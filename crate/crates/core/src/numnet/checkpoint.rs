//! Versioned JSON container for trained models.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NumError, Result};

pub const FORMAT: &str = "botprof-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub kind: String,
    pub seed: u64,
    pub hyper: Value,
    pub body: Value,
}

impl Checkpoint {
    pub fn new<H: Serialize, B: Serialize>(kind: &str, seed: u64, hyper: &H, body: &B) -> Result<Self> {
        Ok(Checkpoint {
            format: FORMAT.to_string(),
            kind: kind.to_string(),
            seed,
            hyper: serde_json::to_value(hyper).map_err(err)?,
            body: serde_json::to_value(body).map_err(err)?,
        })
    }

    pub fn body<B: DeserializeOwned>(&self, kind: &str) -> Result<B> {
        if self.kind != kind {
            return Err(NumError::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        serde_json::from_value(self.body.clone()).map_err(err)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(err)?;
        std::fs::write(path, text).map_err(|e| NumError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NumError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(err)?;
        if ck.format != FORMAT {
            return Err(NumError::Checkpoint(format!("unsupported format {:?}", ck.format)));
        }
        Ok(ck)
    }
}

fn err(e: serde_json::Error) -> NumError {
    NumError::Checkpoint(e.to_string())
}
