//! JSON configuration with strict key checking.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

/// Pulls the offending key out of serde's "unknown field `x`" / "missing field `x`" messages.
fn key_of(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                return key.to_string();
            }
        }
    }
    String::new()
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        Error::Config {
            key: key_of(&msg),
            msg,
        }
    })
}

pub fn read_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: PipelineConfig = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}
