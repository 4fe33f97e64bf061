//! TOML configuration helpers that report the offending key path.

use serde::de::DeserializeOwned;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses `text` into `T`, mapping schema errors to their dotted key path.
pub fn from_toml_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

pub fn from_toml_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_toml_str(&text)
}

pub(crate) fn check_probability(path: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(
            path,
            format!("expected a probability in [0, 1], got {p}"),
        ))
    }
}

pub(crate) fn check_positive(path: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            path,
            format!("expected a positive finite number, got {x}"),
        ))
    }
}
