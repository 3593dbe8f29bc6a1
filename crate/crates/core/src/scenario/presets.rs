//! Named parameter sets shipped with the crate.

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};

const SOURCES: [(&str, &str); 5] = [
    ("simulation", include_str!("../../presets/simulation.json")),
    ("microwave-microwave", include_str!("../../presets/microwave-microwave.json")),
    ("microwave-mechanical", include_str!("../../presets/microwave-mechanical.json")),
    ("quadratic-optomechanics", include_str!("../../presets/quadratic-optomechanics.json")),
    ("cavity-ion", include_str!("../../presets/cavity-ion.json")),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub description: String,
    config: Value,
}

impl Preset {
    /// Partial config merged beneath the user's file.
    pub fn config(&self) -> Result<Value> {
        if !self.config.is_object() {
            return Err(Error::Config(format!("preset '{}' is not an object", self.name)));
        }
        Ok(self.config.clone())
    }
}

pub fn all() -> Result<Vec<Preset>> {
    SOURCES
        .iter()
        .map(|(name, src)| {
            let p: Preset =
                serde_json::from_str(src).map_err(|e| Error::Config(format!("preset '{name}': {e}")))?;
            debug_assert_eq!(&p.name, name);
            Ok(p)
        })
        .collect()
}

pub fn find(name: &str) -> Result<Preset> {
    all()?.into_iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = SOURCES.iter().map(|s| s.0).collect();
        Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for p in all().unwrap() {
            let doc = serde_json::json!({"scenario": "blockade-scan", "preset": p.name});
            let cfg = crate::scenario::ScenarioConfig::from_value(doc, &[]).unwrap();
            assert_eq!(cfg.params.delta_b, 1.0);
        }
        assert!(find("nope").is_err());
    }
}
