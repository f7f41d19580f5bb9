//! Published reference values, loaded from the bundled data file.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::Result;

const BUNDLED: &str = include_str!("../data/reference_values.json");

#[derive(Debug, Clone, Deserialize)]
pub struct RefValue {
    pub value: f64,
    /// Allowed deviation; relative when `relative` is set.
    pub tolerance: f64,
    #[serde(default)]
    pub relative: bool,
    pub source: String,
}

impl RefValue {
    pub fn accepts(&self, got: f64) -> bool {
        let allowed = if self.relative {
            self.tolerance * self.value.abs()
        } else {
            self.tolerance
        };
        (got - self.value).abs() <= allowed + 1e-12
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceValues {
    pub version: u32,
    pub values: BTreeMap<String, RefValue>,
}

impl ReferenceValues {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled reference values parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn get(&self, key: &str) -> &RefValue {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("reference value '{key}' missing from data file"))
    }
}
