use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Named numeric result of a probe with a pass flag.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub values: BTreeMap<String, f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Report {
            name: name.into(),
            values: BTreeMap::new(),
            pass: true,
            notes: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Value of `key`; panics when missing, which is a programming error.
    pub fn value(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn passing(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}
