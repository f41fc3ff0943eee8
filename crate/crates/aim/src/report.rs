// SPDX-License-Identifier: Apache-2.0

//! The run report every CLI command prints on standard output.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub counters: BTreeMap<String, u64>,
    /// SHA-256 of each output, keyed by output name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub checksums: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Wrapper<'a> {
    report: &'a RunReport,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Self::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    pub fn counter(&mut self, key: &str, value: u64) -> &mut Self {
        self.counters.insert(key.into(), value);
        self
    }

    pub fn note(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.notes.insert(key.into(), value.to_string());
        self
    }

    pub fn checksum(&mut self, name: &str, bytes: &[u8]) -> &mut Self {
        self.checksums.insert(name.into(), sha256_hex(bytes));
        self
    }

    /// TOML document with a single `[report]` table.
    pub fn to_toml(&self) -> String {
        toml::to_string(&Wrapper { report: self }).expect("report fields are TOML-representable")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_as_toml() {
        let mut r = RunReport::new("mul");
        r.param("bits", 16).counter("multiplications", 1).checksum("out", b"abc");
        let text = r.to_toml();
        let back: toml::Table = text.parse().unwrap();
        let rep = back["report"].as_table().unwrap();
        assert_eq!(rep["command"].as_str(), Some("mul"));
        assert_eq!(
            rep["checksums"]["out"].as_str(),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
    }
}
