//! Experiment outputs: CSV tables with a provenance header and a JSON
//! summary of the checked claims.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eqz_core::table::Table;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One checked statement. Soft claims are reported but never fail a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub measured: BTreeMap<String, f64>,
    pub note: String,
}

impl Claim {
    pub fn new(name: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            passed,
            hard: true,
            measured: BTreeMap::new(),
            note: String::new(),
        }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// `value ≤ bound`, recording both.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound).with("value", value).with("bound", bound)
    }
}

/// Hashes identifying the inputs of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub grid_hash: String,
    pub weight_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub command: String,
    pub provenance: Provenance,
    pub tables: Vec<(String, Table)>,
    pub claims: Vec<Claim>,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    version: String,
    config_hash: &'a str,
    grid_hash: &'a str,
    weight_hash: &'a str,
    seed: u64,
    passed: bool,
    claims: &'a [Claim],
    tables: Vec<String>,
}

impl ExperimentReport {
    pub fn new(command: &str, provenance: Provenance) -> Self {
        Self {
            command: command.to_string(),
            provenance,
            tables: Vec::new(),
            claims: Vec::new(),
        }
    }

    pub fn table(&mut self, name: &str, mut table: Table) {
        table
            .meta("command", &self.command)
            .meta("config_hash", &self.provenance.config_hash)
            .meta("grid_hash", &self.provenance.grid_hash)
            .meta("weight_hash", &self.provenance.weight_hash)
            .meta("seed", self.provenance.seed);
        self.tables.push((name.to_string(), table));
    }

    pub fn claim(&mut self, claim: Claim) {
        self.claims.push(claim);
    }

    pub fn get_table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    /// Whether every hard claim holds.
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.passed || !c.hard)
    }

    /// 0 when every hard claim holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    /// `<name>@<version> config:<first 12 hex digits>`.
    pub fn provenance_string(&self) -> String {
        let short = &self.provenance.config_hash[..self.provenance.config_hash.len().min(12)];
        format!("{}@{} config:{short}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
    }

    fn file_name(&self, table: &str) -> String {
        format!("{}_{}.csv", self.command.replace('-', "_"), table)
    }

    /// Write every table and `<command>_summary.json` into `dir`; returns the
    /// written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, t) in &self.tables {
            let path = dir.join(self.file_name(name));
            t.save(&path)?;
            written.push(path);
        }
        let summary = Summary {
            command: &self.command,
            version: self.provenance_string(),
            config_hash: &self.provenance.config_hash,
            grid_hash: &self.provenance.grid_hash,
            weight_hash: &self.provenance.weight_hash,
            seed: self.provenance.seed,
            passed: self.passed(),
            claims: &self.claims,
            tables: self.tables.iter().map(|(n, _)| self.file_name(n)).collect(),
        };
        let path = dir.join(format!("{}_summary.json", self.command.replace('-', "_")));
        std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        written.push(path);
        Ok(written)
    }

    /// One line per claim.
    pub fn claim_lines(&self) -> Vec<String> {
        self.claims
            .iter()
            .map(|c| {
                let status = match (c.passed, c.hard) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "WARN",
                };
                let measured: Vec<String> = c.measured.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
                format!("{status} {} [{}]", c.name, measured.join(", "))
            })
            .collect()
    }
}
