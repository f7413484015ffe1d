//! Solved classes and the JSON solution bank.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisJson, MeasurementBasis};
use crate::equivalence::{fingerprint, EquivalenceFingerprint};
use crate::error::{Error, Result};
use crate::linalg::PERM_TOL;
use crate::localizability::{check_raw, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Solver,
    Heuristic { seed: u64 },
    Catalog,
}

/// A measurement class found at a given level, with its fingerprint.
#[derive(Debug, Clone)]
pub struct SolvedClass {
    pub measurement: MeasurementBasis,
    pub level: usize,
    pub scenario: Scenario,
    pub fingerprint: EquivalenceFingerprint,
    pub provenance: Provenance,
}

impl SolvedClass {
    pub fn new(measurement: MeasurementBasis, level: usize, scenario: Scenario, provenance: Provenance) -> Result<Self> {
        let fingerprint = fingerprint(&measurement)?;
        Ok(SolvedClass { measurement, level, scenario, fingerprint, provenance })
    }

    /// Re-runs the raw check; stored verdicts are never trusted.
    pub fn verify(&self) -> bool {
        check_raw(&self.measurement, self.scenario, self.level, PERM_TOL).is_some()
            && fingerprint(&self.measurement).ok().as_ref() == Some(&self.fingerprint)
    }

    pub fn tangles(&self) -> Vec<f64> {
        self.fingerprint.tangles_f64()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolvedClassJson {
    pub measurement: BasisJson,
    pub level: usize,
    pub scenario: String,
    pub fingerprint: EquivalenceFingerprint,
    pub provenance: Provenance,
    pub created_unix: u64,
}

#[derive(Debug, Clone)]
pub struct SolutionBank {
    pub schema_version: u32,
    pub entries: Vec<SolvedClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionBankJson {
    schema_version: u32,
    entries: Vec<SolvedClassJson>,
}

fn key(c: &SolvedClass) -> (String, usize, EquivalenceFingerprint) {
    (c.scenario.name(), c.level, c.fingerprint.clone())
}

impl Default for SolutionBank {
    fn default() -> Self {
        SolutionBank { schema_version: SCHEMA_VERSION, entries: Vec::new() }
    }
}

impl SolutionBank {
    /// Deduplicates by (scenario, level, fingerprint), keeping the first entry, and
    /// sorts deterministically.
    pub fn from_entries(entries: Vec<SolvedClass>) -> Self {
        let mut out: Vec<SolvedClass> = Vec::new();
        for e in entries {
            if !out.iter().any(|o| key(o) == key(&e)) {
                out.push(e);
            }
        }
        out.sort_by_key(key);
        SolutionBank { schema_version: SCHEMA_VERSION, entries: out }
    }

    pub fn merge(a: &SolutionBank, b: &SolutionBank) -> Result<SolutionBank> {
        if a.schema_version != b.schema_version {
            return Err(Error::InvalidArgument(format!(
                "schema versions differ: {} vs {}",
                a.schema_version, b.schema_version
            )));
        }
        Ok(Self::from_entries(a.entries.iter().chain(&b.entries).cloned().collect()))
    }

    /// Indices of entries that fail re-verification.
    pub fn failures(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| !e.verify()).map(|(i, _)| i).collect()
    }

    pub fn to_json_string(&self) -> Result<String> {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let json = SolutionBankJson {
            schema_version: self.schema_version,
            entries: self
                .entries
                .iter()
                .map(|e| SolvedClassJson {
                    measurement: BasisJson::from_basis(&e.measurement),
                    level: e.level,
                    scenario: e.scenario.name(),
                    fingerprint: e.fingerprint.clone(),
                    provenance: e.provenance.clone(),
                    created_unix: now,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    /// Parses a bank; fingerprints are recomputed rather than read.
    pub fn from_json_str(s: &str) -> Result<SolutionBank> {
        let json: SolutionBankJson = serde_json::from_str(s)?;
        if json.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported schema version {}", json.schema_version)));
        }
        let entries = json
            .entries
            .into_iter()
            .map(|e| {
                let m = e.measurement.to_basis()?;
                SolvedClass::new(m, e.level, Scenario::parse(&e.scenario)?, e.provenance)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SolutionBank { schema_version: json.schema_version, entries })
    }

    pub fn load(path: &Path) -> Result<SolutionBank> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}
