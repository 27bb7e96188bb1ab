use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CohortSpec, Split};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl, IoError};
use crate::types::CaseRecord;

pub const CASES_FILE: &str = "cases.jsonl";
pub const SPLITS_FILE: &str = "splits.json";
pub const SPEC_FILE: &str = "specs.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("case store {0}: {1}")]
    Invalid(PathBuf, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub fractions: (f64, f64),
    pub train: Vec<String>,
    pub eval: Vec<String>,
}

/// A case store directory: `cases.jsonl`, `splits.json` and a copy of the
/// generating `specs.json`.
#[derive(Debug, Clone)]
pub struct CaseStore {
    pub spec: CohortSpec,
    pub cases: Vec<CaseRecord>,
    pub splits: SplitManifest,
}

impl CaseStore {
    pub fn new(spec: CohortSpec, cases: Vec<CaseRecord>, split: &Split, seed: u64, fractions: (f64, f64)) -> Self {
        let ids = |v: &[CaseRecord]| v.iter().map(|c| c.case_id().to_string()).collect();
        Self {
            spec,
            cases,
            splits: SplitManifest {
                schema_version: 1,
                seed,
                fractions,
                train: ids(&split.train),
                eval: ids(&split.eval),
            },
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), StoreError> {
        std::fs::create_dir_all(dir).map_err(|e| IoError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        write_jsonl(&dir.join(CASES_FILE), &self.cases)?;
        write_json(&dir.join(SPLITS_FILE), &self.splits)?;
        write_json(&dir.join(SPEC_FILE), &self.spec)?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let spec: CohortSpec = read_json(&dir.join(SPEC_FILE))?;
        let cases: Vec<CaseRecord> = read_jsonl(&dir.join(CASES_FILE))?;
        let splits: SplitManifest = read_json(&dir.join(SPLITS_FILE))?;
        let invalid = |m: String| StoreError::Invalid(dir.to_path_buf(), m);
        spec.validate().map_err(|e| invalid(e.to_string()))?;
        let mut seen = HashSet::new();
        for c in &cases {
            if !seen.insert(c.case_id()) {
                return Err(invalid(format!("duplicate case_id {}", c.case_id())));
            }
            c.profile.validate().map_err(|e| invalid(e.to_string()))?;
        }
        for id in splits.train.iter().chain(&splits.eval) {
            if !seen.contains(id.as_str()) {
                return Err(invalid(format!("split references unknown case {id}")));
            }
        }
        Ok(Self { spec, cases, splits })
    }

    fn select(&self, ids: &[String]) -> Vec<CaseRecord> {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        self.cases
            .iter()
            .filter(|c| wanted.contains(c.case_id()))
            .cloned()
            .collect()
    }

    pub fn train_cases(&self) -> Vec<CaseRecord> {
        self.select(&self.splits.train)
    }

    pub fn eval_cases(&self) -> Vec<CaseRecord> {
        self.select(&self.splits.eval)
    }

    pub fn split_cases(&self, name: &str) -> Option<Vec<CaseRecord>> {
        match name {
            "train" => Some(self.train_cases()),
            "eval" => Some(self.eval_cases()),
            "all" => Some(self.cases.clone()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{builtin_spec, generate_cohort, split_cases, GenerateOptions};

    #[test]
    fn write_and_open() {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, 40, 2, &GenerateOptions::default()).unwrap();
        let split = split_cases(&cases, (0.75, 0.25), 2).unwrap();
        let store = CaseStore::new(spec, cases, &split, 2, (0.75, 0.25));
        let dir = tempfile::tempdir().unwrap();
        store.write(dir.path()).unwrap();
        let back = CaseStore::open(dir.path()).unwrap();
        assert_eq!(back.cases, store.cases);
        assert_eq!(back.eval_cases(), split.eval);
        assert_eq!(back.train_cases(), split.train);
    }

    #[test]
    fn unknown_split_member_rejected() {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, 4, 2, &GenerateOptions::default()).unwrap();
        let split = split_cases(&cases, (0.5, 0.5), 2).unwrap();
        let mut store = CaseStore::new(spec, cases, &split, 2, (0.5, 0.5));
        store.splits.eval.push("ghost".into());
        let dir = tempfile::tempdir().unwrap();
        store.write(dir.path()).unwrap();
        assert!(matches!(CaseStore::open(dir.path()), Err(StoreError::Invalid(..))));
    }
}
