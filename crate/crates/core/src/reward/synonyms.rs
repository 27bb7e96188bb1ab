use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::normalize_term;

pub const SYNONYM_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Namespace {
    Exam,
    Diagnosis,
}

#[derive(Debug, Error)]
pub enum SynonymError {
    #[error("synonym file parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported synonym schema version {0}")]
    Schema(u32),
    #[error("invalid synonym table: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExams {
    #[serde(default)]
    aliases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    components: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnoses {
    #[serde(default)]
    aliases: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    schema_version: u32,
    #[serde(default)]
    exams: RawExams,
    #[serde(default)]
    diagnoses: RawDiagnoses,
}

#[derive(Debug, Clone, Default)]
struct AliasIndex {
    canonicals: BTreeSet<String>,
    alias_to_canonical: HashMap<String, String>,
    canonical_to_aliases: BTreeMap<String, Vec<String>>,
}

impl AliasIndex {
    fn build(raw: &BTreeMap<String, Vec<String>>, ns: &str, issues: &mut Vec<String>) -> Self {
        let mut idx = AliasIndex::default();
        for canonical in raw.keys() {
            let c = normalize_term(canonical);
            if c.is_empty() {
                issues.push(format!("{ns}: empty canonical term {canonical:?}"));
                continue;
            }
            if !idx.canonicals.insert(c.clone()) {
                issues.push(format!("{ns}: canonical {c:?} listed twice after normalization"));
            }
        }
        for (canonical, aliases) in raw {
            let c = normalize_term(canonical);
            let mut kept = Vec::new();
            for alias in aliases {
                let a = normalize_term(alias);
                if a.is_empty() {
                    issues.push(format!("{ns}: empty alias under {c:?}"));
                    continue;
                }
                if a == c {
                    continue;
                }
                if idx.canonicals.contains(&a) {
                    issues.push(format!(
                        "{ns}: alias {a:?} of {c:?} is itself a canonical term"
                    ));
                    continue;
                }
                match idx.alias_to_canonical.get(&a) {
                    Some(prev) if prev != &c => issues.push(format!(
                        "{ns}: alias {a:?} claimed by both {prev:?} and {c:?}"
                    )),
                    Some(_) => {}
                    None => {
                        idx.alias_to_canonical.insert(a.clone(), c.clone());
                        kept.push(a);
                    }
                }
            }
            idx.canonical_to_aliases.insert(c, kept);
        }
        idx
    }

    fn resolve(&self, normalized: String) -> String {
        match self.alias_to_canonical.get(&normalized) {
            Some(c) => c.clone(),
            None => normalized,
        }
    }
}

/// Alias and component relations for exam and diagnosis names.
///
/// Loaded from a TOML file:
///
/// ```toml
/// schema_version = 1
/// [exams.aliases]
/// "complete blood count" = ["cbc"]
/// [exams.components]
/// "complete blood count" = ["rbc count", "wbc count"]
/// [diagnoses.aliases]
/// "myocardial infarction" = ["heart attack"]
/// ```
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    exams: AliasIndex,
    diagnoses: AliasIndex,
    /// canonical exam -> all transitive parents
    exam_ancestors: HashMap<String, BTreeSet<String>>,
}

impl SynonymTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let (table, issues) = Self::parse_with_issues(text)?;
        if issues.is_empty() {
            Ok(table)
        } else {
            Err(SynonymError::Invalid(issues))
        }
    }

    /// Parses the file and returns every consistency problem found.
    pub fn lint(text: &str) -> Result<Vec<String>, SynonymError> {
        Self::parse_with_issues(text).map(|(_, issues)| issues)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SynonymError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SynonymError::Invalid(vec![format!("{}: {e}", path.display())])
        })?;
        Self::parse(&text)
    }

    fn parse_with_issues(text: &str) -> Result<(Self, Vec<String>), SynonymError> {
        let raw: RawTable = toml::from_str(text)?;
        if raw.schema_version != SYNONYM_SCHEMA_VERSION {
            return Err(SynonymError::Schema(raw.schema_version));
        }
        let mut issues = Vec::new();
        let exams = AliasIndex::build(&raw.exams.aliases, "exams", &mut issues);
        let diagnoses = AliasIndex::build(&raw.diagnoses.aliases, "diagnoses", &mut issues);

        let resolve = |t: &str| exams.resolve(normalize_term(t));
        let mut parents: HashMap<String, BTreeSet<String>> = HashMap::new();
        for (parent, comps) in &raw.exams.components {
            let p = resolve(parent);
            for comp in comps {
                let c = resolve(comp);
                if c == p {
                    issues.push(format!("exams: {p:?} lists itself as a component"));
                    continue;
                }
                parents.entry(c).or_default().insert(p.clone());
            }
        }
        let mut exam_ancestors = HashMap::new();
        for start in parents.keys() {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<String> = parents[start].iter().cloned().collect();
            let mut cyclic = false;
            while let Some(p) = stack.pop() {
                if &p == start {
                    cyclic = true;
                    continue;
                }
                if seen.insert(p.clone()) {
                    if let Some(ps) = parents.get(&p) {
                        stack.extend(ps.iter().cloned());
                    }
                }
            }
            if cyclic {
                issues.push(format!("exams: component relation has a cycle through {start:?}"));
            }
            exam_ancestors.insert(start.clone(), seen);
        }
        issues.sort();
        issues.dedup();
        Ok((
            Self {
                exams,
                diagnoses,
                exam_ancestors,
            },
            issues,
        ))
    }

    pub fn canonicalize(&self, term: &str, ns: Namespace) -> String {
        let normalized = normalize_term(term);
        match ns {
            Namespace::Exam => self.exams.resolve(normalized),
            Namespace::Diagnosis => self.diagnoses.resolve(normalized),
        }
    }

    pub fn aliases(&self, canonical: &str, ns: Namespace) -> &[String] {
        let idx = match ns {
            Namespace::Exam => &self.exams,
            Namespace::Diagnosis => &self.diagnoses,
        };
        idx.canonical_to_aliases
            .get(canonical)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// True when two canonical exam names denote the same test or one is a
    /// component of the other.
    pub fn exams_match(&self, a: &str, b: &str) -> bool {
        a == b
            || self.exam_ancestors.get(a).is_some_and(|s| s.contains(b))
            || self.exam_ancestors.get(b).is_some_and(|s| s.contains(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = r#"
schema_version = 1
[exams.aliases]
"complete blood count" = ["CBC", "full blood count"]
"liver function tests" = ["LFT"]
[exams.components]
"complete blood count" = ["rbc count", "white blood cell count"]
[diagnoses.aliases]
"myocardial infarction" = ["heart attack", "MI"]
"#;

    #[test]
    fn resolves_aliases() {
        let t = SynonymTable::parse(TABLE).unwrap();
        assert_eq!(t.canonicalize("CBC", Namespace::Exam), "complete blood count");
        assert_eq!(
            t.canonicalize("Heart attack", Namespace::Diagnosis),
            "myocardial infarction"
        );
        // namespaces are separate
        assert_eq!(t.canonicalize("cbc", Namespace::Diagnosis), "cbc");
    }

    #[test]
    fn component_matching_is_symmetric() {
        let t = SynonymTable::parse(TABLE).unwrap();
        assert!(t.exams_match("rbc count", "complete blood count"));
        assert!(t.exams_match("complete blood count", "rbc count"));
        assert!(!t.exams_match("rbc count", "white blood cell count"));
    }

    #[test]
    fn lint_reports_conflicts() {
        let bad = r#"
schema_version = 1
[exams.aliases]
"a" = ["x"]
"b" = ["x", "a"]
[exams.components]
"p" = ["q"]
"q" = ["p"]
"#;
        let issues = SynonymTable::lint(bad).unwrap();
        assert!(issues.iter().any(|i| i.contains("claimed by both")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("itself a canonical")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("cycle")), "{issues:?}");
        assert!(SynonymTable::parse(bad).is_err());
    }

    #[test]
    fn unknown_sections_rejected() {
        assert!(SynonymTable::parse("schema_version = 1\n[diagnoses.components]\n").is_err());
        assert!(matches!(
            SynonymTable::parse("schema_version = 9\n"),
            Err(SynonymError::Schema(9))
        ));
    }
}
