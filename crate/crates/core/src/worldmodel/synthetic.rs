use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Capabilities, WorldModelBackend, WorldModelError};
use crate::cohort::CohortSpec;
use crate::reward::{Namespace, SynonymTable};
use crate::seed::derive_seed;
use crate::types::{normalize_term, ExamEvent, ExamResult, PatientProfile};

/// AR(1) coefficient for repeat numeric queries.
pub const DEFAULT_AR_COEFFICIENT: f64 = 0.5;

/// Closed-vocabulary backend that samples from the cohort's generating
/// distributions. First queries draw from the disease Gaussians; repeat
/// queries of a panel are pulled toward the disease mean from the most
/// recent value.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    spec: Arc<CohortSpec>,
    synonyms: Option<Arc<SynonymTable>>,
    ar: f64,
}

impl SyntheticBackend {
    pub fn new(spec: Arc<CohortSpec>) -> Self {
        Self {
            spec,
            synonyms: None,
            ar: DEFAULT_AR_COEFFICIENT,
        }
    }

    /// Resolves query aliases before lookup.
    pub fn with_synonyms(mut self, table: Arc<SynonymTable>) -> Self {
        self.synonyms = Some(table);
        self
    }

    pub fn with_ar_coefficient(mut self, ar: f64) -> Self {
        self.ar = ar;
        self
    }

    pub fn spec(&self) -> &CohortSpec {
        &self.spec
    }

    fn canonical(&self, query: &str) -> String {
        match &self.synonyms {
            Some(t) => t.canonicalize(query, Namespace::Exam),
            None => normalize_term(query),
        }
    }
}

impl WorldModelBackend for SyntheticBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            deterministic_given_seed: true,
            supported_exams: Some(self.spec.exam_names().into_iter().collect()),
        }
    }

    fn generate(
        &self,
        profile: &PatientProfile,
        history: &[ExamEvent],
        query: &str,
        seed: u64,
    ) -> Result<ExamResult, WorldModelError> {
        let exam = self.canonical(query);
        if exam.is_empty() {
            return Err(WorldModelError::EmptyQuery);
        }
        let disease = self
            .spec
            .disease_for(profile)
            .ok_or_else(|| WorldModelError::UnknownDisease(profile.case_id.clone()))?;
        let previous = history
            .iter()
            .rev()
            .find(|e| self.canonical(&e.exam_name) == exam)
            .map(|e| &e.result);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &exam, 0));
        disease
            .sample_exam(&exam, &mut rng, previous, self.ar, &self.spec.normal_finding)
            .ok_or(WorldModelError::UnknownExam(exam))
    }
}
