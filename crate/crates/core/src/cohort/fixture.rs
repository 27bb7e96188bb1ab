//! The built-in desk-scale cohort: 6 diseases over 40 examinations with 24
//! numeric subevents. The canonical form is the shipped JSON file; the
//! builder below regenerates it (`UPDATE_FIXTURES=1 cargo test`).

#[cfg(test)]
use std::collections::BTreeMap;

use super::CohortSpec;
#[cfg(test)]
use super::{
    BackgroundTemplates, ConsistencyRules, DiseaseSpec, FindingTemplate, SubeventParams,
    COHORT_SCHEMA_VERSION,
};
use crate::reward::SynonymTable;

pub const BUILTIN_SPEC_JSON: &str = include_str!("../../fixtures/cohort_specs.json");
pub const BUILTIN_SYNONYMS_TOML: &str = include_str!("../../fixtures/synonyms.toml");

pub fn builtin_spec() -> CohortSpec {
    serde_json::from_str(BUILTIN_SPEC_JSON).expect("shipped cohort spec parses")
}

pub fn builtin_synonyms() -> SynonymTable {
    SynonymTable::parse(BUILTIN_SYNONYMS_TOML).expect("shipped synonym table is valid")
}

#[cfg(test)]
// (exam, subevent, mean, sd, unit)
const NORMAL_PANELS: &[(&str, &str, f64, f64, &str)] = &[
    ("vital signs", "Heart Rate", 78.0, 8.0, "bpm"),
    ("vital signs", "Temperature", 36.8, 0.3, "C"),
    ("vital signs", "Systolic Blood Pressure", 124.0, 10.0, "mmHg"),
    ("vital signs", "Respiratory Rate", 15.0, 2.0, "breaths/min"),
    ("vital signs", "Oxygen Saturation", 97.5, 1.0, "%"),
    ("complete blood count", "White Blood Cell Count", 7.5, 1.5, "K/uL"),
    ("complete blood count", "Hemoglobin", 13.8, 1.2, "g/dL"),
    ("complete blood count", "Platelet Count", 250.0, 50.0, "K/uL"),
    ("basic metabolic panel", "Sodium", 139.0, 2.5, "mmol/L"),
    ("basic metabolic panel", "Potassium", 4.2, 0.35, "mmol/L"),
    ("basic metabolic panel", "Creatinine", 0.9, 0.15, "mg/dL"),
    ("basic metabolic panel", "Glucose", 100.0, 12.0, "mg/dL"),
    ("liver function tests", "Alanine Aminotransferase", 25.0, 8.0, "U/L"),
    ("liver function tests", "Aspartate Aminotransferase", 24.0, 7.0, "U/L"),
    ("liver function tests", "Total Bilirubin", 0.7, 0.2, "mg/dL"),
    ("liver function tests", "Alkaline Phosphatase", 75.0, 18.0, "U/L"),
    ("lipase", "Lipase", 35.0, 12.0, "U/L"),
    ("troponin t", "Troponin T", 0.01, 0.004, "ng/mL"),
    ("d dimer", "D-Dimer", 0.35, 0.12, "ug/mL FEU"),
    ("c reactive protein", "C-Reactive Protein", 3.0, 1.5, "mg/L"),
    ("procalcitonin", "Procalcitonin", 0.05, 0.02, "ng/mL"),
    ("lactate", "Lactate", 1.2, 0.3, "mmol/L"),
    ("brain natriuretic peptide", "BNP", 40.0, 15.0, "pg/mL"),
    ("arterial blood gas", "pO2", 92.0, 6.0, "mmHg"),
];

#[cfg(test)]
const TEXT_EXAMS: &[&str] = &[
    "physical examination",
    "ct abdomen",
    "chest x ray",
    "electrocardiogram",
    "abdominal ultrasound",
    "ct pulmonary angiography",
    "echocardiogram",
    "hida scan",
    "sputum culture",
    "blood culture",
    "urinalysis",
    "lower extremity doppler",
    "ct head",
    "mri brain",
    "lumbar puncture",
    "upper endoscopy",
    "colonoscopy",
    "coronary angiography",
    "exercise stress test",
    "pelvic ultrasound",
    "urine culture",
    "stool culture",
    "abdominal x ray",
    "ventilation perfusion scan",
    "pulmonary function test",
    "carotid ultrasound",
    "renal ultrasound",
    "skin biopsy",
];

#[cfg(test)]
struct Disease {
    id: &'static str,
    diagnosis: &'static str,
    discriminative: [&'static str; 3],
    // (exam, subevent, mean, sd)
    shifts: &'static [(&'static str, &'static str, f64, f64)],
    // (exam, sentence, probability)
    findings: &'static [(&'static str, &'static str, f64)],
    complaints: &'static [&'static str],
}

#[cfg(test)]
const DISEASES: &[Disease] = &[
    Disease {
        id: "acute_appendicitis",
        diagnosis: "Acute appendicitis",
        discriminative: ["complete blood count", "c reactive protein", "ct abdomen"],
        shifts: &[
            ("complete blood count", "White Blood Cell Count", 15.0, 2.0),
            ("c reactive protein", "C-Reactive Protein", 60.0, 20.0),
            ("vital signs", "Temperature", 37.9, 0.4),
            ("vital signs", "Heart Rate", 92.0, 9.0),
        ],
        findings: &[
            ("physical examination", "Abdominal tenderness on palpation.", 0.95),
            ("physical examination", "Tenderness at McBurney point.", 0.7),
            ("physical examination", "Rebound tenderness in the right lower quadrant.", 0.5),
            ("ct abdomen", "Dilated appendix with periappendiceal fat stranding.", 0.95),
            ("abdominal ultrasound", "Non-compressible tubular structure in the right lower quadrant.", 0.5),
        ],
        complaints: &["Abdominal pain.", "Right lower abdominal pain.", "Abdominal pain with nausea."],
    },
    Disease {
        id: "acute_pancreatitis",
        diagnosis: "Acute pancreatitis",
        discriminative: ["lipase", "basic metabolic panel", "ct abdomen"],
        shifts: &[
            ("lipase", "Lipase", 900.0, 250.0),
            ("basic metabolic panel", "Glucose", 165.0, 25.0),
            ("basic metabolic panel", "Creatinine", 1.3, 0.25),
            ("liver function tests", "Alanine Aminotransferase", 55.0, 18.0),
            ("c reactive protein", "C-Reactive Protein", 45.0, 20.0),
            ("vital signs", "Heart Rate", 98.0, 10.0),
        ],
        findings: &[
            ("physical examination", "Abdominal tenderness on palpation.", 0.95),
            ("physical examination", "Epigastric tenderness radiating to the back.", 0.7),
            ("ct abdomen", "Peripancreatic fat stranding and pancreatic edema.", 0.95),
            ("abdominal ultrasound", "Pancreas poorly visualized due to bowel gas.", 0.5),
        ],
        complaints: &["Abdominal pain.", "Epigastric pain with vomiting.", "Abdominal pain with nausea."],
    },
    Disease {
        id: "acute_cholecystitis",
        diagnosis: "Acute cholecystitis",
        discriminative: ["liver function tests", "abdominal ultrasound", "complete blood count"],
        shifts: &[
            ("liver function tests", "Alkaline Phosphatase", 190.0, 40.0),
            ("liver function tests", "Total Bilirubin", 2.3, 0.6),
            ("liver function tests", "Alanine Aminotransferase", 75.0, 20.0),
            ("complete blood count", "White Blood Cell Count", 12.5, 2.0),
            ("vital signs", "Temperature", 37.7, 0.4),
        ],
        findings: &[
            ("physical examination", "Abdominal tenderness on palpation.", 0.95),
            ("physical examination", "Positive Murphy sign.", 0.7),
            ("physical examination", "Right upper quadrant tenderness.", 0.6),
            ("abdominal ultrasound", "Gallbladder wall thickening with gallstones.", 0.9),
            ("abdominal ultrasound", "Sonographic Murphy sign.", 0.7),
            ("ct abdomen", "Gallbladder wall thickening with pericholecystic fluid.", 0.6),
            ("hida scan", "Nonvisualization of the gallbladder.", 0.9),
        ],
        complaints: &["Abdominal pain.", "Right upper abdominal pain after meals.", "Abdominal pain with nausea."],
    },
    Disease {
        id: "myocardial_infarction",
        diagnosis: "Myocardial infarction",
        discriminative: ["electrocardiogram", "troponin t", "echocardiogram"],
        shifts: &[
            ("troponin t", "Troponin T", 2.5, 1.0),
            ("brain natriuretic peptide", "BNP", 180.0, 60.0),
            ("vital signs", "Heart Rate", 96.0, 10.0),
            ("vital signs", "Systolic Blood Pressure", 138.0, 15.0),
        ],
        findings: &[
            ("physical examination", "Diaphoretic and anxious appearance.", 0.6),
            ("physical examination", "Chest wall nontender to palpation.", 0.6),
            ("electrocardiogram", "ST segment elevation in the anterior leads.", 0.85),
            ("echocardiogram", "Anterior wall hypokinesis.", 0.85),
            ("chest x ray", "Mild pulmonary vascular congestion.", 0.3),
        ],
        complaints: &["Chest pain.", "Crushing chest pressure.", "Chest pain with shortness of breath."],
    },
    Disease {
        id: "pulmonary_embolism",
        diagnosis: "Pulmonary embolism",
        discriminative: ["d dimer", "ct pulmonary angiography", "arterial blood gas"],
        shifts: &[
            ("d dimer", "D-Dimer", 3.2, 1.0),
            ("arterial blood gas", "pO2", 66.0, 7.0),
            ("vital signs", "Heart Rate", 108.0, 10.0),
            ("vital signs", "Oxygen Saturation", 91.5, 1.8),
            ("vital signs", "Respiratory Rate", 23.0, 3.0),
        ],
        findings: &[
            ("physical examination", "Tachypnea with clear lung fields.", 0.6),
            ("physical examination", "Unilateral calf swelling.", 0.4),
            ("ct pulmonary angiography", "Filling defect in the segmental pulmonary arteries.", 0.95),
            ("electrocardiogram", "Sinus tachycardia.", 0.7),
            ("echocardiogram", "Right ventricular dilation.", 0.6),
            ("lower extremity doppler", "Deep vein thrombosis in the left popliteal vein.", 0.5),
        ],
        complaints: &["Shortness of breath.", "Chest pain with shortness of breath.", "Sudden pleuritic chest pain."],
    },
    Disease {
        id: "community_acquired_pneumonia",
        diagnosis: "Community acquired pneumonia",
        discriminative: ["chest x ray", "complete blood count", "procalcitonin"],
        shifts: &[
            ("procalcitonin", "Procalcitonin", 1.8, 0.8),
            ("complete blood count", "White Blood Cell Count", 14.0, 2.5),
            ("c reactive protein", "C-Reactive Protein", 90.0, 30.0),
            ("vital signs", "Temperature", 38.6, 0.5),
            ("vital signs", "Respiratory Rate", 22.0, 3.0),
            ("vital signs", "Oxygen Saturation", 93.5, 1.5),
        ],
        findings: &[
            ("physical examination", "Crackles over the right lower lobe.", 0.75),
            ("physical examination", "Bronchial breath sounds.", 0.4),
            ("chest x ray", "Right lower lobe consolidation.", 0.9),
            ("ct pulmonary angiography", "Right lower lobe consolidation.", 0.8),
            ("sputum culture", "Growth of Streptococcus pneumoniae.", 0.6),
            ("electrocardiogram", "Sinus tachycardia.", 0.3),
        ],
        complaints: &["Cough and fever.", "Shortness of breath.", "Productive cough."],
    },
];

#[cfg(test)]
fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
/// Rebuilds the built-in cohort from the tables above.
pub(crate) fn build_spec() -> CohortSpec {
    let prior = 1.0 / DISEASES.len() as f64;
    let diseases = DISEASES
        .iter()
        .map(|d| {
            let mut numeric: BTreeMap<String, Vec<SubeventParams>> = BTreeMap::new();
            for &(exam, sub, mean, sd, unit) in NORMAL_PANELS {
                let (mean, stddev) = d
                    .shifts
                    .iter()
                    .find(|s| s.0 == exam && s.1 == sub)
                    .map_or((mean, sd), |s| (s.2, s.3));
                numeric.entry(exam.to_string()).or_default().push(SubeventParams {
                    name: sub.to_string(),
                    mean,
                    stddev,
                    unit: unit.to_string(),
                });
            }
            let text = TEXT_EXAMS
                .iter()
                .map(|&exam| {
                    let templates = d
                        .findings
                        .iter()
                        .filter(|f| f.0 == exam)
                        .map(|f| FindingTemplate {
                            sentence: f.1.to_string(),
                            probability: f.2,
                        })
                        .collect();
                    (exam.to_string(), templates)
                })
                .collect();
            DiseaseSpec {
                disease_id: d.id.to_string(),
                diagnosis: d.diagnosis.to_string(),
                prior,
                numeric_exam_params: numeric,
                text_exam_templates: text,
                discriminative_exams: strings(&d.discriminative),
                background_templates: BackgroundTemplates {
                    chief_complaint: strings(d.complaints),
                    present_illness: strings(&[
                        "Symptoms began one day before presentation.",
                        "Symptoms began two days before presentation and progressively worsened.",
                        "Symptoms began three days before presentation.",
                    ]),
                    past_history: strings(&["Hypertension.", "Type 2 diabetes mellitus.", "Hyperlipidemia.", ""]),
                    family_history: strings(&["", "Father with hypertension.", "Mother with type 2 diabetes."]),
                    other_background: strings(&["Non-smoker.", "Former smoker.", "Drinks alcohol socially."]),
                },
            }
        })
        .collect();
    CohortSpec {
        schema_version: COHORT_SCHEMA_VERSION,
        routine_exams: strings(&["physical examination", "vital signs"]),
        normal_finding: "No significant abnormality.".to_string(),
        consistency: ConsistencyRules {
            exclusive_findings: vec![[
                "Tachypnea with clear lung fields.".to_string(),
                "Right lower lobe consolidation.".to_string(),
            ]],
            ..ConsistencyRules::default()
        },
        diseases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_spec_matches_builder() {
        let mut text = serde_json::to_string_pretty(&build_spec()).unwrap();
        text.push('\n');
        if std::env::var_os("UPDATE_FIXTURES").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cohort_specs.json");
            std::fs::write(path, &text).unwrap();
            return;
        }
        assert_eq!(text, BUILTIN_SPEC_JSON, "run with UPDATE_FIXTURES=1 to regenerate");
    }

    #[test]
    fn shipped_synonyms_are_clean() {
        assert!(SynonymTable::lint(BUILTIN_SYNONYMS_TOML).unwrap().is_empty());
        let t = builtin_synonyms();
        assert_eq!(
            t.canonicalize("CBC", crate::reward::Namespace::Exam),
            "complete blood count"
        );
    }
}
