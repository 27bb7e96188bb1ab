//! Versioned prompt templates for remote world-model and judge endpoints.
//!
//! Placeholders use `{name}` syntax and are substituted by [`render`].

pub const PROMPT_VERSION: &str = "v1";

pub const SIMULATOR_GENERAL: &str = include_str!("../assets/prompts/v1/simulator_general.txt");
pub const SIMULATOR_LABEVENT: &str = include_str!("../assets/prompts/v1/simulator_labevent.txt");
pub const SIMULATOR_RADIOLOGY: &str = include_str!("../assets/prompts/v1/simulator_radiology.txt");
pub const JUDGE_DIAGNOSIS: &str = include_str!("../assets/prompts/v1/judge_diagnosis.txt");
pub const JUDGE_EXAM_PRECISION: &str = include_str!("../assets/prompts/v1/judge_exam_precision.txt");
pub const JUDGE_EXAM_RECALL: &str = include_str!("../assets/prompts/v1/judge_exam_recall.txt");
pub const JUDGE_EXAM_IN_LIST: &str = include_str!("../assets/prompts/v1/judge_exam_in_list.txt");
pub const JUDGE_RUBRIC: &str = include_str!("../assets/prompts/v1/judge_rubric.txt");

/// Substitutes `{key}` placeholders. Unknown placeholders are left intact.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_carry_placeholders() {
        assert!(SIMULATOR_GENERAL.contains("{context}"));
        assert!(SIMULATOR_GENERAL.contains("{past_events_text}"));
        assert!(SIMULATOR_GENERAL.contains("{exam_name}"));
        assert!(SIMULATOR_LABEVENT.contains("{subevents_text}"));
        assert!(SIMULATOR_LABEVENT.contains("Hemoglobin: Numeric Value: 12.5 Units: g/dL"));
        assert!(SIMULATOR_RADIOLOGY.contains("{exam_name}"));
        assert!(JUDGE_DIAGNOSIS.contains("{pred_diag}") && JUDGE_DIAGNOSIS.contains("{gt_diag}"));
        assert!(JUDGE_RUBRIC.contains("{criterion}"));
    }

    #[test]
    fn render_substitutes() {
        let s = render("a {x} b {y} {z}", &[("x", "1"), ("y", "2")]);
        assert_eq!(s, "a 1 b 2 {z}");
    }
}
