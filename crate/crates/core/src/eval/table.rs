use super::{EndToEndReport, RubricReport, SingleTurnReport};

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn render(headers: &[&str], row: &[String]) -> String {
    render_rows(headers, &[row.to_vec()])
}

/// Right-aligned pipe table.
pub(crate) fn render_rows(headers: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| rows.iter().map(|r| r[i].len()).fold(h.len(), usize::max))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let head: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut out = line(&head);
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Percentages, one row.
pub fn single_turn_table(r: &SingleTurnReport) -> String {
    render(
        &["Hit Ratio", "Accuracy"],
        &[pct(r.hit_ratio), pct(r.diagnosis_accuracy)],
    )
}

pub fn end_to_end_table(r: &EndToEndReport) -> String {
    render(
        &["Avg. Turns", "Precision", "Recall", "F1", "Accuracy"],
        &[
            format!("{:.2}", r.avg_turns),
            pct(r.precision),
            pct(r.recall),
            pct(r.f1),
            pct(r.accuracy),
        ],
    )
}

pub fn rubric_table(r: &RubricReport) -> String {
    render(
        &["Cases", "Excluded", "Weighted Score"],
        &[r.cases.len().to_string(), r.excluded.len().to_string(), pct(r.score)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_turn_layout() {
        let r = SingleTurnReport {
            n_exam_probes: 4,
            n_diag_probes: 1,
            exam_hits: 3,
            correct_diagnoses: 1,
            hit_ratio: 0.75,
            diagnosis_accuracy: 1.0,
            rows: vec![],
        };
        assert_eq!(
            single_turn_table(&r),
            "| Hit Ratio | Accuracy |\n|-----------|----------|\n|     75.00 |   100.00 |\n"
        );
    }
}
