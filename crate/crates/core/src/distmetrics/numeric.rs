use serde::{Deserialize, Serialize};

use super::MetricError;

/// Values of one numeric subevent collected across cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSample {
    pub exam: String,
    pub subevent: String,
    pub values: Vec<f64>,
    pub unit: String,
}

impl NumericSample {
    pub fn new(
        exam: impl Into<String>,
        subevent: impl Into<String>,
        values: Vec<f64>,
        unit: impl Into<String>,
    ) -> Self {
        Self {
            exam: exam.into(),
            subevent: subevent.into(),
            values,
            unit: unit.into(),
        }
    }

    fn label(&self) -> String {
        format!("{}/{}", self.exam, self.subevent)
    }
}

pub const DEGENERATE_STD: f64 = 1e-12;
pub const DEFAULT_EPS_MEAN: f64 = 1e-9;

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact 1-Wasserstein distance between two empirical distributions.
///
/// Integrates the gap between the two step quantile functions over the union
/// of their breakpoints `i/n` and `j/m`; for equal sizes this reduces to the
/// mean absolute difference of sorted order statistics.
pub fn w1_empirical(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut level = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (next - level) * (a[i] - b[j]).abs();
        level = next;
        // Integer comparison avoids float ties at shared breakpoints.
        let (ka, kb) = ((i + 1) * m, (j + 1) * n);
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    total
}

fn check_pair(gen: &NumericSample, reference: &NumericSample) -> Result<(), MetricError> {
    if gen.values.is_empty() || reference.values.is_empty() {
        return Err(MetricError::Empty(reference.label()));
    }
    if gen.unit != reference.unit {
        return Err(MetricError::UnitMismatch {
            subevent: reference.label(),
            gen: gen.unit.clone(),
            reference: reference.unit.clone(),
        });
    }
    if gen.values.iter().chain(&reference.values).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite(reference.label()));
    }
    Ok(())
}

/// W1 after standardizing both samples by the reference mean and standard
/// deviation, so the distance reads in reference σ units.
pub fn wasserstein1(gen: &NumericSample, reference: &NumericSample) -> Result<f64, MetricError> {
    check_pair(gen, reference)?;
    let (mu, sd) = mean_std(&reference.values);
    if sd < DEGENERATE_STD {
        return Err(MetricError::DegenerateDistribution(reference.label()));
    }
    let z = |v: &[f64]| v.iter().map(|x| (x - mu) / sd).collect::<Vec<_>>();
    Ok(w1_empirical(&z(&gen.values), &z(&reference.values)))
}

/// Var(X) / μ² with population variance.
pub fn normalized_variance(sample: &NumericSample) -> Result<f64, MetricError> {
    normalized_variance_eps(sample, DEFAULT_EPS_MEAN)
}

pub fn normalized_variance_eps(sample: &NumericSample, eps_mean: f64) -> Result<f64, MetricError> {
    if sample.values.len() < 2 {
        return Err(MetricError::TooFewValues(sample.label()));
    }
    if sample.values.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite(sample.label()));
    }
    let (mu, sd) = mean_std(&sample.values);
    if mu.abs() < eps_mean {
        return Err(MetricError::SkippedSubevent(sample.label()));
    }
    Ok(sd * sd / (mu * mu))
}

/// Exam-level value: the mean over subevents that produced a value. Subevents
/// rejected with [`MetricError::SkippedSubevent`] are left out and listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamAverage {
    pub value: Option<f64>,
    pub skipped: Vec<String>,
}

fn average(results: Vec<(String, Result<f64, MetricError>)>) -> Result<ExamAverage, MetricError> {
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for (label, r) in results {
        match r {
            Ok(v) => values.push(v),
            Err(MetricError::SkippedSubevent(_) | MetricError::DegenerateDistribution(_)) => {
                log::warn!("skipping subevent {label}");
                skipped.push(label);
            }
            Err(e) => return Err(e),
        }
    }
    let value = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    Ok(ExamAverage { value, skipped })
}

/// Mean W1 over the subevents of one exam, pairing samples by subevent name.
pub fn exam_wasserstein1(
    gen: &[NumericSample],
    reference: &[NumericSample],
) -> Result<ExamAverage, MetricError> {
    let results = reference
        .iter()
        .map(|r| {
            let g = gen
                .iter()
                .find(|g| g.subevent == r.subevent)
                .ok_or_else(|| MetricError::Empty(r.label()));
            (r.label(), g.and_then(|g| wasserstein1(g, r)))
        })
        .collect();
    average(results)
}

pub fn exam_normalized_variance(samples: &[NumericSample]) -> Result<ExamAverage, MetricError> {
    average(
        samples
            .iter()
            .map(|s| (s.label(), normalized_variance(s)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn s(values: &[f64]) -> NumericSample {
        NumericSample::new("cbc", "wbc", values.to_vec(), "K/uL")
    }

    /// Minimum over all permutation couplings of the mean absolute cost.
    fn coupling_oracle(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &mut Vec<f64>, k: usize, acc: f64, best: &mut f64) {
            if k == a.len() {
                *best = best.min(acc);
                return;
            }
            for i in k..b.len() {
                b.swap(k, i);
                go(a, b, k + 1, acc + (a[k] - b[k]).abs(), best);
                b.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        go(a, &mut b.to_vec(), 0, 0.0, &mut best);
        best / a.len() as f64
    }

    #[test]
    fn identical_is_zero() {
        let x = s(&[1.0, 4.0, 2.5, 9.0]);
        assert_eq!(wasserstein1(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn unit_shift_example() {
        assert_eq!(w1_empirical(&[0.0, 1.0], &[1.0, 2.0]), 1.0);
        assert_eq!(coupling_oracle(&[0.0, 1.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn unequal_sizes_by_hand() {
        // F^-1 of [0, 1] is 0 on (0, .5], 1 on (.5, 1]; [0, 0, 3] is 0 up to 2/3, then 3.
        let d = w1_empirical(&[0.0, 1.0], &[0.0, 0.0, 3.0]);
        assert!((d - 5.0 / 6.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn shifted_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..5000).map(|_| n.sample(&mut rng) + 0.5).collect();
        let b: Vec<f64> = (0..5000).map(|_| n.sample(&mut rng)).collect();
        let d = wasserstein1(&s(&a), &s(&b)).unwrap();
        assert!((d - 0.5).abs() < 0.05, "{d}");
    }

    #[test]
    fn degenerate_reference() {
        assert!(matches!(
            wasserstein1(&s(&[1.0]), &s(&[2.0, 2.0])),
            Err(MetricError::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn unit_mismatch() {
        let mut g = s(&[1.0, 2.0]);
        g.unit = "g/dL".into();
        assert!(matches!(
            wasserstein1(&g, &s(&[1.0, 2.0])),
            Err(MetricError::UnitMismatch { .. })
        ));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(normalized_variance(&s(&[5.0, 5.0, 5.0])).unwrap(), 0.0);
        assert_eq!(normalized_variance(&s(&[1.0, 3.0])).unwrap(), 0.25);
        assert!(matches!(
            normalized_variance(&s(&[-1.0, 1.0])),
            Err(MetricError::SkippedSubevent(_))
        ));
    }

    #[test]
    fn exam_average_skips() {
        let mut zero = s(&[-1.0, 1.0]);
        zero.subevent = "x".into();
        let avg = exam_normalized_variance(&[s(&[1.0, 3.0]), zero]).unwrap();
        assert_eq!(avg.value, Some(0.25));
        assert_eq!(avg.skipped, vec!["cbc/x".to_string()]);
    }

    proptest! {
        #[test]
        fn matches_coupling_oracle(
            pair in (1usize..=7).prop_flat_map(|n| (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            ))
        ) {
            let (a, b) = pair;
            prop_assert!((w1_empirical(&a, &b) - coupling_oracle(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn triangle(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            c in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let ab = w1_empirical(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= w1_empirical(&a, &c) + w1_empirical(&c, &b) + 1e-12);
        }

        #[test]
        fn variance_scale_invariant(
            v in prop::collection::vec(0.5f64..50.0, 2..20),
            c in 0.01f64..100.0,
        ) {
            let a = normalized_variance(&s(&v)).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = normalized_variance(&s(&scaled)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
        }
    }
}
