use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::embed::{l2, EmbeddingSet};
use super::MetricError;

/// Sample mean and unbiased covariance of row vectors.
pub fn mean_cov(vectors: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = vectors.len();
    let d = vectors[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
    let mut centered = x;
    for j in 0..d {
        let m = mean[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.transpose() * &centered / denom;
    (mean, cov)
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
/// Returns the root and the clamped eigenvalue mass.
///
/// Only the block of rows and columns with a nonzero entry is decomposed.
/// The rest contributes zero eigenvalues, and the eigensolver has been seen
/// to return non-finite values on matrices with many exactly-zero rows.
fn sqrt_psd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), MetricError> {
    let d = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let support: Vec<usize> = (0..d).filter(|&i| sym.row(i).iter().any(|x| *x != 0.0)).collect();
    let mut root = DMatrix::zeros(d, d);
    if support.is_empty() {
        return Ok((root, 0.0));
    }
    let k = support.len();
    let block = DMatrix::from_fn(k, k, |i, j| sym[(support[i], support[j])]);
    let eig = SymmetricEigen::new(block);
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(MetricError::NonFinite("covariance eigenvalues".into()));
    }
    let clamped: f64 = eig.eigenvalues.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let sub = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    for (i, &a) in support.iter().enumerate() {
        for (j, &b) in support.iter().enumerate() {
            root[(a, b)] = sub[(i, j)];
        }
    }
    Ok((root, clamped))
}

/// Fréchet distance between the Gaussians fitted to two sets of vectors:
/// ‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½).
///
/// The trace of (Σ₁Σ₂)^½ is taken as the trace of the PSD root of
/// Σ₁^½ Σ₂ Σ₁^½, which has the same eigenvalues.
pub fn frechet_from_vectors(gen: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64, MetricError> {
    if gen.is_empty() || reference.is_empty() {
        return Err(MetricError::Empty("embedding set".into()));
    }
    let d = reference[0].len();
    if gen.iter().chain(reference).any(|v| v.len() != d) {
        return Err(MetricError::Dimension("embedding dimensions differ".into()));
    }
    for set in [gen, reference] {
        if set.len() < d + 1 {
            log::warn!("Fréchet distance on {} vectors of dimension {d}", set.len());
        }
    }
    let (m1, s1) = mean_cov(gen);
    let (m2, s2) = mean_cov(reference);
    let (r1, c1) = sqrt_psd(&s1)?;
    let inner = &r1 * &s2 * &r1;
    let (root, c2) = sqrt_psd(&inner)?;
    let trace_scale = s1.trace() + s2.trace();
    if trace_scale > 0.0 && (c1 + c2) > 0.01 * trace_scale {
        log::warn!(
            "covariance square root clamped {:.3e} of trace {:.3e}",
            c1 + c2,
            trace_scale
        );
    }
    let diff = m1 - m2;
    let value = diff.dot(&diff) + trace_scale - 2.0 * root.trace();
    Ok(value.max(0.0))
}

pub fn frechet_distance(gen: &EmbeddingSet, reference: &EmbeddingSet) -> Result<f64, MetricError> {
    if gen.dim() != reference.dim() {
        return Err(MetricError::Dimension(format!(
            "dimension {} vs {}",
            gen.dim(),
            reference.dim()
        )));
    }
    frechet_from_vectors(gen.vectors(), reference.vectors())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (l2(a) * l2(b))
}

/// One minus the mean pairwise cosine similarity.
pub fn intra_diversity_vectors(vectors: &[Vec<f64>]) -> Result<f64, MetricError> {
    let n = vectors.len();
    if n < 2 {
        return Err(MetricError::TooFewValues(format!("{n} embeddings")));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += cosine(&vectors[i], &vectors[j]);
        }
    }
    // Mean pairwise cosine similarity is at most 1; rounding can overshoot.
    Ok((1.0 - 2.0 * sum / (n * (n - 1)) as f64).max(0.0))
}

pub fn intra_diversity(set: &EmbeddingSet) -> Result<f64, MetricError> {
    intra_diversity_vectors(set.vectors())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = l2(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn zero_padding_leaves_distance_unchanged() {
        // Few texts, few hash buckets: most covariance rows are exactly zero.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = |n: usize, shift: f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..5).map(|_| rng.random::<f64>().round() + shift).collect())
                .collect()
        };
        let a = draw(99, 0.0);
        let b = draw(99, 0.3);
        let pad = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.iter().map(|x| x.iter().copied().chain(std::iter::repeat(0.0).take(59)).collect()).collect()
        };
        let small = frechet_from_vectors(&a, &b).unwrap();
        let big = frechet_from_vectors(&pad(&a), &pad(&b)).unwrap();
        assert!(small > 0.1);
        assert!((small - big).abs() < 1e-9, "{small} vs {big}");
    }

    #[test]
    fn identical_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<Vec<f64>> = (0..50)
            .map(|_| unit((0..4).map(|_| rng.sample(StandardNormal)).collect()))
            .collect();
        let set = EmbeddingSet::new(a, "t").unwrap();
        assert!(frechet_distance(&set, &set).unwrap() < 1e-8);
    }

    #[test]
    fn point_masses() {
        let e1 = vec![vec![1.0, 0.0, 0.0]; 5];
        let e2 = vec![vec![0.0, 1.0, 0.0]; 5];
        let a = EmbeddingSet::new(e1, "a").unwrap();
        let b = EmbeddingSet::new(e2, "b").unwrap();
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gaussians() {
        // Commuting covariances: closed form is |Δμ|² + Σ(√a − √b)².
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (va, vb) = ([1.0, 4.0, 0.25], [4.0, 1.0, 1.0]);
        let draw = |rng: &mut ChaCha8Rng, var: &[f64; 3], shift: f64| -> Vec<Vec<f64>> {
            (0..4000)
                .map(|_| {
                    var.iter()
                        .map(|v| shift + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        };
        let a = draw(&mut rng, &va, 0.0);
        let b = draw(&mut rng, &vb, 1.0);
        let expected = 3.0 + va.iter().zip(&vb).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
        let got = frechet_from_vectors(&a, &b).unwrap();
        assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn dimension_mismatch() {
        let a = EmbeddingSet::new(vec![vec![1.0, 0.0]], "a").unwrap();
        let b = EmbeddingSet::new(vec![vec![1.0, 0.0, 0.0]], "b").unwrap();
        assert!(matches!(frechet_distance(&a, &b), Err(MetricError::Dimension(_))));
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(intra_diversity_vectors(&vec![vec![1.0, 0.0]; 4]).unwrap(), 0.0);
        assert_eq!(intra_diversity_vectors(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 1.0);
        // Three unit vectors with pairwise cosine 1/2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [vec![s, s, 0.0], vec![s, 0.0, s], vec![0.0, s, s]];
        assert!((intra_diversity_vectors(&v).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cloud = |n: usize, shift: f64| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| (0..3).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect())
                    .collect()
            };
            let a = cloud(30, 0.0);
            let b = cloud(40, 0.7);
            let ab = frechet_from_vectors(&a, &b).unwrap();
            let ba = frechet_from_vectors(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-8);
        }

        #[test]
        fn diversity_range_and_permutation(
            raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 2..12),
            rot in 0usize..12,
        ) {
            let vs: Vec<Vec<f64>> = raw.into_iter().filter(|v| l2(v) > 1e-3).map(unit).collect();
            prop_assume!(vs.len() >= 2);
            let d = intra_diversity_vectors(&vs).unwrap();
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&d));
            let mut p = vs.clone();
            p.rotate_left(rot % vs.len());
            p.reverse();
            prop_assert!((intra_diversity_vectors(&p).unwrap() - d).abs() < 1e-12);
        }
    }
}
