use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `w += lr * g`.
    Sgd,
    /// Bias-corrected Adam ascent with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    #[default]
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Optimizer moments. Saved with checkpoints so that a resumed run
/// continues exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub t: u64,
    #[serde(default)]
    pub m: Vec<f64>,
    #[serde(default)]
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, n: usize) -> Self {
        let moments = if kind == OptimizerKind::Adam { n } else { 0 };
        Self {
            kind,
            t: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }

    /// Applies one ascent step along `grad`.
    pub fn step(&mut self, weights: &mut [f64], grad: &[f64], lr: f64) -> Result<(), TrainError> {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => super::apply_gradient(weights, grad, lr),
            OptimizerKind::Adam => {
                if self.m.len() != weights.len() || self.v.len() != weights.len() {
                    return Err(TrainError::Config("optimizer state does not fit parameters".into()));
                }
                let c1 = 1.0 - BETA1.powi(self.t as i32);
                let c2 = 1.0 - BETA2.powi(self.t as i32);
                for (((w, g), m), v) in weights.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *w += lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    if !w.is_finite() {
                        return Err(TrainError::Numerical("weight became non-finite".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_is_sign_times_lr() {
        let mut s = OptimizerState::new(OptimizerKind::Adam, 3);
        let mut w = vec![0.0; 3];
        s.step(&mut w, &[2.0, -0.5, 0.0], 0.1).unwrap();
        assert!((w[0] - 0.1).abs() < 1e-8);
        assert!((w[1] + 0.1).abs() < 1e-7);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn adam_matches_reference_recursion() {
        let grads = [[1.0, -2.0], [0.5, 0.25], [-1.0, 3.0]];
        let mut s = OptimizerState::new(OptimizerKind::Adam, 2);
        let mut w = vec![1.0, -1.0];
        let (mut m, mut v, mut expect) = ([0.0f64; 2], [0.0f64; 2], [1.0f64, -1.0]);
        for (t, g) in grads.iter().enumerate() {
            s.step(&mut w, g, 0.01).unwrap();
            for i in 0..2 {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
                let mh = m[i] / (1.0 - 0.9f64.powi(t as i32 + 1));
                let vh = v[i] / (1.0 - 0.999f64.powi(t as i32 + 1));
                expect[i] += 0.01 * mh / (vh.sqrt() + 1e-8);
            }
        }
        assert_eq!(w, expect.to_vec());
    }

    #[test]
    fn sgd_is_plain() {
        let mut s = OptimizerState::new(OptimizerKind::Sgd, 2);
        let mut w = vec![1.0, 1.0];
        s.step(&mut w, &[1.0, -1.0], 0.5).unwrap();
        assert_eq!(w, vec![1.5, 0.5]);
        assert!(s.m.is_empty());
    }
}
