//! SGD and Adam parameter updates over flattened tensor lists.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    step: u64,
    // Adam moments, lazily shaped to the parameter tensors on first step.
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self, NnError> {
        if !(lr > 0.0) {
            return Err(NnError::InvalidParameter(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        Ok(Optimizer {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    /// Applies one update in place. `params` and `grads` must be the same
    /// tensors in the same order on every call.
    pub fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[&Vec<f64>]) {
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= self.lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                }
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                for (k, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for idx in 0..p.len() {
                        let gv = g[idx];
                        m[idx] = ADAM_BETA1 * m[idx] + (1.0 - ADAM_BETA1) * gv;
                        v[idx] = ADAM_BETA2 * v[idx] + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = m[idx] / bc1;
                        let v_hat = v[idx] / bc2;
                        p[idx] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_textbook_update() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1).unwrap();
        let mut p = vec![1.0];
        let g = vec![0.5];
        opt.step(&mut [&mut p], &[&g]);
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_lr_rejected() {
        assert!(Optimizer::new(OptimizerKind::Adam, 0.0).is_err());
        assert!(Optimizer::new(OptimizerKind::Sgd, -0.1).is_err());
    }

    #[test]
    fn one_step_decreases_convex_quadratic() {
        // f(x) = (x-2)^2, gradient 2(x-2); small lr strictly decreases f
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut opt = Optimizer::new(kind, 0.05).unwrap();
            let mut p = vec![5.0];
            let f = |x: f64| (x - 2.0) * (x - 2.0);
            let before = f(p[0]);
            let g = vec![2.0 * (p[0] - 2.0)];
            opt.step(&mut [&mut p], &[&g]);
            assert!(f(p[0]) < before, "{kind:?}");
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1).unwrap();
        let mut p = vec![5.0];
        for _ in 0..500 {
            let g = vec![2.0 * (p[0] - 2.0)];
            opt.step(&mut [&mut p], &[&g]);
        }
        assert!((p[0] - 2.0).abs() < 1e-3);
    }
}
