//! Regression losses and their gradients with respect to the predictions.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Mae,
    Rmse,
}

pub fn loss(kind: LossKind, preds: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(preds.len(), targets.len());
    let n = preds.len().max(1) as f64;
    match kind {
        LossKind::Mse => {
            preds
                .iter()
                .zip(targets)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n
        }
        LossKind::Rmse => loss(LossKind::Mse, preds, targets).sqrt(),
        LossKind::Mae => {
            preds
                .iter()
                .zip(targets)
                .map(|(p, t)| (p - t).abs())
                .sum::<f64>()
                / n
        }
    }
}

/// Gradient of the loss w.r.t. the predictions. Defined for MSE and MAE;
/// the MAE subgradient at a zero residual is taken as 0.
pub fn loss_grad(kind: LossKind, preds: &[f64], targets: &[f64]) -> Result<Vec<f64>, NnError> {
    if preds.len() != targets.len() {
        return Err(NnError::ShapeMismatch(format!(
            "loss expects equal lengths, got {} and {}",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len().max(1) as f64;
    match kind {
        LossKind::Mse => Ok(preds
            .iter()
            .zip(targets)
            .map(|(p, t)| 2.0 * (p - t) / n)
            .collect()),
        LossKind::Mae => Ok(preds
            .iter()
            .zip(targets)
            .map(|(p, t)| {
                let r = p - t;
                if r > 0.0 {
                    1.0 / n
                } else if r < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                }
            })
            .collect()),
        LossKind::Rmse => Err(NnError::InvalidParameter(
            "rmse is a reporting metric; train with mse or mae".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        let preds = [2.0, 4.0];
        let targets = [1.0, 5.0];
        assert!((loss(LossKind::Rmse, &preds, &targets) - 1.0).abs() < 1e-15);
        assert!((loss(LossKind::Mae, &preds, &targets) - 1.0).abs() < 1e-15);
        assert!((loss(LossKind::Mse, &preds, &targets) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let v = [0.3, 0.9, -2.0];
        for kind in [LossKind::Mse, LossKind::Mae, LossKind::Rmse] {
            assert_eq!(loss(kind, &v, &v), 0.0);
        }
    }

    #[test]
    fn mse_gradient_closed_form() {
        let g = loss_grad(LossKind::Mse, &[3.0], &[1.0]).unwrap();
        assert_eq!(g, vec![4.0]);
    }

    #[test]
    fn mae_gradient_and_zero_residual() {
        let g = loss_grad(LossKind::Mae, &[2.0, 1.0, 0.5], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g, vec![1.0 / 3.0, 0.0, -1.0 / 3.0]);
    }
}
