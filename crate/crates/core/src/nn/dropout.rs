//! Inverted dropout: surviving units are scaled by 1/(1-p) so that the
//! expected activation is unchanged; inference mode is the identity.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    pub training: bool,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
        Dropout {
            rate,
            training: false,
        }
    }

    /// Returns the output and, in training mode, the keep-mask needed to
    /// backpropagate through the same pattern.
    pub fn apply(&self, x: &[f64], rng: &mut impl Rng) -> (Vec<f64>, Option<Vec<bool>>) {
        if !self.training || self.rate == 0.0 {
            return (x.to_vec(), None);
        }
        let scale = 1.0 / (1.0 - self.rate);
        let mask: Vec<bool> = x.iter().map(|_| rng.gen::<f64>() >= self.rate).collect();
        let out = x
            .iter()
            .zip(mask.iter())
            .map(|(&v, &keep)| if keep { v * scale } else { 0.0 })
            .collect();
        (out, Some(mask))
    }

    pub fn backward(&self, mask: &Option<Vec<bool>>, d_out: &[f64]) -> Vec<f64> {
        match mask {
            None => d_out.to_vec(),
            Some(mask) => {
                let scale = 1.0 / (1.0 - self.rate);
                d_out
                    .iter()
                    .zip(mask.iter())
                    .map(|(&d, &keep)| if keep { d * scale } else { 0.0 })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_mode_is_identity() {
        let d = Dropout::new(0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 3.0];
        let (y, mask) = d.apply(&x, &mut rng);
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn zero_rate_training_is_identity() {
        let mut d = Dropout::new(0.0);
        d.training = true;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![0.5, 0.6];
        let (y, _) = d.apply(&x, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn surviving_entries_scaled_and_mean_preserved() {
        let mut d = Dropout::new(0.5);
        d.training = true;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = vec![1.0];
        let trials = 100_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let (y, mask) = d.apply(&x, &mut rng);
            if mask.as_ref().unwrap()[0] {
                assert!((y[0] - 2.0).abs() < 1e-12); // survivors scaled x2
            } else {
                assert_eq!(y[0], 0.0);
            }
            sum += y[0];
        }
        let mean = sum / trials as f64;
        // Monte Carlo: expected value preserved within 1%
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }
}
