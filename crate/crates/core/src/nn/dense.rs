//! Fully connected layer with a pointwise activation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::{glorot, Activation, NnError, ParamTensors};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub w: Mat, // [out x in]
    pub b: Vec<f64>,
    pub act: Activation,
}

/// Forward-pass intermediates needed by `backward`.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl Dense {
    pub fn new(out_dim: usize, in_dim: usize, act: Activation, rng: &mut impl Rng) -> Self {
        Dense {
            w: glorot(out_dim, in_dim, rng),
            b: vec![0.0; out_dim],
            act,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            w: self.w.zeros_like(),
            b: vec![0.0; self.b.len()],
            act: self.act,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, DenseCache), NnError> {
        if x.len() != self.w.cols {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects input {}, got {}",
                self.w.cols,
                x.len()
            )));
        }
        let mut pre = self.w.matvec(x);
        for (p, b) in pre.iter_mut().zip(self.b.iter()) {
            *p += b;
        }
        let out: Vec<f64> = pre.iter().map(|&p| self.act.apply(p)).collect();
        Ok((
            out.clone(),
            DenseCache {
                x: x.to_vec(),
                pre,
                out,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns dL/dx.
    pub fn backward(&self, cache: &DenseCache, d_out: &[f64], grads: &mut Dense) -> Vec<f64> {
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(cache.pre.iter().zip(cache.out.iter()))
            .map(|(&d, (&p, &o))| d * self.act.derivative(p, o))
            .collect();
        grads.w.add_outer(&d_pre, &cache.x);
        for (gb, dp) in grads.b.iter_mut().zip(d_pre.iter()) {
            *gb += dp;
        }
        self.w.matvec_t(&d_pre)
    }
}

impl ParamTensors for Dense {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        vec![&mut self.w.data, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_linear_is_identity() {
        let mut layer = Dense {
            w: Mat::from_fn(3, 3, |r, c| if r == c { 1.0 } else { 0.0 }),
            b: vec![0.0; 3],
            act: Activation::Linear,
        };
        let x = vec![0.3, -1.2, 2.5];
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y, x);
        let _ = layer.tensors();
    }

    #[test]
    fn forward_rejects_wrong_input_len() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let layer = Dense::new(2, 3, Activation::Tanh, &mut rng);
        assert!(matches!(
            layer.forward(&[1.0, 2.0]),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    use rand::SeedableRng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let layer = Dense::new(3, 4, Activation::Sigmoid, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let loss_of = |l: &Dense| {
            let (y, _) = l.forward(&x).unwrap();
            y.iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };

        let (y, cache) = layer.forward(&x).unwrap();
        let d_out: Vec<f64> = y
            .iter()
            .zip(target.iter())
            .map(|(a, b)| 2.0 * (a - b))
            .collect();
        let mut grads = layer.zeros_like();
        layer.backward(&cache, &d_out, &mut grads);

        let eps = 1e-6;
        for idx in 0..layer.w.data.len() {
            let mut plus = layer.clone();
            plus.w.data[idx] += eps;
            let mut minus = layer.clone();
            minus.w.data[idx] -= eps;
            let num = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
            assert!(
                (grads.w.data[idx] - num).abs() < 1e-6,
                "weight {idx}: analytic {} vs numeric {num}",
                grads.w.data[idx]
            );
        }
    }
}
