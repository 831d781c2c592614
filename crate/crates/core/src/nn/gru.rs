//! Gated recurrent unit cell.
//!
//! Convention: the update gate multiplies the carried hidden state,
//!   r = σ(W_r x + U_r h + b_r)
//!   u = σ(W_u x + U_u h + b_u)
//!   h' = tanh(W_h x + U_h (r ⊙ h) + b_h)
//!   h_new = u ⊙ h + (1 − u) ⊙ h'

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{add_assign, hadamard, Mat};
use super::{glorot, sigmoid, NnError, ParamTensors};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GruCell {
    pub w_r: Mat,
    pub u_r: Mat,
    pub b_r: Vec<f64>,
    pub w_u: Mat,
    pub u_u: Mat,
    pub b_u: Vec<f64>,
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
}

/// Per-step intermediates for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub rh: Vec<f64>,
    pub h_cand: Vec<f64>,
}

impl GruCell {
    pub fn new(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        GruCell {
            w_r: glorot(hidden, input, rng),
            u_r: glorot(hidden, hidden, rng),
            b_r: vec![0.0; hidden],
            w_u: glorot(hidden, input, rng),
            u_u: glorot(hidden, hidden, rng),
            b_u: vec![0.0; hidden],
            w_h: glorot(hidden, input, rng),
            u_h: glorot(hidden, hidden, rng),
            b_h: vec![0.0; hidden],
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruCell {
            w_r: Mat::zeros(hidden, input),
            u_r: Mat::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            w_u: Mat::zeros(hidden, input),
            u_u: Mat::zeros(hidden, hidden),
            b_u: vec![0.0; hidden],
            w_h: Mat::zeros(hidden, input),
            u_h: Mat::zeros(hidden, hidden),
            b_h: vec![0.0; hidden],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_dim(), self.input_dim())
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_r.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.cols
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, GruStepCache), NnError> {
        if x.len() != self.input_dim() || h.len() != self.hidden_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "gru expects input {} / hidden {}, got {} / {}",
                self.input_dim(),
                self.hidden_dim(),
                x.len(),
                h.len()
            )));
        }
        let mut a_r = self.w_r.matvec(x);
        add_assign(&mut a_r, &self.u_r.matvec(h));
        add_assign(&mut a_r, &self.b_r);
        let r: Vec<f64> = a_r.iter().map(|&v| sigmoid(v)).collect();

        let mut a_u = self.w_u.matvec(x);
        add_assign(&mut a_u, &self.u_u.matvec(h));
        add_assign(&mut a_u, &self.b_u);
        let u: Vec<f64> = a_u.iter().map(|&v| sigmoid(v)).collect();

        let rh = hadamard(&r, h);
        let mut a_h = self.w_h.matvec(x);
        add_assign(&mut a_h, &self.u_h.matvec(&rh));
        add_assign(&mut a_h, &self.b_h);
        let h_cand: Vec<f64> = a_h.iter().map(|&v| v.tanh()).collect();

        let h_new: Vec<f64> = (0..h.len())
            .map(|i| u[i] * h[i] + (1.0 - u[i]) * h_cand[i])
            .collect();

        Ok((
            h_new,
            GruStepCache {
                x: x.to_vec(),
                h_prev: h.to_vec(),
                r,
                u,
                rh,
                h_cand,
            },
        ))
    }

    /// One BPTT step: accumulates parameter gradients and returns (dx, dh_prev).
    pub fn backward_step(
        &self,
        cache: &GruStepCache,
        dh_new: &[f64],
        grads: &mut GruCell,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim();
        let mut dh_prev = vec![0.0; n];

        // h_new = u*h + (1-u)*h'
        let mut du = vec![0.0; n];
        let mut dh_cand = vec![0.0; n];
        for i in 0..n {
            du[i] = dh_new[i] * (cache.h_prev[i] - cache.h_cand[i]);
            dh_cand[i] = dh_new[i] * (1.0 - cache.u[i]);
            dh_prev[i] += dh_new[i] * cache.u[i];
        }

        // candidate: h' = tanh(W_h x + U_h (r*h) + b_h)
        let da_h: Vec<f64> = dh_cand
            .iter()
            .zip(cache.h_cand.iter())
            .map(|(&d, &c)| d * (1.0 - c * c))
            .collect();
        grads.w_h.add_outer(&da_h, &cache.x);
        grads.u_h.add_outer(&da_h, &cache.rh);
        add_assign(&mut grads.b_h, &da_h);

        let d_rh = self.u_h.matvec_t(&da_h);
        let mut dr = vec![0.0; n];
        for i in 0..n {
            dr[i] = d_rh[i] * cache.h_prev[i];
            dh_prev[i] += d_rh[i] * cache.r[i];
        }

        // gates
        let da_r: Vec<f64> = dr
            .iter()
            .zip(cache.r.iter())
            .map(|(&d, &r)| d * r * (1.0 - r))
            .collect();
        let da_u: Vec<f64> = du
            .iter()
            .zip(cache.u.iter())
            .map(|(&d, &u)| d * u * (1.0 - u))
            .collect();

        grads.w_r.add_outer(&da_r, &cache.x);
        grads.u_r.add_outer(&da_r, &cache.h_prev);
        add_assign(&mut grads.b_r, &da_r);
        grads.w_u.add_outer(&da_u, &cache.x);
        grads.u_u.add_outer(&da_u, &cache.h_prev);
        add_assign(&mut grads.b_u, &da_u);

        add_assign(&mut dh_prev, &self.u_r.matvec_t(&da_r));
        add_assign(&mut dh_prev, &self.u_u.matvec_t(&da_u));

        let mut dx = self.w_r.matvec_t(&da_r);
        add_assign(&mut dx, &self.w_u.matvec_t(&da_u));
        add_assign(&mut dx, &self.w_h.matvec_t(&da_h));

        (dx, dh_prev)
    }
}

impl ParamTensors for GruCell {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.w_r.data,
            &mut self.u_r.data,
            &mut self.b_r,
            &mut self.w_u.data,
            &mut self.u_u.data,
            &mut self.b_u,
            &mut self.w_h.data,
            &mut self.u_h.data,
            &mut self.b_h,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_halve_state() {
        // σ(0)=0.5, tanh(0)=0 → h_new = 0.5*h
        let cell = GruCell::zeros(1, 1);
        let (h_new, cache) = cell.step(&[3.7], &[0.8]).unwrap();
        assert!((h_new[0] - 0.4).abs() < 1e-15);
        assert_eq!(cache.r, vec![0.5]);
        assert_eq!(cache.u, vec![0.5]);
    }

    #[test]
    fn saturated_update_gate_carries_state() {
        let mut cell = GruCell::zeros(1, 1);
        cell.b_u = vec![50.0];
        let (h_new, _) = cell.step(&[0.0], &[0.3]).unwrap();
        assert!((h_new[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cell = GruCell::zeros(2, 3);
        assert!(matches!(
            cell.step(&[1.0], &[0.0, 0.0]),
            Err(NnError::ShapeMismatch(_))
        ));
    }
}
