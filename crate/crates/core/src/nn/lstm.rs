//! Long short-term memory cell.
//!
//!   f, i, o = σ(W x + U h + b)   (forget / input / output gates)
//!   c̄ = tanh(W_c x + U_c h + b_c)
//!   c_new = f ⊙ c + i ⊙ c̄
//!   h_new = o ⊙ tanh(c_new)

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{add_assign, hadamard, Mat};
use super::{glorot, sigmoid, NnError, ParamTensors};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_f: Mat,
    pub u_f: Mat,
    pub b_f: Vec<f64>,
    pub w_i: Mat,
    pub u_i: Mat,
    pub b_i: Vec<f64>,
    pub w_o: Mat,
    pub u_o: Mat,
    pub b_o: Vec<f64>,
    pub w_c: Mat,
    pub u_c: Mat,
    pub b_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub c_cand: Vec<f64>,
    pub c_new: Vec<f64>,
}

impl LstmCell {
    pub fn new(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        LstmCell {
            w_f: glorot(hidden, input, rng),
            u_f: glorot(hidden, hidden, rng),
            b_f: vec![0.0; hidden],
            w_i: glorot(hidden, input, rng),
            u_i: glorot(hidden, hidden, rng),
            b_i: vec![0.0; hidden],
            w_o: glorot(hidden, input, rng),
            u_o: glorot(hidden, hidden, rng),
            b_o: vec![0.0; hidden],
            w_c: glorot(hidden, input, rng),
            u_c: glorot(hidden, hidden, rng),
            b_c: vec![0.0; hidden],
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmCell {
            w_f: Mat::zeros(hidden, input),
            u_f: Mat::zeros(hidden, hidden),
            b_f: vec![0.0; hidden],
            w_i: Mat::zeros(hidden, input),
            u_i: Mat::zeros(hidden, hidden),
            b_i: vec![0.0; hidden],
            w_o: Mat::zeros(hidden, input),
            u_o: Mat::zeros(hidden, hidden),
            b_o: vec![0.0; hidden],
            w_c: Mat::zeros(hidden, input),
            u_c: Mat::zeros(hidden, hidden),
            b_c: vec![0.0; hidden],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_dim(), self.input_dim())
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols
    }

    #[allow(clippy::type_complexity)]
    pub fn step(
        &self,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache), NnError> {
        if x.len() != self.input_dim() || h.len() != self.hidden_dim() || c.len() != h.len() {
            return Err(NnError::ShapeMismatch(format!(
                "lstm expects input {} / hidden {}, got {} / {} / {}",
                self.input_dim(),
                self.hidden_dim(),
                x.len(),
                h.len(),
                c.len()
            )));
        }
        let gate = |w: &Mat, u: &Mat, b: &[f64]| -> Vec<f64> {
            let mut a = w.matvec(x);
            add_assign(&mut a, &u.matvec(h));
            add_assign(&mut a, b);
            a.iter().map(|&v| sigmoid(v)).collect()
        };
        let f = gate(&self.w_f, &self.u_f, &self.b_f);
        let i = gate(&self.w_i, &self.u_i, &self.b_i);
        let o = gate(&self.w_o, &self.u_o, &self.b_o);

        let mut a_c = self.w_c.matvec(x);
        add_assign(&mut a_c, &self.u_c.matvec(h));
        add_assign(&mut a_c, &self.b_c);
        let c_cand: Vec<f64> = a_c.iter().map(|&v| v.tanh()).collect();

        let c_new: Vec<f64> = (0..c.len())
            .map(|k| f[k] * c[k] + i[k] * c_cand[k])
            .collect();
        let h_new: Vec<f64> = hadamard(&o, &c_new.iter().map(|&v| v.tanh()).collect::<Vec<_>>());

        Ok((
            h_new,
            c_new.clone(),
            LstmStepCache {
                x: x.to_vec(),
                h_prev: h.to_vec(),
                c_prev: c.to_vec(),
                f,
                i,
                o,
                c_cand,
                c_new,
            },
        ))
    }

    /// One BPTT step: accumulates parameter gradients,
    /// returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        dh_new: &[f64],
        dc_new: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim();

        let tanh_c: Vec<f64> = cache.c_new.iter().map(|&v| v.tanh()).collect();
        let mut dc = dc_new.to_vec();
        let mut d_o = vec![0.0; n];
        for k in 0..n {
            d_o[k] = dh_new[k] * tanh_c[k];
            dc[k] += dh_new[k] * cache.o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
        }

        let mut d_f = vec![0.0; n];
        let mut d_i = vec![0.0; n];
        let mut d_cand = vec![0.0; n];
        let mut dc_prev = vec![0.0; n];
        for k in 0..n {
            d_f[k] = dc[k] * cache.c_prev[k];
            d_i[k] = dc[k] * cache.c_cand[k];
            d_cand[k] = dc[k] * cache.i[k];
            dc_prev[k] = dc[k] * cache.f[k];
        }

        let da_f: Vec<f64> = d_f
            .iter()
            .zip(cache.f.iter())
            .map(|(&d, &g)| d * g * (1.0 - g))
            .collect();
        let da_i: Vec<f64> = d_i
            .iter()
            .zip(cache.i.iter())
            .map(|(&d, &g)| d * g * (1.0 - g))
            .collect();
        let da_o: Vec<f64> = d_o
            .iter()
            .zip(cache.o.iter())
            .map(|(&d, &g)| d * g * (1.0 - g))
            .collect();
        let da_c: Vec<f64> = d_cand
            .iter()
            .zip(cache.c_cand.iter())
            .map(|(&d, &g)| d * (1.0 - g * g))
            .collect();

        grads.w_f.add_outer(&da_f, &cache.x);
        grads.u_f.add_outer(&da_f, &cache.h_prev);
        add_assign(&mut grads.b_f, &da_f);
        grads.w_i.add_outer(&da_i, &cache.x);
        grads.u_i.add_outer(&da_i, &cache.h_prev);
        add_assign(&mut grads.b_i, &da_i);
        grads.w_o.add_outer(&da_o, &cache.x);
        grads.u_o.add_outer(&da_o, &cache.h_prev);
        add_assign(&mut grads.b_o, &da_o);
        grads.w_c.add_outer(&da_c, &cache.x);
        grads.u_c.add_outer(&da_c, &cache.h_prev);
        add_assign(&mut grads.b_c, &da_c);

        let mut dh_prev = self.u_f.matvec_t(&da_f);
        add_assign(&mut dh_prev, &self.u_i.matvec_t(&da_i));
        add_assign(&mut dh_prev, &self.u_o.matvec_t(&da_o));
        add_assign(&mut dh_prev, &self.u_c.matvec_t(&da_c));

        let mut dx = self.w_f.matvec_t(&da_f);
        add_assign(&mut dx, &self.w_i.matvec_t(&da_i));
        add_assign(&mut dx, &self.w_o.matvec_t(&da_o));
        add_assign(&mut dx, &self.w_c.matvec_t(&da_c));

        (dx, dh_prev, dc_prev)
    }
}

impl ParamTensors for LstmCell {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.w_f.data,
            &mut self.u_f.data,
            &mut self.b_f,
            &mut self.w_i.data,
            &mut self.u_i.data,
            &mut self.b_i,
            &mut self.w_o.data,
            &mut self.u_o.data,
            &mut self.b_o,
            &mut self.w_c.data,
            &mut self.u_c.data,
            &mut self.b_c,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_analytic_case() {
        // f=i=o=0.5, c̄=0 → c_new=0.5, h_new=0.5*tanh(0.5)
        let cell = LstmCell::zeros(1, 1);
        let (h_new, c_new, _) = cell.step(&[1.0], &[0.0], &[1.0]).unwrap();
        assert!((c_new[0] - 0.5).abs() < 1e-15);
        assert!((h_new[0] - 0.5 * 0.5_f64.tanh()).abs() < 1e-15);
        assert!((h_new[0] - 0.23105).abs() < 1e-5);
    }

    #[test]
    fn saturated_gates_preserve_cell_state() {
        let mut cell = LstmCell::zeros(1, 1);
        cell.b_f = vec![50.0];
        cell.b_i = vec![-50.0];
        let (_, c_new, _) = cell.step(&[0.2], &[0.1], &[0.7]).unwrap();
        assert!((c_new[0] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cell = LstmCell::zeros(2, 2);
        assert!(matches!(
            cell.step(&[1.0, 1.0], &[0.0, 0.0], &[0.0]),
            Err(NnError::ShapeMismatch(_))
        ));
    }
}
