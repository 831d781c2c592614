//! Hybrid evolution-strategy / Bayesian hyperparameter search.

pub mod gp;
