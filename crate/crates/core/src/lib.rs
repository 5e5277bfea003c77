//! Multi-layer perceptron heating-load models trained by population-based
//! metaheuristics, with a Levenberg–Marquardt baseline and an experiment
//! harness.

pub mod dataset;
pub mod metaheuristics;
pub mod metrics;
pub mod mlp;
pub mod lm;
pub mod harness;
