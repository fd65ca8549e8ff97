//! Result records written by the command-line tool.

use serde::{Deserialize, Serialize};

use crate::estimator::{EstimatorResult, TimeMode};
use crate::fock::FockConfiguration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementLabel {
    pub n: String,
    pub n_prime: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

/// One estimated matrix element, JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub element: ElementLabel,
    pub t: f64,
    pub mode: TimeMode,
    pub mean: ComplexValue,
    pub stderr: ComplexValue,
    pub n_trajectories: u64,
    pub n_hits: u64,
    pub seed: u64,
}

impl ElementRecord {
    pub fn new(
        n: &FockConfiguration,
        n_prime: &FockConfiguration,
        t: f64,
        mode: TimeMode,
        seed: u64,
        result: &EstimatorResult,
    ) -> Self {
        ElementRecord {
            element: ElementLabel { n: n.to_bit_string(), n_prime: n_prime.to_bit_string() },
            t,
            mode,
            mean: ComplexValue { re: result.mean.re, im: result.mean.im },
            stderr: ComplexValue { re: result.stderr_real, im: result.stderr_imag },
            n_trajectories: result.n_trajectories,
            n_hits: result.n_hits,
            seed,
        }
    }

    pub fn to_row(&self) -> ElementRow {
        ElementRow {
            n: self.element.n.clone(),
            n_prime: self.element.n_prime.clone(),
            t: self.t,
            mode: self.mode,
            mean_re: self.mean.re,
            mean_im: self.mean.im,
            stderr_re: self.stderr.re,
            stderr_im: self.stderr.im,
            n_trajectories: self.n_trajectories,
            n_hits: self.n_hits,
            seed: self.seed,
        }
    }
}

/// Flat CSV form of [`ElementRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRow {
    pub n: String,
    pub n_prime: String,
    pub t: f64,
    pub mode: TimeMode,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_trajectories: u64,
    pub n_hits: u64,
    pub seed: u64,
}
