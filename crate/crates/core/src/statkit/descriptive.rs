use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean with sample standard deviation; `std` is `None` for one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
}

pub fn summary(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Argument("summary of an empty sample".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(Summary { n, mean, std })
}

/// Two aligned measurement series, e.g. expert and AI attenuation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    ids: Vec<String>,
    reference: Vec<f64>,
    candidate: Vec<f64>,
}

impl PairedSeries {
    pub fn new(ids: Vec<String>, reference: Vec<f64>, candidate: Vec<f64>) -> Result<Self> {
        if reference.len() != candidate.len() || ids.len() != reference.len() {
            return Err(Error::Argument(format!(
                "paired series lengths differ: {} ids, {} vs {} values",
                ids.len(),
                reference.len(),
                candidate.len()
            )));
        }
        if reference.len() < 2 {
            return Err(Error::Argument("paired series needs at least two cases".into()));
        }
        if reference.iter().chain(&candidate).any(|v| !v.is_finite()) {
            return Err(Error::Argument("paired series holds non-finite values".into()));
        }
        Ok(Self {
            ids,
            reference,
            candidate,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Mean of `(candidate - reference)^2`.
    pub mse: f64,
    /// `mean(candidate) - mean(reference)`.
    pub mean_diff: f64,
}

pub fn error_stats(p: &PairedSeries) -> ErrorStats {
    let n = p.len() as f64;
    let mse = p
        .candidate
        .iter()
        .zip(&p.reference)
        .map(|(c, r)| (c - r) * (c - r))
        .sum::<f64>()
        / n;
    let mean_diff = p.candidate.iter().sum::<f64>() / n - p.reference.iter().sum::<f64>() / n;
    ErrorStats { mse, mean_diff }
}
