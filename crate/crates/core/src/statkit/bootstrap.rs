use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Draw attempts per replicate before the bootstrap gives up.
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_rep: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_rep: DEFAULT_REPLICATES,
            level: DEFAULT_LEVEL,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_rep == 0 {
            return Err(Error::Argument("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Argument(format!(
                "confidence level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Percentile interval plus everything needed to replay it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub n_rep: usize,
    pub seed: u64,
    pub method: CiMethod,
    /// Resamples discarded because the statistic was undefined on them.
    pub redraws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    PercentileBootstrap,
}

/// Linear-interpolated sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

/// Stream `replicate` of the seeded generator; replicates are independent
/// of scheduling order.
fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Percentile bootstrap over whole cases.
///
/// `statistic` returns `None` where it is undefined on a resample (for
/// example a single-class ROC resample); such resamples are redrawn from
/// the same replicate stream.
pub fn bootstrap_ci<T, F>(data: &[T], statistic: F, cfg: &BootstrapConfig) -> Result<ConfidenceInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("bootstrap over empty data".into()));
    }
    let n = data.len();
    let draws: Vec<(Option<f64>, usize)> = (0..cfg.n_rep)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let mut sample = Vec::with_capacity(n);
            for attempt in 0..MAX_ATTEMPTS {
                sample.clear();
                sample.extend((0..n).map(|_| data[rng.random_range(0..n)].clone()));
                if let Some(v) = statistic(&sample).filter(|v| v.is_finite()) {
                    return (Some(v), attempt);
                }
            }
            (None, MAX_ATTEMPTS)
        })
        .collect();

    let redraws: usize = draws.iter().map(|(_, a)| a).sum();
    let total = redraws + draws.iter().filter(|(v, _)| v.is_some()).count();
    if draws.iter().any(|(v, _)| v.is_none()) || 2 * redraws > total {
        return Err(Error::Instability {
            undefined: redraws,
            draws: total,
        });
    }

    let mut values: Vec<f64> = draws.into_iter().filter_map(|(v, _)| v).collect();
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.level) / 2.0;
    Ok(ConfidenceInterval {
        low: quantile_sorted(&values, alpha),
        high: quantile_sorted(&values, 1.0 - alpha),
        level: cfg.level,
        n_rep: cfg.n_rep,
        seed: cfg.seed,
        method: CiMethod::PercentileBootstrap,
        redraws,
    })
}
