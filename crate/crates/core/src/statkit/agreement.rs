use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use crate::{Error, Result};

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument(
            "correlation needs two equal-length series of at least 2".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Argument("correlation input holds non-finite values".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Subjects in rows, raters in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    rows: Vec<Vec<f64>>,
}

impl RatingsMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if n < 2 || k < 2 {
            return Err(Error::Argument(format!(
                "ratings need at least 2 subjects and 2 raters, got {n}x{k}"
            )));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Argument("ratings matrix rows differ in length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("ratings matrix holds non-finite values".into()));
        }
        Ok(Self { rows })
    }

    /// Two raters as columns.
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Argument("rater series differ in length".into()));
        }
        Self::new(a.iter().zip(b).map(|(&x, &y)| vec![x, y]).collect())
    }

    pub fn subjects(&self) -> usize {
        self.rows.len()
    }

    pub fn raters(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Mean squares of the two-way ANOVA without replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSquares {
    pub rows: f64,
    pub cols: f64,
    pub error: f64,
}

fn mean_squares(rows: &[Vec<f64>]) -> (MeanSquares, f64) {
    let n = rows.len();
    let k = rows[0].len();
    let grand = rows.iter().flatten().sum::<f64>() / (n * k) as f64;
    let row_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ssr = k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ssc = n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            let e = v - row_means[i] - col_means[j] + grand;
            sse += e * e;
            sst += (v - grand) * (v - grand);
        }
    }
    (
        MeanSquares {
            rows: ssr / (n - 1) as f64,
            cols: ssc / (k - 1) as f64,
            error: sse / ((n - 1) * (k - 1)) as f64,
        },
        sst,
    )
}

fn icc_value(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len() as f64;
    let k = rows[0].len() as f64;
    let (ms, sst) = mean_squares(rows);
    if sst == 0.0 {
        return Err(Error::UndefinedMetric("ratings have zero total variance".into()));
    }
    let denom = ms.rows + (k - 1.0) * ms.error + k / n * (ms.cols - ms.error);
    let icc = (ms.rows - ms.error) / denom;
    if !icc.is_finite() {
        return Err(Error::UndefinedMetric("ICC denominator vanished".into()));
    }
    Ok(icc)
}

pub fn anova_mean_squares(m: &RatingsMatrix) -> MeanSquares {
    mean_squares(&m.rows).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    pub ci: ConfidenceInterval,
}

/// ICC(2,1): two-way random effects, absolute agreement, single measures.
pub fn icc_2_1_point(m: &RatingsMatrix) -> Result<f64> {
    icc_value(&m.rows)
}

/// ICC(2,1) with a percentile bootstrap interval over subjects.
pub fn icc_2_1(m: &RatingsMatrix, cfg: &BootstrapConfig) -> Result<IccResult> {
    let icc = icc_value(&m.rows)?;
    let ci = bootstrap_ci(&m.rows, |rows| icc_value(rows).ok(), cfg)?;
    Ok(IccResult { icc, ci })
}
