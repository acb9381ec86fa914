use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use crate::{Error, Result};

/// Which side of the score scale indicates the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Lower scores are positive (attenuation: low HU means steatosis).
    Lower,
    Higher,
}

impl Direction {
    #[inline]
    pub fn predicts_positive(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::Lower => score <= threshold,
            Direction::Higher => score >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }

    pub fn as_quadruple(&self) -> [u64; 4] {
        [self.tp, self.fp, self.tn, self.fn_]
    }
}

impl Serialize for ConfusionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_quadruple().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfusionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [tp, fp, tn, fn_] = <[u64; 4]>::deserialize(d)?;
        Ok(Self { tp, fp, tn, fn_ })
    }
}

/// A single ROC vertex. `threshold` is the decision cut that produced it;
/// the two endpoint rows use infinite thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub direction: Direction,
    pub curve: Vec<RocPoint>,
    pub auc: f64,
    pub operating_threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub confusion: ConfusionMatrix,
    pub auc_ci: Option<ConfidenceInterval>,
    pub sensitivity_ci: Option<ConfidenceInterval>,
    pub specificity_ci: Option<ConfidenceInterval>,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Argument("scores must be finite".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "labels contain a single class".into(),
        ));
    }
    Ok((pos, neg))
}

/// Cumulative `(fp, tp, threshold)` counts, one per distinct score, from the
/// most to the least positive-looking score.
fn sweep(scores: &[f64], labels: &[bool], direction: Direction) -> Vec<(u64, u64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    match direction {
        Direction::Lower => order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        Direction::Higher => order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
    }
    let mut out = Vec::new();
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((fp, tp, t));
    }
    out
}

/// ROC curve and trapezoidal AUC. Ties between classes contribute half.
pub fn roc_curve(
    scores: &[f64],
    labels: &[bool],
    direction: Direction,
) -> Result<(Vec<RocPoint>, f64)> {
    let (pos, neg) = check(scores, labels)?;
    let steps = sweep(scores, labels, direction);
    let (start, end) = match direction {
        Direction::Lower => (f64::NEG_INFINITY, f64::INFINITY),
        Direction::Higher => (f64::INFINITY, f64::NEG_INFINITY),
    };
    let mut curve = Vec::with_capacity(steps.len() + 2);
    curve.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: start,
    });
    // twice the area in units of one (fp, tp) cell
    let mut twice_area: u128 = 0;
    let (mut pfp, mut ptp) = (0u64, 0u64);
    for &(fp, tp, t) in &steps {
        twice_area += (fp - pfp) as u128 * (tp + ptp) as u128;
        (pfp, ptp) = (fp, tp);
        curve.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    curve.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: end,
    });
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok((curve, auc))
}

pub fn roc_auc(scores: &[f64], labels: &[bool], direction: Direction) -> Result<f64> {
    Ok(roc_curve(scores, labels, direction)?.1)
}

pub fn confusion_matrix(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    direction: Direction,
) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (direction.predicts_positive(s, threshold), l) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    m
}

/// `(sensitivity, specificity, matrix)` at a fixed decision threshold.
pub fn operating_point(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    direction: Direction,
) -> Result<(f64, f64, ConfusionMatrix)> {
    check(scores, labels)?;
    let m = confusion_matrix(scores, labels, threshold, direction);
    Ok((
        m.sensitivity().expect("positives present"),
        m.specificity().expect("negatives present"),
        m,
    ))
}

/// Full ROC analysis with case-level bootstrap intervals for AUC,
/// sensitivity and specificity.
pub fn roc_analysis(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    direction: Direction,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<RocResult> {
    let (curve, auc) = roc_curve(scores, labels, direction)?;
    let (sensitivity, specificity, confusion) =
        operating_point(scores, labels, threshold, direction)?;
    let (mut auc_ci, mut sensitivity_ci, mut specificity_ci) = (None, None, None);
    if let Some(cfg) = bootstrap {
        let cases: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        let split = |c: &[(f64, bool)]| -> (Vec<f64>, Vec<bool>) { c.iter().copied().unzip() };
        auc_ci = Some(bootstrap_ci(
            &cases,
            |c| {
                let (s, l) = split(c);
                roc_auc(&s, &l, direction).ok()
            },
            cfg,
        )?);
        sensitivity_ci = Some(bootstrap_ci(
            &cases,
            |c| {
                let (s, l) = split(c);
                operating_point(&s, &l, threshold, direction).ok().map(|r| r.0)
            },
            cfg,
        )?);
        specificity_ci = Some(bootstrap_ci(
            &cases,
            |c| {
                let (s, l) = split(c);
                operating_point(&s, &l, threshold, direction).ok().map(|r| r.1)
            },
            cfg,
        )?);
    }
    Ok(RocResult {
        direction,
        curve,
        auc,
        operating_threshold: threshold,
        sensitivity,
        specificity,
        confusion,
        auc_ci,
        sensitivity_ci,
        specificity_ci,
    })
}
