//! Mistake-distribution traits and how strongly metric scores track them.
//!
//! Tail orientation (TO) measures how late in a dialogue the mistakes sit;
//! non-uniformity (NU) measures how unevenly they spread over turns. A
//! metric whose per-dialogue scores correlate with either trait is
//! sensitive to *when* or *how clustered* errors are, not only to how many
//! there are. Mistakes are the non-correct events of the change tally, so
//! a persisting error counts once, at the turn it starts.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::delta::ChangeTally;
use crate::error::{Error, Result};
use crate::model::{Metric, MetricReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    /// Tail orientation.
    To,
    /// Non-uniformity.
    Nu,
}

impl Trait {
    pub const ALL: [Trait; 2] = [Trait::To, Trait::Nu];

    pub fn name(self) -> &'static str {
        match self {
            Trait::To => "to",
            Trait::Nu => "nu",
        }
    }
}

impl FromStr for Trait {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "to" => Ok(Trait::To),
            "nu" => Ok(Trait::Nu),
            other => Err(Error::InvalidArgument(format!("unknown trait `{other}`"))),
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraitScores {
    pub dialogue_id: String,
    pub turns: usize,
    pub mistakes: usize,
    /// Both traits are `None` exactly when there are no mistakes.
    pub tail_orientation: Option<f64>,
    pub non_uniformity: Option<f64>,
}

impl TraitScores {
    pub fn get(&self, t: Trait) -> Option<f64> {
        match t {
            Trait::To => self.tail_orientation,
            Trait::Nu => self.non_uniformity,
        }
    }
}

fn check_turns(mistake_turns: &[usize], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("dialogue has no turns".into()));
    }
    if let Some(&t) = mistake_turns.iter().find(|&&t| t >= n) {
        return Err(Error::InvalidArgument(format!(
            "mistake at turn {t} outside a {n}-turn dialogue"
        )));
    }
    Ok(())
}

/// `(mean(t_i) - (n-1)/2) / n`, in [-1/2, 1/2). `None` without mistakes.
pub fn tail_orientation(mistake_turns: &[usize], n: usize) -> Result<Option<f64>> {
    check_turns(mistake_turns, n)?;
    if mistake_turns.is_empty() {
        return Ok(None);
    }
    let mean = mistake_turns.iter().sum::<usize>() as f64 / mistake_turns.len() as f64;
    Ok(Some((mean - (n as f64 - 1.0) / 2.0) / n as f64))
}

/// `sum_t |m_t - m/n| / (m/n)` where `m_t` counts mistakes at turn `t`.
/// Zero for a perfectly even spread. `None` without mistakes.
pub fn non_uniformity(mistake_turns: &[usize], n: usize) -> Result<Option<f64>> {
    check_turns(mistake_turns, n)?;
    if mistake_turns.is_empty() {
        return Ok(None);
    }
    let mut per_turn = vec![0usize; n];
    for &t in mistake_turns {
        per_turn[t] += 1;
    }
    let expected = mistake_turns.len() as f64 / n as f64;
    let spread: f64 = per_turn.iter().map(|&m| (m as f64 - expected).abs()).sum();
    Ok(Some(spread / expected))
}

pub fn trait_scores(dialogue_id: &str, tally: &ChangeTally, turns: usize) -> Result<TraitScores> {
    let mistakes = tally.mistake_turns();
    Ok(TraitScores {
        dialogue_id: dialogue_id.to_owned(),
        turns,
        mistakes: mistakes.len(),
        tail_orientation: tail_orientation(&mistakes, turns)?,
        non_uniformity: non_uniformity(&mistakes, turns)?,
    })
}

/// `(x - mean) / (max - min)`: zero mean, unit range.
pub fn mean_normalize(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("mean normalization needs at least two values".into()));
    }
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = max - min;
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidArgument("mean normalization of a constant series".into()));
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(xs.iter().map(|x| (x - mean) / range).collect())
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("correlation of non-finite values".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Confidence interval for the difference of two correlations that share
/// one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationComparison {
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    /// The interval excludes zero.
    pub significant: bool,
}

/// Compares `r1 = corr(a, x)` with `r2 = corr(b, x)` measured on the same
/// `n` samples, where `r_common = corr(a, b)`.
///
/// Uses Zou's (2007) interval for overlapping dependent correlations:
/// Fisher-z limits for each coefficient, recombined with the estimated
/// correlation between the two coefficients.
pub fn compare_correlations(
    r1: f64,
    r2: f64,
    r_common: f64,
    n: usize,
    confidence: f64,
) -> Result<CorrelationComparison> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 samples, got {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must be in (0, 1), got {confidence}")));
    }
    for (name, r) in [("r1", r1), ("r2", r2), ("r_common", r_common)] {
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must be in (-1, 1), got {r}")));
        }
    }

    let z_crit = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let half_width = z_crit / ((n - 3) as f64).sqrt();
    let fisher_ci = |r: f64| {
        let z = r.atanh();
        ((z - half_width).tanh(), (z + half_width).tanh())
    };
    let (l1, u1) = fisher_ci(r1);
    let (l2, u2) = fisher_ci(r2);

    let c = ((r_common - 0.5 * r1 * r2) * (1.0 - r1 * r1 - r2 * r2 - r_common * r_common)
        + r_common.powi(3))
        / ((1.0 - r1 * r1) * (1.0 - r2 * r2));

    let difference = r1 - r2;
    let lower = difference
        - ((r1 - l1).powi(2) + (u2 - r2).powi(2) - 2.0 * c * (r1 - l1) * (u2 - r2))
            .max(0.0)
            .sqrt();
    let upper = difference
        + ((u1 - r1).powi(2) + (r2 - l2).powi(2) - 2.0 * c * (u1 - r1) * (r2 - l2))
            .max(0.0)
            .sqrt();

    Ok(CorrelationComparison {
        difference,
        lower,
        upper,
        confidence,
        significant: lower > 0.0 || upper < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement {
    pub dialogue_id: String,
    pub score_a: f64,
    pub score_b: f64,
    pub gap: f64,
}

/// Dialogues ordered by `|a - b|`, largest first, ties by id; at most `k`.
pub fn disagreement_ranking(
    report: &MetricReport,
    metric_a: Metric,
    metric_b: Metric,
    k: usize,
) -> Result<Vec<Disagreement>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(report.per_dialogue.len());
    for d in &report.per_dialogue {
        let (Some(a), Some(b)) = (d.scores.get(metric_a), d.scores.get(metric_b)) else {
            return Err(Error::InvalidArgument(format!(
                "dialogue `{}` has no {metric_a}/{metric_b} score",
                d.dialogue_id
            )));
        };
        rows.push(Disagreement {
            dialogue_id: d.dialogue_id.clone(),
            score_a: a,
            score_b: b,
            gap: (a - b).abs(),
        });
    }
    rank_by_gap(&mut rows);
    rows.truncate(k);
    Ok(rows)
}

/// Dialogues ordered by the gap in one metric between two systems scored
/// on the same corpus; at most `k`.
pub fn system_disagreement(
    report_a: &MetricReport,
    report_b: &MetricReport,
    metric: Metric,
    k: usize,
) -> Result<Vec<Disagreement>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(report_a.per_dialogue.len());
    for a in &report_a.per_dialogue {
        let b = report_b.dialogue(&a.dialogue_id).ok_or_else(|| {
            Error::InvalidArgument(format!("dialogue `{}` missing from second report", a.dialogue_id))
        })?;
        let (Some(sa), Some(sb)) = (a.scores.get(metric), b.scores.get(metric)) else {
            return Err(Error::InvalidArgument(format!(
                "dialogue `{}` has no {metric} score",
                a.dialogue_id
            )));
        };
        rows.push(Disagreement {
            dialogue_id: a.dialogue_id.clone(),
            score_a: sa,
            score_b: sb,
            gap: (sa - sb).abs(),
        });
    }
    rank_by_gap(&mut rows);
    rows.truncate(k);
    Ok(rows)
}

fn rank_by_gap(rows: &mut [Disagreement]) {
    rows.sort_by(|x, y| {
        y.gap
            .partial_cmp(&x.gap)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.dialogue_id.cmp(&y.dialogue_id))
    });
}

/// One equal-width bin of a trait-vs-score scatter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_score: Option<f64>,
}

pub const DEFAULT_BINS: usize = 10;

/// Equal-width bins over the trait axis with the mean score per bin.
pub fn bin_by_trait(traits: &[f64], scores: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if traits.len() != scores.len() || traits.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("binning needs equal, non-empty series and bins > 0".into()));
    }
    let lo = traits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = traits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut sums = vec![(0usize, 0.0f64); bins];
    for (&x, &y) in traits.iter().zip(scores) {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        sums[i].0 += 1;
        sums[i].1 += y;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, (count, sum))| Bin {
            lower: lo + i as f64 * width,
            upper: lo + (i + 1) as f64 * width,
            count,
            mean_score: (count > 0).then(|| sum / count as f64),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraitCorrelation {
    pub trait_name: Trait,
    pub metric: Metric,
    /// `None` when either series is constant.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraitComparison {
    pub trait_name: Trait,
    pub metric_a: Metric,
    pub metric_b: Metric,
    pub r_a: f64,
    pub r_b: f64,
    pub r_ab: f64,
    pub samples: usize,
    pub interval: CorrelationComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraitAnalysis {
    /// Dialogues with at least one mistake; the correlation samples.
    pub samples: usize,
    pub correlations: Vec<TraitCorrelation>,
    pub comparisons: Vec<TraitComparison>,
}

/// Per-metric correlation with each requested trait over dialogues with
/// mistakes, plus a confidence-interval comparison for each metric pair.
///
/// `traits` must be aligned with `report.per_dialogue` by dialogue id.
pub fn analyze_traits(
    report: &MetricReport,
    traits: &[TraitScores],
    which: &[Trait],
    metrics: &[Metric],
    pairs: &[(Metric, Metric)],
    confidence: f64,
) -> Result<TraitAnalysis> {
    let by_id: std::collections::HashMap<&str, &TraitScores> =
        traits.iter().map(|t| (t.dialogue_id.as_str(), t)).collect();
    let rows: Vec<(&TraitScores, &crate::model::Scores)> = report
        .per_dialogue
        .iter()
        .filter_map(|d| by_id.get(d.dialogue_id.as_str()).map(|t| (*t, &d.scores)))
        .filter(|(t, _)| t.mistakes > 0)
        .collect();

    let column = |f: &dyn Fn(&TraitScores, &crate::model::Scores) -> Option<f64>| -> Option<Vec<f64>> {
        rows.iter().map(|(t, s)| f(t, s)).collect()
    };

    let mut correlations = Vec::new();
    let mut comparisons = Vec::new();
    for &tr in which {
        let Some(xs) = column(&|t, _| t.get(tr)) else {
            continue;
        };
        for &m in metrics {
            let r = column(&|_, s| s.get(m)).and_then(|ys| pearson(&xs, &ys).ok());
            correlations.push(TraitCorrelation {
                trait_name: tr,
                metric: m,
                r,
            });
        }
        for &(a, b) in pairs {
            let (Some(ya), Some(yb)) = (column(&|_, s| s.get(a)), column(&|_, s| s.get(b))) else {
                continue;
            };
            let (Ok(r_a), Ok(r_b), Ok(r_ab)) = (pearson(&xs, &ya), pearson(&xs, &yb), pearson(&ya, &yb))
            else {
                continue;
            };
            let clip = |r: f64| r.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let interval = compare_correlations(clip(r_a), clip(r_b), clip(r_ab), rows.len(), confidence)?;
            comparisons.push(TraitComparison {
                trait_name: tr,
                metric_a: a,
                metric_b: b,
                r_a,
                r_b,
                r_ab,
                samples: rows.len(),
                interval,
            });
        }
    }
    Ok(TraitAnalysis {
        samples: rows.len(),
        correlations,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn tail_orientation_examples() {
        let to = |ts: &[usize], n| tail_orientation(ts, n).unwrap().unwrap();
        assert!((to(&[5], 6) - 2.5 / 6.0).abs() < TOL);
        assert!((to(&[0], 6) + 2.5 / 6.0).abs() < TOL);
        assert!(to(&[1, 4], 6).abs() < TOL);
        assert!(to(&[2], 5).abs() < TOL);
        assert_eq!(tail_orientation(&[], 6).unwrap(), None);
        assert!(tail_orientation(&[6], 6).is_err());
        assert!(tail_orientation(&[], 0).is_err());
    }

    #[test]
    fn non_uniformity_examples() {
        let nu = |ts: &[usize], n| non_uniformity(ts, n).unwrap().unwrap();
        assert!(nu(&[0, 1, 2, 3], 4).abs() < TOL);
        assert!((nu(&[0, 0, 0, 0], 4) - 6.0).abs() < TOL);
        assert_eq!(non_uniformity(&[], 4).unwrap(), None);
        assert!(non_uniformity(&[4], 4).is_err());
    }

    #[test]
    fn mean_normalize_examples() {
        assert_eq!(mean_normalize(&[0.0, 1.0]).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(mean_normalize(&[1.0, 2.0, 3.0]).unwrap(), vec![-0.5, 0.0, 0.5]);
        assert!(mean_normalize(&[5.0, 5.0, 5.0]).is_err());
        assert!(mean_normalize(&[1.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &lin).unwrap() - 1.0).abs() < TOL);
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < TOL);
        assert!((pearson(&xs, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < TOL);
        assert!(pearson(&xs, &[1.0; 4]).is_err());
        assert!(pearson(&xs, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn equal_correlations_not_significant() {
        for rc in [-0.5, 0.0, 0.3, 0.9] {
            let c = compare_correlations(0.4, 0.4, rc, 200, 0.95).unwrap();
            assert!(c.lower <= 0.0 && c.upper >= 0.0);
            assert!(!c.significant);
        }
        assert!(compare_correlations(0.4, 0.2, 0.1, 3, 0.95).is_err());
        assert!(compare_correlations(1.0, 0.2, 0.1, 30, 0.95).is_err());
    }

    #[test]
    fn comparison_is_antisymmetric() {
        let a = compare_correlations(0.59, 0.40, 0.7, 300, 0.95).unwrap();
        let b = compare_correlations(0.40, 0.59, 0.7, 300, 0.95).unwrap();
        assert!((a.lower + b.upper).abs() < TOL);
        assert!((a.upper + b.lower).abs() < TOL);
        assert_eq!(a.significant, b.significant);
    }

    #[test]
    fn independent_correlations_reduce_to_fisher_difference() {
        // With r_common = 0 and r1 = r2 = 0, c = 0 and each Fisher half-width
        // is tanh(z_crit / sqrt(n - 3)).
        let c = compare_correlations(0.0, 0.0, 0.0, 103, 0.95).unwrap();
        let w = (1.959963984540054f64 / 10.0).tanh();
        assert!((c.upper - (2.0f64).sqrt() * w).abs() < 1e-9);
    }

    #[test]
    fn binning() {
        let bins = bin_by_trait(&[0.0, 0.5, 1.0, 1.0], &[1.0, 0.0, 0.5, 0.7], 2).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[1].count, 3);
        assert!((bins[1].mean_score.unwrap() - 0.4).abs() < TOL);
    }
}
