//! Moderation recall from prevalence estimates, and the confusion-count
//! transparency bundle.
//!
//! The visible (predicted-negative) pool of size `|N|` hides `FN = p·|N|`
//! false negatives, so `recall = TP / (TP + p·|N|)`. Recall decreases in `p`,
//! which is why the interval endpoints swap: the upper prevalence bound
//! gives the lower recall bound.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Domain};
use crate::estimate::{estimate_stratified, z_value, FiniteCorrection};
use crate::model::{EstimationMethod, PrevalenceEstimate, Stratification};
use crate::serde_util::{sig6, sig6_opt, sig6_pair};

pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const MIN_REPLICATES: u64 = 1_000;

/// `tp / (tp + fn)`.
pub fn recall_from_counts(tp: f64, fn_: f64) -> Result<f64> {
    if tp < 0.0 || fn_ < 0.0 || !tp.is_finite() || !fn_.is_finite() {
        return Err(Error::invalid("counts must be finite and non-negative"));
    }
    if tp + fn_ == 0.0 {
        return Err(Error::UndefinedRecall);
    }
    Ok(tp / (tp + fn_))
}

/// Recall at prevalence `p`. As `p -> 0` with `tp = 0` the limit is 0.
fn recall_at(tp: f64, p: f64, pool_size: f64) -> f64 {
    let fn_ = p * pool_size;
    if tp + fn_ == 0.0 {
        0.0
    } else {
        tp / (tp + fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpSource {
    ExactCount,
    Estimated,
    /// Every removal is assumed correct, so recall is an upper bound.
    RemovalsUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Plugin,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub tp_source: TpSource,
    pub tp_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_se: Option<f64>,
    pub negatives_pool_size: u64,
    pub prevalence: PrevalenceEstimate,
    #[serde(serialize_with = "sig6")]
    pub recall_point: f64,
    #[serde(serialize_with = "sig6_pair")]
    pub recall_ci: [f64; 2],
    pub interval_method: IntervalMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_replicates: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub upper_bound: bool,
}

fn plugin(
    tp: f64,
    tp_source: TpSource,
    pool_size: u64,
    prev: &PrevalenceEstimate,
) -> Result<RecallReport> {
    if !(tp >= 0.0 && tp.is_finite()) {
        return Err(Error::invalid(format!("true positives must be non-negative, got {tp}")));
    }
    if !(prev.ci_low <= prev.point && prev.point <= prev.ci_high) {
        return Err(Error::invalid("prevalence interval does not contain its point"));
    }
    if tp == 0.0 && prev.point == 0.0 {
        return Err(Error::UndefinedRecall);
    }
    let n = pool_size as f64;
    let point = recall_at(tp, prev.point, n);
    let low = recall_at(tp, prev.ci_high, n).min(point);
    let high = recall_at(tp, prev.ci_low, n).max(point);
    Ok(RecallReport {
        tp_source,
        tp_value: tp,
        tp_se: None,
        negatives_pool_size: pool_size,
        prevalence: prev.clone(),
        recall_point: point,
        recall_ci: [low, high],
        interval_method: IntervalMethod::Plugin,
        bootstrap_replicates: None,
        seed: None,
        upper_bound: tp_source == TpSource::RemovalsUpperBound,
    })
}

/// Recall interval from plugging the prevalence interval endpoints into the
/// recall formula, for an exactly known true-positive count.
pub fn recall_interval_plugin(
    tp: f64,
    pool_size: u64,
    prev: &PrevalenceEstimate,
) -> Result<RecallReport> {
    plugin(tp, TpSource::ExactCount, pool_size, prev)
}

/// Optimistic recall that treats every removal as a true positive.
pub fn recall_upper_bound(
    removals: f64,
    pool_size: u64,
    prev: &PrevalenceEstimate,
) -> Result<RecallReport> {
    plugin(removals, TpSource::RemovalsUpperBound, pool_size, prev)
}

/// True positives as an exact count or as an estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruePositives {
    Exact(f64),
    Estimated { point: f64, se: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: u64,
    pub confidence: f64,
    pub seed: u64,
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile-bootstrap recall interval.
///
/// Each replicate redraws every stratum's `n_h` annotations with
/// replacement (a binomial draw on the stratum's annotated rate) and, when
/// `tp` is estimated, draws it from a normal truncated at zero. Replicate
/// `b` uses ChaCha stream `b` of `seed`, so the result does not depend on
/// evaluation order.
pub fn recall_interval_bootstrap(
    tp: TruePositives,
    pool_size: u64,
    strat: &Stratification,
    method: EstimationMethod,
    cfg: &BootstrapConfig,
) -> Result<RecallReport> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!(
            "at least {MIN_REPLICATES} bootstrap replicates are required, got {}",
            cfg.replicates
        )));
    }
    z_value(cfg.confidence)?;
    let prev = estimate_stratified(strat, cfg.confidence, FiniteCorrection::Standard, method)?;
    let (tp_point, tp_se, source) = match tp {
        TruePositives::Exact(v) => (v, None, TpSource::ExactCount),
        TruePositives::Estimated { point, se } => (point, Some(se), TpSource::Estimated),
    };
    if !(tp_point >= 0.0 && tp_point.is_finite()) || tp_se.is_some_and(|s| !(s >= 0.0)) {
        return Err(Error::invalid("true-positive estimate must be non-negative"));
    }
    if tp_point == 0.0 && prev.point == 0.0 {
        return Err(Error::UndefinedRecall);
    }

    let total = strat.total_size as f64;
    let strata: Vec<(f64, u64, f64)> = strat
        .strata
        .iter()
        .filter(|s| s.population > 0)
        .map(|s| (s.population as f64 / total, s.annotated, s.p_hat().unwrap_or(0.0)))
        .collect();
    let n = pool_size as f64;
    let tp_dist = match tp_se {
        Some(se) if se > 0.0 => Some(Normal::new(tp_point, se).map_err(|e| Error::invalid(e.to_string()))?),
        _ => None,
    };

    let replicate = |b: u64| -> Result<Option<f64>> {
        let mut rng = derived_rng(cfg.seed, Domain::Bootstrap, b);
        let mut p_star = 0.0;
        for &(w, n_h, p_h) in &strata {
            let draw = Binomial::new(n_h, p_h).map_err(|e| Error::invalid(e.to_string()))?;
            p_star += w * draw.sample(&mut rng) as f64 / n_h as f64;
        }
        let tp_star = match &tp_dist {
            Some(d) => truncated_at_zero(d, &mut rng),
            None => tp_point,
        };
        let fn_star = p_star * n;
        Ok((tp_star + fn_star > 0.0).then(|| tp_star / (tp_star + fn_star)))
    };
    let mut draws: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(replicate)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if draws.is_empty() {
        return Err(Error::UndefinedRecall);
    }
    draws.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.confidence;
    let point = recall_at(tp_point, prev.point, n);
    let low = quantile_sorted(&draws, alpha / 2.0).min(point);
    let high = quantile_sorted(&draws, 1.0 - alpha / 2.0).max(point);

    Ok(RecallReport {
        tp_source: source,
        tp_value: tp_point,
        tp_se,
        negatives_pool_size: pool_size,
        prevalence: prev,
        recall_point: point,
        recall_ci: [low, high],
        interval_method: IntervalMethod::Bootstrap,
        bootstrap_replicates: Some(cfg.replicates),
        seed: Some(cfg.seed),
        upper_bound: false,
    })
}

fn truncated_at_zero<R: Rng + ?Sized>(d: &Normal<f64>, rng: &mut R) -> f64 {
    for _ in 0..1_000 {
        let x = d.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Exact,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountProvenance {
    pub tp: Provenance,
    pub fp: Provenance,
    pub tn: Provenance,
    #[serde(rename = "fn")]
    pub fn_: Provenance,
}

/// TP/FP/TN/FN. Counts are real because false negatives are usually
/// estimated as `p·|N|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    #[serde(default)]
    pub provenance: CountProvenance,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

impl ConfusionCounts {
    pub fn exact(tp: f64, fp: f64, tn: f64, fn_: f64) -> Self {
        ConfusionCounts {
            tp,
            fp,
            tn,
            fn_,
            provenance: CountProvenance::default(),
        }
    }

    /// Tally (predicted, actual) pairs.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (pred, actual) in pairs {
            match (pred, actual) {
                (true, true) => c.tp += 1.0,
                (true, false) => c.fp += 1.0,
                (false, false) => c.tn += 1.0,
                (false, true) => c.fn_ += 1.0,
            }
        }
        c
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        ratio(2.0 * p * r, p + r)
    }

    /// Prevalence among the predicted negatives.
    pub fn visible_prevalence(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tn)
    }
}

/// Totals the counts are checked against, plus the reporting period.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub reporting_period: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_items: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removals: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(serialize_with = "sig6_opt")]
    pub accuracy: Option<f64>,
    #[serde(serialize_with = "sig6_opt")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "sig6_opt")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "sig6_opt")]
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparencyReport {
    pub reporting_period: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prevalence: Option<PrevalenceEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<RecallReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

/// Assemble TP/FP/TN/FN with derived metrics, after checking the counts
/// against each other and against any totals in `meta`.
pub fn build_transparency_report(
    counts: &ConfusionCounts,
    prev: Option<&PrevalenceEstimate>,
    recall: Option<&RecallReport>,
    meta: &ReportMetadata,
) -> Result<TransparencyReport> {
    let mut violations = Vec::new();
    for (name, v) in [("tp", counts.tp), ("fp", counts.fp), ("tn", counts.tn), ("fn", counts.fn_)] {
        if !(v.is_finite() && v >= 0.0) {
            violations.push(format!("{name} = {v} is not a non-negative count"));
        }
    }
    if let Some(n) = meta.total_items {
        if !close(counts.total(), n) {
            violations.push(format!("tp + fp + tn + fn = {} != total {n}", counts.total()));
        }
    }
    if let Some(r) = meta.removals {
        if !close(counts.tp + counts.fp, r) {
            violations.push(format!("tp + fp = {} != removals {r}", counts.tp + counts.fp));
        }
    }
    if let Some(v) = meta.visible {
        if !close(counts.tn + counts.fn_, v) {
            violations.push(format!("tn + fn = {} != visible {v}", counts.tn + counts.fn_));
        }
    }
    if !violations.is_empty() {
        return Err(Error::Inconsistent(violations));
    }
    Ok(TransparencyReport {
        reporting_period: meta.reporting_period.clone(),
        counts: *counts,
        metrics: Metrics {
            accuracy: counts.accuracy(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        },
        prevalence: prev.cloned(),
        recall: recall.cloned(),
        notes: meta.notes.clone(),
    })
}
