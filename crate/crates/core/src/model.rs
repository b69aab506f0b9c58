//! Domain types shared across the estimation pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::serde_util;

/// One content item in a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledItem {
    pub id: String,
    /// Output of the binning classifier, in `[0, 1]`.
    pub score: f64,
    /// Hidden ground truth: `true` when the item is a true positive.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "serde_util::binary_label"
    )]
    pub label: Option<bool>,
    /// Whether the moderation system removed the item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtered: Option<bool>,
}

impl PooledItem {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        PooledItem {
            id: id.into(),
            score,
            label: None,
            filtered: None,
        }
    }

    pub fn labeled(id: impl Into<String>, score: f64, label: bool) -> Self {
        PooledItem {
            label: Some(label),
            ..PooledItem::new(id, score)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(format!(
                "item {:?}: score {} outside [0, 1]",
                self.id, self.score
            )));
        }
        Ok(())
    }
}

/// Counts from a simple random sample of annotated items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub positives: u64,
    pub total: u64,
}

impl LabeledSample {
    pub fn new(positives: u64, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::invalid("sample must contain at least one annotation"));
        }
        if positives > total {
            return Err(Error::invalid(format!(
                "positives ({positives}) exceed sample size ({total})"
            )));
        }
        Ok(LabeledSample { positives, total })
    }

    pub fn from_labels(labels: impl IntoIterator<Item = bool>) -> Result<Self> {
        let (mut pos, mut total) = (0, 0);
        for l in labels {
            pos += u64::from(l);
            total += 1;
        }
        LabeledSample::new(pos, total)
    }
}

/// One stratum of a [`Stratification`] with its annotation tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    /// 1-based stratum index.
    pub index: usize,
    pub population: u64,
    pub score_low: f64,
    pub score_high: f64,
    pub annotated: u64,
    pub positives: u64,
}

impl StratumSummary {
    /// Within-stratum positive rate of the annotations, if any were made.
    pub fn p_hat(&self) -> Option<f64> {
        (self.annotated > 0).then(|| self.positives as f64 / self.annotated as f64)
    }

    /// Bernoulli standard deviation implied by [`p_hat`](Self::p_hat).
    pub fn sigma_hat(&self) -> Option<f64> {
        self.p_hat().map(bernoulli_sd)
    }

    /// Share of the pool in this stratum.
    pub fn weight(&self, total: u64) -> f64 {
        self.population as f64 / total as f64
    }
}

pub(crate) fn bernoulli_sd(p: f64) -> f64 {
    (p * (1.0 - p)).max(0.0).sqrt()
}

/// An ordered partition of a scored pool into strata by score interval.
///
/// Stratum `h` covers `[boundaries[h], boundaries[h + 1])`; the last stratum
/// is closed on the right so a score of exactly `1.0` is included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub boundaries: Vec<f64>,
    pub strata: Vec<StratumSummary>,
    pub total_size: u64,
}

impl Stratification {
    /// Assign every item of `pool` to a stratum given interval boundaries.
    pub fn from_boundaries(pool: &[PooledItem], boundaries: Vec<f64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::invalid("pool is empty"));
        }
        if boundaries.len() < 2 {
            return Err(Error::invalid("at least two boundaries are required"));
        }
        if boundaries[0] != 0.0 || *boundaries.last().unwrap() != 1.0 {
            return Err(Error::invalid("boundaries must span [0, 1]"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("boundaries must be strictly increasing"));
        }
        let num_strata = boundaries.len() - 1;
        let mut sizes = vec![0u64; num_strata];
        for item in pool {
            item.validate()?;
            sizes[locate(&boundaries, item.score)] += 1;
        }
        let strata = sizes
            .iter()
            .enumerate()
            .map(|(h, &n)| StratumSummary {
                index: h + 1,
                population: n,
                score_low: boundaries[h],
                score_high: boundaries[h + 1],
                annotated: 0,
                positives: 0,
            })
            .collect();
        Ok(Stratification {
            boundaries,
            strata,
            total_size: pool.len() as u64,
        })
    }

    pub fn num_strata(&self) -> usize {
        self.strata.len()
    }

    /// 0-based stratum index containing `score`.
    pub fn stratum_of(&self, score: f64) -> usize {
        locate(&self.boundaries, score)
    }

    /// Pool indices belonging to each stratum, in pool order.
    pub fn members(&self, pool: &[PooledItem]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .strata
            .iter()
            .map(|s| Vec::with_capacity(s.population as usize))
            .collect();
        for (i, item) in pool.iter().enumerate() {
            out[self.stratum_of(item.score)].push(i);
        }
        out
    }

    pub fn populations(&self) -> Vec<u64> {
        self.strata.iter().map(|s| s.population).collect()
    }

    pub fn num_nonempty(&self) -> usize {
        self.strata.iter().filter(|s| s.population > 0).count()
    }

    /// Replace the annotation tallies; `counts[h] = (annotated, positives)`.
    pub fn with_annotations(mut self, counts: &[(u64, u64)]) -> Result<Self> {
        if counts.len() != self.strata.len() {
            return Err(Error::invalid(format!(
                "expected {} annotation tallies, got {}",
                self.strata.len(),
                counts.len()
            )));
        }
        for (s, &(n, pos)) in self.strata.iter_mut().zip(counts) {
            if pos > n || n > s.population {
                return Err(Error::invalid(format!(
                    "stratum {}: need positives <= annotated <= population, got {pos} <= {n} <= {}",
                    s.index, s.population
                )));
            }
            s.annotated = n;
            s.positives = pos;
        }
        Ok(self)
    }

    /// Annotate every item with its hidden label (exhaustive tally).
    pub fn with_true_labels(self, pool: &[PooledItem]) -> Result<Self> {
        let mut counts = vec![(0u64, 0u64); self.strata.len()];
        for item in pool {
            let label = item
                .label
                .ok_or_else(|| Error::invalid(format!("item {:?} has no label", item.id)))?;
            let c = &mut counts[self.stratum_of(item.score)];
            c.0 += 1;
            c.1 += u64::from(label);
        }
        self.with_annotations(&counts)
    }

    pub fn total_annotated(&self) -> u64 {
        self.strata.iter().map(|s| s.annotated).sum()
    }

    pub fn total_positives(&self) -> u64 {
        self.strata.iter().map(|s| s.positives).sum()
    }

    /// Population sizes paired with annotated positive rates, for planning.
    pub fn profile(&self) -> Vec<StratumProfile> {
        self.strata
            .iter()
            .map(|s| StratumProfile {
                population: s.population,
                prevalence: s.p_hat().unwrap_or(0.0),
            })
            .collect()
    }
}

fn locate(boundaries: &[f64], score: f64) -> usize {
    let interior = &boundaries[1..boundaries.len() - 1];
    interior.partition_point(|&b| b <= score)
}

/// Size and positive rate of a stratum, as consumed by the planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumProfile {
    pub population: u64,
    pub prevalence: f64,
}

impl StratumProfile {
    pub fn sigma(&self) -> f64 {
        bernoulli_sd(self.prevalence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    Random,
    StratifiedEqual,
    StratifiedNeyman,
    StratifiedPilot,
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimationMethod::Random => "random",
            EstimationMethod::StratifiedEqual => "stratified-equal",
            EstimationMethod::StratifiedNeyman => "stratified-neyman",
            EstimationMethod::StratifiedPilot => "stratified-pilot",
        })
    }
}

/// Point estimate of a proportion with its normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    #[serde(serialize_with = "serde_util::sig6")]
    pub point: f64,
    #[serde(serialize_with = "serde_util::sig6")]
    pub se: f64,
    /// `se / point`; infinite when the point is zero but `se` is not.
    #[serde(with = "serde_util::ratio")]
    pub cv: f64,
    #[serde(serialize_with = "serde_util::sig6")]
    pub ci_low: f64,
    #[serde(serialize_with = "serde_util::sig6")]
    pub ci_high: f64,
    pub confidence: f64,
    pub n_total: u64,
    pub method: EstimationMethod,
}

impl PrevalenceEstimate {
    pub fn half_width(&self) -> f64 {
        crate::estimate::z_value(self.confidence).unwrap_or(f64::NAN) * self.se
    }
}
