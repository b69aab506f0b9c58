//! Score-based binning: equal-width, quantile and label-aware oracle strata.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{PooledItem, Stratification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningMethod {
    EqualWidth,
    Quantile,
    Oracle,
}

/// A binning method together with the number of strata, written `method:L`
/// (for example `quantile:8`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinningSpec {
    pub method: BinningMethod,
    pub num_bins: usize,
}

impl BinningSpec {
    pub fn new(method: BinningMethod, num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::invalid("number of bins must be at least 1"));
        }
        if method == BinningMethod::Oracle && !num_bins.is_power_of_two() {
            return Err(Error::invalid(format!(
                "oracle binning needs a power-of-two bin count, got {num_bins}"
            )));
        }
        Ok(BinningSpec { method, num_bins })
    }

    pub fn apply(&self, pool: &[PooledItem]) -> Result<Stratification> {
        match self.method {
            BinningMethod::EqualWidth => bin_equal_width(pool, self.num_bins),
            BinningMethod::Quantile => bin_quantile(pool, self.num_bins),
            BinningMethod::Oracle => bin_oracle(pool, self.num_bins),
        }
    }
}

impl fmt::Display for BinningSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.method {
            BinningMethod::EqualWidth => "equal-width",
            BinningMethod::Quantile => "quantile",
            BinningMethod::Oracle => "oracle",
        };
        write!(f, "{m}:{}", self.num_bins)
    }
}

impl FromStr for BinningSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, l) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected METHOD:BINS, got {s:?}")))?;
        let method = match m {
            "equal-width" | "equal" | "width" => BinningMethod::EqualWidth,
            "quantile" | "quantiles" => BinningMethod::Quantile,
            "oracle" => BinningMethod::Oracle,
            other => return Err(Error::invalid(format!("unknown binning method {other:?}"))),
        };
        let num_bins = l
            .parse()
            .map_err(|_| Error::invalid(format!("bad bin count {l:?}")))?;
        BinningSpec::new(method, num_bins)
    }
}

/// `L` intervals of width `1/L` over the score range.
pub fn bin_equal_width(pool: &[PooledItem], num_bins: usize) -> Result<Stratification> {
    if num_bins == 0 {
        return Err(Error::invalid("number of bins must be at least 1"));
    }
    let boundaries = (0..=num_bins)
        .map(|k| k as f64 / num_bins as f64)
        .collect();
    Stratification::from_boundaries(pool, boundaries)
}

fn sorted_scores(pool: &[PooledItem]) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(pool.len());
    for item in pool {
        item.validate()?;
        scores.push(item.score);
    }
    scores.sort_by(f64::total_cmp);
    Ok(scores)
}

/// Empirical-quantile strata of (near) equal size.
///
/// Items sharing a score always land in the same stratum; a cut that would
/// separate tied scores moves to the nearest gap between distinct values. If
/// several cuts collapse onto one gap, the strata between them are left empty.
pub fn bin_quantile(pool: &[PooledItem], num_bins: usize) -> Result<Stratification> {
    if num_bins == 0 {
        return Err(Error::invalid("number of bins must be at least 1"));
    }
    if pool.is_empty() {
        return Err(Error::invalid("pool is empty"));
    }
    if num_bins > pool.len() {
        return Err(Error::invalid(format!(
            "{num_bins} quantile bins requested for a pool of {} items",
            pool.len()
        )));
    }
    let scores = sorted_scores(pool)?;
    let n = scores.len();

    // Rank positions where a boundary can go without splitting ties.
    let mut gaps: Vec<usize> = Vec::new();
    if scores[0] > 0.0 {
        gaps.push(0);
    }
    gaps.extend((1..n).filter(|&i| scores[i - 1] < scores[i]));
    if scores[n - 1] < 1.0 {
        gaps.push(n);
    }

    let mut cuts: Vec<usize> = Vec::with_capacity(num_bins - 1);
    let mut moved = false;
    for k in 1..num_bins {
        let target = k * n / num_bins;
        let j = gaps.partition_point(|&g| g < target);
        let pos = match (j.checked_sub(1).map(|i| gaps[i]), gaps.get(j).copied()) {
            (_, Some(hi)) if hi == target => hi,
            (Some(lo), Some(hi)) => {
                if target - lo <= hi - target {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("a non-empty pool always has a boundary gap"),
        };
        moved |= pos != target;
        cuts.push(pos.max(cuts.last().copied().unwrap_or(0)));
    }
    if moved {
        log::warn!("tied scores moved quantile boundaries; strata sizes are unbalanced");
    }

    let mut boundaries = Vec::with_capacity(num_bins + 1);
    boundaries.push(0.0);
    let mut i = 0;
    while i < cuts.len() {
        let pos = cuts[i];
        let run = cuts[i..].iter().take_while(|&&c| c == pos).count();
        let lo = if pos == 0 { 0.0 } else { scores[pos - 1] };
        let hi = if pos == n { 1.0 } else { scores[pos] };
        for j in 1..=run {
            boundaries.push(lo + (hi - lo) * j as f64 / (run + 1) as f64);
        }
        i += run;
    }
    boundaries.push(1.0);
    Stratification::from_boundaries(pool, boundaries)
}

/// Recursive label-aware bisection.
///
/// Each round splits every current stratum in two at the midpoint between
/// adjacent distinct scores that minimises `sum_h N_h * sigma_h`, the
/// numerator of the optimal-allocation variance. Ties go to the lowest
/// boundary. Needs labels on every item and a power-of-two bin count.
pub fn bin_oracle(pool: &[PooledItem], num_bins: usize) -> Result<Stratification> {
    BinningSpec::new(BinningMethod::Oracle, num_bins)?;
    if pool.is_empty() {
        return Err(Error::invalid("pool is empty"));
    }
    let mut items: Vec<(f64, bool)> = Vec::with_capacity(pool.len());
    for item in pool {
        item.validate()?;
        let label = item.label.ok_or_else(|| {
            Error::invalid(format!("oracle binning needs labels; item {:?} has none", item.id))
        })?;
        items.push((item.score, label));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));

    // prefix[i] = positives among the first i sorted items
    let mut prefix = Vec::with_capacity(items.len() + 1);
    prefix.push(0u64);
    for &(_, l) in &items {
        prefix.push(prefix.last().unwrap() + u64::from(l));
    }

    // (score_low, score_high, first sorted index, one past last)
    let mut strata = vec![(0.0, 1.0, 0usize, items.len())];
    while strata.len() < num_bins {
        let mut next = Vec::with_capacity(strata.len() * 2);
        for &(lo, hi, start, end) in &strata {
            let cut = best_split(&items, &prefix, start, end);
            let boundary = match cut {
                Some(i) => items[i - 1].0 + (items[i].0 - items[i - 1].0) / 2.0,
                None => filler_boundary(&items[start..end], lo, hi),
            };
            let split = cut.unwrap_or_else(|| start + items[start..end].partition_point(|x| x.0 < boundary));
            next.push((lo, boundary, start, split));
            next.push((boundary, hi, split, end));
        }
        strata = next;
    }

    let mut boundaries: Vec<f64> = strata.iter().map(|s| s.0).collect();
    boundaries.push(1.0);
    Stratification::from_boundaries(pool, boundaries)
}

/// Contribution `N * sigma = sqrt(P * (N - P))` of a stratum with `P` positives.
fn spread(positives: u64, size: u64) -> f64 {
    ((positives * (size - positives)) as f64).sqrt()
}

fn best_split(items: &[(f64, bool)], prefix: &[u64], start: usize, end: usize) -> Option<usize> {
    let total_pos = prefix[end] - prefix[start];
    let mut best: Option<(usize, f64)> = None;
    for i in start + 1..end {
        if items[i - 1].0 == items[i].0 {
            continue;
        }
        let left_pos = prefix[i] - prefix[start];
        let obj = spread(left_pos, (i - start) as u64)
            + spread(total_pos - left_pos, (end - i) as u64);
        if best.is_none_or(|(_, b)| obj < b) {
            best = Some((i, obj));
        }
    }
    best.map(|(i, _)| i)
}

/// A boundary inside `(lo, hi)` that leaves all of `items` on one side.
fn filler_boundary(items: &[(f64, bool)], lo: f64, hi: f64) -> f64 {
    match items.first() {
        None => lo + (hi - lo) / 2.0,
        Some(&(v, _)) => {
            if v - lo >= hi - v {
                lo + (v - lo) / 2.0
            } else {
                v + (hi - v) / 2.0
            }
        }
    }
}
