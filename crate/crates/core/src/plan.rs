//! Closed-form annotation budgets for a relative-precision target.
//!
//! A target of `r` at confidence `c` asks for `p ± r·p` with probability `c`,
//! i.e. a standard error of `r·p / z(c)`. Finite population corrections are
//! dropped throughout, so budgets are slightly conservative for small pools.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{z_value, DEFAULT_CONFIDENCE};
use crate::model::StratumProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTarget {
    /// Relative half-width, e.g. `0.20` for "within 20%".
    pub relative_halfwidth: f64,
    pub confidence: f64,
}

impl PrecisionTarget {
    pub fn new(relative_halfwidth: f64, confidence: f64) -> Result<Self> {
        if !(relative_halfwidth > 0.0 && relative_halfwidth < 1.0) {
            return Err(Error::invalid(format!(
                "relative half-width must lie in (0, 1), got {relative_halfwidth}"
            )));
        }
        z_value(confidence)?;
        Ok(PrecisionTarget {
            relative_halfwidth,
            confidence,
        })
    }

    pub fn within(relative_halfwidth: f64) -> Result<Self> {
        PrecisionTarget::new(relative_halfwidth, DEFAULT_CONFIDENCE)
    }

    /// Coefficient of variation that meets the target: `r / z`.
    pub fn required_cv(&self) -> f64 {
        self.relative_halfwidth / z_value(self.confidence).expect("validated confidence")
    }
}

/// Standard error needed to report `p ± r·p` at the target confidence.
pub fn required_se(p: f64, target: &PrecisionTarget) -> Result<f64> {
    let target = PrecisionTarget::new(target.relative_halfwidth, target.confidence)?;
    if !(p > 0.0) {
        return Err(Error::invalid(format!("prevalence must be positive, got {p}")));
    }
    Ok(p * target.required_cv())
}

fn ceil_count(x: f64) -> u64 {
    x.ceil() as u64
}

/// Annotations a simple random sample needs: `ceil(p(1-p) / SE_req^2)`.
pub fn samples_needed_random(p: f64, target: &PrecisionTarget) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "prevalence must lie strictly between 0 and 1, got {p}"
        )));
    }
    let se = required_se(p, target)?;
    Ok(ceil_count(p * (1.0 - p) / (se * se)))
}

fn overall_prevalence(profile: &[StratumProfile]) -> Result<(f64, u64)> {
    let total: u64 = profile.iter().map(|s| s.population).sum();
    if total == 0 {
        return Err(Error::invalid("strata cover no items"));
    }
    for s in profile {
        if !(0.0..=1.0).contains(&s.prevalence) {
            return Err(Error::invalid(format!(
                "stratum prevalence {} outside [0, 1]",
                s.prevalence
            )));
        }
    }
    let p = profile
        .iter()
        .map(|s| s.population as f64 / total as f64 * s.prevalence)
        .sum();
    Ok((p, total))
}

/// Budget for a stratified design that assigns fraction `shares[h]` of the
/// total to stratum `h`: `(1/SE_req^2) · sum_h W_h^2 p_h(1-p_h) / c_h`.
///
/// The result is floored at the number of strata with a positive share.
pub fn samples_needed_for_shares(
    profile: &[StratumProfile],
    shares: &[f64],
    target: &PrecisionTarget,
) -> Result<u64> {
    if shares.len() != profile.len() {
        return Err(Error::invalid("one share per stratum is required"));
    }
    let (p, total) = overall_prevalence(profile)?;
    if p == 0.0 {
        return Err(Error::UndefinedTarget);
    }
    let se = required_se(p, target)?;
    let mut sum = 0.0;
    for (s, &c) in profile.iter().zip(shares) {
        let w = s.population as f64 / total as f64;
        let v = w * w * s.prevalence * (1.0 - s.prevalence);
        if v == 0.0 {
            continue;
        }
        if !(c > 0.0) {
            return Err(Error::invalid(
                "a stratum with non-zero variance receives no share of the budget",
            ));
        }
        sum += v / c;
    }
    let floor = shares.iter().filter(|&&c| c > 0.0).count() as u64;
    Ok(ceil_count(sum / (se * se)).max(floor))
}

/// Equal allocation across the non-empty strata.
pub fn samples_needed_stratified_equal(
    profile: &[StratumProfile],
    target: &PrecisionTarget,
) -> Result<u64> {
    let nonempty = profile.iter().filter(|s| s.population > 0).count();
    let shares: Vec<f64> = profile
        .iter()
        .map(|s| if s.population > 0 { 1.0 / nonempty as f64 } else { 0.0 })
        .collect();
    samples_needed_for_shares(profile, &shares, target)
}

/// Optimal-allocation shares `N_h σ_h / sum_k N_k σ_k`, or `None` when every
/// stratum has zero variance.
pub fn neyman_shares(profile: &[StratumProfile]) -> Option<Vec<f64>> {
    let weights: Vec<f64> = profile
        .iter()
        .map(|s| s.population as f64 * s.sigma())
        .collect();
    let sum: f64 = weights.iter().sum();
    (sum > 0.0).then(|| weights.iter().map(|w| w / sum).collect())
}

/// Optimal (Neyman) allocation. When no stratum has any variance the
/// estimator is exact with one annotation per non-empty stratum, which is
/// what is returned.
pub fn samples_needed_stratified_optimal(
    profile: &[StratumProfile],
    target: &PrecisionTarget,
) -> Result<u64> {
    let (p, _) = overall_prevalence(profile)?;
    if p == 0.0 {
        return Err(Error::UndefinedTarget);
    }
    match neyman_shares(profile) {
        Some(shares) => samples_needed_for_shares(profile, &shares, target),
        None => Ok(profile.iter().filter(|s| s.population > 0).count() as u64),
    }
}

/// Analytic variance of the stratified estimator for a concrete allocation,
/// without finite population correction. Infinite if a stratum with
/// variance receives nothing.
pub fn stratified_variance(profile: &[StratumProfile], allocation: &[u64]) -> f64 {
    let total: u64 = profile.iter().map(|s| s.population).sum();
    profile
        .iter()
        .zip(allocation)
        .map(|(s, &n)| {
            let w = s.population as f64 / total as f64;
            let v = w * w * s.prevalence * (1.0 - s.prevalence);
            if v == 0.0 {
                0.0
            } else if n == 0 {
                f64::INFINITY
            } else {
                v / n as f64
            }
        })
        .sum()
}

/// Variance under real-valued optimal allocation of `n` annotations:
/// `(sum_h W_h σ_h)^2 / n`.
pub fn optimal_allocation_variance(profile: &[StratumProfile], n: f64) -> f64 {
    let total: u64 = profile.iter().map(|s| s.population).sum();
    let s: f64 = profile
        .iter()
        .map(|p| p.population as f64 / total as f64 * p.sigma())
        .sum();
    s * s / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn prof(pairs: &[(u64, f64)]) -> Vec<StratumProfile> {
        pairs
            .iter()
            .map(|&(population, prevalence)| StratumProfile { population, prevalence })
            .collect()
    }

    #[test]
    fn required_se_examples() {
        let t = PrecisionTarget::within(0.20).unwrap();
        assert_abs_diff_eq!(required_se(0.1, &t).unwrap(), 0.0102043, epsilon = 5e-8);
        assert_abs_diff_eq!(required_se(0.041, &t).unwrap(), 0.0041838, epsilon = 5e-8);
        assert!(required_se(0.0, &t).is_err());
        assert!(PrecisionTarget::within(0.0).is_err());
        let bad = PrecisionTarget { relative_halfwidth: 0.0, confidence: 0.95 };
        assert!(required_se(0.5, &bad).is_err());
    }

    #[test]
    fn random_table_cells() {
        let t = |r| PrecisionTarget::within(r).unwrap();
        assert_eq!(samples_needed_random(0.1, &t(0.20)).unwrap(), 865);
        assert_eq!(samples_needed_random(0.059, &t(0.20)).unwrap(), 1532);
        assert_eq!(samples_needed_random(0.001, &t(0.05)).unwrap(), 1_535_047);
        assert!(samples_needed_random(0.0, &t(0.2)).is_err());
        assert!(samples_needed_random(1.0, &t(0.2)).is_err());
    }

    #[test]
    fn single_stratum_matches_random() {
        let t = PrecisionTarget::within(0.2).unwrap();
        let p = prof(&[(1000, 0.041)]);
        let r = samples_needed_random(0.041, &t).unwrap();
        assert_eq!(samples_needed_stratified_equal(&p, &t).unwrap(), r);
        assert_eq!(samples_needed_stratified_optimal(&p, &t).unwrap(), r);
    }

    #[test]
    fn two_strata_equal_closed_form() {
        let t = PrecisionTarget::within(0.2).unwrap();
        let p = prof(&[(500, 0.0), (500, 0.10)]);
        let se = required_se(0.05, &t).unwrap();
        let expect = (2.0 / (se * se) * (0.25 * 0.09)).ceil() as u64;
        assert_eq!(samples_needed_stratified_equal(&p, &t).unwrap(), expect);
    }

    #[test]
    fn degenerate_strata_floor() {
        let t = PrecisionTarget::within(0.2).unwrap();
        let p = prof(&[(50, 0.0), (30, 1.0), (20, 0.0)]);
        assert_eq!(samples_needed_stratified_equal(&p, &t).unwrap(), 3);
        assert_eq!(samples_needed_stratified_optimal(&p, &t).unwrap(), 3);
        let zero = prof(&[(50, 0.0), (50, 0.0)]);
        assert!(matches!(
            samples_needed_stratified_equal(&zero, &t),
            Err(Error::UndefinedTarget)
        ));
    }

    #[test]
    fn symmetric_strata_optimal_equals_equal() {
        let t = PrecisionTarget::within(0.1).unwrap();
        let p = prof(&[(250, 0.2), (250, 0.8), (250, 0.2), (250, 0.8)]);
        assert_eq!(
            samples_needed_stratified_optimal(&p, &t).unwrap(),
            samples_needed_stratified_equal(&p, &t).unwrap()
        );
    }

    #[test]
    fn optimal_variance_matches_shares_formula() {
        let p = prof(&[(400, 0.005), (300, 0.02), (200, 0.10), (100, 0.40)]);
        let shares = neyman_shares(&p).unwrap();
        let n = 1000.0;
        let direct: f64 = p
            .iter()
            .zip(&shares)
            .map(|(s, c)| {
                let w = s.population as f64 / 1000.0;
                w * w * s.prevalence * (1.0 - s.prevalence) / (c * n)
            })
            .sum();
        assert_abs_diff_eq!(direct, optimal_allocation_variance(&p, n), epsilon = 1e-15);
    }
}
