//! Unbiased prevalence estimators: simple random sampling, stratified
//! sampling and precision over the removed set.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{EstimationMethod, LabeledSample, PrevalenceEstimate, Stratification};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Two-sided standard normal critical value, e.g. `z(0.95) = 1.959964`.
pub fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + confidence / 2.0))
}

/// Finite population correction applied to each stratum's variance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiniteCorrection {
    Off,
    /// `1 - n_h / N_h`.
    #[default]
    Standard,
    /// `(1 - n_h / N_h)^2`, as printed in some derivations of the estimator.
    Squared,
}

impl FiniteCorrection {
    fn factor(self, annotated: u64, population: u64) -> f64 {
        let f = 1.0 - annotated as f64 / population as f64;
        match self {
            FiniteCorrection::Off => 1.0,
            FiniteCorrection::Standard => f,
            FiniteCorrection::Squared => f * f,
        }
    }
}

/// Estimate with a normal-approximation interval `point ± z·se`, clamped
/// to `[0, 1]`.
pub fn build_estimate(
    point: f64,
    se: f64,
    confidence: f64,
    n_total: u64,
    method: EstimationMethod,
) -> Result<PrevalenceEstimate> {
    let z = z_value(confidence)?;
    let mut est = PrevalenceEstimate {
        point,
        se,
        cv: 0.0,
        ci_low: (point - z * se).max(0.0),
        ci_high: (point + z * se).min(1.0),
        confidence,
        n_total,
        method,
    };
    est.cv = coefficient_of_variation(&est);
    Ok(est)
}

/// Random-sampling prevalence estimate with a Wald interval.
pub fn estimate_random(sample: LabeledSample, confidence: f64) -> Result<PrevalenceEstimate> {
    let sample = LabeledSample::new(sample.positives, sample.total)?;
    let n = sample.total as f64;
    let p = sample.positives as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    build_estimate(p, se, confidence, sample.total, EstimationMethod::Random)
}

/// Precision of the removed set, estimated from a random sample of removals.
///
/// The arithmetic is that of [`estimate_random`]; only the population the
/// sample was drawn from differs.
pub fn estimate_precision(sample: LabeledSample, confidence: f64) -> Result<PrevalenceEstimate> {
    estimate_random(sample, confidence)
}

/// Stratified estimate `sum_h W_h p_h` with variance
/// `sum_h W_h^2 fpc_h p_h (1 - p_h) / n_h`.
///
/// Strata with no items carry zero weight and are skipped.
pub fn estimate_stratified(
    strat: &Stratification,
    confidence: f64,
    fpc: FiniteCorrection,
    method: EstimationMethod,
) -> Result<PrevalenceEstimate> {
    z_value(confidence)?;
    let total = strat.total_size;
    if total == 0 {
        return Err(Error::invalid("stratification covers an empty pool"));
    }
    let mut point = 0.0;
    let mut variance = 0.0;
    for s in &strat.strata {
        if s.population == 0 {
            if s.annotated > 0 {
                return Err(Error::invalid(format!(
                    "stratum {} is empty but has annotations",
                    s.index
                )));
            }
            log::debug!("stratum {} is empty; dropped from the estimator", s.index);
            continue;
        }
        let p = s.p_hat().ok_or(Error::UnsampledStratum { stratum: s.index })?;
        let w = s.weight(total);
        point += w * p;
        variance +=
            w * w * fpc.factor(s.annotated, s.population) * (p * (1.0 - p) / s.annotated as f64);
    }
    build_estimate(
        point,
        variance.max(0.0).sqrt(),
        confidence,
        strat.total_annotated(),
        method,
    )
}

/// `se / point`, with `+inf` when the point is zero but the error is not.
pub fn coefficient_of_variation(est: &PrevalenceEstimate) -> f64 {
    if est.point == 0.0 {
        if est.se == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        est.se / est.point
    }
}
