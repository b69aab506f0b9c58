use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Domain};
use crate::model::PooledItem;

/// Parameters of a synthetic labelled pool.
///
/// Scores are logit-normal: the latent score is `N(+separation/2, spread)`
/// for positives and `N(-separation/2, spread)` for negatives, passed through
/// the logistic function. `separation = 0` makes scores independent of
/// labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPoolSpec {
    pub size: usize,
    pub prevalence: f64,
    pub separation: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    /// Use exactly `round(size * prevalence)` positives instead of
    /// independent Bernoulli labels.
    #[serde(default)]
    pub exact_counts: bool,
    pub seed: u64,
}

fn default_spread() -> f64 {
    1.0
}

impl SyntheticPoolSpec {
    pub fn new(size: usize, prevalence: f64, separation: f64, seed: u64) -> Self {
        SyntheticPoolSpec {
            size,
            prevalence,
            separation,
            spread: 1.0,
            exact_counts: false,
            seed,
        }
    }

    pub fn exact(mut self) -> Self {
        self.exact_counts = true;
        self
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_pool(spec: &SyntheticPoolSpec) -> Result<Vec<PooledItem>> {
    if spec.size == 0 {
        return Err(Error::invalid("pool size must be positive"));
    }
    if !(spec.prevalence > 0.0 && spec.prevalence < 1.0) {
        return Err(Error::invalid(format!(
            "prevalence must lie in (0, 1), got {}",
            spec.prevalence
        )));
    }
    if !(spec.separation >= 0.0 && spec.spread > 0.0) {
        return Err(Error::invalid("separation must be >= 0 and spread > 0"));
    }
    if spec.prevalence * (spec.size as f64) < 1.0 {
        log::warn!(
            "pool of {} at prevalence {} expects fewer than one positive",
            spec.size,
            spec.prevalence
        );
    }
    let mut rng = derived_rng(spec.seed, Domain::Pool, 0);
    let labels: Vec<bool> = if spec.exact_counts {
        let k = (spec.size as f64 * spec.prevalence).round() as usize;
        let mut l = vec![false; spec.size];
        for i in index::sample(&mut rng, spec.size, k) {
            l[i] = true;
        }
        l
    } else {
        (0..spec.size).map(|_| rng.random_bool(spec.prevalence)).collect()
    };
    let half = spec.separation / 2.0;
    let pos = Normal::new(half, spec.spread).map_err(|e| Error::invalid(e.to_string()))?;
    let neg = Normal::new(-half, spec.spread).map_err(|e| Error::invalid(e.to_string()))?;
    let width = spec.size.to_string().len();
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let latent = if label { pos.sample(&mut rng) } else { neg.sample(&mut rng) };
            PooledItem {
                id: format!("item-{i:0width$}"),
                score: logistic(latent).clamp(0.0, 1.0),
                label: Some(label),
                filtered: None,
            }
        })
        .collect())
}
