use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use super::pool::{generate_pool, SyntheticPoolSpec};
use crate::allocate::{allocate_neyman_with, AllocationSpec, AnnotationOracle, Annotator, LabelBook, PilotRun};
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Domain};
use crate::estimate::{build_estimate, coefficient_of_variation, estimate_stratified, FiniteCorrection};
use crate::model::{bernoulli_sd, EstimationMethod, PooledItem, PrevalenceEstimate, Stratification, StratumProfile};
use crate::plan::{
    samples_needed_for_shares, samples_needed_random, samples_needed_stratified_equal,
    samples_needed_stratified_optimal, PrecisionTarget,
};
use crate::stratify::{BinningMethod, BinningSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolSource {
    Synthetic(SyntheticPoolSpec),
    File { path: PathBuf },
}

impl PoolSource {
    pub fn load(&self) -> Result<Vec<PooledItem>> {
        match self {
            PoolSource::Synthetic(spec) => generate_pool(spec),
            PoolSource::File { path } => Ok(crate::io::ingest_pool(path)?.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pool: PoolSource,
    pub binning: BinningMethod,
    /// Strata counts to sweep.
    pub strata: Vec<usize>,
    pub allocations: Vec<AllocationSpec>,
    pub target: PrecisionTarget,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub include_random: bool,
    #[serde(default = "default_true")]
    pub pseudocounts: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        PrecisionTarget::new(self.target.relative_halfwidth, self.target.confidence)?;
        for &l in &self.strata {
            BinningSpec::new(self.binning, l)?;
        }
        Ok(())
    }
}

/// One point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    Random,
    Stratified { strata: usize, allocation: AllocationSpec },
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Design::Random => f.write_str("random"),
            Design::Stratified { strata, allocation } => write!(f, "{allocation}@{strata}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Distinct items revealed by the oracle.
    pub annotations: u64,
    pub estimate: PrevalenceEstimate,
    #[serde(with = "crate::serde_util::ratio")]
    pub achieved_cv: f64,
    pub met_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub design: Design,
    pub trials: usize,
    pub mean_cost: f64,
    pub sd_cost: f64,
    pub se_cost: f64,
    pub mean_estimate: f64,
    pub se_estimate: f64,
    pub met_rate: f64,
    /// Closed-form budget on the true stratum rates, where one exists.
    pub analytic_cost: Option<u64>,
}

impl PointSummary {
    pub fn from_trials(design: Design, trials: &[TrialResult], analytic_cost: Option<u64>) -> Self {
        let n = trials.len() as f64;
        let (mean_cost, sd_cost) = mean_sd(trials.iter().map(|t| t.annotations as f64));
        let (mean_estimate, sd_est) = mean_sd(trials.iter().map(|t| t.estimate.point));
        PointSummary {
            design,
            trials: trials.len(),
            mean_cost,
            sd_cost,
            se_cost: sd_cost / n.sqrt(),
            mean_estimate,
            se_estimate: sd_est / n.sqrt(),
            met_rate: trials.iter().filter(|t| t.met_target).count() as f64 / n,
            analytic_cost,
        }
    }
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_sd(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub pool_size: u64,
    pub true_prevalence: f64,
    /// Closed-form simple random sampling budget at the pool's prevalence.
    pub random_baseline: u64,
    pub points: Vec<PointSummary>,
}

impl ExperimentResults {
    pub fn point(&self, design: Design) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.design == design)
    }
}

/// A loaded pool with its stratifications, ready to run trials.
pub struct Experiment {
    config: ExperimentConfig,
    pool: Vec<PooledItem>,
    book: LabelBook,
    strata: BTreeMap<usize, Stratification>,
    whole: Stratification,
    true_prevalence: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let pool = config.pool.load()?;
        Experiment::from_pool(config, pool)
    }

    pub fn from_pool(config: ExperimentConfig, pool: Vec<PooledItem>) -> Result<Self> {
        config.validate()?;
        if pool.iter().any(|i| i.label.is_none()) {
            return Err(Error::invalid("simulation needs a fully labelled pool"));
        }
        let book = LabelBook::from_pool(&pool)?;
        let mut strata = BTreeMap::new();
        for &l in &config.strata {
            let s = BinningSpec::new(config.binning, l)?.apply(&pool)?;
            strata.insert(l, s);
        }
        let whole = Stratification::from_boundaries(&pool, vec![0.0, 1.0])?;
        let positives = pool.iter().filter(|i| i.label == Some(true)).count();
        let true_prevalence = positives as f64 / pool.len() as f64;
        Ok(Experiment {
            config,
            pool,
            book,
            strata,
            whole,
            true_prevalence,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn pool(&self) -> &[PooledItem] {
        &self.pool
    }

    pub fn true_prevalence(&self) -> f64 {
        self.true_prevalence
    }

    pub fn stratification(&self, strata: usize) -> Result<&Stratification> {
        self.strata
            .get(&strata)
            .ok_or_else(|| Error::invalid(format!("no stratification with {strata} strata configured")))
    }

    /// Stratum sizes and true positive rates.
    pub fn true_profile(&self, strata: usize) -> Result<Vec<StratumProfile>> {
        Ok(self
            .stratification(strata)?
            .clone()
            .with_true_labels(&self.pool)?
            .profile())
    }

    pub fn designs(&self) -> Vec<Design> {
        let mut out = Vec::new();
        if self.config.include_random {
            out.push(Design::Random);
        }
        for &strata in &self.config.strata {
            for &allocation in &self.config.allocations {
                out.push(Design::Stratified { strata, allocation });
            }
        }
        out
    }

    /// Trial `i` of every design draws from the same random stream.
    fn trial_rng(&self, trial_index: u64) -> ChaCha8Rng {
        derived_rng(self.config.seed, Domain::Trials, trial_index)
    }

    pub fn run_trial(&self, design: Design, trial_index: u64) -> Result<TrialResult> {
        let mut rng = self.trial_rng(trial_index);
        let mut oracle = self.book.oracle();
        let target = self.config.target;
        let estimate = match design {
            Design::Random => {
                let (est, _) = self.sequential(&self.whole, EstimationMethod::Random, &mut rng, &mut oracle)?;
                est
            }
            Design::Stratified { strata, allocation } => {
                let strat = self.stratification(strata)?;
                match allocation {
                    AllocationSpec::Equal => {
                        self.sequential(strat, EstimationMethod::StratifiedEqual, &mut rng, &mut oracle)?
                            .0
                    }
                    AllocationSpec::Neyman => {
                        let profile = self.true_profile(strata)?;
                        let n = samples_needed_stratified_optimal(&profile, &target)?
                            .min(strat.total_size);
                        let sigmas: Vec<f64> = profile.iter().map(StratumProfile::sigma).collect();
                        let alloc = allocate_neyman_with(&strat.populations(), &sigmas, n)?;
                        let mut ann = Annotator::new(&self.pool, strat);
                        for (h, &k) in alloc.per_stratum.iter().enumerate() {
                            // pure strata get no share but the estimator still needs one label
                            let k = if k == 0 && strat.strata[h].population > 0 { 1 } else { k };
                            ann.annotate(h, k, &mut rng, &mut oracle)?;
                        }
                        let done = strat.clone().with_annotations(&ann.tallies)?;
                        estimate_stratified(
                            &done,
                            target.confidence,
                            FiniteCorrection::Off,
                            EstimationMethod::StratifiedNeyman,
                        )?
                    }
                    AllocationSpec::Pilot { per_stratum } => {
                        let run = PilotRun::start_with_rng(
                            &self.pool,
                            strat,
                            per_stratum,
                            self.config.pseudocounts,
                            rng,
                            &mut oracle,
                        )?;
                        // total the pilot's shares would need on the true rates
                        let mut weights: Vec<f64> = run
                            .sigmas()
                            .iter()
                            .zip(strat.populations())
                            .map(|(s, n)| s * n as f64)
                            .collect();
                        let sum: f64 = weights.iter().sum();
                        if sum == 0.0 {
                            return Err(Error::DegenerateAllocation);
                        }
                        weights.iter_mut().for_each(|w| *w /= sum);
                        let profile = self.true_profile(strata)?;
                        let budget = samples_needed_for_shares(&profile, &weights, &target)?;
                        let outcome = run.finish(budget, &mut oracle)?;
                        estimate_stratified(
                            &outcome.stratification,
                            target.confidence,
                            FiniteCorrection::Off,
                            EstimationMethod::StratifiedPilot,
                        )?
                    }
                }
            }
        };
        let achieved_cv = coefficient_of_variation(&estimate);
        Ok(TrialResult {
            annotations: oracle.consumed(),
            met_target: achieved_cv <= target.required_cv(),
            achieved_cv,
            estimate,
        })
    }

    /// Annotate one item at a time, cycling over the strata, until the
    /// smoothed coefficient of variation reaches the target or the pool runs
    /// out. Returns the estimate and whether the stopping rule fired.
    fn sequential(
        &self,
        strat: &Stratification,
        method: EstimationMethod,
        rng: &mut ChaCha8Rng,
        oracle: &mut dyn AnnotationOracle,
    ) -> Result<(PrevalenceEstimate, bool)> {
        let goal = self.config.target.required_cv();
        let total = strat.total_size as f64;
        let weights: Vec<f64> = strat.populations().iter().map(|&n| n as f64 / total).collect();
        let active: Vec<usize> = (0..strat.num_strata()).filter(|&h| weights[h] > 0.0).collect();
        let mut ann = Annotator::new(&self.pool, strat);
        let mut stopped = false;
        'outer: loop {
            let mut progressed = false;
            for &h in &active {
                if ann.annotate(h, 1, rng, oracle)? == 0 {
                    continue;
                }
                progressed = true;
                if smoothed_cv(&weights, &ann.tallies) <= goal {
                    stopped = true;
                    break 'outer;
                }
            }
            if !progressed {
                break;
            }
        }
        let done = strat.clone().with_annotations(&ann.tallies)?;
        let est = if method == EstimationMethod::Random {
            let (n, k) = ann.tallies[0];
            let p = k as f64 / n as f64;
            build_estimate(
                p,
                (p * (1.0 - p) / n as f64).sqrt(),
                self.config.target.confidence,
                n,
                method,
            )?
        } else {
            estimate_stratified(&done, self.config.target.confidence, FiniteCorrection::Off, method)?
        };
        Ok((est, stopped))
    }

    pub fn run_design(&self, design: Design) -> Result<Vec<TrialResult>> {
        (0..self.config.trials as u64)
            .into_par_iter()
            .map(|i| self.run_trial(design, i))
            .collect()
    }

    pub fn analytic_cost(&self, design: Design) -> Result<Option<u64>> {
        let target = &self.config.target;
        Ok(match design {
            Design::Random => Some(samples_needed_random(self.true_prevalence, target)?),
            Design::Stratified { strata, allocation } => {
                let profile = self.true_profile(strata)?;
                match allocation {
                    AllocationSpec::Equal => Some(samples_needed_stratified_equal(&profile, target)?),
                    AllocationSpec::Neyman => Some(samples_needed_stratified_optimal(&profile, target)?),
                    AllocationSpec::Pilot { .. } => None,
                }
            }
        })
    }

    pub fn run(&self) -> Result<ExperimentResults> {
        let mut points = Vec::new();
        for design in self.designs() {
            let trials = self.run_design(design)?;
            log::info!("{design}: {} trials done", trials.len());
            points.push(PointSummary::from_trials(design, &trials, self.analytic_cost(design)?));
        }
        Ok(ExperimentResults {
            config: self.config.clone(),
            pool_size: self.pool.len() as u64,
            true_prevalence: self.true_prevalence,
            random_baseline: samples_needed_random(self.true_prevalence, &self.config.target)?,
            points,
        })
    }
}

/// CV of the stratified estimate with each stratum's variance computed from
/// `(positives + 1) / (annotated + 2)`, or infinity until every stratum has
/// an annotation and some positive has been seen.
fn smoothed_cv(weights: &[f64], tallies: &[(u64, u64)]) -> f64 {
    let mut point = 0.0;
    let mut var = 0.0;
    for (&w, &(n, k)) in weights.iter().zip(tallies) {
        if w == 0.0 {
            continue;
        }
        if n == 0 {
            return f64::INFINITY;
        }
        point += w * k as f64 / n as f64;
        let s = bernoulli_sd((k + 1) as f64 / (n + 2) as f64);
        var += w * w * s * s / n as f64;
    }
    if point > 0.0 {
        var.sqrt() / point
    } else {
        f64::INFINITY
    }
}
