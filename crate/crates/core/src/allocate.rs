//! Annotation budget allocation across strata and the two-phase pilot
//! procedure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Domain};
use crate::model::{bernoulli_sd, PooledItem, Stratification, StratumProfile};
use crate::plan::{samples_needed_for_shares, PrecisionTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationKind {
    Equal,
    Optimal,
    Pilot,
}

/// Per-stratum annotation counts aligned with a [`Stratification`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub per_stratum: Vec<u64>,
    pub total: u64,
    pub kind: AllocationKind,
}

impl Allocation {
    fn new(per_stratum: Vec<u64>, kind: AllocationKind) -> Self {
        let total = per_stratum.iter().sum();
        Allocation {
            per_stratum,
            total,
            kind,
        }
    }
}

/// How a command or experiment distributes its budget, written `equal`,
/// `neyman` (also `optimal`) or `pilot:M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationSpec {
    Equal,
    /// Neyman allocation from the pool's true labels; simulation only.
    Neyman,
    Pilot { per_stratum: u64 },
}

impl fmt::Display for AllocationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationSpec::Equal => f.write_str("equal"),
            AllocationSpec::Neyman => f.write_str("neyman"),
            AllocationSpec::Pilot { per_stratum } => write!(f, "pilot:{per_stratum}"),
        }
    }
}

impl FromStr for AllocationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(AllocationSpec::Equal),
            "neyman" | "optimal" => Ok(AllocationSpec::Neyman),
            _ => {
                let m = s
                    .strip_prefix("pilot:")
                    .ok_or_else(|| Error::invalid(format!("unknown allocation {s:?}")))?;
                let per_stratum: u64 = m
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad pilot size {m:?}")))?;
                if per_stratum == 0 {
                    return Err(Error::invalid("pilot size must be at least 1"));
                }
                Ok(AllocationSpec::Pilot { per_stratum })
            }
        }
    }
}

fn check_capacity(populations: &[u64], n: u64) -> Result<()> {
    let capacity: u64 = populations.iter().sum();
    if n > capacity {
        return Err(Error::invalid(format!(
            "budget {n} exceeds the {capacity} items available"
        )));
    }
    Ok(())
}

/// Add `n` units, always to the open strata holding the fewest, so the
/// result is level up to capacity; ties in the last step go to the lowest
/// indices.
fn water_fill(populations: &[u64], alloc: &mut [u64], mut n: u64) {
    while n > 0 {
        let open: Vec<usize> = (0..populations.len())
            .filter(|&h| alloc[h] < populations[h])
            .collect();
        let Some(level) = open.iter().map(|&h| alloc[h]).min() else {
            return;
        };
        let lowest: Vec<usize> = open.iter().copied().filter(|&h| alloc[h] == level).collect();
        let ceiling = open
            .iter()
            .map(|&h| alloc[h])
            .filter(|&a| a > level)
            .chain(lowest.iter().map(|&h| populations[h]))
            .min()
            .expect("open strata exist");
        let k = lowest.len() as u64;
        let step = ceiling - level;
        if step * k <= n {
            for &h in &lowest {
                alloc[h] += step;
            }
            n -= step * k;
        } else {
            let (base, extra) = (n / k, n % k);
            for (i, &h) in lowest.iter().enumerate() {
                alloc[h] += base + u64::from((i as u64) < extra);
            }
            n = 0;
        }
    }
}

/// Equal allocation: `floor(n/L)` each, remainder to the lowest strata, and
/// any stratum too small to absorb its share hands the surplus on.
pub fn allocate_equal(strat: &Stratification, n: u64) -> Result<Allocation> {
    let pops = strat.populations();
    let nonempty = strat.num_nonempty() as u64;
    if n < nonempty {
        return Err(Error::invalid(format!(
            "budget {n} is smaller than the {nonempty} non-empty strata"
        )));
    }
    check_capacity(&pops, n)?;
    let mut alloc = vec![0; pops.len()];
    water_fill(&pops, &mut alloc, n);
    Ok(Allocation::new(alloc, AllocationKind::Equal))
}

/// Largest-remainder rounding of `quotas` to integers summing to `total`.
fn largest_remainder(quotas: &[f64], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut left = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..quotas.len()).filter(|&i| quotas[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Neyman allocation `n_h ∝ N_h σ_h` from explicit standard deviations.
///
/// Strata that cannot hold their share are filled to capacity and the
/// surplus is re-split proportionally over the rest.
pub fn allocate_neyman_with(populations: &[u64], sigmas: &[f64], n: u64) -> Result<Allocation> {
    if populations.len() != sigmas.len() {
        return Err(Error::invalid("one standard deviation per stratum is required"));
    }
    if n == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    check_capacity(populations, n)?;
    let weights: Vec<f64> = populations
        .iter()
        .zip(sigmas)
        .map(|(&np, &s)| np as f64 * s)
        .collect();
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::DegenerateAllocation);
    }

    let l = populations.len();
    let mut alloc = vec![0u64; l];
    let mut saturated = vec![false; l];
    loop {
        let remaining = n - (0..l).filter(|&h| saturated[h]).map(|h| populations[h]).sum::<u64>();
        let sum_w: f64 = (0..l).filter(|&h| !saturated[h]).map(|h| weights[h]).sum();
        if sum_w <= 0.0 {
            break;
        }
        let quotas: Vec<f64> = (0..l)
            .map(|h| {
                if saturated[h] {
                    0.0
                } else {
                    remaining as f64 * weights[h] / sum_w
                }
            })
            .collect();
        let rounded = largest_remainder(&quotas, remaining);
        let over: Vec<usize> = (0..l)
            .filter(|&h| !saturated[h] && rounded[h] > populations[h])
            .collect();
        if over.is_empty() {
            for h in (0..l).filter(|&h| !saturated[h]) {
                alloc[h] = rounded[h];
            }
            break;
        }
        for h in over {
            saturated[h] = true;
            alloc[h] = populations[h];
        }
    }
    let placed: u64 = alloc.iter().sum();
    if placed < n {
        // every stratum with variance is exhausted; the rest goes where it fits
        water_fill(populations, &mut alloc, n - placed);
    }
    Ok(Allocation::new(alloc, AllocationKind::Optimal))
}

/// Neyman allocation using each stratum's annotated standard deviation.
pub fn allocate_neyman(strat: &Stratification, n: u64) -> Result<Allocation> {
    let sigmas = strat
        .strata
        .iter()
        .map(|s| match s.sigma_hat() {
            Some(sd) => Ok(sd),
            None if s.population == 0 => Ok(0.0),
            None => Err(Error::UnsampledStratum { stratum: s.index }),
        })
        .collect::<Result<Vec<_>>>()?;
    allocate_neyman_with(&strat.populations(), &sigmas, n)
}

/// A source of ground-truth labels that charges for every distinct item.
pub trait AnnotationOracle {
    fn annotate(&mut self, id: &str) -> Result<bool>;

    /// Distinct items labelled so far.
    fn consumed(&self) -> u64;
}

/// Id lookup over a labelled pool, built once and shared by many oracles.
#[derive(Debug, Clone)]
pub struct LabelBook {
    index: HashMap<String, usize>,
    labels: Vec<Option<bool>>,
}

impl LabelBook {
    pub fn from_pool(pool: &[PooledItem]) -> Result<Self> {
        let mut index = HashMap::with_capacity(pool.len());
        for (i, item) in pool.iter().enumerate() {
            if index.insert(item.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate item id {:?}", item.id)));
            }
        }
        Ok(LabelBook {
            index,
            labels: pool.iter().map(|i| i.label).collect(),
        })
    }

    pub fn oracle(&self) -> PoolOracle<'_> {
        PoolOracle {
            book: self,
            revealed: HashSet::new(),
        }
    }
}

/// Simulated annotator: reveals the pool's hidden label.
#[derive(Debug, Clone)]
pub struct PoolOracle<'a> {
    book: &'a LabelBook,
    revealed: HashSet<usize>,
}

impl AnnotationOracle for PoolOracle<'_> {
    fn annotate(&mut self, id: &str) -> Result<bool> {
        let &i = self
            .book
            .index
            .get(id)
            .ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        let label = self.book.labels[i]
            .ok_or_else(|| Error::invalid(format!("item {id:?} has no label to reveal")))?;
        self.revealed.insert(i);
        Ok(label)
    }

    fn consumed(&self) -> u64 {
        self.revealed.len() as u64
    }
}

/// Uniform sampling without replacement from a fixed member list.
#[derive(Debug, Clone)]
pub(crate) struct StratumSampler {
    members: Vec<usize>,
    drawn: usize,
}

impl StratumSampler {
    pub(crate) fn new(members: Vec<usize>) -> Self {
        StratumSampler { members, drawn: 0 }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        if self.drawn == self.members.len() {
            return None;
        }
        let j = rng.random_range(self.drawn..self.members.len());
        self.members.swap(self.drawn, j);
        self.drawn += 1;
        Some(self.members[self.drawn - 1])
    }
}

/// Annotation state of one stratified sampling run.
pub(crate) struct Annotator<'p> {
    pool: &'p [PooledItem],
    samplers: Vec<StratumSampler>,
    /// (annotated, positives) per stratum
    pub(crate) tallies: Vec<(u64, u64)>,
}

impl<'p> Annotator<'p> {
    pub(crate) fn new(pool: &'p [PooledItem], strat: &Stratification) -> Self {
        let samplers: Vec<_> = strat
            .members(pool)
            .into_iter()
            .map(StratumSampler::new)
            .collect();
        let tallies = vec![(0, 0); samplers.len()];
        Annotator {
            pool,
            samplers,
            tallies,
        }
    }

    /// Annotate up to `count` fresh items of stratum `h`; returns how many
    /// were actually available.
    pub(crate) fn annotate<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        count: u64,
        rng: &mut R,
        oracle: &mut dyn AnnotationOracle,
    ) -> Result<u64> {
        let mut done = 0;
        while done < count {
            let Some(i) = self.samplers[h].draw(rng) else {
                break;
            };
            let label = oracle.annotate(&self.pool[i].id)?;
            self.tallies[h].0 += 1;
            self.tallies[h].1 += u64::from(label);
            done += 1;
        }
        Ok(done)
    }
}

/// Annotate `allocation.per_stratum[h]` uniformly drawn items of every
/// stratum and return the stratification carrying the tallies.
pub fn annotate_allocation(
    pool: &[PooledItem],
    strat: &Stratification,
    allocation: &Allocation,
    seed: u64,
    oracle: &mut dyn AnnotationOracle,
) -> Result<Stratification> {
    if allocation.per_stratum.len() != strat.num_strata() {
        return Err(Error::invalid("allocation does not match the stratification"));
    }
    let mut rng = derived_rng(seed, Domain::Sampling, 0);
    let mut ann = Annotator::new(pool, strat);
    for (h, &k) in allocation.per_stratum.iter().enumerate() {
        let got = ann.annotate(h, k, &mut rng, oracle)?;
        if got < k {
            return Err(Error::invalid(format!(
                "stratum {} holds {got} items but {k} were allocated",
                h + 1
            )));
        }
    }
    strat.clone().with_annotations(&ann.tallies)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub pilot_per_stratum: u64,
    #[serde(default = "default_true")]
    pub pseudocounts: bool,
    pub total_budget: u64,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

/// Standard deviations used to allocate after the pilot. With pseudocounts
/// each stratum's rate is `(positives + 1) / (annotated + 2)`.
pub fn pilot_sigmas(tallies: &[(u64, u64)], pseudocounts: bool) -> Vec<f64> {
    tallies
        .iter()
        .map(|&(n, pos)| {
            if pseudocounts {
                bernoulli_sd((pos + 1) as f64 / (n + 2) as f64)
            } else if n == 0 {
                0.0
            } else {
                bernoulli_sd(pos as f64 / n as f64)
            }
        })
        .collect()
}

/// Phase-2 targets: the Neyman allocation of `budget` over the pilot
/// standard deviations.
pub fn pilot_targets(
    populations: &[u64],
    tallies: &[(u64, u64)],
    budget: u64,
    pseudocounts: bool,
) -> Result<Allocation> {
    let mut sigmas = pilot_sigmas(tallies, pseudocounts);
    for (s, &np) in sigmas.iter_mut().zip(populations) {
        if np == 0 {
            *s = 0.0;
        }
    }
    let capacity: u64 = populations.iter().sum();
    allocate_neyman_with(populations, &sigmas, budget.min(capacity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotOutcome {
    /// Realized per-stratum annotation counts (pilot plus top-up).
    pub allocation: Allocation,
    /// The input stratification carrying the realized tallies.
    pub stratification: Stratification,
    pub pilot: Vec<u64>,
    pub targets: Vec<u64>,
    /// 1-based indices of strata annotated in full before reaching target.
    pub exhausted: Vec<usize>,
}

/// A pilot run between its two phases.
pub struct PilotRun<'p> {
    annotator: Annotator<'p>,
    strat: Stratification,
    rng: ChaCha8Rng,
    pseudocounts: bool,
    pilot: Vec<u64>,
}

impl<'p> PilotRun<'p> {
    /// Phase 1: annotate `min(m, N_h)` uniformly drawn items per stratum.
    pub fn start(
        pool: &'p [PooledItem],
        strat: &Stratification,
        pilot_per_stratum: u64,
        pseudocounts: bool,
        seed: u64,
        oracle: &mut dyn AnnotationOracle,
    ) -> Result<Self> {
        if pilot_per_stratum == 0 {
            return Err(Error::invalid("pilot size must be at least 1"));
        }
        let rng = derived_rng(seed, Domain::Sampling, 0);
        Self::start_with_rng(pool, strat, pilot_per_stratum, pseudocounts, rng, oracle)
    }

    pub(crate) fn start_with_rng(
        pool: &'p [PooledItem],
        strat: &Stratification,
        pilot_per_stratum: u64,
        pseudocounts: bool,
        mut rng: ChaCha8Rng,
        oracle: &mut dyn AnnotationOracle,
    ) -> Result<Self> {
        let mut annotator = Annotator::new(pool, strat);
        for h in 0..strat.num_strata() {
            annotator.annotate(h, pilot_per_stratum, &mut rng, oracle)?;
        }
        let pilot = annotator.tallies.iter().map(|t| t.0).collect();
        Ok(PilotRun {
            annotator,
            strat: strat.clone(),
            rng,
            pseudocounts,
            pilot,
        })
    }

    pub fn tallies(&self) -> &[(u64, u64)] {
        &self.annotator.tallies
    }

    pub fn sigmas(&self) -> Vec<f64> {
        pilot_sigmas(&self.annotator.tallies, self.pseudocounts)
    }

    /// Total budget (pilot included) the pilot's own allocation would need
    /// to meet `target`, judged on the pilot's stratum rates.
    pub fn planned_budget(&self, target: &PrecisionTarget) -> Result<u64> {
        let sigmas = self.sigmas();
        let profile: Vec<StratumProfile> = self
            .strat
            .strata
            .iter()
            .zip(&self.annotator.tallies)
            .map(|(s, &(n, pos))| StratumProfile {
                population: s.population,
                prevalence: if self.pseudocounts {
                    (pos + 1) as f64 / (n + 2) as f64
                } else if n == 0 {
                    0.0
                } else {
                    pos as f64 / n as f64
                },
            })
            .collect();
        let weights: Vec<f64> = profile
            .iter()
            .zip(&sigmas)
            .map(|(p, s)| p.population as f64 * s)
            .collect();
        let sum: f64 = weights.iter().sum();
        if sum == 0.0 {
            return Err(Error::DegenerateAllocation);
        }
        let shares: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let capacity = self.strat.total_size;
        Ok(samples_needed_for_shares(&profile, &shares, target)?.min(capacity))
    }

    /// Phase 2: top every stratum up to its share of `budget`. Strata whose
    /// pilot already meets the share get nothing more, and the unused part
    /// of their share is not handed to other strata.
    pub fn finish(mut self, budget: u64, oracle: &mut dyn AnnotationOracle) -> Result<PilotOutcome> {
        let targets = pilot_targets(
            &self.strat.populations(),
            &self.annotator.tallies,
            budget,
            self.pseudocounts,
        )?;
        let mut exhausted = Vec::new();
        for (h, &target) in targets.per_stratum.iter().enumerate() {
            let have = self.annotator.tallies[h].0;
            if target > have {
                let got = self
                    .annotator
                    .annotate(h, target - have, &mut self.rng, oracle)?;
                if got < target - have {
                    exhausted.push(h + 1);
                }
            }
        }
        let realized: Vec<u64> = self.annotator.tallies.iter().map(|t| t.0).collect();
        let stratification = self.strat.with_annotations(&self.annotator.tallies)?;
        Ok(PilotOutcome {
            allocation: Allocation::new(realized, AllocationKind::Pilot),
            stratification,
            pilot: self.pilot,
            targets: targets.per_stratum,
            exhausted,
        })
    }
}

/// The two-phase pilot procedure with a fixed total budget.
///
/// Pilot draws count against the budget; when `L·m` exceeds it the pilot
/// still completes and the overshoot is spent.
pub fn run_pilot(
    pool: &[PooledItem],
    strat: &Stratification,
    cfg: &PilotConfig,
    oracle: &mut dyn AnnotationOracle,
) -> Result<PilotOutcome> {
    if cfg.total_budget == 0 {
        return Err(Error::invalid("total budget must be at least 1"));
    }
    PilotRun::start(pool, strat, cfg.pilot_per_stratum, cfg.pseudocounts, cfg.seed, oracle)?
        .finish(cfg.total_budget, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stratify::bin_equal_width;

    fn strat_with(pops: &[u64]) -> Stratification {
        let l = pops.len();
        let mut pool = Vec::new();
        for (h, &n) in pops.iter().enumerate() {
            let score = (h as f64 + 0.5) / l as f64;
            for i in 0..n {
                pool.push(PooledItem::labeled(format!("s{h}-{i}"), score, false));
            }
        }
        bin_equal_width(&pool, l).unwrap()
    }

    #[test]
    fn equal_exact_and_remainder() {
        assert_eq!(allocate_equal(&strat_with(&[20; 4]), 40).unwrap().per_stratum, vec![10; 4]);
        assert_eq!(allocate_equal(&strat_with(&[20; 3]), 10).unwrap().per_stratum, vec![4, 3, 3]);
    }

    #[test]
    fn equal_clamps_and_redistributes() {
        let a = allocate_equal(&strat_with(&[5, 1000]), 20).unwrap();
        assert_eq!(a.per_stratum, vec![5, 15]);
        assert_eq!(a.total, 20);
        assert_eq!(a.kind, AllocationKind::Equal);
    }

    #[test]
    fn equal_errors() {
        assert!(allocate_equal(&strat_with(&[5, 5, 5]), 2).is_err());
        assert!(allocate_equal(&strat_with(&[5, 5]), 11).is_err());
        // empty strata do not need a share
        assert_eq!(allocate_equal(&strat_with(&[5, 0, 5]), 2).unwrap().per_stratum, vec![1, 0, 1]);
    }

    #[test]
    fn neyman_examples() {
        let a = allocate_neyman_with(&[100, 100], &[0.3, 0.1], 40).unwrap();
        assert_eq!(a.per_stratum, vec![30, 10]);
        let a = allocate_neyman_with(&[300, 100], &[0.2, 0.6], 60).unwrap();
        assert_eq!(a.per_stratum, vec![30, 30]);
        let a = allocate_neyman_with(&[100, 100], &[0.5, 0.0], 10).unwrap();
        assert_eq!(a.per_stratum, vec![10, 0]);
    }

    #[test]
    fn neyman_degenerate_and_clamped() {
        assert!(matches!(
            allocate_neyman_with(&[10, 10], &[0.0, 0.0], 5),
            Err(Error::DegenerateAllocation)
        ));
        // first stratum wants 83 of 100 but only holds 20
        let a = allocate_neyman_with(&[20, 1000, 1000], &[0.5, 0.001, 0.001], 100).unwrap();
        assert_eq!(a.per_stratum[0], 20);
        assert_eq!(a.total, 100);
        assert_eq!(a.per_stratum[1], 40);
        // all variance strata saturated, remainder placed elsewhere
        let a = allocate_neyman_with(&[3, 50], &[0.5, 0.0], 10).unwrap();
        assert_eq!(a.per_stratum, vec![3, 7]);
    }

    #[test]
    fn largest_remainder_ties_go_low() {
        assert_eq!(largest_remainder(&[1.5, 1.5, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.7, 0.1], 1), vec![0, 1, 0]);
    }

    #[test]
    fn pilot_target_hand_computation() {
        // sigma = (sqrt(1/52 * 51/52), sqrt(3/52 * 49/52)) ~ (0.1374, 0.2332)
        let sig = pilot_sigmas(&[(50, 0), (50, 2)], true);
        assert!((sig[0] - 0.1374).abs() < 1e-4 && (sig[1] - 0.2332).abs() < 1e-4);
        let t = pilot_targets(&[1000, 1000], &[(50, 0), (50, 2)], 300, true).unwrap();
        assert_eq!(t.per_stratum, vec![111, 189]);
    }

    #[test]
    fn all_positive_pilot_still_allocated() {
        let t = pilot_targets(&[100, 100], &[(10, 10), (10, 3)], 50, true).unwrap();
        assert!(t.per_stratum[0] > 0);
        let raw = pilot_targets(&[100, 100], &[(10, 10), (10, 3)], 50, false).unwrap();
        assert_eq!(raw.per_stratum[0], 0);
    }

    #[test]
    fn oracle_counts_distinct_items() {
        let pool = vec![
            PooledItem::labeled("a", 0.1, true),
            PooledItem::labeled("b", 0.2, false),
            PooledItem::new("c", 0.3),
        ];
        let book = LabelBook::from_pool(&pool).unwrap();
        let mut o = book.oracle();
        assert!(o.annotate("a").unwrap());
        assert!(o.annotate("a").unwrap());
        assert_eq!(o.consumed(), 1);
        assert!(!o.annotate("b").unwrap());
        assert_eq!(o.consumed(), 2);
        assert!(o.annotate("c").is_err());
        assert!(matches!(o.annotate("zzz"), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn allocation_spec_parsing() {
        assert_eq!("pilot:50".parse::<AllocationSpec>().unwrap(), AllocationSpec::Pilot { per_stratum: 50 });
        assert_eq!("optimal".parse::<AllocationSpec>().unwrap(), AllocationSpec::Neyman);
        assert!("pilot:0".parse::<AllocationSpec>().is_err());
        assert!("greedy".parse::<AllocationSpec>().is_err());
        assert_eq!(AllocationSpec::Pilot { per_stratum: 8 }.to_string(), "pilot:8");
    }
}
