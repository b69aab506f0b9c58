use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strata_audit::allocate::{allocate_equal, allocate_neyman, allocate_neyman_with, pilot_targets};
use strata_audit::estimate::{estimate_random, estimate_stratified, FiniteCorrection};
use strata_audit::io::{read_pool, write_pool_to};
use strata_audit::model::{EstimationMethod, LabeledSample, PooledItem, Stratification, StratumProfile};
use strata_audit::plan::{
    optimal_allocation_variance, samples_needed_random, samples_needed_stratified_equal,
    samples_needed_stratified_optimal, stratified_variance, PrecisionTarget,
};
use strata_audit::recall::recall_interval_plugin;
use strata_audit::stratify::{bin_equal_width, bin_oracle, bin_quantile};

fn pool_strategy(max: usize) -> impl Strategy<Value = Vec<PooledItem>> {
    prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, l))| PooledItem::labeled(format!("i{i}"), s, l))
            .collect()
    })
}

/// Pools whose scores are drawn from a handful of values, so ties are common.
fn tied_pool_strategy(max: usize) -> impl Strategy<Value = Vec<PooledItem>> {
    prop::collection::vec((0u8..=10, any::<bool>()), 1..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, l))| PooledItem::labeled(format!("i{i}"), s as f64 / 10.0, l))
            .collect()
    })
}

fn check_partition(pool: &[PooledItem], strat: &Stratification) {
    assert_eq!(strat.total_size as usize, pool.len());
    assert_eq!(strat.populations().iter().sum::<u64>() as usize, pool.len());
    assert_eq!(strat.boundaries.first(), Some(&0.0));
    assert_eq!(strat.boundaries.last(), Some(&1.0));
    assert!(strat.boundaries.windows(2).all(|w| w[0] <= w[1]));
    let mut counts = vec![0u64; strat.num_strata()];
    for item in pool {
        let h = strat.stratum_of(item.score);
        let (lo, hi) = (strat.boundaries[h], strat.boundaries[h + 1]);
        assert!(lo <= item.score && (item.score < hi || (h + 1 == strat.num_strata() && item.score <= hi)));
        counts[h] += 1;
    }
    assert_eq!(counts, strat.populations());
}

fn objective(strat: &Stratification, pool: &[PooledItem]) -> f64 {
    strat
        .clone()
        .with_true_labels(pool)
        .unwrap()
        .profile()
        .iter()
        .map(|s| s.population as f64 * s.sigma())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn binnings_partition_the_pool(pool in pool_strategy(300), l in 1usize..12) {
        check_partition(&pool, &bin_equal_width(&pool, l).unwrap());
        if l <= pool.len() {
            check_partition(&pool, &bin_quantile(&pool, l).unwrap());
        }
        let l2 = 1usize << (l % 4);
        check_partition(&pool, &bin_oracle(&pool, l2).unwrap());
    }

    #[test]
    fn quantile_strata_balanced_without_ties(n in 10usize..400, l in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool: Vec<PooledItem> = (0..n)
            .map(|i| PooledItem::new(format!("i{i}"), rng.random::<f64>()))
            .collect();
        prop_assume!(l <= n);
        let pops = bin_quantile(&pool, l).unwrap().populations();
        let (lo, hi) = (n / l, n.div_ceil(l));
        prop_assert!(pops.iter().all(|&c| c as usize >= lo && c as usize <= hi), "{pops:?}");
    }

    #[test]
    fn quantile_keeps_ties_together(pool in tied_pool_strategy(200), l in 1usize..8) {
        prop_assume!(l <= pool.len());
        let strat = bin_quantile(&pool, l).unwrap();
        check_partition(&pool, &strat);
        for a in &pool {
            for b in &pool {
                if a.score == b.score {
                    prop_assert_eq!(strat.stratum_of(a.score), strat.stratum_of(b.score));
                }
            }
        }
    }

    #[test]
    fn allocations_sum_and_respect_capacity(
        pops in prop::collection::vec(0u64..60, 1..8),
        sigmas in prop::collection::vec(0.0f64..0.5, 8),
        frac in 0.0f64..1.0,
    ) {
        let capacity: u64 = pops.iter().sum();
        let nonempty = pops.iter().filter(|&&p| p > 0).count() as u64;
        prop_assume!(capacity > 0);
        let n = nonempty + ((capacity - nonempty) as f64 * frac) as u64;

        let sig = &sigmas[..pops.len()];
        let live = pops.iter().zip(sig).any(|(&p, &s)| p > 0 && s > 0.0);
        if let Ok(a) = allocate_neyman_with(&pops, sig, n) {
            prop_assert_eq!(a.total, n);
            prop_assert_eq!(a.per_stratum.iter().sum::<u64>(), n);
            prop_assert!(a.per_stratum.iter().zip(&pops).all(|(k, p)| k <= p));
        } else {
            prop_assert!(!live || n == 0);
        }

        let tallies: Vec<(u64, u64)> = pops.iter().map(|&p| (p.min(3), 0)).collect();
        let t = pilot_targets(&pops, &tallies, n, true).unwrap();
        prop_assert_eq!(t.total, n);
        prop_assert!(t.per_stratum.iter().zip(&pops).all(|(k, p)| k <= p));
    }

    #[test]
    fn equal_allocation_is_level(pops in prop::collection::vec(1u64..80, 1..8), extra in 0u64..200) {
        let pool: Vec<PooledItem> = pops
            .iter()
            .enumerate()
            .flat_map(|(h, &n)| {
                let score = (h as f64 + 0.5) / pops.len() as f64;
                (0..n).map(move |i| PooledItem::new(format!("{h}-{i}"), score))
            })
            .collect();
        let strat = bin_equal_width(&pool, pops.len()).unwrap();
        let capacity: u64 = pops.iter().sum();
        let n = (pops.len() as u64 + extra).min(capacity);
        let a = allocate_equal(&strat, n).unwrap();
        prop_assert_eq!(a.per_stratum.iter().sum::<u64>(), n);
        // Strata below capacity differ by at most one.
        let open: Vec<u64> = a.per_stratum.iter().zip(&pops).filter(|(k, p)| k < p).map(|(k, _)| *k).collect();
        if let (Some(mn), Some(mx)) = (open.iter().min(), open.iter().max()) {
            prop_assert!(mx - mn <= 1);
            let full = a.per_stratum.iter().zip(&pops).filter(|(k, p)| k == p);
            prop_assert!(full.clone().all(|(_, p)| *p <= mx + 1));
        }
    }

    #[test]
    fn se_decreases_and_ci_contains_point(k in 0u64..50, n in 1u64..500) {
        let k = k.min(n);
        let a = estimate_random(LabeledSample::new(k, n).unwrap(), 0.95).unwrap();
        let b = estimate_random(LabeledSample::new(4 * k, 4 * n).unwrap(), 0.95).unwrap();
        prop_assert!(b.se <= a.se + 1e-15);
        prop_assert!(a.ci_low <= a.point && a.point <= a.ci_high);
        prop_assert!(0.0 <= a.ci_low && a.ci_high <= 1.0);
    }

    #[test]
    fn stratified_ci_contains_point(
        cells in prop::collection::vec((1u64..200, 0.0f64..1.0, 0.0f64..1.0), 1..6),
    ) {
        let pool: Vec<PooledItem> = cells
            .iter()
            .enumerate()
            .flat_map(|(h, &(n, _, _))| {
                let score = (h as f64 + 0.5) / cells.len() as f64;
                (0..n).map(move |i| PooledItem::new(format!("{h}-{i}"), score))
            })
            .collect();
        let strat = bin_equal_width(&pool, cells.len()).unwrap();
        let counts: Vec<(u64, u64)> = cells
            .iter()
            .map(|&(n, f, q)| {
                let a = ((n as f64 * f).ceil() as u64).max(1);
                (a, (a as f64 * q) as u64)
            })
            .collect();
        let strat = strat.with_annotations(&counts).unwrap();
        for fpc in [FiniteCorrection::Off, FiniteCorrection::Standard, FiniteCorrection::Squared] {
            let e = estimate_stratified(&strat, 0.95, fpc, EstimationMethod::StratifiedEqual).unwrap();
            prop_assert!(e.ci_low <= e.point && e.point <= e.ci_high);
            prop_assert!((0.0..=1.0).contains(&e.point));
        }
    }

    #[test]
    fn optimal_never_worse_than_equal(
        cells in prop::collection::vec((1u64..5000, 0.0f64..1.0), 1..10),
        n in 1.0f64..500.0,
    ) {
        let profile: Vec<StratumProfile> = cells
            .iter()
            .map(|&(population, prevalence)| StratumProfile { population, prevalence })
            .collect();
        let l = profile.len() as f64;
        let equal: f64 = {
            let total: f64 = profile.iter().map(|s| s.population as f64).sum();
            profile
                .iter()
                .map(|s| {
                    let w = s.population as f64 / total;
                    w * w * s.prevalence * (1.0 - s.prevalence) / (n / l)
                })
                .sum()
        };
        let opt = optimal_allocation_variance(&profile, n);
        prop_assert!(opt <= equal * (1.0 + 1e-12) + 1e-300);

        let target = PrecisionTarget::within(0.2).unwrap();
        if let (Ok(o), Ok(e)) = (
            samples_needed_stratified_optimal(&profile, &target),
            samples_needed_stratified_equal(&profile, &target),
        ) {
            prop_assert!(o <= e);
        }
    }

    #[test]
    fn random_sample_size_decreases_in_prevalence(p in 0.001f64..0.5, r in 0.05f64..0.5) {
        let t = PrecisionTarget::within(r).unwrap();
        let a = samples_needed_random(p, &t).unwrap();
        let b = samples_needed_random((p * 1.5).min(0.99), &t).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn recall_decreases_in_prevalence(
        tp in 1.0f64..1e6,
        negatives in 1u64..10_000_000,
        p in 0.0f64..0.5,
        dp in 0.0f64..0.1,
    ) {
        let est = |p: f64| estimate_random(LabeledSample::new((p * 1e6) as u64, 1_000_000).unwrap(), 0.95).unwrap();
        let a = recall_interval_plugin(tp, negatives, &est(p)).unwrap();
        let b = recall_interval_plugin(tp, negatives, &est(p + dp)).unwrap();
        prop_assert!(b.recall_point <= a.recall_point + 1e-12);
        prop_assert!(a.recall_ci[0] <= a.recall_point && a.recall_point <= a.recall_ci[1]);
    }

    #[test]
    fn jsonl_round_trip(pool in pool_strategy(100), unlabeled in prop::collection::vec(any::<bool>(), 100)) {
        let pool: Vec<PooledItem> = pool
            .into_iter()
            .zip(&unlabeled)
            .map(|(mut item, &u)| {
                if u {
                    item.label = None;
                }
                item
            })
            .collect();
        let mut buf = Vec::new();
        write_pool_to(&pool, &mut buf).unwrap();
        let (back, summary) = read_pool(buf.as_slice()).unwrap();
        prop_assert_eq!(summary.total as usize, pool.len());
        prop_assert_eq!(&back, &pool);
    }
}

#[test]
fn oracle_two_strata_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let pool: Vec<PooledItem> = (0..12)
            .map(|i| {
                let s = (rng.random_range(0..20) as f64) / 20.0;
                PooledItem::labeled(format!("i{i}"), s, rng.random_bool(0.3 + 0.5 * s))
            })
            .collect();
        let mut scores: Vec<f64> = pool.iter().map(|p| p.score).collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        let whole = objective(&Stratification::from_boundaries(&pool, vec![0.0, 1.0]).unwrap(), &pool);
        let best = scores
            .windows(2)
            .map(|w| {
                let cut = (w[0] + w[1]) / 2.0;
                objective(&Stratification::from_boundaries(&pool, vec![0.0, cut, 1.0]).unwrap(), &pool)
            })
            .fold(whole, f64::min);
        let two = bin_oracle(&pool, 2).unwrap();
        assert!((objective(&two, &pool) - best).abs() < 1e-9);
        let four = bin_oracle(&pool, 4).unwrap();
        assert!(objective(&four, &pool) <= objective(&two, &pool) + 1e-9);
    }
}

#[test]
fn uniform_scores_into_ten_quantile_strata() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool: Vec<PooledItem> = (0..1000)
        .map(|i| PooledItem::new(format!("i{i}"), rng.random::<f64>()))
        .collect();
    let pops = bin_quantile(&pool, 10).unwrap().populations();
    assert!(pops.iter().all(|&c| (60..=140).contains(&c)), "{pops:?}");
    let widths = bin_equal_width(&pool, 10).unwrap().populations();
    assert!(widths.iter().all(|&c| (60..=140).contains(&c)), "{widths:?}");
}

#[test]
fn skewed_scores_quantile_balance() {
    use rand_distr::{Beta, Distribution};
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let beta = Beta::new(0.5, 8.0).unwrap();
    let pool: Vec<PooledItem> = (0..10_000)
        .map(|i| PooledItem::new(format!("i{i}"), beta.sample(&mut rng)))
        .collect();
    let pops = bin_quantile(&pool, 8).unwrap().populations();
    assert!(pops.iter().all(|&c| c == 1250), "{pops:?}");
    // Equal width piles almost everything into the lowest stratum.
    assert!(bin_equal_width(&pool, 8).unwrap().populations()[0] > 7_000);
}

#[test]
fn neyman_beats_random_integer_allocations() {
    let profile = [
        StratumProfile { population: 8000, prevalence: 0.005 },
        StratumProfile { population: 1500, prevalence: 0.05 },
        StratumProfile { population: 400, prevalence: 0.3 },
        StratumProfile { population: 100, prevalence: 0.7 },
    ];
    let pool: Vec<PooledItem> = profile
        .iter()
        .enumerate()
        .flat_map(|(h, s)| {
            let positives = (s.population as f64 * s.prevalence).round() as u64;
            (0..s.population).map(move |i| PooledItem::labeled(format!("{h}-{i}"), (h as f64 + 0.5) / 4.0, i < positives))
        })
        .collect();
    let strat = bin_equal_width(&pool, 4).unwrap().with_true_labels(&pool).unwrap();
    let n = 400;
    let ney = allocate_neyman(&strat, n).unwrap();
    let v = stratified_variance(&strat.profile(), &ney.per_stratum);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let mut cuts: Vec<u64> = (0..3).map(|_| rng.random_range(0..=n - 4)).collect();
        cuts.sort_unstable();
        let alloc: Vec<u64> = [cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], n - 4 - cuts[2]]
            .iter()
            .map(|c| c + 1)
            .collect();
        assert!(v <= stratified_variance(&strat.profile(), &alloc));
    }
}
