use rayon::prelude::*;
use strata_audit::allocate::{allocate_equal, annotate_allocation, AllocationSpec, LabelBook};
use strata_audit::estimate::{estimate_stratified, FiniteCorrection};
use strata_audit::model::{EstimationMethod, PooledItem, Stratification};
use strata_audit::plan::{samples_needed_random, samples_needed_stratified_optimal, PrecisionTarget};
use strata_audit::recall::{
    recall_interval_bootstrap, recall_interval_plugin, BootstrapConfig, TruePositives,
};
use strata_audit::simlab::{
    generate_pool, mean_sd, Design, Experiment, ExperimentConfig, PoolSource, SyntheticPoolSpec,
};
use strata_audit::stratify::{bin_equal_width, bin_oracle, bin_quantile, BinningMethod};

fn true_rate(pool: &[PooledItem]) -> f64 {
    pool.iter().filter(|i| i.label == Some(true)).count() as f64 / pool.len() as f64
}

#[test]
fn stratified_estimator_unbiased_under_fixed_allocation() {
    let pool = generate_pool(&SyntheticPoolSpec::new(20_000, 0.05, 2.0, 21).exact()).unwrap();
    let strat = bin_quantile(&pool, 8).unwrap();
    let alloc = allocate_equal(&strat, 400).unwrap();
    let book = LabelBook::from_pool(&pool).unwrap();
    let points: Vec<f64> = (0..4000u64)
        .into_par_iter()
        .map(|seed| {
            let mut oracle = book.oracle();
            let s = annotate_allocation(&pool, &strat, &alloc, seed, &mut oracle).unwrap();
            estimate_stratified(&s, 0.95, FiniteCorrection::Standard, EstimationMethod::StratifiedEqual)
                .unwrap()
                .point
        })
        .collect();
    let (mean, sd) = mean_sd(points.iter().copied());
    let se = sd / (points.len() as f64).sqrt();
    assert!((mean - 0.05).abs() < 3.0 * se, "mean {mean}, se {se}");
}

fn optimal_costs(spec: SyntheticPoolSpec, strata: usize) -> (u64, u64, u64, u64) {
    let pool = generate_pool(&spec).unwrap();
    let target = PrecisionTarget::within(0.2).unwrap();
    let cost = |s: Stratification| {
        samples_needed_stratified_optimal(&s.with_true_labels(&pool).unwrap().profile(), &target).unwrap()
    };
    (
        cost(bin_oracle(&pool, strata).unwrap()),
        cost(bin_quantile(&pool, strata).unwrap()),
        cost(bin_equal_width(&pool, strata).unwrap()),
        samples_needed_random(true_rate(&pool), &target).unwrap(),
    )
}

#[test]
fn binning_order_with_overconfident_scores() {
    // A wide latent spread pushes most scores towards 0 and 1, the shape of a
    // confident classifier, where quantile strata catch up with enough bins.
    for strata in [16, 32] {
        let costs: Vec<(u64, u64, u64, u64)> = (0..10u64)
            .into_par_iter()
            .map(|seed| {
                let mut spec = SyntheticPoolSpec::new(50_000, 0.041, 3.0, 100 + seed).exact();
                spec.spread = 2.0;
                optimal_costs(spec, strata)
            })
            .collect();
        let stat = |f: fn(&(u64, u64, u64, u64)) -> u64| {
            let (m, sd) = mean_sd(costs.iter().map(|c| f(c) as f64));
            (m, sd / (costs.len() as f64).sqrt())
        };
        let (oracle, _) = stat(|c| c.0);
        let (quantile, se_q) = stat(|c| c.1);
        let (width, se_w) = stat(|c| c.2);
        let (random, _) = stat(|c| c.3);
        assert!(oracle <= quantile + se_q, "L={strata}: oracle {oracle} quantile {quantile} ± {se_q}");
        assert!(quantile <= width + se_w, "L={strata}: quantile {quantile} width {width} ± {se_w}");
        assert!(width <= random, "L={strata}: width {width} random {random}");
    }
}

#[test]
fn equal_width_can_beat_quantile_on_calibrated_scores() {
    let (oracle, quantile, width, random) = optimal_costs(SyntheticPoolSpec::new(50_000, 0.041, 3.0, 22).exact(), 8);
    assert!(oracle <= width && width < quantile && quantile < random, "{oracle} {quantile} {width} {random}");
}

#[test]
fn uninformative_scores_do_not_help() {
    let cfg = ExperimentConfig {
        pool: PoolSource::Synthetic(SyntheticPoolSpec::new(50_000, 0.041, 0.0, 23).exact()),
        binning: BinningMethod::Quantile,
        strata: vec![8],
        allocations: vec![AllocationSpec::Neyman, AllocationSpec::Pilot { per_stratum: 50 }],
        target: PrecisionTarget::within(0.2).unwrap(),
        trials: 30,
        seed: 3,
        include_random: true,
        pseudocounts: true,
    };
    let results = Experiment::new(cfg).unwrap().run().unwrap();
    let random = results.random_baseline as f64;
    for p in &results.points {
        assert!(p.mean_cost >= 0.9 * random, "{} costs {} vs random {random}", p.design, p.mean_cost);
    }
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p: f64 = (1..100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn single_stratum_equal_matches_random_in_distribution() {
    let spec = SyntheticPoolSpec::new(20_000, 0.05, 2.0, 24).exact();
    let run = |seed, design| {
        let cfg = ExperimentConfig {
            pool: PoolSource::Synthetic(spec),
            binning: BinningMethod::Quantile,
            strata: vec![1],
            allocations: vec![AllocationSpec::Equal],
            target: PrecisionTarget::within(0.2).unwrap(),
            trials: 200,
            seed,
            include_random: true,
            pseudocounts: true,
        };
        let results = Experiment::new(cfg).unwrap().run_design(design).unwrap();
        results.iter().map(|t| t.estimate.point).collect::<Vec<_>>()
    };
    let random = run(100, Design::Random);
    let equal = run(200, Design::Stratified { strata: 1, allocation: AllocationSpec::Equal });
    let p = ks_p_value(&random, &equal);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn bootstrap_agrees_with_plugin_and_is_deterministic() {
    let pool = generate_pool(&SyntheticPoolSpec::new(100_000, 0.041, 3.0, 25).exact()).unwrap();
    let strat = bin_quantile(&pool, 8).unwrap();
    let alloc = allocate_equal(&strat, 8_000).unwrap();
    let book = LabelBook::from_pool(&pool).unwrap();
    let mut oracle = book.oracle();
    let sample = annotate_allocation(&pool, &strat, &alloc, 5, &mut oracle).unwrap();
    let method = EstimationMethod::StratifiedEqual;
    let prev = estimate_stratified(&sample, 0.95, FiniteCorrection::Off, method).unwrap();

    let (tp, negatives) = (3_000.0, 100_000);
    let plug = recall_interval_plugin(tp, negatives, &prev).unwrap();
    let cfg = BootstrapConfig { replicates: 10_000, confidence: 0.95, seed: 9 };
    let boot = recall_interval_bootstrap(TruePositives::Exact(tp), negatives, &sample, method, &cfg).unwrap();
    for k in 0..2 {
        assert!(
            (boot.recall_ci[k] - plug.recall_ci[k]).abs() < 0.01,
            "bootstrap {:?} vs plug-in {:?}",
            boot.recall_ci,
            plug.recall_ci
        );
    }
    let again = recall_interval_bootstrap(TruePositives::Exact(tp), negatives, &sample, method, &cfg).unwrap();
    assert_eq!(boot, again);
    // With equal strata and equal sizes the exact-tp replicates live on a
    // lattice, so seeds are compared with an estimated tp instead.
    let noisy = TruePositives::Estimated { point: tp, se: 50.0 };
    let a = recall_interval_bootstrap(noisy, negatives, &sample, method, &cfg).unwrap();
    let b = recall_interval_bootstrap(noisy, negatives, &sample, method, &BootstrapConfig { seed: 10, ..cfg }).unwrap();
    assert_eq!(a, recall_interval_bootstrap(noisy, negatives, &sample, method, &cfg).unwrap());
    assert_ne!(a.recall_ci, b.recall_ci);
}
