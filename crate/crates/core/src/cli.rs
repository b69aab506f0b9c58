//! Command-line surface: argument definitions and dispatch for the `strata-audit` binary.

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::seq::index;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::allocate::{
    allocate_equal, allocate_neyman, annotate_allocation, AllocationKind, AllocationSpec,
    AnnotationOracle, LabelBook, PilotRun,
};
use crate::estimate::{
    build_estimate, estimate_precision, estimate_random, estimate_stratified, z_value,
    FiniteCorrection,
};
use crate::io::{ingest_pool, read_text, AllocationRecord, ReportFile, StratumTable};
use crate::model::{EstimationMethod, LabeledSample, PooledItem, PrevalenceEstimate, Stratification};
use crate::plan::{
    required_se, samples_needed_random, samples_needed_stratified_equal,
    samples_needed_stratified_optimal, PrecisionTarget,
};
use crate::rng::{derived_rng, Domain};
use crate::recall::{
    build_transparency_report, recall_interval_bootstrap, recall_interval_plugin,
    recall_upper_bound, BootstrapConfig, ConfusionCounts, Provenance, ReportMetadata, TpSource,
    TruePositives, DEFAULT_REPLICATES,
};
use crate::simlab::{
    build_keyword_filter, corpus_pool, generate_pool, keyword_corpus, train_unigram_scorer,
    Design, Experiment, ExperimentConfig, KeywordCorpusSpec, PoolSource, SyntheticPoolSpec,
    TrainParams,
};
use crate::stratify::{BinningMethod, BinningSpec};
use crate::{Error, Result};

/// Prevalence, precision and recall estimation for content moderation audits.
#[derive(Debug, Parser)]
#[command(name = "strata-audit", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Confidence level of reported intervals.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub confidence: f64,
    /// Write the result here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// `json` for a structured document, `tsv` for a table.
    #[arg(long, global = true, value_enum)]
    #[serde(skip)]
    pub format: Option<Format>,
    /// More logging on standard error (repeatable).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotation budgets for a relative precision target.
    Plan(PlanArgs),
    /// Stratify a pool by score.
    Bin(BinArgs),
    /// Estimate prevalence from a pool's labels.
    Estimate(EstimateArgs),
    /// Run the two-phase pilot procedure on a pool.
    Pilot(PilotArgs),
    /// Recall with an interval from true positives and a prevalence estimate.
    Recall(RecallArgs),
    /// Multi-trial cost experiments on a labelled pool.
    Simulate(SimulateArgs),
    /// Write a synthetic pool as JSON lines.
    Generate(GenerateArgs),
    /// Assemble a transparency report from confusion counts.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PlanArgs {
    /// Expected prevalence.
    #[arg(long = "p")]
    pub prevalence: Option<f64>,
    /// Relative half-width of the interval, e.g. 0.2 for ±20%.
    #[arg(long, default_value_t = 0.20)]
    pub rel: f64,
    /// Print a prevalence × precision grid for simple random sampling.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.059, 0.01, 0.001])]
    pub prevalences: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.20, 0.10, 0.05])]
    pub rels: Vec<f64>,
    /// Labelled pool to plan stratified designs on.
    #[arg(long, conflicts_with = "grid")]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value = "quantile:8")]
    #[serde(serialize_with = "display")]
    pub bins: BinningSpec,
}

#[derive(Debug, Args, Serialize)]
pub struct BinArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value = "quantile:8")]
    #[serde(serialize_with = "display")]
    pub bins: BinningSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Random,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpcArg {
    Off,
    Standard,
    Squared,
}

impl From<FpcArg> for FiniteCorrection {
    fn from(f: FpcArg) -> Self {
        match f {
            FpcArg::Off => FiniteCorrection::Off,
            FpcArg::Standard => FiniteCorrection::Standard,
            FpcArg::Squared => FiniteCorrection::Squared,
        }
    }
}

/// Which part of the pool to estimate over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    All,
    /// Items not removed by the filter (predicted negatives).
    Visible,
    /// Items the filter removed (predicted positives).
    Removed,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_enum, default_value = "stratified")]
    pub method: MethodArg,
    #[arg(long, default_value = "quantile:8")]
    #[serde(serialize_with = "display")]
    pub bins: BinningSpec,
    /// `equal`, `neyman` or `pilot:M`.
    #[arg(long, default_value = "equal")]
    #[serde(serialize_with = "display")]
    pub alloc: AllocationSpec,
    /// Annotations to draw, revealing stored labels. Without it the
    /// labels already present in the pool are the sample (pilot designs
    /// plan their own budget).
    #[arg(long)]
    pub budget: Option<u64>,
    /// Precision target used to plan a pilot design's budget.
    #[arg(long, default_value_t = 0.20)]
    pub rel: f64,
    #[arg(long, value_enum, default_value = "standard")]
    pub fpc: FpcArg,
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    #[arg(long)]
    pub no_pseudocounts: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PilotArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value = "quantile:8")]
    #[serde(serialize_with = "display")]
    pub bins: BinningSpec,
    /// Pilot annotations per stratum.
    #[arg(long, default_value_t = 50)]
    pub per_stratum: u64,
    /// Total budget including the pilot; planned from the pilot if absent.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, default_value_t = 0.20)]
    pub rel: f64,
    #[arg(long, value_enum, default_value = "standard")]
    pub fpc: FpcArg,
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    #[arg(long)]
    pub no_pseudocounts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalArg {
    Plugin,
    Bootstrap,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("positives").required(true).args(["tp", "tp_estimate", "removals"])))]
#[command(group(ArgGroup::new("prev").required(true).args(["prevalence", "from_report"])))]
pub struct RecallArgs {
    /// Size of the visible (not removed) pool.
    #[arg(long)]
    pub negatives: Option<u64>,
    /// Exact count of correct removals.
    #[arg(long)]
    pub tp: Option<f64>,
    /// Estimated count of correct removals; needs `--tp-se`.
    #[arg(long, requires = "tp_se")]
    pub tp_estimate: Option<f64>,
    #[arg(long)]
    pub tp_se: Option<f64>,
    /// Total removals, treated as all correct (upper bound on recall).
    #[arg(long)]
    pub removals: Option<f64>,
    /// Prevalence point estimate in the visible pool.
    #[arg(long)]
    pub prevalence: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"], conflicts_with = "prevalence_se")]
    pub prevalence_ci: Option<Vec<f64>>,
    #[arg(long)]
    pub prevalence_se: Option<f64>,
    /// Report written by `estimate` over the visible pool.
    #[arg(long)]
    pub from_report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "plugin")]
    pub interval: IntervalArg,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningArg {
    EqualWidth,
    Quantile,
    Oracle,
}

impl From<BinningArg> for BinningMethod {
    fn from(b: BinningArg) -> Self {
        match b {
            BinningArg::EqualWidth => BinningMethod::EqualWidth,
            BinningArg::Quantile => BinningMethod::Quantile,
            BinningArg::Oracle => BinningMethod::Oracle,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50_000)]
    pub size: usize,
    #[arg(long, default_value_t = 0.041)]
    pub prevalence: f64,
    /// Distance between the class score means on the logit scale.
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Draw labels independently instead of fixing the positive count.
    #[arg(long)]
    pub bernoulli: bool,
}

impl SynthArgs {
    fn spec(&self, seed: u64) -> SyntheticPoolSpec {
        SyntheticPoolSpec {
            spread: self.spread,
            exact_counts: !self.bernoulli,
            ..SyntheticPoolSpec::new(self.size, self.prevalence, self.separation, seed)
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Labelled pool file; a synthetic pool is generated otherwise.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SynthArgs,
    /// Seed of the synthetic pool (defaults to `--seed`).
    #[arg(long)]
    pub pool_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "quantile")]
    pub binning: BinningArg,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
    pub strata: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values = ["equal", "neyman", "pilot:50"])]
    #[serde(serialize_with = "display_all")]
    pub alloc: Vec<AllocationSpec>,
    #[arg(long, default_value_t = 0.20)]
    pub rel: f64,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long)]
    pub no_random: bool,
    #[arg(long)]
    pub no_pseudocounts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolKind {
    /// Logit-normal class-conditional scores.
    Scores,
    /// Text corpus scored by a trained unigram model, removals by its top
    /// keywords.
    Keyword,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "scores")]
    pub kind: PoolKind,
    #[command(flatten)]
    pub synthetic: SynthArgs,
    /// Mark items scoring at or above this as removed.
    #[arg(long)]
    pub filter_threshold: Option<f64>,
    /// Keyword count for `--kind keyword`.
    #[arg(long, default_value_t = 10)]
    pub keywords: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Labelled pool with removal flags to count from.
    #[arg(long, conflicts_with_all = ["tp", "fp", "tn", "fn_"])]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub tp: Option<f64>,
    #[arg(long)]
    pub fp: Option<f64>,
    #[arg(long)]
    pub tn: Option<f64>,
    #[arg(long = "fn")]
    pub fn_: Option<f64>,
    /// The false-negative count is an estimate.
    #[arg(long)]
    pub fn_estimated: bool,
    #[arg(long, default_value = "")]
    pub period: String,
    /// Totals to check the counts against.
    #[arg(long)]
    pub total: Option<f64>,
    #[arg(long)]
    pub removals: Option<f64>,
    #[arg(long)]
    pub visible: Option<f64>,
    #[arg(long)]
    pub notes: Option<String>,
    /// Prevalence report to embed.
    #[arg(long)]
    pub estimate_report: Option<PathBuf>,
    /// Recall report to embed.
    #[arg(long)]
    pub recall_report: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    z_value(cli.global.confidence)?;
    let g = &cli.global;
    let (text, default) = match &cli.command {
        Command::Plan(a) => (plan(g, a)?, Format::Tsv),
        Command::Bin(a) => (bin(g, a)?, Format::Json),
        Command::Estimate(a) => (estimate(g, a)?, Format::Json),
        Command::Pilot(a) => (pilot(g, a)?, Format::Json),
        Command::Recall(a) => (recall(g, a)?, Format::Json),
        Command::Simulate(a) => (simulate(g, a)?, Format::Json),
        Command::Generate(a) => (generate(g, a)?, Format::Json),
        Command::Report(a) => (report(g, a)?, Format::Json),
    };
    let rendered = match g.format.unwrap_or(default) {
        Format::Json => text.json,
        Format::Tsv => text.tsv,
    };
    match &g.output {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

/// A result rendered both ways.
struct Rendered {
    json: String,
    tsv: String,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_all<T: std::fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn config_echo<T: Serialize>(command: &str, g: &Global, args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "command": command,
        "global": serde_json::to_value(g)?,
        "args": serde_json::to_value(args)?,
    }))
}

fn load_pool(path: &PathBuf, subset: Subset) -> Result<Vec<PooledItem>> {
    let (items, _) = ingest_pool(path)?;
    let keep = |i: &PooledItem| match subset {
        Subset::All => true,
        Subset::Visible => i.filtered != Some(true),
        Subset::Removed => i.filtered == Some(true),
    };
    let items: Vec<PooledItem> = items.into_iter().filter(keep).collect();
    if items.is_empty() {
        return Err(Error::InvalidInput(format!("no items in the {subset:?} subset")));
    }
    Ok(items)
}

fn g6(x: f64) -> String {
    crate::serde_util::round_sig6(x).to_string()
}

fn plan(g: &Global, a: &PlanArgs) -> Result<Rendered> {
    if a.grid {
        let mut rows = Vec::new();
        let mut tsv = String::from("prevalence");
        for r in &a.rels {
            write!(tsv, "\tr={r}").unwrap();
        }
        tsv.push('\n');
        for &p in &a.prevalences {
            write!(tsv, "{p}").unwrap();
            for &r in &a.rels {
                let n = samples_needed_random(p, &PrecisionTarget::new(r, g.confidence)?)?;
                write!(tsv, "\t{n}").unwrap();
                rows.push(serde_json::json!({"prevalence": p, "relative_halfwidth": r, "samples": n}));
            }
            tsv.push('\n');
        }
        return Ok(Rendered {
            json: to_json(&serde_json::json!({"confidence": g.confidence, "design": "random", "grid": rows}))?,
            tsv,
        });
    }
    let target = PrecisionTarget::new(a.rel, g.confidence)?;
    if let Some(path) = &a.pool {
        let pool = load_pool(path, Subset::All)?;
        let strat = a.bins.apply(&pool)?.with_true_labels(&pool)?;
        let p = strat.total_positives() as f64 / strat.total_size as f64;
        let profile = strat.profile();
        let rows = [
            ("random", samples_needed_random(p, &target)?),
            ("stratified-equal", samples_needed_stratified_equal(&profile, &target)?),
            ("stratified-neyman", samples_needed_stratified_optimal(&profile, &target)?),
        ];
        let mut tsv = String::from("design\tsamples\n");
        for (d, n) in rows {
            writeln!(tsv, "{d}\t{n}").unwrap();
        }
        let json = serde_json::json!({
            "prevalence": p,
            "relative_halfwidth": a.rel,
            "confidence": g.confidence,
            "binning": a.bins.to_string(),
            "samples": rows.iter().map(|(d, n)| serde_json::json!({"design": d, "samples": n})).collect::<Vec<_>>(),
        });
        return Ok(Rendered { json: to_json(&json)?, tsv });
    }
    let p = a
        .prevalence
        .ok_or_else(|| Error::InvalidInput("give --p, --grid or --pool".into()))?;
    let n = samples_needed_random(p, &target)?;
    let json = serde_json::json!({
        "prevalence": p,
        "relative_halfwidth": a.rel,
        "confidence": g.confidence,
        "required_se": required_se(p, &target)?,
        "samples": n,
    });
    Ok(Rendered {
        json: to_json(&json)?,
        tsv: format!("{n}\n"),
    })
}

fn stratum_tsv(t: &StratumTable) -> String {
    let mut s = String::from("stratum\tscore_low\tscore_high\tpopulation\tannotated\tpositives\n");
    for r in &t.rows {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.stratum,
            g6(r.score_low),
            g6(r.score_high),
            r.population,
            r.annotated,
            r.positives
        )
        .unwrap();
    }
    writeln!(s, "total\t\t\t{}\t{}\t{}", t.total_population, t.total_annotated, t.total_positives).unwrap();
    s
}

/// Tallies of the labels already present, per stratum.
fn existing_labels(strat: Stratification, pool: &[PooledItem]) -> Result<Stratification> {
    let mut counts = vec![(0u64, 0u64); strat.num_strata()];
    for item in pool {
        if let Some(l) = item.label {
            let c = &mut counts[strat.stratum_of(item.score)];
            c.0 += 1;
            c.1 += u64::from(l);
        }
    }
    strat.with_annotations(&counts)
}

fn bin(_g: &Global, a: &BinArgs) -> Result<Rendered> {
    let pool = load_pool(&a.pool, Subset::All)?;
    let strat = existing_labels(a.bins.apply(&pool)?, &pool)?;
    let table = StratumTable::from_stratification(&strat);
    let json = serde_json::json!({"binning": a.bins.to_string(), "strata": table});
    Ok(Rendered {
        json: to_json(&json)?,
        tsv: stratum_tsv(&table),
    })
}

fn report_tsv(r: &ReportFile) -> String {
    let mut s = String::new();
    for e in &r.estimates {
        s.push_str("method\tpoint\tse\tci_low\tci_high\tn\n");
        writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", e.method, g6(e.point), g6(e.se), g6(e.ci_low), g6(e.ci_high), e.n_total)
            .unwrap();
    }
    if let Some(rc) = &r.recall {
        writeln!(
            s,
            "recall\t{}\t{}\t{}\t{:?}",
            g6(rc.recall_point),
            g6(rc.recall_ci[0]),
            g6(rc.recall_ci[1]),
            rc.interval_method
        )
        .unwrap();
    }
    if let Some(c) = &r.counts {
        writeln!(s, "tp\tfp\ttn\tfn\n{}\t{}\t{}\t{}", c.tp, c.fp, c.tn, c.fn_).unwrap();
    }
    if let Some(t) = &r.transparency {
        let m = &t.metrics;
        let f = |x: Option<f64>| x.map(g6).unwrap_or_else(|| "NA".into());
        writeln!(
            s,
            "accuracy\tprecision\trecall\tf1\n{}\t{}\t{}\t{}",
            f(m.accuracy),
            f(m.precision),
            f(m.recall),
            f(m.f1)
        )
        .unwrap();
    }
    if let Some(t) = &r.strata {
        s.push_str(&stratum_tsv(t));
    }
    s
}

fn finish_report(r: ReportFile) -> Result<Rendered> {
    Ok(Rendered {
        json: r.to_json()?,
        tsv: report_tsv(&r),
    })
}

struct EstimateJob<'a> {
    pool: &'a PathBuf,
    method: MethodArg,
    bins: BinningSpec,
    alloc: AllocationSpec,
    budget: Option<u64>,
    rel: f64,
    fpc: FiniteCorrection,
    subset: Subset,
    pseudocounts: bool,
}

fn run_estimate(g: &Global, job: &EstimateJob, config: serde_json::Value) -> Result<ReportFile> {
    let pool = load_pool(job.pool, job.subset)?;
    let mut report = ReportFile::new(config, vec![g.seed]);
    let book = LabelBook::from_pool(&pool)?;
    let mut oracle = book.oracle();

    if job.method == MethodArg::Random {
        let sample = match job.budget {
            Some(n) => {
                if n == 0 || n as usize > pool.len() {
                    return Err(Error::InvalidInput(format!(
                        "budget must lie in 1..={}, got {n}",
                        pool.len()
                    )));
                }
                let mut rng = derived_rng(g.seed, Domain::Sampling, 0);
                let mut idx = index::sample(&mut rng, pool.len(), n as usize).into_vec();
                idx.sort_unstable();
                let labels = idx
                    .iter()
                    .map(|&i| oracle.annotate(&pool[i].id))
                    .collect::<Result<Vec<_>>>()?;
                LabeledSample::from_labels(labels)?
            }
            None => LabeledSample::from_labels(pool.iter().filter_map(|i| i.label))?,
        };
        let est = if job.subset == Subset::Removed {
            estimate_precision(sample, g.confidence)?
        } else {
            estimate_random(sample, g.confidence)?
        };
        report.estimates.push(est);
        return Ok(report);
    }

    let strat = job.bins.apply(&pool)?;
    let (done, method, record) = match job.alloc {
        AllocationSpec::Pilot { per_stratum } => {
            let run = PilotRun::start(&pool, &strat, per_stratum, job.pseudocounts, g.seed, &mut oracle)?;
            let budget = match job.budget {
                Some(b) => b,
                None => run.planned_budget(&PrecisionTarget::new(job.rel, g.confidence)?)?,
            };
            let out = run.finish(budget, &mut oracle)?;
            let record = AllocationRecord {
                kind: AllocationKind::Pilot,
                budget: Some(budget),
                realized: out.allocation.per_stratum.clone(),
                pilot: Some(out.pilot.clone()),
                targets: Some(out.targets.clone()),
                exhausted: out.exhausted.clone(),
            };
            (out.stratification, EstimationMethod::StratifiedPilot, Some(record))
        }
        spec => {
            let method = if spec == AllocationSpec::Equal {
                EstimationMethod::StratifiedEqual
            } else {
                EstimationMethod::StratifiedNeyman
            };
            match job.budget {
                Some(n) => {
                    let alloc = if spec == AllocationSpec::Equal {
                        allocate_equal(&strat, n)?
                    } else {
                        allocate_neyman(&strat.clone().with_true_labels(&pool)?, n)?
                    };
                    let done = annotate_allocation(&pool, &strat, &alloc, g.seed, &mut oracle)?;
                    let record = AllocationRecord {
                        kind: alloc.kind,
                        budget: Some(n),
                        realized: alloc.per_stratum,
                        pilot: None,
                        targets: None,
                        exhausted: Vec::new(),
                    };
                    (done, method, Some(record))
                }
                None => (existing_labels(strat, &pool)?, method, None),
            }
        }
    };
    report.estimates.push(estimate_stratified(&done, g.confidence, job.fpc, method)?);
    report.strata = Some(StratumTable::from_stratification(&done));
    report.allocation = record;
    Ok(report)
}

fn estimate(g: &Global, a: &EstimateArgs) -> Result<Rendered> {
    let job = EstimateJob {
        pool: &a.pool,
        method: a.method,
        bins: a.bins,
        alloc: a.alloc,
        budget: a.budget,
        rel: a.rel,
        fpc: a.fpc.into(),
        subset: a.subset,
        pseudocounts: !a.no_pseudocounts,
    };
    finish_report(run_estimate(g, &job, config_echo("estimate", g, a)?)?)
}

fn pilot(g: &Global, a: &PilotArgs) -> Result<Rendered> {
    if a.per_stratum == 0 {
        return Err(Error::InvalidInput("pilot size must be at least 1".into()));
    }
    let job = EstimateJob {
        pool: &a.pool,
        method: MethodArg::Stratified,
        bins: a.bins,
        alloc: AllocationSpec::Pilot {
            per_stratum: a.per_stratum,
        },
        budget: a.budget,
        rel: a.rel,
        fpc: a.fpc.into(),
        subset: a.subset,
        pseudocounts: !a.no_pseudocounts,
    };
    finish_report(run_estimate(g, &job, config_echo("pilot", g, a)?)?)
}

fn read_report(path: &Path) -> Result<ReportFile> {
    let r: ReportFile = serde_json::from_str(&read_text(path)?)?;
    r.validate()?;
    Ok(r)
}

fn recall(g: &Global, a: &RecallArgs) -> Result<Rendered> {
    let (prev, strata) = match &a.from_report {
        Some(path) => {
            let r = read_report(path)?;
            let e = r
                .estimates
                .first()
                .cloned()
                .ok_or_else(|| Error::InvalidInput("report holds no prevalence estimate".into()))?;
            (e, r.strata)
        }
        None => {
            let p = a.prevalence.expect("required by the argument group");
            let est = match (&a.prevalence_ci, a.prevalence_se) {
                (Some(ci), _) => {
                    let z = z_value(g.confidence)?;
                    let mut e = build_estimate(p, (ci[1] - ci[0]) / (2.0 * z), g.confidence, 0, EstimationMethod::Random)?;
                    e.ci_low = ci[0];
                    e.ci_high = ci[1];
                    e
                }
                (None, Some(se)) => build_estimate(p, se, g.confidence, 0, EstimationMethod::Random)?,
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "give --prevalence-ci or --prevalence-se with --prevalence".into(),
                    ))
                }
            };
            if !(0.0..=1.0).contains(&p) || !(est.ci_low <= p && p <= est.ci_high) {
                return Err(Error::InvalidInput("prevalence must lie in [0, 1] inside its interval".into()));
            }
            (est, None)
        }
    };
    let negatives = a
        .negatives
        .or_else(|| strata.as_ref().map(|t| t.total_population))
        .ok_or_else(|| Error::InvalidInput("--negatives is required".into()))?;

    let rec = match a.interval {
        IntervalArg::Plugin => match (a.tp, a.tp_estimate, a.removals) {
            (Some(tp), _, _) => recall_interval_plugin(tp, negatives, &prev)?,
            (_, Some(tp), _) => {
                let mut r = recall_interval_plugin(tp, negatives, &prev)?;
                r.tp_source = TpSource::Estimated;
                r.tp_se = a.tp_se;
                r
            }
            (_, _, Some(rem)) => recall_upper_bound(rem, negatives, &prev)?,
            _ => unreachable!("argument group requires one source"),
        },
        IntervalArg::Bootstrap => {
            let table = strata.as_ref().ok_or_else(|| {
                Error::InvalidInput("bootstrap intervals need --from-report with a stratum table".into())
            })?;
            let strat = table.to_stratification()?;
            let tp = match (a.tp, a.tp_estimate, a.removals) {
                (Some(tp), _, _) | (_, _, Some(tp)) => TruePositives::Exact(tp),
                (_, Some(point), _) => TruePositives::Estimated {
                    point,
                    se: a.tp_se.unwrap_or(0.0),
                },
                _ => unreachable!("argument group requires one source"),
            };
            let cfg = BootstrapConfig {
                replicates: a.replicates,
                confidence: g.confidence,
                seed: g.seed,
            };
            let mut r = recall_interval_bootstrap(tp, negatives, &strat, prev.method, &cfg)?;
            if a.removals.is_some() {
                r.tp_source = TpSource::RemovalsUpperBound;
                r.upper_bound = true;
            }
            r
        }
    };
    let mut report = ReportFile::new(config_echo("recall", g, a)?, vec![g.seed]);
    report.estimates.push(rec.prevalence.clone());
    report.recall = Some(rec);
    report.strata = strata;
    finish_report(report)
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<Rendered> {
    let pool = match &a.pool {
        Some(path) => PoolSource::File { path: path.clone() },
        None => PoolSource::Synthetic(a.synthetic.spec(a.pool_seed.unwrap_or(g.seed))),
    };
    let cfg = ExperimentConfig {
        pool,
        binning: a.binning.into(),
        strata: a.strata.clone(),
        allocations: a.alloc.clone(),
        target: PrecisionTarget::new(a.rel, g.confidence)?,
        trials: a.trials,
        seed: g.seed,
        include_random: !a.no_random,
        pseudocounts: !a.no_pseudocounts,
    };
    let results = Experiment::new(cfg)?.run()?;
    let mut tsv = String::from("design\tstrata\tallocation\ttrials\tmean_cost\tse_cost\tanalytic_cost\tmean_estimate\tmet_rate\n");
    for p in &results.points {
        let (strata, alloc) = match p.design {
            Design::Random => ("1".to_string(), "random".to_string()),
            Design::Stratified { strata, allocation } => (strata.to_string(), allocation.to_string()),
        };
        writeln!(
            tsv,
            "{}\t{strata}\t{alloc}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.design,
            p.trials,
            g6(p.mean_cost),
            g6(p.se_cost),
            p.analytic_cost.map(|n| n.to_string()).unwrap_or_else(|| "NA".into()),
            g6(p.mean_estimate),
            g6(p.met_rate)
        )
        .unwrap();
    }
    writeln!(tsv, "# random baseline {} at prevalence {}", results.random_baseline, g6(results.true_prevalence)).unwrap();
    Ok(Rendered {
        json: to_json(&results)?,
        tsv,
    })
}

fn generate(g: &Global, a: &GenerateArgs) -> Result<Rendered> {
    let mut items = match a.kind {
        PoolKind::Scores => generate_pool(&a.synthetic.spec(g.seed))?,
        PoolKind::Keyword => {
            let spec = KeywordCorpusSpec::moderation_shaped(a.synthetic.size, g.seed);
            let train = keyword_corpus(&KeywordCorpusSpec {
                seed: g.seed.wrapping_add(1),
                ..spec
            })?;
            let scorer = train_unigram_scorer(&train, &TrainParams { seed: g.seed, ..TrainParams::default() })?;
            let filter = build_keyword_filter(&scorer, a.keywords)?;
            log::info!("keywords: {}", filter.keywords.join(" "));
            corpus_pool(&keyword_corpus(&spec)?, &scorer, &filter)
        }
    };
    if let Some(t) = a.filter_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("filter threshold must lie in [0, 1], got {t}")));
        }
        for i in &mut items {
            i.filtered = Some(i.score >= t);
        }
    }
    let mut json = Vec::new();
    crate::io::write_pool_to(&items, &mut json)?;
    let mut tsv = String::from("id\tscore\tlabel\tfiltered\n");
    for i in &items {
        let opt = |b: Option<bool>| b.map(|b| u8::from(b).to_string()).unwrap_or_default();
        writeln!(tsv, "{}\t{}\t{}\t{}", i.id, i.score, opt(i.label), opt(i.filtered)).unwrap();
    }
    Ok(Rendered {
        json: String::from_utf8(json).expect("serde_json writes UTF-8"),
        tsv,
    })
}

fn report(g: &Global, a: &ReportArgs) -> Result<Rendered> {
    let mut counts = match &a.pool {
        Some(path) => {
            let pool = load_pool(path, Subset::All)?;
            let pairs = pool
                .iter()
                .map(|i| {
                    i.label
                        .map(|l| (i.filtered == Some(true), l))
                        .ok_or_else(|| Error::InvalidInput(format!("item {:?} has no label", i.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            ConfusionCounts::from_predictions(pairs)
        }
        None => match (a.tp, a.fp, a.tn, a.fn_) {
            (Some(tp), Some(fp), Some(tn), Some(fn_)) => ConfusionCounts::exact(tp, fp, tn, fn_),
            _ => {
                return Err(Error::InvalidInput(
                    "give --pool or all of --tp --fp --tn --fn".into(),
                ))
            }
        },
    };
    if a.fn_estimated {
        counts.provenance.fn_ = Provenance::Estimated;
    }
    let estimate_report = a.estimate_report.as_deref().map(read_report).transpose()?;
    let recall_report = a.recall_report.as_deref().map(read_report).transpose()?;
    let prev: Option<PrevalenceEstimate> = estimate_report
        .as_ref()
        .and_then(|r| r.estimates.first().cloned())
        .or_else(|| recall_report.as_ref().and_then(|r| r.recall.as_ref()).map(|r| r.prevalence.clone()));
    let rec = recall_report.as_ref().and_then(|r| r.recall.clone());
    let meta = ReportMetadata {
        reporting_period: a.period.clone(),
        total_items: a.total,
        removals: a.removals,
        visible: a.visible,
        notes: a.notes.clone(),
    };
    let transparency = build_transparency_report(&counts, prev.as_ref(), rec.as_ref(), &meta)?;
    let mut seeds = vec![g.seed];
    for r in estimate_report.iter().chain(recall_report.iter()) {
        seeds.extend(&r.seeds);
    }
    let mut out = ReportFile::new(config_echo("report", g, a)?, seeds);
    out.counts = Some(counts);
    out.transparency = Some(transparency);
    out.estimates = prev.into_iter().collect();
    out.recall = rec;
    out.strata = estimate_report.and_then(|r| r.strata);
    finish_report(out)
}
