//! Simulation laboratory: synthetic pools, a unigram keyword filter and
//! seeded multi-trial experiments where annotating an item reveals its
//! stored label.

mod experiment;
mod pool;
mod text;

pub use experiment::{
    mean_sd, Design, Experiment, ExperimentConfig, ExperimentResults, PoolSource, PointSummary,
    TrialResult,
};
pub use pool::{generate_pool, SyntheticPoolSpec};
pub use text::{
    auc, build_keyword_filter, corpus_pool, indicative_corpus, keyword_corpus, tokenize, train_unigram_scorer,
    Document, KeywordCorpusSpec, KeywordFilter, TrainParams, UnigramScorer,
};
