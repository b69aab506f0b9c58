use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Domain};
use crate::model::PooledItem;
use crate::recall::ConfusionCounts;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Subsample the majority class down to the size of the minority class.
    pub balance: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
            balance: true,
            seed: 0,
        }
    }
}

/// Logistic regression over unigram presence features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramScorer {
    pub vocab: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl UnigramScorer {
    fn rebuild_index(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    fn features(&self, text: &str) -> Vec<usize> {
        token_set(text)
            .iter()
            .filter_map(|t| self.index.get(t).copied())
            .collect()
    }

    /// Probability-like score in `(0, 1)`.
    pub fn score(&self, text: &str) -> f64 {
        let z: f64 = self.bias + self.features(text).iter().map(|&j| self.weights[j]).sum::<f64>();
        sigmoid(z)
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.index.get(token).map(|&j| self.weights[j])
    }

    /// The `k` highest-weighted tokens, heaviest first; ties break by token.
    pub fn top_features(&self, k: usize) -> Vec<(String, f64)> {
        let mut order: Vec<usize> = (0..self.vocab.len()).collect();
        order.sort_by(|&a, &b| {
            self.weights[b]
                .total_cmp(&self.weights[a])
                .then_with(|| self.vocab[a].cmp(&self.vocab[b]))
        });
        order
            .into_iter()
            .take(k)
            .map(|j| (self.vocab[j].clone(), self.weights[j]))
            .collect()
    }
}

/// Fit a unigram logistic regression by full-batch Adagrad, which gives rare
/// tokens steps as large as common ones.
pub fn train_unigram_scorer(corpus: &[Document], params: &TrainParams) -> Result<UnigramScorer> {
    let positives: Vec<usize> = (0..corpus.len()).filter(|&i| corpus[i].label).collect();
    let negatives: Vec<usize> = (0..corpus.len()).filter(|&i| !corpus[i].label).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("training corpus needs both classes"));
    }
    let mut rng = derived_rng(params.seed, Domain::Training, 0);
    let mut chosen: Vec<usize> = if params.balance {
        let (minority, majority) = if positives.len() <= negatives.len() {
            (&positives, &negatives)
        } else {
            (&negatives, &positives)
        };
        let mut keep: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
            .into_iter()
            .map(|i| majority[i])
            .collect();
        keep.extend(minority.iter().copied());
        keep
    } else {
        (0..corpus.len()).collect()
    };
    chosen.sort_unstable();

    let mut scorer = UnigramScorer {
        vocab: Vec::new(),
        weights: Vec::new(),
        bias: 0.0,
        index: HashMap::new(),
    };
    let vocab: BTreeSet<String> = chosen.iter().flat_map(|&i| token_set(&corpus[i].text)).collect();
    scorer.vocab = vocab.into_iter().collect();
    scorer.rebuild_index();
    scorer.weights = vec![0.0; scorer.vocab.len()];

    let docs: Vec<(Vec<usize>, f64)> = chosen
        .iter()
        .map(|&i| (scorer.features(&corpus[i].text), if corpus[i].label { 1.0 } else { 0.0 }))
        .collect();
    let n = docs.len() as f64;
    let mut grad = vec![0.0; scorer.weights.len()];
    let mut accum = vec![0.0; scorer.weights.len()];
    let mut accum_b = 0.0;
    for _ in 0..params.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (feats, y) in &docs {
            let z = scorer.bias + feats.iter().map(|&j| scorer.weights[j]).sum::<f64>();
            let err = sigmoid(z) - y;
            grad_b += err;
            for &j in feats {
                grad[j] += err;
            }
        }
        for ((w, g), a) in scorer.weights.iter_mut().zip(&grad).zip(&mut accum) {
            let g = g / n + params.l2 * *w;
            *a += g * g;
            *w -= params.learning_rate * g / (a.sqrt() + 1e-12);
        }
        let g = grad_b / n;
        accum_b += g * g;
        scorer.bias -= params.learning_rate * g / (accum_b.sqrt() + 1e-12);
    }
    Ok(scorer)
}

/// Removes any text containing one of its keywords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordFilter {
    pub keywords: Vec<String>,
}

impl KeywordFilter {
    pub fn removes(&self, text: &str) -> bool {
        tokenize(text).any(|t| self.keywords.contains(&t))
    }

    /// Confusion counts of the filter's removals against the labels.
    pub fn evaluate(&self, corpus: &[Document]) -> ConfusionCounts {
        ConfusionCounts::from_predictions(corpus.iter().map(|d| (self.removes(&d.text), d.label)))
    }
}

/// Pool items for a scored corpus: the scorer's output as score and the
/// filter's decision as the removal flag.
pub fn corpus_pool(corpus: &[Document], scorer: &UnigramScorer, filter: &KeywordFilter) -> Vec<PooledItem> {
    corpus
        .iter()
        .map(|d| PooledItem {
            id: d.id.clone(),
            score: scorer.score(&d.text),
            label: Some(d.label),
            filtered: Some(filter.removes(&d.text)),
        })
        .collect()
}

/// Keyword list from the `k` most positive unigram weights.
pub fn build_keyword_filter(scorer: &UnigramScorer, k: usize) -> Result<KeywordFilter> {
    if k == 0 {
        return Err(Error::invalid("keyword count must be at least 1"));
    }
    let positive = scorer.weights.iter().filter(|&&w| w > 0.0).count();
    if k > positive {
        log::warn!("requested {k} keywords but only {positive} tokens have positive weight");
    }
    let keywords = scorer
        .top_features(k.min(positive.max(1)))
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(t, _)| t)
        .collect();
    Ok(KeywordFilter { keywords })
}

/// Area under the ROC curve (Mann-Whitney, ties count one half).
pub fn auc(scored: &[(f64, bool)]) -> Option<f64> {
    let mut v = scored.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = v.iter().filter(|x| x.1).count() as f64;
    let n_neg = v.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    // average ranks over tie groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < v.len() {
        let j = i + v[i..].iter().take_while(|x| x.0 == v[i].0).count();
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * v[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// A corpus shaped like a keyword-moderated comment stream.
///
/// Counts are exact: `round(size·prevalence)` positives, of which
/// `round(P·keyword_recall)` carry one of the strong keywords, plus enough
/// negatives carrying a keyword that removals have precision
/// `keyword_precision`. Every text also holds neutral filler and, more often
/// for positives, weakly indicative tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeywordCorpusSpec {
    pub size: usize,
    pub prevalence: f64,
    pub keyword_recall: f64,
    pub keyword_precision: f64,
    pub num_keywords: usize,
    pub num_weak: usize,
    pub weak_rate_positive: f64,
    pub weak_rate_negative: f64,
    pub neutral_vocab: usize,
    pub seed: u64,
}

impl KeywordCorpusSpec {
    /// 5.9% prevalence, filter precision 58% and recall 33%.
    pub fn moderation_shaped(size: usize, seed: u64) -> Self {
        KeywordCorpusSpec {
            size,
            prevalence: 0.059,
            keyword_recall: 0.33,
            keyword_precision: 0.58,
            num_keywords: 10,
            num_weak: 30,
            weak_rate_positive: 0.08,
            weak_rate_negative: 0.02,
            neutral_vocab: 500,
            seed,
        }
    }

    pub fn keyword(i: usize) -> String {
        format!("kw{i}")
    }
}

pub fn keyword_corpus(spec: &KeywordCorpusSpec) -> Result<Vec<Document>> {
    let ok = |x: f64| x > 0.0 && x < 1.0;
    if spec.size == 0
        || !ok(spec.prevalence)
        || !ok(spec.keyword_recall)
        || !(spec.keyword_precision > 0.0 && spec.keyword_precision <= 1.0)
        || spec.num_keywords == 0
        || spec.neutral_vocab == 0
    {
        return Err(Error::invalid("invalid keyword corpus spec"));
    }
    let mut rng = derived_rng(spec.seed, Domain::Corpus, 0);
    let n_pos = (spec.size as f64 * spec.prevalence).round() as usize;
    let tp = (n_pos as f64 * spec.keyword_recall).round() as usize;
    let removals = (tp as f64 / spec.keyword_precision).round() as usize;
    let fp = removals.saturating_sub(tp);
    if fp > spec.size - n_pos {
        return Err(Error::invalid("not enough negatives for the requested precision"));
    }

    // roles: 0 = negative, 1 = negative with keyword, 2 = positive, 3 = positive with keyword
    let mut roles = vec![0u8; spec.size];
    roles[..fp].fill(1);
    roles[fp..fp + n_pos - tp].fill(2);
    roles[fp + n_pos - tp..fp + n_pos].fill(3);
    roles.shuffle(&mut rng);

    let width = spec.size.to_string().len();
    Ok(roles
        .into_iter()
        .enumerate()
        .map(|(i, role)| {
            let label = role >= 2;
            let mut tokens: Vec<String> = (0..rng.random_range(6..=14))
                .map(|_| format!("w{}", rng.random_range(0..spec.neutral_vocab)))
                .collect();
            let weak_rate = if label { spec.weak_rate_positive } else { spec.weak_rate_negative };
            for j in 0..spec.num_weak {
                if rng.random_bool(weak_rate) {
                    tokens.push(format!("tox{j}"));
                }
            }
            if role % 2 == 1 {
                tokens.push(KeywordCorpusSpec::keyword(rng.random_range(0..spec.num_keywords)));
            }
            tokens.shuffle(&mut rng);
            Document {
                id: format!("doc-{i:0width$}"),
                text: tokens.join(" "),
                label,
            }
        })
        .collect())
}

/// Texts whose tokens come from the document's own class vocabulary with
/// probability `indicative`, and from a shared vocabulary otherwise.
pub fn indicative_corpus(size: usize, prevalence: f64, indicative: f64, seed: u64) -> Vec<Document> {
    let mut rng = derived_rng(seed, Domain::Corpus, 1);
    (0..size)
        .map(|i| {
            let label = rng.random_bool(prevalence);
            let prefix = if label { "pos" } else { "neg" };
            let len = rng.random_range(3..=8);
            let text = (0..len)
                .map(|_| {
                    if rng.random_bool(indicative) {
                        format!("{prefix}{}", rng.random_range(0..50))
                    } else {
                        format!("any{}", rng.random_range(0..100))
                    }
                })
                .collect::<Vec<_>>()
                .join(" ");
            Document {
                id: format!("d{i}"),
                text,
                label,
            }
        })
        .collect()
}
