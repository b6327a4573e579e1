//! External hard-criterion validation: TF-IDF sentence matching against
//! requirement keyword clusters, hard-signal rates with bootstrap-stability
//! tau calibration, the ablation grid, keyword signal rates, and correlation
//! checks.
//!
//! The vectorizer semantics are fixed to the reference tool-chain defaults:
//! lowercased word tokens of two or more word characters (or raw character
//! n-grams), smoothed idf `ln((1+N)/(1+df)) + 1`, optional sublinear or
//! binary term frequency, and Euclidean normalization per document.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coders::Codebook;
use crate::corpus::{split_sentences, DocumentSource};
use crate::requirement::RequirementId;
use crate::rng::stream;
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum HardSignalError {
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("vocabulary is empty after min_df filtering")]
    EmptyVocabulary,
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} has zero variance; correlation is undefined")]
    ZeroVariance(&'static str),
    #[error("tau {0} outside [0, 1]")]
    InvalidTau(f64),
    #[error("calibration needs at least 2 bootstrap samples, got {0}")]
    TooFewBootstrap(usize),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Tokenization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    /// Lowercased tokens of >= 2 word characters, n-grams joined by spaces.
    Word,
    /// Character n-grams over the lowercased raw string.
    Char,
}

impl Analyzer {
    pub fn name(self) -> &'static str {
        match self {
            Analyzer::Word => "word",
            Analyzer::Char => "char",
        }
    }
}

/// TF-IDF vectorizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub analyzer: Analyzer,
    pub ngram_range: (usize, usize),
    pub sublinear_tf: bool,
    pub binary_tf: bool,
    pub min_df: usize,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            analyzer: Analyzer::Word,
            ngram_range: (1, 1),
            sublinear_tf: true,
            binary_tf: false,
            min_df: 1,
        }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), HardSignalError> {
        let (lo, hi) = self.ngram_range;
        if lo < 1 || lo > hi {
            return Err(HardSignalError::InvalidConfig(format!(
                "ngram_range ({lo}, {hi}) must satisfy 1 <= min_n <= max_n"
            )));
        }
        if self.min_df < 1 {
            return Err(HardSignalError::InvalidConfig("min_df must be >= 1".into()));
        }
        if self.sublinear_tf && self.binary_tf {
            return Err(HardSignalError::InvalidConfig(
                "sublinear_tf and binary_tf cannot both be set".into(),
            ));
        }
        Ok(())
    }
}

fn word_tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in lower.chars() {
        if c.is_alphanumeric() || c == '_' {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.retain(|t| t.chars().count() >= 2);
    tokens
}

/// Terms of one document under the configured analyzer and n-gram range.
fn analyze(text: &str, config: &VectorizerConfig) -> Vec<String> {
    let (lo, hi) = config.ngram_range;
    match config.analyzer {
        Analyzer::Word => {
            let tokens = word_tokens(text);
            let mut terms = Vec::new();
            for n in lo..=hi {
                if n > tokens.len() {
                    break;
                }
                for window in tokens.windows(n) {
                    terms.push(window.join(" "));
                }
            }
            terms
        }
        Analyzer::Char => {
            let chars: Vec<char> = text.to_lowercase().chars().collect();
            let mut terms = Vec::new();
            for n in lo..=hi {
                if n > chars.len() {
                    break;
                }
                for window in chars.windows(n) {
                    terms.push(window.iter().collect());
                }
            }
            terms
        }
    }
}

/// A fitted vocabulary with smoothed idf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    /// Vocabulary in sorted order; vector indices refer to it.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub config: VectorizerConfig,
}

/// Sparse unit-length document vector: `(term index, weight)` sorted by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.0[i].1 * other.0[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Weight of one term index, 0 when absent.
    pub fn get(&self, index: usize) -> f64 {
        self.0
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|pos| self.0[pos].1)
            .unwrap_or(0.0)
    }
}

/// Cosine similarity of two unit-normalized vectors.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    a.dot(b)
}

/// A fitted model plus the vectorized corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfFit {
    pub model: TfidfModel,
    pub vectors: Vec<SparseVector>,
}

/// Fits the vocabulary on `texts` and returns unit-length TF-IDF vectors.
pub fn tfidf_vectorize(
    texts: &[String],
    config: &VectorizerConfig,
) -> Result<TfidfFit, HardSignalError> {
    config.validate()?;
    if texts.is_empty() {
        return Err(HardSignalError::EmptyInput("corpus".into()));
    }

    let analyzed: Vec<Vec<String>> = texts.iter().map(|t| analyze(t, config)).collect();

    let mut document_frequency: HashMap<&str, usize> = HashMap::new();
    for terms in &analyzed {
        let unique: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
        for term in unique {
            *document_frequency.entry(term).or_insert(0) += 1;
        }
    }
    let mut vocabulary: Vec<String> = document_frequency
        .iter()
        .filter(|(_, df)| **df >= config.min_df)
        .map(|(term, _)| term.to_string())
        .collect();
    vocabulary.sort();
    if vocabulary.is_empty() {
        return Err(HardSignalError::EmptyVocabulary);
    }
    let index: HashMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let n_docs = texts.len() as f64;
    let idf: Vec<f64> = vocabulary
        .iter()
        .map(|term| {
            let df = document_frequency[term.as_str()] as f64;
            ((1.0 + n_docs) / (1.0 + df)).ln() + 1.0
        })
        .collect();

    let vectors: Vec<SparseVector> = analyzed
        .iter()
        .map(|terms| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for term in terms {
                if let Some(i) = index.get(term.as_str()) {
                    *counts.entry(*i).or_insert(0.0) += 1.0;
                }
            }
            let mut entries: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(i, count)| {
                    let tf = if config.binary_tf {
                        1.0
                    } else if config.sublinear_tf {
                        1.0 + count.ln()
                    } else {
                        count
                    };
                    (i, tf * idf[i])
                })
                .collect();
            let norm: f64 = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut entries {
                    *w /= norm;
                }
            }
            SparseVector(entries)
        })
        .collect();

    Ok(TfidfFit {
        model: TfidfModel {
            vocabulary,
            idf,
            config: *config,
        },
        vectors,
    })
}

/// Per-requirement best sentence match within one document.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSimilarity {
    pub requirement_ids: Vec<RequirementId>,
    /// Max cosine per requirement.
    pub scores: Vec<f64>,
    /// Index of the best-matching sentence per requirement.
    pub argmax: Vec<usize>,
}

/// Fits a joint vocabulary over the requirement texts and the document
/// sentences and returns each requirement's maximum sentence cosine.
pub fn max_similarity(
    requirement_texts: &BTreeMap<RequirementId, String>,
    doc_sentences: &[String],
    config: &VectorizerConfig,
) -> Result<MaxSimilarity, HardSignalError> {
    if doc_sentences.is_empty() {
        return Err(HardSignalError::EmptyInput("doc_sentences".into()));
    }
    for (r, text) in requirement_texts {
        if text.trim().is_empty() {
            return Err(HardSignalError::EmptyInput(format!(
                "requirement text for {r}"
            )));
        }
    }
    let requirement_ids: Vec<RequirementId> = requirement_texts.keys().copied().collect();
    let mut corpus: Vec<String> = requirement_ids
        .iter()
        .map(|r| requirement_texts[r].clone())
        .collect();
    corpus.extend(doc_sentences.iter().cloned());

    let fit = tfidf_vectorize(&corpus, config)?;
    let (req_vectors, sent_vectors) = fit.vectors.split_at(requirement_ids.len());

    let mut scores = Vec::with_capacity(requirement_ids.len());
    let mut argmax = Vec::with_capacity(requirement_ids.len());
    for rv in req_vectors {
        let mut best = f64::NEG_INFINITY;
        let mut best_j = 0usize;
        for (j, sv) in sent_vectors.iter().enumerate() {
            let sim = cosine(rv, sv);
            if sim > best {
                best = sim;
                best_j = j;
            }
        }
        scores.push(best);
        argmax.push(best_j);
    }
    Ok(MaxSimilarity {
        requirement_ids,
        scores,
        argmax,
    })
}

/// The R x D matrix of best-sentence cosines per (requirement, document).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub requirement_ids: Vec<RequirementId>,
    pub doc_ids: Vec<String>,
    /// `s[r][d]`, each in [0, 1].
    pub s: Vec<Vec<f64>>,
    pub argmax_sentence: Vec<Vec<usize>>,
}

impl SimilarityMatrix {
    pub fn n_requirements(&self) -> usize {
        self.requirement_ids.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }
}

/// Builds the similarity matrix over `(doc_id, sentences)` pairs. The
/// vocabulary is fitted jointly with the requirement texts per document,
/// matching the reference pipeline.
pub fn build_similarity_matrix(
    requirement_texts: &BTreeMap<RequirementId, String>,
    docs: &[(String, Vec<String>)],
    config: &VectorizerConfig,
) -> Result<SimilarityMatrix, HardSignalError> {
    if docs.is_empty() {
        return Err(HardSignalError::EmptyInput("documents".into()));
    }
    let requirement_ids: Vec<RequirementId> = requirement_texts.keys().copied().collect();
    let r = requirement_ids.len();
    let mut s = vec![vec![0.0f64; docs.len()]; r];
    let mut argmax = vec![vec![0usize; docs.len()]; r];
    for (d, (doc_id, sentences)) in docs.iter().enumerate() {
        if sentences.is_empty() {
            return Err(HardSignalError::EmptyInput(format!(
                "document {doc_id} has no sentences"
            )));
        }
        let result = max_similarity(requirement_texts, sentences, config)?;
        for i in 0..r {
            s[i][d] = result.scores[i];
            argmax[i][d] = result.argmax[i];
        }
    }
    Ok(SimilarityMatrix {
        requirement_ids,
        doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
        s,
        argmax_sentence: argmax,
    })
}

/// Per-requirement hard-signal rate: the share of documents whose best match
/// reaches `tau`.
pub fn hard_signal_rate(matrix: &SimilarityMatrix, tau: f64) -> Result<Vec<f64>, HardSignalError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(HardSignalError::InvalidTau(tau));
    }
    let d = matrix.n_docs() as f64;
    Ok(matrix
        .s
        .iter()
        .map(|row| row.iter().filter(|v| **v >= tau).count() as f64 / d)
        .collect())
}

/// Stability surrogate: compare each bootstrap sample's above-median
/// requirement set against the first sample only (the default, matching the
/// reference script) or against all pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StabilityMode {
    #[default]
    AgainstFirst,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    pub n_boot: usize,
    pub seed: u64,
    pub mode: StabilityMode,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            n_boot: 200,
            seed: 7,
            mode: StabilityMode::AgainstFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauCalibration {
    pub tau_star: f64,
    pub stability: f64,
}

/// Selects the grid tau maximizing bootstrap Jaccard stability of the
/// above-median-HSR requirement set.
///
/// Semantics follow the reference script exactly: one sequential random
/// stream spans all grid candidates and samples; each sample draws D document
/// indices with replacement; requirements with HSR at or above the sample
/// median (midpoint convention) form the set; ties keep the earlier
/// candidate (strict maximum).
pub fn calibrate_tau(
    matrix: &SimilarityMatrix,
    grid: &[f64],
    params: &CalibrationParams,
) -> Result<TauCalibration, HardSignalError> {
    if grid.is_empty() {
        return Err(HardSignalError::EmptyInput("tau grid".into()));
    }
    if matrix.n_docs() == 0 {
        return Err(HardSignalError::EmptyInput("documents".into()));
    }
    if params.n_boot < 2 {
        return Err(HardSignalError::TooFewBootstrap(params.n_boot));
    }
    for tau in grid {
        if !(0.0..=1.0).contains(tau) {
            return Err(HardSignalError::InvalidTau(*tau));
        }
    }

    let d = matrix.n_docs();
    let mut rng = stream(params.seed);
    let mut best_tau = grid[0];
    let mut best_score = -1.0f64;

    for tau in grid {
        let mut sets: Vec<BTreeSet<usize>> = Vec::with_capacity(params.n_boot);
        for _ in 0..params.n_boot {
            let idx: Vec<usize> = (0..d).map(|_| rng.random_range(0..d)).collect();
            let hsr: Vec<f64> = matrix
                .s
                .iter()
                .map(|row| idx.iter().filter(|j| row[**j] >= *tau).count() as f64 / d as f64)
                .collect();
            let median = stats::midpoint_median(&hsr);
            sets.push(
                hsr.iter()
                    .enumerate()
                    .filter(|(_, h)| **h >= median)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }
        let jaccard = |a: &BTreeSet<usize>, b: &BTreeSet<usize>| -> f64 {
            let inter = a.intersection(b).count();
            let union = a.union(b).count();
            inter as f64 / union.max(1) as f64
        };
        let score = match params.mode {
            StabilityMode::AgainstFirst => {
                let base = &sets[0];
                let values: Vec<f64> = sets[1..].iter().map(|s| jaccard(base, s)).collect();
                stats::mean(&values)
            }
            StabilityMode::AllPairs => {
                let mut values = Vec::new();
                for i in 0..sets.len() {
                    for j in (i + 1)..sets.len() {
                        values.push(jaccard(&sets[i], &sets[j]));
                    }
                }
                stats::mean(&values)
            }
        };
        if score > best_score {
            best_tau = *tau;
            best_score = score;
        }
    }
    Ok(TauCalibration {
        tau_star: best_tau,
        stability: best_score,
    })
}

/// One ablation grid entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub config_id: String,
    pub pages: usize,
    pub vectorizer: VectorizerConfig,
    pub tau_grid: Vec<f64>,
}

/// Default tau grid for fixed-grid threshold sensitivity.
pub const DEFAULT_TAU_GRID: [f64; 4] = [0.15, 0.20, 0.25, 0.30];

/// One output row of the ablation summary (one per config x tau).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub pages: usize,
    pub tokenizer: String,
    pub ngram_range: String,
    pub sublinear_tf: bool,
    pub binary: bool,
    pub tau: f64,
    #[serde(rename = "HSR_mean")]
    pub hsr_mean: f64,
    #[serde(rename = "HSR_median")]
    pub hsr_median: f64,
    pub tau_star: f64,
    pub tau_star_stability: f64,
}

/// Spearman rho between the HSR vectors at two adjacent grid taus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpearmanStep {
    pub config_id: String,
    pub tau_low: f64,
    pub tau_high: f64,
    /// `None` when a vector is constant and rank correlation is undefined.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutput {
    pub rows: Vec<AblationRow>,
    pub spearman_adjacent: Vec<SpearmanStep>,
}

/// Sentences of the first `pages` pages of a document.
pub fn document_sentences(doc: &DocumentSource, pages: usize) -> Vec<String> {
    let end = if !doc.page_breaks.is_empty() && doc.page_breaks.len() > pages {
        doc.page_breaks[pages]
    } else {
        doc.text.len()
    };
    split_sentences(&doc.text[..end])
}

/// Runs the ablation grid: per config, builds the similarity matrix from the
/// first `pages` pages of each document, calibrates tau on the config's
/// grid, and emits one summary row per grid tau plus the adjacent-tau
/// Spearman curve.
pub fn run_ablation(
    docs: &[DocumentSource],
    requirement_texts: &BTreeMap<RequirementId, String>,
    configs: &[AblationConfig],
    params: &CalibrationParams,
) -> Result<AblationOutput, HardSignalError> {
    let mut rows = Vec::new();
    let mut spearman_adjacent = Vec::new();
    for config in configs {
        config.vectorizer.validate()?;
        let doc_sentences: Vec<(String, Vec<String>)> = docs
            .iter()
            .map(|d| (d.doc_id.clone(), document_sentences(d, config.pages)))
            .collect();
        let matrix = build_similarity_matrix(requirement_texts, &doc_sentences, &config.vectorizer)?;
        let calibration = calibrate_tau(&matrix, &config.tau_grid, params)?;

        let mut hsr_by_tau: Vec<(f64, Vec<f64>)> = Vec::new();
        for tau in &config.tau_grid {
            let hsr = hard_signal_rate(&matrix, *tau)?;
            rows.push(AblationRow {
                pages: config.pages,
                tokenizer: config.vectorizer.analyzer.name().to_string(),
                ngram_range: format!(
                    "({}, {})",
                    config.vectorizer.ngram_range.0, config.vectorizer.ngram_range.1
                ),
                sublinear_tf: config.vectorizer.sublinear_tf,
                binary: config.vectorizer.binary_tf,
                tau: *tau,
                hsr_mean: stats::mean(&hsr),
                hsr_median: stats::midpoint_median(&hsr),
                tau_star: calibration.tau_star,
                tau_star_stability: calibration.stability,
            });
            hsr_by_tau.push((*tau, hsr));
        }
        for pair in hsr_by_tau.windows(2) {
            let (tau_low, a) = &pair[0];
            let (tau_high, b) = &pair[1];
            spearman_adjacent.push(SpearmanStep {
                config_id: config.config_id.clone(),
                tau_low: *tau_low,
                tau_high: *tau_high,
                rho: spearman(a, b).ok(),
            });
        }
    }
    Ok(AblationOutput {
        rows,
        spearman_adjacent,
    })
}

/// Ablation summary CSV (`pages, tokenizer, ngram_range, sublinear_tf,
/// binary, tau, HSR_mean, HSR_median, tau_star, tau_star_stability`).
pub fn write_ablation_csv<W: io::Write>(
    rows: &[AblationRow],
    writer: W,
) -> Result<(), HardSignalError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-requirement keyword signal rates over an external corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalRates {
    /// Share of signal sentences mapped to each requirement.
    pub rates: BTreeMap<RequirementId, f64>,
    pub total_signal_sentences: usize,
    /// Signal sentences that matched no requirement cluster; excluded from
    /// the per-requirement numerators but counted in the denominator.
    pub unmapped: usize,
}

/// Extracts sentences matching any signal pattern (case-insensitive
/// substring), maps each to a requirement via the codebook's keyword
/// clusters, and reports the per-requirement share of signal sentences.
pub fn external_signal_rate(
    docs: &[DocumentSource],
    codebook: &Codebook,
    signal_patterns: &[String],
) -> SignalRates {
    let lowered: Vec<String> = signal_patterns.iter().map(|p| p.to_lowercase()).collect();
    let mut counts: BTreeMap<RequirementId, usize> = RequirementId::ALL
        .iter()
        .map(|r| (*r, 0usize))
        .collect();
    let mut total = 0usize;
    let mut unmapped = 0usize;
    for doc in docs {
        for sentence in split_sentences(&doc.text) {
            let lower = sentence.to_lowercase();
            if !lowered.iter().any(|p| lower.contains(p)) {
                continue;
            }
            total += 1;
            match codebook.classify_requirement(&sentence) {
                RequirementId::Unmapped => unmapped += 1,
                requirement => *counts.get_mut(&requirement).expect("mapped key") += 1,
            }
        }
    }
    let rates = counts
        .into_iter()
        .map(|(r, c)| {
            let rate = if total == 0 { 0.0 } else { c as f64 / total as f64 };
            (r, rate)
        })
        .collect();
    SignalRates {
        rates,
        total_signal_sentences: total,
        unmapped,
    }
}

/// Standard sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, HardSignalError> {
    if x.len() != y.len() {
        return Err(HardSignalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(HardSignalError::EmptyInput(
            "correlation needs >= 2 points".into(),
        ));
    }
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        cov += (a - mx) * (b - my);
        var_x += (a - mx) * (a - mx);
        var_y += (b - my) * (b - my);
    }
    if var_x == 0.0 {
        return Err(HardSignalError::ZeroVariance("x"));
    }
    if var_y == 0.0 {
        return Err(HardSignalError::ZeroVariance("y"));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Average ranks with midpoint tie handling.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("comparable"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, HardSignalError> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn word_config(sublinear: bool, binary: bool) -> VectorizerConfig {
        VectorizerConfig {
            analyzer: Analyzer::Word,
            ngram_range: (1, 1),
            sublinear_tf: sublinear,
            binary_tf: binary,
            min_df: 1,
        }
    }

    fn dense(fit: &TfidfFit, doc: usize) -> Vec<f64> {
        (0..fit.model.vocabulary.len())
            .map(|i| fit.vectors[doc].get(i))
            .collect()
    }

    fn assert_close(actual: &[f64], expected: &[f64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected.iter()) {
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
    }

    const TOY: [&str; 3] = [
        "children safety online",
        "children data privacy safety",
        "audit data systems",
    ];
    // Corpus with a repeated token so raw/sublinear/binary weighting differ.
    const REPEAT: [&str; 3] = [
        "audit audit audit systems online",
        "systems review of audits",
        "online audit of data systems",
    ];

    #[test]
    fn vocabulary_is_sorted_and_tokens_filtered() {
        let fit = tfidf_vectorize(&texts(&TOY), &word_config(false, false)).unwrap();
        assert_eq!(
            fit.model.vocabulary,
            vec!["audit", "children", "data", "online", "privacy", "safety", "systems"]
        );
        // Single-character tokens are dropped.
        let fit = tfidf_vectorize(&texts(&["a b ab cd", "ab xy"]), &word_config(false, false))
            .unwrap();
        assert_eq!(fit.model.vocabulary, vec!["ab", "cd", "xy"]);
    }

    #[test]
    fn matches_reference_raw_weighting() {
        let fit = tfidf_vectorize(&texts(&TOY), &word_config(false, false)).unwrap();
        assert_close(
            &dense(&fit, 1),
            &[
                0.0,
                0.45985352875883484,
                0.45985352875883484,
                0.0,
                0.60465212830531101,
                0.45985352875883484,
                0.0,
            ],
        );
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 0.47627592481812164).abs() < 1e-9);
        assert_eq!(cosine(&fit.vectors[0], &fit.vectors[2]), 0.0);
        assert!((cosine(&fit.vectors[1], &fit.vectors[2]) - 0.21780024335978757).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_all_tf_modes_on_repeats() {
        // raw counts
        let fit = tfidf_vectorize(&texts(&REPEAT), &word_config(false, false)).unwrap();
        assert_close(
            &dense(&fit, 0),
            &[
                0.92130836536417704,
                0.0,
                0.0,
                0.0,
                0.30710278845472566,
                0.0,
                0.238492711069584,
            ],
        );
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 0.082328880346947159).abs() < 1e-9);
        assert!((cosine(&fit.vectors[0], &fit.vectors[2]) - 0.61219283289770621).abs() < 1e-9);

        // sublinear tf
        let fit = tfidf_vectorize(&texts(&REPEAT), &word_config(true, false)).unwrap();
        assert_close(
            &dense(&fit, 0),
            &[
                0.85623670345668401,
                0.0,
                0.0,
                0.0,
                0.40800137694804833,
                0.0,
                0.31684946593315766,
            ],
        );
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 0.10937802523111109).abs() < 1e-9);
        assert!((cosine(&fit.vectors[0], &fit.vectors[2]) - 0.65406084228310413).abs() < 1e-9);

        // binary tf
        let fit = tfidf_vectorize(&texts(&REPEAT), &word_config(false, true)).unwrap();
        assert_close(
            &dense(&fit, 0),
            &[
                0.61980537994060725,
                0.0,
                0.0,
                0.0,
                0.61980537994060725,
                0.0,
                0.48133416873660545,
            ],
        );
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 0.16615896983640419).abs() < 1e-9);
        assert!((cosine(&fit.vectors[0], &fit.vectors[2]) - 0.6987142457043658).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_word_bigrams() {
        let config = VectorizerConfig {
            ngram_range: (1, 2),
            ..word_config(true, false)
        };
        let fit = tfidf_vectorize(&texts(&TOY), &config).unwrap();
        assert_eq!(fit.model.vocabulary.len(), 14);
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 0.2369213187062372).abs() < 1e-9);
        assert!((cosine(&fit.vectors[1], &fit.vectors[2]) - 0.1128747529453487).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_char_ngrams() {
        let config = VectorizerConfig {
            analyzer: Analyzer::Char,
            ngram_range: (3, 5),
            ..word_config(true, false)
        };
        let fit = tfidf_vectorize(&texts(&["abc ab", "bca abc"]), &config).unwrap();
        assert_eq!(fit.model.vocabulary.len(), 19);
        assert_eq!(fit.model.vocabulary[0], " ab");
        assert!((fit.vectors[0].get(0) - 0.25136004024610159).abs() < 1e-9);
        assert!((fit.vectors[1].get(1) - 0.3013403421812651).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_min_df() {
        let config = VectorizerConfig {
            min_df: 2,
            ..word_config(false, false)
        };
        let fit = tfidf_vectorize(&texts(&TOY), &config).unwrap();
        assert_eq!(fit.model.vocabulary, vec!["children", "data", "safety"]);
        assert_close(
            &dense(&fit, 0),
            &[0.70710678118654757, 0.0, 0.70710678118654757],
        );
        assert_close(&dense(&fit, 2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn identical_documents_identical_vectors() {
        let fit = tfidf_vectorize(
            &texts(&["same text here ok", "same text here ok"]),
            &word_config(true, false),
        )
        .unwrap();
        assert_eq!(fit.vectors[0], fit.vectors[1]);
        assert!((cosine(&fit.vectors[0], &fit.vectors[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocabulary_cosine_zero() {
        let fit = tfidf_vectorize(
            &texts(&["alpha beta gamma", "delta epsilon zeta"]),
            &word_config(true, false),
        )
        .unwrap();
        assert_eq!(cosine(&fit.vectors[0], &fit.vectors[1]), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(VectorizerConfig {
            ngram_range: (2, 1),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VectorizerConfig {
            sublinear_tf: true,
            binary_tf: true,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VectorizerConfig {
            min_df: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(tfidf_vectorize(&[], &Default::default()).is_err());
        assert!(matches!(
            tfidf_vectorize(&texts(&["a b c"]), &word_config(true, false)),
            Err(HardSignalError::EmptyVocabulary)
        ));
    }

    fn requirement_map(entries: &[(RequirementId, &str)]) -> BTreeMap<RequirementId, String> {
        entries
            .iter()
            .map(|(r, t)| (*r, t.to_string()))
            .collect()
    }

    #[test]
    fn max_similarity_verbatim_sentence_is_one() {
        let reqs = requirement_map(&[(RequirementId::R1, "regulatory oversight bodies")]);
        let sentences = texts(&[
            "completely unrelated words",
            "regulatory oversight bodies",
        ]);
        let result = max_similarity(&reqs, &sentences, &word_config(true, false)).unwrap();
        assert!((result.scores[0] - 1.0).abs() < 1e-12);
        assert_eq!(result.argmax[0], 1);
    }

    #[test]
    fn max_similarity_disjoint_is_zero() {
        let reqs = requirement_map(&[(RequirementId::R2, "child safety matters")]);
        let sentences = texts(&["unrelated corpus entirely", "nothing shared here"]);
        let result = max_similarity(&reqs, &sentences, &word_config(true, false)).unwrap();
        assert_eq!(result.scores[0], 0.0);
    }

    #[test]
    fn max_similarity_matches_exhaustive_cosine() {
        let reqs = requirement_map(&[
            (RequirementId::R1, "audit and oversight of systems"),
            (RequirementId::R3, "privacy and data protection"),
        ]);
        let sentences = texts(&[
            "the audit of these systems found gaps",
            "privacy matters for children data",
            "entirely unrelated sentence content",
        ]);
        let config = word_config(true, false);
        let result = max_similarity(&reqs, &sentences, &config).unwrap();

        // Oracle: joint fit, then exhaustive pairwise cosine.
        let mut corpus = vec![
            "audit and oversight of systems".to_string(),
            "privacy and data protection".to_string(),
        ];
        corpus.extend(sentences.iter().cloned());
        let fit = tfidf_vectorize(&corpus, &config).unwrap();
        for r in 0..2 {
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0;
            for j in 0..sentences.len() {
                let sim = cosine(&fit.vectors[r], &fit.vectors[2 + j]);
                if sim > best {
                    best = sim;
                    best_j = j;
                }
            }
            assert!((result.scores[r] - best).abs() < 1e-12);
            assert_eq!(result.argmax[r], best_j);
        }
        assert!(result.scores.iter().all(|s| (0.0..=1.0 + 1e-12).contains(s)));
    }

    fn matrix_from(s: Vec<Vec<f64>>) -> SimilarityMatrix {
        let r = s.len();
        let d = s[0].len();
        SimilarityMatrix {
            requirement_ids: RequirementId::ALL[..r].to_vec(),
            doc_ids: (0..d).map(|i| format!("D{i}")).collect(),
            argmax_sentence: vec![vec![0; d]; r],
            s,
        }
    }

    #[test]
    fn hsr_cases() {
        let m = matrix_from(vec![vec![0.1, 0.3, 0.5]]);
        assert_eq!(hard_signal_rate(&m, 0.0).unwrap(), vec![1.0]);
        assert_eq!(hard_signal_rate(&m, 0.9).unwrap(), vec![0.0]);
        let hsr = hard_signal_rate(&m, 0.25).unwrap();
        assert!((hsr[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(hard_signal_rate(&m, 1.5).is_err());
    }

    #[test]
    fn hsr_monotone_in_tau() {
        let m = matrix_from(vec![
            vec![0.12, 0.52, 0.33, 0.91],
            vec![0.05, 0.45, 0.76, 0.18],
        ]);
        let mut prev = hard_signal_rate(&m, 0.0).unwrap();
        for step in 1..=20 {
            let tau = step as f64 / 20.0;
            let current = hard_signal_rate(&m, tau).unwrap();
            for (p, c) in prev.iter().zip(current.iter()) {
                assert!(c <= p);
            }
            prev = current;
        }
    }

    #[test]
    fn calibrate_constant_matrix_keeps_first_grid_tau() {
        let m = matrix_from(vec![vec![0.4; 5], vec![0.4; 5], vec![0.4; 5]]);
        let result =
            calibrate_tau(&m, &[0.15, 0.20, 0.25, 0.30], &CalibrationParams::default()).unwrap();
        assert_eq!(result.tau_star, 0.15);
        assert_eq!(result.stability, 1.0);
    }

    #[test]
    fn calibrate_single_grid_value() {
        let m = matrix_from(vec![vec![0.2, 0.8], vec![0.6, 0.1]]);
        let result = calibrate_tau(&m, &[0.5], &CalibrationParams::default()).unwrap();
        assert_eq!(result.tau_star, 0.5);
    }

    #[test]
    fn calibrate_is_deterministic() {
        let m = matrix_from(vec![
            vec![0.2, 0.8, 0.5, 0.1],
            vec![0.6, 0.1, 0.9, 0.4],
            vec![0.3, 0.3, 0.2, 0.7],
        ]);
        let params = CalibrationParams::default();
        let a = calibrate_tau(&m, &DEFAULT_TAU_GRID, &params).unwrap();
        let b = calibrate_tau(&m, &DEFAULT_TAU_GRID, &params).unwrap();
        assert_eq!(a, b);
        let all_pairs = CalibrationParams {
            mode: StabilityMode::AllPairs,
            ..params
        };
        let c = calibrate_tau(&m, &DEFAULT_TAU_GRID, &all_pairs).unwrap();
        assert!((-1.0..=1.0).contains(&c.stability) || c.stability <= 1.0);
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[2.0, 3.0]),
            Err(HardSignalError::ZeroVariance("x"))
        ));

        // 4-point fixture against the direct formula.
        let x = [0.23, 0.11, 0.98, 0.45];
        let y = [3.0, 1.0, 3.0, 1.0];
        let n = 4.0;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
            * y.iter().map(|b| (b - my).powi(2)).sum::<f64>())
        .sqrt();
        assert!((pearson(&x, &y).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [10.0, 20.0, 20.0, 30.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let inv = [4.0, 3.0, 2.0, 1.0];
        let fwd = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&fwd, &inv).unwrap() + 1.0).abs() < 1e-12);
    }
}
