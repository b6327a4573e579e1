//! Inter-rater reliability and stability statistics: Krippendorff's alpha,
//! weighted Cohen's kappa, Fleiss' kappa, ICC(2,k), and percentile-bootstrap
//! confidence intervals.
//!
//! Degenerate inputs (every rating identical) make the chance-disagreement
//! terms vanish; by convention those cases return 1.0 with the
//! [`Estimate::degenerate`] flag set.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum ReliabilityError {
    #[error("ratings matrix needs at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("ratings matrix rows must all have {expected} entries, row {row} has {got}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("no pairable values (no unit has two or more ratings)")]
    NoPairableValues,
    #[error("rating vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("value {0} outside the declared category domain")]
    ValueOutsideDomain(i32),
    #[error("matrix contains missing values; {0} requires complete data")]
    IncompleteData(&'static str),
    #[error("rater counts vary across units ({0} vs {1}); Fleiss' kappa requires a constant count")]
    VaryingRaterCounts(usize, usize),
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("invalid bootstrap parameters: {0}")]
    InvalidBootstrap(String),
}

/// Measurement level of a ratings matrix; selects the alpha distance metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleLevel {
    Nominal,
    Ordinal,
    Interval,
}

/// A units-by-raters matrix of ordinal ratings with optional missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    rows: Vec<Vec<Option<i32>>>,
    n_raters: usize,
    scale: ScaleLevel,
}

impl RatingsMatrix {
    pub fn new(rows: Vec<Vec<Option<i32>>>, scale: ScaleLevel) -> Result<Self, ReliabilityError> {
        let n_raters = rows.first().map(Vec::len).unwrap_or(0);
        if n_raters < 2 {
            return Err(ReliabilityError::TooFewRaters(n_raters));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_raters {
                return Err(ReliabilityError::RaggedRows {
                    row: i,
                    expected: n_raters,
                    got: row.len(),
                });
            }
        }
        Ok(RatingsMatrix {
            rows,
            n_raters,
            scale,
        })
    }

    /// Builds a matrix with no missing cells.
    pub fn complete(rows: Vec<Vec<i32>>, scale: ScaleLevel) -> Result<Self, ReliabilityError> {
        Self::new(
            rows.into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
            scale,
        )
    }

    pub fn n_units(&self) -> usize {
        self.rows.len()
    }

    pub fn n_raters(&self) -> usize {
        self.n_raters
    }

    pub fn scale(&self) -> ScaleLevel {
        self.scale
    }

    pub fn rows(&self) -> &[Vec<Option<i32>>] {
        &self.rows
    }

    /// The matrix as dense `f64` rows; errors when any cell is missing.
    pub fn dense(&self, caller: &'static str) -> Result<Vec<Vec<f64>>, ReliabilityError> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        cell.map(f64::from)
                            .ok_or(ReliabilityError::IncompleteData(caller))
                    })
                    .collect()
            })
            .collect()
    }

    /// One rater's complete column; errors on missing cells.
    pub fn column(&self, rater: usize) -> Result<Vec<i32>, ReliabilityError> {
        self.rows
            .iter()
            .map(|row| row[rater].ok_or(ReliabilityError::IncompleteData("column")))
            .collect()
    }
}

/// A reliability statistic value plus a flag for degenerate inputs where the
/// chance-disagreement term vanished and the value is set by convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub degenerate: bool,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate {
            value,
            degenerate: false,
        }
    }

    fn degenerate(value: f64) -> Self {
        Estimate {
            value,
            degenerate: true,
        }
    }
}

/// Krippendorff's alpha via the coincidence-matrix formulation, with the
/// distance metric selected by the matrix's declared scale. Missing cells are
/// handled by pairable-value accounting; units with fewer than two ratings
/// contribute nothing.
pub fn krippendorff_alpha(m: &RatingsMatrix) -> Result<Estimate, ReliabilityError> {
    // Distinct observed values among pairable units, sorted.
    let mut values: Vec<i32> = Vec::new();
    for row in m.rows() {
        let present: Vec<i32> = row.iter().flatten().copied().collect();
        if present.len() >= 2 {
            values.extend(present);
        }
    }
    if values.is_empty() {
        return Err(ReliabilityError::NoPairableValues);
    }
    values.sort_unstable();
    values.dedup();
    let index_of = |v: i32| values.binary_search(&v).expect("observed value");

    let v = values.len();
    let mut coincidence = vec![vec![0.0f64; v]; v];
    for row in m.rows() {
        let present: Vec<i32> = row.iter().flatten().copied().collect();
        let mu = present.len();
        if mu < 2 {
            continue;
        }
        let pair_weight = 1.0 / (mu as f64 - 1.0);
        for (i, a) in present.iter().enumerate() {
            for (j, b) in present.iter().enumerate() {
                if i != j {
                    coincidence[index_of(*a)][index_of(*b)] += pair_weight;
                }
            }
        }
    }

    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    // Squared distance between value categories c < k.
    let delta_sq = |c: usize, k: usize| -> f64 {
        match m.scale() {
            ScaleLevel::Nominal => {
                if c == k {
                    0.0
                } else {
                    1.0
                }
            }
            ScaleLevel::Interval => {
                let d = f64::from(values[c]) - f64::from(values[k]);
                d * d
            }
            ScaleLevel::Ordinal => {
                let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
                let span: f64 = marginals[lo..=hi].iter().sum();
                let d = span - (marginals[lo] + marginals[hi]) / 2.0;
                d * d
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..v {
        for k in 0..v {
            if c == k {
                continue;
            }
            let d = delta_sq(c, k);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_e == 0.0 {
        // Every pairable value identical: no disagreement is expressible.
        return Ok(Estimate::degenerate(1.0));
    }
    Ok(Estimate::exact(1.0 - d_o / d_e))
}

/// Disagreement weighting scheme for Cohen's kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaWeighting {
    Quadratic,
    Linear,
    Identity,
}

impl KappaWeighting {
    /// Agreement weight for category indices `i`, `j` on a domain of size `n`.
    /// Satisfies `w(i,i) = 1` and `w(i,j)` in `[0, 1]`.
    pub fn weight(self, i: usize, j: usize, n: usize) -> f64 {
        if n < 2 {
            return 1.0;
        }
        let d = i.abs_diff(j) as f64;
        let span = (n - 1) as f64;
        match self {
            KappaWeighting::Quadratic => 1.0 - (d * d) / (span * span),
            KappaWeighting::Linear => 1.0 - d / span,
            KappaWeighting::Identity => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Weighted Cohen's kappa for one rater pair over an explicit shared category
/// domain (needed so the weight denominator is defined even when some
/// categories go unobserved).
pub fn weighted_kappa(
    r1: &[i32],
    r2: &[i32],
    categories: &[i32],
    weighting: KappaWeighting,
) -> Result<Estimate, ReliabilityError> {
    if r1.len() != r2.len() {
        return Err(ReliabilityError::LengthMismatch(r1.len(), r2.len()));
    }
    if r1.is_empty() {
        return Err(ReliabilityError::EmptyInput("weighted_kappa"));
    }
    let idx = |v: i32| {
        categories
            .iter()
            .position(|c| *c == v)
            .ok_or(ReliabilityError::ValueOutsideDomain(v))
    };
    let n_cat = categories.len();
    let n = r1.len() as f64;
    let mut joint = vec![vec![0.0f64; n_cat]; n_cat];
    for (a, b) in r1.iter().zip(r2.iter()) {
        joint[idx(*a)?][idx(*b)?] += 1.0 / n;
    }
    let row_marginals: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let mut col_marginals = vec![0.0f64; n_cat];
    for row in &joint {
        for (j, p) in row.iter().enumerate() {
            col_marginals[j] += p;
        }
    }
    let mut p_obs = 0.0;
    let mut p_exp = 0.0;
    for i in 0..n_cat {
        for j in 0..n_cat {
            let w = weighting.weight(i, j, n_cat);
            p_obs += w * joint[i][j];
            p_exp += w * row_marginals[i] * col_marginals[j];
        }
    }
    if (1.0 - p_exp).abs() < 1e-12 {
        // Degenerate marginals: chance agreement saturates. Perfect observed
        // agreement keeps the 1.0 convention, anything else reports 0.
        let value = if (1.0 - p_obs).abs() < 1e-12 { 1.0 } else { 0.0 };
        return Ok(Estimate::degenerate(value));
    }
    Ok(Estimate::exact((p_obs - p_exp) / (1.0 - p_exp)))
}

/// Panel-level weighted kappa: the mean over all rater pairs of a complete
/// matrix. The result is flagged degenerate if any pair was.
pub fn mean_pairwise_kappa(
    m: &RatingsMatrix,
    categories: &[i32],
    weighting: KappaWeighting,
) -> Result<Estimate, ReliabilityError> {
    let k = m.n_raters();
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut degenerate = false;
    for a in 0..k {
        let col_a = m.column(a)?;
        for b in (a + 1)..k {
            let col_b = m.column(b)?;
            let est = weighted_kappa(&col_a, &col_b, categories, weighting)?;
            total += est.value;
            degenerate |= est.degenerate;
            pairs += 1;
        }
    }
    Ok(Estimate {
        value: total / pairs as f64,
        degenerate,
    })
}

/// Fleiss' kappa from per-unit category counts (rows = units, columns =
/// categories). Every unit must have the same total number of ratings.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<Estimate, ReliabilityError> {
    if counts.is_empty() {
        return Err(ReliabilityError::EmptyInput("fleiss_kappa"));
    }
    let k: usize = counts[0].iter().sum();
    if k < 2 {
        return Err(ReliabilityError::TooFew {
            what: "ratings per unit",
            need: 2,
            got: k,
        });
    }
    for row in counts {
        let total: usize = row.iter().sum();
        if total != k {
            return Err(ReliabilityError::VaryingRaterCounts(k, total));
        }
    }
    let n_units = counts.len() as f64;
    let n_cat = counts[0].len();
    let kf = k as f64;

    let mut p_bar = 0.0;
    let mut category_totals = vec![0.0f64; n_cat];
    for row in counts {
        let sum_sq: f64 = row.iter().map(|c| (*c * *c) as f64).sum();
        p_bar += (sum_sq - kf) / (kf * (kf - 1.0));
        for (j, c) in row.iter().enumerate() {
            category_totals[j] += *c as f64;
        }
    }
    p_bar /= n_units;
    let p_e: f64 = category_totals
        .iter()
        .map(|t| {
            let p = t / (n_units * kf);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(Estimate::degenerate(1.0));
    }
    Ok(Estimate::exact((p_bar - p_e) / (1.0 - p_e)))
}

/// Builds Fleiss category counts from a complete ratings matrix over an
/// explicit category domain.
pub fn category_counts(
    m: &RatingsMatrix,
    categories: &[i32],
) -> Result<Vec<Vec<usize>>, ReliabilityError> {
    m.rows()
        .iter()
        .map(|row| {
            let mut counts = vec![0usize; categories.len()];
            for cell in row {
                let v = cell.ok_or(ReliabilityError::IncompleteData("category_counts"))?;
                let idx = categories
                    .iter()
                    .position(|c| *c == v)
                    .ok_or(ReliabilityError::ValueOutsideDomain(v))?;
                counts[idx] += 1;
            }
            Ok(counts)
        })
        .collect()
}

/// ICC(2,k): two-way random effects, absolute agreement, average of k raters,
/// from a complete subjects-by-raters matrix.
pub fn icc_2k(values: &[Vec<f64>]) -> Result<Estimate, ReliabilityError> {
    let n = values.len();
    if n < 2 {
        return Err(ReliabilityError::TooFew {
            what: "subjects",
            need: 2,
            got: n,
        });
    }
    let k = values[0].len();
    if k < 2 {
        return Err(ReliabilityError::TooFewRaters(k));
    }
    for (i, row) in values.iter().enumerate() {
        if row.len() != k {
            return Err(ReliabilityError::RaggedRows {
                row: i,
                expected: k,
                got: row.len(),
            });
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let grand: f64 = values.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = values.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let mut col_means = vec![0.0f64; k];
    for row in values {
        for (j, v) in row.iter().enumerate() {
            col_means[j] += v / nf;
        }
    }
    let ss_rows: f64 = row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * kf;
    let ss_cols: f64 = col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * nf;
    let ss_total: f64 = values
        .iter()
        .flatten()
        .map(|v| (v - grand).powi(2))
        .sum();
    let ss_err = ss_total - ss_rows - ss_cols;

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (kf - 1.0);
    let ms_err = (ss_err / ((nf - 1.0) * (kf - 1.0))).max(0.0);

    let denom = ms_rows + (ms_cols - ms_err) / nf;
    if denom.abs() < 1e-15 {
        // All cells identical: no variance anywhere.
        return Ok(Estimate::degenerate(1.0));
    }
    Ok(Estimate::exact((ms_rows - ms_err) / denom))
}

/// ICC(2,k) over a complete integer ratings matrix.
pub fn icc_2k_from_ratings(m: &RatingsMatrix) -> Result<Estimate, ReliabilityError> {
    icc_2k(&m.dense("icc_2k")?)
}

fn validate_bootstrap(b: usize, level: f64) -> Result<(), ReliabilityError> {
    if b < 1 {
        return Err(ReliabilityError::InvalidBootstrap(
            "resample count must be >= 1".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(ReliabilityError::InvalidBootstrap(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Percentile-bootstrap replicate values of `stat` over resamples of `data`.
///
/// Replicate `i` draws from an independent substream derived from
/// `(seed, label, i)`, so the result is identical for any thread count.
pub fn bootstrap_values_of<T, F>(stat: F, data: &[T], b: usize, seed: u64, label: &str) -> Vec<f64>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    (0..b)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = substream(seed, label, replicate as u64);
            let sample: Vec<T> = (0..data.len())
                .map(|_| data[rng.random_range(0..data.len())].clone())
                .collect();
            stat(&sample)
        })
        .collect()
}

/// Percentile-method bootstrap confidence interval for a statistic over
/// arbitrary cloneable observations.
pub fn bootstrap_ci_of<T, F>(
    stat: F,
    data: &[T],
    b: usize,
    seed: u64,
    level: f64,
    label: &str,
) -> Result<(f64, f64), ReliabilityError>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    if data.is_empty() {
        return Err(ReliabilityError::EmptyInput("bootstrap_ci"));
    }
    validate_bootstrap(b, level)?;
    let mut values = bootstrap_values_of(stat, data, b, seed, label);
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable statistic"));
    let tail = (1.0 - level) / 2.0 * 100.0;
    Ok((
        stats::percentile_linear_sorted(&values, tail),
        stats::percentile_linear_sorted(&values, 100.0 - tail),
    ))
}

/// Percentile-method bootstrap confidence interval for a scalar-sample
/// statistic, deterministic under a fixed `(seed, label)`.
pub fn bootstrap_ci<F>(
    stat: F,
    data: &[f64],
    b: usize,
    seed: u64,
    level: f64,
    label: &str,
) -> Result<(f64, f64), ReliabilityError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bootstrap_ci_of(stat, data, b, seed, level, label)
}

/// One row of the reliability report: a dimension with its statistics and
/// bootstrap confidence intervals. `None` marks statistics that do not apply
/// (alpha and kappa are not computed for continuous composites).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityRow {
    pub dimension: String,
    pub alpha: Option<Estimate>,
    pub alpha_ci: Option<(f64, f64)>,
    pub icc: Option<Estimate>,
    pub icc_ci: Option<(f64, f64)>,
    pub kappa: Option<Estimate>,
    pub kappa_ci: Option<(f64, f64)>,
}

/// Reliability report over a coder panel, one row per scored dimension plus
/// an ICC-only row for the composite GapScore.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub rows: Vec<ReliabilityRow>,
    pub n_units: usize,
    pub n_raters: usize,
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

/// Computes alpha (ordinal), ICC(2,k), and mean quadratic kappa with
/// bootstrap CIs for one complete integer dimension matrix.
pub fn dimension_row(
    name: &str,
    ratings: &[Vec<i32>],
    categories: &[i32],
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<ReliabilityRow, ReliabilityError> {
    let matrix = RatingsMatrix::complete(ratings.to_vec(), ScaleLevel::Ordinal)?;
    let alpha = krippendorff_alpha(&matrix)?;
    let icc = icc_2k_from_ratings(&matrix)?;
    let kappa = mean_pairwise_kappa(&matrix, categories, KappaWeighting::Quadratic)?;

    let rows: Vec<Vec<i32>> = ratings.to_vec();
    let alpha_stat = |sample: &[Vec<i32>]| {
        RatingsMatrix::complete(sample.to_vec(), ScaleLevel::Ordinal)
            .and_then(|m| krippendorff_alpha(&m))
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let icc_stat = |sample: &[Vec<i32>]| {
        RatingsMatrix::complete(sample.to_vec(), ScaleLevel::Ordinal)
            .and_then(|m| icc_2k_from_ratings(&m))
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let kappa_stat = |sample: &[Vec<i32>]| {
        RatingsMatrix::complete(sample.to_vec(), ScaleLevel::Ordinal)
            .and_then(|m| mean_pairwise_kappa(&m, categories, KappaWeighting::Quadratic))
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let alpha_ci = bootstrap_ci_of(
        alpha_stat,
        &rows,
        resamples,
        seed,
        level,
        &format!("alpha:{name}"),
    )?;
    let icc_ci = bootstrap_ci_of(
        icc_stat,
        &rows,
        resamples,
        seed,
        level,
        &format!("icc:{name}"),
    )?;
    let kappa_ci = bootstrap_ci_of(
        kappa_stat,
        &rows,
        resamples,
        seed,
        level,
        &format!("kappa:{name}"),
    )?;

    Ok(ReliabilityRow {
        dimension: name.to_string(),
        alpha: Some(alpha),
        alpha_ci: Some(alpha_ci),
        icc: Some(icc),
        icc_ci: Some(icc_ci),
        kappa: Some(kappa),
        kappa_ci: Some(kappa_ci),
    })
}

/// ICC-only row for a continuous composite (alpha and kappa left blank).
pub fn composite_row(
    name: &str,
    values: &[Vec<f64>],
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<ReliabilityRow, ReliabilityError> {
    let icc = icc_2k(values)?;
    let rows: Vec<Vec<f64>> = values.to_vec();
    let icc_stat = |sample: &[Vec<f64>]| icc_2k(sample).map(|e| e.value).unwrap_or(f64::NAN);
    let icc_ci = bootstrap_ci_of(
        icc_stat,
        &rows,
        resamples,
        seed,
        level,
        &format!("icc:{name}"),
    )?;
    Ok(ReliabilityRow {
        dimension: name.to_string(),
        alpha: None,
        alpha_ci: None,
        icc: Some(icc),
        icc_ci: Some(icc_ci),
        kappa: None,
        kappa_ci: None,
    })
}

fn fmt_estimate(est: &Option<Estimate>, ci: &Option<(f64, f64)>) -> String {
    match est {
        None => "—".to_string(),
        Some(e) => {
            let mark = if e.degenerate { "*" } else { "" };
            match ci {
                Some((lo, hi)) => format!("{:.3}{} [{:.3}, {:.3}]", e.value, mark, lo, hi),
                None => format!("{:.3}{}", e.value, mark),
            }
        }
    }
}

impl ReliabilityReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("# Reliability report\n\n");
        out.push_str(&format!(
            "{} units, {} raters; percentile bootstrap with {} resamples, seed {}, level {:.0}%.\n\n",
            self.n_units,
            self.n_raters,
            self.resamples,
            self.seed,
            self.level * 100.0
        ));
        out.push_str("| Dimension | Krippendorff alpha | ICC(2,k) | Quadratic kappa (mean) |\n");
        out.push_str("|---|---|---|---|\n");
        for row in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                row.dimension,
                fmt_estimate(&row.alpha, &row.alpha_ci),
                fmt_estimate(&row.icc, &row.icc_ci),
                fmt_estimate(&row.kappa, &row.kappa_ci),
            ));
        }
        out.push_str("\nValues marked * are degenerate cases (no expressible disagreement) reported as 1.0 by convention.\n");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dimension,alpha,alpha_ci_low,alpha_ci_high,icc,icc_ci_low,icc_ci_high,kappa,kappa_ci_low,kappa_ci_high\n",
        );
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.dimension,
                cell(row.alpha.map(|e| e.value)),
                cell(row.alpha_ci.map(|c| c.0)),
                cell(row.alpha_ci.map(|c| c.1)),
                cell(row.icc.map(|e| e.value)),
                cell(row.icc_ci.map(|c| c.0)),
                cell(row.icc_ci.map(|c| c.1)),
                cell(row.kappa.map(|e| e.value)),
                cell(row.kappa_ci.map(|c| c.0)),
                cell(row.kappa_ci.map(|c| c.1)),
            ));
        }
        out
    }
}
