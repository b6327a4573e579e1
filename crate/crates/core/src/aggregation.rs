//! Robust aggregation of coder panels into unit scores, GapScore, review
//! flags, and requirement-level summaries with bootstrap confidence
//! intervals, priorities, and tiers.

use std::collections::BTreeSet;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::reliability::{self, ReliabilityError};
use crate::requirement::RequirementId;
use crate::stats;

/// The four gap dimensions, in canonical E/M/G/K order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GapDimension {
    Evidence,
    Mechanism,
    Governance,
    Indicator,
}

impl GapDimension {
    pub const ALL: [GapDimension; 4] = [
        GapDimension::Evidence,
        GapDimension::Mechanism,
        GapDimension::Governance,
        GapDimension::Indicator,
    ];

    /// Single-letter code used in file headers and reports.
    pub fn code(self) -> &'static str {
        match self {
            GapDimension::Evidence => "E",
            GapDimension::Mechanism => "M",
            GapDimension::Governance => "G",
            GapDimension::Indicator => "K",
        }
    }
}

impl fmt::Display for GapDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AggregationError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid quantile bounds: lower {lower} must satisfy 0 <= lower < upper <= 1 (upper {upper})")]
    InvalidQuantileBounds { lower: f64, upper: f64 },
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("unit {unit_id}: dimension {dimension} has {count} coder scores, need at least 2")]
    TooFewCoders {
        unit_id: String,
        dimension: String,
        count: usize,
    },
    #[error("bootstrap failed: {0}")]
    Bootstrap(#[from] ReliabilityError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Percentile estimator choice. `Linear` interpolates between order
/// statistics (the default); `NearestRank` returns the ceil-rank statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PercentileMethod {
    #[default]
    Linear,
    NearestRank,
}

/// The `p`-th percentile of `values` under the given method, `p` in `[0, 100]`.
pub fn percentile(values: &[f64], p: f64, method: PercentileMethod) -> Result<f64, AggregationError> {
    if values.is_empty() {
        return Err(AggregationError::EmptyInput("percentile"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(AggregationError::InvalidPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value"));
    Ok(match method {
        PercentileMethod::Linear => stats::percentile_linear_sorted(&sorted, p),
        PercentileMethod::NearestRank => stats::percentile_nearest_rank_sorted(&sorted, p),
    })
}

/// Clamps `values` to their empirical `[lower_q, upper_q]` quantiles
/// (linear-interpolation quantiles). Length and order are preserved.
pub fn winsorize(values: &[f64], lower_q: f64, upper_q: f64) -> Result<Vec<f64>, AggregationError> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(AggregationError::InvalidQuantileBounds {
            lower: lower_q,
            upper: upper_q,
        });
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let lo = percentile(values, lower_q * 100.0, PercentileMethod::Linear)?;
    let hi = percentile(values, upper_q * 100.0, PercentileMethod::Linear)?;
    Ok(values.iter().map(|v| v.clamp(lo, hi)).collect())
}

/// One unit's panel scores: per gap dimension one score per coder, plus the
/// readiness scores, all in coder order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPanel {
    pub unit_id: String,
    pub gap_scores: [Vec<f64>; 4],
    pub readiness: Vec<f64>,
}

/// Robust dispersion of one dimension's coder scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpread {
    /// Median absolute deviation from the dimension median.
    pub mad: f64,
    /// Interquartile range (P75 - P25, linear interpolation).
    pub iqr: f64,
}

/// Reason a unit was routed to the manual review queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReviewReason {
    /// A dimension's MAD exceeded the uncertainty threshold. Carries the
    /// dimension code (`E`/`M`/`G`/`K`/`Readiness`).
    Uncertainty(String),
    /// A high-risk clause pattern matched; carries the flag name.
    Risk(String),
}

impl fmt::Display for ReviewReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReviewReason::Uncertainty(dim) => write!(f, "uncertainty:{dim}"),
            ReviewReason::Risk(flag) => write!(f, "risk:{flag}"),
        }
    }
}

/// Per-unit robust aggregate of the coder panel.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedUnitScore {
    pub unit_id: String,
    /// Per-dimension medians in E/M/G/K order.
    pub medians: [f64; 4],
    pub readiness_median: f64,
    /// Weighted mean of the gap-dimension medians.
    pub gap_score: f64,
    pub gap_spread: [DimensionSpread; 4],
    pub readiness_spread: DimensionSpread,
    pub review_flag: bool,
    pub review_reasons: Vec<ReviewReason>,
}

/// Configuration for unit-level aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationConfig {
    /// Gap-dimension weights in E/M/G/K order; nonnegative, summing to 1.
    pub weights: [f64; 4],
    /// Winsorization quantile bounds. The default `(0, 1)` is the identity.
    pub winsor_bounds: (f64, f64),
    /// Winsorization is applied only to panels of at least this many coders;
    /// the median already absorbs a single outlier in small panels.
    pub winsor_min_panel: usize,
    /// MAD threshold above which a dimension triggers manual review.
    pub u_threshold: f64,
    pub percentile_method: PercentileMethod,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            weights: [0.25; 4],
            winsor_bounds: (0.0, 1.0),
            winsor_min_panel: 5,
            u_threshold: 0.5,
            percentile_method: PercentileMethod::Linear,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), AggregationError> {
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(AggregationError::InvalidWeights(
                "weights must be nonnegative".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AggregationError::InvalidWeights(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

fn spread_of(scores: &[f64]) -> DimensionSpread {
    let median = stats::lower_median(scores);
    let deviations: Vec<f64> = scores.iter().map(|v| (v - median).abs()).collect();
    let q1 = stats::percentile_linear(scores, 25.0);
    let q3 = stats::percentile_linear(scores, 75.0);
    DimensionSpread {
        mad: stats::lower_median(&deviations),
        iqr: q3 - q1,
    }
}

/// Aggregates one unit's panel: per-dimension lower median, MAD, and IQR,
/// plus the weighted GapScore. Review fields are left clear; apply
/// [`flag_review`] afterwards (or use [`finalize_unit`]).
pub fn aggregate_unit(
    panel: &UnitPanel,
    config: &AggregationConfig,
) -> Result<AggregatedUnitScore, AggregationError> {
    config.validate()?;
    for (dim, scores) in GapDimension::ALL.iter().zip(panel.gap_scores.iter()) {
        if scores.len() < 2 {
            return Err(AggregationError::TooFewCoders {
                unit_id: panel.unit_id.clone(),
                dimension: dim.code().to_string(),
                count: scores.len(),
            });
        }
    }
    if panel.readiness.len() < 2 {
        return Err(AggregationError::TooFewCoders {
            unit_id: panel.unit_id.clone(),
            dimension: "Readiness".to_string(),
            count: panel.readiness.len(),
        });
    }

    let prepare = |scores: &[f64]| -> Result<Vec<f64>, AggregationError> {
        if scores.len() >= config.winsor_min_panel {
            winsorize(scores, config.winsor_bounds.0, config.winsor_bounds.1)
        } else {
            Ok(scores.to_vec())
        }
    };

    let mut medians = [0.0; 4];
    let mut gap_spread = [DimensionSpread { mad: 0.0, iqr: 0.0 }; 4];
    for (i, scores) in panel.gap_scores.iter().enumerate() {
        let prepared = prepare(scores)?;
        medians[i] = stats::lower_median(&prepared);
        gap_spread[i] = spread_of(&prepared);
    }
    let readiness = prepare(&panel.readiness)?;
    let readiness_median = stats::lower_median(&readiness);
    let readiness_spread = spread_of(&readiness);

    let gap_score = medians
        .iter()
        .zip(config.weights.iter())
        .map(|(m, w)| m * w)
        .sum();

    Ok(AggregatedUnitScore {
        unit_id: panel.unit_id.clone(),
        medians,
        readiness_median,
        gap_score,
        gap_spread,
        readiness_spread,
        review_flag: false,
        review_reasons: Vec::new(),
    })
}

/// Review-queue routing: a unit is flagged iff any dimension's MAD exceeds
/// `u_threshold` or any high-risk clause flag fired. Returns the flag and
/// one reason code per trigger.
pub fn flag_review(
    agg: &AggregatedUnitScore,
    risk_flags: &BTreeSet<String>,
    u_threshold: f64,
) -> (bool, Vec<ReviewReason>) {
    let mut reasons = Vec::new();
    for (dim, spread) in GapDimension::ALL.iter().zip(agg.gap_spread.iter()) {
        if spread.mad > u_threshold {
            reasons.push(ReviewReason::Uncertainty(dim.code().to_string()));
        }
    }
    if agg.readiness_spread.mad > u_threshold {
        reasons.push(ReviewReason::Uncertainty("Readiness".to_string()));
    }
    for flag in risk_flags {
        reasons.push(ReviewReason::Risk(flag.clone()));
    }
    (!reasons.is_empty(), reasons)
}

/// Convenience: aggregate a unit and apply review routing in one step.
pub fn finalize_unit(
    panel: &UnitPanel,
    risk_flags: &BTreeSet<String>,
    config: &AggregationConfig,
) -> Result<AggregatedUnitScore, AggregationError> {
    let mut agg = aggregate_unit(panel, config)?;
    let (flag, reasons) = flag_review(&agg, risk_flags, config.u_threshold);
    agg.review_flag = flag;
    agg.review_reasons = reasons;
    Ok(agg)
}

/// `GapScore x (1 - Readiness/5)`: high gap with low readiness ranks first.
pub fn priority_score(gap: f64, readiness: f64) -> f64 {
    gap * (1.0 - readiness / 5.0)
}

/// Governance priority tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    P1,
    P2,
    P3,
    Unclassified,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::P1 => f.write_str("P1"),
            Tier::P2 => f.write_str("P2"),
            Tier::P3 => f.write_str("P3"),
            Tier::Unclassified => f.write_str("Unclassified"),
        }
    }
}

/// Literal tier rules. Inputs covered by no rule (e.g. GapScore in
/// `[3.00, 3.50)`) are `Unclassified`.
pub fn assign_tier(gap: f64, readiness: f64) -> Tier {
    if gap >= 3.50 && readiness >= 3.0 {
        Tier::P1
    } else if gap >= 3.50 && readiness <= 2.0 {
        Tier::P2
    } else if gap < 3.00 && readiness >= 3.0 {
        Tier::P3
    } else {
        Tier::Unclassified
    }
}

/// Bootstrap parameters for requirement summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 2000,
            seed: 7,
            level: 0.95,
        }
    }
}

/// Configuration for requirement-level summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryConfig {
    pub bootstrap: BootstrapConfig,
    /// Readiness summary percentile (default P80).
    pub readiness_percentile: f64,
    pub percentile_method: PercentileMethod,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            bootstrap: BootstrapConfig::default(),
            readiness_percentile: 80.0,
            percentile_method: PercentileMethod::Linear,
        }
    }
}

/// Per-requirement summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSummary {
    pub requirement_id: RequirementId,
    pub n: usize,
    pub gap_mean: f64,
    pub gap_ci: (f64, f64),
    pub readiness_p: f64,
    pub readiness_ci: (f64, f64),
    pub share_ge3: f64,
    pub priority: f64,
    pub tier: Tier,
    /// Mean of each gap-dimension median over the requirement's units,
    /// in E/M/G/K order. Input to the sensitivity studies.
    pub dim_means: [f64; 4],
}

/// Summarizes one requirement's aggregated units: mean GapScore with a
/// percentile-bootstrap CI, the readiness percentile with its bootstrap CI,
/// the share of units with readiness >= 3, priority, and tier.
pub fn summarize_requirement(
    requirement_id: RequirementId,
    units: &[AggregatedUnitScore],
    config: &SummaryConfig,
) -> Result<RequirementSummary, AggregationError> {
    if units.is_empty() {
        return Err(AggregationError::EmptyInput("summarize_requirement"));
    }
    let gap_scores: Vec<f64> = units.iter().map(|u| u.gap_score).collect();
    let readiness: Vec<f64> = units.iter().map(|u| u.readiness_median).collect();

    let gap_mean = stats::mean(&gap_scores);
    let boot = &config.bootstrap;
    let gap_label = format!("{requirement_id}:gap");
    let gap_ci = reliability::bootstrap_ci(
        stats::mean,
        &gap_scores,
        boot.resamples,
        boot.seed,
        boot.level,
        &gap_label,
    )?;

    let p = config.readiness_percentile;
    let method = config.percentile_method;
    let readiness_p = percentile(&readiness, p, method)?;
    let readiness_label = format!("{requirement_id}:readiness");
    let readiness_ci = reliability::bootstrap_ci(
        |sample: &[f64]| percentile(sample, p, method).expect("nonempty resample"),
        &readiness,
        boot.resamples,
        boot.seed,
        boot.level,
        &readiness_label,
    )?;

    let share_ge3 =
        readiness.iter().filter(|r| **r >= 3.0).count() as f64 / readiness.len() as f64;

    let mut dim_means = [0.0; 4];
    for (i, slot) in dim_means.iter_mut().enumerate() {
        let values: Vec<f64> = units.iter().map(|u| u.medians[i]).collect();
        *slot = stats::mean(&values);
    }

    Ok(RequirementSummary {
        requirement_id,
        n: units.len(),
        gap_mean,
        gap_ci,
        readiness_p,
        readiness_ci,
        share_ge3,
        priority: priority_score(gap_mean, readiness_p),
        tier: assign_tier(gap_mean, readiness_p),
        dim_means,
    })
}

/// One row of `scores_unit.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresUnitRecord {
    pub unit_id: String,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Readiness")]
    pub readiness: f64,
    #[serde(rename = "GapScore")]
    pub gap_score: f64,
    #[serde(rename = "U_MAD_E")]
    pub u_mad_e: f64,
    #[serde(rename = "U_MAD_M")]
    pub u_mad_m: f64,
    #[serde(rename = "U_MAD_G")]
    pub u_mad_g: f64,
    #[serde(rename = "U_MAD_K")]
    pub u_mad_k: f64,
    pub review_flag: bool,
    pub aggregator: String,
    pub config_version: String,
}

impl ScoresUnitRecord {
    pub fn from_aggregated(
        agg: &AggregatedUnitScore,
        aggregator: &str,
        config_version: &str,
    ) -> Self {
        ScoresUnitRecord {
            unit_id: agg.unit_id.clone(),
            e: agg.medians[0],
            m: agg.medians[1],
            g: agg.medians[2],
            k: agg.medians[3],
            readiness: agg.readiness_median,
            gap_score: agg.gap_score,
            u_mad_e: agg.gap_spread[0].mad,
            u_mad_m: agg.gap_spread[1].mad,
            u_mad_g: agg.gap_spread[2].mad,
            u_mad_k: agg.gap_spread[3].mad,
            review_flag: agg.review_flag,
            aggregator: aggregator.to_string(),
            config_version: config_version.to_string(),
        }
    }
}

/// One row of `scores_req.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresReqRecord {
    pub requirement_id: RequirementId,
    #[serde(rename = "GapScore")]
    pub gap_score: f64,
    #[serde(rename = "Readiness")]
    pub readiness: f64,
    #[serde(rename = "CI_low")]
    pub ci_low: f64,
    #[serde(rename = "CI_high")]
    pub ci_high: f64,
    pub sample_n: usize,
    pub share_ge3: f64,
    pub priority: f64,
    pub tier: Tier,
}

impl From<&RequirementSummary> for ScoresReqRecord {
    fn from(s: &RequirementSummary) -> Self {
        ScoresReqRecord {
            requirement_id: s.requirement_id,
            gap_score: s.gap_mean,
            readiness: s.readiness_p,
            ci_low: s.gap_ci.0,
            ci_high: s.gap_ci.1,
            sample_n: s.n,
            share_ge3: s.share_ge3,
            priority: s.priority,
            tier: s.tier,
        }
    }
}

pub fn write_scores_unit_csv<W: io::Write>(
    records: &[ScoresUnitRecord],
    writer: W,
) -> Result<(), AggregationError> {
    let mut w = csv::Writer::from_writer(writer);
    for record in records {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_unit_csv<R: io::Read>(
    reader: R,
) -> Result<Vec<ScoresUnitRecord>, AggregationError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_scores_req_csv<W: io::Write>(
    records: &[ScoresReqRecord],
    writer: W,
) -> Result<(), AggregationError> {
    let mut w = csv::Writer::from_writer(writer);
    for record in records {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_req_csv<R: io::Read>(
    reader: R,
) -> Result<Vec<ScoresReqRecord>, AggregationError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(unit_id: &str, e: &[f64], m: &[f64], g: &[f64], k: &[f64], r: &[f64]) -> UnitPanel {
        UnitPanel {
            unit_id: unit_id.to_string(),
            gap_scores: [e.to_vec(), m.to_vec(), g.to_vec(), k.to_vec()],
            readiness: r.to_vec(),
        }
    }

    #[test]
    fn winsorize_identity_bounds() {
        assert_eq!(
            winsorize(&[1.0, 5.0, 5.0], 0.0, 1.0).unwrap(),
            vec![1.0, 5.0, 5.0]
        );
    }

    #[test]
    fn winsorize_clamps_to_quantile() {
        // (1,1,1,1,9) at upper_q = 0.8: h = 4*0.8 = 3.2 -> 1 + 0.2*(9-1) = 2.6
        let out = winsorize(&[1.0, 1.0, 1.0, 1.0, 9.0], 0.0, 0.8).unwrap();
        assert_eq!(&out[..4], &[1.0, 1.0, 1.0, 1.0]);
        assert!((out[4] - 2.6).abs() < 1e-12, "got {}", out[4]);
    }

    #[test]
    fn winsorize_constant_list_unchanged() {
        assert_eq!(
            winsorize(&[4.0, 4.0, 4.0], 0.1, 0.9).unwrap(),
            vec![4.0, 4.0, 4.0]
        );
    }

    #[test]
    fn winsorize_rejects_bad_bounds() {
        assert!(winsorize(&[1.0], 0.9, 0.1).is_err());
        assert!(winsorize(&[1.0], 0.5, 0.5).is_err());
        assert!(winsorize(&[1.0], -0.1, 0.5).is_err());
    }

    #[test]
    fn aggregate_unit_medians_and_mad() {
        // E across coders (2,2,1) -> median 2, MAD 0.
        let p = panel(
            "u1",
            &[2.0, 2.0, 1.0],
            &[5.0, 5.0, 5.0],
            &[4.0, 4.0, 4.0],
            &[5.0, 5.0, 5.0],
            &[3.0, 3.0, 3.0],
        );
        let agg = aggregate_unit(&p, &AggregationConfig::default()).unwrap();
        assert_eq!(agg.medians[0], 2.0);
        assert_eq!(agg.gap_spread[0].mad, 0.0);
        assert_eq!(agg.readiness_median, 3.0);
        assert_eq!(agg.gap_score, 0.25 * (2.0 + 5.0 + 4.0 + 5.0));
    }

    #[test]
    fn aggregate_unit_equal_weight_mean() {
        let p = panel(
            "u2",
            &[3.0, 3.0],
            &[4.0, 4.0],
            &[3.0, 3.0],
            &[4.0, 4.0],
            &[2.0, 2.0],
        );
        let agg = aggregate_unit(&p, &AggregationConfig::default()).unwrap();
        assert_eq!(agg.gap_score, 3.5);
    }

    #[test]
    fn aggregate_unit_rejects_single_coder() {
        let p = panel("u3", &[3.0], &[4.0, 4.0], &[3.0, 3.0], &[4.0, 4.0], &[2.0, 2.0]);
        assert!(matches!(
            aggregate_unit(&p, &AggregationConfig::default()),
            Err(AggregationError::TooFewCoders { .. })
        ));
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let a = panel(
            "u",
            &[1.0, 2.0, 5.0],
            &[3.0, 4.0, 5.0],
            &[2.0, 2.0, 3.0],
            &[5.0, 4.0, 4.0],
            &[0.0, 1.0, 2.0],
        );
        let b = panel(
            "u",
            &[5.0, 1.0, 2.0],
            &[5.0, 3.0, 4.0],
            &[3.0, 2.0, 2.0],
            &[4.0, 5.0, 4.0],
            &[2.0, 0.0, 1.0],
        );
        let cfg = AggregationConfig::default();
        assert_eq!(
            aggregate_unit(&a, &cfg).unwrap().medians,
            aggregate_unit(&b, &cfg).unwrap().medians
        );
    }

    #[test]
    fn flag_review_cases() {
        let p = panel(
            "u4",
            &[2.0, 2.0, 2.0],
            &[5.0, 5.0, 5.0],
            &[4.0, 4.0, 4.0],
            &[5.0, 5.0, 5.0],
            &[3.0, 3.0, 3.0],
        );
        let agg = aggregate_unit(&p, &AggregationConfig::default()).unwrap();
        let (flag, reasons) = flag_review(&agg, &BTreeSet::new(), 0.5);
        assert!(!flag);
        assert!(reasons.is_empty());

        let mut flags = BTreeSet::new();
        flags.insert("age_threshold".to_string());
        let (flag, reasons) = flag_review(&agg, &flags, 0.5);
        assert!(flag);
        assert_eq!(reasons, vec![ReviewReason::Risk("age_threshold".into())]);
        assert_eq!(reasons[0].to_string(), "risk:age_threshold");

        // MAD of (1,3,5) around median 3 is 2 > 0.5.
        let p = panel(
            "u5",
            &[1.0, 3.0, 5.0],
            &[5.0, 5.0, 5.0],
            &[4.0, 4.0, 4.0],
            &[5.0, 5.0, 5.0],
            &[3.0, 3.0, 3.0],
        );
        let agg = aggregate_unit(&p, &AggregationConfig::default()).unwrap();
        let (flag, reasons) = flag_review(&agg, &BTreeSet::new(), 0.5);
        assert!(flag);
        assert_eq!(reasons, vec![ReviewReason::Uncertainty("E".into())]);
        assert_eq!(reasons[0].to_string(), "uncertainty:E");
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(
            percentile(&[0.0, 1.0, 3.0, 3.0, 3.0], 80.0, PercentileMethod::Linear).unwrap(),
            3.0
        );
        assert_eq!(
            percentile(&[7.0, 7.0, 7.0], 33.0, PercentileMethod::Linear).unwrap(),
            7.0
        );
        assert_eq!(
            percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0, PercentileMethod::Linear).unwrap(),
            3.0
        );
        assert!(percentile(&[], 50.0, PercentileMethod::Linear).is_err());
        assert!(percentile(&[1.0], 101.0, PercentileMethod::Linear).is_err());
    }

    #[test]
    fn priority_formula() {
        assert!((priority_score(4.5, 3.0) - 1.8).abs() < 1e-12);
        assert_eq!(priority_score(2.3, 5.0), 0.0);
        assert!((priority_score(4.15, 1.0) - 3.32).abs() < 1e-12);
        assert_eq!(priority_score(4.0, 0.0), 4.0);
    }

    #[test]
    fn tier_rules() {
        assert_eq!(assign_tier(3.66, 3.0), Tier::P1);
        assert_eq!(assign_tier(4.50, 2.0), Tier::P2);
        assert_eq!(assign_tier(2.80, 3.0), Tier::P3);
        assert_eq!(assign_tier(3.20, 3.0), Tier::Unclassified);
        assert_eq!(assign_tier(2.80, 2.0), Tier::Unclassified);
        assert_eq!(assign_tier(3.50, 2.5), Tier::Unclassified);
    }

    fn agg_fixture(unit_id: &str, gap: f64, readiness: f64) -> AggregatedUnitScore {
        AggregatedUnitScore {
            unit_id: unit_id.to_string(),
            medians: [gap; 4],
            readiness_median: readiness,
            gap_score: gap,
            gap_spread: [DimensionSpread { mad: 0.0, iqr: 0.0 }; 4],
            readiness_spread: DimensionSpread { mad: 0.0, iqr: 0.0 },
            review_flag: false,
            review_reasons: Vec::new(),
        }
    }

    #[test]
    fn summary_single_unit_degenerate_ci() {
        let units = vec![agg_fixture("u1", 4.0, 2.0)];
        let s = summarize_requirement(RequirementId::R1, &units, &SummaryConfig::default())
            .unwrap();
        assert_eq!(s.n, 1);
        assert_eq!(s.gap_mean, 4.0);
        assert_eq!(s.gap_ci, (4.0, 4.0));
        assert_eq!(s.readiness_ci, (2.0, 2.0));
        assert_eq!(s.share_ge3, 0.0);
    }

    #[test]
    fn summary_two_point_fixture_ci_endpoints() {
        // Resample space of (3.0, 4.0) means: {3.0, 3.5, 4.0}.
        let units = vec![agg_fixture("u1", 3.0, 3.0), agg_fixture("u2", 4.0, 1.0)];
        let s = summarize_requirement(RequirementId::R2, &units, &SummaryConfig::default())
            .unwrap();
        assert_eq!(s.gap_mean, 3.5);
        for endpoint in [s.gap_ci.0, s.gap_ci.1] {
            assert!(
                [3.0, 3.5, 4.0].contains(&endpoint),
                "unexpected endpoint {endpoint}"
            );
        }
        assert!(s.gap_ci.0 <= s.gap_mean && s.gap_mean <= s.gap_ci.1);
        assert_eq!(s.share_ge3, 0.5);
    }

    #[test]
    fn summary_is_reproducible() {
        let units = vec![
            agg_fixture("u1", 3.0, 3.0),
            agg_fixture("u2", 4.0, 1.0),
            agg_fixture("u3", 4.5, 0.0),
        ];
        let a = summarize_requirement(RequirementId::R3, &units, &SummaryConfig::default())
            .unwrap();
        let b = summarize_requirement(RequirementId::R3, &units, &SummaryConfig::default())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scores_csv_round_trip() {
        let agg = agg_fixture("R1-p01-u00001", 4.0, 2.0);
        let rec = ScoresUnitRecord::from_aggregated(&agg, "median", "v1");
        let mut buf = Vec::new();
        write_scores_unit_csv(&[rec.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "unit_id,E,M,G,K,Readiness,GapScore,U_MAD_E,U_MAD_M,U_MAD_G,U_MAD_K,review_flag,aggregator,config_version"
        ));
        assert_eq!(read_scores_unit_csv(&buf[..]).unwrap(), vec![rec]);
    }
}
