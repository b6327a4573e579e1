//! Codebook configuration and the deterministic rule-coder panel.
//!
//! A codebook is data, not code: requirement keyword clusters, per-dimension
//! signal patterns with weights and polarity, high-risk clause patterns, and
//! per-variant cut-point lists. Coders A/B/C share the codebook and differ
//! only in cut-point strictness, so anyone can audit or swap the rules
//! without touching the engine.
//!
//! Scoring maps a dimension's signal strength (sum of `polarity x weight x
//! hits`) through the variant's strictly increasing cut-points: zero positive
//! signal yields the maximum gap (5) or minimum readiness (0); strength at or
//! above the top cut-point yields gap 1 or readiness 5.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::aggregation::UnitPanel;
use crate::corpus::ExtractionUnit;
use crate::requirement::RequirementId;

#[derive(Debug, thiserror::Error)]
pub enum CodersError {
    #[error("codebook parse error: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("invalid codebook:\n  {}", .0.join("\n  "))]
    InvalidCodebook(Vec<String>),
    #[error("panel needs at least 2 coders, got {0}")]
    TooFewCoders(usize),
    #[error("panel csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("panel json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Whether a signal pattern counts toward or against a dimension's strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Positive,
    Negative,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// Rule-coder variant, ordered strict to lenient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoderVariant {
    A,
    B,
    C,
}

impl CoderVariant {
    pub const ALL: [CoderVariant; 3] = [CoderVariant::A, CoderVariant::B, CoderVariant::C];
}

impl fmt::Display for CoderVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoderVariant::A => f.write_str("A"),
            CoderVariant::B => f.write_str("B"),
            CoderVariant::C => f.write_str("C"),
        }
    }
}

impl FromStr for CoderVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(CoderVariant::A),
            "B" | "b" => Ok(CoderVariant::B),
            "C" | "c" => Ok(CoderVariant::C),
            other => Err(format!("unknown coder variant {other:?}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw configuration schema (YAML)

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ClusterPatternSpec {
    Plain(String),
    Detailed {
        pattern: String,
        #[serde(default)]
        regex: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SignalPatternSpec {
    Plain(String),
    Detailed {
        pattern: String,
        #[serde(default)]
        regex: bool,
        #[serde(default = "default_weight")]
        weight: f64,
        #[serde(default)]
        polarity: Polarity,
    },
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct RiskFlagSpec {
    name: String,
    pattern: String,
    #[serde(default)]
    regex: bool,
}

#[derive(Debug, Deserialize)]
struct VariantCutsSpec {
    #[serde(rename = "E")]
    e: Vec<f64>,
    #[serde(rename = "M")]
    m: Vec<f64>,
    #[serde(rename = "G")]
    g: Vec<f64>,
    #[serde(rename = "K")]
    k: Vec<f64>,
    #[serde(rename = "Readiness")]
    readiness: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CodebookSpec {
    #[serde(default = "default_rationale_cap")]
    rationale_cap: usize,
    requirement_clusters: BTreeMap<String, Vec<ClusterPatternSpec>>,
    dimension_signals: BTreeMap<String, Vec<SignalPatternSpec>>,
    #[serde(default)]
    risk_flags: Vec<RiskFlagSpec>,
    variant_thresholds: BTreeMap<String, VariantCutsSpec>,
}

fn default_rationale_cap() -> usize {
    500
}

// ---------------------------------------------------------------------------
// Compiled codebook

/// A compiled matching pattern. Plain patterns are escaped and matched as
/// case-insensitive substrings; regex patterns are compiled case-insensitive.
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    pub raw: String,
    pub weight: f64,
    pub polarity: Polarity,
    regex: Regex,
}

impl CompiledPattern {
    fn compile(
        raw: &str,
        is_regex: bool,
        weight: f64,
        polarity: Polarity,
        errors: &mut Vec<String>,
        context: &str,
    ) -> Option<CompiledPattern> {
        let source = if is_regex {
            raw.to_string()
        } else {
            regex::escape(raw)
        };
        match RegexBuilder::new(&source).case_insensitive(true).build() {
            Ok(regex) => Some(CompiledPattern {
                raw: raw.to_string(),
                weight,
                polarity,
                regex,
            }),
            Err(err) => {
                errors.push(format!("{context}: pattern {raw:?} does not compile: {err}"));
                None
            }
        }
    }

    /// Non-overlapping match spans in `text`.
    pub fn spans(&self, text: &str) -> Vec<(usize, usize)> {
        self.regex
            .find_iter(text)
            .map(|m| (m.start(), m.end()))
            .collect()
    }

    pub fn hit_count(&self, text: &str) -> usize {
        self.regex.find_iter(text).count()
    }
}

/// Names for the five scored dimensions in codebook order E, M, G, K,
/// Readiness.
pub const DIMENSION_KEYS: [&str; 5] = ["E", "M", "G", "K", "Readiness"];

/// Validated, compiled codebook.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub rationale_cap: usize,
    clusters: Vec<(RequirementId, Vec<CompiledPattern>)>,
    /// Signal patterns per dimension in E, M, G, K, Readiness order.
    signals: [Vec<CompiledPattern>; 5],
    risk_flags: Vec<(String, CompiledPattern)>,
    /// Cut-point lists per variant, per dimension (same order as `signals`).
    cuts: BTreeMap<CoderVariant, [Vec<f64>; 5]>,
    /// SHA-256 of the configuration text, used as the audit config id.
    pub fingerprint: String,
}

/// Parses and validates a codebook from configuration text. All invariant
/// violations are collected and reported together with field-level messages.
pub fn load_codebook(source: &str) -> Result<Codebook, CodersError> {
    let spec: CodebookSpec = serde_yaml::from_str(source)?;
    let mut errors = Vec::new();

    let mut clusters = Vec::new();
    for (key, patterns) in &spec.requirement_clusters {
        let Ok(requirement) = key.parse::<RequirementId>() else {
            errors.push(format!("requirement_clusters: unknown requirement {key:?}"));
            continue;
        };
        if requirement == RequirementId::Unmapped {
            errors.push("requirement_clusters: Unmapped cannot carry patterns".to_string());
            continue;
        }
        let compiled: Vec<CompiledPattern> = patterns
            .iter()
            .filter_map(|p| {
                let (raw, is_regex) = match p {
                    ClusterPatternSpec::Plain(s) => (s.as_str(), false),
                    ClusterPatternSpec::Detailed { pattern, regex } => (pattern.as_str(), *regex),
                };
                CompiledPattern::compile(
                    raw,
                    is_regex,
                    1.0,
                    Polarity::Positive,
                    &mut errors,
                    &format!("requirement_clusters.{key}"),
                )
            })
            .collect();
        clusters.push((requirement, compiled));
    }
    clusters.sort_by_key(|(r, _)| *r);

    let mut signals: [Vec<CompiledPattern>; 5] = Default::default();
    for (key, patterns) in &spec.dimension_signals {
        let Some(dim_index) = DIMENSION_KEYS.iter().position(|d| d == key) else {
            errors.push(format!("dimension_signals: unknown dimension {key:?}"));
            continue;
        };
        signals[dim_index] = patterns
            .iter()
            .filter_map(|p| {
                let (raw, is_regex, weight, polarity) = match p {
                    SignalPatternSpec::Plain(s) => (s.as_str(), false, 1.0, Polarity::Positive),
                    SignalPatternSpec::Detailed {
                        pattern,
                        regex,
                        weight,
                        polarity,
                    } => (pattern.as_str(), *regex, *weight, *polarity),
                };
                CompiledPattern::compile(
                    raw,
                    is_regex,
                    weight,
                    polarity,
                    &mut errors,
                    &format!("dimension_signals.{key}"),
                )
            })
            .collect();
    }
    for (i, key) in DIMENSION_KEYS.iter().enumerate() {
        if signals[i].is_empty() {
            errors.push(format!(
                "dimension_signals.{key}: dimension has no signal patterns"
            ));
        }
    }

    let mut risk_flags = Vec::new();
    let mut seen_flags = BTreeSet::new();
    for flag in &spec.risk_flags {
        if !seen_flags.insert(flag.name.clone()) {
            errors.push(format!("risk_flags: duplicate flag name {:?}", flag.name));
            continue;
        }
        if let Some(compiled) = CompiledPattern::compile(
            &flag.pattern,
            flag.regex,
            1.0,
            Polarity::Positive,
            &mut errors,
            &format!("risk_flags.{}", flag.name),
        ) {
            risk_flags.push((flag.name.clone(), compiled));
        }
    }

    let mut cuts: BTreeMap<CoderVariant, [Vec<f64>; 5]> = BTreeMap::new();
    for (key, variant_cuts) in &spec.variant_thresholds {
        let Ok(variant) = key.parse::<CoderVariant>() else {
            errors.push(format!("variant_thresholds: unknown variant {key:?}"));
            continue;
        };
        cuts.insert(
            variant,
            [
                variant_cuts.e.clone(),
                variant_cuts.m.clone(),
                variant_cuts.g.clone(),
                variant_cuts.k.clone(),
                variant_cuts.readiness.clone(),
            ],
        );
    }
    for variant in CoderVariant::ALL {
        if !cuts.contains_key(&variant) {
            errors.push(format!("variant_thresholds: variant {variant} is missing"));
        }
    }

    for (variant, lists) in &cuts {
        for (i, key) in DIMENSION_KEYS.iter().enumerate() {
            let list = &lists[i];
            let max_len = if *key == "Readiness" { 5 } else { 4 };
            if list.is_empty() || list.len() > max_len {
                errors.push(format!(
                    "variant_thresholds.{variant}.{key}: expected 1..={max_len} cut-points, got {}",
                    list.len()
                ));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                errors.push(format!(
                    "variant_thresholds.{variant}.{key}: cut-points must be strictly increasing"
                ));
            }
            if list.iter().any(|c| *c <= 0.0) {
                errors.push(format!(
                    "variant_thresholds.{variant}.{key}: cut-points must be positive so zero signal maps to the extreme score"
                ));
            }
        }
    }
    // Strictness ordering: A >= B >= C pointwise per dimension.
    let ordered: Vec<&CoderVariant> = cuts.keys().collect();
    for pair in ordered.windows(2) {
        let (stricter, looser) = (pair[0], pair[1]);
        for (i, key) in DIMENSION_KEYS.iter().enumerate() {
            let a = &cuts[stricter][i];
            let b = &cuts[looser][i];
            if a.len() != b.len() {
                errors.push(format!(
                    "variant_thresholds.{key}: variants {stricter} and {looser} have different cut-point counts"
                ));
                continue;
            }
            if a.iter().zip(b.iter()).any(|(x, y)| x < y) {
                errors.push(format!(
                    "variant_thresholds.{key}: variant {stricter} must be pointwise >= variant {looser}"
                ));
            }
        }
    }

    if !errors.is_empty() {
        return Err(CodersError::InvalidCodebook(errors));
    }

    Ok(Codebook {
        rationale_cap: spec.rationale_cap,
        clusters,
        signals,
        risk_flags,
        cuts,
        fingerprint: crate::corpus::fingerprint(source.as_bytes()),
    })
}

impl Codebook {
    /// Requirement with the greatest total cluster hit count; ties break to
    /// the lowest requirement index; zero hits map to `Unmapped`.
    pub fn classify_requirement(&self, text: &str) -> RequirementId {
        let mut best = RequirementId::Unmapped;
        let mut best_hits = 0usize;
        for (requirement, patterns) in &self.clusters {
            let hits: usize = patterns.iter().map(|p| p.hit_count(text)).sum();
            if hits > best_hits {
                best_hits = hits;
                best = *requirement;
            }
        }
        best
    }

    /// Names of every high-risk clause pattern that matches.
    pub fn detect_risk_flags(&self, text: &str) -> BTreeSet<String> {
        self.risk_flags
            .iter()
            .filter(|(_, p)| p.hit_count(text) > 0)
            .map(|(name, _)| name.clone())
            .collect()
    }

    fn cut_points(&self, variant: CoderVariant) -> &[Vec<f64>; 5] {
        self.cuts.get(&variant).expect("validated variant")
    }
}

/// One matched signal anchor within a unit's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorMatch {
    pub pattern: String,
    pub span: (usize, usize),
}

/// One coder's scores for one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderOutput {
    pub unit_id: String,
    pub coder_id: String,
    /// Gap scores in E/M/G/K order, each in 1..=5.
    pub scores: [u8; 4],
    /// Readiness in 0..=5.
    pub readiness: u8,
    pub anchors: Vec<AnchorMatch>,
    pub rationale: String,
}

/// Abstract evaluator interface. Rule coders implement it; other evaluator
/// families (e.g. model-backed ones) can plug in behind the same contract.
pub trait UnitCoder: Sync {
    fn coder_id(&self) -> String;
    fn code_unit(&self, unit: &ExtractionUnit) -> CoderOutput;
}

/// A deterministic rule coder: one codebook plus one variant's cut-points.
pub struct RuleCoder<'a> {
    pub codebook: &'a Codebook,
    pub variant: CoderVariant,
}

impl UnitCoder for RuleCoder<'_> {
    fn coder_id(&self) -> String {
        self.variant.to_string()
    }

    fn code_unit(&self, unit: &ExtractionUnit) -> CoderOutput {
        score_unit(unit, self.codebook, self.variant)
    }
}

fn truncate_chars(s: &str, cap: usize) -> String {
    match s.char_indices().nth(cap) {
        Some((idx, _)) => s[..idx].to_string(),
        None => s.to_string(),
    }
}

/// Scores one unit under one variant. Pure function of its inputs: per
/// dimension, signal strength is mapped through the variant's cut-points,
/// with every matched span recorded as an anchor.
pub fn score_unit(unit: &ExtractionUnit, codebook: &Codebook, variant: CoderVariant) -> CoderOutput {
    let cuts = codebook.cut_points(variant);
    let mut anchors = Vec::new();
    let mut strengths = [0.0f64; 5];
    let mut hit_counts = [0usize; 5];

    for (dim, patterns) in codebook.signals.iter().enumerate() {
        for pattern in patterns {
            let mut hits = 0usize;
            for span in pattern.spans(&unit.text) {
                anchors.push(AnchorMatch {
                    pattern: pattern.raw.clone(),
                    span,
                });
                hits += 1;
            }
            if hits > 0 {
                strengths[dim] += pattern.polarity.sign() * pattern.weight * hits as f64;
                hit_counts[dim] += hits;
            }
        }
    }

    let crossed = |dim: usize| cuts[dim].iter().filter(|c| strengths[dim] >= **c).count() as u8;
    let scores = [
        5 - crossed(0).min(4),
        5 - crossed(1).min(4),
        5 - crossed(2).min(4),
        5 - crossed(3).min(4),
    ];
    let readiness = crossed(4).min(5);

    let mut rationale = format!(
        "E={} M={} G={} K={} Readiness={}",
        scores[0], scores[1], scores[2], scores[3], readiness
    );
    for (i, key) in DIMENSION_KEYS.iter().enumerate() {
        rationale.push_str(&format!(
            "; {key}: strength {:.2} from {} hit(s)",
            strengths[i], hit_counts[i]
        ));
    }

    CoderOutput {
        unit_id: unit.unit_id.clone(),
        coder_id: variant.to_string(),
        scores,
        readiness,
        anchors,
        rationale: truncate_chars(&rationale, codebook.rationale_cap),
    }
}

/// A dense unit-by-coder score matrix, ordered by `(unit_id, coder_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub outputs: Vec<CoderOutput>,
    pub coder_ids: Vec<String>,
}

/// Runs every coder over every unit in parallel; results are ordered by
/// `(unit_id, coder_id)` regardless of thread count.
pub fn run_coders(
    units: &[ExtractionUnit],
    coders: &[&dyn UnitCoder],
) -> Result<Panel, CodersError> {
    if coders.len() < 2 {
        return Err(CodersError::TooFewCoders(coders.len()));
    }
    let mut outputs: Vec<CoderOutput> = units
        .par_iter()
        .flat_map_iter(|unit| coders.iter().map(move |coder| coder.code_unit(unit)))
        .collect();
    outputs.sort_by(|a, b| {
        (a.unit_id.as_str(), a.coder_id.as_str()).cmp(&(b.unit_id.as_str(), b.coder_id.as_str()))
    });
    let mut coder_ids: Vec<String> = coders.iter().map(|c| c.coder_id()).collect();
    coder_ids.sort();
    Ok(Panel { outputs, coder_ids })
}

/// Runs the rule-coder panel for the given variants.
pub fn run_panel(
    units: &[ExtractionUnit],
    codebook: &Codebook,
    variants: &[CoderVariant],
) -> Result<Panel, CodersError> {
    let coders: Vec<RuleCoder> = variants
        .iter()
        .map(|variant| RuleCoder {
            codebook,
            variant: *variant,
        })
        .collect();
    let refs: Vec<&dyn UnitCoder> = coders.iter().map(|c| c as &dyn UnitCoder).collect();
    run_coders(units, &refs)
}

impl Panel {
    /// Groups panel outputs into per-unit score vectors for aggregation.
    /// Units keep panel order; coder order within a unit is by coder id.
    pub fn unit_panels(&self) -> Vec<UnitPanel> {
        let mut result: Vec<UnitPanel> = Vec::new();
        for output in &self.outputs {
            if result.last().map(|p| p.unit_id.as_str()) != Some(output.unit_id.as_str()) {
                result.push(UnitPanel {
                    unit_id: output.unit_id.clone(),
                    gap_scores: Default::default(),
                    readiness: Vec::new(),
                });
            }
            let panel = result.last_mut().expect("just pushed");
            for (i, score) in output.scores.iter().enumerate() {
                panel.gap_scores[i].push(f64::from(*score));
            }
            panel.readiness.push(f64::from(output.readiness));
        }
        result
    }

    /// Units-by-coders integer matrix for one gap dimension (0..=3 for
    /// E/M/G/K).
    pub fn dimension_matrix(&self, dim: usize) -> Vec<Vec<i32>> {
        self.grouped(|o| i32::from(o.scores[dim]))
    }

    pub fn readiness_matrix(&self) -> Vec<Vec<i32>> {
        self.grouped(|o| i32::from(o.readiness))
    }

    /// Per-coder equal-weight GapScore matrix for composite stability checks.
    pub fn gap_score_matrix(&self) -> Vec<Vec<f64>> {
        self.grouped(|o| f64::from(o.scores.iter().map(|s| u32::from(*s)).sum::<u32>()) / 4.0)
    }

    fn grouped<T, F: Fn(&CoderOutput) -> T>(&self, value: F) -> Vec<Vec<T>> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut last_unit: Option<&str> = None;
        for output in &self.outputs {
            if last_unit != Some(output.unit_id.as_str()) {
                rows.push(Vec::new());
                last_unit = Some(output.unit_id.as_str());
            }
            rows.last_mut().expect("just pushed").push(value(output));
        }
        rows
    }

    /// Unit ids in panel order.
    pub fn unit_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for output in &self.outputs {
            if ids.last().map(String::as_str) != Some(output.unit_id.as_str()) {
                ids.push(output.unit_id.clone());
            }
        }
        ids
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PanelCsvRecord {
    unit_id: String,
    coder: String,
    #[serde(rename = "E")]
    e: u8,
    #[serde(rename = "M")]
    m: u8,
    #[serde(rename = "G")]
    g: u8,
    #[serde(rename = "K")]
    k: u8,
    #[serde(rename = "Readiness")]
    readiness: u8,
    anchors_json: String,
}

/// Writes the raw per-coder score CSV
/// (`unit_id, coder, E, M, G, K, Readiness, anchors_json`).
pub fn write_panel_csv<W: io::Write>(panel: &Panel, writer: W) -> Result<(), CodersError> {
    let mut w = csv::Writer::from_writer(writer);
    for o in &panel.outputs {
        w.serialize(PanelCsvRecord {
            unit_id: o.unit_id.clone(),
            coder: o.coder_id.clone(),
            e: o.scores[0],
            m: o.scores[1],
            g: o.scores[2],
            k: o.scores[3],
            readiness: o.readiness,
            anchors_json: serde_json::to_string(&o.anchors)?,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a panel CSV back. Rationales are not stored in the CSV and come
/// back empty.
pub fn read_panel_csv<R: io::Read>(reader: R) -> Result<Panel, CodersError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut outputs = Vec::new();
    let mut coder_ids = BTreeSet::new();
    for row in r.deserialize::<PanelCsvRecord>() {
        let rec = row?;
        coder_ids.insert(rec.coder.clone());
        outputs.push(CoderOutput {
            unit_id: rec.unit_id,
            coder_id: rec.coder,
            scores: [rec.e, rec.m, rec.g, rec.k],
            readiness: rec.readiness,
            anchors: serde_json::from_str(&rec.anchors_json)?,
            rationale: String::new(),
        });
    }
    outputs.sort_by(|a, b| {
        (a.unit_id.as_str(), a.coder_id.as_str()).cmp(&(b.unit_id.as_str(), b.coder_id.as_str()))
    });
    Ok(Panel {
        outputs,
        coder_ids: coder_ids.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = include_str!("../tests/data/fixture_codebook.yaml");

    fn unit(unit_id: &str, requirement: RequirementId, text: &str) -> ExtractionUnit {
        ExtractionUnit {
            unit_id: unit_id.to_string(),
            doc_id: "DOC".to_string(),
            page: Some(1),
            requirement_id: requirement,
            text: text.to_string(),
            anchor_span: (0, text.len()),
            sentence_index: 0,
        }
    }

    #[test]
    fn load_fixture_codebook() {
        let cb = load_codebook(FIXTURE).unwrap();
        assert_eq!(cb.rationale_cap, 500);
        assert_eq!(cb.fingerprint.len(), 64);
    }

    #[test]
    fn rejects_missing_dimension() {
        let bad = FIXTURE.replace("  K:\n", "  K_removed:\n");
        match load_codebook(&bad) {
            Err(CodersError::InvalidCodebook(errors)) => {
                assert!(errors.iter().any(|e| e.contains("dimension_signals.K")), "{errors:?}");
            }
            other => panic!("expected invalid codebook, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_cut_points() {
        let bad = FIXTURE.replace("[1.0, 2.0, 3.0, 4.0]", "[4.0, 2.0, 3.0, 1.0]");
        match load_codebook(&bad) {
            Err(CodersError::InvalidCodebook(errors)) => {
                assert!(
                    errors.iter().any(|e| e.contains("strictly increasing")),
                    "{errors:?}"
                );
            }
            other => panic!("expected invalid codebook, got {other:?}"),
        }
    }

    #[test]
    fn rejects_strictness_inversion() {
        // Push variant C's E cut-points above variant A's.
        let bad = FIXTURE.replace("[0.6, 1.6, 2.6, 3.5]", "[1.5, 2.5, 3.5, 4.5]");
        match load_codebook(&bad) {
            Err(CodersError::InvalidCodebook(errors)) => {
                assert!(errors.iter().any(|e| e.contains("pointwise")), "{errors:?}");
            }
            other => panic!("expected invalid codebook, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_flag_names() {
        let bad = FIXTURE.replace(
            "- {name: sensitive_data, pattern: \"sensitive data\"}",
            "- {name: age_threshold, pattern: \"sensitive data\"}",
        );
        match load_codebook(&bad) {
            Err(CodersError::InvalidCodebook(errors)) => {
                assert!(errors.iter().any(|e| e.contains("duplicate flag")), "{errors:?}");
            }
            other => panic!("expected invalid codebook, got {other:?}"),
        }
    }

    #[test]
    fn classify_requirement_cases() {
        let cb = load_codebook(FIXTURE).unwrap();
        assert_eq!(
            cb.classify_requirement("This clause is about privacy and data protection."),
            RequirementId::R3
        );
        assert_eq!(
            cb.classify_requirement("Nothing relevant in this sentence at all."),
            RequirementId::Unmapped
        );
        // Equal single hits for R2 (safety) and R5 (transparency): tie breaks
        // to the lower index.
        assert_eq!(
            cb.classify_requirement("Both safety and transparency appear once."),
            RequirementId::R2
        );
    }

    #[test]
    fn detect_risk_flags_cases() {
        let cb = load_codebook(FIXTURE).unwrap();
        assert_eq!(
            cb.detect_risk_flags("users under the age of 13"),
            BTreeSet::from(["age_threshold".to_string()])
        );
        assert!(cb.detect_risk_flags("perfectly neutral words").is_empty());
        let both = cb.detect_risk_flags("sensitive data and automated decision-making");
        assert_eq!(both.len(), 2);
        assert!(both.contains("sensitive_data"));
        assert!(both.contains("automated_decision"));
    }

    #[test]
    fn zero_signal_maps_to_extremes() {
        let cb = load_codebook(FIXTURE).unwrap();
        let u = unit("R1-p01-u00001", RequirementId::R1, "Nothing matches here at all.");
        for variant in CoderVariant::ALL {
            let out = score_unit(&u, &cb, variant);
            assert_eq!(out.scores, [5, 5, 5, 5]);
            assert_eq!(out.readiness, 0);
            assert!(out.anchors.is_empty());
        }
    }

    // The two published sample rows the fixture codebook reproduces.
    const R9_TEXT: &str = "Partnerships between industry, academia and governments to close the gap between skill needs and available training.";
    const R3_TEXT: &str = "Governments and businesses should explicitly address children's privacy in AI policies and practices.";

    #[test]
    fn fixture_reproduces_variant_split_row() {
        let cb = load_codebook(FIXTURE).unwrap();
        let u = unit("R9-p43-u00294", RequirementId::R9, R9_TEXT);
        let a = score_unit(&u, &cb, CoderVariant::A);
        let b = score_unit(&u, &cb, CoderVariant::B);
        let c = score_unit(&u, &cb, CoderVariant::C);
        assert_eq!([a.scores[0], b.scores[0], c.scores[0]], [2, 2, 1]);
        assert_eq!([a.scores[1], b.scores[1], c.scores[1]], [5, 5, 5]);
        assert_eq!([a.scores[2], b.scores[2], c.scores[2]], [4, 4, 4]);
        assert_eq!([a.scores[3], b.scores[3], c.scores[3]], [5, 5, 5]);
        assert_eq!([a.readiness, b.readiness, c.readiness], [3, 3, 3]);
    }

    #[test]
    fn fixture_reproduces_unanimous_row() {
        let cb = load_codebook(FIXTURE).unwrap();
        let u = unit("R3-p25-u00099", RequirementId::R3, R3_TEXT);
        for variant in CoderVariant::ALL {
            let out = score_unit(&u, &cb, variant);
            assert_eq!(out.scores, [5, 5, 4, 5], "variant {variant}");
            assert_eq!(out.readiness, 1, "variant {variant}");
        }
        assert_eq!(cb.classify_requirement(R3_TEXT), RequirementId::R3);
        assert_eq!(cb.classify_requirement(R9_TEXT), RequirementId::R9);
    }

    #[test]
    fn scoring_is_deterministic() {
        let cb = load_codebook(FIXTURE).unwrap();
        let u = unit("R9-p43-u00294", RequirementId::R9, R9_TEXT);
        let a = score_unit(&u, &cb, CoderVariant::B);
        let b = score_unit(&u, &cb, CoderVariant::B);
        assert_eq!(a, b);
    }

    #[test]
    fn anchors_lie_within_unit_text() {
        let cb = load_codebook(FIXTURE).unwrap();
        let u = unit("R9-p43-u00294", RequirementId::R9, R9_TEXT);
        let out = score_unit(&u, &cb, CoderVariant::A);
        assert!(!out.anchors.is_empty());
        for anchor in &out.anchors {
            let (s, e) = anchor.span;
            assert!(e <= u.text.len());
            let matched = &u.text[s..e];
            assert!(
                matched.eq_ignore_ascii_case(&anchor.pattern)
                    || matched.to_lowercase().contains(&anchor.pattern.to_lowercase())
                    || anchor.pattern.to_lowercase().contains(&matched.to_lowercase()),
                "span {matched:?} vs pattern {:?}",
                anchor.pattern
            );
        }
    }

    #[test]
    fn monotonic_across_variants() {
        let cb = load_codebook(FIXTURE).unwrap();
        for text in [
            R9_TEXT,
            R3_TEXT,
            "Partnerships with academia on privacy indicators and thresholds to close the gap.",
            "An audit mechanism with a causal pathway, metrics, and governments involved.",
        ] {
            let u = unit("X-p00-u00000", RequirementId::Unmapped, text);
            let a = score_unit(&u, &cb, CoderVariant::A);
            let b = score_unit(&u, &cb, CoderVariant::B);
            let c = score_unit(&u, &cb, CoderVariant::C);
            for d in 0..4 {
                assert!(a.scores[d] >= b.scores[d] && b.scores[d] >= c.scores[d]);
            }
            assert!(a.readiness <= b.readiness && b.readiness <= c.readiness);
        }
    }

    #[test]
    fn run_panel_shape_and_order() {
        let cb = load_codebook(FIXTURE).unwrap();
        let units = vec![
            unit("R9-p43-u00294", RequirementId::R9, R9_TEXT),
            unit("R3-p25-u00099", RequirementId::R3, R3_TEXT),
        ];
        let panel = run_panel(&units, &cb, &CoderVariant::ALL).unwrap();
        assert_eq!(panel.outputs.len(), 6);
        assert_eq!(panel.coder_ids, vec!["A", "B", "C"]);
        // Sorted by (unit_id, coder_id).
        assert_eq!(panel.outputs[0].unit_id, "R3-p25-u00099");
        assert_eq!(panel.outputs[0].coder_id, "A");
        assert_eq!(panel.outputs[5].unit_id, "R9-p43-u00294");
        assert_eq!(panel.outputs[5].coder_id, "C");

        let unit_panels = panel.unit_panels();
        assert_eq!(unit_panels.len(), 2);
        assert_eq!(unit_panels[0].gap_scores[0].len(), 3);

        assert!(matches!(
            run_panel(&units, &cb, &[CoderVariant::A]),
            Err(CodersError::TooFewCoders(1))
        ));
        let empty = run_panel(&[], &cb, &CoderVariant::ALL).unwrap();
        assert!(empty.outputs.is_empty());
    }

    #[test]
    fn panel_csv_round_trip() {
        let cb = load_codebook(FIXTURE).unwrap();
        let units = vec![unit("R9-p43-u00294", RequirementId::R9, R9_TEXT)];
        let panel = run_panel(&units, &cb, &CoderVariant::ALL).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&panel, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("unit_id,coder,E,M,G,K,Readiness,anchors_json"));
        let back = read_panel_csv(&buf[..]).unwrap();
        assert_eq!(back.outputs.len(), 3);
        assert_eq!(back.outputs[0].scores, panel.outputs[0].scores);
        assert_eq!(back.outputs[0].anchors, panel.outputs[0].anchors);
    }

    #[test]
    fn rationale_is_capped() {
        let mut spec: serde_yaml::Value = serde_yaml::from_str(FIXTURE).unwrap();
        spec["rationale_cap"] = serde_yaml::Value::from(40);
        let cb = load_codebook(&serde_yaml::to_string(&spec).unwrap()).unwrap();
        let u = unit("R9-p43-u00294", RequirementId::R9, R9_TEXT);
        let out = score_unit(&u, &cb, CoderVariant::A);
        assert!(out.rationale.chars().count() <= 40);
    }
}
