//! Deterministic gap-assessment engine for policy texts.
//!
//! The crate turns plain-text policy documents into sentence-level extraction
//! units, scores each unit on the four gap dimensions (Evidence, Mechanism,
//! Governance, Indicator) plus an implementation-readiness scale with a panel
//! of rule-based coders, aggregates the panel robustly into unit- and
//! requirement-level scores, and validates the result with inter-rater
//! reliability statistics, sensitivity studies, and an external TF-IDF
//! hard-signal matcher. Every pipeline stage is seedable and reproducible;
//! runs are recorded in a hash-chained audit log and can be packaged into a
//! fingerprinted release directory.
//!
//! Module map:
//!
//! * [`corpus`] — document ingestion, sentence splitting, extraction units.
//! * [`coders`] — codebook configuration and the rule-coder panel.
//! * [`aggregation`] — robust unit aggregation, requirement summaries, tiers.
//! * [`reliability`] — Krippendorff's alpha, weighted kappa, Fleiss' kappa,
//!   ICC(2,k), bootstrap confidence intervals.
//! * [`sensitivity`] — weight perturbation, Kendall tau-b, rank stability,
//!   drift metrics.
//! * [`graph`] — the typed evidence/mechanism/governance/indicator graph.
//! * [`hardsignal`] — TF-IDF sentence matching and hard-signal validation.
//! * [`audit`] — hash-chained audit log and the reproducibility package.
//! * [`report`] — CSV tables and SVG figure emission.

pub mod aggregation;
pub mod audit;
pub mod coders;
pub mod corpus;
pub mod graph;
pub mod hardsignal;
pub mod reliability;
pub mod report;
pub mod requirement;
pub mod rng;
pub mod sensitivity;

mod stats;

pub use requirement::RequirementId;
