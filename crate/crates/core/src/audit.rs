//! Append-only, hash-chained audit logging and the reproducibility release
//! package.
//!
//! Every pipeline run appends one JSON-lines record carrying the input hash,
//! seed, configuration fingerprints, output hash, and the hash of the
//! previous record (a genesis record links to 64 zero hex chars). Any
//! single-byte mutation of an earlier record breaks the chain. A release
//! package copies the mandatory artifact files into one directory with a
//! MANIFEST of per-file SHA-256 fingerprints; verification recomputes both
//! the fingerprints and the audit chain.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::fingerprint;

/// Previous-hash value of the first record in a log.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("audit chain broken at record {index}")]
    ChainBreak { index: usize },
    #[error("mandatory release artifact missing: {0}")]
    MissingArtifact(String),
    #[error("release directory has no MANIFEST: {0}")]
    MissingManifest(PathBuf),
    #[error("malformed MANIFEST line {line}: {content:?}")]
    BadManifestLine { line: usize, content: String },
}

/// One immutable audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub run_id: String,
    /// RFC 3339 timestamp with zone.
    pub timestamp: String,
    /// `record_hash` of the previous record, or [`GENESIS_HASH`].
    pub prev_hash: String,
    pub input_hash: String,
    pub seed: u64,
    pub config_id: String,
    pub prompt_id: String,
    pub model_id: String,
    pub output_hash: String,
    /// Unit ids touched by the run.
    pub anchors: Vec<String>,
    /// Per-dimension aggregate uncertainty (mean MAD).
    pub uncertainty_summary: BTreeMap<String, f64>,
    /// SHA-256 over the canonical serialization of all fields above.
    pub record_hash: String,
}

/// The hashable portion of a record (everything except `record_hash`).
#[derive(Serialize)]
struct RecordBody<'a> {
    run_id: &'a str,
    timestamp: &'a str,
    prev_hash: &'a str,
    input_hash: &'a str,
    seed: u64,
    config_id: &'a str,
    prompt_id: &'a str,
    model_id: &'a str,
    output_hash: &'a str,
    anchors: &'a [String],
    uncertainty_summary: &'a BTreeMap<String, f64>,
}

fn record_hash_of(record: &AuditRecord) -> String {
    let body = RecordBody {
        run_id: &record.run_id,
        timestamp: &record.timestamp,
        prev_hash: &record.prev_hash,
        input_hash: &record.input_hash,
        seed: record.seed,
        config_id: &record.config_id,
        prompt_id: &record.prompt_id,
        model_id: &record.model_id,
        output_hash: &record.output_hash,
        anchors: &record.anchors,
        uncertainty_summary: &record.uncertainty_summary,
    };
    fingerprint(serde_json::to_string(&body).expect("serializable body").as_bytes())
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

/// A unique run id: epoch nanoseconds plus a process-local counter.
pub fn fresh_run_id() -> String {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let counter = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("run-{nanos:x}-{counter:04x}")
}

/// Descriptor of one run, supplied by the caller before hashing outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub run_id: String,
    pub timestamp: String,
    pub input_hash: String,
    pub seed: u64,
    pub config_id: String,
    pub prompt_id: String,
    pub model_id: String,
    pub anchors: Vec<String>,
    pub uncertainty_summary: BTreeMap<String, f64>,
}

impl RunContext {
    /// Context with a fresh run id and the current UTC timestamp.
    pub fn new(input_hash: &str, seed: u64, config_id: &str) -> Self {
        RunContext {
            run_id: fresh_run_id(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            input_hash: input_hash.to_string(),
            seed,
            config_id: config_id.to_string(),
            prompt_id: String::new(),
            model_id: String::new(),
            anchors: Vec::new(),
            uncertainty_summary: BTreeMap::new(),
        }
    }
}

/// Reads all records of a JSON-lines audit log.
pub fn read_log(path: &Path) -> Result<Vec<AuditRecord>, AuditError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Appends one record for a finished run. The previous record's hash is
/// re-verified before linking; a tampered tail fails the append.
pub fn log_run(path: &Path, ctx: RunContext, outputs: &[u8]) -> Result<AuditRecord, AuditError> {
    let existing = read_log(path)?;
    let prev_hash = match existing.last() {
        None => GENESIS_HASH.to_string(),
        Some(last) => {
            if record_hash_of(last) != last.record_hash {
                return Err(AuditError::ChainBreak {
                    index: existing.len() - 1,
                });
            }
            last.record_hash.clone()
        }
    };
    let mut record = AuditRecord {
        run_id: ctx.run_id,
        timestamp: ctx.timestamp,
        prev_hash,
        input_hash: ctx.input_hash,
        seed: ctx.seed,
        config_id: ctx.config_id,
        prompt_id: ctx.prompt_id,
        model_id: ctx.model_id,
        output_hash: fingerprint(outputs),
        anchors: ctx.anchors,
        uncertainty_summary: ctx.uncertainty_summary,
        record_hash: String::new(),
    };
    record.record_hash = record_hash_of(&record);

    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    serde_json::to_writer(&mut file, &record)?;
    file.write_all(b"\n")?;
    Ok(record)
}

/// Chain verification result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainReport {
    pub records: usize,
    pub valid: bool,
    /// Index of the first record whose hash or link fails.
    pub break_index: Option<usize>,
}

/// Verifies that every record's hash recomputes and links to its
/// predecessor.
pub fn verify_chain(records: &[AuditRecord]) -> ChainReport {
    let mut expected_prev = GENESIS_HASH.to_string();
    for (i, record) in records.iter().enumerate() {
        if record.prev_hash != expected_prev || record_hash_of(record) != record.record_hash {
            return ChainReport {
                records: records.len(),
                valid: false,
                break_index: Some(i),
            };
        }
        expected_prev = record.record_hash.clone();
    }
    ChainReport {
        records: records.len(),
        valid: true,
        break_index: None,
    }
}

// ---------------------------------------------------------------------------
// Release package

/// File names every release must contain.
pub const MANDATORY_ARTIFACTS: [&str; 9] = [
    "units.csv",
    "units.jsonl",
    "codebook.yaml",
    "schema.json",
    "graph_edges.csv",
    "scores_unit.csv",
    "scores_req.csv",
    "reliability_report.md",
    "audit_log.jsonl",
];

pub const MANIFEST_NAME: &str = "MANIFEST";

/// Source files staged for a release, keyed by their name inside the
/// package.
#[derive(Debug, Clone, Default)]
pub struct ReleaseInputs {
    pub files: BTreeMap<String, PathBuf>,
}

impl ReleaseInputs {
    pub fn add(&mut self, name: &str, source: impl Into<PathBuf>) -> &mut Self {
        self.files.insert(name.to_string(), source.into());
        self
    }
}

/// Parsed MANIFEST: file name to SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReleaseManifest {
    pub entries: BTreeMap<String, String>,
}

/// Copies the staged artifacts into `out_dir` and writes a MANIFEST with one
/// `sha256  name` line per file (a leading `#` metadata line carries the
/// build timestamp, the only timestamp in the package besides the audit
/// log).
pub fn build_release(inputs: &ReleaseInputs, out_dir: &Path) -> Result<ReleaseManifest, AuditError> {
    for name in MANDATORY_ARTIFACTS {
        if !inputs.files.contains_key(name) {
            return Err(AuditError::MissingArtifact(name.to_string()));
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut entries = BTreeMap::new();
    for (name, source) in &inputs.files {
        let bytes = fs::read(source)?;
        fs::write(out_dir.join(name), &bytes)?;
        entries.insert(name.clone(), fingerprint(&bytes));
    }
    let mut manifest = format!(
        "# generated {}\n",
        Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    for (name, hash) in &entries {
        manifest.push_str(&format!("{hash}  {name}\n"));
    }
    fs::write(out_dir.join(MANIFEST_NAME), manifest)?;
    Ok(ReleaseManifest { entries })
}

pub fn read_release_manifest(dir: &Path) -> Result<ReleaseManifest, AuditError> {
    let path = dir.join(MANIFEST_NAME);
    if !path.exists() {
        return Err(AuditError::MissingManifest(path));
    }
    let mut entries = BTreeMap::new();
    for (i, line) in fs::read_to_string(&path)?.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (hash, name) = line.split_once("  ").ok_or(AuditError::BadManifestLine {
            line: i + 1,
            content: line.to_string(),
        })?;
        entries.insert(name.to_string(), hash.to_string());
    }
    Ok(ReleaseManifest { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FileStatus {
    Match,
    Mismatch,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileCheck {
    pub name: String,
    pub status: FileStatus,
}

/// Outcome of [`verify_release`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub files: Vec<FileCheck>,
    pub chain: Option<ChainReport>,
    pub pass: bool,
}

/// Recomputes every manifest fingerprint and the audit chain. Failures are
/// report content, not errors.
pub fn verify_release(dir: &Path) -> Result<VerificationReport, AuditError> {
    let manifest = read_release_manifest(dir)?;
    let mut files = Vec::new();
    let mut all_match = true;
    for (name, expected) in &manifest.entries {
        let path = dir.join(name);
        let status = if !path.exists() {
            FileStatus::Missing
        } else if &fingerprint(&fs::read(&path)?) == expected {
            FileStatus::Match
        } else {
            FileStatus::Mismatch
        };
        all_match &= status == FileStatus::Match;
        files.push(FileCheck {
            name: name.clone(),
            status,
        });
    }

    let log_path = dir.join("audit_log.jsonl");
    let chain = if log_path.exists() {
        Some(verify_chain(&read_log(&log_path)?))
    } else {
        None
    };
    let chain_ok = chain.as_ref().map(|c| c.valid).unwrap_or(false);

    Ok(VerificationReport {
        files,
        pass: all_match && chain_ok,
        chain,
    })
}
