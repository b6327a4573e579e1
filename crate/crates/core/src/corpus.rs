//! Document ingestion and extraction units.
//!
//! Documents arrive as pre-extracted plain text (one file per DocID); form
//! feed characters (`\x0C`), the conventional page separator in extracted
//! text, mark page boundaries. Ingestion fingerprints the raw bytes,
//! normalizes whitespace, and records page-start offsets. Extraction splits
//! the normalized text into sentence units of at least 20 characters, each
//! anchored by byte offsets into the stored document text.

use std::io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::requirement::RequirementId;

/// Minimum unit length in characters after trimming.
pub const MIN_UNIT_CHARS: usize = 20;

/// Sentence-terminal punctuation: ASCII and fullwidth forms.
const TERMINALS: [char; 6] = ['.', '!', '?', '\u{3002}', '\u{FF01}', '\u{FF1F}'];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("document {doc_id}: {replacements} undecodable byte runs exceed budget {budget}; first at byte offset {first_offset}")]
    UndecodableInput {
        doc_id: String,
        replacements: usize,
        budget: usize,
        first_offset: usize,
    },
    #[error("document {doc_id}: year {year} outside [1900, 2100]")]
    YearOutOfRange { doc_id: String, year: i32 },
    #[error("manifest parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("units parse error at line {line}: {message}")]
    UnitParse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One row of a corpus manifest CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    #[serde(rename = "DocID")]
    pub doc_id: String,
    #[serde(rename = "Jurisdiction")]
    pub jurisdiction: String,
    #[serde(rename = "Regulator")]
    pub regulator: String,
    #[serde(rename = "DocumentType")]
    pub doc_type: String,
    #[serde(rename = "Year")]
    pub year: Option<i32>,
    #[serde(rename = "Title")]
    pub title: String,
    #[serde(rename = "SourceURL")]
    pub source_url: String,
    #[serde(rename = "Keywords")]
    #[serde(default)]
    pub keywords: String,
}

pub fn read_manifest<R: io::Read>(reader: R) -> Result<Vec<ManifestRow>, CorpusError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// A source document with normalized text and page-start offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSource {
    pub doc_id: String,
    pub title: String,
    pub jurisdiction: String,
    pub regulator: String,
    pub doc_type: String,
    pub year: Option<i32>,
    pub url: String,
    /// Lowercase SHA-256 hex digest of the raw input bytes.
    pub sha256: String,
    /// Whitespace-normalized text (runs collapsed to single spaces).
    pub text: String,
    /// Byte offsets into `text` where each page starts; empty when the input
    /// carried no page markers.
    pub page_breaks: Vec<usize>,
}

/// Ingestion options and statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Maximum tolerated count of undecodable byte runs (each becomes one
    /// U+FFFD replacement).
    pub replacement_budget: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            replacement_budget: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestStats {
    /// Number of undecodable byte runs replaced with U+FFFD.
    pub replacements: usize,
}

/// Lowercase SHA-256 hex digest.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn decode_lossy_counted(raw: &[u8]) -> (String, usize, Option<usize>) {
    let mut out = String::with_capacity(raw.len());
    let mut replacements = 0usize;
    let mut first_offset = None;
    let mut rest = raw;
    let mut consumed = 0usize;
    loop {
        match std::str::from_utf8(rest) {
            Ok(valid) => {
                out.push_str(valid);
                break;
            }
            Err(err) => {
                let valid_up_to = err.valid_up_to();
                out.push_str(std::str::from_utf8(&rest[..valid_up_to]).expect("validated"));
                out.push('\u{FFFD}');
                replacements += 1;
                first_offset.get_or_insert(consumed + valid_up_to);
                let skip = valid_up_to + err.error_len().unwrap_or(rest.len() - valid_up_to);
                consumed += skip;
                rest = &rest[skip..];
                if rest.is_empty() {
                    break;
                }
            }
        }
    }
    (out, replacements, first_offset)
}

/// Collapses whitespace runs to single spaces and trims.
fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_space = true; // swallow leading whitespace
    for c in text.chars() {
        if c.is_whitespace() {
            if !in_space {
                out.push(' ');
                in_space = true;
            }
        } else {
            out.push(c);
            in_space = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Ingests one document: fingerprints the raw bytes, decodes UTF-8 with a
/// bounded replacement budget, splits on form-feed page markers, and
/// normalizes whitespace within pages.
pub fn ingest_document(
    raw: &[u8],
    meta: &ManifestRow,
    opts: &IngestOptions,
) -> Result<(DocumentSource, IngestStats), CorpusError> {
    if let Some(year) = meta.year {
        if !(1900..=2100).contains(&year) {
            return Err(CorpusError::YearOutOfRange {
                doc_id: meta.doc_id.clone(),
                year,
            });
        }
    }
    let sha256 = fingerprint(raw);
    let (decoded, replacements, first_offset) = decode_lossy_counted(raw);
    if replacements > opts.replacement_budget {
        return Err(CorpusError::UndecodableInput {
            doc_id: meta.doc_id.clone(),
            replacements,
            budget: opts.replacement_budget,
            first_offset: first_offset.unwrap_or(0),
        });
    }

    let has_pages = decoded.contains('\u{000C}');
    let mut text = String::with_capacity(decoded.len());
    let mut page_breaks = Vec::new();
    if has_pages {
        for (i, page) in decoded.split('\u{000C}').enumerate() {
            if i > 0 && !text.is_empty() {
                text.push(' ');
            }
            page_breaks.push(text.len());
            text.push_str(&normalize_whitespace(page));
            if text.ends_with(' ') {
                text.pop();
            }
        }
    } else {
        text = normalize_whitespace(&decoded);
    }

    Ok((
        DocumentSource {
            doc_id: meta.doc_id.clone(),
            title: meta.title.clone(),
            jurisdiction: meta.jurisdiction.clone(),
            regulator: meta.regulator.clone(),
            doc_type: meta.doc_type.clone(),
            year: meta.year,
            url: meta.source_url.clone(),
            sha256,
            text,
            page_breaks,
        },
        IngestStats { replacements },
    ))
}

/// Byte spans of trimmed sentence segments within already-normalized text.
/// A segment ends after terminal punctuation followed by whitespace; segments
/// shorter than [`MIN_UNIT_CHARS`] characters are discarded.
fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0usize;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0usize;
    while i < chars.len() {
        let (offset, c) = chars[i];
        if TERMINALS.contains(&c) {
            if let Some((_, next)) = chars.get(i + 1) {
                if next.is_whitespace() {
                    push_span(text, start, offset + c.len_utf8(), &mut spans);
                    start = offset + c.len_utf8();
                    i += 1; // skip the whitespace separator
                }
            }
        }
        i += 1;
    }
    push_span(text, start, text.len(), &mut spans);
    spans
}

fn push_span(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let trimmed_front = slice.trim_start();
    let new_start = start + (slice.len() - trimmed_front.len());
    let trimmed = trimmed_front.trim_end();
    let new_end = new_start + trimmed.len();
    if trimmed.chars().count() >= MIN_UNIT_CHARS {
        spans.push((new_start, new_end));
    }
}

/// Splits text into sentence segments: whitespace collapsed, split after
/// terminal punctuation followed by whitespace, trimmed, segments shorter
/// than 20 characters discarded.
pub fn split_sentences(text: &str) -> Vec<String> {
    let normalized = normalize_whitespace(text);
    sentence_spans(&normalized)
        .into_iter()
        .map(|(s, e)| normalized[s..e].to_string())
        .collect()
}

/// One sentence-level scoring unit with a verifiable source anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionUnit {
    /// `<requirement>-p<page>-u<serial>`, e.g. `R3-p27-u00117`.
    pub unit_id: String,
    pub doc_id: String,
    /// 1-based page number; `None` when the document has no page markers
    /// (serialized as -1).
    pub page: Option<u32>,
    pub requirement_id: RequirementId,
    pub text: String,
    /// Byte offsets of the unit within the normalized document text.
    pub anchor_span: (usize, usize),
    /// 0-based sentence index within the document.
    pub sentence_index: usize,
}

/// Builds extraction units from the first `page_limit` pages of a document.
/// `classifier` maps unit text to a requirement; serial numbers start at
/// `serial_start` and increase in document order.
pub fn extract_units<F>(
    doc: &DocumentSource,
    page_limit: usize,
    classifier: F,
    serial_start: usize,
) -> Vec<ExtractionUnit>
where
    F: Fn(&str) -> RequirementId,
{
    let end = if !doc.page_breaks.is_empty() && doc.page_breaks.len() > page_limit {
        doc.page_breaks[page_limit]
    } else {
        doc.text.len()
    };
    let scoped = &doc.text[..end];

    sentence_spans(scoped)
        .into_iter()
        .enumerate()
        .map(|(sentence_index, (start, span_end))| {
            let text = doc.text[start..span_end].to_string();
            let page = if doc.page_breaks.is_empty() {
                None
            } else {
                Some(doc.page_breaks.partition_point(|b| *b <= start) as u32)
            };
            let requirement_id = classifier(&text);
            let serial = serial_start + sentence_index;
            ExtractionUnit {
                unit_id: format!(
                    "{}-p{:02}-u{:05}",
                    requirement_id,
                    page.unwrap_or(0),
                    serial
                ),
                doc_id: doc.doc_id.clone(),
                page,
                requirement_id,
                text,
                anchor_span: (start, span_end),
                sentence_index,
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct UnitCsvRecord {
    unit_id: String,
    text: String,
    doc_id: String,
    page_number: i64,
    sentence_id: usize,
    requirement_id: RequirementId,
    anchor_span: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnitJsonRecord {
    unit_id: String,
    text: String,
    doc_id: String,
    page_number: i64,
    sentence_id: usize,
    requirement_id: RequirementId,
    anchor_span: (usize, usize),
}

fn page_to_i64(page: Option<u32>) -> i64 {
    page.map(i64::from).unwrap_or(-1)
}

fn page_from_i64(page: i64) -> Option<u32> {
    u32::try_from(page).ok()
}

pub fn write_units_csv<W: io::Write>(
    units: &[ExtractionUnit],
    writer: W,
) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    for u in units {
        w.serialize(UnitCsvRecord {
            unit_id: u.unit_id.clone(),
            text: u.text.clone(),
            doc_id: u.doc_id.clone(),
            page_number: page_to_i64(u.page),
            sentence_id: u.sentence_index,
            requirement_id: u.requirement_id,
            anchor_span: format!("{}:{}", u.anchor_span.0, u.anchor_span.1),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_units_csv<R: io::Read>(reader: R) -> Result<Vec<ExtractionUnit>, CorpusError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut units = Vec::new();
    for (i, row) in r.deserialize::<UnitCsvRecord>().enumerate() {
        let rec = row?;
        let span = rec
            .anchor_span
            .split_once(':')
            .and_then(|(s, e)| Some((s.parse().ok()?, e.parse().ok()?)))
            .ok_or_else(|| CorpusError::UnitParse {
                line: i + 2,
                message: format!("bad anchor_span {:?}", rec.anchor_span),
            })?;
        units.push(ExtractionUnit {
            unit_id: rec.unit_id,
            doc_id: rec.doc_id,
            page: page_from_i64(rec.page_number),
            requirement_id: rec.requirement_id,
            text: rec.text,
            anchor_span: span,
            sentence_index: rec.sentence_id,
        });
    }
    Ok(units)
}

pub fn write_units_jsonl<W: io::Write>(
    units: &[ExtractionUnit],
    mut writer: W,
) -> Result<(), CorpusError> {
    for u in units {
        let rec = UnitJsonRecord {
            unit_id: u.unit_id.clone(),
            text: u.text.clone(),
            doc_id: u.doc_id.clone(),
            page_number: page_to_i64(u.page),
            sentence_id: u.sentence_index,
            requirement_id: u.requirement_id,
            anchor_span: u.anchor_span,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_units_jsonl<R: io::BufRead>(reader: R) -> Result<Vec<ExtractionUnit>, CorpusError> {
    let mut units = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: UnitJsonRecord = serde_json::from_str(&line)?;
        units.push(ExtractionUnit {
            unit_id: rec.unit_id,
            doc_id: rec.doc_id,
            page: page_from_i64(rec.page_number),
            requirement_id: rec.requirement_id,
            text: rec.text,
            anchor_span: rec.anchor_span,
            sentence_index: rec.sentence_id,
        });
    }
    Ok(units)
}
