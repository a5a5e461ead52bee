//! Reading, validating and writing the canonical dataset file.
//!
//! The file is a single JSON object:
//!
//! ```text
//! { "meta":     { "title", "unit_height_px", "segment_width_px" },
//!   "spreads":  [ { "id", "image", "width_px", "height_px", "lines": [ { "index", "x_px" } ] } ],
//!   "blocks":   [ { "id", "text", "jibo"? } ],
//!   "segments": [ { "id", "spread", "line", "bbox": { "x", "y", "w", "h" }, "text", "jibo"?, "block" } ],
//!   "edit_log": [ { "op", ..., "revision", "ts" } ] }
//! ```
//!
//! Block membership is not stored on blocks; it is derived from each
//! segment's `block` field.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{Edit, EditLog};
use crate::model::{
    BBox, BlockId, CharacterKey, Dataset, LineLayout, Meta, Segment, SegmentId, Spread, SpreadId,
};

/// Relative deviation from the nearest unit multiple above which a segment
/// height is reported.
pub const DEFAULT_HEIGHT_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    InvalidUnitHeight,
    SpreadIdNotContiguous,
    InvalidPageSize,
    DuplicateLineIndex,
    DuplicateBlockId,
    DuplicateSegmentId,
    EmptyText,
    EmptyJibo,
    UnknownSpread,
    UnknownLine,
    UnknownBlock,
    EmptyBbox,
    KeyMismatch,
    EmptyBlock,
    MembershipMismatch,
    HNotUnitMultiple,
    BboxOutOfPage,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::InvalidUnitHeight => "INVALID_UNIT_HEIGHT",
            IssueCode::SpreadIdNotContiguous => "SPREAD_ID_NOT_CONTIGUOUS",
            IssueCode::InvalidPageSize => "INVALID_PAGE_SIZE",
            IssueCode::DuplicateLineIndex => "DUPLICATE_LINE_INDEX",
            IssueCode::DuplicateBlockId => "DUPLICATE_BLOCK_ID",
            IssueCode::DuplicateSegmentId => "DUPLICATE_SEGMENT_ID",
            IssueCode::EmptyText => "EMPTY_TEXT",
            IssueCode::EmptyJibo => "EMPTY_JIBO",
            IssueCode::UnknownSpread => "UNKNOWN_SPREAD",
            IssueCode::UnknownLine => "UNKNOWN_LINE",
            IssueCode::UnknownBlock => "UNKNOWN_BLOCK",
            IssueCode::EmptyBbox => "EMPTY_BBOX",
            IssueCode::KeyMismatch => "KEY_MISMATCH",
            IssueCode::EmptyBlock => "EMPTY_BLOCK",
            IssueCode::MembershipMismatch => "MEMBERSHIP_MISMATCH",
            IssueCode::HNotUnitMultiple => "H_NOT_UNIT_MULTIPLE",
            IssueCode::BboxOutOfPage => "BBOX_OUT_OF_PAGE",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntityRef {
    Dataset,
    Spread { spread: u32 },
    Line { spread: u32, line: u32 },
    Block { block: u64 },
    Segment { segment: u64 },
    SegmentBlock { segment: u64, block: u64 },
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Dataset => f.write_str("dataset"),
            EntityRef::Spread { spread } => write!(f, "spread {spread}"),
            EntityRef::Line { spread, line } => write!(f, "spread {spread} line {line}"),
            EntityRef::Block { block } => write!(f, "block {block}"),
            EntityRef::Segment { segment } => write!(f, "segment {segment}"),
            EntityRef::SegmentBlock { segment, block } => {
                write!(f, "segment {segment} / block {block}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub entity: EntityRef,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.entity, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_warning(&self, code: IssueCode, segment: SegmentId) -> bool {
        self.warnings
            .iter()
            .any(|w| w.code == code && w.entity == EntityRef::Segment { segment: segment.0 })
    }

    fn error(&mut self, code: IssueCode, entity: EntityRef, message: String) {
        self.errors.push(Issue {
            code,
            message,
            entity,
        });
    }

    fn warning(&mut self, code: IssueCode, entity: EntityRef, message: String) {
        self.warnings.push(Issue {
            code,
            message,
            entity,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(
            f,
            "{} error(s), {} warning(s)",
            self.errors.len(),
            self.warnings.len()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub height_tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            height_tolerance: DEFAULT_HEIGHT_TOLERANCE,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("integrity errors in dataset ({} error(s)); first: {}", .0.errors.len(), .0.errors.first().map(ToString::to_string).unwrap_or_default())]
    Integrity(ValidationReport),
}

/// A successfully parsed document.
#[derive(Debug, Clone)]
pub struct ParsedDocument {
    pub dataset: Dataset,
    pub edit_log: EditLog,
    pub report: ValidationReport,
}

// On-disk shapes. Field order here is the serialized key order.

#[derive(Debug, Serialize, Deserialize)]
struct DocumentFile {
    meta: MetaDoc,
    spreads: Vec<SpreadDoc>,
    blocks: Vec<BlockDoc>,
    segments: Vec<SegmentDoc>,
    #[serde(default)]
    edit_log: Vec<Edit>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaDoc {
    title: String,
    unit_height_px: f64,
    segment_width_px: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpreadDoc {
    id: u32,
    image: Option<String>,
    width_px: u32,
    height_px: u32,
    lines: Vec<LineLayout>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockDoc {
    id: u64,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jibo: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentDoc {
    id: u64,
    spread: u32,
    line: u32,
    bbox: BBox,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jibo: Option<String>,
    block: u64,
}

/// Parses and validates a canonical dataset document.
pub fn parse_dataset(text: &str) -> Result<ParsedDocument, IngestError> {
    parse_dataset_with(text, &ValidationConfig::default())
}

pub fn parse_dataset_with(
    text: &str,
    config: &ValidationConfig,
) -> Result<ParsedDocument, IngestError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IngestError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let doc: DocumentFile =
        serde_path_to_error::deserialize(value).map_err(|e| IngestError::Schema {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;

    let mut report = ValidationReport::default();
    let dataset = assemble(doc.meta, doc.spreads, doc.blocks, doc.segments, &mut report);
    let checked = validate_with(&dataset, config);
    report.errors.extend(checked.errors);
    report.warnings.extend(checked.warnings);
    if !report.is_ok() {
        return Err(IngestError::Integrity(report));
    }
    Ok(ParsedDocument {
        dataset,
        edit_log: EditLog::from_entries(doc.edit_log),
        report,
    })
}

fn assemble(
    meta: MetaDoc,
    spreads: Vec<SpreadDoc>,
    blocks: Vec<BlockDoc>,
    segments: Vec<SegmentDoc>,
    report: &mut ValidationReport,
) -> Dataset {
    let spreads = spreads
        .into_iter()
        .map(|s| Spread {
            id: SpreadId(s.id),
            image: s.image,
            width_px: s.width_px,
            height_px: s.height_px,
            lines: s.lines,
        })
        .collect();

    let mut block_keys = BTreeMap::new();
    for b in blocks {
        let id = BlockId(b.id);
        if block_keys.contains_key(&id) {
            report.error(
                IssueCode::DuplicateBlockId,
                EntityRef::Block { block: b.id },
                format!("block id {} declared more than once", b.id),
            );
            continue;
        }
        block_keys.insert(
            id,
            CharacterKey {
                text: b.text,
                jibo: b.jibo,
            },
        );
    }

    let mut seen = HashSet::new();
    let mut segs = Vec::with_capacity(segments.len());
    for s in segments {
        if !seen.insert(s.id) {
            report.error(
                IssueCode::DuplicateSegmentId,
                EntityRef::Segment { segment: s.id },
                format!("segment id {} declared more than once", s.id),
            );
            continue;
        }
        segs.push(Segment {
            id: SegmentId(s.id),
            spread_id: SpreadId(s.spread),
            line_index: s.line,
            bbox: s.bbox,
            key: CharacterKey {
                text: s.text,
                jibo: s.jibo,
            },
            block_id: BlockId(s.block),
        });
    }

    Dataset::assemble(
        Meta {
            title: meta.title,
            unit_height_px: meta.unit_height_px,
            segment_width_px: meta.segment_width_px,
        },
        spreads,
        block_keys,
        segs,
    )
}

/// Checks every model invariant and the segmentation assumptions. Never
/// modifies the dataset.
pub fn validate(ds: &Dataset) -> ValidationReport {
    validate_with(ds, &ValidationConfig::default())
}

pub fn validate_with(ds: &Dataset, config: &ValidationConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let unit = ds.meta.unit_height_px;
    let unit_ok = unit.is_finite() && unit > 0.0;
    if !unit_ok {
        report.error(
            IssueCode::InvalidUnitHeight,
            EntityRef::Dataset,
            format!("unit_height_px must be positive, got {unit}"),
        );
    }

    for (pos, spread) in ds.spreads.iter().enumerate() {
        let sref = EntityRef::Spread {
            spread: spread.id.0,
        };
        if spread.id.0 as usize != pos {
            report.error(
                IssueCode::SpreadIdNotContiguous,
                sref.clone(),
                format!("spread at position {pos} has id {}", spread.id.0),
            );
        }
        if spread.width_px == 0 || spread.height_px == 0 {
            report.error(
                IssueCode::InvalidPageSize,
                sref.clone(),
                format!(
                    "page size {}x{} is not positive",
                    spread.width_px, spread.height_px
                ),
            );
        }
        let mut lines = HashSet::new();
        for line in &spread.lines {
            if !lines.insert(line.index) {
                report.error(
                    IssueCode::DuplicateLineIndex,
                    EntityRef::Line {
                        spread: spread.id.0,
                        line: line.index,
                    },
                    format!("line index {} repeated", line.index),
                );
            }
        }
    }

    for block in ds.blocks.values() {
        let bref = EntityRef::Block { block: block.id.0 };
        check_key(&mut report, &block.key, &bref);
        if block.member_ids.is_empty() {
            report.error(
                IssueCode::EmptyBlock,
                bref.clone(),
                "block has no segments".into(),
            );
        }
        for sid in &block.member_ids {
            match ds.segments.get(sid) {
                Some(seg) if seg.block_id == block.id => {}
                _ => report.error(
                    IssueCode::MembershipMismatch,
                    EntityRef::SegmentBlock {
                        segment: sid.0,
                        block: block.id.0,
                    },
                    format!(
                        "block {} lists segment {} which does not point back",
                        block.id.0, sid.0
                    ),
                ),
            }
        }
    }

    let mut listed: BTreeMap<SegmentId, usize> = BTreeMap::new();
    for block in ds.blocks.values() {
        for sid in &block.member_ids {
            *listed.entry(*sid).or_default() += 1;
        }
    }

    for seg in ds.segments.values() {
        let sref = EntityRef::Segment { segment: seg.id.0 };
        check_key(&mut report, &seg.key, &sref);
        if seg.bbox.w == 0 || seg.bbox.h == 0 {
            report.error(
                IssueCode::EmptyBbox,
                sref.clone(),
                format!("bbox {}x{} has zero extent", seg.bbox.w, seg.bbox.h),
            );
        }
        match ds.spread(seg.spread_id) {
            None => report.error(
                IssueCode::UnknownSpread,
                sref.clone(),
                format!("refers to missing spread {}", seg.spread_id.0),
            ),
            Some(spread) => {
                if spread.line(seg.line_index).is_none() {
                    report.error(
                        IssueCode::UnknownLine,
                        sref.clone(),
                        format!("spread {} has no line {}", spread.id.0, seg.line_index),
                    );
                }
                if seg.bbox.right() > u64::from(spread.width_px)
                    || seg.bbox.bottom() > u64::from(spread.height_px)
                {
                    report.warning(
                        IssueCode::BboxOutOfPage,
                        sref.clone(),
                        format!(
                            "bbox ({}, {}, {}, {}) exceeds page {}x{}",
                            seg.bbox.x,
                            seg.bbox.y,
                            seg.bbox.w,
                            seg.bbox.h,
                            spread.width_px,
                            spread.height_px
                        ),
                    );
                }
            }
        }
        match ds.blocks.get(&seg.block_id) {
            None => report.error(
                IssueCode::UnknownBlock,
                sref.clone(),
                format!("refers to missing block {}", seg.block_id.0),
            ),
            Some(block) => {
                if block.key != seg.key {
                    report.error(
                        IssueCode::KeyMismatch,
                        EntityRef::SegmentBlock {
                            segment: seg.id.0,
                            block: block.id.0,
                        },
                        format!(
                            "segment {} is '{}' but block {} is '{}'",
                            seg.id.0, seg.key, block.id.0, block.key
                        ),
                    );
                }
                if listed.get(&seg.id) != Some(&1) || !block.member_ids.contains(&seg.id) {
                    report.error(
                        IssueCode::MembershipMismatch,
                        EntityRef::SegmentBlock {
                            segment: seg.id.0,
                            block: block.id.0,
                        },
                        format!(
                            "segment {} must be listed exactly once, in block {}",
                            seg.id.0, block.id.0
                        ),
                    );
                }
            }
        }
        if unit_ok && height_deviation(seg.bbox.h, unit) > config.height_tolerance * unit {
            let nearest = nearest_multiple(seg.bbox.h, unit);
            report.warning(
                IssueCode::HNotUnitMultiple,
                sref,
                format!(
                    "height {} deviates {:.1}px from nearest unit multiple {}",
                    seg.bbox.h,
                    height_deviation(seg.bbox.h, unit),
                    nearest
                ),
            );
        }
    }
    report
}

fn check_key(report: &mut ValidationReport, key: &CharacterKey, entity: &EntityRef) {
    if key.text.is_empty() {
        report.error(
            IssueCode::EmptyText,
            entity.clone(),
            "character text is empty".into(),
        );
    }
    if key.jibo.as_deref() == Some("") {
        report.error(
            IssueCode::EmptyJibo,
            entity.clone(),
            "jibo must be omitted rather than empty".into(),
        );
    }
}

fn nearest_multiple(h: u32, unit: f64) -> f64 {
    (f64::from(h) / unit).round() * unit
}

/// Absolute distance in pixels between a height and its nearest unit multiple.
pub fn height_deviation(h: u32, unit: f64) -> f64 {
    (f64::from(h) - nearest_multiple(h, unit)).abs()
}

/// Serializes a dataset and its edit log. Output is byte-identical for
/// identical inputs.
pub fn export_dataset(ds: &Dataset, log: &EditLog) -> String {
    let doc = DocumentFile {
        meta: MetaDoc {
            title: ds.meta.title.clone(),
            unit_height_px: ds.meta.unit_height_px,
            segment_width_px: ds.meta.segment_width_px,
        },
        spreads: ds
            .spreads
            .iter()
            .map(|s| SpreadDoc {
                id: s.id.0,
                image: s.image.clone(),
                width_px: s.width_px,
                height_px: s.height_px,
                lines: s.lines.clone(),
            })
            .collect(),
        blocks: ds
            .blocks
            .values()
            .map(|b| BlockDoc {
                id: b.id.0,
                text: b.key.text.clone(),
                jibo: b.key.jibo.clone(),
            })
            .collect(),
        segments: ds
            .segments
            .values()
            .map(|s| SegmentDoc {
                id: s.id.0,
                spread: s.spread_id.0,
                line: s.line_index,
                bbox: s.bbox,
                text: s.key.text.clone(),
                jibo: s.key.jibo.clone(),
                block: s.block_id.0,
            })
            .collect(),
        edit_log: log.entries().to_vec(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("document serialization is infallible");
    out.push('\n');
    out
}

/// Converts a foreign document into the canonical form. Only the canonical
/// format itself ships; other upstream layouts plug in here.
pub trait ImportAdapter {
    fn name(&self) -> &'static str;
    fn convert(&self, input: &str) -> Result<ParsedDocument, IngestError>;
}

pub struct CanonicalAdapter;

impl ImportAdapter for CanonicalAdapter {
    fn name(&self) -> &'static str {
        "canonical"
    }

    fn convert(&self, input: &str) -> Result<ParsedDocument, IngestError> {
        parse_dataset(input)
    }
}

pub fn adapter_for(name: &str) -> Option<Box<dyn ImportAdapter>> {
    match name {
        "canonical" => Some(Box::new(CanonicalAdapter)),
        _ => None,
    }
}
