//! The book ontology: spreads, segments, blocks and characters, the lookup
//! indexes built over them, and multi-level selection expansion.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident($inner:ty), $label:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($label, " {}"), self.0)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                $name(v)
            }
        }
    };
}

id_newtype!(
    /// Index of a spread in reading order.
    SpreadId(u32),
    "spread"
);
id_newtype!(SegmentId(u64), "segment");
id_newtype!(BlockId(u64), "block");

/// Identity of a character sequence. Kana carry the mother kanji they derive
/// from, so the same Unicode text may map to several keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharacterKey {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jibo: Option<String>,
}

impl CharacterKey {
    pub fn new(text: impl Into<String>, jibo: Option<&str>) -> Self {
        CharacterKey {
            text: text.into(),
            jibo: jibo.map(str::to_owned),
        }
    }

    pub fn plain(text: impl Into<String>) -> Self {
        CharacterKey {
            text: text.into(),
            jibo: None,
        }
    }
}

impl fmt::Display for CharacterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.jibo {
            Some(j) => write!(f, "{}/{}", self.text, j),
            None => f.write_str(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub title: String,
    pub unit_height_px: f64,
    pub segment_width_px: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineLayout {
    pub index: u32,
    pub x_px: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spread {
    pub id: SpreadId,
    pub image: Option<String>,
    pub width_px: u32,
    pub height_px: u32,
    pub lines: Vec<LineLayout>,
}

impl Spread {
    pub fn line(&self, index: u32) -> Option<&LineLayout> {
        self.lines.iter().find(|l| l.index == index)
    }
}

/// Axis-aligned pixel rectangle, origin at the top-left of the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn right(&self) -> u64 {
        u64::from(self.x) + u64::from(self.w)
    }

    pub fn bottom(&self) -> u64 {
        u64::from(self.y) + u64::from(self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: SegmentId,
    pub spread_id: SpreadId,
    pub line_index: u32,
    pub bbox: BBox,
    pub key: CharacterKey,
    pub block_id: BlockId,
}

impl Segment {
    /// Sort key for reading order: spread, line, vertical position, then id.
    pub fn reading_order(&self) -> (SpreadId, u32, u32, SegmentId) {
        (self.spread_id, self.line_index, self.bbox.y, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub key: CharacterKey,
    /// Members in reading order.
    pub member_ids: Vec<SegmentId>,
}

/// A whole book: page layout, segments and the current block hypotheses.
///
/// Fields are public so that loaders and tests can build arbitrary (even
/// inconsistent) states; [`crate::ingest::validate`] reports what is wrong
/// with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: Meta,
    pub spreads: Vec<Spread>,
    pub blocks: BTreeMap<BlockId, Block>,
    pub segments: BTreeMap<SegmentId, Segment>,
}

impl Dataset {
    pub fn empty(title: impl Into<String>, unit_height_px: f64, segment_width_px: u32) -> Self {
        Dataset {
            meta: Meta {
                title: title.into(),
                unit_height_px,
                segment_width_px,
            },
            spreads: Vec::new(),
            blocks: BTreeMap::new(),
            segments: BTreeMap::new(),
        }
    }

    /// Builds a dataset from block declarations and segments, deriving each
    /// block's member list from the segments' `block_id`. Members pointing at
    /// undeclared blocks are left dangling for validation to report.
    pub fn assemble(
        meta: Meta,
        spreads: Vec<Spread>,
        blocks: impl IntoIterator<Item = (BlockId, CharacterKey)>,
        segments: impl IntoIterator<Item = Segment>,
    ) -> Self {
        let mut ds = Dataset {
            meta,
            spreads,
            blocks: blocks
                .into_iter()
                .map(|(id, key)| {
                    (
                        id,
                        Block {
                            id,
                            key,
                            member_ids: Vec::new(),
                        },
                    )
                })
                .collect(),
            segments: segments.into_iter().map(|s| (s.id, s)).collect(),
        };
        for seg in ds.segments.values() {
            if let Some(block) = ds.blocks.get_mut(&seg.block_id) {
                block.member_ids.push(seg.id);
            }
        }
        let ids: Vec<BlockId> = ds.blocks.keys().copied().collect();
        for id in ids {
            ds.sort_members(id);
        }
        ds
    }

    pub fn spread(&self, id: SpreadId) -> Option<&Spread> {
        self.spreads.get(id.0 as usize).filter(|s| s.id == id)
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(&id)
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id)
    }

    pub(crate) fn compare_reading_order(&self, a: SegmentId, b: SegmentId) -> Ordering {
        match (self.segments.get(&a), self.segments.get(&b)) {
            (Some(sa), Some(sb)) => sa.reading_order().cmp(&sb.reading_order()),
            _ => a.cmp(&b),
        }
    }

    /// Restores reading order of a block's member list.
    pub fn sort_members(&mut self, block: BlockId) {
        let Some(mut members) = self
            .blocks
            .get_mut(&block)
            .map(|b| std::mem::take(&mut b.member_ids))
        else {
            return;
        };
        members.sort_by(|a, b| self.compare_reading_order(*a, *b));
        if let Some(b) = self.blocks.get_mut(&block) {
            b.member_ids = members;
        }
    }

    pub fn max_block_id(&self) -> Option<BlockId> {
        self.blocks.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{0} appears in both {1} and {2}")]
    IndexConflict(SegmentId, BlockId, BlockId),
    #[error("unknown {0}")]
    UnknownId(EntityId),
    #[error("unknown character {0}")]
    UnknownCharacter(CharacterKey),
}

/// Reference to any addressable entity, used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityId {
    Spread(SpreadId),
    Segment(SegmentId),
    Block(BlockId),
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Spread(id) => id.fmt(f),
            EntityId::Segment(id) => id.fmt(f),
            EntityId::Block(id) => id.fmt(f),
        }
    }
}

/// A dataset together with the cross-indexes every view and analytic needs.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct IndexedDataset {
    dataset: Arc<Dataset>,
    segment_block: HashMap<SegmentId, BlockId>,
    key_blocks: BTreeMap<CharacterKey, Vec<BlockId>>,
    spread_segments: Vec<Vec<SegmentId>>,
    block_spreads: HashMap<BlockId, BTreeSet<SpreadId>>,
}

pub fn build_indexes(dataset: impl Into<Arc<Dataset>>) -> Result<IndexedDataset, ModelError> {
    let dataset: Arc<Dataset> = dataset.into();
    let mut segment_block = HashMap::with_capacity(dataset.segments.len());
    let mut key_blocks: BTreeMap<CharacterKey, Vec<BlockId>> = BTreeMap::new();
    let mut block_spreads: HashMap<BlockId, BTreeSet<SpreadId>> =
        HashMap::with_capacity(dataset.blocks.len());

    for block in dataset.blocks.values() {
        key_blocks
            .entry(block.key.clone())
            .or_default()
            .push(block.id);
        let spreads = block_spreads.entry(block.id).or_default();
        for sid in &block.member_ids {
            let seg = dataset
                .segments
                .get(sid)
                .ok_or(ModelError::UnknownId(EntityId::Segment(*sid)))?;
            if let Some(prev) = segment_block.insert(*sid, block.id) {
                return Err(ModelError::IndexConflict(*sid, prev, block.id));
            }
            spreads.insert(seg.spread_id);
        }
    }

    let mut spread_segments = vec![Vec::new(); dataset.spreads.len()];
    for seg in dataset.segments.values() {
        let slot = spread_segments
            .get_mut(seg.spread_id.0 as usize)
            .ok_or(ModelError::UnknownId(EntityId::Spread(seg.spread_id)))?;
        slot.push(seg.id);
        if !segment_block.contains_key(&seg.id) {
            return Err(ModelError::UnknownId(EntityId::Block(seg.block_id)));
        }
    }
    for segs in &mut spread_segments {
        segs.sort_by(|a, b| dataset.compare_reading_order(*a, *b));
    }

    Ok(IndexedDataset {
        dataset,
        segment_block,
        key_blocks,
        spread_segments,
        block_spreads,
    })
}

impl IndexedDataset {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn shared_dataset(&self) -> Arc<Dataset> {
        Arc::clone(&self.dataset)
    }

    pub fn block_of(&self, segment: SegmentId) -> Option<BlockId> {
        self.segment_block.get(&segment).copied()
    }

    pub fn block_members(&self, block: BlockId) -> Option<&[SegmentId]> {
        self.dataset
            .blocks
            .get(&block)
            .map(|b| b.member_ids.as_slice())
    }

    pub fn blocks_of_key(&self, key: &CharacterKey) -> Option<&[BlockId]> {
        self.key_blocks.get(key).map(Vec::as_slice)
    }

    pub fn characters(&self) -> impl Iterator<Item = (&CharacterKey, &[BlockId])> {
        self.key_blocks.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Segments of a spread in reading order.
    pub fn spread_segments(&self, spread: SpreadId) -> Option<&[SegmentId]> {
        self.spread_segments
            .get(spread.0 as usize)
            .map(Vec::as_slice)
    }

    pub fn block_spreads(&self, block: BlockId) -> Option<&BTreeSet<SpreadId>> {
        self.block_spreads.get(&block)
    }

    pub fn n_spreads(&self) -> usize {
        self.spread_segments.len()
    }
}

/// Characters, blocks and segments picked across the views.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    #[serde(default)]
    pub characters: BTreeSet<CharacterKey>,
    #[serde(default)]
    pub blocks: BTreeSet<BlockId>,
    #[serde(default)]
    pub segments: BTreeSet<SegmentId>,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.characters.is_empty() && self.blocks.is_empty() && self.segments.is_empty()
    }

    pub fn union(&self, other: &Selection) -> Selection {
        Selection {
            characters: self.characters.union(&other.characters).cloned().collect(),
            blocks: self.blocks.union(&other.blocks).copied().collect(),
            segments: self.segments.union(&other.segments).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &Selection) -> bool {
        self.characters.is_subset(&other.characters)
            && self.blocks.is_subset(&other.blocks)
            && self.segments.is_subset(&other.segments)
    }
}

/// Expands a selection up and down the hierarchy.
///
/// A segment pulls in its block, and a block pulls in its segments and its
/// character. A character fans out to all of its blocks only when it is
/// selected on its own, i.e. no block or segment of that character is in the
/// selection; otherwise it is treated as context of the selected blocks and
/// sibling blocks stay unselected. The result is a fixed point.
pub fn expand_selection(sel: &Selection, ix: &IndexedDataset) -> Result<Selection, ModelError> {
    let ds = ix.dataset();
    let mut touched_keys: BTreeSet<&CharacterKey> = BTreeSet::new();
    for sid in &sel.segments {
        let seg = ds
            .segment(*sid)
            .ok_or(ModelError::UnknownId(EntityId::Segment(*sid)))?;
        touched_keys.insert(&seg.key);
    }
    for bid in &sel.blocks {
        let block = ds
            .block(*bid)
            .ok_or(ModelError::UnknownId(EntityId::Block(*bid)))?;
        touched_keys.insert(&block.key);
    }
    for key in &sel.characters {
        if ix.blocks_of_key(key).is_none() {
            return Err(ModelError::UnknownCharacter(key.clone()));
        }
    }

    let mut blocks = sel.blocks.clone();
    for key in &sel.characters {
        if !touched_keys.contains(key) {
            blocks.extend(ix.blocks_of_key(key).unwrap_or_default().iter().copied());
        }
    }
    for sid in &sel.segments {
        if let Some(b) = ix.block_of(*sid) {
            blocks.insert(b);
        }
    }

    let mut out = Selection {
        characters: sel.characters.clone(),
        blocks: BTreeSet::new(),
        segments: sel.segments.clone(),
    };
    for bid in blocks {
        let block = &ds.blocks[&bid];
        out.characters.insert(block.key.clone());
        out.segments.extend(block.member_ids.iter().copied());
        out.blocks.insert(bid);
    }
    Ok(out)
}

/// Number of blocks behind each selected character; shown next to a selection
/// without selecting the sibling blocks themselves.
pub fn character_fan_out(sel: &Selection, ix: &IndexedDataset) -> Vec<(CharacterKey, usize)> {
    sel.characters
        .iter()
        .map(|k| (k.clone(), ix.blocks_of_key(k).map_or(0, <[BlockId]>::len)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_spreads: usize,
    pub n_segments: usize,
    pub n_blocks: usize,
    pub n_characters: usize,
    pub unit_height_px: f64,
    pub modal_segment_width_px: u32,
}

pub fn summary(ix: &IndexedDataset) -> DatasetSummary {
    let ds = ix.dataset();
    let mut widths: BTreeMap<u32, usize> = BTreeMap::new();
    for seg in ds.segments.values() {
        *widths.entry(seg.bbox.w).or_default() += 1;
    }
    // BTreeMap iterates ascending, so keeping only strictly greater counts
    // resolves ties toward the smaller width.
    let mut modal = (0u32, 0usize);
    for (w, n) in widths {
        if n > modal.1 {
            modal = (w, n);
        }
    }
    DatasetSummary {
        n_spreads: ix.n_spreads(),
        n_segments: ds.segments.len(),
        n_blocks: ds.blocks.len(),
        n_characters: ix.key_blocks.len(),
        unit_height_px: ds.meta.unit_height_px,
        modal_segment_width_px: modal.0,
    }
}
