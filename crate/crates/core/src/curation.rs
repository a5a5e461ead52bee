//! Expert edits to block hypotheses with an undoable, replayable log.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Block, BlockId, CharacterKey, Dataset, EntityId, SegmentId};

/// One applied edit. Each variant stores what is needed to invert it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditKind {
    MoveSegment {
        segment_id: SegmentId,
        from_block: BlockId,
        to_block: BlockId,
    },
    MergeBlocks {
        src_block: BlockId,
        dst_block: BlockId,
        moved_segment_ids: Vec<SegmentId>,
    },
    DetachSegment {
        segment_id: SegmentId,
        from_block: BlockId,
        new_block_id: BlockId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    #[serde(flatten)]
    pub kind: EditKind,
    /// Revision reached by applying this edit.
    pub revision: u64,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EditLog {
    entries: Vec<Edit>,
}

impl EditLog {
    pub fn from_entries(entries: Vec<Edit>) -> Self {
        EditLog { entries }
    }

    pub fn entries(&self) -> &[Edit] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn revision(&self) -> u64 {
        self.entries.len() as u64
    }
}

/// A requested edit, before the state fills in what is needed to undo it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditRequest {
    MoveSegment {
        segment_id: SegmentId,
        to_block: BlockId,
    },
    MergeBlocks {
        src: BlockId,
        dst: BlockId,
    },
    DetachSegment {
        segment_id: SegmentId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurationError {
    #[error("unknown {0}")]
    UnknownId(EntityId),
    #[error("{segment} is '{segment_key}' but {block} is '{block_key}'")]
    KeyMismatch {
        segment: EntityId,
        segment_key: CharacterKey,
        block: BlockId,
        block_key: CharacterKey,
    },
    #[error("cannot merge {0} into itself")]
    SameBlock(BlockId),
    #[error("{segment} is the only member of {block}")]
    SingletonBlock { segment: SegmentId, block: BlockId },
    #[error("nothing to undo")]
    EmptyLog,
    #[error("expected revision {expected}, current revision is {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("log entry {index} does not apply: {reason}")]
    Replay { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockChange {
    pub id: BlockId,
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOutcome {
    pub revision: u64,
    /// Every block whose membership changed, in ascending id order.
    pub changed: Vec<BlockChange>,
    /// Keys of the characters touched by the edit.
    pub keys: Vec<CharacterKey>,
}

impl EditOutcome {
    fn unchanged(revision: u64) -> Self {
        EditOutcome {
            revision,
            changed: Vec::new(),
            keys: Vec::new(),
        }
    }
}

pub type Clock = fn() -> DateTime<Utc>;

/// The editable state: current dataset plus the log of edits that led to it.
#[derive(Debug, Clone)]
pub struct CurationState {
    dataset: Dataset,
    log: EditLog,
    next_block_id: u64,
    clock: Clock,
}

impl CurationState {
    pub fn new(dataset: Dataset) -> Self {
        Self::with_log(dataset, EditLog::default())
    }

    /// Resumes from an exported state whose log is still undoable.
    pub fn with_log(dataset: Dataset, log: EditLog) -> Self {
        let mut next = dataset.max_block_id().map_or(0, |b| b.0 + 1);
        for e in log.entries() {
            if let EditKind::DetachSegment { new_block_id, .. } = e.kind {
                next = next.max(new_block_id.0 + 1);
            }
            if let EditKind::MergeBlocks { src_block, .. } = e.kind {
                next = next.max(src_block.0 + 1);
            }
        }
        CurationState {
            dataset,
            log,
            next_block_id: next,
            clock: Utc::now,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn log(&self) -> &EditLog {
        &self.log
    }

    pub fn revision(&self) -> u64 {
        self.log.revision()
    }

    pub fn into_parts(self) -> (Dataset, EditLog) {
        (self.dataset, self.log)
    }

    fn check_revision(&self, expected: Option<u64>) -> Result<(), CurationError> {
        match expected {
            Some(expected) if expected != self.revision() => Err(CurationError::Conflict {
                expected,
                actual: self.revision(),
            }),
            _ => Ok(()),
        }
    }

    pub fn apply(
        &mut self,
        request: &EditRequest,
        expected_revision: Option<u64>,
    ) -> Result<EditOutcome, CurationError> {
        match *request {
            EditRequest::MoveSegment {
                segment_id,
                to_block,
            } => self.move_segment(segment_id, to_block, expected_revision),
            EditRequest::MergeBlocks { src, dst } => self.merge_blocks(src, dst, expected_revision),
            EditRequest::DetachSegment { segment_id } => {
                self.detach_segment(segment_id, expected_revision)
            }
        }
    }

    /// Moves a segment into another block of the same character. Moving a
    /// segment to the block it already belongs to changes nothing and is not
    /// logged.
    pub fn move_segment(
        &mut self,
        segment_id: SegmentId,
        to_block: BlockId,
        expected_revision: Option<u64>,
    ) -> Result<EditOutcome, CurationError> {
        self.check_revision(expected_revision)?;
        let seg = self
            .dataset
            .segment(segment_id)
            .ok_or(CurationError::UnknownId(EntityId::Segment(segment_id)))?;
        let target = self
            .dataset
            .block(to_block)
            .ok_or(CurationError::UnknownId(EntityId::Block(to_block)))?;
        let from_block = seg.block_id;
        if from_block == to_block {
            return Ok(EditOutcome::unchanged(self.revision()));
        }
        if seg.key != target.key {
            return Err(CurationError::KeyMismatch {
                segment: EntityId::Segment(segment_id),
                segment_key: seg.key.clone(),
                block: to_block,
                block_key: target.key.clone(),
            });
        }
        let key = seg.key.clone();
        let from_deleted = transfer(&mut self.dataset, segment_id, to_block);
        self.push(EditKind::MoveSegment {
            segment_id,
            from_block,
            to_block,
        });
        Ok(self.outcome(
            vec![
                BlockChange {
                    id: from_block,
                    deleted: from_deleted,
                },
                BlockChange {
                    id: to_block,
                    deleted: false,
                },
            ],
            key,
        ))
    }

    /// Moves every segment of `src` into `dst` and removes `src`.
    pub fn merge_blocks(
        &mut self,
        src: BlockId,
        dst: BlockId,
        expected_revision: Option<u64>,
    ) -> Result<EditOutcome, CurationError> {
        self.check_revision(expected_revision)?;
        if src == dst {
            // Existence is still reported first so that a bogus id reads as such.
            if self.dataset.block(src).is_none() {
                return Err(CurationError::UnknownId(EntityId::Block(src)));
            }
            return Err(CurationError::SameBlock(src));
        }
        let source = self
            .dataset
            .block(src)
            .ok_or(CurationError::UnknownId(EntityId::Block(src)))?;
        let target = self
            .dataset
            .block(dst)
            .ok_or(CurationError::UnknownId(EntityId::Block(dst)))?;
        if source.key != target.key {
            return Err(CurationError::KeyMismatch {
                segment: EntityId::Block(src),
                segment_key: source.key.clone(),
                block: dst,
                block_key: target.key.clone(),
            });
        }
        let key = source.key.clone();
        let moved = source.member_ids.clone();
        for sid in &moved {
            transfer(&mut self.dataset, *sid, dst);
        }
        self.push(EditKind::MergeBlocks {
            src_block: src,
            dst_block: dst,
            moved_segment_ids: moved,
        });
        Ok(self.outcome(
            vec![
                BlockChange {
                    id: src,
                    deleted: true,
                },
                BlockChange {
                    id: dst,
                    deleted: false,
                },
            ],
            key,
        ))
    }

    /// Splits a segment off into a new block of its own.
    pub fn detach_segment(
        &mut self,
        segment_id: SegmentId,
        expected_revision: Option<u64>,
    ) -> Result<EditOutcome, CurationError> {
        self.check_revision(expected_revision)?;
        let seg = self
            .dataset
            .segment(segment_id)
            .ok_or(CurationError::UnknownId(EntityId::Segment(segment_id)))?;
        let from_block = seg.block_id;
        let key = seg.key.clone();
        let size = self
            .dataset
            .block(from_block)
            .map_or(0, |b| b.member_ids.len());
        if size < 2 {
            return Err(CurationError::SingletonBlock {
                segment: segment_id,
                block: from_block,
            });
        }
        let new_block_id = BlockId(self.next_block_id);
        self.next_block_id += 1;
        create_block(&mut self.dataset, new_block_id, key.clone());
        transfer(&mut self.dataset, segment_id, new_block_id);
        self.push(EditKind::DetachSegment {
            segment_id,
            from_block,
            new_block_id,
        });
        Ok(self.outcome(
            vec![
                BlockChange {
                    id: from_block,
                    deleted: false,
                },
                BlockChange {
                    id: new_block_id,
                    deleted: false,
                },
            ],
            key,
        ))
    }

    /// Inverts the most recent edit.
    pub fn undo(&mut self, expected_revision: Option<u64>) -> Result<EditOutcome, CurationError> {
        self.check_revision(expected_revision)?;
        let edit = self.log.entries.pop().ok_or(CurationError::EmptyLog)?;
        let (changed, key) = match edit.kind {
            EditKind::MoveSegment {
                segment_id,
                from_block,
                to_block,
            } => {
                let key = self.dataset.segments[&segment_id].key.clone();
                let recreated = self.dataset.block(from_block).is_none();
                if recreated {
                    create_block(&mut self.dataset, from_block, key.clone());
                }
                let to_deleted = transfer(&mut self.dataset, segment_id, from_block);
                (
                    vec![
                        BlockChange {
                            id: from_block,
                            deleted: false,
                        },
                        BlockChange {
                            id: to_block,
                            deleted: to_deleted,
                        },
                    ],
                    key,
                )
            }
            EditKind::MergeBlocks {
                src_block,
                dst_block,
                moved_segment_ids,
            } => {
                let key = self.dataset.blocks[&dst_block].key.clone();
                create_block(&mut self.dataset, src_block, key.clone());
                let mut dst_deleted = false;
                for sid in moved_segment_ids {
                    dst_deleted = transfer(&mut self.dataset, sid, src_block);
                }
                (
                    vec![
                        BlockChange {
                            id: src_block,
                            deleted: false,
                        },
                        BlockChange {
                            id: dst_block,
                            deleted: dst_deleted,
                        },
                    ],
                    key,
                )
            }
            EditKind::DetachSegment {
                segment_id,
                from_block,
                new_block_id,
            } => {
                let key = self.dataset.segments[&segment_id].key.clone();
                let deleted = transfer(&mut self.dataset, segment_id, from_block);
                (
                    vec![
                        BlockChange {
                            id: from_block,
                            deleted: false,
                        },
                        BlockChange {
                            id: new_block_id,
                            deleted,
                        },
                    ],
                    key,
                )
            }
        };
        Ok(self.outcome(changed, key))
    }

    /// Re-applies a recorded log onto a pristine dataset, reproducing the
    /// recorded block ids and revisions.
    pub fn replay(pristine: Dataset, entries: &[Edit]) -> Result<CurationState, CurationError> {
        let mut state = CurationState::new(pristine);
        for (index, edit) in entries.iter().enumerate() {
            let fail = |reason: String| CurationError::Replay { index, reason };
            match &edit.kind {
                EditKind::MoveSegment {
                    segment_id,
                    from_block,
                    to_block,
                } => {
                    let current = state.dataset.segment(*segment_id).map(|s| s.block_id);
                    if current != Some(*from_block) {
                        return Err(fail(format!("{segment_id} is not in {from_block}")));
                    }
                    state
                        .move_segment(*segment_id, *to_block, None)
                        .map_err(|e| fail(e.to_string()))?;
                }
                EditKind::MergeBlocks {
                    src_block,
                    dst_block,
                    moved_segment_ids,
                } => {
                    let members = state
                        .dataset
                        .block(*src_block)
                        .map(|b| b.member_ids.clone());
                    if members.as_ref() != Some(moved_segment_ids) {
                        return Err(fail(format!("members of {src_block} differ from the log")));
                    }
                    state
                        .merge_blocks(*src_block, *dst_block, None)
                        .map_err(|e| fail(e.to_string()))?;
                }
                EditKind::DetachSegment {
                    segment_id,
                    from_block,
                    new_block_id,
                } => {
                    if state.dataset.block(*new_block_id).is_some() {
                        return Err(fail(format!("{new_block_id} already exists")));
                    }
                    let current = state.dataset.segment(*segment_id).map(|s| s.block_id);
                    if current != Some(*from_block) {
                        return Err(fail(format!("{segment_id} is not in {from_block}")));
                    }
                    state.next_block_id = new_block_id.0;
                    state
                        .detach_segment(*segment_id, None)
                        .map_err(|e| fail(e.to_string()))?;
                }
            }
            let last = state.log.entries.last_mut().expect("edit was logged");
            if last.revision != edit.revision {
                return Err(fail(format!(
                    "recorded revision {} but replay reached {}",
                    edit.revision, last.revision
                )));
            }
            last.ts = edit.ts;
        }
        Ok(state)
    }

    fn push(&mut self, kind: EditKind) {
        let revision = self.revision() + 1;
        self.log.entries.push(Edit {
            kind,
            revision,
            ts: (self.clock)(),
        });
    }

    fn outcome(&self, mut changed: Vec<BlockChange>, key: CharacterKey) -> EditOutcome {
        changed.sort_by_key(|c| c.id);
        EditOutcome {
            revision: self.revision(),
            changed,
            keys: vec![key],
        }
    }
}

fn create_block(ds: &mut Dataset, id: BlockId, key: CharacterKey) {
    ds.blocks.insert(
        id,
        Block {
            id,
            key,
            member_ids: Vec::new(),
        },
    );
}

/// Moves a segment into `to`, keeping reading order. Returns whether the
/// block it left became empty and was removed.
fn transfer(ds: &mut Dataset, segment: SegmentId, to: BlockId) -> bool {
    let from = ds.segments[&segment].block_id;
    let mut emptied = false;
    if let Some(block) = ds.blocks.get_mut(&from) {
        block.member_ids.retain(|s| *s != segment);
        emptied = block.member_ids.is_empty();
    }
    if emptied {
        ds.blocks.remove(&from);
    }
    ds.segments
        .get_mut(&segment)
        .expect("segment exists")
        .block_id = to;
    let order = ds.segments[&segment].reading_order();
    let members = &ds.blocks.get(&to).expect("target exists").member_ids;
    let pos = members
        .binary_search_by(|m| ds.segments[m].reading_order().cmp(&order))
        .unwrap_or_else(|p| p);
    ds.blocks
        .get_mut(&to)
        .expect("target exists")
        .member_ids
        .insert(pos, segment);
    emptied
}
