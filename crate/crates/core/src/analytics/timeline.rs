use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::{BlockId, CharacterKey, IndexedDataset, SpreadId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub block_id: BlockId,
    /// Uses per spread, indexed by spread id.
    pub counts: Vec<u32>,
}

impl TimelineRow {
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Block-by-spread usage of one character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub key: CharacterKey,
    pub n_spreads: usize,
    pub rows: Vec<TimelineRow>,
}

impl Timeline {
    pub fn column_totals(&self) -> Vec<u32> {
        let mut out = vec![0; self.n_spreads];
        for row in &self.rows {
            for (o, c) in out.iter_mut().zip(&row.counts) {
                *o += c;
            }
        }
        out
    }
}

/// Rows ordered by descending use, then by the spread of first appearance.
pub fn character_timeline(
    ix: &IndexedDataset,
    key: &CharacterKey,
) -> Result<Timeline, AnalyticsError> {
    let blocks = ix
        .blocks_of_key(key)
        .ok_or_else(|| AnalyticsError::UnknownCharacter(key.clone()))?;
    let ds = ix.dataset();
    let n = ix.n_spreads();
    let mut rows: Vec<(u32, SpreadId, TimelineRow)> = blocks
        .iter()
        .map(|&b| {
            let mut counts = vec![0u32; n];
            for sid in ix.block_members(b).unwrap_or_default() {
                counts[ds.segments[sid].spread_id.0 as usize] += 1;
            }
            let first = ix
                .block_spreads(b)
                .and_then(|s| s.iter().next().copied())
                .unwrap_or(SpreadId(u32::MAX));
            let row = TimelineRow {
                block_id: b,
                counts,
            };
            (row.total(), first, row)
        })
        .collect();
    rows.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.block_id.cmp(&b.2.block_id))
    });
    Ok(Timeline {
        key: key.clone(),
        n_spreads: n,
        rows: rows.into_iter().map(|(_, _, r)| r).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRhythm {
    pub line_index: u32,
    /// Segment heights top to bottom, in whole unit lengths (at least 1).
    pub units: Vec<u32>,
}

/// Segment lengths per line of a spread, lines in index order.
pub fn line_rhythm(
    ix: &IndexedDataset,
    spread: SpreadId,
) -> Result<Vec<LineRhythm>, AnalyticsError> {
    let ds = ix.dataset();
    let sp = ds
        .spread(spread)
        .ok_or(AnalyticsError::UnknownSpread(spread))?;
    let unit = ds.meta.unit_height_px;
    let mut lines: Vec<u32> = sp.lines.iter().map(|l| l.index).collect();
    lines.sort_unstable();
    let segs = ix.spread_segments(spread).unwrap_or_default();
    Ok(lines
        .into_iter()
        .map(|line_index| {
            let mut on_line: Vec<_> = segs
                .iter()
                .map(|s| &ds.segments[s])
                .filter(|s| s.line_index == line_index)
                .collect();
            on_line.sort_by_key(|s| (s.bbox.y, s.id));
            LineRhythm {
                line_index,
                units: on_line
                    .iter()
                    .map(|s| ((f64::from(s.bbox.h) / unit).round() as u32).max(1))
                    .collect(),
            }
        })
        .collect())
}
