use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::ingest::{height_deviation, DEFAULT_HEIGHT_TOLERANCE};
use crate::model::{BlockId, IndexedDataset, SegmentId, SpreadId};

/// Robust z-score cutoff for bounding-box areas.
pub const DEFAULT_ANOMALY_K: f64 = 3.5;

/// Scale factors turning MAD and mean absolute deviation into standard
/// deviation estimates under normality.
const MAD_SCALE: f64 = 1.4826;
const MEAN_AD_SCALE: f64 = 1.253314;

/// Number of segments attributed to each block.
pub fn reuse_counts(ix: &IndexedDataset) -> BTreeMap<BlockId, usize> {
    ix.dataset()
        .blocks
        .values()
        .map(|b| (b.id, b.member_ids.len()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfFit {
    pub exponent: f64,
    pub r2: f64,
}

/// Least-squares line through (ln rank, ln count) of the descending counts.
/// A flat distribution reports exponent 0 and r² 0.
pub fn zipf_fit(counts: &[u64]) -> Result<ZipfFit, AnalyticsError> {
    if counts.len() < 3 {
        return Err(AnalyticsError::InsufficientData {
            needed: 3,
            got: counts.len(),
        });
    }
    if counts.contains(&0) {
        return Err(AnalyticsError::InsufficientData {
            needed: counts.len(),
            got: counts.iter().filter(|&&c| c > 0).count(),
        });
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    if sorted.first() == sorted.last() {
        return Ok(ZipfFit {
            exponent: 0.0,
            r2: 0.0,
        });
    }
    let n = sorted.len() as f64;
    let xs: Vec<f64> = (1..=sorted.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|&c| (c as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(ZipfFit {
        exponent: -slope,
        r2: 1.0 - ss_res / syy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duplicate {
    pub block_id: BlockId,
    pub spread_id: SpreadId,
    pub count: usize,
}

/// Blocks that occur more than once within one spread, which a single
/// physical block cannot do. Sorted by spread, then block.
pub fn same_spread_duplicates(ix: &IndexedDataset) -> Vec<Duplicate> {
    let ds = ix.dataset();
    let mut out = Vec::new();
    for block in ds.blocks.values() {
        let mut per_spread: BTreeMap<SpreadId, usize> = BTreeMap::new();
        for sid in &block.member_ids {
            *per_spread.entry(ds.segments[sid].spread_id).or_default() += 1;
        }
        out.extend(
            per_spread
                .into_iter()
                .filter(|&(_, n)| n >= 2)
                .map(|(spread_id, count)| Duplicate {
                    block_id: block.id,
                    spread_id,
                    count,
                }),
        );
    }
    out.sort_by_key(|d| (d.spread_id, d.block_id));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub segment_id: SegmentId,
    pub spread_id: SpreadId,
    pub area: u64,
    /// Absolute robust z-score of the area.
    pub score: f64,
    pub area_outlier: bool,
    pub off_unit_height: bool,
}

/// Robust z-scores `|x - median| / (1.4826 MAD)`. When more than half the
/// values coincide the MAD is zero and the mean absolute deviation
/// (scaled by 1.2533) is used instead; all-zero when every value is equal.
pub fn robust_scores(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let med = median(values.to_vec());
    let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let mad = median(deviations.clone());
    let scale = if mad > 0.0 {
        MAD_SCALE * mad
    } else {
        MEAN_AD_SCALE * deviations.iter().sum::<f64>() / deviations.len() as f64
    };
    if scale == 0.0 {
        return vec![0.0; values.len()];
    }
    deviations.iter().map(|d| d / scale).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Segments with outlying areas or heights that are not a unit multiple.
/// Fewer than 10 segments yields no result. Sorted by descending score.
pub fn bbox_anomalies(ix: &IndexedDataset, k: f64) -> Vec<Anomaly> {
    let ds = ix.dataset();
    if ds.segments.len() < 10 {
        return Vec::new();
    }
    let segs: Vec<_> = ds.segments.values().collect();
    let areas: Vec<f64> = segs.iter().map(|s| s.bbox.area() as f64).collect();
    let scores = robust_scores(&areas);
    let unit = ds.meta.unit_height_px;
    let unit_ok = unit.is_finite() && unit > 0.0;
    let mut out: Vec<Anomaly> = segs
        .iter()
        .zip(scores)
        .filter_map(|(seg, score)| {
            let area_outlier = score > k;
            let off_unit_height =
                unit_ok && height_deviation(seg.bbox.h, unit) > DEFAULT_HEIGHT_TOLERANCE * unit;
            (area_outlier || off_unit_height).then(|| Anomaly {
                segment_id: seg.id,
                spread_id: seg.spread_id,
                area: seg.bbox.area(),
                score,
                area_outlier,
                off_unit_height,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.segment_id.cmp(&b.segment_id))
    });
    out
}
