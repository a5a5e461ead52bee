//! Slow, direct reference implementations for checking the analytics, plus
//! random inputs for property tests. Nothing here is used at run time.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use typecase_core::curation::EditRequest;
use typecase_core::ingest::validate;
use typecase_core::model::{
    BBox, BlockId, CharacterKey, Dataset, LineLayout, Meta, Segment, SegmentId, Spread, SpreadId,
};

/// Eigenvalues (descending) and unit eigenvectors of a symmetric matrix by
/// cyclic Jacobi rotations.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a = m.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

/// Principal coordinates of the rows of `m` after scaling each row to unit
/// length and centering columns. Returns eigenvalues of the sample
/// covariance and per-row coordinates, each axis oriented so that its first
/// non-negligible loading is positive.
pub fn pca_reference(m: &[Vec<f64>], dims: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut x: Vec<Vec<f64>> = m
        .iter()
        .map(|r| {
            let len = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter()
                .map(|v| if len > 0.0 { v / len } else { 0.0 })
                .collect()
        })
        .collect();
    for j in 0..n {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        x.iter_mut().for_each(|r| r[j] -= mean);
    }
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| x.iter().map(|r| r[a] * r[b]).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect();
    let (values, mut vectors) = jacobi_eigen(&cov);
    for v in vectors.iter_mut() {
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-9) {
            if *first < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
        }
    }
    let coords = x
        .iter()
        .map(|r| {
            vectors[..dims]
                .iter()
                .map(|v| r.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    (values[..dims].to_vec(), coords)
}

fn spreads_by_block(ds: &Dataset) -> BTreeMap<BlockId, BTreeSet<SpreadId>> {
    let mut out: BTreeMap<BlockId, BTreeSet<SpreadId>> =
        ds.blocks.keys().map(|b| (*b, BTreeSet::new())).collect();
    for seg in ds.segments.values() {
        out.entry(seg.block_id).or_default().insert(seg.spread_id);
    }
    out
}

/// Dense co-appearance counts over blocks in id order.
pub fn brute_co_appearance(ds: &Dataset) -> Vec<Vec<u32>> {
    let sets: Vec<BTreeSet<SpreadId>> = spreads_by_block(ds).into_values().collect();
    sets.iter()
        .map(|a| {
            sets.iter()
                .map(|b| a.intersection(b).count() as u32)
                .collect()
        })
        .collect()
}

/// Spread pairs `(u, v, shared)` with `u < v` sharing at least `min_shared`
/// distinct blocks.
pub fn brute_spread_edges(ds: &Dataset, min_shared: u32) -> Vec<(u32, u32, u32)> {
    let sets = spreads_by_block(ds);
    let n = ds.spreads.len() as u32;
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let shared = sets
                .values()
                .filter(|s| s.contains(&SpreadId(u)) && s.contains(&SpreadId(v)))
                .count() as u32;
            if shared >= min_shared.max(1) {
                out.push((u, v, shared));
            }
        }
    }
    out
}

/// Otsu threshold by trying every split of the raw pixels, in exact
/// rationals; the first maximum wins.
pub fn exhaustive_otsu(pixels: &[u8]) -> Option<u8> {
    let mut best: Option<(u8, BigRational)> = None;
    for t in 0..=255u8 {
        let (lo, hi): (Vec<u8>, Vec<u8>) = pixels.iter().partition(|&&p| p <= t);
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let n = BigInt::from(pixels.len());
        let mean = |v: &[u8]| {
            BigRational::new(
                v.iter().map(|&p| BigInt::from(p)).sum(),
                BigInt::from(v.len()),
            )
        };
        let w0 = BigRational::new(BigInt::from(lo.len()), n.clone());
        let w1 = BigRational::new(BigInt::from(hi.len()), n);
        let d = mean(&lo) - mean(&hi);
        let var = w0 * w1 * d.clone() * d;
        if best.as_ref().is_none_or(|(_, b)| var > *b) {
            best = Some((t, var));
        }
    }
    best.map(|(t, _)| t)
}

/// A valid curation request for `ds`: `kind` picks move, merge or detach
/// and `pick` indexes the candidates. `None` when no such edit exists.
pub fn valid_edit(ds: &Dataset, kind: u8, pick: usize) -> Option<EditRequest> {
    let mut by_key: BTreeMap<&CharacterKey, Vec<BlockId>> = BTreeMap::new();
    for b in ds.blocks.values() {
        by_key.entry(&b.key).or_default().push(b.id);
    }
    match kind % 3 {
        0 => {
            let moves: Vec<(SegmentId, BlockId)> = ds
                .segments
                .values()
                .flat_map(|s| {
                    by_key[&s.key]
                        .iter()
                        .filter(move |b| **b != s.block_id)
                        .map(move |b| (s.id, *b))
                })
                .collect();
            let (segment_id, to_block) = *moves.get(pick % moves.len().max(1))?;
            Some(EditRequest::MoveSegment {
                segment_id,
                to_block,
            })
        }
        1 => {
            let pairs: Vec<(BlockId, BlockId)> = by_key
                .values()
                .flat_map(|bs| {
                    bs.iter().flat_map(move |a| {
                        bs.iter().filter(move |b| a != *b).map(move |b| (*a, *b))
                    })
                })
                .collect();
            let (src, dst) = *pairs.get(pick % pairs.len().max(1))?;
            Some(EditRequest::MergeBlocks { src, dst })
        }
        _ => {
            let detachable: Vec<SegmentId> = ds
                .segments
                .values()
                .filter(|s| ds.blocks[&s.block_id].member_ids.len() > 1)
                .map(|s| s.id)
                .collect();
            let segment_id = *detachable.get(pick % detachable.len().max(1))?;
            Some(EditRequest::DetachSegment { segment_id })
        }
    }
}

/// Everything wrong with the block partition of `ds`; empty when every
/// segment sits in exactly one non-empty block of its own character, blocks
/// list members in reading order, and validation finds no errors.
pub fn partition_violations(ds: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for block in ds.blocks.values() {
        if block.member_ids.is_empty() {
            out.push(format!("{} is empty", block.id));
        }
        let mut prev = None;
        for sid in &block.member_ids {
            if !seen.insert(*sid) {
                out.push(format!("{sid} listed twice"));
            }
            let Some(seg) = ds.segments.get(sid) else {
                out.push(format!("{} lists missing {sid}", block.id));
                continue;
            };
            if seg.block_id != block.id {
                out.push(format!(
                    "{sid} points to {} but is listed in {}",
                    seg.block_id, block.id
                ));
            }
            if seg.key != block.key {
                out.push(format!(
                    "{sid} has key {} in block of {}",
                    seg.key, block.key
                ));
            }
            let order = seg.reading_order();
            if prev.is_some_and(|p| p >= order) {
                out.push(format!("{} members out of reading order", block.id));
            }
            prev = Some(order);
        }
    }
    if seen.len() != ds.segments.len() {
        out.push(format!(
            "{} of {} segments listed",
            seen.len(),
            ds.segments.len()
        ));
    }
    out.extend(validate(ds).errors.iter().map(|e| e.to_string()));
    out
}

/// An arbitrary valid dataset of at most `max_segments` segments, not built
/// by the synthetic generator: blocks and spreads are drawn independently,
/// so repeats within a spread and singleton spreads occur.
pub fn random_dataset<R: Rng>(rng: &mut R, max_segments: usize) -> Dataset {
    let n_spreads = rng.random_range(2..=12u32);
    let n_chars = rng.random_range(1..=8u32);
    let n_segments = rng.random_range(1..=max_segments);
    let spreads: Vec<Spread> = (0..n_spreads)
        .map(|id| Spread {
            id: SpreadId(id),
            image: None,
            width_px: 1000,
            height_px: 4000,
            lines: (0..4)
                .map(|l| LineLayout {
                    index: l,
                    x_px: 900 - 100 * i64::from(l),
                })
                .collect(),
        })
        .collect();
    let mut blocks: Vec<(BlockId, CharacterKey)> = Vec::new();
    let mut segments = Vec::new();
    for id in 0..n_segments as u64 {
        let c = rng.random_range(0..n_chars);
        let key = CharacterKey::plain(char::from_u32(0x4E00 + c).unwrap().to_string());
        let same: Vec<BlockId> = blocks
            .iter()
            .filter(|(_, k)| *k == key)
            .map(|(b, _)| *b)
            .collect();
        let block = if same.is_empty() || rng.random_bool(0.3) {
            let b = BlockId(blocks.len() as u64);
            blocks.push((b, key.clone()));
            b
        } else {
            same[rng.random_range(0..same.len())]
        };
        let line = rng.random_range(0..4u32);
        segments.push(Segment {
            id: SegmentId(id),
            spread_id: SpreadId(rng.random_range(0..n_spreads)),
            line_index: line,
            bbox: BBox::new(900 - 100 * line, rng.random_range(0..3900), 80, 100),
            key,
            block_id: block,
        });
    }
    Dataset::assemble(
        Meta {
            title: "random".into(),
            unit_height_px: 100.0,
            segment_width_px: 80,
        },
        spreads,
        blocks,
        segments,
    )
}
