use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::{Block, BlockId, IndexedDataset, SpreadId};

/// Symmetric count matrix: off-diagonal entries count spreads shared by two
/// blocks, the diagonal counts spreads containing each block. Only the upper
/// triangle of non-zero entries is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoAppearanceMatrix {
    block_ids: Vec<BlockId>,
    entries: BTreeMap<(usize, usize), u32>,
}

impl CoAppearanceMatrix {
    /// Builds a matrix from dense rows, checking symmetry and that no pair
    /// count exceeds either block's own count.
    pub fn from_dense(block_ids: Vec<BlockId>, rows: &[Vec<u32>]) -> Result<Self, AnalyticsError> {
        let n = block_ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(AnalyticsError::InvalidMatrix(format!(
                "expected {n}x{n} rows"
            )));
        }
        let mut entries = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let v = rows[i][j];
                if rows[j][i] != v {
                    return Err(AnalyticsError::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
                if v > rows[i][i].min(rows[j][j]) {
                    return Err(AnalyticsError::InvalidMatrix(format!(
                        "entry ({i}, {j}) exceeds a diagonal count"
                    )));
                }
                if v > 0 {
                    entries.insert((i, j), v);
                }
            }
        }
        Ok(CoAppearanceMatrix { block_ids, entries })
    }

    pub fn block_ids(&self) -> &[BlockId] {
        &self.block_ids
    }

    pub fn len(&self) -> usize {
        self.block_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0)
    }

    pub fn index_of(&self, block: BlockId) -> Option<usize> {
        self.block_ids.binary_search(&block).ok()
    }

    /// Non-zero upper-triangle entries as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn to_dense(&self) -> Vec<Vec<u32>> {
        let n = self.len();
        let mut m = vec![vec![0; n]; n];
        for (i, j, v) in self.triplets() {
            m[i][j] = v;
            m[j][i] = v;
        }
        m
    }
}

/// Counts, for every pair of (optionally filtered) blocks, the spreads in
/// which both appear. Repeated appearances within one spread count once.
pub fn co_appearance(
    ix: &IndexedDataset,
    block_filter: Option<&dyn Fn(&Block) -> bool>,
) -> CoAppearanceMatrix {
    let ds = ix.dataset();
    let block_ids: Vec<BlockId> = ds
        .blocks
        .values()
        .filter(|b| block_filter.is_none_or(|f| f(b)))
        .map(|b| b.id)
        .collect();
    let position: HashMap<BlockId, usize> =
        block_ids.iter().enumerate().map(|(i, b)| (*b, i)).collect();

    let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
    for spread in 0..ix.n_spreads() {
        let mut present: Vec<usize> = ix
            .spread_segments(SpreadId(spread as u32))
            .unwrap_or_default()
            .iter()
            .filter_map(|s| ix.block_of(*s))
            .filter_map(|b| position.get(&b).copied())
            .collect();
        present.sort_unstable();
        present.dedup();
        for (a, &i) in present.iter().enumerate() {
            for &j in &present[a..] {
                *counts.entry((i, j)).or_default() += 1;
            }
        }
    }
    CoAppearanceMatrix {
        block_ids,
        entries: counts.into_iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadEdge {
    pub u: SpreadId,
    pub v: SpreadId,
    pub weight: u32,
}

/// Spreads linked by the number of distinct blocks they share. Edges have
/// `u < v` and are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadGraph {
    pub n_spreads: usize,
    pub edges: Vec<SpreadEdge>,
}

impl SpreadGraph {
    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| u64::from(e.weight)).sum()
    }
}

/// Connects two spreads when they share at least `min_shared` distinct blocks
/// (a threshold below 1 is treated as 1).
pub fn spread_graph(ix: &IndexedDataset, min_shared: u32) -> SpreadGraph {
    let min_shared = min_shared.max(1);
    let mut weights: HashMap<(SpreadId, SpreadId), u32> = HashMap::new();
    for block in ix.dataset().blocks.values() {
        let spreads: Vec<SpreadId> = ix
            .block_spreads(block.id)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        for (a, &u) in spreads.iter().enumerate() {
            for &v in &spreads[a + 1..] {
                *weights.entry((u, v)).or_default() += 1;
            }
        }
    }
    let mut edges: Vec<SpreadEdge> = weights
        .into_iter()
        .filter(|&(_, w)| w >= min_shared)
        .map(|((u, v), weight)| SpreadEdge { u, v, weight })
        .collect();
    edges.sort_by_key(|e| (e.u, e.v));
    SpreadGraph {
        n_spreads: ix.n_spreads(),
        edges,
    }
}

/// Fraction of possible spread pairs that are connected.
pub fn graph_density(g: &SpreadGraph) -> Result<f64, AnalyticsError> {
    if g.n_spreads < 2 {
        return Err(AnalyticsError::TooFewNodes(g.n_spreads));
    }
    let n = g.n_spreads as f64;
    Ok(g.edges.len() as f64 / (n * (n - 1.0) / 2.0))
}

/// Weighted Newman modularity of a grouping of spreads; `groups[i]` is the
/// group of spread `i`.
pub fn partition_modularity(g: &SpreadGraph, groups: &[u32]) -> Result<f64, AnalyticsError> {
    if groups.len() < g.n_spreads {
        return Err(AnalyticsError::UnassignedSpread(SpreadId(
            groups.len() as u32
        )));
    }
    let m = g.total_weight() as f64;
    if m == 0.0 {
        return Err(AnalyticsError::EmptyGraph);
    }
    // per group: (intra-group edge weight, summed weighted degree)
    let mut per_group: HashMap<u32, (f64, f64)> = HashMap::new();
    for e in &g.edges {
        let w = f64::from(e.weight);
        let (gu, gv) = (groups[e.u.0 as usize], groups[e.v.0 as usize]);
        per_group.entry(gu).or_default().1 += w;
        per_group.entry(gv).or_default().1 += w;
        if gu == gv {
            per_group.entry(gu).or_default().0 += w;
        }
    }
    Ok(per_group
        .values()
        .map(|&(intra, degree)| intra / m - (degree / (2.0 * m)).powi(2))
        .sum())
}
