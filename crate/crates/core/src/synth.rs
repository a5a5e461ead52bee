//! Deterministic synthetic books with a ground-truth sidecar.
//!
//! All randomness comes from xoshiro256** seeded with splitmix64 via
//! `seed_from_u64`. The layout stream and the image stream are separate, so
//! switching `render_images` never changes the dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BBox, BlockId, CharacterKey, Dataset, LineLayout, Meta, Segment, SegmentId, Spread, SpreadId,
};
use crate::raster::GrayRaster;

const PAPER_GRAY: u8 = 200;
const INK: u8 = 30;
/// Rejection draws before falling back to sampling from the unused blocks.
const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlocksPerCharacter {
    Constant {
        count: u32,
    },
    /// Character of (random) rank r gets `max(1, round(max / r^s))` blocks.
    Zipf {
        s: f64,
        max: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UsageDistribution {
    Uniform,
    /// Block of (random) rank r is drawn with weight `r^-s`.
    Zipf {
        s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// First spread of the second volume.
    pub boundary_spread: u32,
    pub pool_overlap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub title: String,
    pub n_characters: u32,
    pub blocks_per_character: BlocksPerCharacter,
    pub usage: UsageDistribution,
    pub n_spreads: u32,
    pub lines_per_spread: u32,
    pub segments_per_line: u32,
    pub unit_height_px: u32,
    pub segment_width_px: u32,
    /// Relative frequency of blocks spanning 1, 2, 3... units.
    pub unit_length_weights: Vec<f64>,
    pub partition: Option<PartitionConfig>,
    pub planted_duplicates: u32,
    pub planted_oversize: u32,
    pub render_images: bool,
    /// Salt-and-pepper probability per pixel of each impression.
    pub noise_density: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            title: "synthetic book".into(),
            n_characters: 120,
            blocks_per_character: BlocksPerCharacter::Zipf { s: 1.0, max: 4 },
            usage: UsageDistribution::Zipf { s: 1.0 },
            n_spreads: 40,
            lines_per_spread: 6,
            segments_per_line: 8,
            unit_height_px: 64,
            segment_width_px: 48,
            unit_length_weights: vec![0.40, 0.35, 0.25],
            partition: None,
            planted_duplicates: 0,
            planted_oversize: 0,
            render_images: false,
            noise_density: 0.02,
        }
    }
}

impl SynthConfig {
    pub fn slots_per_spread(&self) -> usize {
        self.lines_per_spread as usize * self.segments_per_line as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Shared,
    Volume1,
    Volume2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBlock {
    pub id: BlockId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jibo: Option<String>,
    pub pool: Pool,
    /// Height of the block in unit lengths.
    pub units: u32,
    pub usage: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedDuplicate {
    pub spread_id: SpreadId,
    pub block_id: BlockId,
    pub segment_ids: [SegmentId; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub blocks: Vec<TrueBlock>,
    /// Blocks used on each spread in reading order, indexed by spread id.
    pub spread_usage: Vec<Vec<BlockId>>,
    pub planted_duplicates: Vec<PlantedDuplicate>,
    pub planted_oversize: Vec<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_spread: Option<SpreadId>,
}

impl GroundTruth {
    /// The sidecar document: `{"ground_truth": ...}`, pretty-printed.
    pub fn to_sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            ground_truth: &'a GroundTruth,
        }
        let mut s = serde_json::to_string_pretty(&Sidecar { ground_truth: self })
            .expect("ground truth serializes");
        s.push('\n');
        s
    }

    pub fn from_sidecar_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Sidecar {
            ground_truth: GroundTruth,
        }
        serde_json::from_str::<Sidecar>(text).map(|s| s.ground_truth)
    }

    pub fn pool_of(&self, block: BlockId) -> Option<Pool> {
        self.blocks.get(block.0 as usize).map(|b| b.pool)
    }
}

#[derive(Debug, Clone)]
pub struct SynthBook {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    /// Page rasters indexed by spread id, when rendering was requested.
    pub pages: Option<Vec<Arc<GrayRaster>>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),
}

fn infeasible(msg: impl Into<String>) -> SynthError {
    SynthError::InfeasibleConfig(msg.into())
}

fn check(cfg: &SynthConfig) -> Result<(), SynthError> {
    if cfg.n_characters == 0
        || cfg.n_spreads == 0
        || cfg.lines_per_spread == 0
        || cfg.segments_per_line == 0
    {
        return Err(infeasible("counts must be positive"));
    }
    if cfg.unit_height_px < 8 || cfg.segment_width_px < 8 {
        return Err(infeasible(
            "unit height and segment width must be at least 8 px",
        ));
    }
    if cfg.unit_length_weights.is_empty()
        || cfg
            .unit_length_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        || cfg.unit_length_weights.iter().sum::<f64>() <= 0.0
    {
        return Err(infeasible(
            "unit_length_weights must be non-negative with a positive sum",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.noise_density) {
        return Err(infeasible("noise_density must lie in [0, 1]"));
    }
    match cfg.blocks_per_character {
        BlocksPerCharacter::Constant { count: 0 } => {
            return Err(infeasible("blocks_per_character count must be positive"))
        }
        BlocksPerCharacter::Zipf { s, max } if max == 0 || !s.is_finite() || s < 0.0 => {
            return Err(infeasible("blocks_per_character needs max > 0 and s >= 0"))
        }
        _ => {}
    }
    if let UsageDistribution::Zipf { s } = cfg.usage {
        if !s.is_finite() || s < 0.0 {
            return Err(infeasible("usage exponent must be finite and non-negative"));
        }
    }
    if let Some(p) = &cfg.partition {
        if p.boundary_spread == 0 || p.boundary_spread >= cfg.n_spreads {
            return Err(infeasible(
                "boundary_spread must lie strictly inside the book",
            ));
        }
        if !(0.0..=1.0).contains(&p.pool_overlap_fraction) {
            return Err(infeasible("pool_overlap_fraction must lie in [0, 1]"));
        }
    }
    if cfg.planted_duplicates > 0 && cfg.slots_per_spread() < 2 {
        return Err(infeasible("planting duplicates needs two slots per spread"));
    }
    if cfg.planted_duplicates > cfg.n_spreads {
        return Err(infeasible("at most one planted duplicate per spread"));
    }
    Ok(())
}

fn character_key(c: u32) -> CharacterKey {
    let kanji = |i: u32| char::from_u32(0x4E00 + i).expect("CJK range");
    match c % 6 {
        2 | 5 => {
            let kana = char::from_u32(0x3041 + c % 86).expect("hiragana range");
            CharacterKey::new(kana.to_string(), Some(&kanji(c).to_string()))
        }
        4 if c % 12 == 4 => CharacterKey::plain(format!("{}{}", kanji(c), kanji(c + 1))),
        _ => CharacterKey::plain(kanji(c).to_string()),
    }
}

fn rank_weights(n: usize, s: f64, rng: &mut Xoshiro256StarStar) -> Vec<f64> {
    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(rng);
    ranks.into_iter().map(|r| (r as f64).powf(-s)).collect()
}

/// Fills a spread's free slots from `pool` without repeating a block.
fn fill_spread(
    spread: &mut Vec<usize>,
    capacity: usize,
    pool: &[usize],
    weights: &[f64],
    rng: &mut Xoshiro256StarStar,
) {
    let pool_weights: Vec<f64> = pool.iter().map(|&b| weights[b]).collect();
    let dist = WeightedIndex::new(&pool_weights).expect("positive pool weights");
    let mut present: BTreeSet<usize> = spread.iter().copied().collect();
    while spread.len() < capacity {
        let mut chosen = None;
        for _ in 0..MAX_REJECTIONS {
            let b = pool[dist.sample(rng)];
            if !present.contains(&b) {
                chosen = Some(b);
                break;
            }
        }
        let b = chosen.unwrap_or_else(|| {
            let rest: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|b| !present.contains(b))
                .collect();
            let w: Vec<f64> = rest.iter().map(|&b| weights[b]).collect();
            rest[WeightedIndex::new(&w)
                .expect("positive weights")
                .sample(rng)]
        });
        present.insert(b);
        spread.push(b);
    }
}

/// Unit length of each block, chosen so that the share of impressions of
/// each length follows `targets`. Blocks are visited by descending expected
/// use and given the length furthest below its target.
fn assign_lengths(weights: &[f64], total_slots: usize, targets: &[f64]) -> Vec<u32> {
    let n = weights.len();
    let weight_sum: f64 = weights.iter().sum();
    let spare = total_slots.saturating_sub(n) as f64;
    let expected: Vec<f64> = weights
        .iter()
        .map(|w| 1.0 + spare * w / weight_sum)
        .collect();
    let target_sum: f64 = targets.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| expected[b].total_cmp(&expected[a]).then(a.cmp(&b)));
    let mut mass = vec![0.0; targets.len()];
    let mut placed = 0.0;
    let mut units = vec![1; n];
    for b in order {
        placed += expected[b];
        let deficit = |c: usize| targets[c] / target_sum * placed - mass[c];
        let c = (0..targets.len())
            .max_by(|&x, &y| deficit(x).total_cmp(&deficit(y)).then(y.cmp(&x)))
            .expect("non-empty targets");
        mass[c] += expected[b];
        units[b] = c as u32 + 1;
    }
    units
}

/// A block's glyph as an ink mask over its nominal bbox.
struct Stamp {
    width: u32,
    height: u32,
    ink: Vec<bool>,
}

impl Stamp {
    fn new(seed: u64, block: u64, width: u32, height: u32) -> Stamp {
        let mut rng = Xoshiro256StarStar::seed_from_u64(
            seed ^ (block + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut ink = vec![false; width as usize * height as usize];
        let pen = (width / 12).max(2) as i64;
        let strokes = rng.random_range(3..=6);
        for _ in 0..strokes {
            let (x0, y0) = (
                rng.random_range(0..width) as i64,
                rng.random_range(0..height) as i64,
            );
            let (x1, y1) = (
                rng.random_range(0..width) as i64,
                rng.random_range(0..height) as i64,
            );
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
            for i in 0..=steps {
                let cx = x0 + (x1 - x0) * i / steps;
                let cy = y0 + (y1 - y0) * i / steps;
                for dy in 0..pen {
                    for dx in 0..pen {
                        let (x, y) = (cx + dx - pen / 2, cy + dy - pen / 2);
                        if x >= 0 && y >= 0 && x < width as i64 && y < height as i64 {
                            ink[y as usize * width as usize + x as usize] = true;
                        }
                    }
                }
            }
        }
        Stamp { width, height, ink }
    }

    fn at(&self, x: u32, y: u32, w: u32, h: u32) -> bool {
        let sx = (u64::from(x) * u64::from(self.width) / u64::from(w)) as usize;
        let sy = (u64::from(y) * u64::from(self.height) / u64::from(h)) as usize;
        self.ink[sy * self.width as usize + sx]
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthBook, SynthError> {
    check(cfg)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let slots = cfg.slots_per_spread();
    let n_spreads = cfg.n_spreads as usize;

    // Block inventory.
    let n_chars = cfg.n_characters as usize;
    let per_char: Vec<u32> = match &cfg.blocks_per_character {
        BlocksPerCharacter::Constant { count } => vec![*count; n_chars],
        BlocksPerCharacter::Zipf { s, max } => rank_weights(n_chars, *s, &mut rng)
            .into_iter()
            .map(|w| ((f64::from(*max) * w).round() as u32).max(1))
            .collect(),
    };
    let mut keys = Vec::new();
    for (c, &k) in per_char.iter().enumerate() {
        for _ in 0..k {
            keys.push(character_key(c as u32));
        }
    }
    let n_blocks = keys.len();

    let mut pools = vec![Pool::Shared; n_blocks];
    if let Some(p) = &cfg.partition {
        let mut order: Vec<usize> = (0..n_blocks).collect();
        order.shuffle(&mut rng);
        let shared = (p.pool_overlap_fraction * n_blocks as f64).round() as usize;
        for (i, &b) in order.iter().enumerate().skip(shared) {
            pools[b] = if (i - shared).is_multiple_of(2) {
                Pool::Volume1
            } else {
                Pool::Volume2
            };
        }
    }
    let weights = match &cfg.usage {
        UsageDistribution::Uniform => vec![1.0; n_blocks],
        UsageDistribution::Zipf { s } => rank_weights(n_blocks, *s, &mut rng),
    };
    let units = assign_lengths(&weights, n_spreads * slots, &cfg.unit_length_weights);

    let boundary = cfg
        .partition
        .as_ref()
        .map_or(n_spreads, |p| p.boundary_spread as usize);
    let active = |pool: Pool, spread: usize| match pool {
        Pool::Shared => true,
        Pool::Volume1 => spread < boundary,
        Pool::Volume2 => spread >= boundary,
    };
    let pool_v1: Vec<usize> = (0..n_blocks).filter(|&b| active(pools[b], 0)).collect();
    let pool_v2: Vec<usize> = (0..n_blocks)
        .filter(|&b| active(pools[b], n_spreads - 1))
        .collect();
    if pool_v1.len() < slots || pool_v2.len() < slots {
        return Err(infeasible(format!(
            "a pool has {} blocks but spreads need {slots} distinct blocks",
            pool_v1.len().min(pool_v2.len())
        )));
    }
    let count = |p: Pool| pools.iter().filter(|&&q| q == p).count();
    if count(Pool::Volume1) > boundary * slots
        || count(Pool::Volume2) > (n_spreads - boundary) * slots
        || n_blocks > n_spreads * slots
    {
        return Err(infeasible(format!(
            "{n_blocks} blocks do not fit in {} slots",
            n_spreads * slots
        )));
    }

    // Every block is used at least once: volume-specific blocks first, so
    // shared blocks cannot crowd them out of their range.
    let mut spreads: Vec<Vec<usize>> = vec![Vec::with_capacity(slots); n_spreads];
    let mut forced: Vec<usize> = (0..n_blocks).collect();
    forced.shuffle(&mut rng);
    forced.sort_by_key(|&b| pools[b] == Pool::Shared);
    for b in forced {
        let range = match pools[b] {
            Pool::Shared => 0..n_spreads,
            Pool::Volume1 => 0..boundary,
            Pool::Volume2 => boundary..n_spreads,
        };
        let start = rng.random_range(range.clone());
        let target = (0..range.len())
            .map(|i| range.start + (start - range.start + i) % range.len())
            .find(|&s| spreads[s].len() < slots)
            .ok_or_else(|| infeasible("no free slot for a block's first use"))?;
        spreads[target].push(b);
    }
    for (s, spread) in spreads.iter_mut().enumerate() {
        let pool = if s < boundary { &pool_v1 } else { &pool_v2 };
        fill_spread(spread, slots, pool, &weights, &mut rng);
        spread.shuffle(&mut rng);
    }

    let mut usage = vec![0u32; n_blocks];
    for &b in spreads.iter().flatten() {
        usage[b] += 1;
    }

    // Within-spread repeats: slot `to` takes over the block at slot `from`.
    let mut protected: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut planted: Vec<(usize, usize, usize)> = Vec::new();
    let mut candidates: Vec<usize> = (0..n_spreads).collect();
    candidates.shuffle(&mut rng);
    for s in candidates {
        if planted.len() == cfg.planted_duplicates as usize {
            break;
        }
        let donors: Vec<usize> = (0..slots).filter(|&i| usage[spreads[s][i]] >= 2).collect();
        let Some(&to) = donors.get(rng.random_range(0..donors.len().max(1))) else {
            continue;
        };
        let from = (to + 1 + rng.random_range(0..slots - 1)) % slots;
        usage[spreads[s][to]] -= 1;
        usage[spreads[s][from]] += 1;
        spreads[s][to] = spreads[s][from];
        protected.insert((s, from));
        protected.insert((s, to));
        planted.push((s, from, to));
    }
    if planted.len() < cfg.planted_duplicates as usize {
        return Err(infeasible("not enough reused blocks to plant duplicates"));
    }

    let mut free: Vec<(usize, usize)> = (0..n_spreads)
        .flat_map(|s| (0..slots).map(move |i| (s, i)))
        .filter(|k| !protected.contains(k))
        .collect();
    if free.len() < cfg.planted_oversize as usize {
        return Err(infeasible("not enough slots for oversize segments"));
    }
    free.shuffle(&mut rng);
    let oversize: BTreeSet<(usize, usize)> = free
        .into_iter()
        .take(cfg.planted_oversize as usize)
        .collect();

    // Layout: lines run top to bottom, right to left.
    let unit = cfg.unit_height_px;
    let w_nominal = cfg.segment_width_px;
    let (h_jitter, w_jitter) = ((unit / 25) as i64, (w_nominal / 20) as i64);
    let gap = unit / 8;
    let pitch = w_nominal + w_nominal / 4;
    let (margin_x, margin_y) = (2 * w_nominal, unit);
    let tallest =
        (cfg.unit_length_weights.len() as u32).max(if oversize.is_empty() { 1 } else { 3 });
    let page_w = 2 * margin_x + cfg.lines_per_spread * pitch;
    let page_h = 2 * margin_y + cfg.segments_per_line * (tallest * unit + unit / 25 + gap);
    let spl = cfg.segments_per_line as usize;

    let mut segments = Vec::with_capacity(n_spreads * slots);
    let mut slot_segment: BTreeMap<(usize, usize), SegmentId> = BTreeMap::new();
    let mut spread_docs = Vec::with_capacity(n_spreads);
    for (s, spread) in spreads.iter().enumerate() {
        let lines: Vec<LineLayout> = (0..cfg.lines_per_spread)
            .map(|l| LineLayout {
                index: l,
                x_px: i64::from(page_w - margin_x - (l + 1) * pitch),
            })
            .collect();
        for (l, line) in lines.iter().enumerate() {
            let mut y = margin_y;
            for i in 0..spl {
                let slot = l * spl + i;
                let b = spread[slot];
                let col_x = line.x_px as u32;
                let bbox = if oversize.contains(&(s, slot)) {
                    BBox::new(col_x - w_nominal, y, 3 * w_nominal, 3 * unit)
                } else {
                    let h = (i64::from(units[b] * unit) + rng.random_range(-h_jitter..=h_jitter))
                        as u32;
                    let w = (i64::from(w_nominal) + rng.random_range(-w_jitter..=w_jitter)) as u32;
                    BBox::new(col_x + (w_nominal - w.min(w_nominal)) / 2, y, w, h)
                };
                y += bbox.h + gap;
                let id = SegmentId(segments.len() as u64);
                slot_segment.insert((s, slot), id);
                segments.push(Segment {
                    id,
                    spread_id: SpreadId(s as u32),
                    line_index: line.index,
                    bbox,
                    key: keys[b].clone(),
                    block_id: BlockId(b as u64),
                });
            }
        }
        spread_docs.push(Spread {
            id: SpreadId(s as u32),
            image: cfg.render_images.then(|| format!("spread_{s:04}.png")),
            width_px: page_w,
            height_px: page_h,
            lines,
        });
    }

    let pages = cfg
        .render_images
        .then(|| render_pages(cfg, &spread_docs, &segments, &units));

    let dataset = Dataset::assemble(
        Meta {
            title: cfg.title.clone(),
            unit_height_px: f64::from(unit),
            segment_width_px: w_nominal,
        },
        spread_docs,
        (0..n_blocks).map(|b| (BlockId(b as u64), keys[b].clone())),
        segments,
    );

    let spread_usage = (0..n_spreads)
        .map(|s| {
            let mut ids: Vec<&Segment> = dataset
                .segments
                .values()
                .filter(|seg| seg.spread_id.0 as usize == s)
                .collect();
            ids.sort_by_key(|seg| seg.reading_order());
            ids.into_iter().map(|seg| seg.block_id).collect()
        })
        .collect();
    let truth = GroundTruth {
        blocks: (0..n_blocks)
            .map(|b| TrueBlock {
                id: BlockId(b as u64),
                text: keys[b].text.clone(),
                jibo: keys[b].jibo.clone(),
                pool: pools[b],
                units: units[b],
                usage: usage[b],
            })
            .collect(),
        spread_usage,
        planted_duplicates: planted
            .iter()
            .map(|&(s, from, to)| {
                let (a, b) = (slot_segment[&(s, from)], slot_segment[&(s, to)]);
                PlantedDuplicate {
                    spread_id: SpreadId(s as u32),
                    block_id: BlockId(spreads[s][from] as u64),
                    segment_ids: [a.min(b), a.max(b)],
                }
            })
            .collect(),
        planted_oversize: oversize.iter().map(|k| slot_segment[k]).collect(),
        boundary_spread: cfg.partition.as_ref().map(|p| SpreadId(p.boundary_spread)),
    };
    Ok(SynthBook {
        dataset,
        truth,
        pages,
    })
}

fn render_pages(
    cfg: &SynthConfig,
    spreads: &[Spread],
    segments: &[Segment],
    units: &[u32],
) -> Vec<Arc<GrayRaster>> {
    let mut noise = Xoshiro256StarStar::seed_from_u64(cfg.seed ^ 0xD1B5_4A32_D192_ED03);
    let mut stamps: BTreeMap<u64, Stamp> = BTreeMap::new();
    let mut pages: Vec<GrayRaster> = spreads
        .iter()
        .map(|s| GrayRaster::filled(s.width_px, s.height_px, PAPER_GRAY))
        .collect();
    for seg in segments {
        let b = seg.block_id.0;
        let stamp = stamps.entry(b).or_insert_with(|| {
            Stamp::new(
                cfg.seed,
                b,
                cfg.segment_width_px,
                units[b as usize] * cfg.unit_height_px,
            )
        });
        let page = &mut pages[seg.spread_id.0 as usize];
        let BBox { x, y, w, h } = seg.bbox;
        for dy in 0..h {
            for dx in 0..w {
                let mut v = if stamp.at(dx, dy, w, h) {
                    INK
                } else {
                    PAPER_GRAY
                };
                if noise.random_bool(cfg.noise_density) {
                    v = if noise.random_bool(0.5) { 0 } else { 255 };
                }
                page.set(x + dx, y + dy, v);
            }
        }
    }
    pages.into_iter().map(Arc::new).collect()
}
