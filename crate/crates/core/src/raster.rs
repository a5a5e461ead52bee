//! Grayscale pixel operations behind the page and block images: cropping,
//! Otsu thresholding, binarization and representative selection.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

use crate::model::{BBox, BlockId, Dataset, EntityId, SegmentId, SpreadId};

/// Row-major 8-bit luminance image; 0 is black ink, 255 is white.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("bounding box does not intersect the page")]
    EmptyIntersection,
    #[error("image has a single gray level")]
    ConstantImage,
    #[error("unknown {0}")]
    UnknownId(EntityId),
    #[error("no page image for {0}")]
    MissingImage(SpreadId),
    #[error("expected {expected} pixels, got {got}")]
    BadDimensions { expected: usize, got: usize },
}

impl GrayRaster {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayRaster {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if width == 0 || height == 0 || pixels.len() != expected {
            return Err(RasterError::BadDimensions {
                expected,
                got: pixels.len(),
            });
        }
        Ok(GrayRaster {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = v;
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &p in &self.pixels {
            h[p as usize] += 1;
        }
        h
    }
}

/// ITU-R BT.601 luma, rounded to the nearest integer.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// The part of `bbox` that lies on the page.
pub fn crop_segment(page: &GrayRaster, bbox: &BBox) -> Result<GrayRaster, RasterError> {
    let x0 = u64::from(bbox.x);
    let y0 = u64::from(bbox.y);
    let x1 = bbox.right().min(u64::from(page.width));
    let y1 = bbox.bottom().min(u64::from(page.height));
    if x0 >= x1 || y0 >= y1 {
        return Err(RasterError::EmptyIntersection);
    }
    let (w, h) = ((x1 - x0) as u32, (y1 - y0) as u32);
    let mut pixels = Vec::with_capacity(w as usize * h as usize);
    for y in y0..y1 {
        let row = y as usize * page.width as usize;
        pixels.extend_from_slice(&page.pixels[row + x0 as usize..row + x1 as usize]);
    }
    Ok(GrayRaster {
        width: w,
        height: h,
        pixels,
    })
}

/// Otsu's threshold: the `t` maximizing between-class variance of the
/// classes `p <= t` and `p > t`, smallest `t` on ties. Candidates are
/// compared exactly in integer arithmetic.
pub fn otsu_threshold(img: &GrayRaster) -> Result<u8, RasterError> {
    let hist = img.histogram();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(RasterError::ConstantImage);
    }
    let total: u128 = hist.iter().map(|&c| u128::from(c)).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u128 * u128::from(c))
        .sum();

    // Between-class variance is proportional to (N*s0 - S*n0)^2 / (n0*n1).
    let mut best: Option<(u8, BigUint, BigUint)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &c) in hist.iter().enumerate() {
        n0 += u128::from(c);
        s0 += t as u128 * u128::from(c);
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (total * s0).abs_diff(total_sum * n0);
        let num = BigUint::from(diff).pow(2);
        let den = BigUint::from(n0) * BigUint::from(n1);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    Ok(best.expect("two gray levels give at least one split").0)
}

/// Pixels at or below `t` become ink (0), the rest background (255).
pub fn binarize(img: &GrayRaster, t: u8) -> GrayRaster {
    GrayRaster {
        width: img.width,
        height: img.height,
        pixels: img
            .pixels
            .iter()
            .map(|&p| if p <= t { 0 } else { 255 })
            .collect(),
    }
}

pub fn resize_nearest(img: &GrayRaster, width: u32, height: u32) -> GrayRaster {
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let sy = (u64::from(y) * u64::from(img.height) / u64::from(height)) as u32;
        for x in 0..width {
            let sx = (u64::from(x) * u64::from(img.width) / u64::from(width)) as u32;
            out.push(img.get(sx, sy));
        }
    }
    GrayRaster {
        width,
        height,
        pixels: out,
    }
}

/// Sum of absolute pixel differences of two same-sized rasters.
fn abs_diff_sum(a: &GrayRaster, b: &GrayRaster) -> u64 {
    a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| u64::from(x.abs_diff(*y)))
        .sum()
}

/// Access to decoded page scans by spread.
pub trait PageSource {
    fn page(&self, spread: SpreadId) -> Option<Arc<GrayRaster>>;
}

impl PageSource for HashMap<SpreadId, Arc<GrayRaster>> {
    fn page(&self, spread: SpreadId) -> Option<Arc<GrayRaster>> {
        self.get(&spread).cloned()
    }
}

impl PageSource for Vec<Arc<GrayRaster>> {
    fn page(&self, spread: SpreadId) -> Option<Arc<GrayRaster>> {
        self.get(spread.0 as usize).cloned()
    }
}

/// The segment that best stands for a block.
///
/// With page images for every member this is the medoid under mean absolute
/// pixel difference, after resizing each crop to the block's most common
/// bbox size; ties go to the smallest id. Otherwise the first member in
/// reading order.
pub fn representative_segment(
    block: BlockId,
    ds: &Dataset,
    images: Option<&dyn PageSource>,
) -> Result<SegmentId, RasterError> {
    let b = ds
        .block(block)
        .ok_or(RasterError::UnknownId(EntityId::Block(block)))?;
    let first = *b
        .member_ids
        .first()
        .ok_or(RasterError::UnknownId(EntityId::Block(block)))?;
    let Some(images) = images else {
        return Ok(first);
    };
    if b.member_ids.len() == 1 {
        return Ok(first);
    }

    let segs: Vec<_> = b.member_ids.iter().map(|s| &ds.segments[s]).collect();
    let mut sizes: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for s in &segs {
        *sizes.entry((s.bbox.w, s.bbox.h)).or_default() += 1;
    }
    let mut modal = ((0, 0), 0);
    for (size, n) in sizes {
        if n > modal.1 {
            modal = (size, n);
        }
    }
    let (mw, mh) = modal.0;

    let mut crops = Vec::with_capacity(segs.len());
    for s in &segs {
        let Some(page) = images.page(s.spread_id) else {
            return Ok(first);
        };
        let Ok(crop) = crop_segment(&page, &s.bbox) else {
            return Ok(first);
        };
        crops.push((s.id, resize_nearest(&crop, mw, mh)));
    }

    let mut best: Option<(u64, SegmentId)> = None;
    for (i, (id, a)) in crops.iter().enumerate() {
        let total: u64 = crops
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (_, b))| abs_diff_sum(a, b))
            .sum();
        if best.is_none_or(|(bt, bid)| (total, *id) < (bt, bid)) {
            best = Some((total, *id));
        }
    }
    Ok(best.map(|(_, id)| id).unwrap_or(first))
}

/// Threshold applied to a crop that has a single gray level.
pub const CONSTANT_THRESHOLD: u8 = 127;

/// The block's canonical image: its representative crop, binarized at the
/// Otsu threshold unless `threshold` overrides it.
pub fn block_thumbnail(
    block: BlockId,
    ds: &Dataset,
    images: &dyn PageSource,
    threshold: Option<u8>,
) -> Result<GrayRaster, RasterError> {
    let rep = representative_segment(block, ds, Some(images))?;
    let seg = &ds.segments[&rep];
    let page = images
        .page(seg.spread_id)
        .ok_or(RasterError::MissingImage(seg.spread_id))?;
    let crop = crop_segment(&page, &seg.bbox)?;
    let t = match threshold {
        Some(t) => t,
        None => match otsu_threshold(&crop) {
            Ok(t) => t,
            Err(RasterError::ConstantImage) => CONSTANT_THRESHOLD,
            Err(e) => return Err(e),
        },
    };
    Ok(binarize(&crop, t))
}
