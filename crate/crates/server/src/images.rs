use std::collections::HashMap;
use std::io::Cursor;
use std::num::NonZeroUsize;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use image::{DynamicImage, ImageFormat};
use lru::LruCache;
use parking_lot::Mutex;

use typecase_core::model::{Dataset, SpreadId};
use typecase_core::raster::{luma_bt601, GrayRaster, PageSource};

const PAGE_CACHE_CAPACITY: usize = 32;

enum Source {
    Dir {
        root: PathBuf,
        names: HashMap<SpreadId, PathBuf>,
    },
    Memory(Vec<Arc<GrayRaster>>),
}

/// Page scans by spread. Decoded pages are kept in a small LRU cache; lookups
/// only hold the cache lock briefly, and one page is decoded at a time.
pub struct ImageStore {
    source: Source,
    cache: Mutex<LruCache<SpreadId, Arc<GrayRaster>>>,
    loading: Mutex<()>,
}

impl ImageStore {
    /// Pages named by each spread's `image` field, relative to `root`. Names
    /// that are absolute or climb out of `root` are ignored.
    pub fn from_dir(root: impl Into<PathBuf>, ds: &Dataset) -> Self {
        let names = ds
            .spreads
            .iter()
            .filter_map(|s| {
                let name = Path::new(s.image.as_deref()?);
                name.components()
                    .all(|c| matches!(c, Component::Normal(_)))
                    .then(|| (s.id, name.to_path_buf()))
            })
            .collect();
        Self::with_source(Source::Dir {
            root: root.into(),
            names,
        })
    }

    pub fn from_rasters(pages: Vec<Arc<GrayRaster>>) -> Self {
        Self::with_source(Source::Memory(pages))
    }

    fn with_source(source: Source) -> Self {
        ImageStore {
            source,
            cache: Mutex::new(LruCache::new(
                NonZeroUsize::new(PAGE_CACHE_CAPACITY).expect("non-zero"),
            )),
            loading: Mutex::new(()),
        }
    }

    fn load(&self, spread: SpreadId) -> Option<Arc<GrayRaster>> {
        let (root, names) = match &self.source {
            Source::Memory(pages) => return pages.get(spread.0 as usize).cloned(),
            Source::Dir { root, names } => (root, names),
        };
        if let Some(p) = self.cache.lock().get(&spread) {
            return Some(p.clone());
        }
        let _guard = self.loading.lock();
        if let Some(p) = self.cache.lock().get(&spread) {
            return Some(p.clone());
        }
        let path = root.join(names.get(&spread)?);
        let page = match std::fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|b| decode_gray(&b))
        {
            Ok(p) => Arc::new(p),
            Err(e) => {
                tracing::warn!(path = %path.display(), "cannot load page image: {e}");
                return None;
            }
        };
        self.cache.lock().put(spread, page.clone());
        Some(page)
    }
}

impl PageSource for ImageStore {
    fn page(&self, spread: SpreadId) -> Option<Arc<GrayRaster>> {
        self.load(spread)
    }
}

/// Decodes PNG or JPEG bytes to 8-bit luminance.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayRaster, String> {
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let (w, h) = (img.width(), img.height());
    let pixels = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p[0], p[1], p[2]))
            .collect(),
    };
    GrayRaster::from_pixels(w, h, pixels).map_err(|e| e.to_string())
}

pub fn encode_png(raster: &GrayRaster) -> Vec<u8> {
    let img = image::GrayImage::from_raw(raster.width(), raster.height(), raster.pixels().to_vec())
        .expect("raster dimensions match its pixels");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding to memory");
    out.into_inner()
}
