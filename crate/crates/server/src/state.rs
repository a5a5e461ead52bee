use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use serde_json::Value;

use typecase_core::curation::{CurationState, EditLog, EditOutcome, EditRequest};
use typecase_core::model::{build_indexes, CharacterKey, Dataset, IndexedDataset};

use crate::error::ApiError;
use crate::images::ImageStore;

const MEMO_CAPACITY: usize = 256;

/// One published state of the dataset. Readers hold it for the whole request,
/// so a response never mixes two revisions.
#[derive(Debug)]
pub struct Snapshot {
    /// Bumped on every publication. Unlike `revision` it never repeats after
    /// an undo, so it is safe as a cache key.
    pub generation: u64,
    pub revision: u64,
    pub index: IndexedDataset,
    pub log: EditLog,
    /// Generation at which each character last changed.
    key_generations: Arc<HashMap<CharacterKey, u64>>,
}

impl Snapshot {
    pub fn dataset(&self) -> &Dataset {
        self.index.dataset()
    }

    pub fn key_generation(&self, key: &CharacterKey) -> u64 {
        self.key_generations.get(key).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MemoScope {
    /// Depends on the whole dataset.
    Global(u64),
    /// Depends only on one character's blocks.
    Character(CharacterKey, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    name: String,
    scope: MemoScope,
}

pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<CurationState>,
    memo: Mutex<LruCache<MemoKey, Arc<Value>>>,
    images: Option<ImageStore>,
}

impl AppState {
    pub fn new(
        dataset: Dataset,
        log: EditLog,
        images: Option<ImageStore>,
    ) -> Result<Self, ApiError> {
        let curation = CurationState::with_log(dataset, log);
        let snapshot = Snapshot {
            generation: 0,
            revision: curation.revision(),
            index: build_indexes(curation.dataset().clone())?,
            log: curation.log().clone(),
            key_generations: Arc::new(HashMap::new()),
        };
        Ok(AppState {
            current: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(curation),
            memo: Mutex::new(LruCache::new(
                NonZeroUsize::new(MEMO_CAPACITY).expect("non-zero"),
            )),
            images,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().clone()
    }

    pub fn images(&self) -> Option<&ImageStore> {
        self.images.as_ref()
    }

    pub fn edit(
        &self,
        request: &EditRequest,
        expected_revision: Option<u64>,
    ) -> Result<(Arc<Snapshot>, EditOutcome), ApiError> {
        self.mutate(|c| c.apply(request, expected_revision))
    }

    pub fn undo(
        &self,
        expected_revision: Option<u64>,
    ) -> Result<(Arc<Snapshot>, EditOutcome), ApiError> {
        self.mutate(|c| c.undo(expected_revision))
    }

    /// Runs one mutation under the writer lock and publishes the result.
    fn mutate<F>(&self, f: F) -> Result<(Arc<Snapshot>, EditOutcome), ApiError>
    where
        F: FnOnce(
            &mut CurationState,
        ) -> Result<EditOutcome, typecase_core::curation::CurationError>,
    {
        let mut writer = self.writer.lock();
        let before = writer.revision();
        let outcome = f(&mut writer)?;
        if outcome.revision == before && outcome.changed.is_empty() {
            return Ok((self.snapshot(), outcome));
        }
        let previous = self.snapshot();
        let generation = previous.generation + 1;
        let mut key_generations = (*previous.key_generations).clone();
        for key in &outcome.keys {
            key_generations.insert(key.clone(), generation);
        }
        let snapshot = Arc::new(Snapshot {
            generation,
            revision: writer.revision(),
            index: build_indexes(writer.dataset().clone())?,
            log: writer.log().clone(),
            key_generations: Arc::new(key_generations),
        });
        *self.current.write() = snapshot.clone();
        Ok((snapshot, outcome))
    }

    /// Computes a JSON value once per `(name, scope)`.
    pub fn memo<T, F>(&self, name: &str, scope: MemoScope, f: F) -> Result<Arc<Value>, ApiError>
    where
        T: Serialize,
        F: FnOnce() -> Result<T, ApiError>,
    {
        let key = MemoKey {
            name: name.to_owned(),
            scope,
        };
        if let Some(v) = self.memo.lock().get(&key) {
            return Ok(v.clone());
        }
        let value = Arc::new(serde_json::to_value(f()?).map_err(|e| {
            ApiError::new(
                axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                "Serialization",
                e.to_string(),
            )
        })?);
        self.memo.lock().put(key, value.clone());
        Ok(value)
    }

    #[cfg(test)]
    fn memo_len(&self) -> usize {
        self.memo.lock().len()
    }
}
