//! The `/api` routes. Every response carries the revision it was computed
//! from, in the `X-Revision` header and, for JSON, in the body envelope
//! `{"revision": r, "data": ...}`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use typecase_core::analytics::{
    bbox_anomalies, block_embedding, character_timeline, co_appearance, graph_density, line_rhythm,
    partition_modularity, reuse_counts, same_spread_duplicates, spread_graph, zipf_fit,
    DEFAULT_ANOMALY_K,
};
use typecase_core::curation::{EditOutcome, EditRequest};
use typecase_core::ingest::export_dataset;
use typecase_core::model::{
    character_fan_out, expand_selection, summary, BlockId, CharacterKey, EntityId, Segment,
    SegmentId, Selection, SpreadId,
};
use typecase_core::raster::{
    binarize, block_thumbnail, crop_segment, otsu_threshold, representative_segment, PageSource,
    RasterError, CONSTANT_THRESHOLD,
};

use crate::error::ApiError;
use crate::images::{encode_png, ImageStore};
use crate::state::{AppState, MemoScope, Snapshot};

pub const REVISION_HEADER: &str = "x-revision";

/// Embedding dimensions served to the UI.
const EMBEDDING_DIMS: usize = 2;

type ApiResult = Result<Response, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/summary", get(get_summary))
        .route("/spreads", get(list_spreads))
        .route("/spreads/{id}", get(get_spread))
        .route("/segments/{id}", get(get_segment))
        .route("/blocks/{id}", get(get_block))
        .route("/characters", get(list_characters))
        .route("/characters/timeline", get(get_timeline))
        .route("/selection/expand", post(post_expand))
        .route("/analytics/reuse", get(get_reuse))
        .route("/analytics/zipf", get(get_zipf))
        .route("/analytics/duplicates", get(get_duplicates))
        .route("/analytics/anomalies", get(get_anomalies))
        .route("/analytics/coappearance", get(get_coappearance))
        .route("/analytics/graph", get(get_graph))
        .route("/analytics/density", get(get_density))
        .route("/analytics/modularity", post(post_modularity))
        .route("/analytics/embedding", get(get_embedding))
        .route("/analytics/rhythm", get(get_rhythm))
        .route("/edits", post(post_edit))
        .route("/edits/undo", post(post_undo))
        .route("/export", get(get_export))
        .route("/images/page/{id}", get(get_page_image))
        .route("/images/segment/{id}", get(get_segment_image))
        .route("/images/block/{id}", get(get_block_image))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

fn revision_header(snap: &Snapshot) -> [(header::HeaderName, HeaderValue); 1] {
    [(
        header::HeaderName::from_static(REVISION_HEADER),
        HeaderValue::from(snap.revision),
    )]
}

fn envelope<T: Serialize + ?Sized>(snap: &Snapshot, data: &T) -> ApiResult {
    let body = json!({ "revision": snap.revision, "data": data });
    Ok((revision_header(snap), Json(body)).into_response())
}

fn png(snap: &Snapshot, bytes: Vec<u8>) -> ApiResult {
    let headers = [
        (
            header::HeaderName::from_static(REVISION_HEADER),
            HeaderValue::from(snap.revision),
        ),
        (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
    ];
    Ok((headers, bytes).into_response())
}

fn path_id(p: Result<Path<u64>, PathRejection>) -> Result<u64, ApiError> {
    p.map(|Path(id)| id)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn json_body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn param<T: std::str::FromStr>(
    q: &HashMap<String, String>,
    name: &str,
) -> Result<Option<T>, ApiError> {
    q.get(name)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid value for '{name}': {v:?}")))
        })
        .transpose()
}

fn segment_json(seg: &Segment) -> Value {
    json!({
        "id": seg.id,
        "spread": seg.spread_id,
        "line": seg.line_index,
        "bbox": seg.bbox,
        "text": seg.key.text,
        "jibo": seg.key.jibo,
        "block": seg.block_id,
    })
}

fn key_json(key: &CharacterKey) -> Value {
    json!({ "text": key.text, "jibo": key.jibo })
}

async fn get_summary(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("summary", MemoScope::Global(snap.generation), || {
        let mut v = serde_json::to_value(summary(&snap.index)).expect("summary serializes");
        v["title"] = json!(snap.dataset().meta.title);
        Ok(v)
    })?;
    envelope(&snap, &*v)
}

async fn list_spreads(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let ix = &snap.index;
    let rows: Vec<Value> = snap
        .dataset()
        .spreads
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "image": s.image,
                "width_px": s.width_px,
                "height_px": s.height_px,
                "n_lines": s.lines.len(),
                "n_segments": ix.spread_segments(s.id).map_or(0, <[SegmentId]>::len),
            })
        })
        .collect();
    envelope(&snap, &rows)
}

async fn get_spread(State(app): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult {
    let snap = app.snapshot();
    let id = SpreadId(u32::try_from(path_id(id)?).unwrap_or(u32::MAX));
    let ds = snap.dataset();
    let spread = ds
        .spread(id)
        .ok_or(typecase_core::model::ModelError::UnknownId(
            EntityId::Spread(id),
        ))?;
    let segments: Vec<Value> = snap
        .index
        .spread_segments(id)
        .unwrap_or_default()
        .iter()
        .map(|s| segment_json(&ds.segments[s]))
        .collect();
    envelope(
        &snap,
        &json!({
            "id": spread.id,
            "image": spread.image,
            "width_px": spread.width_px,
            "height_px": spread.height_px,
            "lines": spread.lines,
            "segments": segments,
        }),
    )
}

async fn get_segment(State(app): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult {
    let snap = app.snapshot();
    let id = SegmentId(path_id(id)?);
    let seg = snap
        .dataset()
        .segment(id)
        .ok_or(typecase_core::model::ModelError::UnknownId(
            EntityId::Segment(id),
        ))?;
    let mut v = segment_json(seg);
    v["block_reuse"] = json!(snap
        .index
        .block_members(seg.block_id)
        .map_or(0, <[SegmentId]>::len));
    envelope(&snap, &v)
}

async fn get_block(State(app): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult {
    let snap = app.snapshot();
    let id = BlockId(path_id(id)?);
    let ds = snap.dataset();
    let block = ds
        .block(id)
        .ok_or(typecase_core::model::ModelError::UnknownId(
            EntityId::Block(id),
        ))?;
    let representative =
        representative_segment(id, ds, app.images().map(|i| i as &dyn PageSource))?;
    envelope(
        &snap,
        &json!({
            "id": block.id,
            "text": block.key.text,
            "jibo": block.key.jibo,
            "member_ids": block.member_ids,
            "reuse": block.member_ids.len(),
            "spreads": snap.index.block_spreads(id),
            "representative_segment_id": representative,
        }),
    )
}

async fn list_characters(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("characters", MemoScope::Global(snap.generation), || {
        let ix = &snap.index;
        Ok(ix
            .characters()
            .map(|(k, blocks)| {
                let n: usize = blocks
                    .iter()
                    .map(|b| ix.block_members(*b).map_or(0, <[SegmentId]>::len))
                    .sum();
                json!({ "text": k.text, "jibo": k.jibo, "block_ids": blocks, "n_segments": n })
            })
            .collect::<Vec<_>>())
    })?;
    envelope(&snap, &*v)
}

fn key_from_query(q: &HashMap<String, String>) -> Result<CharacterKey, ApiError> {
    let text = q
        .get("text")
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::bad_request("missing 'text'"))?;
    let jibo = q.get("jibo").map(String::as_str).filter(|j| !j.is_empty());
    Ok(CharacterKey::new(text.clone(), jibo))
}

async fn get_timeline(State(app): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let snap = app.snapshot();
    let key = key_from_query(&q)?;
    let scope = MemoScope::Character(key.clone(), snap.key_generation(&key));
    let v = app.memo("timeline", scope, || {
        Ok(character_timeline(&snap.index, &key)?)
    })?;
    envelope(&snap, &*v)
}

async fn post_expand(
    State(app): Shared,
    body: Result<Json<Selection>, JsonRejection>,
) -> ApiResult {
    let snap = app.snapshot();
    let sel = json_body(body)?;
    let expanded = expand_selection(&sel, &snap.index)?;
    let fan_out: Vec<Value> = character_fan_out(&expanded, &snap.index)
        .into_iter()
        .map(|(k, n)| json!({ "text": k.text, "jibo": k.jibo, "n_blocks": n }))
        .collect();
    envelope(&snap, &json!({ "selection": expanded, "fan_out": fan_out }))
}

async fn get_reuse(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("reuse", MemoScope::Global(snap.generation), || {
        Ok(reuse_counts(&snap.index)
            .into_iter()
            .map(|(b, n)| json!({ "block_id": b, "count": n }))
            .collect::<Vec<_>>())
    })?;
    envelope(&snap, &*v)
}

async fn get_zipf(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("zipf", MemoScope::Global(snap.generation), || {
        let counts: Vec<u64> = reuse_counts(&snap.index)
            .values()
            .map(|&n| n as u64)
            .collect();
        Ok(zipf_fit(&counts)?)
    })?;
    envelope(&snap, &*v)
}

async fn get_duplicates(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("duplicates", MemoScope::Global(snap.generation), || {
        Ok(same_spread_duplicates(&snap.index))
    })?;
    envelope(&snap, &*v)
}

async fn get_anomalies(State(app): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let snap = app.snapshot();
    let k: f64 = param(&q, "k")?.unwrap_or(DEFAULT_ANOMALY_K);
    if !k.is_finite() || k <= 0.0 {
        return Err(ApiError::bad_request("'k' must be a positive number"));
    }
    let v = app.memo(
        &format!("anomalies:{k}"),
        MemoScope::Global(snap.generation),
        || Ok(bbox_anomalies(&snap.index, k)),
    )?;
    envelope(&snap, &*v)
}

async fn get_coappearance(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("coappearance", MemoScope::Global(snap.generation), || {
        let m = co_appearance(&snap.index, None);
        let entries: Vec<[u64; 3]> = m
            .triplets()
            .map(|(i, j, v)| [i as u64, j as u64, u64::from(v)])
            .collect();
        Ok(json!({ "block_ids": m.block_ids(), "entries": entries }))
    })?;
    envelope(&snap, &*v)
}

fn min_shared(q: &HashMap<String, String>) -> Result<u32, ApiError> {
    Ok(param(q, "min_shared")?.unwrap_or(1))
}

async fn get_graph(State(app): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let snap = app.snapshot();
    let k = min_shared(&q)?;
    let v = app.memo(
        &format!("graph:{k}"),
        MemoScope::Global(snap.generation),
        || Ok(spread_graph(&snap.index, k)),
    )?;
    envelope(&snap, &*v)
}

async fn get_density(State(app): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let snap = app.snapshot();
    let k = min_shared(&q)?;
    let v = app.memo(&format!("density:{k}"), MemoScope::Global(snap.generation), || {
        let g = spread_graph(&snap.index, k);
        Ok(json!({ "min_shared": k, "n_spreads": g.n_spreads, "n_edges": g.edges.len(), "density": graph_density(&g)? }))
    })?;
    envelope(&snap, &*v)
}

#[derive(Deserialize)]
struct ModularityRequest {
    groups: Vec<u32>,
    #[serde(default)]
    min_shared: Option<u32>,
}

async fn post_modularity(
    State(app): Shared,
    body: Result<Json<ModularityRequest>, JsonRejection>,
) -> ApiResult {
    let snap = app.snapshot();
    let req = json_body(body)?;
    let k = req.min_shared.unwrap_or(1);
    let g = spread_graph(&snap.index, k);
    let q = partition_modularity(&g, &req.groups)?;
    envelope(&snap, &json!({ "min_shared": k, "modularity": q }))
}

async fn get_embedding(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let v = app.memo("embedding", MemoScope::Global(snap.generation), || {
        Ok(block_embedding(
            &co_appearance(&snap.index, None),
            EMBEDDING_DIMS,
        )?)
    })?;
    envelope(&snap, &*v)
}

async fn get_rhythm(State(app): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let snap = app.snapshot();
    let spread: u32 =
        param(&q, "spread")?.ok_or_else(|| ApiError::bad_request("missing 'spread'"))?;
    envelope(&snap, &line_rhythm(&snap.index, SpreadId(spread))?)
}

#[derive(Deserialize)]
struct EditBody {
    #[serde(flatten)]
    request: EditRequest,
    #[serde(default)]
    expected_revision: Option<u64>,
}

#[derive(Deserialize, Default)]
struct UndoBody {
    #[serde(default)]
    expected_revision: Option<u64>,
}

fn edit_response(snap: &Snapshot, outcome: &EditOutcome) -> ApiResult {
    let changed: Vec<BlockId> = outcome.changed.iter().map(|c| c.id).collect();
    let deleted: Vec<BlockId> = outcome
        .changed
        .iter()
        .filter(|c| c.deleted)
        .map(|c| c.id)
        .collect();
    let keys: Vec<Value> = outcome.keys.iter().map(key_json).collect();
    envelope(
        snap,
        &json!({
            "revision": outcome.revision,
            "changed_block_ids": changed,
            "deleted_block_ids": deleted,
            "changed_keys": keys,
        }),
    )
}

async fn post_edit(State(app): Shared, body: Result<Json<EditBody>, JsonRejection>) -> ApiResult {
    let body = json_body(body)?;
    let (snap, outcome) = app.edit(&body.request, body.expected_revision)?;
    edit_response(&snap, &outcome)
}

async fn post_undo(State(app): Shared, body: Bytes) -> ApiResult {
    let body: UndoBody = if body.iter().all(u8::is_ascii_whitespace) {
        UndoBody::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let (snap, outcome) = app.undo(body.expected_revision)?;
    edit_response(&snap, &outcome)
}

async fn get_export(State(app): Shared) -> ApiResult {
    let snap = app.snapshot();
    let text = export_dataset(snap.dataset(), &snap.log);
    let headers = [
        (
            header::HeaderName::from_static(REVISION_HEADER),
            HeaderValue::from(snap.revision),
        ),
        (
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        ),
    ];
    Ok((headers, text).into_response())
}

fn image_store(app: &AppState) -> Result<&ImageStore, ApiError> {
    app.images().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "MissingImage",
            "no page images configured",
        )
    })
}

async fn get_page_image(State(app): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult {
    let snap = app.snapshot();
    let id = SpreadId(u32::try_from(path_id(id)?).unwrap_or(u32::MAX));
    if snap.dataset().spread(id).is_none() {
        return Err(RasterError::UnknownId(EntityId::Spread(id)).into());
    }
    let page = image_store(&app)?
        .page(id)
        .ok_or(RasterError::MissingImage(id))?;
    png(&snap, encode_png(&page))
}

async fn get_segment_image(
    State(app): Shared,
    id: Result<Path<u64>, PathRejection>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let snap = app.snapshot();
    let id = SegmentId(path_id(id)?);
    let seg = snap
        .dataset()
        .segment(id)
        .ok_or(RasterError::UnknownId(EntityId::Segment(id)))?;
    let want_binary: bool = param(&q, "binarize")?.unwrap_or(false);
    let page = image_store(&app)?
        .page(seg.spread_id)
        .ok_or(RasterError::MissingImage(seg.spread_id))?;
    let crop = crop_segment(&page, &seg.bbox)?;
    let out = if want_binary {
        match otsu_threshold(&crop) {
            Ok(t) => binarize(&crop, t),
            Err(RasterError::ConstantImage) => binarize(&crop, CONSTANT_THRESHOLD),
            Err(e) => return Err(e.into()),
        }
    } else {
        crop
    };
    png(&snap, encode_png(&out))
}

async fn get_block_image(State(app): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult {
    let snap = app.snapshot();
    let id = BlockId(path_id(id)?);
    if snap.dataset().block(id).is_none() {
        return Err(RasterError::UnknownId(EntityId::Block(id)).into());
    }
    let thumb = block_thumbnail(id, snap.dataset(), image_store(&app)?, None)?;
    png(&snap, encode_png(&thumb))
}
