use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use typecase_core::analytics::AnalyticsError;
use typecase_core::curation::CurationError;
use typecase_core::model::{EntityId, ModelError};
use typecase_core::raster::RasterError;

/// An error as the API reports it: a status, a stable code, a message and,
/// when one is involved, the entity it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub entity: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            entity: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    fn with_entity(mut self, entity: Value) -> Self {
        self.entity = Some(entity);
        self
    }

    fn unknown(id: EntityId) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownId", format!("unknown {id}"))
            .with_entity(entity_json(id))
    }
}

pub fn entity_json(id: EntityId) -> Value {
    match id {
        EntityId::Spread(s) => json!({ "kind": "spread", "id": s.0 }),
        EntityId::Segment(s) => json!({ "kind": "segment", "id": s.0 }),
        EntityId::Block(b) => json!({ "kind": "block", "id": b.0 }),
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownId(id) => ApiError::unknown(id),
            ModelError::UnknownCharacter(ref k) => {
                ApiError::new(StatusCode::NOT_FOUND, "UnknownCharacter", e.to_string())
                    .with_entity(json!({ "kind": "character", "text": k.text, "jibo": k.jibo }))
            }
            ModelError::IndexConflict(..) => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "IndexConflict",
                e.to_string(),
            ),
        }
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        let message = e.to_string();
        match e {
            CurationError::UnknownId(id) => ApiError::unknown(id),
            CurationError::KeyMismatch { segment, block, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "KeyMismatch", message)
                    .with_entity(json!({ "segment": entity_json(segment), "block": block.0 }))
            }
            CurationError::SameBlock(b) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SameBlock", message)
                    .with_entity(entity_json(EntityId::Block(b)))
            }
            CurationError::SingletonBlock { segment, block } => {
                ApiError::new(StatusCode::CONFLICT, "SingletonBlock", message)
                    .with_entity(json!({ "segment": segment.0, "block": block.0 }))
            }
            CurationError::EmptyLog => ApiError::new(StatusCode::CONFLICT, "EmptyLog", message),
            CurationError::Conflict { expected, actual } => {
                ApiError::new(StatusCode::PRECONDITION_FAILED, "RevisionConflict", message)
                    .with_entity(json!({ "expected": expected, "actual": actual }))
            }
            CurationError::Replay { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Replay", message)
            }
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let message = e.to_string();
        let unprocessable =
            |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.clone());
        match e {
            AnalyticsError::InsufficientData { .. } => unprocessable("InsufficientData"),
            AnalyticsError::TooFewNodes(_) => unprocessable("TooFewNodes"),
            AnalyticsError::EmptyGraph => unprocessable("EmptyGraph"),
            AnalyticsError::UnassignedSpread(s) => {
                unprocessable("UnassignedSpread").with_entity(entity_json(EntityId::Spread(s)))
            }
            AnalyticsError::TooFewBlocks { .. } => unprocessable("TooFewBlocks"),
            AnalyticsError::InvalidMatrix(_) => unprocessable("InvalidMatrix"),
            AnalyticsError::NoConvergence { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "NoConvergence", message)
            }
            AnalyticsError::UnknownCharacter(k) => ModelError::UnknownCharacter(k).into(),
            AnalyticsError::UnknownSpread(s) => ApiError::unknown(EntityId::Spread(s)),
        }
    }
}

impl From<RasterError> for ApiError {
    fn from(e: RasterError) -> Self {
        let message = e.to_string();
        match e {
            RasterError::UnknownId(id) => ApiError::unknown(id),
            RasterError::MissingImage(s) => {
                ApiError::new(StatusCode::NOT_FOUND, "MissingImage", message)
                    .with_entity(entity_json(EntityId::Spread(s)))
            }
            RasterError::EmptyIntersection => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "EmptyIntersection",
                message,
            ),
            RasterError::ConstantImage => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ConstantImage", message)
            }
            RasterError::BadDimensions { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "BadDimensions", message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(entity) = self.entity {
            body["entity"] = entity;
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}
