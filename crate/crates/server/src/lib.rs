//! HTTP service and report writers over the typecase core.

pub mod api;
pub mod error;
pub mod images;
pub mod reports;
pub mod state;

use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use tower_http::services::ServeDir;

pub use state::AppState;

/// The full application: the API under `/api` and, if given, the built UI
/// bundle served from `ui_dir` for every other path.
pub fn app(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let router = Router::new().nest("/api", api::router(state));
    match ui_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}
