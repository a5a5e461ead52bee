#![allow(dead_code)]

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use typecase_core::curation::EditLog;
use typecase_core::synth::{generate, SynthBook, SynthConfig};
use typecase_server::images::ImageStore;
use typecase_server::AppState;

pub struct Reply {
    pub status: StatusCode,
    pub revision: Option<u64>,
    pub content_type: Option<String>,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }

    /// The `data` member of a JSON envelope.
    pub fn data(&self) -> Value {
        let v = self.json();
        assert_eq!(
            v["revision"].as_u64(),
            self.revision,
            "body and header revisions differ"
        );
        v["data"].clone()
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"]
            .as_str()
            .unwrap_or_default()
            .to_owned()
    }
}

#[derive(Clone)]
pub struct Client {
    pub state: Arc<AppState>,
    router: Router,
}

impl Client {
    pub fn new(state: AppState) -> Self {
        let state = Arc::new(state);
        Client {
            router: typecase_server::app(state.clone(), None),
            state,
        }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<&Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(serde_json::to_vec(v).unwrap())
            }
            None => Body::empty(),
        };
        let resp = self
            .router
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let (parts, body) = resp.into_parts();
        let header = |name: &str| {
            parts
                .headers
                .get(name)
                .map(|v| v.to_str().unwrap().to_owned())
        };
        let revision = header("x-revision").map(|v| v.parse().unwrap());
        let content_type = header("content-type");
        let body = body.collect().await.unwrap().to_bytes();
        Reply {
            status,
            revision,
            content_type,
            body,
        }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: &Value) -> Reply {
        self.call(Method::POST, uri, Some(body)).await
    }
}

/// A small rendered book with a few planted duplicates and oversize impressions.
pub fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_characters: 30,
        n_spreads: 10,
        lines_per_spread: 3,
        segments_per_line: 5,
        planted_duplicates: 3,
        planted_oversize: 2,
        render_images: true,
        ..SynthConfig::default()
    }
}

pub fn client_for(book: &SynthBook) -> Client {
    let images = book.pages.clone().map(ImageStore::from_rasters);
    Client::new(AppState::new(book.dataset.clone(), EditLog::default(), images).unwrap())
}

pub fn small_book(seed: u64) -> SynthBook {
    generate(&small_config(seed)).unwrap()
}

pub fn percent_encode(s: &str) -> String {
    percent_encoding::utf8_percent_encode(s, percent_encoding::NON_ALPHANUMERIC).to_string()
}
