#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relgraph_core::config::AppConfig;
use relgraph_core::provider::{FnProvider, Provider};
use relgraph_core::retrieve::HashEmbedder;
use relgraph_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub const TEXT: &str = "Scott grew up on the farm of Andrew Palowski. \
Everyone in the valley knew that Scott was the son of Andrew Palowski. \
Years later Scott left for the city, and Andrew Palowski stayed behind alone.";

/// Answers character prompts with two names, relation prompts with a
/// contradictory pair of triples and resolution prompts with option A.
pub fn mock() -> Arc<dyn Provider> {
    Arc::new(FnProvider::new("mock", |prompt: &str| {
        let out = if prompt.contains("annotating the characters") {
            "Scott\nAndrew Palowski"
        } else if prompt.contains("annotating the relationships") {
            "Scott | child_of | Andrew Palowski\nScott | father_of | Andrew Palowski\nScott | cousin_of | Nobody"
        } else {
            "A"
        };
        Ok(out.to_string())
    }))
}

pub fn app(dir: &Path) -> AppState {
    let mut cfg = AppConfig::default();
    cfg.server.data_dir = dir.to_path_buf();
    cfg.server.long_poll_secs = 5;
    cfg.retrieval.chunk_chars = 80;
    cfg.retrieval.overlap_chars = 20;
    AppState::with_parts(cfg, mock(), Arc::new(HashEmbedder::new(64))).unwrap()
}

pub struct Client {
    pub router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or(Value::Null)
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.bytes.clone()).unwrap()
    }
}

impl Client {
    pub fn new(state: AppState) -> Client {
        Client {
            router: router(state),
        }
    }

    pub async fn send(
        &self,
        method: Method,
        uri: &str,
        body: Option<Value>,
        if_match: Option<u64>,
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(r) = if_match {
            req = req.header("if-match", format!("\"{r}\""));
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let res = self
            .router
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, bytes }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(body), None).await
    }

    pub async fn patch(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::PATCH, uri, Some(body), None).await
    }

    pub async fn put(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::PUT, uri, Some(body), None).await
    }

    pub async fn create(&self, text: &str) -> String {
        let r = self
            .post("/sessions", serde_json::json!({ "text": text }))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()["session_id"].as_str().unwrap().to_string()
    }

    pub async fn revision(&self, sid: &str) -> u64 {
        self.get(&format!("/sessions/{sid}")).await.json()["revision"]
            .as_u64()
            .unwrap()
    }

    /// Id of the entity whose canonical name is `name`.
    pub async fn entity(&self, sid: &str, name: &str) -> String {
        let g = self.get(&format!("/sessions/{sid}/graph")).await.json();
        g["graph"]["entities"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["canonical"] == name)
            .unwrap_or_else(|| panic!("no entity {name}"))["id"]
            .as_str()
            .unwrap()
            .to_string()
    }
}
