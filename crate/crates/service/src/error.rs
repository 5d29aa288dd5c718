use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use relgraph_core::extract::ExtractError;
use relgraph_core::graph::GraphError;
use relgraph_core::kb::KbError;
use relgraph_core::provider::ProviderError;
use relgraph_core::retrieve::{ResolveError, RetrieveError};
use serde_json::{json, Value};

/// An error response: `{"error": {"code", "message", ...detail}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn stale(expected: u64, current: u64) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "stale_revision",
            format!("revision {expected} is stale; current revision is {current}"),
        )
        .with_detail(json!({ "current_revision": current }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let (Some(Value::Object(extra)), Value::Object(map)) = (self.detail, &mut body) {
            map.extend(extra);
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownEntity(_) | GraphError::UnknownTriple(_) => {
                ApiError::not_found(e.to_string())
            }
            _ => ApiError::invalid("invalid_edit", e.to_string()),
        }
    }
}

impl From<KbError> for ApiError {
    fn from(e: KbError) -> Self {
        let err = ApiError::invalid("invalid_kb", e.to_string());
        match e {
            KbError::Invalid(diags) => err.with_detail(json!({ "diagnostics": diags })),
            _ => err,
        }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", e.to_string())
    }
}

impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::AllRunsFailed(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", e.to_string())
            }
            ExtractError::NoEntities => ApiError::invalid("no_confirmed_entities", e.to_string()),
            _ => ApiError::invalid("invalid_extraction", e.to_string()),
        }
    }
}

impl From<RetrieveError> for ApiError {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::Embed(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "embedder_error", e.to_string())
            }
            _ => ApiError::invalid("invalid_retrieval", e.to_string()),
        }
    }
}

impl From<ResolveError> for ApiError {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::Provider(p) => p.into(),
            ResolveError::Unparseable { ref raw } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "unparseable_answer", e.to_string())
                    .with_detail(json!({ "raw": raw }))
            }
            ResolveError::NotOpen(_) | ResolveError::PromptMismatch(_) => {
                ApiError::new(StatusCode::CONFLICT, "conflict_not_open", e.to_string())
            }
            ResolveError::UnknownOption(_) => ApiError::invalid("unknown_option", e.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(format!("storage: {e}"))
    }
}
