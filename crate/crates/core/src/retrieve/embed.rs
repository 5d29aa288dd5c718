use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbedError {
    #[error("embedding transport error: {0}")]
    Transport(String),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedder returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedder returned a vector of dim {got}, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        (**self).embed(texts)
    }
}

/// Scales `v` to unit length. A zero vector becomes the first basis vector.
pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        return;
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of lowercased word unigrams and bigrams.
/// Deterministic and offline.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        HashEmbedder { dim }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut add = |feature: &str| {
            let h = fnv1a(feature.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        };
        for w in &words {
            add(w);
        }
        for pair in words.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        normalize(&mut v);
        v
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(256)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[cfg(feature = "http")]
pub use http::HttpEmbedder;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde_json::json;

    use super::{EmbedError, Embedder};

    /// Embeddings client: `POST {base_url}/embeddings`.
    pub struct HttpEmbedder {
        client: reqwest::blocking::Client,
        base_url: String,
        model: String,
        api_key: Option<String>,
        dim: usize,
    }

    impl HttpEmbedder {
        pub fn new(
            base_url: &str,
            model: &str,
            api_key: Option<String>,
            dim: usize,
            timeout: Duration,
        ) -> Result<Self, EmbedError> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| EmbedError::Transport(e.to_string()))?;
            Ok(HttpEmbedder {
                client,
                base_url: base_url.trim_end_matches('/').to_string(),
                model: model.to_string(),
                api_key,
                dim,
            })
        }
    }

    impl Embedder for HttpEmbedder {
        fn dim(&self) -> usize {
            self.dim
        }

        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
            let mut req = self
                .client
                .post(format!("{}/embeddings", self.base_url))
                .json(&json!({"model": self.model, "input": texts}));
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .and_then(|r| r.error_for_status())
                .map_err(|e| EmbedError::Transport(e.to_string()))?;
            let v: serde_json::Value = resp
                .json()
                .map_err(|e| EmbedError::Malformed(e.to_string()))?;
            let data = v["data"]
                .as_array()
                .ok_or_else(|| EmbedError::Malformed("missing data array".into()))?;
            data.iter()
                .map(|row| {
                    row["embedding"]
                        .as_array()
                        .ok_or_else(|| EmbedError::Malformed("missing embedding".into()))?
                        .iter()
                        .map(|x| {
                            x.as_f64().map(|f| f as f32).ok_or_else(|| {
                                EmbedError::Malformed("non-numeric component".into())
                            })
                        })
                        .collect()
                })
                .collect()
        }
    }
}
