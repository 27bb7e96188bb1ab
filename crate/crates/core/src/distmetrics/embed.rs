use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::remote::Endpoint;
use crate::seed::hash_str;

pub const DEFAULT_EMBED_DIM: usize = 64;
const NORM_TOL: f64 = 1e-9;

/// Unit-normalized vectors of one dimension, tagged with where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
    pub provenance: String,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>, provenance: impl Into<String>) -> Result<Self, MetricError> {
        let dim = vectors.first().map_or(0, Vec::len);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(MetricError::Dimension(format!(
                    "vector {i} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            let norm = l2(v);
            if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
                return Err(MetricError::Dimension(format!("vector {i} has norm {norm}")));
            }
        }
        Ok(Self {
            vectors,
            provenance: provenance.into(),
        })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, MetricError>;

    fn provenance(&self) -> String;

    fn embed_set(&self, texts: &[&str]) -> Result<EmbeddingSet, MetricError> {
        let vectors = texts
            .iter()
            .map(|t| self.embed(t))
            .collect::<Result<Vec<_>, _>>()?;
        EmbeddingSet::new(vectors, self.provenance())
    }
}

/// Deterministic bag-of-tokens embedder. Lowercased alphanumeric tokens are
/// hashed into `dim - 1` buckets; the last coordinate is reserved for empty
/// text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    dim: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self {
            dim: DEFAULT_EMBED_DIM,
        }
    }
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Result<Self, MetricError> {
        if dim < 2 {
            return Err(MetricError::Dimension(format!("embedding dim {dim} < 2")));
        }
        Ok(Self { dim })
    }

    pub fn bucket(&self, token: &str) -> usize {
        (hash_str(token) % (self.dim as u64 - 1)) as usize
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, MetricError> {
        let mut v = vec![0.0; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            v[self.dim - 1] = 1.0;
            return Ok(v);
        }
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        let norm = l2(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }

    fn provenance(&self) -> String {
        format!("hashed-bag-{}", self.dim)
    }
}

/// Client for an embedding endpoint. The request body is `{"input": text}`;
/// the response is `{"embedding": [..]}` or `{"data": [{"embedding": [..]}]}`.
/// Vectors are L2-normalized on receipt.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub endpoint: Endpoint,
    pub dim: usize,
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, MetricError> {
        let body = self.endpoint.post_json(&serde_json::json!({ "input": text }))?;
        let v: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| MetricError::Malformed(e.to_string()))?;
        let arr = v["embedding"]
            .as_array()
            .or_else(|| v["data"][0]["embedding"].as_array())
            .ok_or_else(|| MetricError::Malformed("no embedding in response".into()))?;
        let mut out = arr
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| MetricError::Malformed("non-numeric embedding entry".into()))?;
        if out.len() != self.dim {
            return Err(MetricError::Dimension(format!(
                "endpoint returned dimension {}, expected {}",
                out.len(),
                self.dim
            )));
        }
        let norm = l2(&out);
        if norm == 0.0 {
            return Err(MetricError::Malformed("zero embedding".into()));
        }
        out.iter_mut().for_each(|x| *x /= norm);
        Ok(out)
    }

    fn provenance(&self) -> String {
        format!("remote:{}", self.endpoint.url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::builtin_spec;
    use crate::distmetrics::cosine;
    use crate::remote::testing::serve;

    #[test]
    fn empty_text_is_reserved_basis() {
        let e = HashedEmbedder::default();
        let v = e.embed("  .. ").unwrap();
        assert_eq!(v[63], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn deterministic_and_unit() {
        let e = HashedEmbedder::default();
        let a = e.embed("Free air under the diaphragm.").unwrap();
        assert_eq!(a, e.embed("Free air under the diaphragm.").unwrap());
        assert!((l2(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a[63], 0.0);
    }

    #[test]
    fn finding_sentences_are_distinguishable() {
        // Every pair of distinct sentences in the fixture corpus, and every
        // sentence with one extra rare token, must embed to different directions.
        let e = HashedEmbedder::default();
        let vocab = builtin_spec().finding_vocabulary();
        let vecs: Vec<Vec<f64>> = vocab.iter().map(|s| e.embed(s).unwrap()).collect();
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                assert!(cosine(&vecs[i], &vecs[j]) < 1.0 - 1e-12, "{} ~ {}", vocab[i], vocab[j]);
            }
            let extra = e.embed(&format!("{} zygomycosis", vocab[i])).unwrap();
            assert!(cosine(&vecs[i], &extra) < 1.0 - 1e-12, "{}", vocab[i]);
        }
    }

    #[test]
    fn set_rejects_mixed_dimensions() {
        assert!(EmbeddingSet::new(vec![vec![1.0, 0.0], vec![1.0]], "t").is_err());
        assert!(EmbeddingSet::new(vec![vec![2.0, 0.0]], "t").is_err());
    }

    #[test]
    fn remote_parses_and_normalizes() {
        let srv = serve(vec![(200, r#"{"data":[{"embedding":[3.0,4.0]}]}"#.into())]);
        let e = RemoteEmbedder {
            endpoint: Endpoint::new(&srv.url),
            dim: 2,
        };
        assert_eq!(e.embed("x").unwrap(), vec![0.6, 0.8]);
        assert!(srv.requests.lock().unwrap()[0].contains(r#""input":"x""#));
    }

    #[test]
    fn remote_transport_failure() {
        let srv = serve(vec![(503, "busy".into()), (503, "busy".into())]);
        let mut endpoint = Endpoint::new(&srv.url);
        endpoint.max_retries = 1;
        endpoint.backoff_ms = 1;
        let e = RemoteEmbedder { endpoint, dim: 2 };
        assert!(matches!(e.embed("x"), Err(MetricError::Transport(_))));
    }
}
