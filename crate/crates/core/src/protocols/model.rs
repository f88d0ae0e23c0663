//! Trained models and their FSVM checkpoint container.
//!
//! ```text
//! "FSVM" | u32 version=1
//! u32 len | config JSON
//! u32 len | config fingerprint (ASCII hex)
//! u32 block count
//! per block: u32 len | name | u32 rows | u32 cols | rows*cols f64
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::align::SaliencyParams;
use crate::error::{Error, Result};
use crate::heads::LinearHead;
use crate::matrix::Matrix;
use crate::protocols::{EmbeddingParams, Method, MethodConfig};

pub const FSVM_MAGIC: [u8; 4] = *b"FSVM";
pub const FSVM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: MethodConfig,
    pub embedding: EmbeddingParams,
    /// Base-class classifier; classifier methods only.
    pub base_head: Option<LinearHead>,
    /// Saliency queries; cmn-lite only.
    pub saliency: Option<SaliencyParams>,
}

impl TrainedModel {
    pub fn new(
        config: MethodConfig,
        embedding: EmbeddingParams,
        base_head: Option<LinearHead>,
        saliency: Option<SaliencyParams>,
    ) -> Result<Self> {
        let m = Self {
            config,
            embedding,
            base_head,
            saliency,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let method = self.config.method;
        if method.is_classifier() != self.base_head.is_some() {
            return Err(Error::Validation(format!(
                "{method} model {} a base head",
                if self.base_head.is_some() {
                    "must not carry"
                } else {
                    "needs"
                }
            )));
        }
        if (method == Method::CmnLite) != self.saliency.is_some() {
            return Err(Error::Validation(format!(
                "{method} model has mismatched saliency parameters"
            )));
        }
        if let Some(h) = &self.base_head {
            if h.inputs() != self.embedding.out_dim() {
                return Err(Error::Shape(format!(
                    "base head {:?} after embedding {:?}",
                    h.weights.shape(),
                    self.embedding.weights.shape()
                )));
            }
        }
        if let Some(s) = &self.saliency {
            if s.queries.cols() != self.embedding.out_dim() {
                return Err(Error::Shape(format!(
                    "saliency queries {:?} after embedding {:?}",
                    s.queries.shape(),
                    self.embedding.weights.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn config_fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    /// Digest of every weight, for detecting mutation.
    pub fn weights_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, m) in self.blocks() {
            h.update(name.as_bytes());
            for v in m.as_slice() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn blocks(&self) -> Vec<(&'static str, Matrix)> {
        let col = |v: &[f64]| Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap();
        let mut out = vec![
            ("embedding.weight", self.embedding.weights.clone()),
            ("embedding.bias", col(&self.embedding.bias)),
        ];
        if let Some(h) = &self.base_head {
            out.push(("base_head.weight", h.weights.clone()));
            out.push(("base_head.bias", col(&h.bias)));
        }
        if let Some(s) = &self.saliency {
            out.push(("saliency.queries", s.queries.clone()));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(&FSVM_MAGIC);
        buf.extend_from_slice(&FSVM_VERSION.to_le_bytes());
        let config = serde_json::to_string(&self.config).expect("config serializes");
        put_bytes(&mut buf, config.as_bytes());
        put_bytes(&mut buf, self.config_fingerprint().as_bytes());
        let blocks = self.blocks();
        buf.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
        for (name, m) in blocks {
            put_bytes(&mut buf, name.as_bytes());
            buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader {
            bytes: &bytes,
            at: 0,
            path,
        };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != FSVM_MAGIC {
            return Err(Error::Format {
                path: path.into(),
                found: magic,
                expected: FSVM_MAGIC,
            });
        }
        let version = r.u32()?;
        if version != FSVM_VERSION {
            return Err(Error::Version {
                path: path.into(),
                found: version,
            });
        }
        let config_json = r.string()?;
        let config: MethodConfig = serde_json::from_str(&config_json)
            .map_err(|e| Error::Validation(format!("{}: config: {e}", path.display())))?;
        let fingerprint = r.string()?;
        if fingerprint != config.fingerprint() {
            return Err(Error::Validation(format!(
                "{}: stored fingerprint {fingerprint} does not match config {}",
                path.display(),
                config.fingerprint()
            )));
        }
        let count = r.u32()?;
        let mut blocks = std::collections::BTreeMap::new();
        for _ in 0..count {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blocks.insert(name, Matrix::from_vec(rows, cols, data)?);
        }
        if r.at != bytes.len() {
            return Err(Error::Validation(format!(
                "{}: {} trailing bytes",
                path.display(),
                bytes.len() - r.at
            )));
        }
        let mut take = |name: &str| blocks.remove(name);
        let missing = |name: &str| Error::Validation(format!("{}: missing block {name}", path.display()));
        let embedding = EmbeddingParams::new(
            take("embedding.weight").ok_or_else(|| missing("embedding.weight"))?,
            take("embedding.bias")
                .ok_or_else(|| missing("embedding.bias"))?
                .into_vec(),
        )?;
        let base_head = match (take("base_head.weight"), take("base_head.bias")) {
            (Some(w), Some(b)) => Some(LinearHead::new(w, b.into_vec())?),
            (None, None) => None,
            _ => return Err(missing("base_head.weight/base_head.bias pair")),
        };
        let saliency = take("saliency.queries").map(SaliencyParams::new);
        TrainedModel::new(config, embedding, base_head, saliency)
    }
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Length {
                path: self.path.into(),
                expected: (self.at + n) as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| Error::Validation(format!("{}: {e}", self.path.display())))
    }
}
