//! Self-describing model container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `MTSPIKE\0` |
//! | 4 | format version (`u32`) |
//! | 8 | metadata length `m` (`u64`) |
//! | m | metadata, UTF-8 JSON ([`ModelMeta`]) |
//! | 4 | number of layers `L` (`u32`) |
//! | 8 L | layer sizes (`u64` each) |
//! | 8 W | weights as `f64`, layer by layer, row-major `[pre][post]` |
//! | 32 | SHA-256 of every preceding byte |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{CodingSnapshot, SourceDigest};
use crate::error::{Error, Result};
use crate::learning::TrainConfig;
use crate::network::{Activation, Network};
use crate::readout::TargetScheme;

pub const MAGIC: &[u8; 8] = b"MTSPIKE\0";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub mse: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// How the weights were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub train: TrainConfig,
    pub epochs_run: usize,
    pub final_metrics: Option<FinalMetrics>,
    pub sources: Vec<SourceDigest>,
    pub split_seed: u64,
    pub library_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub activation: Activation,
    pub coding: CodingSnapshot,
    pub scheme: TargetScheme,
    pub class_names: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub meta: ModelMeta,
    pub network: Network,
}

impl ModelFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::CorruptModel(format!("cannot serialise metadata: {e}")))?;
        let sizes = self.network.layer_sizes();
        let mut out = Vec::with_capacity(64 + meta.len() + 8 * (sizes.len() + self.network.weight_count()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for layer in self.network.weights() {
            for w in layer {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::CorruptModel("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if bytes.len() < r.pos + DIGEST_LEN {
            return Err(truncated());
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::CorruptModel(
                "checksum mismatch (truncated or modified file)".into(),
            ));
        }
        let mut r = Reader {
            bytes: body,
            pos: r.pos,
        };

        let meta_len = usize::try_from(r.u64()?).map_err(|_| truncated())?;
        let meta: ModelMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::CorruptModel(format!("bad metadata: {e}")))?;
        let layers = r.u32()? as usize;
        let sizes = (0..layers)
            .map(|_| r.u64().and_then(|s| usize::try_from(s).map_err(|_| truncated())))
            .collect::<Result<Vec<_>>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::CorruptModel(format!("invalid layer sizes {sizes:?}")));
        }
        let mut weights = Vec::with_capacity(layers - 1);
        for pair in sizes.windows(2) {
            let n = pair[0].checked_mul(pair[1]).ok_or_else(truncated)?;
            let raw = r.take(n.checked_mul(8).ok_or_else(truncated)?)?;
            weights.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            );
        }
        if r.pos != body.len() {
            return Err(Error::CorruptModel(format!(
                "{} unexpected bytes after weights",
                body.len() - r.pos
            )));
        }
        let network =
            Network::from_weights(sizes, weights, meta.activation).map_err(|e| Error::CorruptModel(e.to_string()))?;
        Ok(ModelFile { meta, network })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn truncated() -> Error {
    Error::CorruptModel("file is truncated".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
