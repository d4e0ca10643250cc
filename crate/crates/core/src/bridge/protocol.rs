//! Protocol v1 messages: one JSON object per line over the child's stdio.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::latent::LatentSpec;

pub const PROTOCOL_VERSION: u32 = 1;
/// Latents whose payload exceeds this many bytes travel through a file.
pub const INLINE_LIMIT_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Generate,
    Score,
    GenerateAndScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding")]
pub enum LatentPayload {
    #[serde(rename = "base64-f64le")]
    Inline { dim: usize, data: String },
    #[serde(rename = "file-f64le")]
    File { dim: usize, path: String },
}

fn to_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn from_le_bytes(bytes: &[u8], dim: usize) -> Result<Vec<f64>, BridgeError> {
    if bytes.len() != 8 * dim {
        return Err(BridgeError::Protocol(format!("latent has {} bytes, expected {}", bytes.len(), 8 * dim)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl LatentPayload {
    pub fn inline(values: &[f64]) -> Self {
        LatentPayload::Inline { dim: values.len(), data: STANDARD.encode(to_le_bytes(values)) }
    }

    /// Write `values` to `path` and reference it.
    pub fn file(values: &[f64], path: &Path) -> Result<Self, BridgeError> {
        std::fs::write(path, to_le_bytes(values)).map_err(|e| BridgeError::Io(e.to_string()))?;
        Ok(LatentPayload::File { dim: values.len(), path: path.to_string_lossy().into_owned() })
    }

    pub fn dim(&self) -> usize {
        match self {
            LatentPayload::Inline { dim, .. } | LatentPayload::File { dim, .. } => *dim,
        }
    }

    pub fn decode(&self) -> Result<Vec<f64>, BridgeError> {
        match self {
            LatentPayload::Inline { dim, data } => {
                let bytes = STANDARD.decode(data).map_err(|e| BridgeError::Protocol(format!("bad base64: {e}")))?;
                from_le_bytes(&bytes, *dim)
            }
            LatentPayload::File { dim, path } => {
                let bytes = std::fs::read(path).map_err(|e| BridgeError::Io(format!("{path}: {e}")))?;
                from_le_bytes(&bytes, *dim)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub id: u64,
    pub kind: RequestKind,
    pub latent: LatentPayload,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub id: u64,
    #[serde(default)]
    pub object_handle: Option<String>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

impl GeneratorResponse {
    /// Exactly one of (object handle or score) and error must be present.
    pub fn validate(&self) -> Result<(), BridgeError> {
        let has_payload = self.object_handle.is_some() || self.score.is_some();
        if has_payload == self.error.is_some() {
            return Err(BridgeError::Protocol(format!(
                "response {} must carry either a result or an error",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<LatentSpec>,
    },
    Request(GeneratorRequest),
    Response(GeneratorResponse),
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
    Shutdown,
}

impl Message {
    /// Serialise to a single line, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialise");
        s.push('\n');
        s
    }

    pub fn parse(line: &str) -> Result<Message, BridgeError> {
        serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Protocol(format!("malformed line: {e}")))
    }
}
