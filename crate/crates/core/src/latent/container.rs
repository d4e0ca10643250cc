//! Binary container for matrices of latents.
//!
//! ```text
//! offset  size  content
//! 0       8     magic b"SLATCT01"
//! 8       8     header length H, u64 little-endian
//! 16      H     UTF-8 JSON header {"spec": .., "K": .., "D": .., "layout": ..}
//! 16+H    8·K·D f64 little-endian values, column-major (column k = vector k)
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LatentError, LatentSpec, SeedSet};

pub const MAGIC: &[u8; 8] = b"SLATCT01";
pub const LAYOUT_XI: &str = "column-major xi";
pub const LAYOUT_LATENTS: &str = "column-major latents";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub spec: LatentSpec,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub layout: String,
}

fn io_err(e: std::io::Error) -> LatentError {
    LatentError::Container(e.to_string())
}

/// Write a D×K matrix with its header.
pub fn write_matrix<W: Write>(
    mut out: W,
    spec: &LatentSpec,
    matrix: &DMatrix<f64>,
    layout: &str,
) -> Result<(), LatentError> {
    if matrix.nrows() != spec.total_dim() {
        return Err(LatentError::DimensionMismatch { expected: spec.total_dim(), got: matrix.nrows() });
    }
    let header = ContainerHeader {
        spec: spec.clone(),
        k: matrix.ncols(),
        d: matrix.nrows(),
        layout: layout.to_string(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| LatentError::Container(e.to_string()))?;
    out.write_all(MAGIC).map_err(io_err)?;
    out.write_all(&(json.len() as u64).to_le_bytes()).map_err(io_err)?;
    out.write_all(&json).map_err(io_err)?;
    let mut payload = Vec::with_capacity(8 * matrix.len());
    // nalgebra storage is column-major already.
    for v in matrix.as_slice() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload).map_err(io_err)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<(ContainerHeader, DMatrix<f64>), LatentError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(LatentError::Container("bad magic".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len).map_err(io_err)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(LatentError::Container("header too large".into()));
    }
    let mut json = vec![0u8; len];
    input.read_exact(&mut json).map_err(io_err)?;
    let header: ContainerHeader =
        serde_json::from_slice(&json).map_err(|e| LatentError::Container(e.to_string()))?;
    if header.d != header.spec.total_dim() {
        return Err(LatentError::Container(format!(
            "header D={} disagrees with spec dimension {}",
            header.d,
            header.spec.total_dim()
        )));
    }
    let count = header.k.checked_mul(header.d).ok_or_else(|| LatentError::Container("size overflow".into()))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() != 8 * count {
        return Err(LatentError::Container(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            8 * count
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let m = DMatrix::from_column_slice(header.d, header.k, &values);
    Ok((header, m))
}

impl SeedSet {
    /// Persist `ξ` with layout `"column-major xi"`.
    pub fn write_to<W: Write>(&self, out: W) -> Result<(), LatentError> {
        write_matrix(out, self.spec(), self.xi(), LAYOUT_XI)
    }

    pub fn read_from<R: Read>(input: R) -> Result<SeedSet, LatentError> {
        let (header, xi) = read_matrix(input)?;
        if header.layout != LAYOUT_XI {
            return Err(LatentError::Container(format!("unexpected layout {:?}", header.layout)));
        }
        SeedSet::from_inner_matrix(header.spec, xi)
    }
}
