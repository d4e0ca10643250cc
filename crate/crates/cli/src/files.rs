//! On-disk formats: space bundles, latent tables and output writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surrogate_core::latent::container::{self, LAYOUT_LATENTS, LAYOUT_XI, MAGIC};
use surrogate_core::{ChartKind, LatentSpec, SeedSet, SurrogateSpace};

use crate::error::CliError;

/// `space.json`: the seeds live in a binary container next to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub spec: LatentSpec,
    /// Relative to the directory holding `space.json`.
    pub seeds_file: String,
    pub chart: ChartKind,
    pub dim: usize,
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_spec(path: &Path) -> Result<LatentSpec, CliError> {
    let text = read_bytes(path)?;
    serde_json::from_slice(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// Latents from a binary container (one latent per column) or a CSV table
/// (one latent per row; a non-numeric first row is taken as a header).
pub enum LatentTable {
    Latents(Vec<Vec<f64>>),
    Inner(surrogate_core::latent::container::ContainerHeader, Vec<Vec<f64>>),
}

pub fn read_latents(path: &Path, spec: &LatentSpec) -> Result<LatentTable, CliError> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(MAGIC) {
        let (header, m) = container::read_matrix(&bytes[..])?;
        if &header.spec != spec {
            return Err(CliError::Usage(format!("{}: container spec differs from the given spec", path.display())));
        }
        let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
        return match header.layout.as_str() {
            LAYOUT_LATENTS => Ok(LatentTable::Latents(cols)),
            LAYOUT_XI => Ok(LatentTable::Inner(header, cols)),
            other => Err(CliError::Usage(format!("{}: unknown layout {other:?}", path.display()))),
        };
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8 CSV", path.display())))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if no == 0 => continue,
            Err(_) => return Err(CliError::Usage(format!("{}:{}: bad number", path.display(), no + 1))),
        }
    }
    Ok(LatentTable::Latents(rows))
}

pub fn seeds_from_table(spec: LatentSpec, table: LatentTable) -> Result<SeedSet, CliError> {
    match table {
        LatentTable::Latents(rows) => Ok(SeedSet::from_latents(spec, &rows)?),
        LatentTable::Inner(header, cols) => {
            let flat: Vec<f64> = cols.into_iter().flatten().collect();
            let xi = surrogate_core::linalg::DMatrix::from_column_slice(header.d, header.k, &flat);
            Ok(SeedSet::from_inner_matrix(spec, xi)?)
        }
    }
}

pub fn seeds_path_for(space_json: &Path) -> (PathBuf, String) {
    let stem = space_json.file_stem().and_then(|s| s.to_str()).unwrap_or("space");
    let name = format!("{stem}.seeds.bin");
    let dir = space_json.parent().unwrap_or(Path::new(""));
    (dir.join(&name), name)
}

pub fn write_space(path: &Path, space: &SurrogateSpace) -> Result<(), CliError> {
    let (seeds_path, seeds_name) = seeds_path_for(path);
    let mut buf = Vec::new();
    space.seeds().write_to(&mut buf)?;
    write_bytes(&seeds_path, &buf)?;
    let file = SpaceFile {
        spec: space.seeds().spec().clone(),
        seeds_file: seeds_name,
        chart: space.chart(),
        dim: space.dim(),
    };
    write_bytes(path, to_json_pretty(&file).as_bytes())
}

pub fn read_space(path: &Path) -> Result<SurrogateSpace, CliError> {
    let file: SpaceFile =
        serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let seeds_path = path.parent().unwrap_or(Path::new("")).join(&file.seeds_file);
    let seeds = SeedSet::read_from(&read_bytes(&seeds_path)?[..])?;
    if seeds.spec() != &file.spec {
        return Err(CliError::Usage(format!("{}: spec differs from the seeds container", path.display())));
    }
    let space = SurrogateSpace::new(seeds, file.chart)?;
    if space.dim() != file.dim {
        return Err(CliError::Usage(format!(
            "{}: dim {} disagrees with {} seeds",
            path.display(),
            file.dim,
            space.seeds().k()
        )));
    }
    Ok(space)
}
