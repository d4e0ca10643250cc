//! Cα structure comparison: Kabsch RMSD, TM-score and greedy diversity counting.
//!
//! TM-scores use identity residue pairing and the RMSD-optimal (Kabsch)
//! superposition, so they are a lower bound on the alignment-maximised score.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUCCESS_RMSD: f64 = 2.0;
pub const DIVERSITY_TM: f64 = 0.6;
pub const D0_MIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("structures have different lengths: {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("structure is empty")]
    Empty,
    #[error("non-finite coordinate at residue {0}")]
    NonFinite(usize),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub label: String,
    pub coords: Vec<[f64; 3]>,
}

impl Structure {
    pub fn new(label: impl Into<String>, coords: Vec<[f64; 3]>) -> Result<Self, StructureError> {
        if coords.is_empty() {
            return Err(StructureError::Empty);
        }
        if let Some(i) = coords.iter().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(StructureError::NonFinite(i));
        }
        Ok(Structure { label: label.into(), coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Minimal XYZ: the residue count on the first line, then one `x y z` line per residue.
    pub fn parse_xyz(label: impl Into<String>, text: &str) -> Result<Self, StructureError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (first_no, first) = lines.next().ok_or(StructureError::Empty)?;
        let count: usize = first.trim().parse().map_err(|_| StructureError::Parse {
            line: first_no + 1,
            message: format!("expected residue count, got {:?}", first.trim()),
        })?;
        let mut coords = Vec::with_capacity(count);
        for (no, line) in lines {
            if coords.len() == count {
                return Err(StructureError::Parse { line: no + 1, message: "more coordinates than declared".into() });
            }
            coords.push(parse_triple(line.split_whitespace(), no + 1)?);
        }
        if coords.len() != count {
            return Err(StructureError::Parse {
                line: text.lines().count(),
                message: format!("declared {count} residues, found {}", coords.len()),
            });
        }
        Structure::new(label, coords)
    }

    /// CSV with `x,y,z` rows and an optional `x,y,z` header.
    pub fn parse_csv(label: impl Into<String>, text: &str) -> Result<Self, StructureError> {
        let mut coords = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (no == 0 && line.replace(' ', "").eq_ignore_ascii_case("x,y,z")) {
                continue;
            }
            coords.push(parse_triple(line.split(','), no + 1)?);
        }
        Structure::new(label, coords)
    }

    pub fn to_xyz(&self) -> String {
        let mut out = format!("{}\n", self.len());
        for c in &self.coords {
            let _ = writeln!(out, "{:?} {:?} {:?}", c[0], c[1], c[2]);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for c in &self.coords {
            let _ = writeln!(out, "{:?},{:?},{:?}", c[0], c[1], c[2]);
        }
        out
    }

    fn points(&self) -> Vec<Vector3<f64>> {
        self.coords.iter().map(|c| Vector3::new(c[0], c[1], c[2])).collect()
    }
}

fn parse_triple<'a>(mut fields: impl Iterator<Item = &'a str>, line: usize) -> Result<[f64; 3], StructureError> {
    let mut out = [0.0; 3];
    for slot in out.iter_mut() {
        let f = fields.next().ok_or_else(|| StructureError::Parse { line, message: "expected 3 coordinates".into() })?;
        *slot = f
            .trim()
            .parse()
            .map_err(|_| StructureError::Parse { line, message: format!("bad number {:?}", f.trim()) })?;
    }
    if fields.next().is_some() {
        return Err(StructureError::Parse { line, message: "expected 3 coordinates".into() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    /// Applied to the first structure: `x ↦ R x + t`.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub rmsd: f64,
    /// Per-residue distances after superposition.
    pub distances: Vec<f64>,
    /// Either point set is collinear (or a single point), so the rotation is not unique.
    pub degenerate_rank: bool,
}

fn centroid(p: &[Vector3<f64>]) -> Vector3<f64> {
    p.iter().fold(Vector3::zeros(), |acc, v| acc + v) / p.len() as f64
}

fn spread_rank(p: &[Vector3<f64>], c: &Vector3<f64>) -> usize {
    let m = p.iter().fold(Matrix3::zeros(), |acc, v| {
        let d = v - c;
        acc + d * d.transpose()
    });
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-12 * max).count()
}

/// Least-squares rigid superposition of `a` onto `b`.
pub fn kabsch(a: &Structure, b: &Structure) -> Result<Superposition, StructureError> {
    if a.len() != b.len() {
        return Err(StructureError::LengthMismatch(a.len(), b.len()));
    }
    let (pa, pb) = (a.points(), b.points());
    let (ca, cb) = (centroid(&pa), centroid(&pb));
    let h = pa.iter().zip(&pb).fold(Matrix3::zeros(), |acc, (x, y)| acc + (x - ca) * (y - cb).transpose());
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v = svd.v_t.expect("svd with v_t").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let rotation = v * fix * u.transpose();
    let translation = cb - rotation * ca;
    let distances: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| (rotation * x + translation - y).norm()).collect();
    let rmsd = (distances.iter().map(|d| d * d).sum::<f64>() / distances.len() as f64).sqrt();
    let degenerate_rank = spread_rank(&pa, &ca) < 2 || spread_rank(&pb, &cb) < 2;
    Ok(Superposition { rotation, translation, rmsd, distances, degenerate_rank })
}

pub fn kabsch_rmsd(a: &Structure, b: &Structure) -> Result<f64, StructureError> {
    Ok(kabsch(a, b)?.rmsd)
}

/// `d₀(L) = 1.24 ∛(L − 15) − 1.8`, floored at [`D0_MIN`].
pub fn tm_d0(len: usize) -> f64 {
    let raw = 1.24 * (len as f64 - 15.0).cbrt() - 1.8;
    raw.max(D0_MIN)
}

/// TM-score from per-residue distances.
pub fn tm_from_distances(distances: &[f64]) -> f64 {
    let d0 = tm_d0(distances.len());
    distances.iter().map(|d| 1.0 / (1.0 + (d / d0).powi(2))).sum::<f64>() / distances.len() as f64
}

pub fn tm_score(a: &Structure, b: &Structure) -> Result<f64, StructureError> {
    if a.coords == b.coords {
        return Ok(1.0);
    }
    Ok(tm_from_distances(&kabsch(a, b)?.distances))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub structure: Structure,
    pub reference: Structure,
    pub rmsd: f64,
    pub success: bool,
}

impl DesignResult {
    pub fn evaluate(structure: Structure, reference: Structure, threshold: f64) -> Result<Self, StructureError> {
        let rmsd = kabsch_rmsd(&structure, &reference)?;
        Ok(DesignResult { structure, reference, rmsd, success: rmsd < threshold })
    }
}

/// Greedy count over successes (`rmsd < rmsd_threshold`) visited in
/// ascending RMSD order (input order on ties). A design is accepted when its
/// TM-score against every accepted design is at most `tm_threshold`.
pub fn diversity_count_with(
    rmsd: &[f64],
    rmsd_threshold: f64,
    tm_threshold: f64,
    mut tm: impl FnMut(usize, usize) -> Result<f64, StructureError>,
) -> Result<usize, StructureError> {
    let mut order: Vec<usize> = (0..rmsd.len()).filter(|&i| rmsd[i] < rmsd_threshold).collect();
    order.sort_by(|&a, &b| rmsd[a].total_cmp(&rmsd[b]));
    let mut accepted: Vec<usize> = Vec::new();
    for i in order {
        let mut novel = true;
        for &j in &accepted {
            if tm(i, j)? > tm_threshold {
                novel = false;
                break;
            }
        }
        if novel {
            accepted.push(i);
        }
    }
    Ok(accepted.len())
}

pub fn diversity_count(results: &[DesignResult], tm_threshold: f64, rmsd_threshold: f64) -> Result<usize, StructureError> {
    let rmsd: Vec<f64> = results.iter().map(|r| r.rmsd).collect();
    diversity_count_with(&rmsd, rmsd_threshold, tm_threshold, |i, j| {
        tm_score(&results[i].structure, &results[j].structure)
    })
}
