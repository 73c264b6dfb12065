//! JSON field-spec files: either explicit blocks over a weighted space, or a
//! reference to a gallery family.
//!
//! ```json
//! { "version": 1,
//!   "space": [{"label": 1.0, "weight": 1.0}, {"label": 2.0, "weight": 0.5}],
//!   "fibers": [1, 2],
//!   "blocks": [[[[-1.0, 0.0]]], [[[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [-2.0, 0.0]]]] }
//! ```
//!
//! ```json
//! { "version": 1, "family": {"name": "example_7_2", "params": {"N": 10}} }
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use dirint::gallery::{self, GeneratorFamily};
use dirint::linalg::CMatrix;
use dirint::{FiberSpec, MeasureSpace, OperatorField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::report;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDims(String),
    #[error(transparent)]
    Field(#[from] dirint::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub label: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpecFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<AtomSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibers: Option<Vec<usize>>,
    /// Row-major matrices with entries as `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyRef>,
}

impl FieldSpecFile {
    pub fn from_field(a: &OperatorField) -> Self {
        let space = a
            .space()
            .atoms()
            .iter()
            .enumerate()
            .map(|(k, atom)| AtomSpec {
                label: atom.label.unwrap_or(k as f64),
                weight: atom.weight,
            })
            .collect();
        let blocks = a
            .blocks()
            .iter()
            .map(|b| {
                (0..b.nrows())
                    .map(|i| (0..b.ncols()).map(|j| [b[(i, j)].re, b[(i, j)].im]).collect())
                    .collect()
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            space: Some(space),
            fibers: Some(a.fibers().dims().to_vec()),
            blocks: Some(blocks),
            family: None,
        }
    }

    pub fn to_json(&self) -> String {
        report::to_json_string(self)
    }
}

/// A family reference split into the family and its truncation size `N`.
pub fn family_from_ref(r: &FamilyRef) -> Result<(GeneratorFamily, usize), SpecError> {
    let mut params = r.params.clone();
    let n = params
        .remove("N")
        .ok_or_else(|| SpecError::SchemaError("family params must include N".into()))?;
    if !(n >= 1.0) || n.fract() != 0.0 {
        return Err(SpecError::SchemaError(format!("N must be a positive integer, got {n}")));
    }
    Ok((gallery::family_by_name(&r.name, &params)?, n as usize))
}

pub fn parse_field_spec_str(text: &str) -> Result<(Arc<MeasureSpace>, FiberSpec, OperatorField), SpecError> {
    let spec: FieldSpecFile = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => SpecError::SchemaError(e.to_string()),
        _ => SpecError::ParseError {
            line: e.line(),
            reason: e.to_string(),
        },
    })?;
    build(spec)
}

pub fn parse_field_spec(path: &Path) -> Result<(Arc<MeasureSpace>, FiberSpec, OperatorField), SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_field_spec_str(&text)
}

fn build(spec: FieldSpecFile) -> Result<(Arc<MeasureSpace>, FiberSpec, OperatorField), SpecError> {
    if spec.version != FORMAT_VERSION {
        return Err(SpecError::SchemaError(format!("unsupported version {}", spec.version)));
    }
    let field = match (spec.blocks, spec.family) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(SpecError::SchemaError("exactly one of blocks and family is required".into()))
        }
        (None, Some(family)) => {
            if spec.space.is_some() || spec.fibers.is_some() {
                return Err(SpecError::SchemaError("a family spec takes no space or fibers".into()));
            }
            let (fam, n) = family_from_ref(&family)?;
            fam.truncate(n)?
        }
        (Some(blocks), None) => {
            let atoms = spec
                .space
                .ok_or_else(|| SpecError::SchemaError("blocks need a space".into()))?;
            let dims = spec
                .fibers
                .ok_or_else(|| SpecError::SchemaError("blocks need fibers".into()))?;
            let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.label, a.weight)).collect();
            let space = Arc::new(MeasureSpace::new(&pairs)?);
            if dims.len() != space.len() || blocks.len() != space.len() {
                return Err(SpecError::InconsistentDims(format!(
                    "{} atoms, {} fiber dims, {} blocks",
                    space.len(),
                    dims.len(),
                    blocks.len()
                )));
            }
            let mats = blocks
                .iter()
                .zip(&dims)
                .enumerate()
                .map(|(k, (rows, &d))| to_matrix(k, rows, d))
                .collect::<Result<Vec<_>, _>>()?;
            OperatorField::new(space, FiberSpec::new(dims)?, mats)?
        }
    };
    Ok((field.space().clone(), field.fibers().clone(), field))
}

fn to_matrix(k: usize, rows: &[Vec<[f64; 2]>], d: usize) -> Result<CMatrix, SpecError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(SpecError::InconsistentDims(format!(
            "block {k} is not {d}x{d}"
        )));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        let [re, im] = rows[i][j];
        Complex64::new(re, im)
    }))
}
