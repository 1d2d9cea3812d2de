//! The JSON document schema for spaces, fields, idempotents and families.
//!
//! Matrices are row-major lists of `[re, im]` pairs; an infinite fiber
//! dimension is encoded as the string `"inf"`. Ground-truth metadata lives
//! under the `truth` key and is never read by computational paths.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SidError};
use crate::field::MatrixField;
use crate::idempotent::{Ambient, IdempotentField};
use crate::linalg::{c64, CMat};
use crate::space::{Atom, AtomicSpace, FiberDim};
use crate::tol::Tolerances;

pub const SCHEMA_VERSION: &str = "1";

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;
pub type FieldBlocks = BTreeMap<String, MatrixDoc>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    #[serde(default = "schema_version_default")]
    pub schema_version: String,
    pub space: SpaceDoc,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldBlocks>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub idempotents: BTreeMap<String, IdempotentDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub families: BTreeMap<String, FamilyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<serde_json::Value>,
}

fn schema_version_default() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub atoms: Vec<AtomDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomDoc {
    pub label: String,
    pub weight: f64,
    pub fiber_dim: FiberDimDoc,
}

/// A positive integer, or the string `"inf"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FiberDimDoc {
    Finite(usize),
    Tag(String),
}

impl FiberDimDoc {
    pub fn to_fiber(&self) -> Result<FiberDim> {
        match self {
            FiberDimDoc::Finite(n) => Ok(FiberDim::Finite(*n)),
            FiberDimDoc::Tag(s) if s == "inf" => Ok(FiberDim::Infinite),
            FiberDimDoc::Tag(s) => Err(SidError::InvalidInput(format!(
                "unknown fiber_dim tag `{s}` (expected a positive integer or \"inf\")"
            ))),
        }
    }

    pub fn from_fiber(f: FiberDim) -> FiberDimDoc {
        match f {
            FiberDim::Finite(n) => FiberDimDoc::Finite(n),
            FiberDim::Infinite => FiberDimDoc::Tag("inf".into()),
        }
    }
}

/// Blocks of an idempotent over the `m`-fold amplification of the base
/// operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdempotentDoc {
    pub m: usize,
    pub blocks: FieldBlocks,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub m: usize,
    pub members: Vec<FieldBlocks>,
}

pub fn encode_matrix(m: &CMat) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn decode_matrix(doc: &MatrixDoc) -> Result<CMat> {
    let rows = doc.len();
    if rows == 0 {
        return Err(SidError::InvalidInput("empty matrix".into()));
    }
    let cols = doc[0].len();
    if doc.iter().any(|r| r.len() != cols) {
        return Err(SidError::InvalidInput("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        c64(doc[i][j][0], doc[i][j][1])
    }))
}

pub fn encode_field(field: &MatrixField) -> FieldBlocks {
    field
        .space()
        .atoms()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| field.block(i).map(|b| (a.label.clone(), encode_matrix(b))))
        .collect()
}

impl Document {
    pub fn new(space: &AtomicSpace) -> Document {
        Document {
            schema_version: SCHEMA_VERSION.into(),
            space: SpaceDoc {
                atoms: space
                    .atoms()
                    .iter()
                    .map(|a| AtomDoc {
                        label: a.label.clone(),
                        weight: a.weight,
                        fiber_dim: FiberDimDoc::from_fiber(a.fiber),
                    })
                    .collect(),
            },
            fields: BTreeMap::new(),
            idempotents: BTreeMap::new(),
            families: BTreeMap::new(),
            truth: None,
        }
    }

    pub fn load(path: &Path) -> Result<Document> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Deterministic serialization: all maps are ordered.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_space(&self) -> Result<Arc<AtomicSpace>> {
        let atoms = self
            .space
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    label: a.label.clone(),
                    weight: a.weight,
                    fiber: a.fiber_dim.to_fiber()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let descs: Vec<(String, f64, FiberDim)> = atoms
            .iter()
            .map(|a| (a.label.clone(), a.weight, a.fiber))
            .collect();
        Ok(Arc::new(AtomicSpace::build(&descs)?))
    }

    fn blocks_to_field(
        blocks: &FieldBlocks,
        space: &Arc<AtomicSpace>,
        scale: usize,
    ) -> Result<MatrixField> {
        let amplified = if scale == 1 {
            space.clone()
        } else {
            Arc::new(space.amplified(scale)?)
        };
        let mut out: Vec<Option<CMat>> = vec![None; amplified.len()];
        for (label, mat) in blocks {
            let idx = amplified.atom_index(label).ok_or_else(|| {
                SidError::InvalidInput(format!("block references unknown atom `{label}`"))
            })?;
            out[idx] = Some(decode_matrix(mat)?);
        }
        MatrixField::new(amplified, out)
    }

    pub fn field(&self, name: &str) -> Result<MatrixField> {
        let space = self.to_space()?;
        let blocks = self
            .fields
            .get(name)
            .ok_or_else(|| SidError::InvalidInput(format!("no field named `{name}`")))?;
        Self::blocks_to_field(blocks, &space, 1)
    }

    pub fn idempotent(
        &self,
        name: &str,
        operator: &MatrixField,
        tol: &Tolerances,
    ) -> Result<IdempotentField> {
        let doc = self
            .idempotents
            .get(name)
            .ok_or_else(|| SidError::InvalidInput(format!("no idempotent named `{name}`")))?;
        let space = self.to_space()?;
        let field = Self::blocks_to_field(&doc.blocks, &space, doc.m)?;
        IdempotentField::new(field, Ambient::new(operator.clone(), doc.m), tol)
    }

    pub fn family(
        &self,
        name: &str,
        operator: &MatrixField,
        tol: &Tolerances,
    ) -> Result<Vec<IdempotentField>> {
        let doc = self
            .families
            .get(name)
            .ok_or_else(|| SidError::InvalidInput(format!("no family named `{name}`")))?;
        let space = self.to_space()?;
        doc.members
            .iter()
            .map(|blocks| {
                let field = Self::blocks_to_field(blocks, &space, doc.m)?;
                IdempotentField::new(field, Ambient::new(operator.clone(), doc.m), tol)
            })
            .collect()
    }

    pub fn insert_field(&mut self, name: &str, field: &MatrixField) {
        self.fields.insert(name.to_string(), encode_field(field));
    }

    pub fn insert_idempotent(&mut self, name: &str, field: &MatrixField, m: usize) {
        self.idempotents.insert(
            name.to_string(),
            IdempotentDoc {
                m,
                blocks: encode_field(field),
            },
        );
    }

    pub fn insert_family(&mut self, name: &str, members: &[MatrixField], m: usize) {
        self.families.insert(
            name.to_string(),
            FamilyDoc {
                m,
                members: members.iter().map(encode_field).collect(),
            },
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "space": {"atoms": [
            {"label": "a", "weight": 1.0, "fiber_dim": 2},
            {"label": "w", "weight": 0.5, "fiber_dim": "inf"}
        ]},
        "fields": {"T": {"a": [[[0.5, 0.0], [1.0, -0.25]], [[0.0, 0.0], [0.5, 0.0]]]}}
    }"#;

    #[test]
    fn parses_the_schema_example() {
        let doc: Document = serde_json::from_str(SAMPLE).unwrap();
        assert_eq!(doc.schema_version, "1");
        let space = doc.to_space().unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.atoms()[1].fiber, FiberDim::Infinite);
        let t = doc.field("T").unwrap();
        let b = t.block(0).unwrap();
        assert_eq!(b[(0, 1)], c64(1.0, -0.25));
        assert!(t.block(1).is_none());
    }

    #[test]
    fn unknown_fiber_tag_is_rejected() {
        let bad = SAMPLE.replace("\"inf\"", "\"huge\"");
        let doc: Document = serde_json::from_str(&bad).unwrap();
        assert!(doc.to_space().is_err());
    }

    #[test]
    fn field_encode_decode_roundtrip() {
        let doc: Document = serde_json::from_str(SAMPLE).unwrap();
        let t = doc.field("T").unwrap();
        let mut again = Document::new(doc.to_space().unwrap().as_ref());
        again.insert_field("T", &t);
        let t2 = again.field("T").unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn deterministic_serialization() {
        let doc: Document = serde_json::from_str(SAMPLE).unwrap();
        assert_eq!(doc.to_json().unwrap(), doc.to_json().unwrap());
    }

    #[test]
    fn missing_field_name_is_an_error() {
        let doc: Document = serde_json::from_str(SAMPLE).unwrap();
        assert!(matches!(doc.field("S"), Err(SidError::InvalidInput(_))));
    }
}
