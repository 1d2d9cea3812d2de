//! Piecewise-constant matrix fields over an atomic space, and the upper
//! triangular normal form with constant diagonal per atom.

use std::sync::Arc;

use crate::error::{Result, SidError};
use crate::linalg::{
    all_finite, c64, fnorm, guarded_inverse, max_lower_triangular, strict_upper_part, C64, CMat,
};
use crate::space::AtomicSpace;
use crate::tol::Tolerances;

/// A complex square matrix per finite atom; infinite-dimensional atoms carry
/// no block and stay symbolic. All values are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    space: Arc<AtomicSpace>,
    blocks: Vec<Option<CMat>>,
}

impl MatrixField {
    /// Builds a field from per-atom blocks, checking dimensions and finiteness.
    /// Every finite atom must carry a block; infinite atoms must not.
    pub fn new(space: Arc<AtomicSpace>, blocks: Vec<Option<CMat>>) -> Result<MatrixField> {
        if blocks.len() != space.len() {
            return Err(SidError::InvalidInput(format!(
                "{} blocks supplied for {} atoms",
                blocks.len(),
                space.len()
            )));
        }
        for (atom, block) in space.atoms().iter().zip(&blocks) {
            match (atom.fiber.finite(), block) {
                (Some(n), Some(b)) => {
                    if b.nrows() != n || b.ncols() != n {
                        return Err(SidError::InvalidInput(format!(
                            "block on atom `{}` is {}x{}, expected {}x{}",
                            atom.label,
                            b.nrows(),
                            b.ncols(),
                            n,
                            n
                        )));
                    }
                    if !all_finite(b) {
                        return Err(SidError::InvalidInput(format!(
                            "block on atom `{}` has non-finite entries",
                            atom.label
                        )));
                    }
                }
                (Some(_), None) => {
                    return Err(SidError::InvalidInput(format!(
                        "finite atom `{}` is missing its block",
                        atom.label
                    )))
                }
                (None, Some(_)) => return Err(SidError::SymbolicFiber(atom.label.clone())),
                (None, None) => {}
            }
        }
        Ok(MatrixField { space, blocks })
    }

    /// The identity field: `I_n` on every finite atom.
    pub fn identity(space: Arc<AtomicSpace>) -> MatrixField {
        let blocks = space
            .atoms()
            .iter()
            .map(|a| a.fiber.finite().map(|n| CMat::identity(n, n)))
            .collect();
        MatrixField { space, blocks }
    }

    pub fn space(&self) -> &Arc<AtomicSpace> {
        &self.space
    }

    pub fn block(&self, atom: usize) -> Option<&CMat> {
        self.blocks.get(atom).and_then(|b| b.as_ref())
    }

    /// Block on a finite atom, or the symbolic-fiber error.
    pub fn expect_block(&self, atom: usize) -> Result<&CMat> {
        self.block(atom)
            .ok_or_else(|| SidError::SymbolicFiber(self.space.atoms()[atom].label.clone()))
    }

    pub fn blocks(&self) -> &[Option<CMat>] {
        &self.blocks
    }

    fn same_space(&self, other: &MatrixField) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(SidError::SpaceMismatch)
        }
    }

    fn zip_blocks(
        &self,
        other: &MatrixField,
        f: impl Fn(&CMat, &CMat) -> CMat,
    ) -> Result<MatrixField> {
        self.same_space(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(f(a, b)),
                _ => None,
            })
            .collect();
        Ok(MatrixField {
            space: self.space.clone(),
            blocks,
        })
    }

    /// Atomwise product.
    pub fn mul(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_blocks(other, |a, b| a * b)
    }

    /// Atomwise sum.
    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_blocks(other, |a, b| a + b)
    }

    /// Atomwise difference.
    pub fn sub(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_blocks(other, |a, b| a - b)
    }

    /// Atomwise scalar multiple.
    pub fn scale(&self, c: C64) -> MatrixField {
        MatrixField {
            space: self.space.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| b.as_ref().map(|m| m * c))
                .collect(),
        }
    }

    /// Atomwise conjugate transpose.
    pub fn adjoint(&self) -> MatrixField {
        MatrixField {
            space: self.space.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| b.as_ref().map(|m| m.adjoint()))
                .collect(),
        }
    }

    /// Atomwise inverse with a singularity guard; per-atom condition numbers
    /// are recorded alongside the inverse field.
    pub fn inverse(&self, tol: &Tolerances) -> Result<InvertedField> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut condition = Vec::with_capacity(self.blocks.len());
        for (idx, b) in self.blocks.iter().enumerate() {
            match b {
                Some(m) => {
                    let (inv, cond) = guarded_inverse(m, tol.tol_sing).map_err(|e| match e {
                        SidError::SingularBlock { condition, .. } => SidError::SingularBlock {
                            atom: self.space.atoms()[idx].label.clone(),
                            condition,
                        },
                        other => other,
                    })?;
                    blocks.push(Some(inv));
                    condition.push(cond);
                }
                None => {
                    blocks.push(None);
                    condition.push(f64::NAN);
                }
            }
        }
        Ok(InvertedField {
            field: MatrixField {
                space: self.space.clone(),
                blocks,
            },
            condition,
        })
    }

    /// The m-fold amplification: each block becomes the m-fold block-diagonal
    /// copy and the space records the amplification.
    pub fn amplify(&self, m: usize) -> Result<MatrixField> {
        let space = Arc::new(self.space.amplified(m)?);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                b.as_ref().map(|mat| {
                    let n = mat.nrows();
                    let mut out = CMat::zeros(n * m, n * m);
                    for k in 0..m {
                        out.view_mut((k * n, k * n), (n, n)).copy_from(mat);
                    }
                    out
                })
            })
            .collect();
        Ok(MatrixField { space, blocks })
    }

    /// Largest per-atom Frobenius norm.
    pub fn norm_max(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(fnorm)
            .fold(0.0, f64::max)
    }

    /// Largest per-atom Frobenius distance to `other`.
    pub fn distance(&self, other: &MatrixField) -> Result<f64> {
        let diff = self.sub(other)?;
        Ok(diff.norm_max())
    }

    /// Restriction to a subset of atoms (order preserved).
    pub fn restrict(&self, indices: &[usize]) -> Result<MatrixField> {
        let space = Arc::new(self.space.subspace(indices)?);
        let blocks = indices.iter().map(|&i| self.blocks[i].clone()).collect();
        MatrixField::new(space, blocks)
    }
}

/// Atomwise inverse plus the per-atom condition numbers that were observed
/// while computing it (NaN on symbolic atoms).
#[derive(Debug, Clone)]
pub struct InvertedField {
    pub field: MatrixField,
    pub condition: Vec<f64>,
}

/// The validated upper triangular normal form: on each finite atom the block
/// is `phi * I + strict_upper` with a constant diagonal value `phi`.
#[derive(Debug, Clone)]
pub struct SITriangularForm {
    base: MatrixField,
    diagonal: Vec<Option<C64>>,
    strict_upper: Vec<Option<CMat>>,
}

impl SITriangularForm {
    /// Checks that every finite block is upper triangular with a constant
    /// diagonal (within `tol_diag`, relative to the block norm) and splits it
    /// into the scalar diagonal and the strictly upper part. The diagonal
    /// value is the mean of the diagonal entries.
    pub fn validate(field: &MatrixField, tol: &Tolerances) -> Result<SITriangularForm> {
        let mut diagonal = Vec::with_capacity(field.blocks().len());
        let mut strict_upper = Vec::with_capacity(field.blocks().len());
        for (idx, block) in field.blocks().iter().enumerate() {
            let label = || field.space().atoms()[idx].label.clone();
            match block {
                None => {
                    diagonal.push(None);
                    strict_upper.push(None);
                }
                Some(b) => {
                    let scale = 1.0 + fnorm(b);
                    let lower = max_lower_triangular(b);
                    if lower > tol.tol_diag * scale {
                        return Err(SidError::NotUpperTriangular {
                            atom: label(),
                            residual: lower,
                        });
                    }
                    let n = b.nrows();
                    // bitwise-equal diagonals take the entry itself, so the
                    // reconstruction stays exact; the mean only matters for
                    // inputs with round-off on the diagonal
                    let first = b[(0, 0)];
                    let mean = if b.diagonal().iter().all(|d| *d == first) {
                        first
                    } else {
                        b.diagonal().iter().sum::<C64>() / c64(n as f64, 0.0)
                    };
                    let dev = b
                        .diagonal()
                        .iter()
                        .map(|d| (d - mean).norm())
                        .fold(0.0, f64::max);
                    if dev > tol.tol_diag * scale {
                        return Err(SidError::DiagonalNotConstant {
                            atom: label(),
                            deviation: dev,
                        });
                    }
                    diagonal.push(Some(mean));
                    strict_upper.push(Some(strict_upper_part(b)));
                }
            }
        }
        Ok(SITriangularForm {
            base: field.clone(),
            diagonal,
            strict_upper,
        })
    }

    pub fn base(&self) -> &MatrixField {
        &self.base
    }

    pub fn space(&self) -> &Arc<AtomicSpace> {
        self.base.space()
    }

    /// Constant diagonal value on a finite atom.
    pub fn phi(&self, atom: usize) -> Option<C64> {
        self.diagonal.get(atom).copied().flatten()
    }

    /// Strictly upper part on a finite atom.
    pub fn nilpotent_part(&self, atom: usize) -> Option<&CMat> {
        self.strict_upper.get(atom).and_then(|m| m.as_ref())
    }

    /// Exact reconstruction `phi * I + strict_upper` per atom.
    pub fn reconstruct(&self) -> MatrixField {
        let blocks = self
            .diagonal
            .iter()
            .zip(&self.strict_upper)
            .map(|(d, u)| match (d, u) {
                (Some(phi), Some(up)) => {
                    let n = up.nrows();
                    Some(CMat::identity(n, n) * *phi + up)
                }
                _ => None,
            })
            .collect();
        MatrixField {
            space: self.base.space().clone(),
            blocks,
        }
    }

    /// Distinct `phi` values paired with their atom indices, finite atoms only.
    pub fn phi_values(&self) -> Vec<(usize, C64)> {
        self.diagonal
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|v| (i, v)))
            .collect()
    }
}

/// Convenience free functions mirroring the operation names of the data model.
pub fn validate_si_form(field: &MatrixField, tol: &Tolerances) -> Result<SITriangularForm> {
    SITriangularForm::validate(field, tol)
}
