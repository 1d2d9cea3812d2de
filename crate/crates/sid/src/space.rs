//! Atomic measure spaces: finitely many weighted atoms standing in for a
//! partitioned measure space, with atoms grouped into dimension classes by
//! fiber dimension.

use std::fmt;

use crate::error::{Result, SidError};

/// Fiber dimension of an atom: a finite matrix size, or the symbolic tag for
/// an infinite-dimensional fiber that carries no matrix data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FiberDim {
    Finite(usize),
    Infinite,
}

impl FiberDim {
    pub fn is_finite(self) -> bool {
        matches!(self, FiberDim::Finite(_))
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            FiberDim::Finite(n) => Some(n),
            FiberDim::Infinite => None,
        }
    }
}

impl fmt::Display for FiberDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberDim::Finite(n) => write!(f, "{n}"),
            FiberDim::Infinite => write!(f, "inf"),
        }
    }
}

/// One cell of the partitioned measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub label: String,
    pub weight: f64,
    pub fiber: FiberDim,
}

/// Atoms of one dimension class, in atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionClass {
    pub fiber: FiberDim,
    pub atom_indices: Vec<usize>,
}

/// An ordered list of atoms with derived dimension classes. Atom order is the
/// insertion order and is the canonical ordering for all block layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSpace {
    atoms: Vec<Atom>,
    classes: Vec<DimensionClass>,
    /// Records how many direct-sum copies this space is an amplification of
    /// (1 for a base space). Kept so the block structure of `M_m({T}')` stays
    /// recoverable after `amplify`.
    amplification: usize,
}

impl AtomicSpace {
    /// Validates atom descriptions and computes the dimension classes.
    pub fn build(descriptions: &[(String, f64, FiberDim)]) -> Result<AtomicSpace> {
        let atoms: Vec<Atom> = descriptions
            .iter()
            .map(|(label, weight, fiber)| Atom {
                label: label.clone(),
                weight: *weight,
                fiber: *fiber,
            })
            .collect();
        Self::from_atoms(atoms, 1)
    }

    pub(crate) fn from_atoms(atoms: Vec<Atom>, amplification: usize) -> Result<AtomicSpace> {
        if atoms.is_empty() {
            return Err(SidError::EmptySpace);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0.0f64;
        for a in &atoms {
            if !seen.insert(a.label.clone()) {
                return Err(SidError::DuplicateLabel(a.label.clone()));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(SidError::NonpositiveWeight {
                    label: a.label.clone(),
                    weight: a.weight,
                });
            }
            if let FiberDim::Finite(0) = a.fiber {
                return Err(SidError::InvalidInput(format!(
                    "atom `{}` has fiber dimension 0",
                    a.label
                )));
            }
            total += a.weight;
        }
        if !total.is_finite() {
            return Err(SidError::InvalidInput("total weight overflows".into()));
        }
        let classes = derive_classes(&atoms);
        Ok(AtomicSpace {
            atoms,
            classes,
            amplification,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_index(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.label == label)
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Dimension classes in ascending fiber order, the infinite class last.
    pub fn dimension_classes(&self) -> &[DimensionClass] {
        &self.classes
    }

    pub fn amplification(&self) -> usize {
        self.amplification
    }

    pub fn finite_atom_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.fiber.is_finite())
            .map(|(i, _)| i)
    }

    pub fn has_infinite_atoms(&self) -> bool {
        self.atoms.iter().any(|a| !a.fiber.is_finite())
    }

    /// The space carrying `m`-fold amplified fibers.
    pub fn amplified(&self, m: usize) -> Result<AtomicSpace> {
        if m == 0 {
            return Err(SidError::InvalidInput("amplification must be >= 1".into()));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                label: a.label.clone(),
                weight: a.weight,
                fiber: match a.fiber {
                    FiberDim::Finite(n) => FiberDim::Finite(n * m),
                    FiberDim::Infinite => FiberDim::Infinite,
                },
            })
            .collect();
        Self::from_atoms(atoms, self.amplification * m)
    }

    /// The sub-space made of the given atoms (order preserved).
    pub fn subspace(&self, indices: &[usize]) -> Result<AtomicSpace> {
        let atoms = indices.iter().map(|&i| self.atoms[i].clone()).collect();
        Self::from_atoms(atoms, self.amplification)
    }
}

fn derive_classes(atoms: &[Atom]) -> Vec<DimensionClass> {
    let mut dims: Vec<FiberDim> = atoms.iter().map(|a| a.fiber).collect();
    dims.sort();
    dims.dedup();
    dims.into_iter()
        .map(|fiber| DimensionClass {
            fiber,
            atom_indices: atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| a.fiber == fiber)
                .map(|(i, _)| i)
                .collect(),
        })
        .collect()
}

/// Convenience wrapper matching the `(label, weight, fiber_dim)` description
/// list shape used by the JSON schema.
pub fn build_space(descriptions: &[(&str, f64, FiberDim)]) -> Result<AtomicSpace> {
    let owned: Vec<(String, f64, FiberDim)> = descriptions
        .iter()
        .map(|(l, w, f)| (l.to_string(), *w, *f))
        .collect();
    AtomicSpace::build(&owned)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_single_class() {
        let s = build_space(&[("a", 1.0, FiberDim::Finite(2))]).unwrap();
        assert_eq!(s.dimension_classes().len(), 1);
        assert_eq!(s.dimension_classes()[0].atom_indices, vec![0]);
    }

    #[test]
    fn groups_by_dimension() {
        let s = build_space(&[
            ("a", 0.5, FiberDim::Finite(2)),
            ("b", 0.5, FiberDim::Finite(3)),
        ])
        .unwrap();
        let classes = s.dimension_classes();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].fiber, FiberDim::Finite(2));
        assert_eq!(classes[0].atom_indices, vec![0]);
        assert_eq!(classes[1].atom_indices, vec![1]);
    }

    #[test]
    fn duplicate_label_rejected() {
        let err = build_space(&[
            ("a", 1.0, FiberDim::Finite(2)),
            ("a", 1.0, FiberDim::Finite(2)),
        ])
        .unwrap_err();
        assert!(matches!(err, SidError::DuplicateLabel(_)));
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let err = build_space(&[("a", 0.0, FiberDim::Finite(2))]).unwrap_err();
        assert!(matches!(err, SidError::NonpositiveWeight { .. }));
        let err = build_space(&[]).unwrap_err();
        assert!(matches!(err, SidError::EmptySpace));
    }

    #[test]
    fn infinite_atoms_form_their_own_class() {
        let s = build_space(&[
            ("a", 1.0, FiberDim::Finite(2)),
            ("w", 1.0, FiberDim::Infinite),
            ("b", 1.0, FiberDim::Finite(2)),
        ])
        .unwrap();
        let classes = s.dimension_classes();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[1].fiber, FiberDim::Infinite);
        assert_eq!(classes[1].atom_indices, vec![1]);
        assert!(s.has_infinite_atoms());
    }

    #[test]
    fn amplified_space_scales_fibers_and_tracks_m() {
        let s = build_space(&[
            ("a", 1.0, FiberDim::Finite(2)),
            ("w", 1.0, FiberDim::Infinite),
        ])
        .unwrap();
        let amp = s.amplified(3).unwrap();
        assert_eq!(amp.atoms()[0].fiber, FiberDim::Finite(6));
        assert_eq!(amp.atoms()[1].fiber, FiberDim::Infinite);
        assert_eq!(amp.amplification(), 3);
    }
}
