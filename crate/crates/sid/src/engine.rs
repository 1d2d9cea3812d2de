//! Multiplicity profiles and the uniqueness verdict for strongly irreducible
//! decompositions.
//!
//! In the atomic model the multiplicity of a spectrum point is the number of
//! atoms in a dimension class sharing that diagonal value, and the
//! decomposition is unique up to similarity exactly when every class has
//! finite multiplicities — equivalently, when no atom carries an
//! infinite-dimensional fiber.

use crate::commutant::spectral_classes;
use crate::error::{Result, SidError};
use crate::field::{validate_si_form, MatrixField};
use crate::jordan::si_test_superdiagonal;
use crate::ktheory::{k0_descriptor, K0Descriptor};
use crate::linalg::C64;
use crate::spectral::{cluster_scalars, max_abs};
use crate::space::FiberDim;
use crate::tol::Tolerances;

/// Multiplicities of one dimension class: counts per spectrum point for
/// finite fibers, a symbolic marker for the infinite class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMultiplicity {
    pub fiber: FiberDim,
    /// Spectrum point and the number of atoms carrying it.
    pub entries: Vec<(C64, usize)>,
    /// True exactly for the class of infinite-dimensional atoms, which
    /// contributes the symbolic infinite multiplicity.
    pub has_infinite: bool,
    pub atom_labels: Vec<String>,
}

/// The characteristic data of the decomposition: per-class multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityProfile {
    pub classes: Vec<ClassMultiplicity>,
    /// True iff every class carries only finite multiplicities.
    pub is_simple: bool,
}

/// Per-class justification attached to a verdict.
#[derive(Debug, Clone)]
pub struct ClassReason {
    pub fiber: FiberDim,
    pub simple: bool,
    pub reason: String,
}

/// The uniqueness decision, cross-linked with the K0 shape that witnesses
/// the same dichotomy.
#[derive(Debug, Clone)]
pub struct UniquenessVerdict {
    pub unique: bool,
    pub reasons: Vec<ClassReason>,
    pub k0_shape: K0Descriptor,
}

/// One independent sub-problem after splitting along dimension classes.
#[derive(Debug, Clone)]
pub struct ClassProblem {
    pub fiber: FiberDim,
    pub atom_indices: Vec<usize>,
    pub field: MatrixField,
}

/// Counts atoms per spectrum point inside each dimension class.
pub fn multiplicity_profile(t: &MatrixField, tol: &Tolerances) -> Result<MultiplicityProfile> {
    let form = validate_si_form(t, tol)?;
    let all_phis: Vec<C64> = form.phi_values().iter().map(|(_, v)| *v).collect();
    let threshold = tol.spec_threshold(max_abs(&all_phis));
    let mut classes = Vec::new();
    let mut is_simple = true;
    for class in t.space().dimension_classes() {
        let atom_labels: Vec<String> = class
            .atom_indices
            .iter()
            .map(|&i| t.space().atoms()[i].label.clone())
            .collect();
        match class.fiber {
            FiberDim::Infinite => {
                is_simple = false;
                classes.push(ClassMultiplicity {
                    fiber: class.fiber,
                    entries: Vec::new(),
                    has_infinite: true,
                    atom_labels,
                });
            }
            FiberDim::Finite(_) => {
                let phis: Vec<C64> = class
                    .atom_indices
                    .iter()
                    .map(|&i| form.phi(i).expect("finite atom"))
                    .collect();
                let clusters = cluster_scalars(&phis, threshold)?;
                classes.push(ClassMultiplicity {
                    fiber: class.fiber,
                    entries: clusters
                        .iter()
                        .map(|c| (c.representative, c.members.len()))
                        .collect(),
                    has_infinite: false,
                    atom_labels,
                });
            }
        }
    }
    Ok(MultiplicityProfile { classes, is_simple })
}

/// True iff the spectrum-point sets of distinct finite dimension classes are
/// pairwise disjoint; gaps inside the refusal band are an error.
pub fn check_mutual_singularity(t: &MatrixField, tol: &Tolerances) -> Result<bool> {
    let profile = multiplicity_profile(t, tol)?;
    let finite: Vec<&ClassMultiplicity> = profile
        .classes
        .iter()
        .filter(|c| c.fiber.is_finite())
        .collect();
    let all: Vec<C64> = finite
        .iter()
        .flat_map(|c| c.entries.iter().map(|(p, _)| *p))
        .collect();
    let threshold = tol.spec_threshold(max_abs(&all));
    for a in 0..finite.len() {
        for b in (a + 1)..finite.len() {
            for (pa, _) in &finite[a].entries {
                for (pb, _) in &finite[b].entries {
                    let gap = (pa - pb).norm();
                    if gap <= threshold {
                        return Ok(false);
                    }
                    if gap <= 10.0 * threshold {
                        return Err(SidError::SpectralClusteringAmbiguous {
                            gap,
                            tol: threshold,
                            band: 10.0 * threshold,
                        });
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Decides uniqueness of the strongly irreducible decomposition: the input
/// must be per-atom strongly irreducible, and with several dimension classes
/// their spectral supports must be mutually singular — otherwise the theorem
/// does not apply and no verdict is fabricated.
pub fn decide_uniqueness(t: &MatrixField, tol: &Tolerances) -> Result<UniquenessVerdict> {
    let form = validate_si_form(t, tol).map_err(|e| match e {
        SidError::NotUpperTriangular { atom, residual } => SidError::NotSIForm(format!(
            "atom `{atom}` not upper triangular ({residual:.3e})"
        )),
        SidError::DiagonalNotConstant { atom, deviation } => SidError::NotSIForm(format!(
            "atom `{atom}` has non-constant diagonal ({deviation:.3e})"
        )),
        other => other,
    })?;
    let verdict = si_test_superdiagonal(&form, tol);
    if !verdict.overall {
        let bad: Vec<String> = verdict.witnesses.iter().map(|w| w.atom.clone()).collect();
        return Err(SidError::NotSIForm(format!(
            "superdiagonal criterion fails on atoms: {}",
            bad.join(", ")
        )));
    }
    let finite_classes = t
        .space()
        .dimension_classes()
        .iter()
        .filter(|c| c.fiber.is_finite())
        .count();
    if finite_classes >= 2 && !check_mutual_singularity(t, tol)? {
        return Err(SidError::HypothesisUnsupported(
            "spectral supports of distinct dimension classes are not mutually singular".into(),
        ));
    }
    let profile = multiplicity_profile(t, tol)?;
    let k0_shape = k0_descriptor(t, tol)?;
    let reasons = profile
        .classes
        .iter()
        .map(|c| {
            if c.has_infinite {
                ClassReason {
                    fiber: c.fiber,
                    simple: false,
                    reason: "infinite-dimensional fiber class has nonzero mass".into(),
                }
            } else {
                let max_mult = c.entries.iter().map(|(_, m)| *m).max().unwrap_or(0);
                ClassReason {
                    fiber: c.fiber,
                    simple: true,
                    reason: format!(
                        "simple multiplicity ({} spectrum points, largest multiplicity {})",
                        c.entries.len(),
                        max_mult
                    ),
                }
            }
        })
        .collect();
    let unique = profile.is_simple;
    debug_assert_eq!(unique, k0_shape.infinite_classes.is_empty());
    Ok(UniquenessVerdict {
        unique,
        reasons,
        k0_shape,
    })
}

/// Splits the field into independent per-dimension-class sub-problems. The
/// split is only valid under mutual singularity.
pub fn split_commutant_by_class(t: &MatrixField, tol: &Tolerances) -> Result<Vec<ClassProblem>> {
    let finite_classes = t
        .space()
        .dimension_classes()
        .iter()
        .filter(|c| c.fiber.is_finite())
        .count();
    if finite_classes >= 2 && !check_mutual_singularity(t, tol)? {
        return Err(SidError::HypothesisUnsupported(
            "spectral supports of distinct dimension classes are not mutually singular".into(),
        ));
    }
    t.space()
        .dimension_classes()
        .iter()
        .map(|c| {
            Ok(ClassProblem {
                fiber: c.fiber,
                atom_indices: c.atom_indices.clone(),
                field: t.restrict(&c.atom_indices)?,
            })
        })
        .collect()
}

/// Consistency between the verdict and the commutant's spectral classes:
/// the K0 rank equals the number of spectral classes.
pub fn verify_spectral_class_count(t: &MatrixField, tol: &Tolerances) -> Result<bool> {
    let form = validate_si_form(t, tol)?;
    let classes = spectral_classes(&form, tol)?;
    let d = k0_descriptor(t, tol)?;
    Ok(classes.len() == d.group_rank)
}
