//! K0 invariants of the commutant via the normalized-trace class map.
//!
//! Over an atomic space the K0 group of the commutant of a per-atom strongly
//! irreducible operator is the free abelian group on the distinct diagonal
//! values: an idempotent's class is the integer-valued function
//! `t -> Tr(P(atom)) / n` on the spectrum points, and two idempotents are
//! similar in the commutant iff their classes agree.

use crate::error::{Result, SidError};
use crate::field::{validate_si_form, MatrixField};
use crate::idempotent::IdempotentField;
use crate::jordan::si_test_superdiagonal;
use crate::linalg::C64;
use crate::spectral::{cluster_scalars, max_abs};
use crate::tol::Tolerances;

/// Integer rounding gate: computed traces farther than this from an integer
/// certify an invariant violation upstream and are never silently rounded.
pub const INTEGER_GATE: f64 = 1e-6;

/// The K0 class of one idempotent: an integer per spectrum point.
#[derive(Debug, Clone, PartialEq)]
pub struct K0Class {
    /// Distinct spectrum points, sorted by real then imaginary part.
    pub support: Vec<C64>,
    /// Normalized traces at the matching support points.
    pub values: Vec<i64>,
}

/// A dimension class that contributes nothing to K0.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroContributionClass {
    pub atoms: Vec<String>,
    /// Always true in this model: infinite-dimensional fibers contribute the
    /// zero group.
    pub contribution_zero: bool,
}

/// Shape of `K0({T}')`: the free abelian group on the spectrum support.
#[derive(Debug, Clone, PartialEq)]
pub struct K0Descriptor {
    pub spectrum_support: Vec<C64>,
    /// `K0 ~ Z^k` with `k = spectrum_support.len()`.
    pub group_rank: usize,
    /// Indicator class of each support point, in support order.
    pub generators: Vec<K0Class>,
    pub infinite_classes: Vec<ZeroContributionClass>,
}

/// Normalized-trace class of an idempotent over an amplification: for each
/// spectrum point, `Tr(P(atom)) / n` on the atoms carrying that point. All
/// atoms of a point must agree, and the value must be an integer within the
/// rounding gate.
pub fn trace_class(p: &IdempotentField, tol: &Tolerances) -> Result<K0Class> {
    let base = &p.ambient.operator;
    let form = validate_si_form(base, tol)?;
    let pairs = form.phi_values();
    let values: Vec<C64> = pairs.iter().map(|(_, v)| *v).collect();
    let clusters = cluster_scalars(&values, tol.spec_threshold(max_abs(&values)))?;

    let mut support = Vec::with_capacity(clusters.len());
    let mut ints = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let mut value: Option<(f64, i64)> = None;
        for &k in &cluster.members {
            let atom_idx = pairs[k].0;
            let n = base.space().atoms()[atom_idx]
                .fiber
                .finite()
                .expect("finite atom") as f64;
            let block = p.field.expect_block(atom_idx)?;
            let tr: C64 = block.diagonal().iter().sum();
            if tr.im.abs() > INTEGER_GATE * n {
                return Err(SidError::NonIntegerClass {
                    value: tr.im / n,
                    gate: INTEGER_GATE,
                });
            }
            let v = tr.re / n;
            let rounded = v.round();
            if (v - rounded).abs() > INTEGER_GATE {
                return Err(SidError::NonIntegerClass {
                    value: v,
                    gate: INTEGER_GATE,
                });
            }
            match value {
                None => value = Some((v, rounded as i64)),
                Some((prev, prev_int)) => {
                    if prev_int != rounded as i64 {
                        return Err(SidError::InconsistentTrace {
                            point: format!("{:.6}+{:.6}i", cluster.representative.re, cluster.representative.im),
                            a: prev,
                            b: v,
                        });
                    }
                }
            }
        }
        support.push(cluster.representative);
        ints.push(value.expect("nonempty cluster").1);
    }
    Ok(K0Class {
        support,
        values: ints,
    })
}

/// The K0 descriptor of the commutant of a per-atom strongly irreducible
/// triangular field: the free abelian group on the distinct diagonal values,
/// with infinite-dimensional classes flagged as zero contributions.
pub fn k0_descriptor(t: &MatrixField, tol: &Tolerances) -> Result<K0Descriptor> {
    let form = validate_si_form(t, tol)?;
    let verdict = si_test_superdiagonal(&form, tol);
    if !verdict.overall {
        let bad: Vec<String> = verdict.witnesses.iter().map(|w| w.atom.clone()).collect();
        return Err(SidError::NotSIForm(format!(
            "superdiagonal criterion fails on atoms: {}",
            bad.join(", ")
        )));
    }
    let pairs = form.phi_values();
    let values: Vec<C64> = pairs.iter().map(|(_, v)| *v).collect();
    let clusters = if values.is_empty() {
        Vec::new()
    } else {
        cluster_scalars(&values, tol.spec_threshold(max_abs(&values)))?
    };
    let support: Vec<C64> = clusters.iter().map(|c| c.representative).collect();
    let generators = (0..support.len())
        .map(|i| K0Class {
            support: support.clone(),
            values: (0..support.len()).map(|j| i64::from(j == i)).collect(),
        })
        .collect();
    let infinite_classes = t
        .space()
        .dimension_classes()
        .iter()
        .filter(|c| !c.fiber.is_finite())
        .map(|c| ZeroContributionClass {
            atoms: c
                .atom_indices
                .iter()
                .map(|&i| t.space().atoms()[i].label.clone())
                .collect(),
            contribution_zero: true,
        })
        .collect();
    Ok(K0Descriptor {
        group_rank: support.len(),
        spectrum_support: support,
        generators,
        infinite_classes,
    })
}

/// Two idempotents over amplifications of the same base operator are equal
/// in K0 iff their trace classes agree.
pub fn k0_equal(p: &IdempotentField, q: &IdempotentField, tol: &Tolerances) -> Result<bool> {
    if !p.ambient.same_base(&q.ambient) {
        return Err(SidError::DifferentBaseOperator);
    }
    let a = trace_class(p, tol)?;
    let b = trace_class(q, tol)?;
    if a.support.len() != b.support.len() {
        return Ok(false);
    }
    let scale = tol.spec_threshold(max_abs(&a.support));
    Ok(a
        .support
        .iter()
        .zip(&b.support)
        .all(|(x, y)| (x - y).norm() <= scale)
        && a.values == b.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idempotent::Ambient;
    use crate::linalg::{c64, kron, CMat};
    use crate::space::{AtomicSpace, FiberDim};
    use std::sync::Arc;

    fn tolerances() -> Tolerances {
        Tolerances::default()
    }

    /// the discretized two-by-two triangular operator with distinct real
    /// diagonal values in [0, 1] and nonvanishing superdiagonal
    fn discretized_operator(k: usize) -> MatrixField {
        let descs: Vec<(String, f64, FiberDim)> = (0..k)
            .map(|i| (format!("t{i}"), 1.0 / k as f64, FiberDim::Finite(2)))
            .collect();
        let space = Arc::new(AtomicSpace::build(&descs).unwrap());
        let blocks = (0..k)
            .map(|i| {
                let z = c64((i as f64 + 0.5) / k as f64, 0.0);
                let psi = c64(1.0 + 0.1 * i as f64, 0.3);
                Some(CMat::from_row_slice(2, 2, &[z, psi, C64::default(), z]))
            })
            .collect();
        MatrixField::new(space, blocks).unwrap()
    }

    fn indicator_projection(t: &MatrixField, m: usize, ranks: &[usize]) -> IdempotentField {
        let amp_space = t.amplify(m).unwrap().space().clone();
        let blocks = t
            .space()
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.fiber.finite().map(|n| {
                    let mut pat = CMat::zeros(m, m);
                    for d in 0..ranks[i] {
                        pat[(d, d)] = c64(1.0, 0.0);
                    }
                    kron(&pat, &CMat::identity(n, n))
                })
            })
            .collect();
        let f = MatrixField::new(amp_space, blocks).unwrap();
        IdempotentField::new(f, Ambient::new(t.clone(), m), &tolerances()).unwrap()
    }

    #[test]
    fn zero_idempotent_has_zero_class() {
        let t = discretized_operator(3);
        let p = indicator_projection(&t, 1, &[0, 0, 0]);
        let class = trace_class(&p, &tolerances()).unwrap();
        assert_eq!(class.values, vec![0, 0, 0]);
    }

    #[test]
    fn indicator_pattern_class_matches_support() {
        // chi_S diagonal pattern: value one exactly on the atoms of S
        let t = discretized_operator(3);
        let p = indicator_projection(&t, 1, &[1, 0, 1]);
        let class = trace_class(&p, &tolerances()).unwrap();
        assert_eq!(class.values, vec![1, 0, 1]);
    }

    #[test]
    fn block_display_counts_nested_supports() {
        // over an amplification the value at a point counts the slots whose
        // support contains it
        let t = discretized_operator(2);
        let p = indicator_projection(&t, 3, &[2, 1]);
        let class = trace_class(&p, &tolerances()).unwrap();
        assert_eq!(class.values, vec![2, 1]);
    }

    #[test]
    fn additive_on_orthogonal_idempotents() {
        let t = discretized_operator(3);
        let m = 3;
        let p = indicator_projection(&t, m, &[1, 0, 2]);
        // orthogonal complement pattern inside the remaining slots
        let amp_space = t.amplify(m).unwrap().space().clone();
        let blocks = t
            .space()
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.fiber.finite().map(|n| {
                    let mut pat = CMat::zeros(m, m);
                    let lo = [1usize, 0, 2][i];
                    let hi = [2usize, 1, 3][i];
                    for d in lo..hi {
                        pat[(d, d)] = c64(1.0, 0.0);
                    }
                    kron(&pat, &CMat::identity(n, n))
                })
            })
            .collect();
        let q_field = MatrixField::new(amp_space, blocks).unwrap();
        let q = IdempotentField::new(q_field, Ambient::new(t.clone(), m), &tolerances()).unwrap();
        // orthogonality
        let prod = p.field.mul(&q.field).unwrap();
        assert!(prod.norm_max() < 1e-12);
        let sum_field = p.field.add(&q.field).unwrap();
        let sum = IdempotentField::new(sum_field, Ambient::new(t, m), &tolerances()).unwrap();
        let tol = tolerances();
        let cp = trace_class(&p, &tol).unwrap();
        let cq = trace_class(&q, &tol).unwrap();
        let cs = trace_class(&sum, &tol).unwrap();
        let added: Vec<i64> = cp.values.iter().zip(&cq.values).map(|(a, b)| a + b).collect();
        assert_eq!(cs.values, added);
    }

    #[test]
    fn descriptor_rank_counts_atoms_of_distinct_values() {
        let tol = tolerances();
        for k in [2usize, 4, 8] {
            let t = discretized_operator(k);
            let d = k0_descriptor(&t, &tol).unwrap();
            assert_eq!(d.group_rank, k);
            assert_eq!(d.generators.len(), k);
            assert!(d.infinite_classes.is_empty());
        }
    }

    #[test]
    fn single_atom_descriptor() {
        let t = discretized_operator(1);
        let d = k0_descriptor(&t, &tolerances()).unwrap();
        assert_eq!(d.group_rank, 1);
    }

    #[test]
    fn infinite_class_is_flagged_with_zero_contribution() {
        let space = Arc::new(
            AtomicSpace::build(&[
                ("a".into(), 1.0, FiberDim::Finite(2)),
                ("b".into(), 1.0, FiberDim::Finite(2)),
                ("w".into(), 1.0, FiberDim::Infinite),
            ])
            .unwrap(),
        );
        let mk = |z: f64| {
            Some(CMat::from_row_slice(
                2,
                2,
                &[c64(z, 0.0), c64(1.0, 0.0), C64::default(), c64(z, 0.0)],
            ))
        };
        let t = MatrixField::new(space, vec![mk(0.0), mk(1.0), None]).unwrap();
        let d = k0_descriptor(&t, &tolerances()).unwrap();
        assert_eq!(d.group_rank, 2);
        assert_eq!(d.infinite_classes.len(), 1);
        assert!(d.infinite_classes[0].contribution_zero);
        assert_eq!(d.infinite_classes[0].atoms, vec!["w".to_string()]);
    }

    #[test]
    fn class_distinguishes_ranks_and_matches_conjugates() {
        let tol = tolerances();
        let t = discretized_operator(2);
        let p1 = indicator_projection(&t, 2, &[1, 1]);
        let p2 = indicator_projection(&t, 2, &[2, 2]);
        assert!(!k0_equal(&p1, &p2, &tol).unwrap());
        assert!(k0_equal(&p1, &p1, &tol).unwrap());
    }

    #[test]
    fn stability_under_larger_amplification() {
        let tol = tolerances();
        let t = discretized_operator(2);
        let small = indicator_projection(&t, 1, &[1, 0]);
        let big = indicator_projection(&t, 3, &[1, 0]);
        assert!(k0_equal(&small, &big, &tol).unwrap());
    }

    #[test]
    fn non_integer_trace_is_refused() {
        // an idempotent commuting with a non-SI operator can have rank that
        // is not a multiple of the fiber dimension; the gate refuses it
        let space = Arc::new(AtomicSpace::build(&[("a".into(), 1.0, FiberDim::Finite(2))]).unwrap());
        let t = MatrixField::new(space.clone(), vec![Some(CMat::identity(2, 2) * c64(0.7, 0.0))]).unwrap();
        let p_field = MatrixField::new(
            space,
            vec![Some(CMat::from_row_slice(
                2,
                2,
                &[c64(1.0, 0.0), C64::default(), C64::default(), C64::default()],
            ))],
        )
        .unwrap();
        let p = IdempotentField::new(p_field, Ambient::new(t, 1), &tolerances()).unwrap();
        let err = trace_class(&p, &tolerances()).unwrap_err();
        assert!(matches!(err, SidError::NonIntegerClass { .. }));
    }

    #[test]
    fn disagreeing_atoms_at_shared_point_are_refused() {
        // two atoms carrying the same spectrum point must agree on the value
        let space = Arc::new(
            AtomicSpace::build(&[
                ("a".into(), 1.0, FiberDim::Finite(2)),
                ("b".into(), 1.0, FiberDim::Finite(2)),
            ])
            .unwrap(),
        );
        let mk = || {
            Some(CMat::from_row_slice(
                2,
                2,
                &[c64(0.5, 0.0), c64(1.0, 0.0), C64::default(), c64(0.5, 0.0)],
            ))
        };
        let t = MatrixField::new(space.clone(), vec![mk(), mk()]).unwrap();
        let p_field = MatrixField::new(
            space,
            vec![Some(CMat::identity(2, 2)), Some(CMat::zeros(2, 2))],
        )
        .unwrap();
        let p = IdempotentField::new(p_field, Ambient::new(t, 1), &tolerances()).unwrap();
        let err = trace_class(&p, &tolerances()).unwrap_err();
        assert!(matches!(err, SidError::InconsistentTrace { .. }));
    }
}
