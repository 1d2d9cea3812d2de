//! Fiberwise Jordan-structure analysis and strong-irreducibility tests.
//!
//! A block in the triangular normal form is strongly irreducible exactly when
//! every superdiagonal entry is nonzero; the general test decides "similar to
//! a single Jordan block" for an arbitrary matrix and serves as an
//! independent cross-check of the superdiagonal criterion.

use crate::error::{Result, SidError};
use crate::field::SITriangularForm;
use crate::linalg::{
    c64, fnorm, max_lower_triangular, nullspace, rank, C64, CMat, CVec,
};
use crate::tol::Tolerances;

/// Jordan data for one fiber: the (single) eigenvalue, the block-size
/// multiset, and optionally the similarity `X` with `T X = X J`.
#[derive(Debug, Clone)]
pub struct JordanReport {
    pub eigenvalue: C64,
    /// Block sizes in descending order; they sum to the fiber dimension.
    pub block_sizes: Vec<usize>,
    pub is_single_block: bool,
    pub similarity: Option<CMat>,
}

/// A nontrivial idempotent commuting with the failing fiber.
#[derive(Debug, Clone)]
pub struct SIWitness {
    pub atom_index: usize,
    pub atom: String,
    pub idempotent: CMat,
}

/// Per-atom strong-irreducibility verdicts. `None` marks an
/// infinite-dimensional atom, which the numeric test does not touch.
#[derive(Debug, Clone)]
pub struct SIVerdict {
    pub per_atom: Vec<Option<bool>>,
    /// True iff the test passed on every finite atom.
    pub overall: bool,
    pub witnesses: Vec<SIWitness>,
}

/// Superdiagonal criterion: a validated triangular block is strongly
/// irreducible iff every superdiagonal entry stays above the zero threshold.
/// Each failing atom gets a witness idempotent built from the Jordan-chain
/// split of its nilpotent part.
pub fn si_test_superdiagonal(form: &SITriangularForm, tol: &Tolerances) -> SIVerdict {
    let space = form.space().clone();
    let mut per_atom = Vec::with_capacity(space.len());
    let mut witnesses = Vec::new();
    for (idx, atom) in space.atoms().iter().enumerate() {
        match form.nilpotent_part(idx) {
            None => per_atom.push(None),
            Some(nil) => {
                let n = nil.nrows();
                let scale = 1.0 + fnorm(form.base().block(idx).expect("finite atom"));
                let ok = (0..n.saturating_sub(1))
                    .all(|i| nil[(i, i + 1)].norm() > tol.tol_zero * scale);
                per_atom.push(Some(ok));
                if !ok {
                    if let Some(w) = witness_from_nilpotent(nil, tol) {
                        witnesses.push(SIWitness {
                            atom_index: idx,
                            atom: atom.label.clone(),
                            idempotent: w,
                        });
                    }
                }
            }
        }
    }
    let overall = per_atom.iter().flatten().all(|&b| b);
    SIVerdict {
        per_atom,
        overall,
        witnesses,
    }
}

/// Independent oracle: true iff the matrix is similar to a single Jordan
/// block, i.e. its spectrum clusters to one point `alpha` and
/// `rank(block - alpha I) = n - 1`.
///
/// The clustering threshold is `tol_eig` relative to the spectral radius,
/// floored by a defectivity allowance `(kappa eps)^(1/n)`: computed
/// eigenvalues of a defective matrix spread over a disk of that radius, so a
/// literal relative threshold would shatter a single defective eigenvalue
/// into spurious clusters.
pub fn si_test_general(block: &CMat, tol: &Tolerances) -> Result<bool> {
    let n = block.nrows();
    if n == 0 {
        return Err(SidError::InvalidInput("empty block".into()));
    }
    if n == 1 {
        return Ok(true);
    }
    let eigs = eigenvalues(block)?;
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let defect_floor = 5.0
        * (1e3 * f64::EPSILON).powf(1.0 / n as f64)
        * (1.0 + fnorm(block));
    let threshold = (tol.tol_eig * radius).max(defect_floor);

    let clusters = link_clusters(&eigs, threshold);
    if clusters.len() > 1 {
        // refusal band: clusters closer than 3x the threshold are unstable
        let mut min_gap = f64::INFINITY;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        min_gap = min_gap.min((eigs[i] - eigs[j]).norm());
                    }
                }
            }
        }
        if min_gap <= 3.0 * threshold {
            return Err(SidError::IllConditionedSpectrum {
                gap: min_gap,
                band: 3.0 * threshold,
            });
        }
        return Ok(false);
    }
    let alpha: C64 = eigs.iter().sum::<C64>() / c64(n as f64, 0.0);
    let shifted = block - CMat::identity(n, n) * alpha;
    Ok(rank(&shifted, tol.tol_rank) == n - 1)
}

/// Explicit similarity to the Jordan block for a triangular block with
/// constant diagonal and nonzero superdiagonals, following the backward
/// recursion `x_{i-1,i-1} = a_{i-1,i} x_{ii}` with `x_nn = 1` and free
/// entries set to zero.
pub fn jordan_similarity(block: &CMat, tol: &Tolerances) -> Result<JordanReport> {
    let n = block.nrows();
    let scale = 1.0 + fnorm(block);
    let lower = max_lower_triangular(block);
    if lower > tol.tol_diag * scale {
        return Err(SidError::NotUpperTriangular {
            atom: String::new(),
            residual: lower,
        });
    }
    let alpha = block.diagonal().iter().sum::<C64>() / c64(n as f64, 0.0);
    let dev = block
        .diagonal()
        .iter()
        .map(|d| (d - alpha).norm())
        .fold(0.0, f64::max);
    if dev > tol.tol_diag * scale {
        return Err(SidError::DiagonalNotConstant {
            atom: String::new(),
            deviation: dev,
        });
    }
    for i in 0..n.saturating_sub(1) {
        let v = block[(i, i + 1)].norm();
        if v <= tol.tol_zero * scale {
            return Err(SidError::CriterionViolated {
                atom: String::new(),
                index: i,
                value: v,
            });
        }
    }

    let mut x = CMat::zeros(n, n);
    x[(n - 1, n - 1)] = c64(1.0, 0.0);
    for i in (1..n).rev() {
        let xd = x[(i, i)];
        x[(i - 1, i - 1)] = block[(i - 1, i)] * xd;
    }
    // column-major sweep; row 0 entries of later columns are the free
    // parameters and stay zero
    for col in 1..n {
        for r in (0..col.saturating_sub(1)).rev() {
            let mut rhs = x[(r, col - 1)];
            for k in (r + 2)..=col {
                rhs -= block[(r, k)] * x[(k, col)];
            }
            x[(r + 1, col)] = rhs / block[(r, r + 1)];
        }
    }

    Ok(JordanReport {
        eigenvalue: alpha,
        block_sizes: vec![n],
        is_single_block: true,
        similarity: Some(x),
    })
}

/// The canonical Jordan matrix for one eigenvalue and a list of block sizes.
pub fn jordan_matrix(alpha: C64, block_sizes: &[usize]) -> CMat {
    let n: usize = block_sizes.iter().sum();
    let mut j = CMat::identity(n, n) * alpha;
    let mut off = 0;
    for &h in block_sizes {
        for i in 0..h.saturating_sub(1) {
            j[(off + i, off + i + 1)] = c64(1.0, 0.0);
        }
        off += h;
    }
    j
}

fn eigenvalues(block: &CMat) -> Result<Vec<C64>> {
    // exactly triangular input: the diagonal is the spectrum
    if max_lower_triangular(block) == 0.0 {
        return Ok(block.diagonal().iter().cloned().collect());
    }
    if let Some(v) = block.clone().eigenvalues() {
        return Ok(v.iter().cloned().collect());
    }
    if let Some(s) = block.clone().try_schur(1e-13, 200_000) {
        let (_, t) = s.unpack();
        return Ok(t.diagonal().iter().cloned().collect());
    }
    Err(SidError::IllConditionedSpectrum {
        gap: 0.0,
        band: 0.0,
    })
}

fn link_clusters(values: &[C64], threshold: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if cluster_of[i].is_some() {
            continue;
        }
        let id = clusters.len();
        clusters.push(vec![i]);
        cluster_of[i] = Some(id);
        let mut frontier = vec![i];
        while let Some(v) = frontier.pop() {
            for u in 0..n {
                if cluster_of[u].is_none() && (values[v] - values[u]).norm() <= threshold {
                    cluster_of[u] = Some(id);
                    clusters[id].push(u);
                    frontier.push(u);
                }
            }
        }
    }
    clusters
}

/// Jordan chains of a nilpotent matrix: each chain is returned kernel-first,
/// so `N * chain[k] = chain[k-1]` and `N * chain[0] = 0`. Chains are sorted
/// by height, tallest first.
pub fn nilpotent_chains(nil: &CMat, tol: &Tolerances) -> Vec<Vec<CVec>> {
    let n = nil.nrows();
    if n == 0 {
        return Vec::new();
    }
    // kernels of increasing powers
    let mut kernels: Vec<Vec<CVec>> = Vec::new();
    let mut power = CMat::identity(n, n);
    loop {
        power = &power * nil;
        let ns = nullspace(&power, tol.tol_null.max(1e-12));
        let dim = ns.basis.len();
        kernels.push(ns.basis);
        if dim == n {
            break;
        }
        if kernels.len() > n {
            break; // not nilpotent; callers only pass nilpotent input
        }
    }
    let s = kernels.len();

    let mut chains: Vec<Vec<CVec>> = Vec::new();
    for j in (1..=s).rev() {
        // space already covered at height j: ker(N^{j-1}) plus the height-j
        // vectors of chains taller than j
        let mut covered: Vec<CVec> = if j >= 2 {
            kernels[j - 2].clone()
        } else {
            Vec::new()
        };
        for chain in &chains {
            if chain.len() > j {
                covered.push(chain[j - 1].clone());
            }
        }
        let mut covered_basis = orthonormalize(&covered);
        // candidates live in ker(N^j); each accepted top joins the covered
        // basis so later candidates stay independent of it
        for cand in &kernels[j - 1] {
            let mut v = cand.clone();
            for b in &covered_basis {
                let coef: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                v -= b * coef;
            }
            let nrm = v.norm();
            if nrm > 1e-7 {
                let v = v / c64(nrm, 0.0);
                covered_basis.push(v.clone());
                // build the chain by repeated application of N
                let mut chain = vec![v];
                for _ in 1..j {
                    let next = nil * chain.last().unwrap();
                    chain.push(next);
                }
                chain.reverse();
                chains.push(chain);
            }
        }
    }
    chains.sort_by(|a, b| b.len().cmp(&a.len()));
    chains
}

/// Nontrivial idempotent commuting with `alpha I + nil`, projecting onto the
/// first Jordan chain along the others. Returns `None` when the nilpotent
/// part is a single chain (the strongly irreducible case).
pub fn witness_from_nilpotent(nil: &CMat, tol: &Tolerances) -> Option<CMat> {
    let n = nil.nrows();
    let chains = nilpotent_chains(nil, tol);
    if chains.len() < 2 {
        return None;
    }
    let mut columns: Vec<CVec> = Vec::with_capacity(n);
    for chain in &chains {
        columns.extend(chain.iter().cloned());
    }
    if columns.len() != n {
        return None;
    }
    let x = CMat::from_columns(&columns);
    let xi = x.clone().try_inverse()?;
    let h = chains[0].len();
    let mut pattern = CMat::zeros(n, n);
    for i in 0..h {
        pattern[(i, i)] = c64(1.0, 0.0);
    }
    Some(&x * pattern * xi)
}

fn orthonormalize(vecs: &[CVec]) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vecs {
        let mut w = v.clone();
        for b in &basis {
            let coef: C64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
            w -= b * coef;
        }
        let nrm = w.norm();
        if nrm > 1e-10 {
            basis.push(w / c64(nrm, 0.0));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{validate_si_form, MatrixField};
    use crate::linalg::{commutation_residual, idempotency_residual};
    use crate::space::{build_space, FiberDim};
    use std::sync::Arc;

    fn single_atom_form(block: CMat) -> SITriangularForm {
        let n = block.nrows();
        let s = Arc::new(build_space(&[("a", 1.0, FiberDim::Finite(n))]).unwrap());
        let f = MatrixField::new(s, vec![Some(block)]).unwrap();
        validate_si_form(&f, &Tolerances::default()).unwrap()
    }

    fn jordan2(alpha: C64) -> CMat {
        CMat::from_row_slice(
            2,
            2,
            &[alpha, c64(1.0, 0.0), c64(0.0, 0.0), alpha],
        )
    }

    #[test]
    fn jordan_block_is_si_both_ways() {
        let tol = Tolerances::default();
        let b = jordan2(c64(0.4, 0.9));
        let verdict = si_test_superdiagonal(&single_atom_form(b.clone()), &tol);
        assert!(verdict.overall);
        assert!(si_test_general(&b, &tol).unwrap());
    }

    #[test]
    fn diagonal_pair_fails_with_projection_witness() {
        let tol = Tolerances::default();
        let alpha = c64(0.7, 0.0);
        let b = CMat::identity(2, 2) * alpha;
        let verdict = si_test_superdiagonal(&single_atom_form(b.clone()), &tol);
        assert!(!verdict.overall);
        assert_eq!(verdict.witnesses.len(), 1);
        let w = &verdict.witnesses[0].idempotent;
        assert!((w - CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-9);
    }

    #[test]
    fn scalar_fiber_is_si() {
        let tol = Tolerances::default();
        let b = CMat::from_row_slice(1, 1, &[c64(0.3, 0.4)]);
        assert!(si_test_general(&b, &tol).unwrap());
    }

    #[test]
    fn two_jordan_blocks_rejected_by_rank() {
        let tol = Tolerances::default();
        // nilpotent with two blocks: rank 1 instead of 2
        let mut b = CMat::zeros(3, 3);
        b[(0, 1)] = c64(1.0, 0.0);
        assert!(!si_test_general(&b, &tol).unwrap());
    }

    #[test]
    fn zeroed_superdiagonal_witness_commutes() {
        let tol = Tolerances::default();
        // 3x3 with superdiagonals (1, 0) and a coupling corner entry
        let alpha = c64(0.2, -0.5);
        let mut b = CMat::identity(3, 3) * alpha;
        b[(0, 1)] = c64(1.0, 0.0);
        b[(0, 2)] = c64(0.7, 0.3);
        let verdict = si_test_superdiagonal(&single_atom_form(b.clone()), &tol);
        assert!(!verdict.overall);
        let w = &verdict.witnesses[0].idempotent;
        assert!(idempotency_residual(w) < 1e-9);
        assert!(commutation_residual(&b, w) < 1e-9);
        let nontrivial = fnorm(w) > 1e-6
            && fnorm(&(w - CMat::identity(3, 3))) > 1e-6;
        assert!(nontrivial);
    }

    #[test]
    fn corner_nilpotent_witness() {
        // N = e13 couples a height-2 chain with a height-1 chain; the naive
        // split at the zero superdiagonal has no commuting idempotent, the
        // chain construction does
        let tol = Tolerances::default();
        let mut b = CMat::zeros(3, 3);
        b[(0, 2)] = c64(1.0, 0.0);
        let w = witness_from_nilpotent(&b, &tol).unwrap();
        assert!(idempotency_residual(&w) < 1e-10);
        assert!(commutation_residual(&b, &w) < 1e-10);
        assert!(fnorm(&w) > 1e-6 && fnorm(&(&w - CMat::identity(3, 3))) > 1e-6);
    }

    #[test]
    fn similarity_for_2x2_shear() {
        let tol = Tolerances::default();
        let alpha = c64(0.1, 0.8);
        let cval = c64(2.0, -1.0);
        let b = CMat::from_row_slice(2, 2, &[alpha, cval, c64(0.0, 0.0), alpha]);
        let rep = jordan_similarity(&b, &tol).unwrap();
        let x = rep.similarity.unwrap();
        assert!((x[(0, 0)] - cval).norm() < 1e-12);
        assert!((x[(1, 1)] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!(x[(0, 1)].norm() < 1e-12 && x[(1, 0)].norm() < 1e-12);
        let j = jordan_matrix(rep.eigenvalue, &rep.block_sizes);
        let resid = fnorm(&(&b * &x - &x * &j));
        assert!(resid < 1e-12 * (1.0 + fnorm(&b)) * (1.0 + fnorm(&x)));
    }

    #[test]
    fn similarity_fixed_point_on_jordan_block() {
        let tol = Tolerances::default();
        let j = jordan_matrix(c64(0.5, 0.5), &[3]);
        let rep = jordan_similarity(&j, &tol).unwrap();
        let x = rep.similarity.unwrap();
        assert!(fnorm(&(&x - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn similarity_diagonal_recursion_3x3() {
        let tol = Tolerances::default();
        let alpha = c64(-0.3, 0.2);
        let mut b = CMat::identity(3, 3) * alpha;
        b[(0, 1)] = c64(2.0, 0.0);
        b[(1, 2)] = c64(3.0, 0.0);
        let rep = jordan_similarity(&b, &tol).unwrap();
        let x = rep.similarity.unwrap();
        assert!((x[(0, 0)] - c64(6.0, 0.0)).norm() < 1e-12);
        assert!((x[(1, 1)] - c64(3.0, 0.0)).norm() < 1e-12);
        assert!((x[(2, 2)] - c64(1.0, 0.0)).norm() < 1e-12);
        let j = jordan_matrix(rep.eigenvalue, &rep.block_sizes);
        assert!(fnorm(&(&b * &x - &x * &j)) < 1e-12 * (1.0 + fnorm(&b)) * (1.0 + fnorm(&x)));
    }

    #[test]
    fn similarity_requires_nonzero_superdiagonal() {
        let tol = Tolerances::default();
        let b = CMat::identity(2, 2) * c64(1.0, 0.0);
        assert!(matches!(
            jordan_similarity(&b, &tol),
            Err(SidError::CriterionViolated { .. })
        ));
    }

    #[test]
    fn close_spectra_are_refused_as_ambiguous() {
        let tol = Tolerances::default();
        let delta = 4e-6;
        let b = CMat::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(delta, 0.0)],
        );
        assert!(matches!(
            si_test_general(&b, &tol),
            Err(SidError::IllConditionedSpectrum { .. })
        ));
    }

    #[test]
    fn chains_of_shift_matrix() {
        let tol = Tolerances::default();
        let j = jordan_matrix(c64(0.0, 0.0), &[4]);
        let chains = nilpotent_chains(&j, &tol);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 4);
        let bottom = &chains[0][0];
        assert!((&j * bottom).norm() < 1e-10);
    }

    #[test]
    fn chains_of_mixed_structure() {
        let tol = Tolerances::default();
        let j = jordan_matrix(c64(0.0, 0.0), &[2, 1]);
        let chains = nilpotent_chains(&j, &tol);
        let mut heights: Vec<usize> = chains.iter().map(|c| c.len()).collect();
        heights.sort_unstable();
        assert_eq!(heights, vec![1, 2]);
    }
}
