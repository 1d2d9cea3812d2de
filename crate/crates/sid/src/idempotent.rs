//! Canonicalization of idempotents over amplifications of a strongly
//! irreducible triangular operator.
//!
//! Over an SI fiber `T = phi I + N` the commutant of the m-fold amplification
//! is spanned by `C (x) N^k` with `C` an arbitrary m x m coefficient matrix,
//! so every member has per-atom coordinates `Q = sum_k C_k (x) N^k`. The
//! pipeline works on these coordinates:
//!
//! 1. reduce the degree-zero coefficient to a leading-ones projection per
//!    atom (a unitary change of basis followed by one unit shear, uniformly
//!    norm-bounded);
//! 2. reorder supports so they are nested (a permutation; the leading-ones
//!    convention already produces nested supports);
//! 3. kill the degree-j coefficients one degree at a time with unipotent
//!    shears `I + E (x) N^j`, whose spectrum is `{1}`.
//!
//! The result is an exact diagonal projection field together with an
//! invertible certificate living in the commutant of the amplification.

use crate::error::{Result, SidError};
use crate::field::{validate_si_form, MatrixField, SITriangularForm};
use crate::jordan::si_test_superdiagonal;
use crate::linalg::{
    c64, commutation_residual, condition_number, fnorm, guarded_inverse, idempotency_residual,
    kron, singular_values, unipotent_inverse, vec_of, C64, CMat, JacobiSvd,
};
use crate::tol::Tolerances;

/// The algebra an idempotent lives in: `M_m({T}')` for a base operator `T`.
#[derive(Debug, Clone)]
pub struct Ambient {
    pub operator: MatrixField,
    pub m: usize,
}

impl Ambient {
    pub fn new(operator: MatrixField, m: usize) -> Ambient {
        Ambient { operator, m }
    }

    /// The m-fold amplified operator the idempotent must commute with.
    pub fn amplified(&self) -> Result<MatrixField> {
        self.operator.amplify(self.m)
    }

    /// Structural equality of the base operator, up to floating round-off.
    pub fn same_base(&self, other: &Ambient) -> bool {
        if *self.operator.space().as_ref() != *other.operator.space().as_ref() {
            return false;
        }
        match self.operator.distance(&other.operator) {
            Ok(d) => d <= 1e-12 * (1.0 + self.operator.norm_max()),
            Err(_) => false,
        }
    }
}

/// A validated idempotent field in `M_m({T}')`.
#[derive(Debug, Clone)]
pub struct IdempotentField {
    pub field: MatrixField,
    pub ambient: Ambient,
    pub norm_bound: f64,
}

/// Residual gate for commutant membership, relative to both factors.
const MEMBERSHIP_RESIDUAL: f64 = 1e-8;

impl IdempotentField {
    /// Validates idempotency per atom and commutation with the amplified
    /// operator.
    pub fn new(field: MatrixField, ambient: Ambient, tol: &Tolerances) -> Result<IdempotentField> {
        let amplified = ambient.amplified()?;
        if *field.space().as_ref() != *amplified.space().as_ref() {
            return Err(SidError::SpaceMismatch);
        }
        let mut norm_bound = 0.0f64;
        for idx in field.space().finite_atom_indices() {
            let q = field.expect_block(idx)?;
            let resid = idempotency_residual(q);
            if resid > tol.tol_idem {
                return Err(SidError::NotIdempotent {
                    residual: resid,
                    tol: tol.tol_idem,
                });
            }
            let t = amplified.expect_block(idx)?;
            let cres = commutation_residual(t, q);
            if cres > MEMBERSHIP_RESIDUAL {
                return Err(SidError::NotInCommutant {
                    atom: field.space().atoms()[idx].label.clone(),
                    residual: cres,
                });
            }
            norm_bound = norm_bound.max(fnorm(q));
        }
        Ok(IdempotentField {
            field,
            ambient,
            norm_bound,
        })
    }
}

/// Normalized per-atom ranks of an idempotent over an amplification: the
/// block rank divided by the base fiber dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankProfile {
    /// `None` on infinite-dimensional atoms.
    pub per_atom: Vec<Option<usize>>,
    pub is_constant: bool,
    /// Atoms grouped by normalized rank, ascending.
    pub value_partition: Vec<(usize, Vec<String>)>,
}

/// Rank of an idempotent block: nonzero singular values of an idempotent are
/// at least 1, so the relative threshold is floored at 1/2.
fn idempotent_rank(p: &CMat, tol: &Tolerances) -> usize {
    let sigma = singular_values(p);
    let smax = sigma.first().cloned().unwrap_or(0.0);
    let threshold = (tol.tol_rank * smax).max(0.5);
    sigma.iter().filter(|&&s| s > threshold).count()
}

/// Rank via the trace, exact for idempotents (eigenvalues are 0 and 1).
/// Falls back to the singular-value count when the trace is not close to an
/// integer.
fn idempotent_rank_fast(p: &CMat, tol: &Tolerances) -> usize {
    let tr: C64 = p.diagonal().iter().sum();
    let rounded = tr.re.round();
    if tr.im.abs() < 1e-6 && (tr.re - rounded).abs() < 1e-6 && rounded >= -0.5 {
        rounded.max(0.0) as usize
    } else {
        idempotent_rank(p, tol)
    }
}

/// Per-atom normalized ranks `rank(Q(atom)) / n` and the partition of atoms
/// by value.
pub fn rank_profile(q: &IdempotentField, tol: &Tolerances) -> Result<RankProfile> {
    let base_space = q.ambient.operator.space();
    let mut per_atom = Vec::with_capacity(base_space.len());
    for (idx, atom) in base_space.atoms().iter().enumerate() {
        match atom.fiber.finite() {
            None => per_atom.push(None),
            Some(n) => {
                let block = q.field.expect_block(idx)?;
                let r = idempotent_rank(block, tol);
                if r % n != 0 {
                    return Err(SidError::RankNotMultipleOfN {
                        atom: atom.label.clone(),
                        rank: r,
                        fiber_dim: n,
                    });
                }
                per_atom.push(Some(r / n));
            }
        }
    }
    let finite: Vec<usize> = per_atom.iter().flatten().cloned().collect();
    let is_constant = finite.windows(2).all(|w| w[0] == w[1]);
    let mut values: Vec<usize> = finite.clone();
    values.sort_unstable();
    values.dedup();
    let value_partition = values
        .into_iter()
        .map(|v| {
            let labels = base_space
                .atoms()
                .iter()
                .zip(&per_atom)
                .filter(|(_, r)| **r == Some(v))
                .map(|(a, _)| a.label.clone())
                .collect();
            (v, labels)
        })
        .collect();
    Ok(RankProfile {
        per_atom,
        is_constant,
        value_partition,
    })
}

/// One factor of a similarity certificate, in application order.
#[derive(Debug, Clone)]
pub struct CertificateFactor {
    pub kind: FactorKind,
    pub description: String,
    /// `None` when the factor is the identity in this representation.
    pub field: Option<MatrixField>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorKind {
    /// Relabeling between copy-major and degree-major layouts; the identity
    /// matrix in the coordinates used here.
    Shuffle,
    /// Per-atom reduction of the degree-zero coefficient to a projection.
    PointwiseReduction,
    /// Permutation enforcing nested supports.
    SupportReorder,
    /// Unipotent shear killing the degree-j coefficient.
    ShearSweep(usize),
    /// Alignment of the family member at one diagonal position.
    CornerAlign(usize),
}

/// An invertible element of `M_m({T}')` witnessing a conjugation, with its
/// conditioning data and the ordered factors it was composed from.
#[derive(Debug, Clone)]
pub struct SimilarityCertificate {
    pub x: MatrixField,
    pub x_inv: MatrixField,
    pub in_commutant_of: MatrixField,
    /// Per-atom condition number of `x` (NaN on symbolic atoms).
    pub condition: Vec<f64>,
    pub construction_log: Vec<CertificateFactor>,
}

impl SimilarityCertificate {
    /// `x q x^{-1}`.
    pub fn conjugate(&self, q: &MatrixField) -> Result<MatrixField> {
        self.x.mul(q)?.mul(&self.x_inv)
    }

    /// Largest per-atom scaled commutation residual against the reference
    /// operator.
    pub fn commutation_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in self.x.space().finite_atom_indices() {
            if let (Some(t), Some(x)) = (self.in_commutant_of.block(idx), self.x.block(idx)) {
                worst = worst.max(commutation_residual(t, x));
            }
        }
        worst
    }

    /// Largest per-atom residual of `x * x_inv - I`, scaled by the condition
    /// number.
    pub fn inverse_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (idx, cond) in self.condition.iter().enumerate() {
            if let (Some(x), Some(xi)) = (self.x.block(idx), self.x_inv.block(idx)) {
                let n = x.nrows();
                let resid = fnorm(&(x * xi - CMat::identity(n, n)));
                worst = worst.max(resid / cond.max(1.0));
            }
        }
        worst
    }

    fn identity(reference: MatrixField) -> SimilarityCertificate {
        let space = reference.space().clone();
        let id = MatrixField::identity(space.clone());
        let condition = space
            .atoms()
            .iter()
            .map(|a| if a.fiber.is_finite() { 1.0 } else { f64::NAN })
            .collect();
        SimilarityCertificate {
            x: id.clone(),
            x_inv: id,
            in_commutant_of: reference,
            condition,
            construction_log: Vec::new(),
        }
    }

    /// Left-composes a factor: the new certificate is `factor * x`. The
    /// per-atom condition is tracked by the submultiplicative bound
    /// `kappa(F X) <= kappa(F) kappa(X)` and only recomputed exactly when the
    /// bound crosses the cap; `finalize` installs the exact values.
    fn compose(
        &mut self,
        factor: &MatrixField,
        factor_inv: &MatrixField,
        factor_condition: &[f64],
        entry: CertificateFactor,
        tol: &Tolerances,
    ) -> Result<()> {
        if entry.field.is_none() {
            // identity factor: record it, nothing to multiply
            self.construction_log.push(entry);
            return Ok(());
        }
        self.x = factor.mul(&self.x)?;
        self.x_inv = self.x_inv.mul(factor_inv)?;
        for (idx, cond) in self.condition.iter_mut().enumerate() {
            if let Some(x) = self.x.block(idx) {
                let bound = factor_condition.get(idx).copied().unwrap_or(1.0);
                *cond *= bound.max(1.0);
                if *cond > tol.kappa_max {
                    *cond = condition_number(x);
                    if *cond > tol.kappa_max {
                        return Err(SidError::SingularCertificate {
                            condition: *cond,
                            cap: tol.kappa_max,
                        });
                    }
                }
            }
        }
        self.construction_log.push(entry);
        Ok(())
    }

    /// Replaces the running condition bounds by the exact per-atom values
    /// and enforces the cap.
    fn finalize(&mut self, tol: &Tolerances) -> Result<()> {
        for (idx, cond) in self.condition.iter_mut().enumerate() {
            if let Some(x) = self.x.block(idx) {
                *cond = condition_number(x);
                if *cond > tol.kappa_max {
                    return Err(SidError::SingularCertificate {
                        condition: *cond,
                        cap: tol.kappa_max,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Unitary-plus-shear reduction of one idempotent matrix: returns `(P, Y)` with
/// `Y p Y^{-1} = P`, `P` the leading-ones projection of the same rank, and
/// `||Y|| <= 1 + ||p||` (a unitary followed by a unit shear).
pub fn reduce_pointwise(p: &CMat, tol: &Tolerances) -> Result<(CMat, CMat)> {
    let (proj, y, _y_inv) = reduce_pointwise_full(p, tol)?;
    Ok((proj, y))
}

/// If `p` is within `slack` of an exact leading-ones diagonal projection,
/// returns that projection. Keeps canonical inputs exact fixed points in the
/// presence of coordinate-extraction round-off.
fn snap_leading_ones(p: &CMat, slack: f64) -> Option<CMat> {
    let n = p.nrows();
    let mut pattern = CMat::zeros(n, n);
    let mut seen_zero = false;
    for i in 0..n {
        let d = p[(i, i)];
        if (d - c64(1.0, 0.0)).norm() <= slack {
            if seen_zero {
                return None;
            }
            pattern[(i, i)] = c64(1.0, 0.0);
        } else if d.norm() <= slack {
            seen_zero = true;
        } else {
            return None;
        }
    }
    if fnorm(&(p - &pattern)) <= slack * (n as f64) {
        Some(pattern)
    } else {
        None
    }
}

#[cfg(test)]
fn is_leading_ones_diagonal(p: &CMat) -> Option<usize> {
    let n = p.nrows();
    let mut rank = 0usize;
    let mut seen_zero = false;
    for i in 0..n {
        for j in 0..n {
            let e = p[(i, j)];
            if i != j {
                if e != C64::default() {
                    return None;
                }
            } else if e == c64(1.0, 0.0) {
                if seen_zero {
                    return None;
                }
                rank += 1;
            } else if e == C64::default() {
                seen_zero = true;
            } else {
                return None;
            }
        }
    }
    Some(rank)
}

fn reduce_pointwise_full(p: &CMat, tol: &Tolerances) -> Result<(CMat, CMat, CMat)> {
    let n = p.nrows();
    let resid = idempotency_residual(p);
    if resid > tol.tol_idem {
        return Err(SidError::NotIdempotent {
            residual: resid,
            tol: tol.tol_idem,
        });
    }
    // canonical inputs (up to round-off) are fixed points
    if let Some(pattern) = snap_leading_ones(p, 1e-12 * (1.0 + fnorm(p))) {
        let id = CMat::identity(n, n);
        return Ok((pattern, id.clone(), id));
    }

    let svd = JacobiSvd::new(p, true);
    let mut u = svd.u;
    let smax = svd.sigma.first().cloned().unwrap_or(0.0);
    let threshold = (tol.tol_rank * smax).max(0.5);
    let r = svd.sigma.iter().filter(|&&s| s > threshold).count();

    // deterministic column phases: largest entry of each column real positive
    for k in 0..n {
        let mut col = u.column_mut(k);
        let (mut best, mut best_norm) = (C64::default(), 0.0f64);
        for e in col.iter() {
            if e.norm() > best_norm {
                best_norm = e.norm();
                best = *e;
            }
        }
        if best_norm > 0.0 {
            let phase = best / c64(best_norm, 0.0);
            for e in col.iter_mut() {
                *e *= phase.conj();
            }
        }
    }

    // U* p U = [[I, R], [0, 0]] with R the coupling block
    let a = u.adjoint() * p * &u;
    let mut w = CMat::identity(n, n);
    let mut w_inv = CMat::identity(n, n);
    for i in 0..r {
        for j in r..n {
            w[(i, j)] = a[(i, j)];
            w_inv[(i, j)] = -a[(i, j)];
        }
    }
    let y = &w * u.adjoint();
    let y_inv = &u * w_inv;
    let mut proj = CMat::zeros(n, n);
    for i in 0..r {
        proj[(i, i)] = c64(1.0, 0.0);
    }
    Ok((proj, y, y_inv))
}

/// Powers of one fiber's nilpotent part together with a least-squares solver
/// for commutant coordinates.
struct FiberBasis {
    n: usize,
    powers: Vec<CMat>,
    stacked_svd: JacobiSvd,
}

impl FiberBasis {
    fn new(nil: &CMat) -> FiberBasis {
        let n = nil.nrows();
        let mut powers = Vec::with_capacity(n);
        let mut pw = CMat::identity(n, n);
        for _ in 0..n {
            powers.push(pw.clone());
            pw = &pw * nil;
        }
        let mut stacked = CMat::zeros(n * n, n);
        for (k, p) in powers.iter().enumerate() {
            stacked.set_column(k, &vec_of(p));
        }
        let stacked_svd = JacobiSvd::new(&stacked, false);
        FiberBasis {
            n,
            powers,
            stacked_svd,
        }
    }

    /// Commutant coordinates of an `mn x mn` block: coefficient matrices
    /// `C_k` with `Q = sum_k C_k (x) N^k`, plus the worst per-entry residual.
    fn coords(&self, q: &CMat, m: usize) -> Result<(Vec<CMat>, f64)> {
        let n = self.n;
        let mut coeffs = vec![CMat::zeros(m, m); n];
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let sub = q.view((i * n, j * n), (n, n)).clone_owned();
                let rhs = vec_of(&sub);
                let sol = self.stacked_svd.solve(&rhs, 1e-13);
                let mut recon = CMat::zeros(n, n);
                for k in 0..n {
                    recon += &self.powers[k] * sol[k];
                }
                worst = worst.max(fnorm(&(&recon - &sub)) / (1.0 + fnorm(&sub)));
                for k in 0..n {
                    coeffs[k][(i, j)] = sol[k];
                }
            }
        }
        Ok((coeffs, worst))
    }
}

/// A base operator validated as per-atom strongly irreducible, with the
/// per-atom coordinate solvers and the amplified operator.
pub(crate) struct SiAmplified {
    pub form: SITriangularForm,
    pub m: usize,
    pub amplified: MatrixField,
    fibers: Vec<Option<FiberBasis>>,
}

impl SiAmplified {
    pub fn prepare(operator: &MatrixField, m: usize, tol: &Tolerances) -> Result<SiAmplified> {
        let form = validate_si_form(operator, tol).map_err(|e| match e {
            SidError::NotUpperTriangular { atom, residual } => {
                SidError::NotSIForm(format!("atom `{atom}` not upper triangular ({residual:.3e})"))
            }
            SidError::DiagonalNotConstant { atom, deviation } => SidError::NotSIForm(format!(
                "atom `{atom}` has non-constant diagonal ({deviation:.3e})"
            )),
            other => other,
        })?;
        let verdict = si_test_superdiagonal(&form, tol);
        if !verdict.overall {
            let bad: Vec<String> = verdict
                .witnesses
                .iter()
                .map(|w| w.atom.clone())
                .collect();
            return Err(SidError::NotSIForm(format!(
                "superdiagonal criterion fails on atoms: {}",
                bad.join(", ")
            )));
        }
        let amplified = operator.amplify(m)?;
        let fibers = operator
            .space()
            .atoms()
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                a.fiber
                    .finite()
                    .map(|_| FiberBasis::new(form.nilpotent_part(idx).expect("finite atom")))
            })
            .collect();
        Ok(SiAmplified {
            form,
            m,
            amplified,
            fibers,
        })
    }

    fn fiber(&self, atom: usize) -> &FiberBasis {
        self.fibers[atom].as_ref().expect("finite atom")
    }

    /// Coordinates of a field block, with the membership gate applied.
    fn coords_checked(&self, atom: usize, block: &CMat) -> Result<(Vec<CMat>, f64)> {
        let (coeffs, resid) = self.fiber(atom).coords(block, self.m)?;
        if resid > 1e-6 {
            return Err(SidError::NotInCommutant {
                atom: self.form.space().atoms()[atom].label.clone(),
                residual: resid,
            });
        }
        Ok((coeffs, resid))
    }
}

#[cfg(test)]
fn leading_ones(m: usize, r: usize) -> CMat {
    let mut p = CMat::zeros(m, m);
    for i in 0..r {
        p[(i, i)] = c64(1.0, 0.0);
    }
    p
}

/// Reduces an idempotent in `M_m({T}')` to the exact diagonal projection
/// field with nested supports, returning the projection and the certificate
/// conjugating the input onto it.
pub fn canonicalize_in_commutant(
    q: &IdempotentField,
    tol: &Tolerances,
) -> Result<(IdempotentField, SimilarityCertificate)> {
    let si = SiAmplified::prepare(&q.ambient.operator, q.ambient.m, tol)?;
    let space = q.field.space().clone();
    let m = q.ambient.m;

    let mut cert = SimilarityCertificate::identity(si.amplified.clone());
    cert.construction_log.push(CertificateFactor {
        kind: FactorKind::Shuffle,
        description: "copy-major to degree-major relabeling (identity in these coordinates)"
            .into(),
        field: None,
    });

    let mut current: Vec<Option<CMat>> = q.field.blocks().to_vec();
    let finite: Vec<usize> = space.finite_atom_indices().collect();

    // step 2: pointwise reduction of the degree-zero coefficient
    let mut x2_blocks: Vec<Option<CMat>> = vec![None; space.len()];
    let mut x2_inv_blocks: Vec<Option<CMat>> = vec![None; space.len()];
    let mut projections: Vec<Option<CMat>> = vec![None; space.len()];
    let mut x2_cond = vec![1.0f64; space.len()];
    let mut nontrivial_x2 = false;
    for &idx in &finite {
        let block = current[idx].as_ref().expect("finite block");
        let (coeffs, _) = si.coords_checked(idx, block)?;
        let c0 = &coeffs[0];
        let c0_resid = idempotency_residual(c0);
        if c0_resid > tol.tol_idem.max(1e-7) {
            return Err(SidError::NotIdempotent {
                residual: c0_resid,
                tol: tol.tol_idem.max(1e-7),
            });
        }
        let (proj, y, y_inv) = reduce_pointwise_full(c0, tol)?;
        let n = si.fiber(idx).n;
        let id_n = CMat::identity(n, n);
        if fnorm(&(&y - CMat::identity(m, m))) > 0.0 {
            nontrivial_x2 = true;
            // the kron with the identity preserves singular values
            x2_cond[idx] = condition_number(&y);
        }
        x2_blocks[idx] = Some(kron(&y, &id_n));
        x2_inv_blocks[idx] = Some(kron(&y_inv, &id_n));
        projections[idx] = Some(proj);
    }
    let x2 = MatrixField::new(space.clone(), x2_blocks)?;
    let x2_inv = MatrixField::new(space.clone(), x2_inv_blocks)?;
    if nontrivial_x2 {
        for &idx in &finite {
            let b = current[idx].take().expect("finite block");
            current[idx] = Some(x2.expect_block(idx)? * b * x2_inv.expect_block(idx)?);
        }
    }
    cert.compose(
        &x2,
        &x2_inv,
        &x2_cond,
        CertificateFactor {
            kind: FactorKind::PointwiseReduction,
            description: "per-atom reduction of the degree-zero coefficient".into(),
            field: if nontrivial_x2 { Some(x2.clone()) } else { None },
        },
        tol,
    )?;

    // step 3: nested supports. Leading-ones projections are already nested
    // across atoms, so the reorder permutation is the identity.
    cert.construction_log.push(CertificateFactor {
        kind: FactorKind::SupportReorder,
        description: "supports already nested under the leading-ones convention".into(),
        field: None,
    });

    // step 4: shear sweeps, one nilpotent degree at a time
    let max_degree = finite
        .iter()
        .map(|&idx| si.fiber(idx).n)
        .max()
        .unwrap_or(1);
    for degree in 1..max_degree {
        let mut f_blocks: Vec<Option<CMat>> = vec![None; space.len()];
        let mut f_inv_blocks: Vec<Option<CMat>> = vec![None; space.len()];
        let mut f_cond = vec![1.0f64; space.len()];
        let mut any = false;
        for &idx in &finite {
            let fb = si.fiber(idx);
            let n = fb.n;
            let mn = m * n;
            if degree >= n {
                f_blocks[idx] = Some(CMat::identity(mn, mn));
                f_inv_blocks[idx] = Some(CMat::identity(mn, mn));
                continue;
            }
            let block = current[idx].as_ref().expect("finite block");
            let (coeffs, _) = si.coords_checked(idx, block)?;
            let d = &coeffs[degree];
            let proj = projections[idx].as_ref().expect("projection");
            let perp = CMat::identity(m, m) - proj;
            let e = proj * d * &perp - &perp * d * proj;
            if fnorm(&e) <= 1e-13 * (1.0 + fnorm(block)) {
                f_blocks[idx] = Some(CMat::identity(mn, mn));
                f_inv_blocks[idx] = Some(CMat::identity(mn, mn));
                continue;
            }
            any = true;
            let f = kron(&e, &fb.powers[degree]);
            let x_block = CMat::identity(mn, mn) + &f;
            let x_inv_block = unipotent_inverse(&f);
            f_cond[idx] = fnorm(&x_block) * fnorm(&x_inv_block);
            f_blocks[idx] = Some(x_block);
            f_inv_blocks[idx] = Some(x_inv_block);
        }
        if !any {
            cert.construction_log.push(CertificateFactor {
                kind: FactorKind::ShearSweep(degree),
                description: format!("degree-{degree} coefficient already zero"),
                field: None,
            });
            continue;
        }
        let xf = MatrixField::new(space.clone(), f_blocks)?;
        let xf_inv = MatrixField::new(space.clone(), f_inv_blocks)?;
        for &idx in &finite {
            let b = current[idx].take().expect("finite block");
            current[idx] = Some(xf.expect_block(idx)? * b * xf_inv.expect_block(idx)?);
        }
        cert.compose(
            &xf,
            &xf_inv,
            &f_cond,
            CertificateFactor {
                kind: FactorKind::ShearSweep(degree),
                description: format!("unipotent shear eliminating the degree-{degree} coefficient"),
                field: Some(xf.clone()),
            },
            tol,
        )?;
    }

    // final rounding gate: the conjugated field must be the exact pattern
    let mut out_blocks: Vec<Option<CMat>> = vec![None; space.len()];
    for &idx in &finite {
        let n = si.fiber(idx).n;
        let proj = projections[idx].as_ref().expect("projection");
        let target = kron(proj, &CMat::identity(n, n));
        let got = current[idx].as_ref().expect("finite block");
        let resid = fnorm(&(got - &target));
        if resid > 1e-6 * (1.0 + fnorm(got)) {
            return Err(SidError::SingularCertificate {
                condition: resid / f64::EPSILON,
                cap: tol.kappa_max,
            });
        }
        out_blocks[idx] = Some(target);
    }
    let projection_field = MatrixField::new(space, out_blocks)?;
    let projection = IdempotentField::new(projection_field, q.ambient.clone(), tol)?;
    cert.finalize(tol)?;
    Ok((projection, cert))
}

/// Extracts `m` pairwise-orthogonal members of normalized rank one per atom
/// from the lattice generated by a commuting family: refine the partition of
/// the identity by every generator and its complement, then glue the minimal
/// pieces across atoms by signature order.
pub fn extract_minimal_family(
    family: &[IdempotentField],
    m: usize,
    tol: &Tolerances,
) -> Result<Vec<IdempotentField>> {
    if family.is_empty() {
        return Err(SidError::InvalidInput("empty family".into()));
    }
    for q in family {
        if q.ambient.m != m || !q.ambient.same_base(&family[0].ambient) {
            return Err(SidError::DifferentBaseOperator);
        }
    }
    // abelian gate
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            for idx in family[i].field.space().finite_atom_indices() {
                let a = family[i].field.expect_block(idx)?;
                let b = family[j].field.expect_block(idx)?;
                let resid = commutation_residual(a, b);
                if resid > tol.tol_idem {
                    return Err(SidError::NotAbelian { residual: resid });
                }
            }
        }
    }

    let space = family[0].field.space().clone();
    let base_space = family[0].ambient.operator.space().clone();
    let mut per_atom_pieces: Vec<Option<Vec<(Vec<bool>, CMat)>>> = vec![None; space.len()];
    for idx in space.finite_atom_indices() {
        let n = base_space.atoms()[idx]
            .fiber
            .finite()
            .expect("finite atom");
        let mn = space.atoms()[idx].fiber.finite().expect("finite atom");
        let mut pieces: Vec<(Vec<bool>, CMat)> = vec![(Vec::new(), CMat::identity(mn, mn))];
        for q in family {
            let g = q.field.expect_block(idx)?;
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for (sig, e) in pieces {
                let inside = &e * g;
                let outside = &e - &inside;
                for (bit, piece) in [(true, inside), (false, outside)] {
                    if idempotent_rank_fast(&piece, tol) > 0 {
                        let mut s = sig.clone();
                        s.push(bit);
                        next.push((s, piece));
                    }
                }
            }
            pieces = next;
        }
        // signature-descending order: kept-in-generator sorts first
        pieces.sort_by(|a, b| b.0.cmp(&a.0));
        for (_, piece) in &pieces {
            let r = idempotent_rank_fast(piece, tol);
            if r % n != 0 {
                return Err(SidError::RankNotMultipleOfN {
                    atom: base_space.atoms()[idx].label.clone(),
                    rank: r,
                    fiber_dim: n,
                });
            }
            if r / n > 1 {
                return Err(SidError::FamilyNotMaximal {
                    atom: base_space.atoms()[idx].label.clone(),
                    rank: r / n,
                });
            }
        }
        if pieces.len() != m {
            return Err(SidError::FamilyNotMaximal {
                atom: base_space.atoms()[idx].label.clone(),
                rank: m,
            });
        }
        per_atom_pieces[idx] = Some(pieces);
    }

    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let blocks: Vec<Option<CMat>> = per_atom_pieces
            .iter()
            .map(|p| p.as_ref().map(|pieces| pieces[i].1.clone()))
            .collect();
        let field = MatrixField::new(space.clone(), blocks)?;
        out.push(IdempotentField::new(
            field,
            family[0].ambient.clone(),
            tol,
        )?);
    }
    Ok(out)
}

/// Conjugates a maximal abelian family onto the standard diagonal family:
/// extract the minimal members, then fix them one diagonal position at a
/// time with corner reductions and shears, preserving the positions already
/// aligned.
pub fn align_family(
    family: &[IdempotentField],
    tol: &Tolerances,
) -> Result<SimilarityCertificate> {
    if family.is_empty() {
        return Err(SidError::InvalidInput("empty family".into()));
    }
    let m = family[0].ambient.m;
    let minimal = extract_minimal_family(family, m, tol)?;
    let si = SiAmplified::prepare(&family[0].ambient.operator, m, tol)?;
    let space = family[0].field.space().clone();
    let finite: Vec<usize> = space.finite_atom_indices().collect();

    let mut cert = SimilarityCertificate::identity(si.amplified.clone());
    let mut current: Vec<Vec<Option<CMat>>> = minimal
        .iter()
        .map(|q| q.field.blocks().to_vec())
        .collect();

    for pos in 0..m {
        // corner step: bring the degree-zero coefficient of member `pos` to
        // the rank-one unit at slot `pos`, acting only on slots >= pos
        let mut g_blocks: Vec<Option<CMat>> = vec![None; space.len()];
        let mut g_inv_blocks: Vec<Option<CMat>> = vec![None; space.len()];
        let mut g_cond = vec![1.0f64; space.len()];
        let mut nontrivial = false;
        for &idx in &finite {
            let fb = si.fiber(idx);
            let n = fb.n;
            let block = current[pos][idx].as_ref().expect("finite block");
            let (coeffs, _) = si.coords_checked(idx, block)?;
            let c0 = &coeffs[0];
            let corner = m - pos;
            let sub = c0.view((pos, pos), (corner, corner)).clone_owned();
            let g_corner = rank_one_reducer(&sub, tol)?;
            let mut g = CMat::identity(m, m);
            g.view_mut((pos, pos), (corner, corner)).copy_from(&g_corner);
            let (g_inv, cond) = guarded_inverse(&g, tol.tol_sing)?;
            if fnorm(&(&g - CMat::identity(m, m))) > 0.0 {
                nontrivial = true;
                g_cond[idx] = cond;
            }
            g_blocks[idx] = Some(kron(&g, &CMat::identity(n, n)));
            g_inv_blocks[idx] = Some(kron(&g_inv, &CMat::identity(n, n)));
        }
        let xg = MatrixField::new(space.clone(), g_blocks)?;
        let xg_inv = MatrixField::new(space.clone(), g_inv_blocks)?;
        if nontrivial {
            conjugate_all(&mut current, &xg, &xg_inv, &finite)?;
        }
        cert.compose(
            &xg,
            &xg_inv,
            &g_cond,
            CertificateFactor {
                kind: FactorKind::CornerAlign(pos),
                description: format!("corner reduction placing member {pos} at slot {pos}"),
                field: if nontrivial { Some(xg.clone()) } else { None },
            },
            tol,
        )?;

        // shear sweeps for member `pos`, supported on the corner
        let max_degree = finite.iter().map(|&i| si.fiber(i).n).max().unwrap_or(1);
        for degree in 1..max_degree {
            let mut f_blocks: Vec<Option<CMat>> = vec![None; space.len()];
            let mut f_inv_blocks: Vec<Option<CMat>> = vec![None; space.len()];
            let mut f_cond = vec![1.0f64; space.len()];
            let mut any = false;
            for &idx in &finite {
                let fb = si.fiber(idx);
                let n = fb.n;
                let mn = m * n;
                if degree >= n {
                    f_blocks[idx] = Some(CMat::identity(mn, mn));
                    f_inv_blocks[idx] = Some(CMat::identity(mn, mn));
                    continue;
                }
                let block = current[pos][idx].as_ref().expect("finite block");
                let (coeffs, _) = si.coords_checked(idx, block)?;
                let d = &coeffs[degree];
                let unit = {
                    let mut u = CMat::zeros(m, m);
                    u[(pos, pos)] = c64(1.0, 0.0);
                    u
                };
                let e = &unit * d - d * &unit;
                if fnorm(&e) <= 1e-13 * (1.0 + fnorm(block)) {
                    f_blocks[idx] = Some(CMat::identity(mn, mn));
                    f_inv_blocks[idx] = Some(CMat::identity(mn, mn));
                    continue;
                }
                any = true;
                let f = kron(&e, &fb.powers[degree]);
                let x_block = CMat::identity(mn, mn) + &f;
                let x_inv_block = unipotent_inverse(&f);
                f_cond[idx] = fnorm(&x_block) * fnorm(&x_inv_block);
                f_blocks[idx] = Some(x_block);
                f_inv_blocks[idx] = Some(x_inv_block);
            }
            if !any {
                cert.construction_log.push(CertificateFactor {
                    kind: FactorKind::ShearSweep(degree),
                    description: format!("member {pos} degree-{degree} coefficient already zero"),
                    field: None,
                });
                continue;
            }
            let xf = MatrixField::new(space.clone(), f_blocks)?;
            let xf_inv = MatrixField::new(space.clone(), f_inv_blocks)?;
            conjugate_all(&mut current, &xf, &xf_inv, &finite)?;
            cert.compose(
                &xf,
                &xf_inv,
                &f_cond,
                CertificateFactor {
                    kind: FactorKind::ShearSweep(degree),
                    description: format!(
                        "corner shear for member {pos}, degree {degree}"
                    ),
                    field: Some(xf.clone()),
                },
                tol,
            )?;
        }

        // member `pos` must now be the exact standard projection
        for &idx in &finite {
            let n = si.fiber(idx).n;
            let mut unit = CMat::zeros(m, m);
            unit[(pos, pos)] = c64(1.0, 0.0);
            let target = kron(&unit, &CMat::identity(n, n));
            let got = current[pos][idx].as_ref().expect("finite block");
            let resid = fnorm(&(got - &target));
            if resid > 1e-6 * (1.0 + fnorm(got)) {
                return Err(SidError::SingularCertificate {
                    condition: resid / f64::EPSILON,
                    cap: tol.kappa_max,
                });
            }
            current[pos][idx] = Some(target);
        }
    }
    cert.finalize(tol)?;
    Ok(cert)
}

fn conjugate_all(
    members: &mut [Vec<Option<CMat>>],
    x: &MatrixField,
    x_inv: &MatrixField,
    finite: &[usize],
) -> Result<()> {
    for member in members.iter_mut() {
        for &idx in finite {
            let b = member[idx].take().expect("finite block");
            member[idx] = Some(x.expect_block(idx)? * b * x_inv.expect_block(idx)?);
        }
    }
    Ok(())
}

/// For a rank-one idempotent `C = x y*` (with `y* x = 1`), returns `G` with
/// `G C G^{-1} = e_11`: the columns of `G^{-1}` are `x` followed by a basis
/// of `ker(y*)`.
fn rank_one_reducer(c0: &CMat, tol: &Tolerances) -> Result<CMat> {
    let k = c0.nrows();
    if let Some(pattern) = snap_leading_ones(c0, 1e-12 * (1.0 + fnorm(c0))) {
        if pattern[(0, 0)] == c64(1.0, 0.0) && crate::linalg::rank(&pattern, 0.5) == 1 {
            return Ok(CMat::identity(k, k));
        }
    }
    let resid = idempotency_residual(c0);
    if resid > tol.tol_idem.max(1e-7) {
        return Err(SidError::NotIdempotent {
            residual: resid,
            tol: tol.tol_idem.max(1e-7),
        });
    }
    let svd = JacobiSvd::new(c0, false);
    let sigma = svd.sigma[0];
    if idempotent_rank_fast(c0, tol) != 1 {
        return Err(SidError::InvalidInput(
            "corner coefficient is not rank one".into(),
        ));
    }
    let u = svd.u.column(0).into_owned();
    let v = svd.v.column(0).into_owned();
    // C = sigma u v*; x = sigma u and y = v satisfy y* x = 1
    let x = u * c64(sigma, 0.0);
    let mut cols: Vec<crate::linalg::CVec> = vec![x];
    cols.extend(crate::linalg::orthogonal_complement(k, &[v]));
    if cols.len() != k {
        return Err(SidError::InvalidInput(
            "rank-one factorization degenerated".into(),
        ));
    }
    let g_inv = CMat::from_columns(&cols);
    let (g, _) = guarded_inverse(&g_inv, tol.tol_sing)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::direct_sum_all;
    use crate::space::FiberDim;
    use std::sync::Arc;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tolerances() -> Tolerances {
        Tolerances::default()
    }

    fn rand_c64(rng: &mut ChaCha8Rng) -> C64 {
        c64(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    }

    /// random invertible with condition number at most `cap`
    fn rand_conjugator(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> CMat {
        loop {
            let mut g = CMat::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += rand_c64(rng) * c64(0.8, 0.0);
                }
            }
            if condition_number(&g) <= cap {
                return g;
            }
        }
    }

    #[test]
    fn reduce_shear_example() {
        let tol = tolerances();
        let r = c64(1.7, -0.4);
        let p = CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), r, C64::default(), C64::default()]);
        let (proj, y) = reduce_pointwise(&p, &tol).unwrap();
        assert_eq!(is_leading_ones_diagonal(&proj), Some(1));
        assert!((y[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-10);
        assert!((y[(0, 1)] - r).norm() < 1e-10);
        assert!(y[(1, 0)].norm() < 1e-10);
        assert!((y[(1, 1)] - c64(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn reduce_zero_and_identity_are_fixed_points() {
        let tol = tolerances();
        let z = CMat::zeros(3, 3);
        let (proj, y) = reduce_pointwise(&z, &tol).unwrap();
        assert_eq!(proj, z);
        assert_eq!(y, CMat::identity(3, 3));
        let id = CMat::identity(3, 3);
        let (proj, y) = reduce_pointwise(&id, &tol).unwrap();
        assert_eq!(proj, id);
        assert_eq!(y, CMat::identity(3, 3));
    }

    #[test]
    fn reduce_random_rank_two() {
        let tol = tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = rand_conjugator(&mut rng, 4, 100.0);
            let gi = g.clone().try_inverse().unwrap();
            let seed = leading_ones(4, 2);
            let p = &g * &seed * &gi;
            let (proj, y) = reduce_pointwise(&p, &tol).unwrap();
            assert_eq!(is_leading_ones_diagonal(&proj), Some(2));
            let yi = y.clone().try_inverse().unwrap();
            let resid = fnorm(&(&y * &p * &yi - &proj));
            assert!(resid < 1e-9, "residual {resid}");
            // norm bound: unitary times unit shear
            let ynorm = singular_values(&y)[0];
            let pnorm = singular_values(&p)[0];
            assert!(ynorm <= 1.0 + pnorm + 1e-9);
        }
    }

    #[test]
    fn reduce_rejects_non_idempotents() {
        let tol = tolerances();
        let m = CMat::identity(2, 2) * c64(0.5, 0.0);
        assert!(matches!(
            reduce_pointwise(&m, &tol),
            Err(SidError::NotIdempotent { .. })
        ));
    }

    /// base operator: per-atom SI triangular with the given diagonal values
    fn base_operator(n: usize, phis: &[C64]) -> MatrixField {
        let descs: Vec<(String, f64, FiberDim)> = (0..phis.len())
            .map(|i| (format!("a{i}"), 1.0, FiberDim::Finite(n)))
            .collect();
        let space = Arc::new(crate::space::AtomicSpace::build(&descs).unwrap());
        let blocks = phis
            .iter()
            .enumerate()
            .map(|(i, &phi)| {
                let mut b = CMat::identity(n, n) * phi;
                for k in 0..n - 1 {
                    b[(k, k + 1)] = c64(1.0 + 0.3 * (i + k) as f64, 0.2);
                }
                if n >= 3 {
                    b[(0, n - 1)] = c64(0.4, -0.1);
                }
                Some(b)
            })
            .collect();
        MatrixField::new(space, blocks).unwrap()
    }

    /// seeded diagonal projection over the amplification: per-atom ranks `rs`
    fn seed_projection(t: &MatrixField, m: usize, rs: &[usize]) -> MatrixField {
        let amp_space = t.amplify(m).unwrap().space().clone();
        let blocks = t
            .space()
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.fiber.finite().map(|n| {
                    kron(&leading_ones(m, rs[i]), &CMat::identity(n, n))
                })
            })
            .collect();
        MatrixField::new(amp_space, blocks).unwrap()
    }

    /// random invertible member of `M_m({T}')` with per-atom condition <= cap
    fn rand_commutant_conjugator(
        rng: &mut ChaCha8Rng,
        t: &MatrixField,
        m: usize,
        cap: f64,
        tol: &Tolerances,
    ) -> (MatrixField, MatrixField) {
        let form = validate_si_form(t, tol).unwrap();
        let amp_space = t.amplify(m).unwrap().space().clone();
        let mut blocks: Vec<Option<CMat>> = vec![None; t.space().len()];
        let mut inv_blocks: Vec<Option<CMat>> = vec![None; t.space().len()];
        for (i, a) in t.space().atoms().iter().enumerate() {
            let n = a.fiber.finite().unwrap();
            let nil = form.nilpotent_part(i).unwrap().clone();
            loop {
                let mut g = CMat::zeros(m * n, m * n);
                let mut pw = CMat::identity(n, n);
                for k in 0..n {
                    let mut c = CMat::zeros(m, m);
                    for p in 0..m {
                        for q in 0..m {
                            c[(p, q)] = rand_c64(rng) * c64(0.7, 0.0);
                        }
                    }
                    if k == 0 {
                        c += CMat::identity(m, m);
                    }
                    g += kron(&c, &pw);
                    pw = &pw * &nil;
                }
                if condition_number(&g) <= cap {
                    let gi = g.clone().try_inverse().unwrap();
                    blocks[i] = Some(g);
                    inv_blocks[i] = Some(gi);
                    break;
                }
            }
        }
        (
            MatrixField::new(amp_space.clone(), blocks).unwrap(),
            MatrixField::new(amp_space, inv_blocks).unwrap(),
        )
    }

    #[test]
    fn canonicalize_fixed_point() {
        let tol = tolerances();
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(2.0, 0.0)]);
        let seed = seed_projection(&t, 2, &[1, 2, 0]);
        let q = IdempotentField::new(seed.clone(), Ambient::new(t, 2), &tol).unwrap();
        let (proj, cert) = canonicalize_in_commutant(&q, &tol).unwrap();
        assert_eq!(proj.field, seed);
        let id = MatrixField::identity(cert.x.space().clone());
        assert_eq!(cert.x, id);
    }

    #[test]
    fn canonicalize_recovers_seeded_profile() {
        let tol = tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(-0.5, 0.3)]);
        let m = 2;
        let seed = seed_projection(&t, m, &[1, 2, 0]);
        let (g, gi) = rand_commutant_conjugator(&mut rng, &t, m, 100.0, &tol);
        let q_field = g.mul(&seed).unwrap().mul(&gi).unwrap();
        let q = IdempotentField::new(q_field, Ambient::new(t.clone(), m), &tol).unwrap();
        let (proj, cert) = canonicalize_in_commutant(&q, &tol).unwrap();
        // ranks survive
        let rp = rank_profile(&proj, &tol).unwrap();
        assert_eq!(
            rp.per_atom,
            vec![Some(1), Some(2), Some(0)]
        );
        // the certificate conjugates q onto the projection
        let mapped = cert.conjugate(&q.field).unwrap();
        let dist = mapped.distance(&proj.field).unwrap();
        assert!(dist < 1e-8, "distance {dist}");
        // and commutes with the amplification
        assert!(cert.commutation_residual() < 1e-8);
    }

    #[test]
    fn canonicalize_m1_gives_zero_one_blocks() {
        let tol = tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = base_operator(2, &[c64(0.1, 0.0), c64(0.9, 0.0)]);
        let seed = seed_projection(&t, 1, &[1, 0]);
        let (g, gi) = rand_commutant_conjugator(&mut rng, &t, 1, 50.0, &tol);
        let q_field = g.mul(&seed).unwrap().mul(&gi).unwrap();
        let q = IdempotentField::new(q_field, Ambient::new(t, 1), &tol).unwrap();
        let (proj, _) = canonicalize_in_commutant(&q, &tol).unwrap();
        let b0 = proj.field.block(0).unwrap();
        let b1 = proj.field.block(1).unwrap();
        assert_eq!(b0, &CMat::identity(2, 2));
        assert_eq!(b1, &CMat::zeros(2, 2));
    }

    #[test]
    fn rank_profile_of_identity_and_zero() {
        let tol = tolerances();
        let t = base_operator(3, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let m = 3;
        let amb = Ambient::new(t.clone(), m);
        let id = MatrixField::identity(t.amplify(m).unwrap().space().clone());
        let q = IdempotentField::new(id, amb.clone(), &tol).unwrap();
        let rp = rank_profile(&q, &tol).unwrap();
        assert_eq!(rp.per_atom, vec![Some(3), Some(3)]);
        assert!(rp.is_constant);

        let zero = seed_projection(&t, m, &[0, 0]);
        let qz = IdempotentField::new(zero, amb, &tol).unwrap();
        let rp = rank_profile(&qz, &tol).unwrap();
        assert_eq!(rp.per_atom, vec![Some(0), Some(0)]);
    }

    fn standard_family(t: &MatrixField, m: usize, tol: &Tolerances) -> Vec<IdempotentField> {
        (0..m)
            .map(|i| {
                let amp_space = t.amplify(m).unwrap().space().clone();
                let blocks = t
                    .space()
                    .atoms()
                    .iter()
                    .map(|a| {
                        a.fiber.finite().map(|n| {
                            let mut u = CMat::zeros(m, m);
                            u[(i, i)] = c64(1.0, 0.0);
                            kron(&u, &CMat::identity(n, n))
                        })
                    })
                    .collect();
                let f = MatrixField::new(amp_space, blocks).unwrap();
                IdempotentField::new(f, Ambient::new(t.clone(), m), tol).unwrap()
            })
            .collect()
    }

    #[test]
    fn extract_from_sums_returns_standard_projections() {
        let tol = tolerances();
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let m = 2;
        let std_fam = standard_family(&t, m, &tol);
        // the family of all sums: 0, E1, E2, E1+E2
        let sum = std_fam[0].field.add(&std_fam[1].field).unwrap();
        let zero = std_fam[0].field.sub(&std_fam[0].field).unwrap();
        let amb = Ambient::new(t, m);
        let family = vec![
            IdempotentField::new(zero, amb.clone(), &tol).unwrap(),
            std_fam[0].clone(),
            std_fam[1].clone(),
            IdempotentField::new(sum, amb, &tol).unwrap(),
        ];
        let minimal = extract_minimal_family(&family, m, &tol).unwrap();
        assert_eq!(minimal.len(), 2);
        assert_eq!(minimal[0].field, std_fam[0].field);
        assert_eq!(minimal[1].field, std_fam[1].field);
    }

    #[test]
    fn extract_detects_missing_intermediate_ranks() {
        let tol = tolerances();
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let m = 2;
        let amp_space = t.amplify(m).unwrap().space().clone();
        // identity on atom 0 (no splitting there), E1 on atom 1
        let mut u = CMat::zeros(m, m);
        u[(0, 0)] = c64(1.0, 0.0);
        let blocks = vec![
            Some(CMat::identity(4, 4)),
            Some(kron(&u, &CMat::identity(2, 2))),
        ];
        let f = MatrixField::new(amp_space, blocks).unwrap();
        let q = IdempotentField::new(f, Ambient::new(t, m), &tol).unwrap();
        let err = extract_minimal_family(&[q], m, &tol).unwrap_err();
        assert!(matches!(err, SidError::FamilyNotMaximal { .. }));
    }

    #[test]
    fn extract_from_conjugated_family_gives_orthogonal_rank_ones() {
        let tol = tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let m = 3;
        let std_fam = standard_family(&t, m, &tol);
        let (g, gi) = rand_commutant_conjugator(&mut rng, &t, m, 100.0, &tol);
        let fam: Vec<IdempotentField> = std_fam
            .iter()
            .map(|q| {
                let f = g.mul(&q.field).unwrap().mul(&gi).unwrap();
                IdempotentField::new(f, q.ambient.clone(), &tol).unwrap()
            })
            .collect();
        let minimal = extract_minimal_family(&fam, m, &tol).unwrap();
        assert_eq!(minimal.len(), m);
        for (i, qi) in minimal.iter().enumerate() {
            let profile = rank_profile(qi, &tol).unwrap();
            assert!(profile.per_atom.iter().flatten().all(|&r| r == 1));
            for qj in minimal.iter().skip(i + 1) {
                let prod = qi.field.mul(&qj.field).unwrap();
                assert!(prod.norm_max() < 1e-8, "members not orthogonal");
            }
        }
    }

    #[test]
    fn align_standard_family_is_identity() {
        let tol = tolerances();
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let fam = standard_family(&t, 2, &tol);
        let cert = align_family(&fam, &tol).unwrap();
        let id = MatrixField::identity(cert.x.space().clone());
        assert_eq!(cert.x, id);
    }

    #[test]
    fn align_conjugated_family_and_compose_pairs() {
        let tol = tolerances();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = base_operator(2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.5, -0.5)]);
        let m = 3;
        let std_fam = standard_family(&t, m, &tol);
        let conjugated = |rng: &mut ChaCha8Rng| {
            let (g, gi) = rand_commutant_conjugator(rng, &t, m, 100.0, &tol);
            let fam: Vec<IdempotentField> = std_fam
                .iter()
                .map(|q| {
                    let f = g.mul(&q.field).unwrap().mul(&gi).unwrap();
                    IdempotentField::new(f, q.ambient.clone(), &tol).unwrap()
                })
                .collect();
            fam
        };
        let f1 = conjugated(&mut rng);
        let f2 = conjugated(&mut rng);
        let c1 = align_family(&f1, &tol).unwrap();
        let c2 = align_family(&f2, &tol).unwrap();
        // position-wise alignment to the standard family
        for (i, q) in f1.iter().enumerate() {
            let mapped = c1.conjugate(&q.field).unwrap();
            let dist = mapped.distance(&std_fam[i].field).unwrap();
            assert!(dist < 1e-8, "member {i} distance {dist}");
        }
        // composed certificate maps family 1 onto family 2
        let w = c2.x_inv.mul(&c1.x).unwrap();
        let w_inv = c1.x_inv.mul(&c2.x).unwrap();
        for (q1, q2) in f1.iter().zip(&f2) {
            let mapped = w.mul(&q1.field).unwrap().mul(&w_inv).unwrap();
            let dist = mapped.distance(&q2.field).unwrap();
            assert!(dist < 1e-6, "composition distance {dist}");
        }
    }

    #[test]
    fn kron_layout_matches_amplification() {
        // amplify is I_m (x) T in the kron convention used by the pipeline
        let t = base_operator(2, &[c64(0.3, 0.0)]);
        let amp = t.amplify(2).unwrap();
        let got = amp.block(0).unwrap();
        let want = kron(&CMat::identity(2, 2), t.block(0).unwrap());
        assert_eq!(got, &want);
        let _ = direct_sum_all(&[CMat::identity(1, 1)]);
    }
}
