//! Small dense complex linear-algebra helpers shared by the whole crate.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Result, SidError};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Frobenius norm. Used as the residual scale everywhere in the crate.
pub fn fnorm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Kronecker product `a (x) b`: block (i,j) of the result is `a[(i,j)] * b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMat::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let s = a[(i, j)];
            if s != C64::default() {
                for p in 0..rb {
                    for q in 0..cb {
                        out[(i * rb + p, j * cb + q)] = s * b[(p, q)];
                    }
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_iterator(m.nrows() * m.ncols(), m.iter().cloned())
}

/// Inverse of [`vec_of`] for an `r x c` matrix.
pub fn unvec(v: &CVec, r: usize, c: usize) -> CMat {
    CMat::from_iterator(r, c, v.iter().cloned())
}

/// Matrix of the Sylvester map `X -> T X - X T` acting on vec(X).
pub fn sylvester_matrix(t: &CMat) -> CMat {
    let n = t.nrows();
    let id = CMat::identity(n, n);
    kron(&id, t) - kron(&t.transpose(), &id)
}

/// One-sided Jacobi SVD of an `m x n` matrix with `m >= n`.
///
/// nalgebra's Golub-Kahan SVD mis-factors certain complex rank-deficient
/// matrices (the recomposition error reaches 1e-2), so every singular-value
/// computation in this crate goes through this routine instead. `v` is a
/// product of exact plane rotations and is unitary to machine precision;
/// the columns of `u` are the normalized orthogonalized columns of `a v`.
pub struct JacobiSvd {
    /// `m x m` unitary when built with `full_u`, otherwise `m x n` with
    /// zero columns at zero singular values.
    pub u: CMat,
    /// Singular values in descending order, length `n`.
    pub sigma: Vec<f64>,
    /// `n x n` unitary; column `k` is the right singular vector for
    /// `sigma[k]`.
    pub v: CMat,
}

impl JacobiSvd {
    pub fn new(a: &CMat, full_u: bool) -> JacobiSvd {
        let (m, n) = a.shape();
        assert!(m >= n, "jacobi svd expects a tall or square matrix");
        let mut w = a.clone();
        let mut v = CMat::identity(n, n);
        // columns this far below the matrix scale are rounding debris from
        // earlier rotations; zero them so they cannot poison later pairs
        let col_floor = 1e-150 * fnorm(a).max(f64::MIN_POSITIVE);

        for _sweep in 0..64 {
            let mut off = 0.0f64;
            for i in 0..n.saturating_sub(1) {
                for j in (i + 1)..n {
                    let mut aii = 0.0f64;
                    let mut ajj = 0.0f64;
                    let mut aij = C64::default();
                    for r in 0..m {
                        aii += w[(r, i)].norm_sqr();
                        ajj += w[(r, j)].norm_sqr();
                        aij += w[(r, i)].conj() * w[(r, j)];
                    }
                    if aii.sqrt() <= col_floor {
                        for r in 0..m {
                            w[(r, i)] = C64::default();
                        }
                        aii = 0.0;
                    }
                    if ajj.sqrt() <= col_floor {
                        for r in 0..m {
                            w[(r, j)] = C64::default();
                        }
                        ajj = 0.0;
                    }
                    let denom = aii.sqrt() * ajj.sqrt();
                    let g = aij.norm();
                    if denom == 0.0 || g <= 1e-15 * denom {
                        continue;
                    }
                    off = off.max(g / denom);
                    // component-wise scalar division: the complex-division
                    // formula underflows for subnormal inner products
                    let phase = c64(aij.re / g, aij.im / g);
                    let tau = (ajj - aii) / (2.0 * g);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    // right-multiply columns (i, j) by the unitary
                    // [[c, s*phase], [-s*conj(phase), c]]
                    let (cs, sp, spc) = (c64(c, 0.0), phase * c64(s, 0.0), phase.conj() * c64(s, 0.0));
                    for r in 0..m {
                        let wi = w[(r, i)];
                        let wj = w[(r, j)];
                        w[(r, i)] = wi * cs - wj * spc;
                        w[(r, j)] = wi * sp + wj * cs;
                    }
                    for r in 0..n {
                        let vi = v[(r, i)];
                        let vj = v[(r, j)];
                        v[(r, i)] = vi * cs - vj * spc;
                        v[(r, j)] = vi * sp + vj * cs;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }

        // sort by descending column norm, stable in the original index
        let mut order: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));
        let sigma: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
        let v = CMat::from_columns(&order.iter().map(|&k| v.column(k).into_owned()).collect::<Vec<_>>());
        let sigma_max = sigma.first().cloned().unwrap_or(0.0);
        let floor = sigma_max * (m.max(n) as f64) * f64::EPSILON;

        let mut u_cols: Vec<CVec> = Vec::with_capacity(if full_u { m } else { n });
        for (slot, &k) in order.iter().enumerate() {
            let s = sigma[slot];
            if s > floor && s > 0.0 {
                u_cols.push(w.column(k).into_owned() / c64(s, 0.0));
            } else {
                u_cols.push(CVec::zeros(m));
            }
        }
        if full_u {
            complete_orthonormal(&mut u_cols, m);
        }
        let u = CMat::from_columns(&u_cols);
        JacobiSvd { u, sigma, v }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().cloned().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma.last().cloned().unwrap_or(0.0)
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.sigma_max();
        if smax == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_tol * smax).count()
    }

    /// Minimum-norm least squares solve, dropping directions below
    /// `rel_tol * sigma_max`.
    pub fn solve(&self, b: &CVec, rel_tol: f64) -> CVec {
        let n = self.v.nrows();
        let smax = self.sigma_max();
        let mut x = CVec::zeros(n);
        for k in 0..self.sigma.len() {
            let s = self.sigma[k];
            if s > rel_tol * smax && s > 0.0 {
                let uk = self.u.column(k);
                let coef: C64 = uk.iter().zip(b.iter()).map(|(a, c)| a.conj() * c).sum();
                x += self.v.column(k) * (coef / c64(s, 0.0));
            }
        }
        x
    }
}

/// Replaces zero columns by a deterministic orthonormal completion against
/// the nonzero ones, scanning the standard basis.
fn complete_orthonormal(cols: &mut Vec<CVec>, m: usize) {
    let have: Vec<CVec> = cols.iter().filter(|c| c.norm() > 0.5).cloned().collect();
    let mut fresh: Vec<CVec> = Vec::new();
    let needed = m - have.len();
    let mut e_idx = 0usize;
    while fresh.len() < needed && e_idx < m {
        let mut cand = CVec::zeros(m);
        cand[e_idx] = c64(1.0, 0.0);
        e_idx += 1;
        for _ in 0..2 {
            for b in have.iter().chain(fresh.iter()) {
                let coef: C64 = b.iter().zip(cand.iter()).map(|(x, y)| x.conj() * y).sum();
                cand -= b * coef;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-3 {
            fresh.push(cand / c64(nrm, 0.0));
        }
    }
    debug_assert_eq!(fresh.len(), needed, "orthonormal completion fell short");
    let mut next = fresh.into_iter();
    for col in cols.iter_mut() {
        if col.norm() <= 0.5 {
            if let Some(f) = next.next() {
                *col = f;
            }
        }
    }
    while cols.len() < m {
        match next.next() {
            Some(f) => cols.push(f),
            None => break,
        }
    }
}

pub struct NullspaceReport {
    /// Orthonormal (trace inner product after unvec) kernel basis vectors.
    pub basis: Vec<CVec>,
    pub sigma_max: f64,
}

/// Kernel basis of `m` at the relative singular-value threshold `rel_tol`.
pub fn nullspace(m: &CMat, rel_tol: f64) -> NullspaceReport {
    let svd = JacobiSvd::new(m, false);
    let sigma_max = svd.sigma_max();
    let mut basis = Vec::new();
    for k in 0..svd.sigma.len() {
        if svd.sigma[k] <= rel_tol * sigma_max {
            basis.push(svd.v.column(k).into_owned());
        }
    }
    NullspaceReport { basis, sigma_max }
}

/// Numerical rank at the relative threshold `rel_tol`.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    JacobiSvd::new(m, false).rank(rel_tol)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    JacobiSvd::new(m, false).sigma
}

/// 2-norm condition number; `f64::INFINITY` when the smallest singular value
/// is zero.
pub fn condition_number(m: &CMat) -> f64 {
    let svd = JacobiSvd::new(m, false);
    let smin = svd.sigma_min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        svd.sigma_max() / smin
    }
}

/// Inverse with a relative singular-value guard. Returns the inverse and the
/// condition number.
pub fn guarded_inverse(m: &CMat, rel_tol: f64) -> Result<(CMat, f64)> {
    let svd = JacobiSvd::new(m, false);
    let smax = svd.sigma_max();
    let smin = svd.sigma_min();
    if smin <= rel_tol * smax || smin == 0.0 {
        return Err(SidError::SingularBlock {
            atom: String::new(),
            condition: if smin == 0.0 { f64::INFINITY } else { smax / smin },
        });
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(SidError::SingularBlock {
            atom: String::new(),
            condition: f64::INFINITY,
        })?;
    Ok((inv, smax / smin))
}

/// Exact inverse of `I + F` for nilpotent `F`, via the terminating Neumann series.
pub fn unipotent_inverse(f: &CMat) -> CMat {
    let n = f.nrows();
    let mut inv = CMat::identity(n, n);
    let mut pw = f.clone();
    let mut sign = -1.0;
    for _ in 0..n {
        if fnorm(&pw) == 0.0 {
            break;
        }
        inv += &pw * c64(sign, 0.0);
        pw = &pw * f;
        sign = -sign;
    }
    inv
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// `||a b - b a||_F` scaled by `||a||_F * ||b||_F` (1.0 floor on each factor).
pub fn commutation_residual(a: &CMat, b: &CMat) -> f64 {
    fnorm(&commutator(a, b)) / (fnorm(a).max(1.0) * fnorm(b).max(1.0))
}

/// `||m^2 - m||_F / (1 + ||m||_F^2)`.
pub fn idempotency_residual(m: &CMat) -> f64 {
    fnorm(&(m * m - m)) / (1.0 + fnorm(m).powi(2))
}

pub fn max_lower_triangular(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i.min(m.ncols()) {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Strictly upper-triangular part.
pub fn strict_upper_part(m: &CMat) -> CMat {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..=i.min(m.ncols() - 1) {
            out[(i, j)] = C64::default();
        }
    }
    out
}

/// Direct sum `diag(a, b)`.
pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMat::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn direct_sum_all(blocks: &[CMat]) -> CMat {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(total, total);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Orthonormal basis of the orthogonal complement of `span(cols)` inside C^n,
/// with `cols` assumed linearly independent and near-unit.
pub fn orthogonal_complement(n: usize, cols: &[CVec]) -> Vec<CVec> {
    let k = cols.len();
    if k == 0 {
        return (0..n)
            .map(|i| {
                let mut e = CVec::zeros(n);
                e[i] = c64(1.0, 0.0);
                e
            })
            .collect();
    }
    if k >= n {
        return Vec::new();
    }
    if k == 1 {
        // Householder reflector sending the vector to a multiple of e1;
        // its remaining columns are the complement
        let v = &cols[0];
        let norm = v.norm();
        if norm == 0.0 {
            return orthogonal_complement(n, &[]);
        }
        let v1 = v[0];
        let phase = if v1.norm() > 0.0 {
            v1 / c64(v1.norm(), 0.0)
        } else {
            c64(1.0, 0.0)
        };
        let beta = -phase * c64(norm, 0.0);
        let mut w = v.clone();
        w[0] -= beta;
        let wn2 = w.norm_squared();
        if wn2 <= 1e-30 * norm * norm {
            return (1..n)
                .map(|i| {
                    let mut e = CVec::zeros(n);
                    e[i] = c64(1.0, 0.0);
                    e
                })
                .collect();
        }
        return (1..n)
            .map(|j| {
                // column j of I - 2 w w^H / (w^H w)
                let coef = w[j].conj() * c64(2.0 / wn2, 0.0);
                let mut col = &w * (-coef);
                col[j] += c64(1.0, 0.0);
                col
            })
            .collect();
    }
    let a = CMat::from_columns(cols);
    let svd = JacobiSvd::new(&a, true);
    let r = svd.rank(1e-12);
    (r..n).map(|i| svd.u.column(i).into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, data: &[f64]) -> CMat {
        CMat::from_iterator(rows, cols, data.iter().map(|&x| c64(x, 0.0)))
            .transpose()
            .transpose()
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let b = CMat::identity(3, 3);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(0, 3)], c64(2.0, 0.0));
        assert_eq!(k[(5, 5)], c64(1.0, 0.0));
    }

    #[test]
    fn vec_unvec_roundtrip() {
        let m = CMat::from_fn(3, 3, |i, j| c64(i as f64, j as f64));
        let v = vec_of(&m);
        let back = unvec(&v, 3, 3);
        assert_eq!(m, back);
    }

    #[test]
    fn sylvester_kernel_of_scalar_is_everything() {
        let t = CMat::identity(3, 3) * c64(2.5, 1.0);
        let k = sylvester_matrix(&t);
        let ns = nullspace(&k, 1e-10);
        assert_eq!(ns.basis.len(), 9);
    }

    #[test]
    fn unipotent_inverse_exact() {
        let mut f = CMat::zeros(3, 3);
        f[(0, 1)] = c64(2.0, -1.0);
        f[(1, 2)] = c64(0.5, 0.0);
        f[(0, 2)] = c64(1.0, 3.0);
        let x = CMat::identity(3, 3) + &f;
        let xi = unipotent_inverse(&f);
        let resid = fnorm(&(&x * &xi - CMat::identity(3, 3)));
        assert!(resid < 1e-14, "residual {resid}");
    }

    #[test]
    fn complement_spans_the_rest() {
        let mut e0 = CVec::zeros(3);
        e0[0] = c64(1.0, 0.0);
        let comp = orthogonal_complement(3, &[e0]);
        assert_eq!(comp.len(), 2);
        for v in &comp {
            assert!(v[0].norm() < 1e-12);
        }
    }

    #[test]
    fn rank_of_projection_pattern() {
        let m = cm(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(rank(&m, 1e-8), 2);
    }
}
