//! Numerical tolerances used throughout the pipeline.

use serde::{Deserialize, Serialize};

/// Tolerance bundle threaded through every operation that needs a threshold.
///
/// Scale conventions:
/// * `tol_diag`, `tol_zero` are multiplied by `1 + ||block||_F`;
/// * `tol_sing`, `tol_null`, `tol_rank` are relative to the largest singular value;
/// * `tol_eig` is relative to the spectral radius (a defectivity floor is added
///   by the eigenvalue clustering, see `jordan::si_test_general`);
/// * `tol_spec` is multiplied by `1 + max|phi|`;
/// * `tol_idem` is multiplied by `1 + ||Q||_F^2`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tolerances {
    pub tol_diag: f64,
    pub tol_sing: f64,
    pub tol_zero: f64,
    pub tol_eig: f64,
    pub tol_spec: f64,
    pub tol_null: f64,
    pub tol_rank: f64,
    pub tol_idem: f64,
    /// Cap on the per-atom condition number of generated or accepted certificates.
    pub kappa_max: f64,
    /// Cap on the total dimension of any kernel solve (the system is dim^2 x dim^2).
    pub max_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_diag: 1e-9,
            tol_sing: 1e-10,
            tol_zero: 1e-9,
            tol_eig: 1e-7,
            tol_spec: 1e-8,
            tol_null: 1e-10,
            tol_rank: 1e-8,
            tol_idem: 1e-8,
            kappa_max: 1e6,
            max_dim: 16,
        }
    }
}

impl Tolerances {
    /// Default tolerances with the solve-dimension cap taken from `SID_MAX_DIM`
    /// when that variable is set to a positive integer.
    pub fn from_env() -> Self {
        let mut t = Tolerances::default();
        if let Ok(v) = std::env::var("SID_MAX_DIM") {
            if let Ok(max) = v.trim().parse::<usize>() {
                if max > 0 {
                    t.max_dim = max;
                }
            }
        }
        t
    }

    /// Absolute spectral-clustering threshold for a set of values with the
    /// given maximum modulus.
    pub fn spec_threshold(&self, max_abs: f64) -> f64 {
        self.tol_spec * (1.0 + max_abs)
    }
}
