//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building spaces, fields and running
/// the decomposition machinery.
#[derive(Debug, Error)]
pub enum SidError {
    #[error("duplicate atom label `{0}`")]
    DuplicateLabel(String),
    #[error("atom `{label}` has nonpositive weight {weight}")]
    NonpositiveWeight { label: String, weight: f64 },
    #[error("a space needs at least one atom")]
    EmptySpace,
    #[error("fields live on different spaces")]
    SpaceMismatch,
    #[error("atom `{0}` has an infinite-dimensional fiber and carries no matrix data")]
    SymbolicFiber(String),
    #[error("block on atom `{atom}` is not upper triangular (max lower residual {residual:.3e})")]
    NotUpperTriangular { atom: String, residual: f64 },
    #[error("block on atom `{atom}` has a non-constant diagonal (max deviation {deviation:.3e})")]
    DiagonalNotConstant { atom: String, deviation: f64 },
    #[error("block on atom `{atom}` is numerically singular (condition estimate {condition:.3e})")]
    SingularBlock { atom: String, condition: f64 },
    #[error("solve dimension {dim} exceeds the configured maximum {max} (set SID_MAX_DIM to raise it)")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("two spectral values differ by {gap:.3e}, inside the ambiguity band [{tol:.3e}, {band:.3e}]")]
    SpectralClusteringAmbiguous { gap: f64, tol: f64, band: f64 },
    #[error("eigenvalue clustering is ambiguous: cluster gap {gap:.3e} below the stability band {band:.3e}")]
    IllConditionedSpectrum { gap: f64, band: f64 },
    #[error("superdiagonal entry {index} on atom `{atom}` is below the zero threshold ({value:.3e})")]
    CriterionViolated {
        atom: String,
        index: usize,
        value: f64,
    },
    #[error("matrix is not an idempotent (residual {residual:.3e} exceeds {tol:.3e})")]
    NotIdempotent { residual: f64, tol: f64 },
    #[error("field does not commute with the reference operator on atom `{atom}` (residual {residual:.3e})")]
    NotInCommutant { atom: String, residual: f64 },
    #[error("certificate conditioning {condition:.3e} exceeds the cap {cap:.3e}")]
    SingularCertificate { condition: f64, cap: f64 },
    #[error("rank {rank} on atom `{atom}` is not a multiple of the fiber dimension {fiber_dim}")]
    RankNotMultipleOfN {
        atom: String,
        rank: usize,
        fiber_dim: usize,
    },
    #[error("family members do not commute pairwise (residual {residual:.3e})")]
    NotAbelian { residual: f64 },
    #[error("family is not maximal: atom `{atom}` admits no intermediate-rank element below rank {rank}")]
    FamilyNotMaximal { atom: String, rank: usize },
    #[error("atoms at spectrum point {point} disagree on the normalized trace ({a:.6} vs {b:.6})")]
    InconsistentTrace { point: String, a: f64, b: f64 },
    #[error("normalized trace {value:.6} is farther than {gate:.1e} from an integer")]
    NonIntegerClass { value: f64, gate: f64 },
    #[error("idempotents live over different base operators")]
    DifferentBaseOperator,
    #[error("operator is not in per-atom strongly irreducible triangular form: {0}")]
    NotSIForm(String),
    #[error("theorem hypothesis unsupported: {0}")]
    HypothesisUnsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SidError>;
