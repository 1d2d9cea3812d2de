//! Operators as matrix fields over finite atomic measure spaces.
//!
//! The crate models direct-integral decompositions at desk scale: a measure
//! space becomes a finite list of weighted atoms, a decomposable operator
//! becomes one complex matrix per atom, and the classical machinery around
//! strongly irreducible decompositions becomes concrete linear algebra:
//!
//! * [`space`] / [`field`] — atomic spaces, matrix fields, the upper
//!   triangular normal form with constant diagonal per atom;
//! * [`jordan`] — the superdiagonal strong-irreducibility criterion, the
//!   single-Jordan-block oracle, and explicit similarities to Jordan form;
//! * [`commutant`] — fiber and field commutants as Sylvester kernels,
//!   spectral classes, the triangular shape of commuting fields;
//! * [`idempotent`] — canonicalization of idempotents over amplifications to
//!   diagonal projections, rank profiles, minimal families and alignment
//!   certificates;
//! * [`ktheory`] — normalized-trace K0 classes and the K0 descriptor of the
//!   commutant;
//! * [`engine`] — multiplicity profiles, mutual singularity, and the
//!   uniqueness verdict for the strongly irreducible decomposition;
//! * [`io`] / [`generate`] / [`report`] — the JSON document schema, seeded
//!   instance generation, and the command dispatch used by the `sid` binary;
//! * [`acceptance`] — the self-test criteria run by `sid selftest`.
//!
//! See the crate examples for one runnable walkthrough per capability.

pub mod error;
pub mod linalg;
pub mod space;
pub mod tol;
pub mod field;
pub mod jordan;
pub mod spectral;
pub mod commutant;
pub mod idempotent;
pub mod ktheory;
pub mod engine;
pub mod io;
pub mod generate;
pub mod report;
pub mod acceptance;

pub use error::{Result, SidError};
pub use field::{validate_si_form, InvertedField, MatrixField, SITriangularForm};
pub use jordan::{
    jordan_similarity, si_test_general, si_test_superdiagonal, JordanReport, SIVerdict, SIWitness,
};
pub use linalg::{C64, CMat, CVec};
pub use commutant::{
    field_commutant_structure, fiber_commutant, full_commutant_dimension, verify_eq5_form,
    ClassCommutant, CommutantBasis, CommutantStructure, SpectralClass,
};
pub use engine::{
    check_mutual_singularity, decide_uniqueness, multiplicity_profile, split_commutant_by_class,
    ClassMultiplicity, ClassProblem, ClassReason, MultiplicityProfile, UniquenessVerdict,
};
pub use idempotent::{
    align_family, canonicalize_in_commutant, extract_minimal_family, rank_profile, reduce_pointwise,
    Ambient, CertificateFactor, FactorKind, IdempotentField, RankProfile, SimilarityCertificate,
};
pub use ktheory::{k0_descriptor, k0_equal, trace_class, K0Class, K0Descriptor};
pub use space::{build_space, Atom, AtomicSpace, DimensionClass, FiberDim};
pub use tol::Tolerances;
