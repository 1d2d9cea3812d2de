//! Canonicalize a conjugated idempotent over an amplification back to the
//! diagonal projection with nested supports.
//!
//! ```bash
//! cargo run -p sid --example canonicalize_idempotent
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sid::generate::{diagonal_projection, random_commutant_conjugator, random_si_block};
use sid::linalg::c64;
use sid::{
    canonicalize_in_commutant, rank_profile, Ambient, AtomicSpace, FiberDim, IdempotentField,
    MatrixField, Tolerances,
};
use std::sync::Arc;

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // base operator: three atoms, fiber dimension 2, strongly irreducible
    let space = Arc::new(AtomicSpace::build(&[
        ("a".into(), 1.0, FiberDim::Finite(2)),
        ("b".into(), 1.0, FiberDim::Finite(2)),
        ("c".into(), 1.0, FiberDim::Finite(2)),
    ])?);
    let blocks = (0..3)
        .map(|i| Some(random_si_block(&mut rng, 2, c64(i as f64, 0.3))))
        .collect();
    let t = MatrixField::new(space, blocks)?;
    let m = 2;

    // seed a diagonal projection with per-atom normalized ranks (1, 2, 0),
    // then hide it behind a random conjugation inside M_m({T}')
    let seed = diagonal_projection(&t, m, &[Some(1), Some(2), Some(0)])?;
    let (g, gi) = random_commutant_conjugator(&mut rng, &t, m, 100.0, &tol)?;
    let hidden = g.mul(&seed)?.mul(&gi)?;
    let q = IdempotentField::new(hidden, Ambient::new(t, m), &tol)?;
    println!("seeded ranks (1, 2, 0), conjugated; norm bound {:.2}", q.norm_bound);

    let (projection, certificate) = canonicalize_in_commutant(&q, &tol)?;
    let profile = rank_profile(&projection, &tol)?;
    println!("recovered ranks: {:?}", profile.per_atom);
    assert_eq!(projection.field, seed);
    println!("recovered projection equals the seed exactly");

    let mapped = certificate.conjugate(&q.field)?;
    println!(
        "certificate: X q X^-1 distance to projection {:.2e}, commutation residual {:.2e}",
        mapped.distance(&projection.field)?,
        certificate.commutation_residual(),
    );
    println!("construction log:");
    for factor in &certificate.construction_log {
        println!(
            "  {:?}{}: {}",
            factor.kind,
            if factor.field.is_none() { " (identity)" } else { "" },
            factor.description
        );
    }
    Ok(())
}
