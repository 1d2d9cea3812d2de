//! Multiplicity profiles and the uniqueness verdict, including the flip
//! caused by an infinite-dimensional atom and the refusal outside the
//! mutual-singularity hypothesis.
//!
//! ```bash
//! cargo run -p sid --example uniqueness_verdict
//! ```

use sid::linalg::{c64, CMat, C64};
use sid::{
    check_mutual_singularity, decide_uniqueness, multiplicity_profile, split_commutant_by_class,
    AtomicSpace, FiberDim, MatrixField, SidError, Tolerances,
};
use std::sync::Arc;

fn si_block(n: usize, phi: C64) -> CMat {
    let mut b = CMat::identity(n, n) * phi;
    for i in 0..n - 1 {
        b[(i, i + 1)] = c64(1.0, 0.4);
    }
    b
}

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();

    // two mutually singular classes with multiplicities (1, 2) and (1)
    let space = Arc::new(AtomicSpace::build(&[
        ("a0".into(), 1.0, FiberDim::Finite(2)),
        ("a1".into(), 1.0, FiberDim::Finite(2)),
        ("a2".into(), 1.0, FiberDim::Finite(2)),
        ("b0".into(), 1.0, FiberDim::Finite(3)),
    ])?);
    let t = MatrixField::new(
        space,
        vec![
            Some(si_block(2, c64(0.0, 0.0))),
            Some(si_block(2, c64(1.0, 0.0))),
            Some(si_block(2, c64(1.0, 0.0))),
            Some(si_block(3, c64(5.0, 0.0))),
        ],
    )?;

    let profile = multiplicity_profile(&t, &tol)?;
    for class in &profile.classes {
        println!(
            "class fiber_dim={}: {:?}",
            class.fiber,
            class
                .entries
                .iter()
                .map(|(p, m)| format!("{:.1} -> {m}", p.re))
                .collect::<Vec<_>>()
        );
    }
    println!("mutually singular: {}", check_mutual_singularity(&t, &tol)?);

    let verdict = decide_uniqueness(&t, &tol)?;
    println!(
        "unique up to similarity: {} (K0 = Z^{})",
        verdict.unique, verdict.k0_shape.group_rank
    );
    for r in &verdict.reasons {
        println!("  fiber_dim={}: {}", r.fiber, r.reason);
    }

    // splitting along classes gives independent sub-problems
    for part in split_commutant_by_class(&t, &tol)? {
        println!(
            "sub-problem fiber_dim={}: {} atoms",
            part.fiber,
            part.atom_indices.len()
        );
    }

    // an infinite-dimensional atom flips the verdict
    let space_inf = Arc::new(AtomicSpace::build(&[
        ("a".into(), 1.0, FiberDim::Finite(2)),
        ("w".into(), 1.0, FiberDim::Infinite),
    ])?);
    let t_inf = MatrixField::new(space_inf, vec![Some(si_block(2, c64(0.0, 0.0))), None])?;
    let verdict = decide_uniqueness(&t_inf, &tol)?;
    println!("with an infinite fiber: unique = {}", verdict.unique);

    // shared spectrum across classes: the theorem does not apply, no verdict
    let space_shared = Arc::new(AtomicSpace::build(&[
        ("a".into(), 1.0, FiberDim::Finite(1)),
        ("b".into(), 1.0, FiberDim::Finite(2)),
    ])?);
    let t_shared = MatrixField::new(
        space_shared,
        vec![
            Some(CMat::identity(1, 1) * c64(0.5, 0.0)),
            Some(si_block(2, c64(0.5, 0.0))),
        ],
    )?;
    match decide_uniqueness(&t_shared, &tol) {
        Err(SidError::HypothesisUnsupported(msg)) => println!("refused: {msg}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
