//! K0 invariants of the commutant: the descriptor of the discretized
//! triangular operator, trace classes, and similarity invariance.
//!
//! ```bash
//! cargo run -p sid --example k0_invariants
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sid::generate::{diagonal_projection, random_commutant_conjugator};
use sid::linalg::{c64, CMat, C64};
use sid::{
    k0_descriptor, k0_equal, trace_class, Ambient, AtomicSpace, FiberDim, IdempotentField,
    MatrixField, Tolerances,
};
use std::sync::Arc;

/// Discretization of the operator with diagonal multiplication by t on
/// [0, 1] and a nonvanishing (1,2) entry, over k atoms.
fn discretized(k: usize) -> sid::Result<MatrixField> {
    let descs: Vec<(String, f64, FiberDim)> = (0..k)
        .map(|i| (format!("t{i}"), 1.0 / k as f64, FiberDim::Finite(2)))
        .collect();
    let space = Arc::new(AtomicSpace::build(&descs)?);
    let blocks = (0..k)
        .map(|i| {
            let z = c64((i as f64 + 0.5) / k as f64, 0.0);
            Some(CMat::from_row_slice(
                2,
                2,
                &[z, c64(1.0, 0.2), C64::default(), z],
            ))
        })
        .collect();
    MatrixField::new(space, blocks)
}

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    for k in [2usize, 4, 8] {
        let t = discretized(k)?;
        let d = k0_descriptor(&t, &tol)?;
        println!("k = {k}: K0({{T}}') = Z^{}", d.group_rank);
    }

    let t = discretized(4)?;
    let m = 2;
    let ambient = Ambient::new(t.clone(), m);

    // an indicator projection and its class
    let p = IdempotentField::new(
        diagonal_projection(&t, m, &[Some(1), Some(0), Some(2), Some(1)])?,
        ambient.clone(),
        &tol,
    )?;
    let class = trace_class(&p, &tol)?;
    println!("trace class values over the support: {:?}", class.values);

    // similarity invariance: a hidden copy has the same class
    let (g, gi) = random_commutant_conjugator(&mut rng, &t, m, 100.0, &tol)?;
    let hidden = IdempotentField::new(g.mul(&p.field)?.mul(&gi)?, ambient.clone(), &tol)?;
    println!(
        "class is similarity invariant: k0_equal = {}",
        k0_equal(&p, &hidden, &tol)?
    );

    // a projection of a different rank profile has a different class
    let other = IdempotentField::new(
        diagonal_projection(&t, m, &[Some(2), Some(0), Some(2), Some(1)])?,
        ambient,
        &tol,
    )?;
    println!(
        "distinct rank profiles separate: k0_equal = {}",
        k0_equal(&p, &other, &tol)?
    );

    // an infinite-dimensional class contributes the zero group, flagged
    let space = Arc::new(AtomicSpace::build(&[
        ("a".into(), 1.0, FiberDim::Finite(2)),
        ("w".into(), 1.0, FiberDim::Infinite),
    ])?);
    let t_inf = MatrixField::new(
        space,
        vec![
            Some(CMat::from_row_slice(
                2,
                2,
                &[c64(0.0, 0.0), c64(1.0, 0.0), C64::default(), c64(0.0, 0.0)],
            )),
            None,
        ],
    )?;
    let d = k0_descriptor(&t_inf, &tol)?;
    println!(
        "with an infinite class: Z^{} plus {} zero-contribution class",
        d.group_rank,
        d.infinite_classes.len()
    );
    Ok(())
}
