//! Strong irreducibility per atom: the superdiagonal criterion, the general
//! Jordan-block oracle, and a witness idempotent on a failing atom.
//!
//! ```bash
//! cargo run -p sid --example check_si
//! ```

use std::sync::Arc;

use sid::linalg::{c64, commutation_residual, idempotency_residual, CMat};
use sid::{
    build_space, jordan_similarity, si_test_general, si_test_superdiagonal, validate_si_form,
    FiberDim, MatrixField, Tolerances,
};

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();
    let space = Arc::new(build_space(&[
        ("good", 1.0, FiberDim::Finite(3)),
        ("bad", 1.0, FiberDim::Finite(3)),
    ])?);

    // "good" has nonzero superdiagonals, "bad" has a zeroed one
    let mut good = CMat::identity(3, 3) * c64(0.4, -0.2);
    good[(0, 1)] = c64(2.0, 0.0);
    good[(1, 2)] = c64(3.0, 0.0);
    let mut bad = CMat::identity(3, 3) * c64(0.4, -0.2);
    bad[(0, 1)] = c64(1.0, 0.0);
    bad[(0, 2)] = c64(0.7, 0.3); // bad[(1, 2)] stays zero

    let t = MatrixField::new(space.clone(), vec![Some(good.clone()), Some(bad.clone())])?;
    let form = validate_si_form(&t, &tol)?;
    let verdict = si_test_superdiagonal(&form, &tol);
    for (atom, v) in space.atoms().iter().zip(&verdict.per_atom) {
        println!("atom {}: strongly irreducible = {:?}", atom.label, v.unwrap());
    }
    println!("overall: {}", verdict.overall);

    // the witness on the failing atom is a nontrivial commuting idempotent
    let w = &verdict.witnesses[0];
    println!(
        "witness on `{}`: idempotency residual {:.2e}, commutation residual {:.2e}",
        w.atom,
        idempotency_residual(&w.idempotent),
        commutation_residual(&bad, &w.idempotent),
    );

    // cross-check with the general oracle
    println!(
        "oracle agrees: good={} bad={}",
        si_test_general(&good, &tol)?,
        si_test_general(&bad, &tol)?
    );

    // the explicit similarity to the Jordan block on the good atom
    let report = jordan_similarity(&good, &tol)?;
    let x = report.similarity.as_ref().unwrap();
    println!(
        "similarity diag: x11={:.1} x22={:.1} x33={:.1} (x_nn = 1 normalization)",
        x[(0, 0)].re,
        x[(1, 1)].re,
        x[(2, 2)].re
    );
    Ok(())
}
