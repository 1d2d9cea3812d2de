//! Build an atomic space, put a triangular field on it, and split the field
//! into its normal form.
//!
//! ```bash
//! cargo run -p sid --example build_space
//! ```

use std::sync::Arc;

use sid::linalg::{c64, CMat};
use sid::{build_space, validate_si_form, FiberDim, MatrixField, Tolerances};

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();

    // two finite cells of different fiber dimension plus one symbolic
    // infinite-dimensional cell
    let space = Arc::new(build_space(&[
        ("a", 0.5, FiberDim::Finite(2)),
        ("b", 0.5, FiberDim::Finite(3)),
        ("w", 0.25, FiberDim::Infinite),
    ])?);
    println!("space: {} atoms, total weight {}", space.len(), space.total_weight());
    for class in space.dimension_classes() {
        println!("  class fiber_dim={} atoms={:?}", class.fiber, class.atom_indices);
    }

    // a field in upper triangular normal form: constant diagonal per atom
    let block_a = CMat::from_row_slice(
        2,
        2,
        &[c64(0.3, 0.1), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.3, 0.1)],
    );
    let mut block_b = CMat::identity(3, 3) * c64(-0.7, 0.0);
    block_b[(0, 1)] = c64(2.0, 0.0);
    block_b[(1, 2)] = c64(3.0, 0.0);
    block_b[(0, 2)] = c64(0.5, -0.5);
    let t = MatrixField::new(space, vec![Some(block_a), Some(block_b), None])?;

    let form = validate_si_form(&t, &tol)?;
    for idx in t.space().finite_atom_indices() {
        println!(
            "atom {}: phi = {:.3}, strict upper norm = {:.3}",
            t.space().atoms()[idx].label,
            form.phi(idx).unwrap(),
            sid::linalg::fnorm(form.nilpotent_part(idx).unwrap()),
        );
    }
    assert_eq!(form.reconstruct(), t);
    println!("reconstruction from (phi, strict upper) is exact");

    // the 2-fold amplification doubles fibers and records the multiplicity
    let t2 = t.amplify(2)?;
    println!(
        "amplified: fiber dims {:?}, amplification {}",
        t2.space()
            .atoms()
            .iter()
            .map(|a| a.fiber.to_string())
            .collect::<Vec<_>>(),
        t2.space().amplification()
    );
    Ok(())
}
