//! Fiber and field commutants as Sylvester kernels: dimensions, spectral
//! classes, and the triangular shape of every commuting field.
//!
//! ```bash
//! cargo run -p sid --example commutant_basis
//! ```

use std::sync::Arc;

use sid::jordan::jordan_matrix;
use sid::linalg::{c64, CMat};
use sid::{
    build_space, field_commutant_structure, fiber_commutant, full_commutant_dimension,
    validate_si_form, verify_eq5_form, FiberDim, MatrixField, Tolerances,
};

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();

    // strongly irreducible fiber: the commutant is its polynomials (dim n);
    // a scalar fiber commutes with everything (dim n^2)
    let j4 = jordan_matrix(c64(0.2, -0.7), &[4]);
    println!("dim {{J_4}}' = {}", fiber_commutant(&j4, &tol)?.dimension);
    let scalar = CMat::identity(4, 4) * c64(0.2, -0.7);
    println!("dim {{aI_4}}' = {}", fiber_commutant(&scalar, &tol)?.dimension);

    // two atoms with the same diagonal value and identical blocks couple;
    // a third atom with a fresh value stays independent
    let space = Arc::new(build_space(&[
        ("a", 1.0, FiberDim::Finite(2)),
        ("b", 1.0, FiberDim::Finite(2)),
        ("c", 1.0, FiberDim::Finite(2)),
    ])?);
    let mk = |phi: f64| {
        CMat::from_row_slice(
            2,
            2,
            &[c64(phi, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(phi, 0.0)],
        )
    };
    let t = MatrixField::new(space, vec![Some(mk(0.5)), Some(mk(0.5)), Some(mk(2.0))])?;
    let form = validate_si_form(&t, &tol)?;
    let structure = field_commutant_structure(&form, &tol)?;
    for class in &structure.classes {
        println!(
            "class phi={:.1}: atoms {:?}, coupled={}, dimension {}",
            class.phi.re, class.atom_indices, class.coupled, class.dimension
        );
    }
    println!(
        "classwise total {} = full coupled solve {}",
        structure.total_dimension,
        full_commutant_dimension(&t, &tol)?
    );

    // every commuting field is upper triangular with constant diagonal
    let x = {
        let blocks = (0..3)
            .map(|i| {
                let up = form.nilpotent_part(i).unwrap();
                Some(CMat::identity(2, 2) * c64(0.3 + i as f64, -0.1) + up)
            })
            .collect();
        MatrixField::new(t.space().clone(), blocks)?
    };
    println!(
        "psi*I + strict upper commutes and has the commutant shape: {}",
        verify_eq5_form(&form, &x, &tol)?
    );
    Ok(())
}
