//! Align two conjugated maximal abelian families to the standard diagonal
//! family and compose the certificates into a similarity between them —
//! the uniqueness mechanism made explicit.
//!
//! ```bash
//! cargo run -p sid --example align_families
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sid::generate::{random_commutant_conjugator, random_si_block, standard_family};
use sid::linalg::c64;
use sid::{
    align_family, extract_minimal_family, Ambient, AtomicSpace, FiberDim, IdempotentField,
    MatrixField, Tolerances,
};
use std::sync::Arc;

fn main() -> sid::Result<()> {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let space = Arc::new(AtomicSpace::build(&[
        ("a".into(), 1.0, FiberDim::Finite(2)),
        ("b".into(), 1.0, FiberDim::Finite(3)),
    ])?);
    let t = MatrixField::new(
        space,
        vec![
            Some(random_si_block(&mut rng, 2, c64(0.0, 0.0))),
            Some(random_si_block(&mut rng, 3, c64(5.0, 0.0))),
        ],
    )?;
    let m = 3;
    let std_fam = standard_family(&t, m)?;

    // two independently hidden copies of the standard family
    let mut families = Vec::new();
    for _ in 0..2 {
        let (g, gi) = random_commutant_conjugator(&mut rng, &t, m, 100.0, &tol)?;
        let members = std_fam
            .iter()
            .map(|f| {
                let field = g.mul(f)?.mul(&gi)?;
                IdempotentField::new(field, Ambient::new(t.clone(), m), &tol)
            })
            .collect::<sid::Result<Vec<_>>>()?;
        families.push(members);
    }

    // the minimal members have normalized rank one per atom
    let minimal = extract_minimal_family(&families[0], m, &tol)?;
    println!("extracted {} minimal idempotents from family 1", minimal.len());

    let cert1 = align_family(&families[0], &tol)?;
    let cert2 = align_family(&families[1], &tol)?;
    for (i, member) in families[0].iter().enumerate() {
        let mapped = cert1.conjugate(&member.field)?;
        let dist = mapped.distance(&std_fam[i])?;
        println!("family 1 member {i} -> standard slot {i}: distance {dist:.2e}");
    }

    // composed certificate: maps family 1 onto family 2 inside M_m({T}')
    let w = cert2.x_inv.mul(&cert1.x)?;
    let w_inv = cert1.x_inv.mul(&cert2.x)?;
    let mut worst = 0.0f64;
    for (qa, qb) in families[0].iter().zip(&families[1]) {
        let mapped = w.mul(&qa.field)?.mul(&w_inv)?;
        worst = worst.max(mapped.distance(&qb.field)?);
    }
    println!("composed certificate maps family 1 onto family 2, worst distance {worst:.2e}");
    Ok(())
}
