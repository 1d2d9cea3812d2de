//! Cross-module flows: the commutant idempotent-lattice oracle, K0 classes
//! witnessed by explicit certificates, and consistency between classwise
//! and fully coupled commutant solves.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sid::generate::{
    diagonal_projection, generate_instance, random_commutant_conjugator, random_si_block,
    GenerateSpec,
};
use sid::linalg::{
    c64, direct_sum_all, fnorm, max_lower_triangular, nullspace, sylvester_matrix, unvec, C64,
    CMat,
};
use sid::{
    canonicalize_in_commutant, decide_uniqueness, field_commutant_structure,
    full_commutant_dimension, k0_equal, validate_si_form, Ambient, AtomicSpace, FiberDim,
    IdempotentField, MatrixField, Tolerances,
};

/// Hermite interpolation polynomial with value one on the target eigenvalue
/// cluster and zero (to the stated multiplicities) on the others, evaluated
/// at `g`. This is the Riesz spectral projection of `g` for that cluster.
fn spectral_projection(g: &CMat, spectrum: &[(C64, usize)], target: usize) -> CMat {
    let degree: usize = spectrum.iter().map(|(_, m)| m).sum::<usize>();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (a, (mu, mult)) in spectrum.iter().enumerate() {
        for j in 0..*mult {
            // d^j/dz^j of z^k at mu: (k)_j mu^{k-j}
            let mut row = vec![C64::default(); degree];
            for (k, entry) in row.iter_mut().enumerate() {
                if k >= j {
                    let mut falling = 1.0;
                    for step in 0..j {
                        falling *= (k - step) as f64;
                    }
                    *entry = mu.powu((k - j) as u32) * c64(falling, 0.0);
                }
            }
            rows.push(row);
            rhs.push(if a == target && j == 0 {
                c64(1.0, 0.0)
            } else {
                C64::default()
            });
        }
    }
    let v = CMat::from_fn(degree, degree, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let coeffs = v.lu().solve(&b).expect("confluent Vandermonde solvable");
    // Horner evaluation at g
    let n = g.nrows();
    let mut p = CMat::zeros(n, n);
    for k in (0..degree).rev() {
        p = p * g + CMat::identity(n, n) * coeffs[k];
    }
    p
}

/// Over a per-atom SI field with injective diagonal values, every idempotent
/// in the full operator commutant is an atom-indicator pattern: enumerate
/// the minimal idempotents of the commutant algebra from a generic element
/// and compare.
#[test]
fn commutant_idempotent_lattice_is_the_indicator_lattice() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let dims = [2usize, 2, 3];
    let phis = [c64(0.3, 0.0), c64(2.0, -0.4), c64(-1.2, 0.9)];
    let blocks: Vec<CMat> = dims
        .iter()
        .zip(&phis)
        .map(|(&n, &phi)| random_si_block(&mut rng, n, phi))
        .collect();
    let stacked = direct_sum_all(&blocks);
    let total: usize = dims.iter().sum();

    // independent route: the full Sylvester kernel of the direct sum
    let kernel = nullspace(&sylvester_matrix(&stacked), tol.tol_null);
    assert_eq!(kernel.basis.len(), total, "commutant dimension is sum of fiber dims");

    // a generic element of the commutant
    let mut g = CMat::zeros(total, total);
    for v in &kernel.basis {
        let coeff = c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        g += unvec(v, total, total) * coeff;
    }
    // its shape: block-diagonal, upper triangular with constant diagonal per
    // block (the commutant shape over SI fibers)
    assert!(max_lower_triangular(&g) < 1e-9 * (1.0 + fnorm(&g)));

    // spectrum of g: one cluster per atom, read off the block diagonals
    let mut spectrum = Vec::new();
    let mut offset = 0;
    for &n in &dims {
        let mut mean = C64::default();
        for i in 0..n {
            mean += g[(offset + i, offset + i)];
        }
        spectrum.push((mean / c64(n as f64, 0.0), n));
        offset += n;
    }

    // minimal idempotents = spectral projections at the clusters; they must
    // be exactly the atom indicators
    let mut sum = CMat::zeros(total, total);
    let mut offset = 0;
    for (a, &n) in dims.iter().enumerate() {
        let p = spectral_projection(&g, &spectrum, a);
        let mut indicator = CMat::zeros(total, total);
        for i in 0..n {
            indicator[(offset + i, offset + i)] = c64(1.0, 0.0);
        }
        let dist = fnorm(&(&p - &indicator));
        assert!(
            dist < 1e-7,
            "spectral projection {a} is not the atom indicator (distance {dist:.3e})"
        );
        sum += p;
        offset += n;
    }
    assert!(fnorm(&(&sum - CMat::identity(total, total))) < 1e-7);
}

#[test]
fn classwise_commutant_matches_full_solve_on_mixed_instance() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // multiplicity-two class (identical blocks) plus a singleton class
    let space = Arc::new(
        AtomicSpace::build(&[
            ("a".into(), 1.0, FiberDim::Finite(2)),
            ("b".into(), 1.0, FiberDim::Finite(2)),
            ("c".into(), 1.0, FiberDim::Finite(3)),
        ])
        .unwrap(),
    );
    let shared = random_si_block(&mut rng, 2, c64(0.5, 0.0));
    let lone = random_si_block(&mut rng, 3, c64(4.0, 0.0));
    let t = MatrixField::new(space, vec![Some(shared.clone()), Some(shared), Some(lone)]).unwrap();
    let form = validate_si_form(&t, &tol).unwrap();
    let structure = field_commutant_structure(&form, &tol).unwrap();
    // 2x2 blocks of polynomials in the shared fiber: 4 * 2; lone fiber: 3
    assert_eq!(structure.total_dimension, 11);
    assert_eq!(full_commutant_dimension(&t, &tol).unwrap(), 11);
    assert!(structure.classes.iter().any(|c| c.coupled));
}

#[test]
fn equal_k0_classes_are_witnessed_by_certificates() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let space = Arc::new(
        AtomicSpace::build(&[
            ("x".into(), 1.0, FiberDim::Finite(2)),
            ("y".into(), 1.0, FiberDim::Finite(2)),
            ("z".into(), 1.0, FiberDim::Finite(2)),
        ])
        .unwrap(),
    );
    let blocks = (0..3)
        .map(|i| Some(random_si_block(&mut rng, 2, c64(i as f64, 0.1))))
        .collect();
    let t = MatrixField::new(space, blocks).unwrap();
    let m = 2;
    let ambient = Ambient::new(t.clone(), m);
    let seed = diagonal_projection(&t, m, &[Some(1), Some(2), Some(0)]).unwrap();

    let mut pair = Vec::new();
    for _ in 0..2 {
        let (g, gi) = random_commutant_conjugator(&mut rng, &t, m, 100.0, &tol).unwrap();
        let field = g.mul(&seed).unwrap().mul(&gi).unwrap();
        pair.push(IdempotentField::new(field, ambient.clone(), &tol).unwrap());
    }
    assert!(k0_equal(&pair[0], &pair[1], &tol).unwrap());

    // equal classes: canonical forms coincide and the composed certificate
    // maps one idempotent onto the other
    let (proj_a, cert_a) = canonicalize_in_commutant(&pair[0], &tol).unwrap();
    let (proj_b, cert_b) = canonicalize_in_commutant(&pair[1], &tol).unwrap();
    assert_eq!(proj_a.field, proj_b.field);
    let w = cert_b.x_inv.mul(&cert_a.x).unwrap();
    let w_inv = cert_a.x_inv.mul(&cert_b.x).unwrap();
    let mapped = w.mul(&pair[0].field).unwrap().mul(&w_inv).unwrap();
    let dist = mapped.distance(&pair[1].field).unwrap();
    assert!(dist < 1e-6, "certificate distance {dist:.3e}");
}

#[test]
fn generated_multiclass_instances_split_consistently() {
    let tol = Tolerances::default();
    for seed in 0..5u64 {
        let spec = GenerateSpec {
            seed,
            n: 1,
            m: 2,
            atoms: 10,
            pattern: "1,2;1;3".into(),
        };
        let doc = generate_instance(&spec, &tol).unwrap();
        let t = doc.field("T").unwrap();
        let verdict = decide_uniqueness(&t, &tol).unwrap();
        assert!(verdict.unique);
        let parts = sid::split_commutant_by_class(&t, &tol).unwrap();
        assert_eq!(parts.len(), 3);
        let rank_sum: usize = parts
            .iter()
            .map(|p| decide_uniqueness(&p.field, &tol).unwrap().k0_shape.group_rank)
            .sum();
        assert_eq!(rank_sum, verdict.k0_shape.group_rank);
    }
}

#[test]
fn document_pipeline_roundtrip_via_idempotent_sections() {
    let tol = Tolerances::default();
    let spec = GenerateSpec {
        seed: 77,
        n: 2,
        m: 3,
        atoms: 8,
        pattern: "1,1".into(),
    };
    let doc = generate_instance(&spec, &tol).unwrap();
    let t = doc.field("T").unwrap();
    let q = doc.idempotent("Q", &t, &tol).unwrap();
    let (projection, cert) = canonicalize_in_commutant(&q, &tol).unwrap();
    // the canonical projection re-enters a document and comes back equal
    let mut out = sid::io::Document::new(t.space().as_ref());
    out.insert_field("T", &t);
    out.insert_idempotent("P", &projection.field, 3);
    let reloaded = out.idempotent("P", &t, &tol).unwrap();
    assert_eq!(reloaded.field, projection.field);
    assert!(cert.commutation_residual() < 1e-8);
}
