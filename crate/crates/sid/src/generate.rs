//! Deterministic generation of random instances with embedded ground truth.
//!
//! The multiplicity pattern drives the space layout: groups separated by
//! `;` become mutually singular dimension classes (fiber dimensions `n`,
//! `n+1`, ...), entries inside a group are multiplicities at fresh spectrum
//! points, and the entry `inf` inserts an infinite-dimensional atom.
//! Superdiagonals are sampled away from zero and conjugators are sampled
//! with per-atom condition below 100, so generated operators are strongly
//! irreducible per atom and seeded idempotents have known rank profiles.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Result, SidError};
use crate::field::{validate_si_form, MatrixField};
use crate::io::Document;
use crate::linalg::{c64, condition_number, kron, C64, CMat};
use crate::space::{AtomicSpace, FiberDim};
use crate::tol::Tolerances;

#[derive(Debug, Clone)]
pub struct GenerateSpec {
    pub seed: u64,
    /// Fiber dimension of the first class; later classes use `n+1`, `n+2`, ...
    pub n: usize,
    /// Amplification for the seeded idempotent and families.
    pub m: usize,
    /// Cap on the number of atoms the pattern may produce.
    pub atoms: usize,
    /// Multiplicity pattern, e.g. `"1,1"`, `"2;1"`, `"1,inf"`.
    pub pattern: String,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            seed: 0,
            n: 2,
            m: 2,
            atoms: 8,
            pattern: "1,1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatternEntry {
    Multiplicity(usize),
    Infinite,
}

fn parse_pattern(pattern: &str) -> Result<Vec<Vec<PatternEntry>>> {
    let mut groups = Vec::new();
    for group in pattern.split(';') {
        let mut entries = Vec::new();
        for raw in group.split(',') {
            let token = raw.trim();
            if token.is_empty() {
                continue;
            }
            if token.eq_ignore_ascii_case("inf") {
                entries.push(PatternEntry::Infinite);
            } else {
                let k: usize = token.parse().map_err(|_| {
                    SidError::InvalidInput(format!(
                        "pattern entry `{token}` is neither a positive integer nor `inf`"
                    ))
                })?;
                if k == 0 {
                    return Err(SidError::InvalidInput(
                        "pattern multiplicities must be positive".into(),
                    ));
                }
                entries.push(PatternEntry::Multiplicity(k));
            }
        }
        if !entries.is_empty() {
            groups.push(entries);
        }
    }
    if groups.is_empty() {
        return Err(SidError::InvalidInput("empty multiplicity pattern".into()));
    }
    Ok(groups)
}

pub fn complex_unit(rng: &mut ChaCha8Rng) -> C64 {
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    c64(angle.cos(), angle.sin())
}

fn complex_ball(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    complex_unit(rng) * c64(rng.gen::<f64>() * radius, 0.0)
}

/// Strongly irreducible triangular block: superdiagonal magnitudes at least
/// 0.1, remaining upper entries in the unit ball.
pub fn random_si_block(rng: &mut ChaCha8Rng, n: usize, phi: C64) -> CMat {
    let mut b = CMat::identity(n, n) * phi;
    for i in 0..n.saturating_sub(1) {
        let magnitude = 0.1 + rng.gen::<f64>();
        b[(i, i + 1)] = complex_unit(rng) * c64(magnitude, 0.0);
    }
    for i in 0..n {
        for j in (i + 2)..n {
            b[(i, j)] = complex_ball(rng, 1.0);
        }
    }
    b
}

/// Random invertible element of `M_m({T}')` with per-atom condition number
/// at most `cap`. Sampled as `I + sum_k C_k (x) N^k` with rejection on the
/// condition number.
pub fn random_commutant_conjugator(
    rng: &mut ChaCha8Rng,
    operator: &MatrixField,
    m: usize,
    cap: f64,
    tol: &Tolerances,
) -> Result<(MatrixField, MatrixField)> {
    let form = validate_si_form(operator, tol)?;
    let amp_space = operator.amplify(m)?.space().clone();
    let mut blocks: Vec<Option<CMat>> = vec![None; operator.space().len()];
    let mut inv_blocks: Vec<Option<CMat>> = vec![None; operator.space().len()];
    for (idx, atom) in operator.space().atoms().iter().enumerate() {
        let Some(n) = atom.fiber.finite() else {
            continue;
        };
        let nil = form.nilpotent_part(idx).expect("finite atom").clone();
        loop {
            let mut g = CMat::zeros(m * n, m * n);
            let mut pw = CMat::identity(n, n);
            for k in 0..n {
                let mut coeff = CMat::from_fn(m, m, |_, _| complex_ball(rng, 0.7));
                if k == 0 {
                    coeff += CMat::identity(m, m);
                }
                g += kron(&coeff, &pw);
                pw = &pw * &nil;
            }
            if condition_number(&g) <= cap {
                let gi = g.clone().try_inverse().ok_or(SidError::SingularBlock {
                    atom: atom.label.clone(),
                    condition: f64::INFINITY,
                })?;
                blocks[idx] = Some(g);
                inv_blocks[idx] = Some(gi);
                break;
            }
        }
    }
    Ok((
        MatrixField::new(amp_space.clone(), blocks)?,
        MatrixField::new(amp_space, inv_blocks)?,
    ))
}

/// Diagonal projection field over the amplification with the given per-atom
/// normalized ranks (leading-ones pattern).
pub fn diagonal_projection(
    operator: &MatrixField,
    m: usize,
    ranks: &[Option<usize>],
) -> Result<MatrixField> {
    let amp_space = operator.amplify(m)?.space().clone();
    let blocks = operator
        .space()
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a.fiber.finite().map(|n| {
                let r = ranks[i].unwrap_or(0);
                let mut pattern = CMat::zeros(m, m);
                for d in 0..r.min(m) {
                    pattern[(d, d)] = c64(1.0, 0.0);
                }
                kron(&pattern, &CMat::identity(n, n))
            })
        })
        .collect();
    MatrixField::new(amp_space, blocks)
}

/// The standard maximal abelian family over the amplification: one slot
/// projection per copy.
pub fn standard_family(operator: &MatrixField, m: usize) -> Result<Vec<MatrixField>> {
    let amp_space = operator.amplify(m)?.space().clone();
    (0..m)
        .map(|i| {
            let blocks = operator
                .space()
                .atoms()
                .iter()
                .map(|a| {
                    a.fiber.finite().map(|n| {
                        let mut unit = CMat::zeros(m, m);
                        unit[(i, i)] = c64(1.0, 0.0);
                        kron(&unit, &CMat::identity(n, n))
                    })
                })
                .collect();
            MatrixField::new(amp_space.clone(), blocks)
        })
        .collect()
}

fn conjugate_field(g: &MatrixField, gi: &MatrixField, q: &MatrixField) -> Result<MatrixField> {
    g.mul(q)?.mul(gi)
}

/// Deterministic instance with operator `T`, a seeded idempotent `Q`, two
/// conjugated families `F1`/`F2`, and ground truth under the `truth` key.
pub fn generate_instance(spec: &GenerateSpec, tol: &Tolerances) -> Result<Document> {
    if spec.n == 0 || spec.m == 0 {
        return Err(SidError::InvalidInput("n and m must be positive".into()));
    }
    if spec.n > 8 || spec.m > 8 {
        return Err(SidError::InvalidInput(
            "n and m are capped at 8 for generated instances".into(),
        ));
    }
    let groups = parse_pattern(&spec.pattern)?;
    let total_atoms: usize = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|e| match e {
            PatternEntry::Multiplicity(k) => *k,
            PatternEntry::Infinite => 1,
        })
        .sum();
    if total_atoms > spec.atoms {
        return Err(SidError::InvalidInput(format!(
            "pattern produces {total_atoms} atoms, above the cap {}",
            spec.atoms
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut descs: Vec<(String, f64, FiberDim)> = Vec::new();
    let mut planned_blocks: Vec<Option<CMat>> = Vec::new();
    let mut has_infinite = false;
    let mut spectrum_points = 0usize;
    let mut atom_counter = 0usize;

    for (class_idx, group) in groups.iter().enumerate() {
        let n = spec.n + class_idx;
        for (entry_idx, entry) in group.iter().enumerate() {
            match entry {
                PatternEntry::Infinite => {
                    has_infinite = true;
                    descs.push((format!("a{atom_counter}"), 1.0, FiberDim::Infinite));
                    planned_blocks.push(None);
                    atom_counter += 1;
                }
                PatternEntry::Multiplicity(k) => {
                    // classes sit on disjoint spectral intervals, entries on
                    // distinct points inside them
                    let phi = c64(
                        10.0 * class_idx as f64 + entry_idx as f64 + 0.3 * rng.gen::<f64>(),
                        rng.gen::<f64>() - 0.5,
                    );
                    spectrum_points += 1;
                    let block = random_si_block(&mut rng, n, phi);
                    for _copy in 0..*k {
                        descs.push((format!("a{atom_counter}"), 1.0, FiberDim::Finite(n)));
                        planned_blocks.push(Some(block.clone()));
                        atom_counter += 1;
                    }
                }
            }
        }
    }

    let space = Arc::new(AtomicSpace::build(&descs)?);
    let operator = MatrixField::new(space.clone(), planned_blocks)?;

    // seeded idempotent with a known rank profile
    let ranks: Vec<Option<usize>> = space
        .atoms()
        .iter()
        .map(|a| a.fiber.finite().map(|_| rng.gen_range(0..=spec.m)))
        .collect();
    let seed_projection = diagonal_projection(&operator, spec.m, &ranks)?;
    let (g, gi) = random_commutant_conjugator(&mut rng, &operator, spec.m, 100.0, tol)?;
    let q = conjugate_field(&g, &gi, &seed_projection)?;

    // two independently conjugated standard families
    let std_family = standard_family(&operator, spec.m)?;
    let mut families = Vec::new();
    for _ in 0..2 {
        let (fg, fgi) = random_commutant_conjugator(&mut rng, &operator, spec.m, 100.0, tol)?;
        let members = std_family
            .iter()
            .map(|member| conjugate_field(&fg, &fgi, member))
            .collect::<Result<Vec<_>>>()?;
        families.push(members);
    }

    let mut doc = Document::new(&space);
    doc.insert_field("T", &operator);
    doc.insert_idempotent("Q", &q, spec.m);
    doc.insert_family("F1", &families[0], spec.m);
    doc.insert_family("F2", &families[1], spec.m);

    let rank_truth: serde_json::Map<String, serde_json::Value> = space
        .atoms()
        .iter()
        .zip(&ranks)
        .filter_map(|(a, r)| r.map(|v| (a.label.clone(), json!(v))))
        .collect();
    doc.truth = Some(json!({
        "unique": !has_infinite,
        "pattern": spec.pattern,
        "n": spec.n,
        "m": spec.m,
        "seed": spec.seed,
        "k0_rank": spectrum_points,
        "rank_profiles": { "Q": rank_truth },
    }));
    Ok(doc)
}
