//! Clustering of scalar spectral values with an explicit refusal band.
//!
//! Two values closer than the threshold are the same spectral point; a gap
//! inside `[threshold, 10 * threshold]` is ambiguous and refused instead of
//! guessed.

use crate::error::{Result, SidError};
use crate::linalg::{c64, C64};

#[derive(Debug, Clone)]
pub struct Cluster {
    /// Mean of the member values.
    pub representative: C64,
    /// Indices into the input slice, in input order.
    pub members: Vec<usize>,
}

/// Single-linkage clustering at the absolute `threshold`. Returns clusters
/// sorted by representative (lexicographically on the real then imaginary
/// part), and errors if two distinct clusters come closer than
/// `10 * threshold`.
pub fn cluster_scalars(values: &[C64], threshold: f64) -> Result<Vec<Cluster>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }

    // refusal band: distinct clusters must be separated by more than 10x
    for a in 0..groups.len() {
        for b in (a + 1)..groups.len() {
            let gap = groups[a]
                .iter()
                .flat_map(|&i| groups[b].iter().map(move |&j| (values[i] - values[j]).norm()))
                .fold(f64::INFINITY, f64::min);
            if gap <= 10.0 * threshold {
                return Err(SidError::SpectralClusteringAmbiguous {
                    gap,
                    tol: threshold,
                    band: 10.0 * threshold,
                });
            }
        }
    }

    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let sum: C64 = members.iter().map(|&i| values[i]).sum();
            Cluster {
                representative: sum / c64(members.len() as f64, 0.0),
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        (a.representative.re, a.representative.im)
            .partial_cmp(&(b.representative.re, b.representative.im))
            .unwrap()
    });
    Ok(clusters)
}

/// Largest modulus among the values, used to scale thresholds.
pub fn max_abs(values: &[C64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
