//! Automorphisms are dense among Markov operators: at the level of a
//! partition, every coupling on the `1/N` grid is the joint matrix of some
//! permutation, and every doubly stochastic matrix is a convex combination of
//! permutation matrices.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{is_markov, CouplingMatrix, RatMatrix};
use crate::rational::{self, Q};
use crate::space::{koopman_matrix, Automorphism, Partition};

/// A permutation `T` with `joint_matrix(T, α) = C` exactly.
///
/// Row-major filling: for each `(i, j)` the `N·C[i][j]` lowest unassigned
/// atoms of `A_i` are sent, in order, onto the lowest unassigned atoms of `A_j`.
pub fn realize(c: &CouplingMatrix, alpha: &Partition, atom_count: usize) -> Result<Automorphism> {
    if alpha.atom_count() != atom_count {
        return Err(Error::LengthMismatch {
            expected: alpha.atom_count(),
            actual: atom_count,
        });
    }
    let n = alpha.cell_count();
    if c.size() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: c.size(),
        });
    }
    let counts = c.counts(atom_count).ok_or_else(|| {
        Error::NotRealizable(format!("an entry is not a multiple of 1/{atom_count}"))
    })?;
    realize_counts(&counts, alpha)
}

/// [`realize`] on an integer table `|A_i ∩ T⁻¹A_j|`.
pub fn realize_counts(counts: &[Vec<usize>], alpha: &Partition) -> Result<Automorphism> {
    let sizes = alpha.cell_sizes();
    let n = sizes.len();
    for i in 0..n {
        let row: usize = counts[i].iter().sum();
        let col: usize = counts.iter().map(|r| r[i]).sum();
        if row != sizes[i] || col != sizes[i] {
            return Err(Error::NotRealizable(format!(
                "marginals of cell {} are ({row}, {col}) atoms, cell has {}",
                i + 1,
                sizes[i]
            )));
        }
    }
    let mut forward = vec![usize::MAX; alpha.atom_count()];
    let mut next_source = vec![0usize; n];
    let mut next_target = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            for _ in 0..counts[i][j] {
                let x = alpha.cell(i)[next_source[i]];
                let y = alpha.cell(j)[next_target[j]];
                forward[x] = y;
                next_source[i] += 1;
                next_target[j] += 1;
            }
        }
    }
    Automorphism::new(forward).map_err(|e| Error::Internal(format!("realize: {e}")))
}

/// Tolerance on the marginals of a real coupling passed to [`round_to_grid`].
pub const ROUNDING_INPUT_TOL: f64 = 1e-9;

/// Rounds a real coupling with marginals equal to the cell masses of `α` to a
/// realizable coupling on the `1/N` grid with the same marginals exactly.
///
/// Each row is apportioned by largest remainders, then column sums are
/// repaired by shortest sequences of unit moves inside rows that keep every
/// entry at the floor or ceiling of its target. The entrywise error is below
/// `1/N` whenever that repair succeeds and at most `n/N` otherwise.
pub fn round_to_grid(target: &[Vec<f64>], alpha: &Partition) -> Result<CouplingMatrix> {
    let n = alpha.cell_count();
    let atoms = alpha.atom_count();
    let sizes = alpha.cell_sizes();
    if target.len() != n || target.iter().any(|r| r.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: target.len(),
        });
    }
    let nf = atoms as f64;
    for i in 0..n {
        let mass = sizes[i] as f64 / nf;
        let row: f64 = target[i].iter().sum();
        let col: f64 = target.iter().map(|r| r[i]).sum();
        if (row - mass).abs() > ROUNDING_INPUT_TOL || (col - mass).abs() > ROUNDING_INPUT_TOL {
            return Err(Error::Precondition(format!(
                "marginals of cell {} are ({row}, {col}), expected {mass}",
                i + 1
            )));
        }
        if let Some(v) = target[i]
            .iter()
            .find(|v| **v < -ROUNDING_INPUT_TOL || !v.is_finite())
        {
            return Err(Error::Precondition(format!(
                "entry {v} in row {} is not a mass",
                i + 1
            )));
        }
    }

    // targets in atoms, snapped to integers within tolerance
    let snap = ROUNDING_INPUT_TOL * nf * 4.0;
    let scaled: Vec<Vec<f64>> = target
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| {
                    let t = (v * nf).max(0.0);
                    if (t - t.round()).abs() <= snap {
                        t.round()
                    } else {
                        t
                    }
                })
                .collect()
        })
        .collect();
    let lo: Vec<Vec<usize>> = scaled
        .iter()
        .map(|r| r.iter().map(|t| t.floor() as usize).collect())
        .collect();
    let hi: Vec<Vec<usize>> = scaled
        .iter()
        .map(|r| r.iter().map(|t| t.ceil() as usize).collect())
        .collect();

    let mut table = lo.clone();
    for i in 0..n {
        let base: usize = table[i].iter().sum();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[i][a] - scaled[i][a].floor();
            let fb = scaled[i][b] - scaled[i][b].floor();
            fb.partial_cmp(&fa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        if base > sizes[i] {
            return Err(Error::InfeasibleRepair(format!(
                "row {} floors sum to {base} > {}",
                i + 1,
                sizes[i]
            )));
        }
        for &j in order.iter().cycle().take(sizes[i] - base) {
            table[i][j] += 1;
        }
    }

    if !repair_columns(&mut table, &sizes, &lo, &hi) {
        // fall back to unconstrained moves; the error bound is checked below
        let zeros = vec![vec![0; n]; n];
        let caps = vec![vec![usize::MAX; n]; n];
        if !repair_columns(&mut table, &sizes, &zeros, &caps) {
            let cols: Vec<usize> = (0..n).map(|j| table.iter().map(|r| r[j]).sum()).collect();
            return Err(Error::InfeasibleRepair(format!(
                "column sums {cols:?} cannot be moved to {sizes:?}"
            )));
        }
    }
    let coupling = CouplingMatrix::from_counts(&table, atoms);
    let bound = n as f64 / nf;
    for i in 0..n {
        for j in 0..n {
            let err = (table[i][j] as f64 / nf - target[i][j]).abs();
            if err > bound + ROUNDING_INPUT_TOL {
                return Err(Error::InfeasibleRepair(format!(
                    "entry ({}, {}) error {err} exceeds n/N = {bound}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(coupling)
}

/// Moves units within rows along shortest column paths until every column sum
/// equals its size. Entry `(i, j)` stays within `lo[i][j]..=hi[i][j]`.
fn repair_columns(
    table: &mut [Vec<usize>],
    sizes: &[usize],
    lo: &[Vec<usize>],
    hi: &[Vec<usize>],
) -> bool {
    let n = sizes.len();
    loop {
        let col_sum = |t: &[Vec<usize>], j: usize| t.iter().map(|r| r[j]).sum::<usize>();
        let excess: Vec<usize> = (0..n).filter(|&j| col_sum(table, j) > sizes[j]).collect();
        if excess.is_empty() {
            return true;
        }
        // BFS over columns; an edge j -> k via row i moves one unit from (i,j) to (i,k)
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        for &j in &excess {
            seen[j] = true;
            queue.push_back(j);
        }
        let mut end = None;
        while let Some(j) = queue.pop_front() {
            if col_sum(table, j) < sizes[j] {
                end = Some(j);
                break;
            }
            for k in 0..n {
                if seen[k] {
                    continue;
                }
                if let Some(i) = (0..n).find(|&i| table[i][j] > lo[i][j] && table[i][k] < hi[i][k])
                {
                    seen[k] = true;
                    parent[k] = Some((j, i));
                    queue.push_back(k);
                }
            }
        }
        let Some(mut k) = end else {
            return false;
        };
        while let Some((j, i)) = parent[k] {
            table[i][j] -= 1;
            table[i][k] += 1;
            k = j;
        }
    }
}

/// One term `weight · U_perm` of a Birkhoff decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BirkhoffTerm {
    #[serde(with = "rational::serde_str")]
    pub weight: Q,
    pub perm: Automorphism,
}

/// Greedy Birkhoff–von Neumann decomposition `D = Σ λ_k U_{T_k}` with
/// `Σ λ_k = 1` and at most `(n−1)²+1` terms.
///
/// Each step finds a permutation inside the support of the remainder
/// (augmenting paths, lowest index first) and subtracts the smallest entry it
/// covers, which zeroes at least one entry and drops to a smaller face of the
/// Birkhoff polytope.
pub fn birkhoff(d: &RatMatrix) -> Result<Vec<BirkhoffTerm>> {
    if let Some(v) = is_markov(d).violation {
        return Err(Error::NotMarkov(v.to_string()));
    }
    let n = d.rows();
    let mut remainder = d.clone();
    let mut terms = Vec::new();
    while remainder.entries().any(|q| !q.is_zero()) {
        let support: Vec<Vec<usize>> = (0..n)
            .map(|col| {
                (0..n)
                    .filter(|&row| remainder.get(row, col).is_positive())
                    .collect()
            })
            .collect();
        // row_of[col] = row, i.e. U[T(x)][x] with x = col
        let row_of = perfect_matching(&support).ok_or_else(|| {
            Error::Internal(
                "no perfect matching on the support of a doubly stochastic remainder".into(),
            )
        })?;
        let weight = (0..n)
            .map(|col| remainder.get(row_of[col], col).clone())
            .min()
            .expect("n > 0");
        for col in 0..n {
            let row = row_of[col];
            let v = remainder.get(row, col) - &weight;
            remainder.set(row, col, v);
        }
        terms.push(BirkhoffTerm {
            weight,
            perm: Automorphism::new(row_of).map_err(|e| Error::Internal(e.to_string()))?,
        });
        if terms.len() > n * n {
            return Err(Error::Internal(
                "Birkhoff decomposition did not terminate".into(),
            ));
        }
    }
    Ok(terms)
}

/// `Σ λ_k U_{T_k}`.
pub fn reconstruct(terms: &[BirkhoffTerm], n: usize) -> Result<RatMatrix> {
    terms.iter().try_fold(RatMatrix::zeros(n, n), |acc, t| {
        acc.add(&koopman_matrix(&t.perm).matrix().scale(&t.weight))
    })
}

/// Perfect matching of left vertices (columns) to right vertices (rows) by
/// augmenting paths; each left vertex tries rows in ascending order.
fn perfect_matching(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    fn augment(
        left: usize,
        adj: &[Vec<usize>],
        visited: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[left] {
            if visited[r] {
                continue;
            }
            visited[r] = true;
            if match_right[r].is_none_or(|l| augment(l, adj, visited, match_right)) {
                match_right[r] = Some(left);
                return true;
            }
        }
        false
    }
    for left in 0..n {
        let mut visited = vec![false; n];
        if !augment(left, adj, &mut visited, &mut match_right) {
            return None;
        }
    }
    let mut row_of = vec![0; n];
    for (r, l) in match_right.iter().enumerate() {
        row_of[l.expect("perfect")] = r;
    }
    Some(row_of)
}
