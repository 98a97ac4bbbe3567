//! Seeded random generators for experiments.
//!
//! All randomness goes through [`ChaCha8Rng`]: portable, seedable, and with
//! independent streams, so trial `k` of a run with seed `s` always draws from
//! stream `k` of seed `s` regardless of scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::markov::{MarkovMatrix, RatMatrix};
use crate::rational::{self, Q};
use crate::space::{AtomSpace, Automorphism, Partition};
use crate::uniformity::u_deviation;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform permutation of `atom_count` atoms (Fisher–Yates).
pub fn random_automorphism<R: Rng + ?Sized>(rng: &mut R, atom_count: usize) -> Automorphism {
    let mut forward: Vec<usize> = (0..atom_count).collect();
    forward.shuffle(rng);
    Automorphism::from_vec_unchecked(forward)
}

/// Random partition of `atom_count` atoms into exactly `cells` nonempty cells.
pub fn random_partition<R: Rng + ?Sized>(
    rng: &mut R,
    atom_count: usize,
    cells: usize,
) -> Partition {
    assert!(cells >= 1 && cells <= atom_count, "need 1 <= n <= N");
    let mut atoms: Vec<usize> = (0..atom_count).collect();
    atoms.shuffle(rng);
    let mut labels = vec![0; atom_count];
    for (k, &x) in atoms.iter().enumerate() {
        labels[x] = if k < cells {
            k + 1
        } else {
            rng.gen_range(1..=cells)
        };
    }
    let space = AtomSpace::new(atom_count).expect("nonempty");
    Partition::with_cells(space, &labels, cells).expect("every cell seeded")
}

/// Partition into `cells` blocks of contiguous atoms with sizes as equal as possible.
pub fn balanced_partition(atom_count: usize, cells: usize) -> Partition {
    let sizes: Vec<usize> = (0..cells)
        .map(|i| atom_count / cells + usize::from(i < atom_count % cells))
        .collect();
    Partition::contiguous(&sizes).expect("valid sizes")
}

/// Uniform permutation mapping every cell onto itself.
pub fn random_cell_preserving<R: Rng + ?Sized>(rng: &mut R, alpha: &Partition) -> Automorphism {
    let mut forward: Vec<usize> = (0..alpha.atom_count()).collect();
    for cell in alpha.cells() {
        let mut image = cell.clone();
        image.shuffle(rng);
        for (&x, &y) in cell.iter().zip(&image) {
            forward[x] = y;
        }
    }
    Automorphism::from_vec_unchecked(forward)
}

/// A random element of `U_{α,ε}` (`u_deviation < ε`): a cell-preserving
/// permutation followed by a few transpositions, thinned until it qualifies.
pub fn random_near_identity<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: &Partition,
    epsilon: &Q,
) -> Automorphism {
    let n = alpha.atom_count();
    let base = random_cell_preserving(rng, alpha);
    // each transposition moves at most 2/N of mass per cell
    let budget = rational::to_f64(epsilon) * n as f64 / 2.0;
    let max_swaps = (budget.ceil() as usize).max(1);
    let mut swaps: Vec<(usize, usize)> = (0..rng.gen_range(0..=max_swaps))
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .collect();
    loop {
        let mut forward = base.forward().to_vec();
        for &(a, b) in &swaps {
            forward.swap(a, b);
        }
        let candidate = Automorphism::from_vec_unchecked(forward);
        if &u_deviation(&candidate, alpha).expect("same size") < epsilon {
            return candidate;
        }
        swaps.pop();
    }
}

/// `t` composed with `swaps` random transpositions on the right.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, t: &Automorphism, swaps: usize) -> Automorphism {
    let n = t.len();
    let mut pre: Vec<usize> = (0..n).collect();
    for _ in 0..swaps {
        pre.swap(rng.gen_range(0..n), rng.gen_range(0..n));
    }
    let pre = Automorphism::from_vec_unchecked(pre);
    t.compose(&pre).expect("same size")
}

/// Convex combination of `terms` uniform random permutation matrices with
/// random positive rational weights. Exactly doubly stochastic.
pub fn random_markov<R: Rng + ?Sized>(rng: &mut R, size: usize, terms: usize) -> MarkovMatrix {
    let weights: Vec<Q> = (0..terms)
        .map(|_| rational::ratio(rng.gen_range(1..=12), rng.gen_range(1..=7)))
        .collect();
    let total: Q = weights.iter().sum();
    let mut acc = RatMatrix::zeros(size, size);
    for w in &weights {
        let w = w / &total;
        let p = random_automorphism(rng, size);
        for x in 0..size {
            let cur = acc.get(p.apply(x), x).clone();
            acc.set(p.apply(x), x, cur + &w);
        }
    }
    MarkovMatrix::new(acc).expect("convex combination of permutations")
}

/// Random integer table with row sums `rows` and column sums `cols`
/// (equal totals), filled row-major with uniformly drawn feasible entries.
pub fn random_table<R: Rng + ?Sized>(
    rng: &mut R,
    rows: &[usize],
    cols: &[usize],
) -> Vec<Vec<usize>> {
    let mut col_left = cols.to_vec();
    let mut table = vec![vec![0; cols.len()]; rows.len()];
    for (i, &r) in rows.iter().enumerate() {
        let mut row_left = r;
        for j in 0..cols.len() {
            let rest: usize = col_left[j + 1..].iter().sum();
            let lo = row_left.saturating_sub(rest);
            let hi = row_left.min(col_left[j]);
            let v = if j + 1 == cols.len() {
                row_left
            } else {
                rng.gen_range(lo..=hi)
            };
            table[i][j] = v;
            row_left -= v;
            col_left[j] -= v;
        }
    }
    table
}

/// Random rational observable with small numerators and denominators.
pub fn random_observable<R: Rng + ?Sized>(rng: &mut R, atom_count: usize) -> Vec<Q> {
    (0..atom_count)
        .map(|_| rational::ratio(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::is_markov;
    use crate::space::joint_counts;

    #[test]
    fn streams_are_reproducible() {
        let a = random_automorphism(&mut trial_rng(7, 3), 20);
        let b = random_automorphism(&mut trial_rng(7, 3), 20);
        let c = random_automorphism(&mut trial_rng(7, 4), 20);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generators_respect_contracts() {
        let mut rng = trial_rng(1, 0);
        for _ in 0..200 {
            let alpha = random_partition(&mut rng, 12, 3);
            assert_eq!(alpha.cell_count(), 3);
            let g = random_cell_preserving(&mut rng, &alpha);
            assert_eq!(u_deviation(&g, &alpha).unwrap(), rational::zero());
            let eps = rational::ratio(1, 4);
            let p = random_near_identity(&mut rng, &alpha, &eps);
            assert!(u_deviation(&p, &alpha).unwrap() < eps);
            assert!(is_markov(random_markov(&mut rng, 5, 3).matrix()).ok);
        }
    }

    #[test]
    fn random_table_has_marginals() {
        let mut rng = trial_rng(2, 0);
        let sizes = [3, 5, 1, 7];
        for _ in 0..100 {
            let t = random_table(&mut rng, &sizes, &sizes);
            for (i, &s) in sizes.iter().enumerate() {
                assert_eq!(t[i].iter().sum::<usize>(), s);
                assert_eq!(t.iter().map(|r| r[i]).sum::<usize>(), s);
            }
        }
        // tables from automorphisms are of this form too
        let alpha = balanced_partition(10, 3);
        let j = joint_counts(&random_automorphism(&mut rng, 10), &alpha).unwrap();
        assert_eq!(j.iter().flatten().sum::<usize>(), 10);
    }
}
