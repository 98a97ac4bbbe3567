//! Entourages indexed by a partition `α` and a tolerance `ε`.
//!
//! * `U_{α,ε}`: automorphisms with `max_i μ(A_i △ T⁻¹A_i) < ε`.
//! * `W_{α,ε}`: pairs whose joint matrices differ by less than `ε` in every entry.
//! * `W̃_{α,ε}`: pairs with `T = P·S·Q` for some `P, Q ∈ U_{α,ε}`.
//!
//! Deviations and distances are returned as exact values; every membership
//! test is the strict comparison `< ε`.

use num_traits::Signed;
use serde::Serialize;

use crate::density;
use crate::error::{Error, Result};
use crate::markov::CouplingMatrix;
use crate::rational::{self, Q};
use crate::space::{check_len, joint_counts, Automorphism, Partition};

/// The index `(α, ε)` of an entourage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntourageParams {
    pub partition: Partition,
    pub epsilon: Q,
}

impl EntourageParams {
    pub fn new(partition: Partition, epsilon: Q) -> Result<Self> {
        check_epsilon(&epsilon)?;
        Ok(EntourageParams { partition, epsilon })
    }

    pub fn in_u(&self, t: &Automorphism) -> Result<bool> {
        Ok(u_deviation(t, &self.partition)? < self.epsilon)
    }

    pub fn in_w(&self, s: &Automorphism, t: &Automorphism) -> Result<bool> {
        Ok(w_distance(s, t, &self.partition)? < self.epsilon)
    }
}

pub(crate) fn check_epsilon(epsilon: &Q) -> Result<()> {
    if !epsilon.is_positive() {
        return Err(Error::NonPositiveEpsilon(rational::format(epsilon)));
    }
    Ok(())
}

/// Number of atoms in `A_i △ T⁻¹A_i`, per cell.
pub fn symmetric_difference_counts(t: &Automorphism, alpha: &Partition) -> Result<Vec<usize>> {
    check_len(alpha.atom_count(), t.len())?;
    let mut counts = vec![0usize; alpha.cell_count()];
    for x in 0..t.len() {
        let from = alpha.cell_of(x);
        let to = alpha.cell_of(t.apply(x));
        if from != to {
            // x ∈ A_from \ T⁻¹A_from and x ∈ T⁻¹A_to \ A_to
            counts[from] += 1;
            counts[to] += 1;
        }
    }
    Ok(counts)
}

/// `max_i μ(A_i △ T⁻¹A_i)`; zero iff `T` maps every cell onto itself.
pub fn u_deviation(t: &Automorphism, alpha: &Partition) -> Result<Q> {
    let worst = symmetric_difference_counts(t, alpha)?
        .into_iter()
        .max()
        .unwrap_or(0);
    Ok(rational::frac(worst, alpha.atom_count()))
}

/// Largest entrywise gap between the integer joint tables of `S` and `T`.
pub fn w_distance_counts(s: &Automorphism, t: &Automorphism, alpha: &Partition) -> Result<usize> {
    let a = joint_counts(s, alpha)?;
    let b = joint_counts(t, alpha)?;
    Ok(max_count_gap(&a, &b))
}

pub(crate) fn max_count_gap(a: &[Vec<usize>], b: &[Vec<usize>]) -> usize {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(&x, &y)| x.abs_diff(y))
        .max()
        .unwrap_or(0)
}

/// `max_{i,j} |μ(A_i ∩ S⁻¹A_j) − μ(A_i ∩ T⁻¹A_j)|`.
///
/// A pseudometric: distinct automorphisms can be at distance zero.
pub fn w_distance(s: &Automorphism, t: &Automorphism, alpha: &Partition) -> Result<Q> {
    Ok(rational::frac(
        w_distance_counts(s, t, alpha)?,
        alpha.atom_count(),
    ))
}

/// Checks the witness `(P, Q)` for `(S, T) ∈ W̃_{α,ε}`: `T = P·S·Q` exactly with
/// both factors in `U_{α,ε}`.
pub fn roelcke_related(
    s: &Automorphism,
    t: &Automorphism,
    p: &Automorphism,
    q: &Automorphism,
    alpha: &Partition,
    epsilon: &Q,
) -> Result<bool> {
    check_epsilon(epsilon)?;
    let psq = p.compose(&s.compose(q)?)?;
    if &psq != t {
        return Ok(false);
    }
    Ok(&u_deviation(p, alpha)? < epsilon && &u_deviation(q, alpha)? < epsilon)
}

/// Upper bound on the number of joint tables enumerated while certifying a net.
pub const NET_LATTICE_LIMIT: usize = 2_000_000;
/// Upper bound on center-versus-table comparisons while certifying a net.
pub const NET_COMPARISON_LIMIT: usize = 200_000_000;

/// A finite `ε`-net for `(G, W_{α,ε})` together with its coverage certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Net {
    pub centers: Vec<Automorphism>,
    /// Joint tables `|A_i ∩ c⁻¹A_j|` of the centers, in the same order.
    pub center_tables: Vec<Vec<Vec<usize>>>,
    /// Spacing of the grid on the free `(n−1)×(n−1)` block, in atoms.
    pub grid_step: usize,
    /// Centers coming from the grid; the rest were added to close coverage gaps.
    pub grid_centers: usize,
    /// Number of realizable joint tables checked; every one is within `ε` of a center.
    pub tables_checked: usize,
}

/// Builds a finite list of automorphisms such that every automorphism `T` of
/// the atoms has `w_distance(T, c, α) < ε` for some center `c`.
///
/// Grid points are spaced `⌊Nε⌋` atoms apart on the free `(n−1)×(n−1)` block of
/// the joint table (covering radius `ε/2` there); feasible ones are realized as
/// permutations. Coverage is then certified against every integer table with
/// the cell sizes as marginals, which is exactly the set of joint tables of
/// automorphisms. Tables left uncovered (the dependent entries can accumulate
/// error when `n ≥ 3`) become centers themselves.
pub fn precompactness_net(alpha: &Partition, epsilon: &Q, atom_count: usize) -> Result<Net> {
    check_epsilon(epsilon)?;
    check_len(alpha.atom_count(), atom_count)?;
    let sizes = alpha.cell_sizes();
    // s = max(1, ⌊Nε⌋)
    let scaled = epsilon * rational::frac(atom_count, 1);
    let grid_step = num_traits::ToPrimitive::to_usize(&scaled.floor().to_integer())
        .unwrap_or(usize::MAX)
        .max(1);

    let infeasible = |what: String| {
        Err(Error::InfeasibleNet(format!(
            "{what} for cell sizes {sizes:?}; coverage cannot be certified"
        )))
    };
    let mut table_count = 0usize;
    for_each_table(&sizes, &mut |_| {
        table_count += 1;
        table_count <= NET_LATTICE_LIMIT
    });
    if table_count > NET_LATTICE_LIMIT {
        return infeasible(format!("more than {NET_LATTICE_LIMIT} joint tables"));
    }

    let mut tables = Vec::new();
    enumerate_grid(&sizes, grid_step, &mut tables);
    let grid_centers = tables.len();

    // strict: gap / N < ε
    let covers = |gap: usize| rational::frac(gap, atom_count) < *epsilon;
    let mut comparisons = 0usize;
    let mut overflow = false;
    for_each_table(&sizes, &mut |table| {
        comparisons += tables.len();
        if comparisons > NET_COMPARISON_LIMIT {
            overflow = true;
            return false;
        }
        if !tables.iter().any(|c| covers(max_count_gap(c, table))) {
            tables.push(table.clone());
        }
        true
    });
    if overflow {
        return infeasible(format!(
            "more than {NET_COMPARISON_LIMIT} center comparisons"
        ));
    }
    let tables_checked = table_count;

    let centers = tables
        .iter()
        .map(|t| {
            density::realize(
                &CouplingMatrix::from_counts(t, atom_count),
                alpha,
                atom_count,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Net {
        centers,
        center_tables: tables,
        grid_step,
        grid_centers,
        tables_checked,
    })
}

/// Grid tables: free entries multiples of `step`, dependent entries nonnegative.
fn enumerate_grid(sizes: &[usize], step: usize, out: &mut Vec<Vec<Vec<usize>>>) {
    let n = sizes.len();
    let free = n.saturating_sub(1);
    let mut table = vec![vec![0usize; n]; n];
    fn rec(
        k: usize,
        free: usize,
        sizes: &[usize],
        step: usize,
        table: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if k == free * free {
            if let Some(full) = complete_table(sizes, table) {
                out.push(full);
            }
            return;
        }
        let (i, j) = (k / free, k % free);
        let row_used: usize = table[i][..j].iter().sum();
        let col_used: usize = (0..i).map(|r| table[r][j]).sum();
        let hi = (sizes[i] - row_used.min(sizes[i])).min(sizes[j] - col_used.min(sizes[j]));
        let mut v = 0;
        while v <= hi {
            table[i][j] = v;
            rec(k + 1, free, sizes, step, table, out);
            v += step;
        }
        table[i][j] = 0;
    }
    rec(0, free, sizes, step, &mut table, out);
}

/// Fills the last row and column from the marginals; `None` if any goes negative.
fn complete_table(sizes: &[usize], free_block: &[Vec<usize>]) -> Option<Vec<Vec<usize>>> {
    let n = sizes.len();
    let last = n - 1;
    let mut t = free_block.to_vec();
    for i in 0..last {
        let used: usize = t[i][..last].iter().sum();
        t[i][last] = sizes[i].checked_sub(used)?;
    }
    for j in 0..n {
        let used: usize = (0..last).map(|i| t[i][j]).sum();
        t[last][j] = sizes[j].checked_sub(used)?;
    }
    let row_sum: usize = t[last].iter().sum();
    (row_sum == sizes[last]).then_some(t)
}

/// Visits every nonnegative integer table with row and column sums `sizes`,
/// in lexicographic row-major order. Stops when `visit` returns `false`.
pub fn for_each_table(sizes: &[usize], visit: &mut dyn FnMut(&Vec<Vec<usize>>) -> bool) {
    let n = sizes.len();
    let mut table = vec![vec![0usize; n]; n];
    let mut col_left = sizes.to_vec();
    fn rec(
        k: usize,
        sizes: &[usize],
        table: &mut Vec<Vec<usize>>,
        col_left: &mut Vec<usize>,
        row_left: usize,
        visit: &mut dyn FnMut(&Vec<Vec<usize>>) -> bool,
    ) -> bool {
        let n = sizes.len();
        if k == n * n {
            return visit(table);
        }
        let (i, j) = (k / n, k % n);
        let row_left = if j == 0 { sizes[i] } else { row_left };
        let rest: usize = col_left[j + 1..].iter().sum();
        let lo = row_left.saturating_sub(rest);
        let hi = row_left.min(col_left[j]);
        let (lo, hi) = if j + 1 == n {
            (row_left, row_left)
        } else {
            (lo, hi)
        };
        if lo > hi || (j + 1 == n && row_left > col_left[j]) {
            return true;
        }
        for v in lo..=hi {
            table[i][j] = v;
            col_left[j] -= v;
            let keep_going = rec(k + 1, sizes, table, col_left, row_left - v, visit);
            col_left[j] += v;
            if !keep_going {
                return false;
            }
        }
        table[i][j] = 0;
        true
    }
    rec(0, sizes, &mut table, &mut col_left, 0, visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::sampling::{random_automorphism, trial_rng};
    use crate::space::identity;
    use std::collections::BTreeSet;

    fn halves() -> Partition {
        Partition::contiguous(&[2, 2]).unwrap()
    }

    // set-based oracle for μ(A_i △ T⁻¹A_i)
    fn brute_u(t: &Automorphism, alpha: &Partition) -> Q {
        let n = t.len();
        (0..alpha.cell_count())
            .map(|i| {
                let a: BTreeSet<usize> = alpha.cell(i).iter().copied().collect();
                let pre: BTreeSet<usize> = (0..n).filter(|&x| a.contains(&t.apply(x))).collect();
                rational::frac(a.symmetric_difference(&pre).count(), n)
            })
            .max()
            .unwrap()
    }

    #[test]
    fn u_deviation_examples() {
        let alpha = halves();
        assert_eq!(u_deviation(&identity(4), &alpha).unwrap(), ratio(0, 1));
        assert_eq!(
            u_deviation(&Automorphism::swap(4, 1, 2), &alpha).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            u_deviation(&Automorphism::swap(4, 0, 1), &alpha).unwrap(),
            ratio(0, 1)
        );
        assert_eq!(brute_u(&Automorphism::swap(4, 1, 2), &alpha), ratio(1, 2));
    }

    #[test]
    fn u_deviation_matches_set_oracle() {
        let mut rng = trial_rng(11, 0);
        for _ in 0..300 {
            let alpha = crate::sampling::random_partition(&mut rng, 9, 3);
            let t = random_automorphism(&mut rng, 9);
            assert_eq!(u_deviation(&t, &alpha).unwrap(), brute_u(&t, &alpha));
            // μ(A_i △ T⁻¹A_i) = μ(TA_i △ A_i)
            assert_eq!(
                u_deviation(&t, &alpha).unwrap(),
                u_deviation(&t.inverse(), &alpha).unwrap()
            );
        }
    }

    #[test]
    fn w_distance_examples() {
        let alpha = halves();
        let t = Automorphism::new(vec![3, 1, 0, 2]).unwrap();
        assert_eq!(w_distance(&t, &t, &alpha).unwrap(), ratio(0, 1));
        assert_eq!(
            w_distance(&identity(4), &Automorphism::swap(4, 1, 2), &alpha).unwrap(),
            ratio(1, 4)
        );
        assert_eq!(
            w_distance(&identity(4), &Automorphism::swap(4, 0, 1), &alpha).unwrap(),
            ratio(0, 1)
        );
    }

    #[test]
    fn roelcke_related_examples() {
        let alpha = halves();
        let s = Automorphism::new(vec![2, 3, 1, 0]).unwrap();
        let id = identity(4);
        assert!(roelcke_related(&s, &s, &id, &id, &alpha, &ratio(1, 100)).unwrap());
        let t = Automorphism::swap(4, 0, 1);
        assert!(!roelcke_related(&s, &t, &id, &id, &alpha, &ratio(1, 2)).unwrap());
        assert!(roelcke_related(
            &id,
            &t,
            &Automorphism::swap(4, 0, 1),
            &id,
            &alpha,
            &ratio(1, 8)
        )
        .unwrap());
        // correct product but P outside U_{α,ε}
        let cross = Automorphism::swap(4, 1, 2);
        assert!(!roelcke_related(&id, &cross, &cross, &id, &alpha, &ratio(1, 2)).unwrap());
        assert!(roelcke_related(&id, &id, &id, &id, &alpha, &ratio(0, 1)).is_err());
    }

    #[test]
    fn cell_preserving_right_translation_is_exact() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..100 {
            let alpha = crate::sampling::random_partition(&mut rng, 10, 3);
            let s = random_automorphism(&mut rng, 10);
            let t = random_automorphism(&mut rng, 10);
            let g = crate::sampling::random_cell_preserving(&mut rng, &alpha);
            assert_eq!(
                w_distance(&s, &t, &alpha).unwrap(),
                w_distance(&s.compose(&g).unwrap(), &t.compose(&g).unwrap(), &alpha).unwrap()
            );
        }
    }

    #[test]
    fn trivial_partition_net_is_identity() {
        let alpha = Partition::trivial(6).unwrap();
        let net = precompactness_net(&alpha, &ratio(1, 10), 6).unwrap();
        assert_eq!(net.centers, vec![identity(6)]);
    }

    #[test]
    fn two_cell_net_small() {
        // joint tables are [[t, 4-t], [4-t, t]] for t = 0..=4
        let alpha = Partition::contiguous(&[4, 4]).unwrap();
        let net = precompactness_net(&alpha, &ratio(1, 4), 8).unwrap();
        assert!(net.centers.len() <= 5);
        assert_eq!(net.tables_checked, 5);
        for t in 0..=4usize {
            assert!(net
                .center_tables
                .iter()
                .any(|c| c[0][0].abs_diff(t) * 4 < 8));
        }
    }

    #[test]
    fn table_enumeration_counts() {
        let mut count = 0;
        for_each_table(&[1, 1, 1], &mut |_| {
            count += 1;
            true
        });
        // 3x3 permutation matrices
        assert_eq!(count, 6);
        let mut count = 0;
        for_each_table(&[2, 2], &mut |t| {
            assert_eq!(t[0][0] + t[0][1], 2);
            count += 1;
            true
        });
        assert_eq!(count, 3);
    }

    #[test]
    fn three_cell_net_covers_everything() {
        let alpha = Partition::contiguous(&[4, 3, 5]).unwrap();
        let eps = ratio(1, 6);
        let net = precompactness_net(&alpha, &eps, 12).unwrap();
        let mut rng = trial_rng(3, 0);
        for _ in 0..500 {
            let t = random_automorphism(&mut rng, 12);
            assert!(net
                .centers
                .iter()
                .any(|c| w_distance(&t, c, &alpha).unwrap() < eps));
        }
    }
}
