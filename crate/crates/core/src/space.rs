//! The finite measure algebra: `N` atoms of mass `1/N`, partitions into
//! labelled cells, and automorphisms (permutations of atoms).
//!
//! Conventions used throughout the crate:
//!
//! * `T.apply(x)` is the image of atom `x`; `compose(S, T)` applies `T` first.
//! * The preimage `T⁻¹A = {x : T(x) ∈ A}`, so the joint matrix entry `(i, j)`
//!   is `μ(A_i ∩ T⁻¹A_j)`.
//! * The Koopman matrix `U_T` has `U_T[T(x)][x] = 1`, so that
//!   `(U_T f)(y) = f(T⁻¹ y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{CouplingMatrix, MarkovMatrix, RatMatrix};
use crate::rational::{self, Q};

/// `N` equal-mass atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomSpace {
    atom_count: usize,
}

impl AtomSpace {
    pub fn new(atom_count: usize) -> Result<Self> {
        if atom_count == 0 {
            return Err(Error::EmptySpace);
        }
        Ok(AtomSpace { atom_count })
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn atom_mass(&self) -> Q {
        rational::frac(1, self.atom_count)
    }

    /// Measure of a set of `count` atoms.
    pub fn measure(&self, count: usize) -> Q {
        rational::frac(count, self.atom_count)
    }
}

/// A partition `α = {A_1, …, A_n}` of the atoms into nonempty cells.
///
/// Labels are 1-based on the outside (`labels[x] ∈ 1..=n`) and 0-based cell
/// indices inside the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    cell_of: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates a 1-based label array. The cell count is the largest label.
    pub fn new(space: AtomSpace, labels: &[usize]) -> Result<Self> {
        let cells = labels.iter().copied().max().unwrap_or(0);
        Self::with_cells(space, labels, cells)
    }

    /// Like [`Partition::new`] with an explicit cell count `n`.
    pub fn with_cells(space: AtomSpace, labels: &[usize], cell_count: usize) -> Result<Self> {
        if labels.len() != space.atom_count() {
            return Err(Error::LengthMismatch {
                expected: space.atom_count(),
                actual: labels.len(),
            });
        }
        let mut cells = vec![Vec::new(); cell_count];
        let mut cell_of = Vec::with_capacity(labels.len());
        for (atom, &label) in labels.iter().enumerate() {
            if label == 0 || label > cell_count {
                return Err(Error::LabelOutOfRange {
                    atom,
                    label,
                    cells: cell_count,
                });
            }
            cells[label - 1].push(atom);
            cell_of.push(label - 1);
        }
        if let Some(empty) = cells.iter().position(Vec::is_empty) {
            return Err(Error::EmptyCell { cell: empty + 1 });
        }
        Ok(Partition { cell_of, cells })
    }

    /// Consecutive blocks of the given sizes: `{0..s_1}, {s_1..s_1+s_2}, …`.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let total = sizes.iter().sum();
        let space = AtomSpace::new(total)?;
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i + 1, s))
            .collect();
        Self::with_cells(space, &labels, sizes.len())
    }

    pub fn trivial(atom_count: usize) -> Result<Self> {
        Self::contiguous(&[atom_count])
    }

    pub fn singletons(atom_count: usize) -> Result<Self> {
        Self::contiguous(&vec![1; atom_count])
    }

    pub fn atom_count(&self) -> usize {
        self.cell_of.len()
    }

    pub fn space(&self) -> AtomSpace {
        AtomSpace {
            atom_count: self.cell_of.len(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// 0-based cell index of an atom.
    pub fn cell_of(&self, atom: usize) -> usize {
        self.cell_of[atom]
    }

    /// Atoms of cell `i` (0-based), ascending.
    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    pub fn cell_masses(&self) -> Vec<Q> {
        let n = self.atom_count();
        self.cells
            .iter()
            .map(|c| rational::frac(c.len(), n))
            .collect()
    }

    /// 1-based labels, the serialized form.
    pub fn labels(&self) -> Vec<usize> {
        self.cell_of.iter().map(|c| c + 1).collect()
    }

    /// The partition `g·α` whose cells are the images `g(A_i)`.
    pub fn push_forward(&self, g: &Automorphism) -> Result<Partition> {
        check_len(self.atom_count(), g.len())?;
        let mut labels = vec![0; self.atom_count()];
        for (x, &c) in self.cell_of.iter().enumerate() {
            labels[g.apply(x)] = c + 1;
        }
        Self::with_cells(self.space(), &labels, self.cell_count())
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        let space = AtomSpace::new(labels.len()).map_err(serde::de::Error::custom)?;
        Partition::new(space, &labels).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for [`Partition::new`].
pub fn make_partition(space: AtomSpace, labels: &[usize]) -> Result<Partition> {
    Partition::new(space, labels)
}

/// A measure-preserving automorphism of the atom space: a permutation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Automorphism {
    forward: Vec<usize>,
}

impl Automorphism {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; forward.len()];
        for (index, &y) in forward.iter().enumerate() {
            if y >= forward.len() {
                return Err(Error::NotAPermutation {
                    index,
                    reason: "out of range",
                });
            }
            if std::mem::replace(&mut seen[y], true) {
                return Err(Error::NotAPermutation {
                    index,
                    reason: "a repeated image",
                });
            }
        }
        Ok(Automorphism { forward })
    }

    pub(crate) fn from_vec_unchecked(forward: Vec<usize>) -> Self {
        debug_assert!(Automorphism::new(forward.clone()).is_ok());
        Automorphism { forward }
    }

    pub fn identity(atom_count: usize) -> Self {
        Automorphism {
            forward: (0..atom_count).collect(),
        }
    }

    /// The transposition of atoms `a` and `b` on `atom_count` atoms.
    pub fn swap(atom_count: usize, a: usize, b: usize) -> Self {
        let mut forward: Vec<usize> = (0..atom_count).collect();
        forward.swap(a, b);
        Automorphism { forward }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    #[inline]
    pub fn apply(&self, atom: usize) -> usize {
        self.forward[atom]
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(x, &y)| x == y)
    }

    pub fn inverse(&self) -> Automorphism {
        let mut inv = vec![0; self.forward.len()];
        for (x, &y) in self.forward.iter().enumerate() {
            inv[y] = x;
        }
        Automorphism { forward: inv }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism> {
        check_len(self.len(), other.len())?;
        Ok(Automorphism {
            forward: other.forward.iter().map(|&x| self.forward[x]).collect(),
        })
    }

    /// Order of the permutation in the symmetric group (lcm of cycle lengths).
    pub fn order(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut order = 1usize;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.forward[x];
                len += 1;
            }
            order = lcm(order, len);
        }
        order
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl Serialize for Automorphism {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.forward.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Automorphism {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Automorphism::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub fn identity(atom_count: usize) -> Automorphism {
    Automorphism::identity(atom_count)
}

pub fn compose(s: &Automorphism, t: &Automorphism) -> Result<Automorphism> {
    s.compose(t)
}

pub fn inverse(t: &Automorphism) -> Automorphism {
    t.inverse()
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// The permutation matrix `U_T` with `U_T e_x = e_{T(x)}`.
pub fn koopman_matrix(t: &Automorphism) -> MarkovMatrix {
    let n = t.len();
    let mut m = RatMatrix::zeros(n, n);
    for x in 0..n {
        m.set(t.apply(x), x, rational::one());
    }
    MarkovMatrix::from_trusted(m)
}

/// Integer table `|A_i ∩ T⁻¹A_j|`.
pub fn joint_counts(t: &Automorphism, alpha: &Partition) -> Result<Vec<Vec<usize>>> {
    check_len(alpha.atom_count(), t.len())?;
    let n = alpha.cell_count();
    let mut counts = vec![vec![0usize; n]; n];
    for x in 0..t.len() {
        counts[alpha.cell_of(x)][alpha.cell_of(t.apply(x))] += 1;
    }
    Ok(counts)
}

/// The coupling `μ(A_i ∩ T⁻¹A_j)` of the partition with itself under `T`.
pub fn joint_matrix(t: &Automorphism, alpha: &Partition) -> Result<CouplingMatrix> {
    let counts = joint_counts(t, alpha)?;
    Ok(CouplingMatrix::from_counts(&counts, alpha.atom_count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::is_markov;
    use crate::rational::ratio;

    fn space(n: usize) -> AtomSpace {
        AtomSpace::new(n).unwrap()
    }

    fn halves() -> Partition {
        Partition::new(space(4), &[1, 1, 2, 2]).unwrap()
    }

    #[test]
    fn partition_masses() {
        let p = halves();
        assert_eq!(p.cell(0), &[0, 1]);
        assert_eq!(p.cell(1), &[2, 3]);
        assert_eq!(p.cell_masses(), vec![ratio(1, 2), ratio(1, 2)]);

        let p = Partition::new(space(4), &[1, 1, 1, 1]).unwrap();
        assert_eq!(p.cell_count(), 1);
        assert_eq!(p.cell_masses(), vec![ratio(1, 1)]);

        let p = Partition::with_cells(space(4), &[1, 1, 2, 3], 3).unwrap();
        assert_eq!(p.cell_masses(), vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)]);
    }

    #[test]
    fn partition_errors() {
        assert_eq!(
            Partition::with_cells(space(4), &[1, 1, 3, 3], 3),
            Err(Error::EmptyCell { cell: 2 })
        );
        assert_eq!(
            Partition::new(space(4), &[1, 1, 2]),
            Err(Error::LengthMismatch {
                expected: 4,
                actual: 3
            })
        );
        assert!(matches!(
            Partition::new(space(2), &[0, 1]),
            Err(Error::LabelOutOfRange { atom: 0, .. })
        ));
        assert_eq!(AtomSpace::new(0), Err(Error::EmptySpace));
    }

    #[test]
    fn group_structure() {
        let t = Automorphism::new(vec![2, 0, 3, 1]).unwrap();
        assert!(t.compose(&t.inverse()).unwrap().is_identity());
        assert!(identity(5).inverse().is_identity());
        assert!(Automorphism::new(vec![0, 0]).is_err());
        assert!(Automorphism::new(vec![0, 2]).is_err());
        assert!(identity(3).compose(&identity(4)).is_err());
    }

    #[test]
    fn compose_two_swaps_brute_force() {
        // brute force: follow each atom through swap(1,2) then swap(0,1)
        let s = Automorphism::swap(4, 0, 1);
        let t = Automorphism::swap(4, 1, 2);
        let expected: Vec<usize> = (0..4)
            .map(|x| {
                let after_t = if x == 1 {
                    2
                } else if x == 2 {
                    1
                } else {
                    x
                };
                if after_t == 0 {
                    1
                } else if after_t == 1 {
                    0
                } else {
                    after_t
                }
            })
            .collect();
        assert_eq!(expected, vec![1, 2, 0, 3]);
        assert_eq!(s.compose(&t).unwrap().forward(), &expected[..]);
        // 0 → 1 → 2 → 0 as a cycle
        assert_eq!(s.compose(&t).unwrap().order(), 3);
    }

    #[test]
    fn koopman_examples() {
        assert_eq!(koopman_matrix(&identity(3)), MarkovMatrix::identity(3));
        let swap = koopman_matrix(&Automorphism::swap(2, 0, 1));
        assert_eq!(
            swap.matrix().to_rows(),
            vec![
                vec![ratio(0, 1), ratio(1, 1)],
                vec![ratio(1, 1), ratio(0, 1)]
            ]
        );
        let t = Automorphism::new(vec![2, 0, 3, 1]).unwrap();
        assert!(is_markov(koopman_matrix(&t).matrix()).ok);
    }

    #[test]
    fn joint_matrix_examples() {
        let alpha = halves();
        let j = joint_matrix(&identity(4), &alpha).unwrap();
        assert_eq!(
            j.entries().to_rows(),
            vec![
                vec![ratio(1, 2), ratio(0, 1)],
                vec![ratio(0, 1), ratio(1, 2)]
            ]
        );
        let j = joint_matrix(&Automorphism::swap(4, 1, 2), &alpha).unwrap();
        assert_eq!(j.entries().to_rows(), vec![vec![ratio(1, 4); 2]; 2]);
        let j = joint_matrix(&Automorphism::swap(4, 0, 1), &alpha).unwrap();
        assert_eq!(
            j.entries().to_rows(),
            vec![
                vec![ratio(1, 2), ratio(0, 1)],
                vec![ratio(0, 1), ratio(1, 2)]
            ]
        );
        assert!(joint_matrix(&identity(3), &alpha).is_err());
    }

    #[test]
    fn push_forward_relabels() {
        let alpha = halves();
        let g = Automorphism::swap(4, 1, 2);
        assert_eq!(alpha.push_forward(&g).unwrap().labels(), vec![1, 2, 1, 2]);
    }

    #[test]
    fn serde_forms() {
        let t = Automorphism::new(vec![1, 0, 2]).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), "[1,0,2]");
        assert!(serde_json::from_str::<Automorphism>("[1,1,2]").is_err());
        let p: Partition = serde_json::from_str("[1,2,2]").unwrap();
        assert_eq!(p.cell_sizes(), vec![1, 2]);
        assert!(serde_json::from_str::<Partition>("[1,3,3]").is_err());
    }
}
