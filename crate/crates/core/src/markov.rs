//! Markov operators at finite scale.
//!
//! With atoms of equal mass, `K(1) = 1` and `K*(1) = 1` for the inner product
//! `⟨f, g⟩ = Σ f(x) g(x) / N` are exactly "every row sums to 1" and "every
//! column sums to 1", so Markov and doubly stochastic coincide here. Unequal
//! masses would need weighted column sums instead.

use std::fmt;

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::space::{check_len, Partition};

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    /// Every entry equal to `value`.
    pub fn filled(rows: usize, cols: usize, value: Q) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::NotSquare);
        }
        Ok(RatMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<Q>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[Q]>::to_vec)
            .take(self.rows)
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &Q {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: Q) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[Q] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<Q> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<Q> {
        let mut sums = vec![Q::zero(); self.cols];
        for r in 0..self.rows {
            for (c, sum) in sums.iter_mut().enumerate() {
                *sum += self.get(r, c);
            }
        }
        sums
    }

    pub fn transpose(&self) -> RatMatrix {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMatrix) -> Result<RatMatrix> {
        check_len(self.cols, other.rows)?;
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(k, c);
                    if !b.is_zero() {
                        out.data[r * other.cols + c] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &RatMatrix) -> Result<RatMatrix> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        Ok(RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, factor: &Q) -> RatMatrix {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// `max |a_ij - b_ij|`.
    pub fn max_abs_diff(&self, other: &RatMatrix) -> Result<Q> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or_else(Q::zero))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Q> {
        self.data.iter()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| {
            rational::to_f64(self.get(r, c))
        })
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = self
            .to_rows()
            .iter()
            .map(|r| r.iter().map(|q| q.to_string()).collect())
            .collect();
        fmt::Debug::fmt(&rows, f)
    }
}

impl Serialize for RatMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rational::serde_mat::serialize(&self.to_rows(), s)
    }
}

impl<'de> Deserialize<'de> for RatMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = rational::serde_mat::deserialize(d)?;
        RatMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// First violated constraint found by [`is_markov`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkovViolation {
    NotSquare {
        rows: usize,
        cols: usize,
    },
    NegativeEntry {
        row: usize,
        col: usize,
        value: String,
    },
    RowSum {
        row: usize,
        sum: String,
    },
    ColumnSum {
        col: usize,
        sum: String,
    },
}

impl fmt::Display for MarkovViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkovViolation::NotSquare { rows, cols } => write!(f, "{rows}x{cols} is not square"),
            MarkovViolation::NegativeEntry { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is negative")
            }
            MarkovViolation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            MarkovViolation::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkovReport {
    pub ok: bool,
    pub violation: Option<MarkovViolation>,
}

/// Exact Markov predicate: square, nonnegative, unit row and column sums.
pub fn is_markov(m: &RatMatrix) -> MarkovReport {
    let fail = |v| MarkovReport {
        ok: false,
        violation: Some(v),
    };
    if !m.is_square() {
        return fail(MarkovViolation::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if m.get(r, c).is_negative() {
                return fail(MarkovViolation::NegativeEntry {
                    row: r,
                    col: c,
                    value: rational::format(m.get(r, c)),
                });
            }
        }
    }
    for (row, sum) in m.row_sums().into_iter().enumerate() {
        if !sum.is_one() {
            return fail(MarkovViolation::RowSum {
                row,
                sum: rational::format(&sum),
            });
        }
    }
    for (col, sum) in m.col_sums().into_iter().enumerate() {
        if !sum.is_one() {
            return fail(MarkovViolation::ColumnSum {
                col,
                sum: rational::format(&sum),
            });
        }
    }
    MarkovReport {
        ok: true,
        violation: None,
    }
}

/// An `N×N` doubly stochastic rational matrix.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct MarkovMatrix(RatMatrix);

impl MarkovMatrix {
    pub fn new(m: RatMatrix) -> Result<Self> {
        match is_markov(&m).violation {
            None => Ok(MarkovMatrix(m)),
            Some(v) => Err(Error::NotMarkov(v.to_string())),
        }
    }

    pub(crate) fn from_trusted(m: RatMatrix) -> Self {
        debug_assert!(is_markov(&m).ok);
        MarkovMatrix(m)
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        Self::new(RatMatrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        MarkovMatrix(RatMatrix::identity(n))
    }

    /// The all-`1/N` matrix: projection onto the constants.
    pub fn uniform(n: usize) -> Self {
        MarkovMatrix(RatMatrix::filled(n, n, rational::frac(1, n)))
    }

    pub fn size(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &RatMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> RatMatrix {
        self.0
    }

    pub fn get(&self, r: usize, c: usize) -> &Q {
        self.0.get(r, c)
    }

    /// The adjoint, again Markov.
    pub fn transpose(&self) -> MarkovMatrix {
        MarkovMatrix(self.0.transpose())
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.0.to_f64()
    }
}

impl fmt::Debug for MarkovMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

impl<'de> Deserialize<'de> for MarkovMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MarkovMatrix::new(RatMatrix::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Matrix product; Markov matrices are closed under it.
pub fn product(k1: &MarkovMatrix, k2: &MarkovMatrix) -> Result<MarkovMatrix> {
    check_len(k1.size(), k2.size())?;
    Ok(MarkovMatrix::from_trusted(k1.0.mul(&k2.0)?))
}

/// Rational convex combination `Σ w_k K_k` (weights nonnegative, summing to 1).
pub fn convex_combination(terms: &[(Q, MarkovMatrix)]) -> Result<MarkovMatrix> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Precondition("empty convex combination".into()))?;
    let n = first.1.size();
    let mut total = Q::zero();
    let mut acc = RatMatrix::zeros(n, n);
    for (w, k) in terms {
        if w.is_negative() {
            return Err(Error::Precondition("negative convex weight".into()));
        }
        check_len(n, k.size())?;
        acc = acc.add(&k.0.scale(w))?;
        total += w;
    }
    if !total.is_one() {
        return Err(Error::Precondition(format!(
            "convex weights sum to {}",
            rational::format(&total)
        )));
    }
    MarkovMatrix::new(acc)
}

/// Nonnegative `n×n` matrix with prescribed row and column marginals.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    entries: RatMatrix,
    #[serde(with = "rational::serde_vec")]
    row_marginals: Vec<Q>,
    #[serde(with = "rational::serde_vec")]
    col_marginals: Vec<Q>,
}

impl CouplingMatrix {
    /// Validates nonnegativity and that the marginals are probability vectors.
    pub fn new(entries: RatMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::NotSquare);
        }
        if entries.entries().any(Signed::is_negative) {
            return Err(Error::Precondition("coupling has a negative entry".into()));
        }
        let row_marginals = entries.row_sums();
        let col_marginals = entries.col_sums();
        let total: Q = row_marginals.iter().sum();
        if !total.is_one() {
            return Err(Error::Precondition(format!(
                "coupling has total mass {}",
                rational::format(&total)
            )));
        }
        Ok(CouplingMatrix {
            entries,
            row_marginals,
            col_marginals,
        })
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        Self::new(RatMatrix::from_rows(rows)?)
    }

    /// `counts[i][j] / atom_count`.
    pub fn from_counts(counts: &[Vec<usize>], atom_count: usize) -> Self {
        let rows: Vec<Vec<Q>> = counts
            .iter()
            .map(|r| r.iter().map(|&c| rational::frac(c, atom_count)).collect())
            .collect();
        let entries = RatMatrix::from_rows(rows).expect("rectangular counts");
        let row_marginals = entries.row_sums();
        let col_marginals = entries.col_sums();
        CouplingMatrix {
            entries,
            row_marginals,
            col_marginals,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &RatMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        self.entries.get(i, j)
    }

    pub fn row_marginals(&self) -> &[Q] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[Q] {
        &self.col_marginals
    }

    /// Integer counts `N·C[i][j]`, or `None` if some entry is off the `1/N` grid.
    pub fn counts(&self, atom_count: usize) -> Option<Vec<Vec<usize>>> {
        let scale = rational::frac(atom_count, 1);
        self.entries
            .to_rows()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|q| {
                        let v = q * &scale;
                        if v.is_integer() {
                            num_traits::ToPrimitive::to_usize(&v.to_integer())
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn transpose(&self) -> CouplingMatrix {
        CouplingMatrix {
            entries: self.entries.transpose(),
            row_marginals: self.col_marginals.clone(),
            col_marginals: self.row_marginals.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &CouplingMatrix) -> Result<Q> {
        self.entries.max_abs_diff(&other.entries)
    }
}

impl fmt::Debug for CouplingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.entries, f)
    }
}

/// Partition-level image of `K`: entry `(i, j) = (1/N) Σ_{x∈A_i, y∈A_j} K[y][x]`.
///
/// On Koopman matrices this is the joint matrix:
/// `compress(koopman_matrix(T), α) = joint_matrix(T, α)`.
pub fn compress(k: &MarkovMatrix, alpha: &Partition) -> Result<CouplingMatrix> {
    check_len(alpha.atom_count(), k.size())?;
    let n = alpha.cell_count();
    let mass = alpha.space().atom_mass();
    let mut out = RatMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut sum = Q::zero();
            for &x in alpha.cell(i) {
                for &y in alpha.cell(j) {
                    sum += k.get(y, x);
                }
            }
            out.set(i, j, sum * &mass);
        }
    }
    CouplingMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::space::{joint_matrix, koopman_matrix, Automorphism};

    fn m(rows: &[&[(i64, i64)]]) -> RatMatrix {
        RatMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&(a, b)| ratio(a, b)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn markov_predicate_examples() {
        assert!(is_markov(&RatMatrix::identity(3)).ok);
        assert!(is_markov(&m(&[&[(1, 2), (1, 2)], &[(1, 2), (1, 2)]])).ok);
        let bad = is_markov(&m(&[&[(1, 1), (0, 1)], &[(1, 1), (0, 1)]]));
        assert!(!bad.ok);
        assert_eq!(
            bad.violation,
            Some(MarkovViolation::ColumnSum {
                col: 0,
                sum: "2/1".into()
            })
        );
        let neg = is_markov(&m(&[&[(3, 2), (-1, 2)], &[(-1, 2), (3, 2)]]));
        assert!(matches!(
            neg.violation,
            Some(MarkovViolation::NegativeEntry { row: 0, col: 1, .. })
        ));
        let rect = RatMatrix::zeros(2, 3);
        assert!(matches!(
            is_markov(&rect).violation,
            Some(MarkovViolation::NotSquare { .. })
        ));
    }

    #[test]
    fn product_examples() {
        let k = MarkovMatrix::new(m(&[&[(1, 3), (2, 3)], &[(2, 3), (1, 3)]])).unwrap();
        assert_eq!(product(&k, &MarkovMatrix::identity(2)).unwrap(), k);
        // direct multiplication: every entry of J/2 · K is (k_0c + k_1c)/2 = 1/2
        let half = MarkovMatrix::uniform(2);
        assert_eq!(product(&half, &k).unwrap(), half);
        let s = Automorphism::new(vec![1, 2, 0]).unwrap();
        let t = Automorphism::new(vec![0, 2, 1]).unwrap();
        assert_eq!(
            product(&koopman_matrix(&s), &koopman_matrix(&t)).unwrap(),
            koopman_matrix(&s.compose(&t).unwrap())
        );
        assert!(product(&half, &MarkovMatrix::identity(3)).is_err());
    }

    #[test]
    fn compress_examples() {
        let alpha = Partition::contiguous(&[2, 2]).unwrap();
        let c = compress(&MarkovMatrix::identity(4), &alpha).unwrap();
        assert_eq!(
            c.entries().to_rows(),
            vec![vec![ratio(1, 2), int(0)], vec![int(0), ratio(1, 2)]]
        );
        let swap = Automorphism::swap(4, 1, 2);
        let c = compress(&koopman_matrix(&swap), &alpha).unwrap();
        assert_eq!(c.entries().to_rows(), vec![vec![ratio(1, 4); 2]; 2]);
        assert_eq!(c, joint_matrix(&swap, &alpha).unwrap());

        let alpha = Partition::contiguous(&[1, 3]).unwrap();
        let c = compress(&MarkovMatrix::uniform(4), &alpha).unwrap();
        assert_eq!(
            c.entries().to_rows(),
            vec![
                vec![ratio(1, 16), ratio(3, 16)],
                vec![ratio(3, 16), ratio(9, 16)]
            ]
        );
    }

    #[test]
    fn convex_combination_checks_weights() {
        let a = MarkovMatrix::identity(2);
        let b = koopman_matrix(&Automorphism::swap(2, 0, 1));
        let mix =
            convex_combination(&[(ratio(1, 2), a.clone()), (ratio(1, 2), b.clone())]).unwrap();
        assert_eq!(mix, MarkovMatrix::uniform(2));
        assert!(convex_combination(&[(ratio(1, 2), a.clone())]).is_err());
        assert!(convex_combination(&[(ratio(3, 2), a), (ratio(-1, 2), b)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let k = MarkovMatrix::new(m(&[&[(1, 3), (2, 3)], &[(2, 3), (1, 3)]])).unwrap();
        let text = serde_json::to_string(&k).unwrap();
        assert_eq!(text, r#"[["1/3","2/3"],["2/3","1/3"]]"#);
        assert_eq!(serde_json::from_str::<MarkovMatrix>(&text).unwrap(), k);
        assert!(serde_json::from_str::<MarkovMatrix>(r#"[["1/1","0/1"],["1/1","0/1"]]"#).is_err());
    }
}
