//! Matrix coefficients `K ↦ ⟨K f, g⟩` and checkable consequences of their role
//! as generators of the continuous functions on the Markov compactification:
//! positive definiteness on the group, two-sided uniform continuity, and
//! separation of points.
//!
//! Inner products use the atom mass: `⟨f, g⟩ = Σ f(x) g(x) / N`. Coefficients
//! are exact; eigenvalues and square roots are computed in `f64`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::MarkovMatrix;
use crate::rational::{self, Q};
use crate::space::{check_len, Automorphism};

/// Spectral tolerance for Gram PSD certificates.
pub const PSD_TOL: f64 = 1e-9;
/// Slack allowed in the uniform-continuity inequality.
pub const MODULUS_TOL: f64 = 1e-12;

/// A function on the atoms, `f ∈ L²(μ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableVector {
    #[serde(with = "rational::serde_vec")]
    values: Vec<Q>,
}

impl ObservableVector {
    pub fn new(values: Vec<Q>) -> Self {
        ObservableVector { values }
    }

    pub fn constant_one(atom_count: usize) -> Self {
        ObservableVector::new(vec![rational::one(); atom_count])
    }

    /// `scale · e_atom`.
    pub fn indicator(atom_count: usize, atom: usize, scale: Q) -> Self {
        let mut values = vec![rational::zero(); atom_count];
        values[atom] = scale;
        ObservableVector::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn inner(&self, other: &ObservableVector) -> Result<Q> {
        check_len(self.len(), other.len())?;
        let sum: Q = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(sum / rational::frac(self.len(), 1))
    }

    /// `‖f‖²`, exact.
    pub fn norm_sq(&self) -> Q {
        self.inner(self).expect("same length")
    }

    pub fn norm(&self) -> f64 {
        rational::to_f64(&self.norm_sq()).sqrt()
    }

    /// `∫ f dμ`.
    pub fn mean(&self) -> Q {
        let sum: Q = self.values.iter().sum();
        sum / rational::frac(self.len(), 1)
    }

    pub fn sub(&self, other: &ObservableVector) -> Result<ObservableVector> {
        check_len(self.len(), other.len())?;
        Ok(ObservableVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// `U_T f = f ∘ T⁻¹`.
    pub fn koopman(&self, t: &Automorphism) -> Result<ObservableVector> {
        check_len(self.len(), t.len())?;
        let mut out = vec![rational::zero(); self.len()];
        for (x, v) in self.values.iter().enumerate() {
            out[t.apply(x)] = v.clone();
        }
        Ok(ObservableVector::new(out))
    }

    pub fn apply(&self, k: &MarkovMatrix) -> Result<ObservableVector> {
        check_len(self.len(), k.size())?;
        let n = self.len();
        Ok(ObservableVector::new(
            (0..n)
                .map(|y| (0..n).map(|x| k.get(y, x) * &self.values[x]).sum())
                .collect(),
        ))
    }
}

/// `⟨K f, g⟩`. With `g = f` this is `F_f(K)`.
pub fn matrix_coefficient(
    k: &MarkovMatrix,
    f: &ObservableVector,
    g: &ObservableVector,
) -> Result<Q> {
    f.apply(k)?.inner(g)
}

/// `F_f(T) = ⟨U_T f, f⟩` without forming the permutation matrix.
pub fn positive_definite_function(t: &Automorphism, f: &ObservableVector) -> Result<Q> {
    f.koopman(t)?.inner(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct PsdCheck {
    pub min_eigenvalue: f64,
    pub ok: bool,
}

/// Gram matrix `G[a][b] = ⟨U_{g_a⁻¹ g_b} f, f⟩`, exact.
pub fn gram_matrix(f: &ObservableVector, elements: &[Automorphism]) -> Result<Vec<Vec<Q>>> {
    elements
        .iter()
        .map(|ga| {
            let inv = ga.inverse();
            elements
                .iter()
                .map(|gb| positive_definite_function(&inv.compose(gb)?, f))
                .collect()
        })
        .collect()
}

/// Smallest eigenvalue of the Gram matrix of `F_f` on `elements`; `ok` when it
/// is at least `-PSD_TOL`.
pub fn gram_psd_check(f: &ObservableVector, elements: &[Automorphism]) -> Result<PsdCheck> {
    let gram = gram_matrix(f, elements)?;
    let m = elements.len();
    if m == 0 {
        return Ok(PsdCheck {
            min_eigenvalue: 0.0,
            ok: true,
        });
    }
    let dm = DMatrix::from_fn(m, m, |a, b| rational::to_f64(&gram[a][b]));
    let min_eigenvalue = SymmetricEigen::new(dm)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(PsdCheck {
        min_eigenvalue,
        ok: min_eigenvalue >= -PSD_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusCheck {
    /// `|F_f(P·S·Q) − F_f(S)|`, exact.
    #[serde(with = "rational::serde_str")]
    pub lhs_exact: Q,
    pub lhs: f64,
    /// `‖f‖ (‖U_Q f − f‖ + ‖U_{P⁻¹} f − f‖)`
    pub rhs: f64,
    pub margin: f64,
    pub ok: bool,
}

/// Two-sided uniform continuity of `F_f`:
/// `|F_f(P·S·Q) − F_f(S)| ≤ ‖f‖ (‖U_Q f − f‖ + ‖U_{P⁻¹} f − f‖)`.
pub fn roelcke_modulus_check(
    p: &Automorphism,
    s: &Automorphism,
    q: &Automorphism,
    f: &ObservableVector,
) -> Result<ModulusCheck> {
    let psq = p.compose(&s.compose(q)?)?;
    let lhs_exact = rational::abs_diff(
        &positive_definite_function(&psq, f)?,
        &positive_definite_function(s, f)?,
    );
    let lhs = rational::to_f64(&lhs_exact);
    let q_move = f.koopman(q)?.sub(f)?.norm();
    let p_move = f.koopman(&p.inverse())?.sub(f)?.norm();
    let rhs = f.norm() * (q_move + p_move);
    Ok(ModulusCheck {
        lhs_exact,
        lhs,
        rhs,
        margin: rhs - lhs,
        ok: lhs <= rhs + MODULUS_TOL,
    })
}

/// Witness that two Markov matrices are different points of the compactification.
#[derive(Debug, Clone, Serialize)]
pub struct Separation {
    pub f: ObservableVector,
    pub g: ObservableVector,
    /// The coordinate `(row, col)` where the matrices differ.
    pub row: usize,
    pub col: usize,
    #[serde(with = "rational::serde_str")]
    pub value_first: Q,
    #[serde(with = "rational::serde_str")]
    pub value_second: Q,
}

/// Finds `f = N·e_x`, `g = e_y` with `⟨K1 f, g⟩ = K1[y][x] ≠ K2[y][x] = ⟨K2 f, g⟩`,
/// scanning coordinates row-major.
pub fn separate(k1: &MarkovMatrix, k2: &MarkovMatrix) -> Result<Separation> {
    check_len(k1.size(), k2.size())?;
    let n = k1.size();
    let (row, col) = (0..n)
        .flat_map(|y| (0..n).map(move |x| (y, x)))
        .find(|&(y, x)| k1.get(y, x) != k2.get(y, x))
        .ok_or(Error::NothingToSeparate)?;
    let f = ObservableVector::indicator(n, col, rational::frac(n, 1));
    let g = ObservableVector::indicator(n, row, rational::one());
    let value_first = matrix_coefficient(k1, &f, &g)?;
    let value_second = matrix_coefficient(k2, &f, &g)?;
    if value_first == value_second {
        return Err(Error::Internal(
            "separating coordinate gives equal coefficients".into(),
        ));
    }
    Ok(Separation {
        f,
        g,
        row,
        col,
        value_first,
        value_second,
    })
}
