//! Idempotents in the semigroup of Markov matrices.
//!
//! Covers the order `p ≤ q ⟺ pq = p ⟺ qp = p`, least idempotents of the
//! closed semigroup generated by one matrix (via Cesàro averages), and the
//! idempotents invariant under conjugation by every permutation.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{is_markov, product, MarkovMatrix, RatMatrix};
use crate::rational::{self, Q};
use crate::space::{check_len, koopman_matrix, Automorphism, Partition};

/// Default tolerance for float-mode Cesàro limits.
pub const CESARO_TOL: f64 = 1e-8;

/// Doublings performed after the stopping rule fires, each halving the
/// remaining `O(1/m)` error of the average.
pub const CESARO_REFINE_DOUBLINGS: usize = 10;

/// Number of consecutive powers `K, K², …` sampled for the least-idempotent check,
/// in addition to the powers `K^{2^j}` visited while doubling.
pub const SAMPLED_LOW_POWERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Identity,
    ConstantsProjection,
    BlockAverage,
    Other,
}

/// Exact `K·K = K`.
pub fn is_idempotent(k: &MarkovMatrix) -> bool {
    product(k, k).map(|kk| &kk == k).unwrap_or(false)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Pulls a float matrix that should be doubly stochastic back onto the
/// polytope: negatives clipped, then alternate row and column rescaling.
/// Repeated squaring otherwise doubles the row-sum error at every step.
fn renormalize(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|v| *v = v.max(0.0));
    for _ in 0..3 {
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
        for mut col in m.column_iter_mut() {
            let s = col.sum();
            if s > 0.0 {
                col /= s;
            }
        }
    }
}

/// `‖K² − K‖_max` in floating point.
pub fn idempotency_defect(k: &DMatrix<f64>) -> f64 {
    max_abs(&(k * k - k))
}

/// Conditional expectation onto `β`-measurable functions:
/// entry `(y, x) = 1/|cell(x)|` when `x` and `y` share a cell.
pub fn block_average(beta: &Partition) -> MarkovMatrix {
    let n = beta.atom_count();
    let mut m = RatMatrix::zeros(n, n);
    for cell in beta.cells() {
        let w = rational::frac(1, cell.len());
        for &x in cell {
            for &y in cell {
                m.set(y, x, w.clone());
            }
        }
    }
    MarkovMatrix::new(m).expect("block averages are doubly stochastic")
}

/// Partition into connected components of the support graph of `p`.
fn support_partition(n: usize, positive: impl Fn(usize, usize) -> bool) -> Partition {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for y in 0..n {
        for x in 0..n {
            if positive(y, x) {
                let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![0; n];
    let mut next = 0;
    let mut label_of_root = vec![0; n];
    for x in 0..n {
        let r = find(&mut parent, x);
        if label_of_root[r] == 0 {
            next += 1;
            label_of_root[r] = next;
        }
        labels[x] = label_of_root[r];
    }
    let space = crate::space::AtomSpace::new(n).expect("n > 0");
    Partition::new(space, &labels).expect("labels from components")
}

/// Exact classification of a Markov matrix.
pub fn classify(p: &MarkovMatrix) -> Classification {
    let n = p.size();
    if p == &MarkovMatrix::identity(n) {
        return Classification::Identity;
    }
    if p == &MarkovMatrix::uniform(n) {
        return Classification::ConstantsProjection;
    }
    let beta = support_partition(n, |y, x| p.get(y, x).is_positive());
    if &block_average(&beta) == p {
        Classification::BlockAverage
    } else {
        Classification::Other
    }
}

/// Classification of a float matrix, entries compared within `tol`.
pub fn classify_f64(p: &DMatrix<f64>, tol: f64) -> Classification {
    let n = p.nrows();
    let close = |target: &DMatrix<f64>| max_abs(&(p - target)) < tol;
    if close(&DMatrix::identity(n, n)) {
        return Classification::Identity;
    }
    if close(&DMatrix::from_element(n, n, 1.0 / n as f64)) {
        return Classification::ConstantsProjection;
    }
    let beta = support_partition(n, |y, x| p[(y, x)] > tol);
    if close(&block_average(&beta).to_f64()) {
        Classification::BlockAverage
    } else {
        Classification::Other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderCheck {
    pub pq_eq_p: bool,
    pub qp_eq_p: bool,
    /// `pq = p ⟺ qp = p`
    pub equivalent: bool,
}

impl OrderCheck {
    /// `p ≤ q`
    pub fn below(&self) -> bool {
        self.pq_eq_p && self.qp_eq_p
    }
}

/// Exact products `pq`, `qp` compared with `p`, for idempotent `p`, `q`.
pub fn order_check(p: &MarkovMatrix, q: &MarkovMatrix) -> Result<OrderCheck> {
    check_len(p.size(), q.size())?;
    if !is_idempotent(p) || !is_idempotent(q) {
        return Err(Error::NotIdempotent);
    }
    let pq_eq_p = &product(p, q)? == p;
    let qp_eq_p = &product(q, p)? == p;
    Ok(OrderCheck {
        pq_eq_p,
        qp_eq_p,
        equivalent: pq_eq_p == qp_eq_p,
    })
}

/// [`order_check`] in floating point, equalities within `tol`.
pub fn order_check_f64(p: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> OrderCheck {
    let pq_eq_p = max_abs(&(p * q - p)) < tol;
    let qp_eq_p = max_abs(&(q * p - p)) < tol;
    OrderCheck {
        pq_eq_p,
        qp_eq_p,
        equivalent: pq_eq_p == qp_eq_p,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledPower {
    pub power: u64,
    pub defect: f64,
    /// `None` when the power is not near-idempotent.
    pub order: Option<OrderCheck>,
}

/// Float-mode report on the Cesàro limit of a Markov matrix.
#[derive(Debug, Clone, Serialize)]
pub struct IdempotentReport {
    pub matrix: Vec<Vec<f64>>,
    pub idempotency_defect: f64,
    /// `‖pK − p‖_max`
    pub left_absorption: f64,
    /// `‖Kp − p‖_max`
    pub right_absorption: f64,
    pub classification: Classification,
    /// Number of doublings; the average is over `K, …, K^m` with `m = 2^doublings`.
    pub doublings: usize,
    /// `‖A_{2m} − A_m‖_max` at the step where the stopping rule fired.
    pub stopping_difference: f64,
    pub sampled_powers: Vec<SampledPower>,
    /// `p ≤ q` for every sampled near-idempotent power `q`.
    pub least_on_samples: bool,
}

impl IdempotentReport {
    pub fn matrix_f64(&self) -> DMatrix<f64> {
        let n = self.matrix.len();
        DMatrix::from_fn(n, n, |r, c| self.matrix[r][c])
    }
}

/// Cesàro limit `p = lim A_m`, `A_m = (1/m) Σ_{k=1..m} K^k`.
///
/// Averages are taken at `m = 2^j` using `A_{2m} = (A_m + K^m A_m) / 2`, so
/// one iteration doubles the horizon. The stopping rule is
/// `‖A_{2m} − A_m‖_max < tol`, after which [`CESARO_REFINE_DOUBLINGS`] more
/// doublings are applied. `max_iter` bounds the number of doublings.
pub fn cesaro_idempotent(k: &MarkovMatrix, tol: f64, max_iter: usize) -> Result<IdempotentReport> {
    cesaro_idempotent_f64(&k.to_f64(), tol, max_iter)
}

pub fn cesaro_idempotent_f64(
    k: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<IdempotentReport> {
    if !k.is_square() {
        return Err(Error::NotSquare);
    }
    let mut avg = k.clone();
    let mut power = k.clone();
    let mut doublings = 0usize;
    let mut last = f64::INFINITY;
    let mut stopping_difference = None;
    let mut refine_left = CESARO_REFINE_DOUBLINGS;
    let mut doubling_powers = vec![(1u64, k.clone())];
    while doublings < max_iter {
        let next = (&avg + &power * &avg) * 0.5;
        last = max_abs(&(&next - &avg));
        avg = next;
        power = &power * &power;
        renormalize(&mut power);
        doublings += 1;
        if doublings < 63 {
            doubling_powers.push((1u64 << doublings, power.clone()));
        }
        match stopping_difference {
            None if last < tol => stopping_difference = Some(last),
            Some(_) => refine_left -= 1,
            None => {}
        }
        if stopping_difference.is_some() && refine_left == 0 {
            break;
        }
    }
    let Some(stopping_difference) = stopping_difference else {
        return Err(Error::NoConvergence {
            iterations: doublings,
            last_difference: last,
        });
    };

    let p = avg;
    let mut samples = Vec::new();
    let mut q = DMatrix::identity(k.nrows(), k.nrows());
    for m in 1..=SAMPLED_LOW_POWERS as u64 {
        q = &q * k;
        samples.push((m, q.clone()));
    }
    samples.extend(
        doubling_powers
            .into_iter()
            .filter(|(m, _)| *m > SAMPLED_LOW_POWERS as u64),
    );
    let sampled_powers: Vec<SampledPower> = samples
        .iter()
        .map(|(m, q)| {
            let defect = idempotency_defect(q);
            SampledPower {
                power: *m,
                defect,
                order: (defect < tol).then(|| order_check_f64(&p, q, tol)),
            }
        })
        .collect();
    let least_on_samples = sampled_powers
        .iter()
        .filter_map(|s| s.order)
        .all(|o| o.below());

    Ok(IdempotentReport {
        idempotency_defect: idempotency_defect(&p),
        left_absorption: max_abs(&(&p * k - &p)),
        right_absorption: max_abs(&(k * &p - &p)),
        classification: classify_f64(&p, tol),
        matrix: (0..p.nrows())
            .map(|r| p.row(r).iter().copied().collect())
            .collect(),
        doublings,
        stopping_difference,
        sampled_powers,
        least_on_samples,
    })
}

/// Exact Cesàro limit of a permutation: the average of `U_T, …, U_T^L` over
/// one period `L = order(T)`.
pub fn cesaro_exact_periodic(t: &Automorphism) -> MarkovMatrix {
    let period = t.order();
    let n = t.len();
    let mut acc = RatMatrix::zeros(n, n);
    let mut g = Automorphism::identity(n);
    for _ in 0..period {
        g = t.compose(&g).expect("same size");
        acc = acc.add(koopman_matrix(&g).matrix()).expect("same size");
    }
    MarkovMatrix::new(acc.scale(&rational::frac(1, period))).expect("average of permutations")
}

/// `U_g K U_g⁻¹`.
pub fn conjugate(k: &MarkovMatrix, g: &Automorphism) -> Result<MarkovMatrix> {
    check_len(k.size(), g.len())?;
    let n = k.size();
    let mut m = RatMatrix::zeros(n, n);
    for b in 0..n {
        for c in 0..n {
            m.set(g.apply(b), g.apply(c), k.get(b, c).clone());
        }
    }
    MarkovMatrix::new(m)
}

/// Every set partition of `n` atoms (restricted growth strings), `Bell(n)` of them.
pub fn set_partitions(n: usize) -> Vec<Partition> {
    let space = crate::space::AtomSpace::new(n).expect("n > 0");
    let mut out = Vec::new();
    let mut labels = vec![1usize; n];
    fn rec(
        k: usize,
        max: usize,
        labels: &mut Vec<usize>,
        space: crate::space::AtomSpace,
        out: &mut Vec<Partition>,
    ) {
        if k == labels.len() {
            out.push(Partition::new(space, labels).expect("restricted growth string"));
            return;
        }
        for l in 1..=max + 1 {
            labels[k] = l;
            rec(k + 1, max.max(l), labels, space, out);
        }
    }
    rec(1, 1, &mut labels, space, &mut out);
    out
}

/// All idempotent Markov matrices `p` with `σ p σ⁻¹ = p` for every permutation `σ`.
///
/// The commutant of the generators `(i i+1)` and the full cycle is computed
/// by exact Gaussian elimination; the Markov conditions cut it to a line
/// `p(t) = P₀ + t·D`, and `p(t)² = p(t)` is solved exactly as a quadratic in
/// `t`. Nonnegative solutions are returned with the identity first.
pub fn invariant_idempotent_classify(atom_count: usize) -> Result<Vec<MarkovMatrix>> {
    let n = atom_count;
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    let var = |y: usize, x: usize| y * n + x;
    let mut generators: Vec<Automorphism> = (0..n.saturating_sub(1))
        .map(|i| Automorphism::swap(n, i, i + 1))
        .collect();
    generators.push(Automorphism::new((0..n).map(|x| (x + 1) % n).collect()).expect("cycle"));

    // p[σb][σc] − p[b][c] = 0
    let mut equations = Vec::new();
    for g in &generators {
        for b in 0..n {
            for c in 0..n {
                let mut row = vec![Q::zero(); n * n];
                row[var(g.apply(b), g.apply(c))] += Q::one();
                row[var(b, c)] -= Q::one();
                if row.iter().any(|q| !q.is_zero()) {
                    equations.push(row);
                }
            }
        }
    }
    let commutant = nullspace(&equations, n * n);

    // Markov marginals on coefficients: Σ_k c_k · rowsum_y(B_k) = 1, same for columns
    let d = commutant.len();
    let mut constraint_rows = Vec::new();
    let mut rhs = Vec::new();
    for y in 0..n {
        constraint_rows.push(
            (0..d)
                .map(|k| (0..n).map(|x| commutant[k][var(y, x)].clone()).sum())
                .collect(),
        );
        rhs.push(Q::one());
        constraint_rows.push(
            (0..d)
                .map(|k| (0..n).map(|x| commutant[k][var(x, y)].clone()).sum())
                .collect(),
        );
        rhs.push(Q::one());
    }
    let Some((particular, directions)) = solve_affine(&constraint_rows, &rhs, d) else {
        return Ok(Vec::new());
    };
    let combine = |coeffs: &[Q]| -> RatMatrix {
        let mut m = RatMatrix::zeros(n, n);
        for (k, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for y in 0..n {
                for x in 0..n {
                    let v = m.get(y, x) + c * &commutant[k][var(y, x)];
                    m.set(y, x, v);
                }
            }
        }
        m
    };
    let base = combine(&particular);

    let candidates: Vec<RatMatrix> = match directions.len() {
        0 => vec![base],
        1 => {
            let dir = combine(&directions[0]);
            let roots = idempotent_parameters(&base, &dir)?;
            roots
                .into_iter()
                .map(|t| base.add(&dir.scale(&t)).expect("same size"))
                .collect()
        }
        k => {
            return Err(Error::Internal(format!(
                "{k} free parameters after Markov constraints; expected at most one"
            )))
        }
    };
    let mut out: Vec<MarkovMatrix> = candidates
        .into_iter()
        .filter(|m| is_markov(m).ok)
        .map(|m| MarkovMatrix::new(m).expect("checked"))
        .filter(is_idempotent)
        .collect();
    out.sort_by_key(|m| classify(m) != Classification::Identity);
    out.dedup();
    Ok(out)
}

/// Rational `t` with `(B + tD)² = B + tD`.
fn idempotent_parameters(base: &RatMatrix, dir: &RatMatrix) -> Result<Vec<Q>> {
    let bb = base.mul(base)?;
    let dd = dir.mul(dir)?;
    let bd = base.mul(dir)?.add(&dir.mul(base)?)?;
    let n = base.rows();
    // entrywise a t² + b t + c = 0
    let mut polys = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let a = dd.get(y, x).clone();
            let b = bd.get(y, x) - dir.get(y, x);
            let c = bb.get(y, x) - base.get(y, x);
            if !(a.is_zero() && b.is_zero() && c.is_zero()) {
                polys.push((a, b, c));
            }
        }
    }
    let Some(pivot) = polys.first().cloned() else {
        return Err(Error::Internal(
            "every point of the line is idempotent".into(),
        ));
    };
    let candidates: Vec<Q> = match pivot {
        (a, b, c) if a.is_zero() && b.is_zero() => {
            let _ = c;
            return Ok(Vec::new());
        }
        (a, b, c) if a.is_zero() => vec![-c / b],
        (a, b, c) => {
            let disc = &b * &b - rational::int(4) * &a * &c;
            if disc.is_negative() {
                return Ok(Vec::new());
            }
            match rational_sqrt(&disc) {
                Some(root) => {
                    let two_a = rational::int(2) * &a;
                    vec![(-&b + &root) / &two_a, (-&b - root) / two_a]
                }
                None => {
                    // irrational roots solve every equation only if every
                    // polynomial is a multiple of the pivot
                    let all_proportional = polys.iter().all(|(a2, b2, c2)| {
                        &a * b2 == a2 * &b && &a * c2 == a2 * &c && &b * c2 == b2 * &c
                    });
                    if all_proportional {
                        return Err(Error::Internal(
                            "idempotents with irrational entries".into(),
                        ));
                    }
                    return Ok(Vec::new());
                }
            }
        }
    };
    let mut roots: Vec<Q> = candidates
        .into_iter()
        .filter(|t| {
            polys
                .iter()
                .all(|(a, b, c)| (a * t * t + b * t + c).is_zero())
        })
        .collect();
    roots.sort();
    roots.dedup();
    Ok(roots)
}

fn rational_sqrt(q: &Q) -> Option<Q> {
    let sqrt_int = |v: &BigInt| {
        let r = v.sqrt();
        (&r * &r == *v).then_some(r)
    };
    Some(Q::new(sqrt_int(q.numer())?, sqrt_int(q.denom())?))
}

/// Reduced row echelon form in place; returns pivot columns.
fn rref(rows: &mut Vec<Vec<Q>>, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Q::one() / &rows[r][c];
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                let pivot_row = rows[r].clone();
                for (v, pv) in rows[i].iter_mut().zip(&pivot_row) {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Basis of `{v : A v = 0}`.
fn nullspace(a: &[Vec<Q>], cols: usize) -> Vec<Vec<Q>> {
    let mut rows = a.to_vec();
    let pivots = rref(&mut rows, cols);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (row, &p) in rows.iter().zip(&pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// Solutions of `A v = b` as `particular + span(directions)`, or `None`.
fn solve_affine(a: &[Vec<Q>], b: &[Q], cols: usize) -> Option<(Vec<Q>, Vec<Vec<Q>>)> {
    let mut aug: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug, cols + 1);
    if pivots.contains(&cols) {
        return None;
    }
    let mut particular = vec![Q::zero(); cols];
    for (row, &p) in aug.iter().zip(&pivots) {
        particular[p] = row[cols].clone();
    }
    let homogeneous: Vec<Vec<Q>> = aug.iter().map(|r| r[..cols].to_vec()).collect();
    Some((particular, nullspace(&homogeneous, cols)))
}
