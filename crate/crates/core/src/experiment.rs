//! Seeded experiment suites and their reports.
//!
//! A run is fully determined by its [`ExperimentConfig`]: trial `k` draws from
//! stream `k` of a ChaCha8 generator seeded with `seed`, trials may execute
//! in parallel, and records are assembled in trial order. The only
//! non-deterministic field of a [`Report`] is `generated_at`, which the
//! library leaves empty.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{birkhoff, realize_counts, reconstruct};
use crate::error::{Error, Result};
use crate::factorization::{factorize, forward_bound_check, p_deviation_constant};
use crate::markov::{CouplingMatrix, MarkovMatrix};
use crate::rational::{self, Q};
use crate::sampling::{
    balanced_partition, perturb, random_automorphism, random_markov, random_near_identity,
    random_observable, random_partition, random_table, trial_rng,
};
use crate::semigroup::{
    cesaro_exact_periodic, cesaro_idempotent, classify, invariant_idempotent_classify,
    is_idempotent, Classification,
};
use crate::space::{identity, joint_counts, koopman_matrix, Automorphism};
use crate::uniformity::{precompactness_net, u_deviation, w_distance, Net};
use crate::wap::{gram_psd_check, roelcke_modulus_check, ObservableVector};

/// Cap on Cesàro doublings.
pub const CESARO_MAX_ITER: usize = 100_000;
/// Group elements per Gram matrix in the `psd` suite.
pub const PSD_ELEMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Forward,
    Backward,
    Realize,
    Birkhoff,
    Cesaro,
    Dichotomy,
    Psd,
    Modulus,
    Net,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rational,
    Float,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    /// `N`
    pub atoms: usize,
    /// `n`
    pub cells: usize,
    #[serde(with = "rational::serde_str")]
    pub epsilon: Q,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn new(suite: Suite) -> Self {
        ExperimentConfig {
            suite,
            atoms: 16,
            cells: 2,
            epsilon: rational::ratio(1, 8),
            trials: 100,
            seed: 0,
            mode: Mode::Rational,
            tol: crate::semigroup::CESARO_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.atoms == 0 {
            return bad("atoms must be at least 1".into());
        }
        if self.cells == 0 || self.cells > self.atoms {
            return bad(format!("cells must be in 1..={}", self.atoms));
        }
        if !num_traits::Signed::is_positive(&self.epsilon) {
            return bad(format!(
                "epsilon must be positive, got {}",
                rational::format(&self.epsilon)
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be a positive number, got {}", self.tol));
        }
        Ok(())
    }
}

/// One observed quantity: an exact rational with its decimal value, or a float.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub decimal: f64,
}

impl Observed {
    pub fn exact(q: &Q) -> Self {
        Observed {
            exact: Some(rational::format(q)),
            decimal: rational::to_f64(q),
        }
    }

    pub fn count(n: usize) -> Self {
        Self::exact(&rational::frac(n, 1))
    }

    pub fn float(v: f64) -> Self {
        Observed {
            exact: None,
            decimal: v,
        }
    }

    pub fn flag(b: bool) -> Self {
        Self::count(usize::from(b))
    }

    fn cell(&self) -> String {
        match &self.exact {
            Some(e) => e.clone(),
            None => format!("{}", self.decimal),
        }
    }

    fn parse_cell(text: &str) -> Result<Self> {
        if text.contains('/') {
            Ok(Self::exact(&rational::parse(text)?))
        } else {
            f64::from_str(text)
                .map(Self::float)
                .map_err(|_| Error::ParseRational(text.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// First 16 hex digits of SHA-256 over the trial's canonical inputs.
    pub digest: String,
    pub observed: BTreeMap<String, Observed>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub trials: Vec<TrialRecord>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn aggregate(&self, key: &str) -> Option<&Aggregate> {
        self.aggregates.get(key)
    }
}

struct Outcome {
    inputs: serde_json::Value,
    observed: BTreeMap<String, Observed>,
    pass: bool,
    detail: Option<serde_json::Value>,
}

fn observed<const K: usize>(pairs: [(&str, Observed); K]) -> BTreeMap<String, Observed> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn digest(suite: Suite, trial: usize, inputs: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(format!("{suite:?}/{trial}/").as_bytes());
    h.update(inputs.to_string().as_bytes());
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs every trial of a suite and assembles the report.
pub fn run_suite(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let (summary, net) = match config.suite {
        Suite::Net => {
            let alpha = balanced_partition(config.atoms, config.cells);
            let net = precompactness_net(&alpha, &config.epsilon, config.atoms)?;
            let summary = serde_json::json!({
                "partition": alpha,
                "net_size": net.centers.len(),
                "grid_step": net.grid_step,
                "grid_centers": net.grid_centers,
                "tables_checked": net.tables_checked,
                "centers": net.centers,
            });
            (Some(summary), Some(net))
        }
        Suite::Backward => (
            Some(serde_json::json!({ "c_p": rational::format(&p_deviation_constant()) })),
            None,
        ),
        _ => (None, None),
    };

    let outcomes: Vec<Result<Outcome>> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(config.seed, k as u64);
            run_trial(config, k, &mut rng, net.as_ref())
        })
        .collect();

    let mut trials = Vec::with_capacity(config.trials);
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome?;
        trials.push(TrialRecord {
            trial: k,
            digest: digest(config.suite, k, &o.inputs),
            observed: o.observed,
            pass: o.pass,
            detail: o.detail,
        });
    }
    Ok(Report {
        config: config.clone(),
        summary,
        aggregates: aggregate(&trials),
        violations: trials.iter().filter(|t| !t.pass).count(),
        trials,
        generated_at: None,
    })
}

fn aggregate(trials: &[TrialRecord]) -> BTreeMap<String, Aggregate> {
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for t in trials {
        for (k, v) in &t.observed {
            let e = acc.entry(k.clone()).or_insert((f64::NEG_INFINITY, 0.0, 0));
            e.0 = e.0.max(v.decimal);
            e.1 += v.decimal;
            e.2 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (max, sum, n))| {
            (
                k,
                Aggregate {
                    max,
                    mean: sum / n as f64,
                },
            )
        })
        .collect()
}

fn run_trial(
    config: &ExperimentConfig,
    k: usize,
    rng: &mut ChaCha8Rng,
    net: Option<&Net>,
) -> Result<Outcome> {
    let n_atoms = config.atoms;
    let eps = &config.epsilon;
    match config.suite {
        Suite::Forward => {
            let alpha = random_partition(rng, n_atoms, config.cells);
            let s = random_automorphism(rng, n_atoms);
            // trial 0 pins P = Q = identity
            let (p, q) = if k == 0 {
                (identity(n_atoms), identity(n_atoms))
            } else {
                (
                    random_near_identity(rng, &alpha, eps),
                    random_near_identity(rng, &alpha, eps),
                )
            };
            let check = forward_bound_check(&s, &p, &q, &alpha, eps)?;
            Ok(Outcome {
                inputs: serde_json::json!({ "partition": alpha, "s": s, "p": p, "q": q }),
                observed: observed([
                    ("distance", Observed::exact(&check.distance)),
                    ("bound", Observed::exact(&check.bound)),
                    ("p_deviation", Observed::exact(&u_deviation(&p, &alpha)?)),
                    ("q_deviation", Observed::exact(&u_deviation(&q, &alpha)?)),
                ]),
                pass: check.ok,
                detail: None,
            })
        }
        Suite::Backward => {
            let n = config.cells;
            let threshold = eps / rational::frac(n * n, 1);
            let (alpha, s, t) = if k == 0 && n_atoms >= 2 {
                // hand case: S = identity, T = swap(0, 1)
                let alpha = balanced_partition(n_atoms, n);
                (alpha, identity(n_atoms), Automorphism::swap(n_atoms, 0, 1))
            } else {
                let alpha = random_partition(rng, n_atoms, n);
                let s = random_automorphism(rng, n_atoms);
                let mut swaps = rng.gen_range(0..=3usize);
                let t = loop {
                    let t = perturb(rng, &s, swaps);
                    if w_distance(&s, &t, &alpha)? < threshold || swaps == 0 {
                        break t;
                    }
                    swaps -= 1;
                };
                (alpha, s, t)
            };
            let w = factorize(&s, &t, &alpha, eps)?;
            let product_ok = w.p.compose(&s.compose(&w.r)?)? == t;
            let two_eps = eps * rational::int(2);
            let c_p_eps = p_deviation_constant() * eps;
            let pass = product_ok
                && w.r_deviation < two_eps
                && w.p_deviation < c_p_eps
                && w.leftover_mass == w.excess_mass
                && &w.leftover_mass < eps;
            Ok(Outcome {
                inputs: serde_json::json!({ "partition": alpha, "s": s, "t": t }),
                observed: observed([
                    ("w_distance", Observed::exact(&w.w_distance)),
                    ("threshold", Observed::exact(&threshold)),
                    ("r_deviation", Observed::exact(&w.r_deviation)),
                    ("p_deviation", Observed::exact(&w.p_deviation)),
                    ("leftover_mass", Observed::exact(&w.leftover_mass)),
                    ("excess_mass", Observed::exact(&w.excess_mass)),
                    ("product_exact", Observed::flag(product_ok)),
                ]),
                pass,
                detail: Some(serde_json::to_value(&w).expect("witness serializes")),
            })
        }
        Suite::Realize => {
            let alpha = random_partition(rng, n_atoms, config.cells);
            let sizes = alpha.cell_sizes();
            let table = random_table(rng, &sizes, &sizes);
            let target = CouplingMatrix::from_counts(&table, n_atoms);
            let t = realize_counts(&table, &alpha)?;
            let got = joint_counts(&t, &alpha)?;
            let gap = CouplingMatrix::from_counts(&got, n_atoms).max_abs_diff(&target)?;
            Ok(Outcome {
                inputs: serde_json::json!({ "partition": alpha, "table": table }),
                observed: observed([("max_entry_error", Observed::exact(&gap))]),
                pass: got == table,
                detail: None,
            })
        }
        Suite::Birkhoff => {
            let size = config.cells;
            let terms_drawn = rng.gen_range(1..=size * size);
            let d = random_markov(rng, size, terms_drawn);
            let terms = birkhoff(d.matrix())?;
            let bound = (size - 1) * (size - 1) + 1;
            let rebuilt = reconstruct(&terms, size)?;
            let err = rebuilt.max_abs_diff(d.matrix())?;
            let weight_sum: Q = terms.iter().map(|t| t.weight.clone()).sum();
            Ok(Outcome {
                inputs: serde_json::json!({ "matrix": d }),
                observed: observed([
                    ("terms", Observed::count(terms.len())),
                    ("term_bound", Observed::count(bound)),
                    ("reconstruction_error", Observed::exact(&err)),
                    ("weight_sum", Observed::exact(&weight_sum)),
                ]),
                pass: &rebuilt == d.matrix()
                    && terms.len() <= bound
                    && weight_sum == rational::one(),
                detail: None,
            })
        }
        Suite::Cesaro => match config.mode {
            Mode::Float => {
                let terms = rng.gen_range(1..=4usize);
                let kmat = random_markov(rng, n_atoms, terms);
                let r = cesaro_idempotent(&kmat, config.tol, CESARO_MAX_ITER)?;
                let tol = config.tol;
                let pass = r.idempotency_defect < tol
                    && r.left_absorption < tol
                    && r.right_absorption < tol
                    && r.least_on_samples;
                let near = r
                    .sampled_powers
                    .iter()
                    .filter(|s| s.order.is_some())
                    .count();
                Ok(Outcome {
                    inputs: serde_json::json!({ "matrix": kmat }),
                    observed: observed([
                        ("defect", Observed::float(r.idempotency_defect)),
                        ("left_absorption", Observed::float(r.left_absorption)),
                        ("right_absorption", Observed::float(r.right_absorption)),
                        ("doublings", Observed::count(r.doublings)),
                        ("near_idempotent_powers", Observed::count(near)),
                        ("least_on_samples", Observed::flag(r.least_on_samples)),
                    ]),
                    pass,
                    detail: Some(serde_json::json!({ "classification": r.classification })),
                })
            }
            Mode::Rational => {
                let t = random_automorphism(rng, n_atoms);
                let kmat = koopman_matrix(&t);
                let p = cesaro_exact_periodic(&t);
                let left = crate::markov::product(&p, &kmat)? == p;
                let right = crate::markov::product(&kmat, &p)? == p;
                let idem = is_idempotent(&p);
                Ok(Outcome {
                    inputs: serde_json::json!({ "perm": t }),
                    observed: observed([
                        ("period", Observed::count(t.order())),
                        ("idempotent", Observed::flag(idem)),
                        ("left_absorbing", Observed::flag(left)),
                        ("right_absorbing", Observed::flag(right)),
                    ]),
                    pass: idem && left && right,
                    detail: Some(serde_json::json!({ "classification": classify(&p) })),
                })
            }
        },
        Suite::Dichotomy => {
            let found = invariant_idempotent_classify(n_atoms)?;
            let has_identity = found.contains(&MarkovMatrix::identity(n_atoms));
            let has_constants = found.contains(&MarkovMatrix::uniform(n_atoms));
            let expected = if n_atoms == 1 { 1 } else { 2 };
            let kinds: Vec<Classification> = found.iter().map(classify).collect();
            Ok(Outcome {
                inputs: serde_json::json!({ "atoms": n_atoms }),
                observed: observed([
                    ("invariant_idempotents", Observed::count(found.len())),
                    ("has_identity", Observed::flag(has_identity)),
                    ("has_constants_projection", Observed::flag(has_constants)),
                ]),
                pass: found.len() == expected && has_identity && has_constants,
                detail: Some(serde_json::json!({ "matrices": found, "classification": kinds })),
            })
        }
        Suite::Psd => {
            let f = ObservableVector::new(random_observable(rng, n_atoms));
            let elements: Vec<Automorphism> = (0..PSD_ELEMENTS)
                .map(|_| random_automorphism(rng, n_atoms))
                .collect();
            let c = gram_psd_check(&f, &elements)?;
            Ok(Outcome {
                inputs: serde_json::json!({ "f": f, "elements": elements }),
                observed: observed([("min_eigenvalue", Observed::float(c.min_eigenvalue))]),
                pass: c.ok,
                detail: None,
            })
        }
        Suite::Modulus => {
            let s = random_automorphism(rng, n_atoms);
            let f = ObservableVector::new(random_observable(rng, n_atoms));
            // odd trials: factors close to the identity; even trials: arbitrary
            let (p, q) = if k % 2 == 1 {
                let alpha = random_partition(rng, n_atoms, config.cells);
                (
                    random_near_identity(rng, &alpha, eps),
                    random_near_identity(rng, &alpha, eps),
                )
            } else {
                (
                    random_automorphism(rng, n_atoms),
                    random_automorphism(rng, n_atoms),
                )
            };
            let c = roelcke_modulus_check(&p, &s, &q, &f)?;
            Ok(Outcome {
                inputs: serde_json::json!({ "p": p, "s": s, "q": q, "f": f }),
                observed: observed([
                    ("lhs", Observed::exact(&c.lhs_exact)),
                    ("rhs", Observed::float(c.rhs)),
                    ("margin", Observed::float(c.margin)),
                ]),
                pass: c.ok,
                detail: None,
            })
        }
        Suite::Net => {
            let net = net.expect("net built before trials");
            let alpha = balanced_partition(n_atoms, config.cells);
            let t = random_automorphism(rng, n_atoms);
            let best = net
                .centers
                .iter()
                .map(|c| w_distance(&t, c, &alpha))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .min()
                .expect("net is nonempty");
            Ok(Outcome {
                inputs: serde_json::json!({ "t": t }),
                observed: observed([
                    ("nearest_distance", Observed::exact(&best)),
                    ("net_size", Observed::count(net.centers.len())),
                ]),
                pass: &best < eps,
                detail: None,
            })
        }
    }
}

const CSV_FIXED: [&str; 3] = ["trial", "digest", "pass"];

/// One row per trial: `trial, digest, pass` and one column per observed key
/// (sorted). Exact values are written as `"p/q"`, floats in shortest
/// round-trip form. Trial `detail` payloads are JSON-only.
pub fn export_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let keys: std::collections::BTreeSet<&String> = report
        .trials
        .iter()
        .flat_map(|t| t.observed.keys())
        .collect();
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = CSV_FIXED
        .iter()
        .map(|s| s.to_string())
        .chain(keys.iter().map(|k| k.to_string()))
        .collect();
    w.write_record(&header).map_err(io)?;
    for t in &report.trials {
        let mut row = vec![t.trial.to_string(), t.digest.clone(), t.pass.to_string()];
        row.extend(
            keys.iter()
                .map(|k| t.observed.get(*k).map(Observed::cell).unwrap_or_default()),
        );
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

/// Reads back the trial rows written by [`export_csv`] (without `detail`).
pub fn import_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(io)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 || header[..3] != CSV_FIXED {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let trial = rec[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad trial index {:?}", &rec[0])))?;
        let pass = rec[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad pass flag {:?}", &rec[2])))?;
        let mut observed = BTreeMap::new();
        for (key, cell) in header.iter().zip(rec.iter()).skip(3) {
            if !cell.is_empty() {
                observed.insert(key.clone(), Observed::parse_cell(cell)?);
            }
        }
        out.push(TrialRecord {
            trial,
            digest: rec[1].to_string(),
            observed,
            pass,
            detail: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(suite: Suite, atoms: usize, cells: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            atoms,
            cells,
            trials,
            seed: 42,
            ..ExperimentConfig::new(suite)
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Suite::Forward, 8, 2, 0).validate().is_err());
        assert!(cfg(Suite::Forward, 2, 3, 1).validate().is_err());
        let mut c = cfg(Suite::Forward, 8, 2, 1);
        c.epsilon = rational::ratio(0, 1);
        assert!(matches!(run_suite(&c), Err(Error::Config(_))));
    }

    #[test]
    fn forward_identity_anchor() {
        let r = run_suite(&cfg(Suite::Forward, 8, 2, 1)).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.aggregate("distance").unwrap().max, 0.0);
    }

    #[test]
    fn backward_hand_case() {
        let mut c = cfg(Suite::Backward, 4, 2, 1);
        c.epsilon = rational::ratio(1, 8);
        let r = run_suite(&c).unwrap();
        assert!(r.passed());
        let t = &r.trials[0];
        assert_eq!(t.observed["r_deviation"].exact.as_deref(), Some("0/1"));
        assert_eq!(t.observed["p_deviation"].exact.as_deref(), Some("0/1"));
        assert!(t.detail.is_some());
    }

    #[test]
    fn dichotomy_three_atoms() {
        let r = run_suite(&cfg(Suite::Dichotomy, 3, 1, 1)).unwrap();
        assert!(r.passed());
        assert_eq!(r.trials[0].observed["invariant_idempotents"].decimal, 2.0);
    }

    #[test]
    fn reports_are_reproducible() {
        for suite in [Suite::Forward, Suite::Modulus, Suite::Realize] {
            let c = cfg(suite, 12, 3, 20);
            assert_eq!(
                run_suite(&c).unwrap().to_json(),
                run_suite(&c).unwrap().to_json()
            );
        }
    }

    #[test]
    fn csv_empty_and_small() {
        let mut r = run_suite(&cfg(Suite::Forward, 8, 2, 3)).unwrap();
        let mut buf = Vec::new();
        export_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = import_csv(&buf[..]).unwrap();
        assert_eq!(back, r.trials);

        r.trials.clear();
        let mut buf = Vec::new();
        export_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trial,digest,pass\n");
    }

    #[test]
    fn csv_round_trip_keeps_floats() {
        let r = run_suite(&cfg(Suite::Psd, 8, 2, 5)).unwrap();
        let mut buf = Vec::new();
        export_csv(&r, &mut buf).unwrap();
        assert_eq!(import_csv(&buf[..]).unwrap(), r.trials);
    }
}
