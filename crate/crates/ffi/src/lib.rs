//! C ABI over the `roelcke` crate.
//!
//! Objects cross the boundary as opaque handles created by `*_new` (or by an
//! operation writing to an out-parameter) and released with the matching
//! `*_free`. Every fallible call returns a [`RoelckeStatus`]; on failure the
//! message is available from [`roelcke_last_error`] on the same thread.
//! Rationals are returned as `int64_t` numerator/denominator pairs with a
//! positive denominator. Atom indices are 0-based, partition labels 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_traits::ToPrimitive;
use roelcke::experiment::{run_suite, ExperimentConfig};
use roelcke::factorization::{factorize, FactorizationWitness};
use roelcke::rational::Q;
use roelcke::uniformity::{u_deviation, w_distance};
use roelcke::{AtomSpace, Automorphism, Error, Partition};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoelckeStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed input: bad lengths, labels, permutations, rationals or JSON.
    InvalidArgument = 2,
    /// A mathematical precondition failed, e.g. `w_distance ≥ ε/n²`.
    Precondition = 3,
    /// The request is too large to carry out.
    Infeasible = 4,
    /// A value does not fit the C representation.
    Overflow = 5,
    Internal = 6,
    Panic = 7,
}

/// Partition of `{0, …, N−1}`.
pub struct RoelckePartition(Partition);

/// Permutation of `{0, …, N−1}`.
pub struct RoelckeAutomorphism(Automorphism);

/// Result of [`roelcke_factorize`].
pub struct RoelckeWitness(FactorizationWitness);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RoelckeStatus {
    match e {
        Error::Precondition(_)
        | Error::NotRealizable(_)
        | Error::NothingToSeparate
        | Error::NotIdempotent => RoelckeStatus::Precondition,
        Error::InfeasibleNet(_) | Error::InfeasibleRepair(_) | Error::NoConvergence { .. } => {
            RoelckeStatus::Infeasible
        }
        Error::Internal(_) | Error::Io { .. } => RoelckeStatus::Internal,
        _ => RoelckeStatus::InvalidArgument,
    }
}

struct Fail(RoelckeStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RoelckeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any failure and converts panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> RoelckeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RoelckeStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RoelckeStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_rational(q: &Q, num: *mut i64, den: *mut i64) -> Result<(), Fail> {
    let overflow = || {
        Fail(
            RoelckeStatus::Overflow,
            format!("{q} does not fit in int64_t"),
        )
    };
    let n = q.numer().to_i64().ok_or_else(overflow)?;
    let d = q.denom().to_i64().ok_or_else(overflow)?;
    put(num, n, "num")?;
    put(den, d, "den")
}

fn rational_in(num: i64, den: i64) -> Result<Q, Fail> {
    if den == 0 {
        return Err(Fail(
            RoelckeStatus::InvalidArgument,
            "zero denominator".into(),
        ));
    }
    Ok(Q::new(num.into(), den.into()))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn roelcke_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a partition from `len` 1-based labels; cells are `1..=max label`.
///
/// # Safety
/// `labels` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_partition_new(
    labels: *const usize,
    len: usize,
    out: *mut *mut RoelckePartition,
) -> RoelckeStatus {
    guard(|| {
        let labels = slice(labels, len, "labels")?;
        let p = Partition::new(AtomSpace::new(len)?, labels)?;
        put(out, Box::into_raw(Box::new(RoelckePartition(p))), "out")
    })
}

/// # Safety
/// `p` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roelcke_partition_free(p: *mut RoelckePartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of cells, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roelcke_partition_cell_count(p: *const RoelckePartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.cell_count())
}

/// Builds a permutation from its `len` images `forward[x] = T(x)`.
///
/// # Safety
/// `forward` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_new(
    forward: *const usize,
    len: usize,
    out: *mut *mut RoelckeAutomorphism,
) -> RoelckeStatus {
    guard(|| {
        let forward = slice(forward, len, "forward")?;
        let t = Automorphism::new(forward.to_vec())?;
        put(out, Box::into_raw(Box::new(RoelckeAutomorphism(t))), "out")
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_free(t: *mut RoelckeAutomorphism) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of atoms, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_len(t: *const RoelckeAutomorphism) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Copies the images into `buf`, which must hold exactly `len` entries.
///
/// # Safety
/// `t` must be a live handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_forward(
    t: *const RoelckeAutomorphism,
    buf: *mut usize,
    len: usize,
) -> RoelckeStatus {
    guard(|| {
        let t = &borrow(t, "t")?.0;
        if len != t.len() {
            return Err(Error::LengthMismatch {
                expected: t.len(),
                actual: len,
            }
            .into());
        }
        if len > 0 && buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(t.forward().as_ptr(), buf, len);
        Ok(())
    })
}

/// `out = s ∘ t`, i.e. `x ↦ s(t(x))`.
///
/// # Safety
/// `s`, `t` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_compose(
    s: *const RoelckeAutomorphism,
    t: *const RoelckeAutomorphism,
    out: *mut *mut RoelckeAutomorphism,
) -> RoelckeStatus {
    guard(|| {
        let st = borrow(s, "s")?.0.compose(&borrow(t, "t")?.0)?;
        put(out, Box::into_raw(Box::new(RoelckeAutomorphism(st))), "out")
    })
}

/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_automorphism_inverse(
    t: *const RoelckeAutomorphism,
    out: *mut *mut RoelckeAutomorphism,
) -> RoelckeStatus {
    guard(|| {
        let inv = borrow(t, "t")?.0.inverse();
        put(
            out,
            Box::into_raw(Box::new(RoelckeAutomorphism(inv))),
            "out",
        )
    })
}

/// `max_i μ(A_i △ T⁻¹A_i)` as `num/den`.
///
/// # Safety
/// Handles must be live; `num`, `den` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_u_deviation(
    t: *const RoelckeAutomorphism,
    alpha: *const RoelckePartition,
    num: *mut i64,
    den: *mut i64,
) -> RoelckeStatus {
    guard(|| {
        let q = u_deviation(&borrow(t, "t")?.0, &borrow(alpha, "alpha")?.0)?;
        put_rational(&q, num, den)
    })
}

/// `max_{i,j} |μ(A_i ∩ S⁻¹A_j) − μ(A_i ∩ T⁻¹A_j)|` as `num/den`.
///
/// # Safety
/// Handles must be live; `num`, `den` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_w_distance(
    s: *const RoelckeAutomorphism,
    t: *const RoelckeAutomorphism,
    alpha: *const RoelckePartition,
    num: *mut i64,
    den: *mut i64,
) -> RoelckeStatus {
    guard(|| {
        let q = w_distance(
            &borrow(s, "s")?.0,
            &borrow(t, "t")?.0,
            &borrow(alpha, "alpha")?.0,
        )?;
        put_rational(&q, num, den)
    })
}

/// Factorizes `T = P·S·R` with `ε = eps_num/eps_den`. Returns
/// `ROELCKE_STATUS_PRECONDITION` unless `w_distance(S, T) < ε/n²`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_factorize(
    s: *const RoelckeAutomorphism,
    t: *const RoelckeAutomorphism,
    alpha: *const RoelckePartition,
    eps_num: i64,
    eps_den: i64,
    out: *mut *mut RoelckeWitness,
) -> RoelckeStatus {
    guard(|| {
        let eps = rational_in(eps_num, eps_den)?;
        let w = factorize(
            &borrow(s, "s")?.0,
            &borrow(t, "t")?.0,
            &borrow(alpha, "alpha")?.0,
            &eps,
        )?;
        put(out, Box::into_raw(Box::new(RoelckeWitness(w))), "out")
    })
}

/// # Safety
/// `w` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roelcke_witness_free(w: *mut RoelckeWitness) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// New handle holding the witness's `R`.
///
/// # Safety
/// `w` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_witness_r(
    w: *const RoelckeWitness,
    out: *mut *mut RoelckeAutomorphism,
) -> RoelckeStatus {
    guard(|| {
        let r = borrow(w, "w")?.0.r.clone();
        put(out, Box::into_raw(Box::new(RoelckeAutomorphism(r))), "out")
    })
}

/// New handle holding the witness's `P`.
///
/// # Safety
/// `w` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_witness_p(
    w: *const RoelckeWitness,
    out: *mut *mut RoelckeAutomorphism,
) -> RoelckeStatus {
    guard(|| {
        let p = borrow(w, "w")?.0.p.clone();
        put(out, Box::into_raw(Box::new(RoelckeAutomorphism(p))), "out")
    })
}

/// Which exact quantity [`roelcke_witness_value`] reads.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoelckeWitnessValue {
    RDeviation = 0,
    PDeviation = 1,
    LeftoverMass = 2,
    ExcessMass = 3,
    WDistance = 4,
}

/// # Safety
/// `w` must be live; `num`, `den` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_witness_value(
    w: *const RoelckeWitness,
    which: RoelckeWitnessValue,
    num: *mut i64,
    den: *mut i64,
) -> RoelckeStatus {
    guard(|| {
        let w = &borrow(w, "w")?.0;
        let q = match which {
            RoelckeWitnessValue::RDeviation => &w.r_deviation,
            RoelckeWitnessValue::PDeviation => &w.p_deviation,
            RoelckeWitnessValue::LeftoverMass => &w.leftover_mass,
            RoelckeWitnessValue::ExcessMass => &w.excess_mass,
            RoelckeWitnessValue::WDistance => &w.w_distance,
        };
        put_rational(q, num, den)
    })
}

/// Runs an experiment suite. `config_json` is a JSON object with keys
/// `suite`, `atoms`, `cells`, `epsilon` (string `"p/q"`), `trials`, `seed`,
/// `mode` and `tol`. On success `*out` receives the JSON report, to be
/// released with [`roelcke_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roelcke_run_suite_json(
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> RoelckeStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| {
            Fail(
                RoelckeStatus::InvalidArgument,
                format!("config is not UTF-8: {e}"),
            )
        })?;
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Fail(RoelckeStatus::InvalidArgument, format!("config: {e}")))?;
        let report = run_suite(&config)?;
        let c = CString::new(report.to_json())
            .map_err(|e| Fail(RoelckeStatus::Internal, e.to_string()))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roelcke_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
