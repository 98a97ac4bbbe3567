//! Exact rationals and their `"p/q"` text form.
//!
//! Rationals always serialize as `"p/q"` in lowest terms with a positive
//! denominator, including integers (`"1/1"`, `"0/1"`). Parsing also accepts a
//! bare integer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Q {
    Q::from_integer(BigInt::from(value))
}

/// `count / total` for atom counts.
pub fn frac(count: usize, total: usize) -> Q {
    Q::new(BigInt::from(count), BigInt::from(total))
}

pub fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn format(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse(text: &str) -> Result<Q> {
    let text = text.trim();
    let bad = || Error::ParseRational(text.to_string());
    let (n, d) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn abs_diff(a: &Q, b: &Q) -> Q {
    (a - b).abs()
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Serde adapter for a single rational as a `"p/q"` string.
pub mod serde_str {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for rational vectors.
pub mod serde_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&format(q))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for rational matrices (row-major nested arrays).
pub mod serde_mat {
    use super::*;
    use serde::ser::SerializeSeq;

    struct Row<'a>(&'a [Q]);

    impl serde::Serialize for Row<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serde_vec::serialize(self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for row in m {
            seq.serialize_element(&Row(row))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Vec<Q>>, D::Error> {
        let texts = Vec::<Vec<String>>::deserialize(d)?;
        texts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse(t).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integers_keep_denominator() {
        assert_eq!(format(&int(1)), "1/1");
        assert_eq!(format(&int(0)), "0/1");
        assert_eq!(format(&ratio(2, -4)), "-1/2");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse("1/0").is_err());
        assert!(parse("a/2").is_err());
        assert!(parse("").is_err());
        assert_eq!(parse(" 6/8 ").unwrap(), ratio(3, 4));
        assert_eq!(parse("7").unwrap(), int(7));
    }

    proptest! {
        #[test]
        fn text_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
            let q = ratio(n, d);
            let text = format(&q);
            prop_assert_eq!(parse(&text).unwrap(), q.clone());
            // canonical form is unique
            prop_assert_eq!(format(&parse(&text).unwrap()), text);
        }
    }
}
