//! Exact closed forms: optimal normalized download cost, per-database query
//! counts, sub-packetization and the field width needed by the MDS layer.
//!
//! Everything here is computed over arbitrary-precision integers; no floating
//! point is involved. Counts are narrowed to `u64` only at the very end, and a
//! parameter set whose counts would not fit is rejected with a typed error.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact rational number, always held in lowest terms with a positive
/// denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(value: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Rational(BigRational::new(numer, denom))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    /// Nearest `f64`, for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rational({self})")
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("not a rational: {s:?}"));
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rational::from_big(n, d))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }

        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

/// Per-database counts of the uniform-prefetching scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeCounts {
    pub databases: usize,
    pub messages: usize,
    pub cache: usize,
    /// Messages cached from each database, `M / N`.
    pub per_database: usize,
    /// Query rows per database (systematic length of the MDS code).
    pub p: u64,
    /// Rows per database fully determined by the cache.
    pub q: u64,
    /// Symbols per message.
    #[serde(rename = "L")]
    pub message_len: u64,
    pub code_length: u64,
    pub parity_per_db: u64,
}

impl SchemeCounts {
    /// Total symbols downloaded in the retrieval phase, `N (p - q)`.
    pub fn downloaded(&self) -> u64 {
        self.databases as u64 * self.parity_per_db
    }

    /// `N (p - q) / L` as an exact rational.
    pub fn normalized_cost(&self) -> Rational {
        Rational::from_big(
            BigInt::from(self.downloaded()),
            BigInt::from(self.message_len),
        )
    }

    /// Active (non-self-provided) messages at every database, `K - m`.
    pub fn active(&self) -> usize {
        self.messages - self.per_database
    }
}

fn check_nk(databases: usize, messages: usize) -> Result<()> {
    if databases < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 databases, got N = {databases}"
        )));
    }
    if messages < 1 {
        return Err(Error::Domain("need at least one message".into()));
    }
    Ok(())
}

fn pow(base: usize, exp: usize) -> BigUint {
    num_traits::pow(BigUint::from(base), exp)
}

/// `(base^exp - 1) / (base - 1)`, asserting exact divisibility.
fn geometric(base: usize, exp: usize) -> BigUint {
    let num = pow(base, exp) - BigUint::one();
    let (quot, rem) = num.div_rem(&BigUint::from(base - 1));
    assert!(rem.is_zero(), "geometric sum must be integral");
    quot
}

fn narrow(value: &BigUint, what: &str) -> Result<u64> {
    value
        .to_u64()
        .ok_or_else(|| Error::Domain(format!("{what} = {value} exceeds the supported range")))
}

/// Binomial coefficient over big integers.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Number of rows of size `r` at one database when `active` messages are in
/// play: `binom(active, r) (N-1)^(r-1)`.
pub fn rows_of_size(databases: usize, active: usize, r: usize) -> BigUint {
    if r == 0 {
        return BigUint::zero();
    }
    binomial(active, r) * pow(databases - 1, r - 1)
}

/// Optimal normalized download cost `1 + 1/N + ... + 1/N^(K-M-1)`.
pub fn optimal_cost(databases: usize, messages: usize, cache: usize) -> Result<Rational> {
    check_nk(databases, messages)?;
    if cache >= messages {
        return Err(Error::Domain(format!(
            "cache size M = {cache} must be smaller than K = {messages}"
        )));
    }
    let terms = messages - cache;
    // (N^t - 1) / ((N - 1) N^(t-1))
    let numer = BigInt::from(geometric(databases, terms));
    let denom = BigInt::from(pow(databases, terms - 1));
    Ok(Rational::from_big(numer, denom))
}

/// Capacity `C = 1 / D*`.
pub fn capacity(databases: usize, messages: usize, cache: usize) -> Result<Rational> {
    optimal_cost(databases, messages, cache).map(|d| d.recip())
}

/// Classical (no side information) PIR cost.
pub fn classical_cost(databases: usize, messages: usize) -> Result<Rational> {
    optimal_cost(databases, messages, 0)
}

/// Validates `(N, K, M)` for the uniform scheme and returns `m = M / N`.
pub fn uniform_share(databases: usize, messages: usize, cache: usize) -> Result<usize> {
    check_nk(databases, messages)?;
    if !cache.is_multiple_of(databases) {
        return Err(Error::NonUniform { databases, cache });
    }
    if cache >= messages {
        return Err(Error::Domain(format!(
            "cache size M = {cache} must be smaller than K = {messages}"
        )));
    }
    Ok(cache / databases)
}

/// Query, side-information and message-length counts of the uniform scheme.
pub fn scheme_counts(databases: usize, messages: usize, cache: usize) -> Result<SchemeCounts> {
    let m = uniform_share(databases, messages, cache)?;
    let active = messages - m;

    let p = geometric(databases, active);
    let q = geometric(databases, (databases - 1) * m);
    let len = pow(databases, active);

    // Row-count sums must agree with the closed forms.
    let p_sum: BigUint = (1..=active)
        .map(|r| rows_of_size(databases, active, r))
        .sum();
    let q_sum: BigUint = (1..=(databases - 1) * m)
        .map(|r| rows_of_size(databases, (databases - 1) * m, r))
        .sum();
    if p_sum != p || q_sum != q {
        return Err(Error::Internal(
            "closed-form and row-sum counts disagree".into(),
        ));
    }

    let counts = SchemeCounts {
        databases,
        messages,
        cache,
        per_database: m,
        p: narrow(&p, "p")?,
        q: narrow(&q, "q")?,
        message_len: narrow(&len, "L")?,
        code_length: narrow(&(BigUint::from(2u8) * &p - &q), "2p - q")?,
        parity_per_db: narrow(&(&p - &q), "p - q")?,
    };

    if counts.normalized_cost() != optimal_cost(databases, messages, cache)? {
        return Err(Error::Internal(format!(
            "N(p-q)/L = {} does not match the optimal cost",
            counts.normalized_cost()
        )));
    }
    Ok(counts)
}

/// Smallest `w >= 1` with `2^w >= length`.
pub fn width_for_length(length: u64) -> u32 {
    let mut w = 1;
    while (1u128 << w) < length as u128 {
        w += 1;
    }
    w
}

/// Smallest binary extension field width that fits a length-`2p - q` code.
pub fn min_field_width(counts: &SchemeCounts) -> u32 {
    width_for_length(counts.code_length)
}

/// Code length `2p' - q'` of the MDS layer used by the general scheme that
/// treats the cache as unknown to every database, where
/// `p' = (N^K - 1)/(N - 1)` and `q' = (N^M - 1)/(N - 1)`.
pub fn baseline_code_length(databases: usize, messages: usize, cache: usize) -> Result<u64> {
    check_nk(databases, messages)?;
    if cache >= messages {
        return Err(Error::Domain(format!(
            "cache size M = {cache} must be smaller than K = {messages}"
        )));
    }
    let p = geometric(databases, messages);
    let q = geometric(databases, cache);
    narrow(&(BigUint::from(2u8) * p - q), "2p' - q'")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn optimal_cost_examples() {
        assert_eq!(optimal_cost(2, 4, 2).unwrap(), r(3, 2));
        assert_eq!(optimal_cost(2, 5, 2).unwrap(), r(7, 4));
        assert_eq!(optimal_cost(2, 1, 0).unwrap(), r(1, 1));
        assert_eq!(optimal_cost(3, 3, 0).unwrap(), r(13, 9));
    }

    #[test]
    fn optimal_cost_rejects_bad_domain() {
        assert!(matches!(optimal_cost(2, 4, 4), Err(Error::Domain(_))));
        assert!(matches!(optimal_cost(1, 4, 0), Err(Error::Domain(_))));
        assert!(matches!(optimal_cost(2, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn classical_cost_examples() {
        assert_eq!(classical_cost(2, 4).unwrap(), r(15, 8));
        assert_eq!(classical_cost(2, 1).unwrap(), r(1, 1));
        assert_eq!(classical_cost(2, 5).unwrap(), r(31, 16));
    }

    #[test]
    fn capacity_is_reciprocal() {
        assert_eq!(capacity(2, 4, 2).unwrap(), r(2, 3));
    }

    #[test]
    fn counts_examples() {
        let c = scheme_counts(2, 4, 2).unwrap();
        assert_eq!((c.p, c.q, c.message_len, c.code_length), (7, 1, 8, 13));
        let c = scheme_counts(2, 5, 2).unwrap();
        assert_eq!((c.p, c.q, c.message_len, c.code_length), (15, 1, 16, 29));
        let c = scheme_counts(2, 2, 0).unwrap();
        assert_eq!((c.p, c.q, c.message_len, c.code_length), (3, 0, 4, 6));
    }

    #[test]
    fn counts_reject_non_uniform() {
        assert_eq!(
            scheme_counts(2, 4, 1),
            Err(Error::NonUniform {
                databases: 2,
                cache: 1
            })
        );
        assert!(matches!(scheme_counts(2, 4, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn field_width_examples() {
        assert_eq!(width_for_length(13), 4);
        assert_eq!(width_for_length(29), 5);
        assert_eq!(width_for_length(1), 1);
        assert_eq!(width_for_length(16), 4);
        assert_eq!(width_for_length(17), 5);
    }

    #[test]
    fn baseline_code_is_longer() {
        assert_eq!(baseline_code_length(2, 4, 2).unwrap(), 27);
        assert_eq!(width_for_length(27), 5);
    }

    #[test]
    fn rational_parse_and_display() {
        let x: Rational = "6/4".parse().unwrap();
        assert_eq!(x.to_string(), "3/2");
        assert_eq!("2".parse::<Rational>().unwrap(), r(2, 1));
        assert!("1/0".parse::<Rational>().is_err());
        assert_eq!(r(4, -2).to_string(), "-2");
    }
}
