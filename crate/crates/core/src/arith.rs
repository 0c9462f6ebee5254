//! Exact integer and rational helpers.
//!
//! Set elements are [`Natural`]s and ratio-set points are [`Rational`]s; both
//! are unbounded. Real exponents only ever appear as exact rationals, so every
//! membership question reduces to integer powers and integer roots.

use std::str::FromStr;
use std::sync::RwLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary precision nonnegative integer.
pub type Natural = BigUint;

/// Exact fraction in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn nat(v: u64) -> Natural {
    Natural::from(v)
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_from_nat(n: &Natural) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

pub fn nat_ratio(num: &Natural, den: &Natural) -> Rational {
    Rational::new(
        BigInt::from_biguint(Sign::Plus, num.clone()),
        BigInt::from_biguint(Sign::Plus, den.clone()),
    )
}

/// Numerator and denominator of a nonnegative rational as naturals.
pub fn parts(r: &Rational) -> (Natural, Natural) {
    debug_assert!(!r.is_negative());
    (
        r.numer().magnitude().clone(),
        r.denom().magnitude().clone(),
    )
}

/// Parts of a rational exponent that must fit machine-sized powers.
pub(crate) fn small_parts(r: &Rational, name: &'static str) -> Result<(u32, u32)> {
    let (n, d) = parts(r);
    match (n.to_u32(), d.to_u32()) {
        (Some(n), Some(d)) if n <= 4096 && d <= 4096 => Ok((n, d)),
        _ => Err(Error::Param {
            name,
            detail: format!("{} has a numerator or denominator above 4096", fmt_rational(r)),
        }),
    }
}

pub fn floor_rational(r: &Rational) -> Natural {
    debug_assert!(!r.is_negative());
    r.floor().to_integer().magnitude().clone()
}

pub fn ceil_rational(r: &Rational) -> Natural {
    debug_assert!(!r.is_negative());
    r.ceil().to_integer().magnitude().clone()
}

/// `⌊x^{1/n}⌋`.
pub fn iroot_floor(x: &Natural, n: u32) -> Natural {
    match n {
        0 => panic!("zeroth root"),
        1 => x.clone(),
        2 => x.sqrt(),
        _ => x.nth_root(n),
    }
}

/// `⌈x^{1/n}⌉`.
pub fn iroot_ceil(x: &Natural, n: u32) -> Natural {
    let r = iroot_floor(x, n);
    if &Pow::pow(&r, n) == x {
        r
    } else {
        r + 1u32
    }
}

/// `⌊y^q⌋` for a natural `y` and rational exponent `q = a/b`.
pub fn floor_pow(y: &Natural, a: u32, b: u32) -> Natural {
    iroot_floor(&Pow::pow(y, a), b)
}

/// `⌊r^{a/b}⌋` for a nonnegative rational `r`.
pub fn floor_pow_rational(r: &Rational, a: u32, b: u32) -> Natural {
    let (u, v) = parts(r);
    let x = Pow::pow(&u, a) / Pow::pow(&v, a);
    iroot_floor(&x, b)
}

/// Smallest natural `N` with `N^m · v ≥ u`, i.e. `⌈(u/v)^{1/m}⌉`.
pub fn ceil_root_ratio(u: &Natural, v: &Natural, m: u32) -> Natural {
    let r = iroot_floor(&(u / v), m);
    if &(Pow::pow(&r, m) * v) >= u {
        r
    } else {
        r + 1u32
    }
}

/// `⌈r^{a/b}⌉` for a nonnegative rational `r`.
pub fn ceil_pow_rational(r: &Rational, a: u32, b: u32) -> Natural {
    let (u, v) = parts(r);
    ceil_root_ratio(&Pow::pow(&u, a), &Pow::pow(&v, a), b)
}

static FACTORIALS: RwLock<Vec<Natural>> = RwLock::new(Vec::new());

/// `n!`, memoised.
pub fn factorial(n: u32) -> Natural {
    let n = n as usize;
    {
        let cache = FACTORIALS.read().expect("factorial cache poisoned");
        if let Some(v) = cache.get(n) {
            return v.clone();
        }
    }
    let mut cache = FACTORIALS.write().expect("factorial cache poisoned");
    if cache.is_empty() {
        cache.push(Natural::one());
    }
    while cache.len() <= n {
        let next = cache.last().unwrap() * Natural::from(cache.len());
        cache.push(next);
    }
    cache[n].clone()
}

/// Natural logarithm of a (possibly huge) natural.
pub fn ln_natural(x: &Natural) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_rational(r: &Rational) -> f64 {
    let (u, v) = parts(r);
    ln_natural(&u) - ln_natural(&v)
}

pub fn to_f64(r: &Rational) -> f64 {
    match r.to_f64() {
        Some(v) if v.is_finite() && (v != 0.0 || r.is_zero()) => v,
        _ => {
            let sign = if r.is_negative() { -1.0 } else { 1.0 };
            sign * ln_rational(&r.abs()).exp()
        }
    }
}

/// `p/q` rendering used in every serialized form.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses a natural from a decimal string. Also accepts `10^9` and `1e9`.
pub fn parse_natural(s: &str) -> Result<Natural> {
    let s = s.trim().replace('_', "");
    if let Some((b, e)) = s.split_once('^') {
        let base = parse_natural(b)?;
        let exp: u32 = e.parse().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
        return Ok(Pow::pow(&base, exp));
    }
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        let mant = parse_natural(m)?;
        let exp: u32 = e.parse().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
        return Ok(mant * Pow::pow(&nat(10), exp));
    }
    Natural::from_str(&s).map_err(|_| Error::Parse(format!("`{s}` is not a natural number")))
}

/// Parses `p/q`, an integer, or a terminating decimal such as `1.01`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
        let d = Pow::pow(&BigInt::from(10), frac.len() as u32);
        let r = Rational::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    if s.contains(['e', 'E', '^']) {
        return parse_natural(s).map(|n| rat_from_nat(&n));
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

/// Serde adapters: every natural and rational travels as a decimal string.
pub mod serde_nat {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Natural, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Natural, D::Error> {
        let s = String::deserialize(d)?;
        parse_natural(&s).map_err(D::Error::custom)
    }
}

pub mod serde_opt_nat {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Natural>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Natural>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_natural(&s).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod serde_nat_vec {
    use super::*;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Natural], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Natural>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_natural(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod serde_interval_vec {
    use super::*;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(Natural, Natural)], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (a, b) in v {
            seq.serialize_element(&[a.to_string(), b.to_string()])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Natural, Natural)>, D::Error> {
        Vec::<[String; 2]>::deserialize(d)?
            .iter()
            .map(|[a, b]| {
                Ok((
                    parse_natural(a).map_err(D::Error::custom)?,
                    parse_natural(b).map_err(D::Error::custom)?,
                ))
            })
            .collect()
    }
}

pub mod serde_rat {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(D::Error::custom)
    }
}

pub mod serde_rat_vec {
    use super::*;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&fmt_rational(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rational(s).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_are_exact_at_perfect_powers() {
        assert_eq!(iroot_floor(&nat(1000), 3), nat(10));
        assert_eq!(iroot_ceil(&nat(1000), 3), nat(10));
        assert_eq!(iroot_floor(&nat(1001), 3), nat(10));
        assert_eq!(iroot_ceil(&nat(1001), 3), nat(11));
        assert_eq!(iroot_floor(&nat(0), 2), nat(0));
    }

    #[test]
    fn rational_powers() {
        // (9/4)^{1/2} = 3/2
        assert_eq!(floor_pow_rational(&rat(9, 4), 1, 2), nat(1));
        assert_eq!(ceil_pow_rational(&rat(9, 4), 1, 2), nat(2));
        assert_eq!(ceil_pow_rational(&rat(4, 1), 1, 2), nat(2));
        // 17^{7/10} ≈ 7.27
        assert_eq!(floor_pow(&nat(17), 7, 10), nat(7));
        assert_eq!(ceil_root_ratio(&nat(10), &nat(1), 3), nat(3));
        assert_eq!(ceil_root_ratio(&nat(27), &nat(1), 3), nat(3));
    }

    #[test]
    fn factorials() {
        assert_eq!(factorial(0), nat(1));
        assert_eq!(factorial(5), nat(120));
        assert_eq!(factorial(20), nat(2_432_902_008_176_640_000));
    }

    #[test]
    fn logs_of_huge_naturals() {
        let big = Pow::pow(&nat(6), 3000u32);
        let expected = 3000.0 * 6f64.ln();
        assert!((ln_natural(&big) - expected).abs() / expected < 1e-12);
        assert!((ln_natural(&nat(1_000_000)) - 1e6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_natural("10^9").unwrap(), nat(1_000_000_000));
        assert_eq!(parse_natural("1e4").unwrap(), nat(10_000));
        assert_eq!(parse_rational("101/100").unwrap(), rat(101, 100));
        assert_eq!(parse_rational("1.01").unwrap(), rat(101, 100));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_natural("-3").is_err());
    }

    #[test]
    fn huge_rational_to_f64() {
        let r = nat_ratio(&Pow::pow(&nat(10), 400u32), &Pow::pow(&nat(10), 399u32));
        assert!((to_f64(&r) - 10.0).abs() < 1e-9);
    }
}
