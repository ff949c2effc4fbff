//! Arithmetic on the circle group `T = R/Z`.
//!
//! A [`TorusPoint`] is either an exact rational residue or a 128-bit
//! fixed-point residue `raw / 2^128` carrying an error bound in units of
//! `2^-128`. Multiplying a fixed-point residue by an integer is a wrapping
//! multiply, which is exact reduction mod 1 of the stored value; the error
//! bound scales with `|n|`.
//!
//! Strict inequalities against thresholds are decided by [`Norm::lt`], which
//! answers [`Verdict::Ambiguous`] whenever the stored value is within the
//! guard margin of the threshold.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exact rational scalars (thresholds, rational frequencies, measures).
pub type Q = Ratio<i128>;

/// Number of fractional bits in the fixed-point representation.
pub const FIXED_BITS: u32 = 128;

/// Default precision requested for generated frequencies.
pub const DEFAULT_PRECISION_BITS: u32 = 128;

const TWO_POW_128_F64: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

fn two_pow_128() -> BigUint {
    BigUint::one() << 128u32
}

/// Outcome of a guarded strict comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Ambiguous,
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    /// Conjunction, with `No` dominating `Ambiguous`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::Yes, Verdict::Yes) => Verdict::Yes,
            _ => Verdict::Ambiguous,
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            Verdict::Yes => "1",
            Verdict::No => "0",
            Verdict::Ambiguous => "?",
        }
    }
}

/// Guard margin `tau` for strict inequalities, stored in units of `2^-128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Guard {
    units: u128,
}

impl Guard {
    /// `tau = 2^-bits`.
    pub fn pow2(bits: u32) -> Self {
        assert!((1..=FIXED_BITS).contains(&bits), "guard exponent out of range");
        Guard {
            units: 1u128 << (FIXED_BITS - bits),
        }
    }

    pub fn from_f64(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && (0.0..0.5).contains(&tau)) {
            return Err(Error::invalid(format!("guard margin must lie in [0, 1/2), got {tau}")));
        }
        Ok(Guard {
            units: (tau * TWO_POW_128_F64) as u128,
        })
    }

    pub fn units(self) -> u128 {
        self.units
    }

    pub fn as_f64(self) -> f64 {
        self.units as f64 / TWO_POW_128_F64
    }
}

impl Default for Guard {
    fn default() -> Self {
        Guard::pow2(40)
    }
}

impl Serialize for Guard {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Guard {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Guard::from_f64(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A non-negative rational threshold with its fixed-point image cached.
#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    exact: Q,
    // floor(exact * 2^128); None when exact >= 1
    units: Option<u128>,
}

impl Threshold {
    pub fn new(exact: Q) -> Result<Self> {
        if exact.is_negative() {
            return Err(Error::invalid(format!("threshold must be non-negative, got {exact}")));
        }
        let units = if exact >= Q::one() {
            None
        } else {
            let (raw, _) = ratio_to_raw(&exact);
            Some(raw)
        };
        Ok(Threshold { exact, units })
    }

    pub fn exact(&self) -> Q {
        self.exact
    }

    pub fn value(&self) -> f64 {
        q_to_f64(&self.exact)
    }
}

/// Representation of `||x||` for some `x` on the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    Exact(Q),
    Fixed { raw: u128, err: u128 },
}

impl Norm {
    pub fn value(&self) -> f64 {
        match self {
            Norm::Exact(q) => q_to_f64(q),
            Norm::Fixed { raw, .. } => *raw as f64 / TWO_POW_128_F64,
        }
    }

    pub fn exact(&self) -> Option<Q> {
        match self {
            Norm::Exact(q) => Some(*q),
            Norm::Fixed { .. } => None,
        }
    }

    /// Guarded test of `self < thr`.
    pub fn lt(&self, thr: &Threshold, guard: Guard) -> Verdict {
        match *self {
            Norm::Exact(q) => Verdict::from_bool(q < thr.exact),
            Norm::Fixed { raw, err } => {
                let Some(t) = thr.units else {
                    return Verdict::Yes;
                };
                let margin = guard.units.max(err.saturating_add(1));
                if raw.saturating_add(margin) < t {
                    Verdict::Yes
                } else if raw > t.saturating_add(margin) {
                    Verdict::No
                } else {
                    Verdict::Ambiguous
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Repr {
    Exact(Q),
    // value = raw / 2^128, |true - value| <= err / 2^128
    Fixed { raw: u128, err: u128 },
}

/// An element of `T = R/Z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TorusPoint {
    repr: Repr,
}

impl TorusPoint {
    pub fn zero() -> Self {
        TorusPoint {
            repr: Repr::Exact(Q::zero()),
        }
    }

    /// Reduces `q` modulo 1.
    pub fn from_ratio(q: Q) -> Self {
        TorusPoint {
            repr: Repr::Exact(frac_q(q)),
        }
    }

    pub fn from_raw(raw: u128) -> Self {
        TorusPoint {
            repr: Repr::Fixed { raw, err: 0 },
        }
    }

    pub fn from_raw_with_err(raw: u128, err: u128) -> Self {
        TorusPoint {
            repr: Repr::Fixed { raw, err },
        }
    }

    pub fn from_f64(x: f64) -> Self {
        let f = x - x.floor();
        let raw = (f * TWO_POW_128_F64) as u128;
        TorusPoint::from_raw_with_err(raw, 1)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_))
    }

    pub fn as_ratio(&self) -> Option<Q> {
        match self.repr {
            Repr::Exact(q) => Some(q),
            Repr::Fixed { .. } => None,
        }
    }

    /// Working precision of the stored value in bits.
    pub fn precision_bits(&self) -> u32 {
        FIXED_BITS
    }

    /// `floor(value * 2^128)`.
    pub fn raw(&self) -> u128 {
        self.fixed_parts().0
    }

    /// Error bound of [`raw`](Self::raw) in units of `2^-128`.
    pub fn err_units(&self) -> u128 {
        self.fixed_parts().1
    }

    fn fixed_parts(&self) -> (u128, u128) {
        match &self.repr {
            Repr::Exact(q) => ratio_to_raw(q),
            Repr::Fixed { raw, err } => (*raw, *err),
        }
    }

    /// Representative in `[0, 1)` as a float.
    pub fn value(&self) -> f64 {
        match &self.repr {
            Repr::Exact(q) => q_to_f64(q),
            Repr::Fixed { raw, .. } => *raw as f64 / TWO_POW_128_F64,
        }
    }

    pub fn mul_int(&self, n: i64) -> TorusPoint {
        if n == 0 {
            return TorusPoint::zero();
        }
        match &self.repr {
            Repr::Exact(q) => {
                let b = *q.denom();
                let a = *q.numer();
                let prod = (n as i128)
                    .checked_mul(a)
                    .or_else(|| ((n as i128).rem_euclid(b)).checked_mul(a));
                match prod {
                    Some(p) => TorusPoint {
                        repr: Repr::Exact(Q::new(p.rem_euclid(b), b)),
                    },
                    None => {
                        let (raw, err) = ratio_to_raw(q);
                        fixed_mul(raw, err, n)
                    }
                }
            }
            Repr::Fixed { raw, err } => fixed_mul(*raw, *err, n),
        }
    }

    pub fn norm(&self) -> Norm {
        match &self.repr {
            Repr::Exact(q) => {
                let half = Q::new(1, 2);
                Norm::Exact(if *q > half { Q::one() - q } else { *q })
            }
            Repr::Fixed { raw, err } => Norm::Fixed {
                raw: (*raw).min(raw.wrapping_neg()),
                err: *err,
            },
        }
    }

    /// Index `j` in `0..k` of the nearest point `j/k` of `Z_k`.
    pub fn nearest_multiple(&self, k: u64) -> u64 {
        assert!(k > 0);
        match &self.repr {
            Repr::Exact(q) => {
                let scaled = *q * Q::from_integer(k as i128);
                let r = (scaled + Q::new(1, 2)).floor().to_integer();
                (r.rem_euclid(k as i128)) as u64
            }
            Repr::Fixed { raw, .. } => {
                let v = (BigUint::from(*raw) * BigUint::from(k) + (BigUint::one() << 127u32)) >> 128u32;
                (v % BigUint::from(k)).to_u64().unwrap_or(0)
            }
        }
    }

    /// Decimal expansion of the stored representative with `digits` digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        match &self.repr {
            Repr::Exact(q) => ratio_decimal(q, digits),
            Repr::Fixed { raw, .. } => {
                let scaled = (BigUint::from(*raw) * BigUint::from(10u32).pow(digits as u32)) >> 128u32;
                format!("0.{:0>width$}", scaled.to_string(), width = digits)
            }
        }
    }
}

fn fixed_mul(raw: u128, err: u128, n: i64) -> TorusPoint {
    TorusPoint {
        repr: Repr::Fixed {
            raw: raw.wrapping_mul(n as i128 as u128),
            err: err.saturating_mul(n.unsigned_abs() as u128),
        },
    }
}

fn combine(a: &TorusPoint, b: &TorusPoint, sub: bool) -> TorusPoint {
    match (&a.repr, &b.repr) {
        (Repr::Exact(x), Repr::Exact(y)) => {
            let r = if sub { x.checked_sub(y) } else { x.checked_add(y) };
            match r {
                Some(v) => TorusPoint::from_ratio(v),
                None => combine_fixed(a, b, sub),
            }
        }
        _ => combine_fixed(a, b, sub),
    }
}

fn combine_fixed(a: &TorusPoint, b: &TorusPoint, sub: bool) -> TorusPoint {
    let (ra, ea) = a.fixed_parts();
    let (rb, eb) = b.fixed_parts();
    let raw = if sub { ra.wrapping_sub(rb) } else { ra.wrapping_add(rb) };
    TorusPoint::from_raw_with_err(raw, ea.saturating_add(eb))
}

impl std::ops::Add for &TorusPoint {
    type Output = TorusPoint;
    fn add(self, rhs: &TorusPoint) -> TorusPoint {
        combine(self, rhs, false)
    }
}

impl std::ops::Sub for &TorusPoint {
    type Output = TorusPoint;
    fn sub(self, rhs: &TorusPoint) -> TorusPoint {
        combine(self, rhs, true)
    }
}

impl std::ops::Neg for &TorusPoint {
    type Output = TorusPoint;
    fn neg(self) -> TorusPoint {
        &TorusPoint::zero() - self
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Exact(q) => write!(f, "{q}"),
            Repr::Fixed { raw, err: 0 } => write!(f, "0x{raw:032x}"),
            Repr::Fixed { .. } => f.write_str(&self.to_decimal(40)),
        }
    }
}

impl FromStr for TorusPoint {
    type Err = Error;

    /// Accepts `p/q`, integers and decimals (exact), or `0x<hex>` for a raw
    /// fixed-point residue. Decimals too long for an exact `i128` ratio are
    /// rounded to fixed point with a one-unit error bound.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(hex) = s.strip_prefix("0x") {
            let raw = u128::from_str_radix(hex, 16)
                .map_err(|e| Error::Parse(format!("bad fixed-point literal {s:?}: {e}")))?;
            return Ok(TorusPoint::from_raw(raw));
        }
        match parse_ratio(s) {
            Ok(q) => Ok(TorusPoint::from_ratio(q)),
            Err(_) => {
                let big = parse_big_ratio(s)?;
                let (raw, err) = big_ratio_to_raw(&big);
                Ok(TorusPoint::from_raw_with_err(raw, err.max(1)))
            }
        }
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `||x||`: distance from the representative of `x` to the nearest integer.
pub fn torus_norm(x: &TorusPoint) -> f64 {
    x.norm().value()
}

/// `|e(x) - 1| = 2 |sin(pi x)|`.
pub fn char_distance(x: &TorusPoint) -> f64 {
    chord(x.norm().value())
}

/// `2 sin(pi t)` for `t = ||x||` in `[0, 1/2]`.
pub fn chord(t: f64) -> f64 {
    2.0 * (PI * t).sin()
}

// ---------------------------------------------------------------------------
// Rational helpers

pub(crate) fn frac_q(q: Q) -> Q {
    let n = q.numer().rem_euclid(*q.denom());
    Q::new(n, *q.denom())
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `(floor(frac(q) * 2^128), err)` with `err` 1 when the conversion rounded.
pub(crate) fn ratio_to_raw(q: &Q) -> (u128, u128) {
    let f = frac_q(*q);
    let num = BigUint::from(*f.numer() as u128) << 128u32;
    let den = BigUint::from(*f.denom() as u128);
    let (quo, rem) = num.div_rem(&den);
    (quo.to_u128().unwrap_or(u128::MAX), u128::from(!rem.is_zero()))
}

fn big_ratio_to_raw(q: &Ratio<BigInt>) -> (u128, u128) {
    let den = q.denom().clone();
    let num = q.numer().mod_floor(&den);
    let scaled: BigInt = num << 128u32;
    let (quo, rem) = scaled.div_rem(&den);
    (quo.to_u128().unwrap_or(u128::MAX), u128::from(!rem.is_zero()))
}

fn ratio_decimal(q: &Q, digits: usize) -> String {
    let n = BigInt::from(*q.numer()) * BigInt::from(10u32).pow(digits as u32);
    let scaled = n.div_floor(&BigInt::from(*q.denom()));
    let int_part = q.floor().to_integer();
    let frac_part = scaled - BigInt::from(int_part) * BigInt::from(10u32).pow(digits as u32);
    format!("{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
}

/// Parses `p/q`, an integer, or a plain decimal into an exact `i128` ratio.
pub fn parse_ratio(s: &str) -> Result<Q> {
    let big = parse_big_ratio(s)?;
    match (big.numer().to_i128(), big.denom().to_i128()) {
        (Some(n), Some(d)) => Ok(Q::new(n, d)),
        _ => Err(Error::Parse(format!("{s:?} does not fit an i128 ratio"))),
    }
}

fn parse_big_ratio(s: &str) -> Result<Ratio<BigInt>> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse {s:?} as a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_s, frac_s) = body.split_once('.').unwrap_or((body, ""));
    if int_s.is_empty() && frac_s.is_empty() {
        return Err(bad());
    }
    if !int_s.chars().chain(frac_s.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_s}{frac_s}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let d = BigInt::from(10u32).pow(frac_s.len() as u32);
    let r = Ratio::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Serde for [`Q`] as a string `p/q` (or decimal); numbers are accepted on
/// input through their shortest decimal form.
pub mod q_str {
    use super::{parse_ratio, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Lit {
        Int(i64),
        Num(f64),
        Str(String),
    }

    impl Lit {
        pub(crate) fn to_q(&self) -> crate::Result<Q> {
            match self {
                Lit::Int(i) => Ok(Q::from_integer(*i as i128)),
                Lit::Num(x) => parse_ratio(&format!("{x}")),
                Lit::Str(s) => parse_ratio(s),
            }
        }
    }

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        Lit::deserialize(d)?.to_q().map_err(serde::de::Error::custom)
    }
}

/// Serde for `Vec<Q>` as a list of strings.
pub mod q_vec_str {
    use super::q_str::Lit;
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| q.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        Vec::<Lit>::deserialize(d)?
            .iter()
            .map(Lit::to_q)
            .collect::<crate::Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Independent frequency vectors

/// An open arc `(lo, lo + len)` on the circle in units of `2^-128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenArc {
    #[serde(with = "hex_u128")]
    pub lo: u128,
    #[serde(with = "hex_u128")]
    pub len: u128,
}

impl OpenArc {
    /// Arc `(lo, hi)` with `lo < hi < lo + 1`.
    pub fn from_ratios(lo: Q, hi: Q) -> Result<Self> {
        if hi <= lo || hi - lo >= Q::one() {
            return Err(Error::Degenerate(format!("arc ({lo}, {hi}) is empty or wraps fully")));
        }
        let (lo_raw, _) = ratio_to_raw(&lo);
        let (len_raw, _) = ratio_to_raw(&(hi - lo));
        Ok(OpenArc {
            lo: lo_raw,
            len: len_raw,
        })
    }

    pub fn contains_raw(&self, x: u128) -> bool {
        let off = x.wrapping_sub(self.lo);
        off > 0 && off < self.len
    }

    pub fn intersects(&self, other: &OpenArc) -> bool {
        other.lo.wrapping_sub(self.lo) < self.len || self.lo.wrapping_sub(other.lo) < other.len
    }
}

pub(crate) mod hex_u128 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{v:032x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        let body = s.strip_prefix("0x").unwrap_or(&s);
        u128::from_str_radix(body, 16).map_err(serde::de::Error::custom)
    }
}

/// Generator of one coordinate: `alpha = shift + sqrt(prime) / scale (mod 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub prime: u64,
    pub shift: TorusPoint,
    #[serde(with = "dec_u128")]
    pub scale: u128,
}

mod dec_u128 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Generator {
    pub fn evaluate(&self) -> Result<TorusPoint> {
        if self.scale == 0 {
            return Err(Error::invalid("generator scale must be positive"));
        }
        if !is_prime(self.prime) {
            return Err(Error::invalid(format!("generator base {} is not prime", self.prime)));
        }
        let root = (BigUint::from(self.prime) << 256u32).sqrt();
        let q = root / BigUint::from(self.scale);
        let low = (q % two_pow_128()).to_u128().expect("reduced below 2^128");
        // sqrt floor and division floor each lose less than one unit
        let sqrt_part = TorusPoint::from_raw_with_err(low, 2);
        Ok(&self.shift + &sqrt_part)
    }
}

/// A `d`-tuple of torus points that is independent together with 1.
///
/// Exact independence follows from the generator form with distinct primes
/// (square roots of distinct primes are linearly independent over `Q`). The
/// stored certificate additionally records an exhaustive scan of all small
/// integer relations.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector {
    entries: Vec<TorusPoint>,
    generators: Vec<Generator>,
    certificate_bound: u64,
    certificate_min: f64,
}

#[derive(Serialize, Deserialize)]
struct FrequencyVectorRepr {
    entries: Vec<String>,
    generators: Vec<Generator>,
    certificate_bound: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate_min: Option<f64>,
}

impl Serialize for FrequencyVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FrequencyVectorRepr {
            entries: self.entries.iter().map(|e| e.to_decimal(36)).collect(),
            generators: self.generators.clone(),
            certificate_bound: self.certificate_bound,
            certificate_min: self.certificate_min.is_finite().then_some(self.certificate_min),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FrequencyVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FrequencyVectorRepr::deserialize(d)?;
        FrequencyVector::from_generators(repr.generators, repr.certificate_bound, Guard::default())
            .map_err(serde::de::Error::custom)
    }
}

impl FrequencyVector {
    /// Builds the vector from generators and runs the relation scan up to
    /// `bound`.
    pub fn from_generators(generators: Vec<Generator>, bound: u64, guard: Guard) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::invalid("frequency vector must have at least one entry"));
        }
        let mut primes: Vec<u64> = generators.iter().map(|g| g.prime).collect();
        primes.sort_unstable();
        if primes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("generator primes must be distinct"));
        }
        let entries = generators.iter().map(Generator::evaluate).collect::<Result<Vec<_>>>()?;
        let certificate_min = relation_scan(&entries, bound, guard)?;
        Ok(FrequencyVector {
            entries,
            generators,
            certificate_bound: bound,
            certificate_min,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[TorusPoint] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &TorusPoint {
        &self.entries[j]
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn certificate_bound(&self) -> u64 {
        self.certificate_bound
    }

    /// Smallest `||sum n_j alpha_j||` seen by the relation scan.
    pub fn certificate_min(&self) -> f64 {
        self.certificate_min
    }
}

/// Largest `B` with `(2B + 1)^d` at most about 2e5 relation vectors.
pub fn default_certificate_bound(d: usize) -> u64 {
    const BUDGET: f64 = 2.0e5;
    let side = BUDGET.powf(1.0 / d as f64);
    (((side - 1.0) / 2.0).floor() as u64).max(if 3f64.powi(d as i32) <= BUDGET { 1 } else { 0 })
}

/// Exhaustively scans nonzero `n` with `max |n_j| <= bound` and returns the
/// minimal `||sum n_j alpha_j||`, failing if any falls below the guard.
fn relation_scan(entries: &[TorusPoint], bound: u64, guard: Guard) -> Result<f64> {
    let d = entries.len();
    if bound == 0 {
        return Ok(f64::INFINITY);
    }
    let b = bound as i64;
    let raws: Vec<u128> = entries.iter().map(TorusPoint::raw).collect();
    let err_per: u128 = entries.iter().map(|e| e.err_units()).max().unwrap_or(0);
    let mut coeffs = vec![-b; d];
    let mut best = u128::MAX;
    let mut best_rel = Vec::new();
    loop {
        if coeffs.iter().any(|&c| c != 0) {
            let mut acc = 0u128;
            for (c, r) in coeffs.iter().zip(&raws) {
                acc = acc.wrapping_add(r.wrapping_mul(*c as i128 as u128));
            }
            let norm = acc.min(acc.wrapping_neg());
            if norm < best {
                best = norm;
                best_rel = coeffs.clone();
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                let err = err_per.saturating_mul(b as u128 * d as u128);
                let min = best as f64 / TWO_POW_128_F64;
                if best <= guard.units().max(err) {
                    return Err(Error::Certificate {
                        relation: best_rel,
                        norm: min,
                    });
                }
                return Ok(min);
            }
            coeffs[i] += 1;
            if coeffs[i] > b {
                coeffs[i] = -b;
                i += 1;
            } else {
                break;
            }
        }
    }
}

pub fn first_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut p = 2u64;
    while out.len() < count {
        if is_prime(p) {
            out.push(p);
        }
        p += 1;
    }
    out
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2u64;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// Produces an independent vector, optionally with `alpha_j` inside the
/// open arc `intervals[j]`.
///
/// Each coordinate uses its own prime; inside an arc the shift is the dyadic
/// point a quarter of the way in and the scale is chosen so the square-root
/// term stays below half the arc length.
pub fn make_independent_frequencies(
    d: usize,
    intervals: Option<&[OpenArc]>,
    precision_bits: u32,
) -> Result<FrequencyVector> {
    make_independent_frequencies_with(d, intervals, precision_bits, default_certificate_bound(d), Guard::default())
}

pub fn make_independent_frequencies_with(
    d: usize,
    intervals: Option<&[OpenArc]>,
    precision_bits: u32,
    certificate_bound: u64,
    guard: Guard,
) -> Result<FrequencyVector> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(64..=FIXED_BITS).contains(&precision_bits) {
        return Err(Error::Precision {
            required_bits: precision_bits.max(64),
            available_bits: FIXED_BITS,
        });
    }
    let primes = first_primes(d);
    let generators = match intervals {
        None => primes
            .iter()
            .map(|&p| Generator {
                prime: p,
                shift: TorusPoint::zero(),
                scale: 1,
            })
            .collect(),
        Some(arcs) => {
            if arcs.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: arcs.len(),
                });
            }
            for (i, a) in arcs.iter().enumerate() {
                for b in &arcs[i + 1..] {
                    if a.intersects(b) {
                        return Err(Error::invalid("intervals must be mutually disjoint"));
                    }
                }
            }
            arcs.iter()
                .zip(&primes)
                .map(|(arc, &p)| generator_in_arc(arc, p, precision_bits))
                .collect::<Result<Vec<_>>>()?
        }
    };
    FrequencyVector::from_generators(generators, certificate_bound, guard)
}

fn generator_in_arc(arc: &OpenArc, prime: u64, precision_bits: u32) -> Result<Generator> {
    let quarter = arc.len / 4;
    if quarter == 0 {
        return Err(Error::Degenerate("arc is empty after shrinking to its middle half".into()));
    }
    // need at least 2^10 units of resolution inside the arc at the requested precision
    let resolution_shift = FIXED_BITS - precision_bits + 10;
    let width_bits = 128 - arc.len.leading_zeros();
    if width_bits <= resolution_shift {
        return Err(Error::Precision {
            required_bits: precision_bits + (resolution_shift + 1 - width_bits),
            available_bits: precision_bits,
        });
    }
    let root = (BigUint::from(prime) << 256u32).sqrt();
    let scale = (root * 2u32) / BigUint::from(arc.len) + 1u32;
    let scale = scale.to_u128().ok_or(Error::Precision {
        required_bits: FIXED_BITS + 1,
        available_bits: FIXED_BITS,
    })?;
    Ok(Generator {
        prime,
        shift: TorusPoint::from_raw(arc.lo.wrapping_add(quarter)),
        scale,
    })
}

/// Frequencies of a Bohr set or rotation: certified irrational, or exact
/// rationals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequencies {
    Certified(FrequencyVector),
    Rational(#[serde(with = "q_vec_str")] Vec<Q>),
}

impl Frequencies {
    pub fn rational(values: Vec<Q>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("frequency list must be nonempty"));
        }
        Ok(Frequencies::Rational(values))
    }

    pub fn dim(&self) -> usize {
        match self {
            Frequencies::Certified(f) => f.dim(),
            Frequencies::Rational(v) => v.len(),
        }
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        match self {
            Frequencies::Certified(f) => f.entries().to_vec(),
            Frequencies::Rational(v) => v.iter().map(|q| TorusPoint::from_ratio(*q)).collect(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Frequencies::Rational(_))
    }
}

impl From<FrequencyVector> for Frequencies {
    fn from(f: FrequencyVector) -> Self {
        Frequencies::Certified(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TorusPoint {
        s.parse().unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(torus_norm(&tp("0.75")), 0.25);
        assert_eq!(torus_norm(&tp("0")), 0.0);
        assert_eq!(torus_norm(&tp("0.4")), 0.4);
        assert_eq!(tp("0.75").norm(), Norm::Exact(Q::new(1, 4)));
    }

    #[test]
    fn char_distance_examples() {
        assert_eq!(char_distance(&tp("0")), 0.0);
        assert_eq!(char_distance(&tp("1/2")), 2.0);
        assert!((char_distance(&tp("1/4")) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn exact_mul_reduces() {
        let a = tp("1/3");
        assert_eq!(a.mul_int(3), TorusPoint::zero());
        assert_eq!(a.mul_int(-1), tp("2/3"));
        assert_eq!(a.mul_int(i64::MAX).as_ratio(), Some(Q::new(1, 3)));
    }

    #[test]
    fn fixed_negation_wraps() {
        let x = TorusPoint::from_raw(5);
        let y = -&x;
        assert_eq!(y.raw(), 5u128.wrapping_neg());
        assert_eq!(y.norm(), Norm::Fixed { raw: 5, err: 0 });
    }

    #[test]
    fn guarded_comparison() {
        let thr = Threshold::new(Q::new(1, 10)).unwrap();
        let g = Guard::default();
        let near = TorusPoint::from_raw(thr.units.unwrap() - 10);
        assert_eq!(near.norm().lt(&thr, g), Verdict::Ambiguous);
        assert_eq!(TorusPoint::from_f64(0.05).norm().lt(&thr, g), Verdict::Yes);
        assert_eq!(TorusPoint::from_f64(0.15).norm().lt(&thr, g), Verdict::No);
        assert_eq!(tp("1/10").norm().lt(&thr, g), Verdict::No);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_ratio("0.15").unwrap(), Q::new(3, 20));
        assert_eq!(parse_ratio("-3/6").unwrap(), Q::new(-1, 2));
        assert!(parse_ratio("abc").is_err());
        assert!(parse_ratio("1/0").is_err());
        let long = tp("0.4142135623730950488016887242096980785696");
        assert!(!long.is_exact());
        assert_eq!(long.err_units(), 1);
    }

    #[test]
    fn display_round_trip() {
        for s in ["3/7", "0x0000000000000000000000000000abcd"] {
            assert_eq!(tp(s).to_string(), s);
        }
    }

    #[test]
    fn arc_intersection() {
        let a = OpenArc::from_ratios(Q::new(1, 10), Q::new(2, 10)).unwrap();
        let b = OpenArc::from_ratios(Q::new(3, 10), Q::new(4, 10)).unwrap();
        let c = OpenArc::from_ratios(Q::new(15, 100), Q::new(35, 100)).unwrap();
        assert!(!a.intersects(&b));
        assert!(a.intersects(&c) && c.intersects(&b));
        let wrap = OpenArc::from_ratios(Q::new(9, 10), Q::new(11, 10)).unwrap();
        assert!(wrap.contains_raw(0));
        assert!(!wrap.intersects(&a));
    }

    #[test]
    fn degenerate_and_precision_errors() {
        let tiny = OpenArc { lo: 0, len: 3 };
        assert!(matches!(
            make_independent_frequencies(1, Some(&[tiny]), 128),
            Err(Error::Degenerate(_))
        ));
        let narrow = OpenArc {
            lo: 0x6a09e667f3bcc908b2fb1366ea957d3e,
            len: 1 << 40,
        };
        assert!(matches!(
            make_independent_frequencies(1, Some(&[narrow]), 64),
            Err(Error::Precision { .. })
        ));
        assert!(make_independent_frequencies(1, Some(&[narrow]), 128).is_ok());
        assert!(matches!(make_independent_frequencies(1, None, 32), Err(Error::Precision { .. })));
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let a = OpenArc::from_ratios(Q::new(1, 10), Q::new(3, 10)).unwrap();
        let b = OpenArc::from_ratios(Q::new(2, 10), Q::new(4, 10)).unwrap();
        assert!(make_independent_frequencies(2, Some(&[a, b]), 128).is_err());
    }

    #[test]
    fn nearest_multiple_rounds() {
        assert_eq!(tp("0.49").nearest_multiple(4), 2);
        assert_eq!(tp("0.9").nearest_multiple(4), 0);
        assert_eq!(TorusPoint::from_f64(0.13).nearest_multiple(4), 1);
    }

    #[test]
    fn frequency_json_round_trip() {
        let f = make_independent_frequencies(2, None, 128).unwrap();
        let js = serde_json::to_string(&f).unwrap();
        assert!(js.contains("\"certificate_bound\""));
        let back: FrequencyVector = serde_json::from_str(&js).unwrap();
        assert_eq!(back.entries(), f.entries());
    }

    #[test]
    fn sqrt_two_digits() {
        let f = make_independent_frequencies(1, None, 128).unwrap();
        let digits = f.entry(0).to_decimal(36);
        assert_eq!(&digits[..36], "0.4142135623730950488016887242096980");
    }

    #[test]
    fn small_relation_scan() {
        let f = make_independent_frequencies_with(2, None, 128, 50, Guard::default()).unwrap();
        assert!((f.certificate_min() - 5.207e-5).abs() < 1e-7, "{}", f.certificate_min());
    }

    #[test]
    fn arcs_contain_generated_points() {
        let a = OpenArc::from_ratios(Q::new(1, 10), Q::new(2, 10)).unwrap();
        let b = OpenArc::from_ratios(Q::new(3, 10), Q::new(4, 10)).unwrap();
        let f = make_independent_frequencies(2, Some(&[a, b]), 128).unwrap();
        assert!(a.contains_raw(f.entry(0).raw()) && b.contains_raw(f.entry(1).raw()));
    }
}
