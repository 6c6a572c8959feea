//! Scalar arithmetic shared by every other module.
//!
//! Two representations coexist. `f64` carries the transcendental work (exp, erf, cos)
//! and the samplers; [`DyadicReal`] carries every value that feeds a floor or a
//! nearest-integer decision in the cryptographic paths, so those decisions are exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

pub use num_bigint::BigInt;
use num_bigint::Sign;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};

/// Arithmetic budget handed to anything that divides or integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionContext {
    /// Fractional bits kept by dyadic division.
    pub frac_bits: u32,
    /// Points used by composite-midpoint quadrature.
    pub quadrature_points: usize,
}

impl PrecisionContext {
    pub const MIN_FRAC_BITS: u32 = 64;

    pub fn new(frac_bits: u32, quadrature_points: usize) -> Result<Self> {
        if frac_bits < Self::MIN_FRAC_BITS {
            return domain(format!(
                "fracBits must be at least {}, got {frac_bits}",
                Self::MIN_FRAC_BITS
            ));
        }
        if quadrature_points == 0 {
            return domain("quadraturePoints must be positive");
        }
        Ok(Self {
            frac_bits,
            quadrature_points,
        })
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            frac_bits: 128,
            quadrature_points: 1 << 12,
        }
    }
}

/// Nearest integer, with exact `.5` ties going to the smaller neighbour.
pub fn round_nearest_f64(x: f64) -> f64 {
    if x.fract() == 0.0 || !x.is_finite() {
        return x;
    }
    (x - 0.5).ceil()
}

/// Nearest integer as `i64`, ties to the smaller neighbour. Saturates outside the `i64` range.
pub fn round_nearest(x: f64) -> i64 {
    round_nearest_f64(x) as i64
}

/// Distance from `x` to the nearest integer, in `[0, 1/2]`.
pub fn frc(x: f64) -> f64 {
    (x - round_nearest_f64(x)).abs()
}

/// `x - floor(x / y) * y`, in `[0, y)`.
pub fn mod_pos(x: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return domain(format!("modulus must be positive, got {y}"));
    }
    let r = x.rem_euclid(y);
    Ok(if r >= y { 0.0 } else { r })
}

/// `x mod 1` in `[0, 1)`.
pub fn mod1(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `x * 2^e` without intermediate overflow or underflow of `2^e`.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Lowercase hex, most significant digit first, leading `-` when negative.
pub fn bigint_to_hex(x: &BigInt) -> String {
    x.to_str_radix(16)
}

pub fn bigint_from_hex(s: &str) -> Result<BigInt> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty()
        || !digits
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    {
        return Err(Error::Parse(format!("not a lowercase hex integer: {s:?}")));
    }
    BigInt::parse_bytes(s.as_bytes(), 16).ok_or_else(|| Error::Parse(format!("bad hex: {s:?}")))
}

/// `2^k` as a `BigInt`.
pub fn pow2(k: u64) -> BigInt {
    BigInt::one() << k
}

/// Uniform integer in `[0, bound)` by rejection over `bits(bound)` random bits.
pub fn random_below<R: rand::Rng + ?Sized>(bound: &BigInt, rng: &mut R) -> Result<BigInt> {
    if !bound.is_positive() {
        return domain("bound must be positive");
    }
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let excess = words as u64 * 32 - bits;
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.random()).collect();
        if let Some(top) = digits.last_mut() {
            *top >>= excess;
        }
        let x = BigInt::from_slice(Sign::Plus, &digits);
        if &x < bound {
            return Ok(x);
        }
    }
}

/// Exact real `mantissa * 2^exponent`.
///
/// Kept normalized: the mantissa is odd, or zero with exponent zero, so structural
/// equality is numeric equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicReal {
    mantissa: BigInt,
    exponent: i64,
}

impl DyadicReal {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        Self {
            mantissa: mantissa >> tz,
            exponent: exponent + tz as i64,
        }
    }

    pub fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(x: i64) -> Self {
        Self::new(BigInt::from(x), 0)
    }

    pub fn from_bigint(x: BigInt) -> Self {
        Self::new(x, 0)
    }

    /// Exact conversion; every finite `f64` is dyadic.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return domain(format!("not a finite real: {x}"));
        }
        if x == 0.0 {
            return Ok(Self::zero());
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let m = BigInt::from(m);
        Ok(Self::new(if negative { -m } else { m }, e))
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.sign() == Sign::Minus
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Nearest `f64` (truncating the mantissa to 64 bits first).
    pub fn to_f64(&self) -> f64 {
        let bits = self.mantissa.bits();
        let (m, e) = if bits > 64 {
            let shift = bits - 64;
            (&self.mantissa >> shift, self.exponent + shift as i64)
        } else {
            (self.mantissa.clone(), self.exponent)
        };
        ldexp(m.to_f64().unwrap_or(0.0), e)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as u64)
        } else {
            BigRational::new(self.mantissa.clone(), pow2((-self.exponent) as u64))
        }
    }

    /// `self * 2^k`, exact.
    pub fn shl(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent + k,
        }
    }

    /// Exact `floor(self / other)` for dyadic operands.
    pub fn div_floor(&self, other: &Self) -> Result<BigInt> {
        if other.is_zero() {
            return domain("division by zero");
        }
        let s = self.exponent - other.exponent;
        Ok(if s >= 0 {
            (&self.mantissa << s as u64).div_floor(&other.mantissa)
        } else {
            self.mantissa.div_floor(&(&other.mantissa << (-s) as u64))
        })
    }

    /// `self / other` rounded down to a multiple of `2^-frac_bits`.
    pub fn div(&self, other: &Self, frac_bits: u32) -> Result<Self> {
        let q = self.shl(frac_bits as i64).div_floor(other)?;
        Ok(Self::new(q, -(frac_bits as i64)))
    }

    pub fn floor(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa << self.exponent as u64
        } else {
            self.mantissa.div_floor(&pow2((-self.exponent) as u64))
        }
    }

    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// `self - floor(self)`, in `[0, 1)`.
    pub fn fract(&self) -> Self {
        self - &Self::from_bigint(self.floor())
    }

    /// Nearest integer; exact `.5` ties go to the smaller neighbour.
    pub fn round_nearest(&self) -> BigInt {
        (self - &Self::new(BigInt::one(), -1)).ceil()
    }

    /// Distance to the nearest integer, in `[0, 1/2]`.
    pub fn frc(&self) -> Self {
        (self - &Self::from_bigint(self.round_nearest())).abs()
    }

    /// `self - floor(self / y) * y`, in `[0, y)`.
    pub fn mod_pos(&self, y: &Self) -> Result<Self> {
        if y.is_zero() || y.is_negative() {
            return domain("modulus must be positive");
        }
        let q = self.div_floor(y)?;
        Ok(self - &(y * &Self::from_bigint(q)))
    }
}

impl Ord for DyadicReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self - other;
        match d.mantissa.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

impl PartialOrd for DyadicReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn add(self, rhs: &DyadicReal) -> DyadicReal {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(rhs.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &rhs.mantissa << (rhs.exponent - e) as u64;
        DyadicReal::new(a + b, e)
    }
}

impl<'a> Sub<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn sub(self, rhs: &DyadicReal) -> DyadicReal {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn mul(self, rhs: &DyadicReal) -> DyadicReal {
        DyadicReal::new(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Neg for &DyadicReal {
    type Output = DyadicReal;
    fn neg(self) -> DyadicReal {
        DyadicReal {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Neg for DyadicReal {
    type Output = DyadicReal;
    fn neg(self) -> DyadicReal {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<DyadicReal> for DyadicReal {
            type Output = DyadicReal;
            fn $m(self, rhs: DyadicReal) -> DyadicReal {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl From<BigInt> for DyadicReal {
    fn from(x: BigInt) -> Self {
        Self::from_bigint(x)
    }
}

impl fmt::Display for DyadicReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}p{}", bigint_to_hex(&self.mantissa), self.exponent)
    }
}

impl FromStr for DyadicReal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (m, e) = s
            .split_once('p')
            .ok_or_else(|| Error::Parse(format!("dyadic real needs '<hex>p<exp>': {s:?}")))?;
        let e: i64 = e
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
        Ok(Self::new(bigint_from_hex(m)?, e))
    }
}
