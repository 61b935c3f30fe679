//! Midpoint–radius ("ball") arithmetic over binary fixed point.
//!
//! A [`CertReal`] stores an integer midpoint `m`, an integer radius `r` and a
//! scale `s`; the represented exact value is guaranteed to lie in
//! `[(m - r) / 2^s, (m + r) / 2^s]`. Every operation rounds its midpoint and
//! widens the radius by the worst-case rounding error, so comparisons either
//! come out certified or report that they are undecidable.
//!
//! Transcendental functions (`ln`, `ln 2`, `ln 10`) live on [`Ctx`], a
//! per-computation precision context. There is no global rounding state.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Extra decimal digits carried beyond every requested precision.
pub const GUARD_DIGITS: u32 = 10;

/// Default starting precision (decimal digits).
pub const DEFAULT_PRECISION: u32 = 64;

/// Maximum number of precision doublings before a [`Error::PrecisionFault`].
pub const MAX_DOUBLINGS: u32 = 8;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Binary scale used for a working precision of `digits` decimal digits.
pub fn digits_to_bits(digits: u32) -> u32 {
    ((digits + GUARD_DIGITS) as f64 * LOG2_10).ceil() as u32
}

/// Number of decimal digits of a positive integer.
pub fn decimal_digits(n: &BigUint) -> u32 {
    if n.is_zero() {
        return 1;
    }
    n.to_str_radix(10).len() as u32
}

/// Parse a non-negative integer written as `123`, `6e246` or `2.94e90`.
pub fn parse_decimal_uint(s: &str) -> Result<BigUint> {
    let bad = || Error::InvalidInput(format!("not a decimal integer: {s:?}"));
    let (mant, exp) = match s.trim().split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<u32>().map_err(|_| bad())?),
        None => (s.trim(), 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let frac = frac.trim_end_matches('0');
    let shift = exp.checked_sub(frac.len() as u32).ok_or_else(bad)?;
    let digits: BigUint = format!("{int}{frac}").parse().map_err(|_| bad())?;
    Ok(digits * BigUint::from(10u32).pow(shift))
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

/// `ceil(x / 2^k)` for non-negative `x`.
fn ceil_shift(x: &BigUint, k: u32) -> BigUint {
    if k == 0 {
        return x.clone();
    }
    let q: BigUint = x >> k as usize;
    if (&q << k as usize) == *x {
        q
    } else {
        q + 1u32
    }
}

/// Round-to-nearest `x / 2^k`; returns the quotient and whether it was inexact.
fn round_shift(x: &BigInt, k: u32) -> (BigInt, bool) {
    if k == 0 {
        return (x.clone(), false);
    }
    let d = pow2(k);
    let (q, r) = x.div_mod_floor(&d);
    if r.is_zero() {
        return (q, false);
    }
    let twice: BigInt = &r << 1usize;
    if twice >= d {
        (q + 1, true)
    } else {
        (q, true)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertReal {
    mid: BigInt,
    rad: BigUint,
    bits: u32,
}

impl CertReal {
    pub fn from_parts(mid: BigInt, rad: BigUint, bits: u32) -> Self {
        CertReal { mid, rad, bits }
    }

    pub fn zero(bits: u32) -> Self {
        CertReal { mid: BigInt::zero(), rad: BigUint::zero(), bits }
    }

    pub fn from_int(v: &BigInt, bits: u32) -> Self {
        CertReal { mid: v << bits as usize, rad: BigUint::zero(), bits }
    }

    pub fn from_i64(v: i64, bits: u32) -> Self {
        Self::from_int(&BigInt::from(v), bits)
    }

    pub fn from_uint(v: &BigUint, bits: u32) -> Self {
        Self::from_int(&BigInt::from(v.clone()), bits)
    }

    /// `num / den`, rounded with a one-ulp radius when inexact.
    pub fn from_ratio(num: &BigInt, den: &BigInt, bits: u32) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let scaled: BigInt = num << bits as usize;
        let (q, r) = scaled.div_rem(den);
        let rad = if r.is_zero() { BigUint::zero() } else { BigUint::one() };
        CertReal { mid: q, rad, bits }
    }

    /// Exact dyadic rational `v / 2^shift`.
    pub fn dyadic(v: &BigInt, shift: u32, bits: u32) -> Self {
        Self::from_ratio(v, &pow2(shift), bits)
    }

    /// Parse a decimal literal such as `"1.63e14"` or `"-0.25"` into a ball.
    pub fn from_decimal(s: &str, bits: u32) -> Result<Self> {
        let (num, den) = parse_decimal(s)?;
        Ok(Self::from_ratio(&num, &den, bits))
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn mid_raw(&self) -> &BigInt {
        &self.mid
    }

    pub fn rad_raw(&self) -> &BigUint {
        &self.rad
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    /// Re-express at a different scale, rounding outward when coarsening.
    pub fn rescale(&self, bits: u32) -> Self {
        match bits.cmp(&self.bits) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let k = (bits - self.bits) as usize;
                CertReal { mid: &self.mid << k, rad: &self.rad << k, bits }
            }
            Ordering::Less => {
                let k = self.bits - bits;
                let (mid, inexact) = round_shift(&self.mid, k);
                let mut rad = ceil_shift(&self.rad, k);
                if inexact {
                    rad += 1u32;
                }
                CertReal { mid, rad, bits }
            }
        }
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        let bits = self.bits.min(other.bits);
        (self.rescale(bits), other.rescale(bits))
    }

    pub fn neg(&self) -> Self {
        CertReal { mid: -&self.mid, rad: self.rad.clone(), bits: self.bits }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.bits == other.bits {
            return CertReal {
                mid: &self.mid + &other.mid,
                rad: &self.rad + &other.rad,
                bits: self.bits,
            };
        }
        let (a, b) = self.aligned(other);
        a.add(&b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.bits != other.bits {
            let (a, b) = self.aligned(other);
            return a.mul(&b);
        }
        let bits = self.bits;
        let prod = &self.mid * &other.mid;
        let (mid, inexact) = round_shift(&prod, bits);
        let err = self.mid.magnitude() * &other.rad
            + other.mid.magnitude() * &self.rad
            + &self.rad * &other.rad;
        let mut rad = ceil_shift(&err, bits);
        if inexact {
            rad += 1u32;
        }
        CertReal { mid, rad, bits }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        if self.bits != other.bits {
            let (a, b) = self.aligned(other);
            return a.div(&b);
        }
        let bits = self.bits;
        let bm = other.mid.magnitude();
        if *bm <= other.rad {
            return Err(Error::PrecisionFault("division by a ball containing zero".into()));
        }
        let num: BigInt = &self.mid << bits as usize;
        let (mid, r) = num.div_rem(&other.mid);
        let n = self.mid.magnitude() * &other.rad + bm * &self.rad;
        let mut rad = BigUint::zero();
        if !n.is_zero() {
            let d = bm * (bm - &other.rad);
            let scaled: BigUint = n << bits as usize;
            let (q, rr) = scaled.div_rem(&d);
            rad = if rr.is_zero() { q } else { q + 1u32 };
        }
        if !r.is_zero() {
            rad += 1u32;
        }
        Ok(CertReal { mid, rad, bits })
    }

    pub fn mul_int(&self, n: &BigInt) -> Self {
        CertReal { mid: &self.mid * n, rad: &self.rad * n.magnitude(), bits: self.bits }
    }

    pub fn mul_i64(&self, n: i64) -> Self {
        self.mul_int(&BigInt::from(n))
    }

    pub fn div_int(&self, n: &BigInt) -> Self {
        assert!(!n.is_zero(), "division by zero");
        let (mid, r) = self.mid.div_rem(n);
        let mut rad = ceil_shift_div(&self.rad, n.magnitude());
        if !r.is_zero() {
            rad += 1u32;
        }
        CertReal { mid, rad, bits: self.bits }
    }

    pub fn powi(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = CertReal::from_i64(1, self.bits);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.is_exact() && self.mid.is_zero() {
            return Ok(self.clone());
        }
        let lo = &self.mid - BigInt::from(self.rad.clone());
        if lo.sign() != Sign::Plus {
            return Err(Error::PrecisionFault("sqrt of a ball reaching zero".into()));
        }
        let bits = self.bits as usize;
        let scaled: BigInt = &self.mid << bits;
        let mid = scaled.sqrt();
        let exact = &mid * &mid == scaled;
        let s_lo: BigInt = (lo << bits).sqrt();
        let mut rad = BigUint::zero();
        if !self.rad.is_zero() {
            let num: BigUint = &self.rad << bits;
            rad = ceil_shift_div(&num, s_lo.magnitude());
        }
        if !exact {
            rad += 1u32;
        }
        Ok(CertReal { mid, rad, bits: self.bits })
    }

    fn lo_scaled(&self) -> BigInt {
        &self.mid - BigInt::from(self.rad.clone())
    }

    fn hi_scaled(&self) -> BigInt {
        &self.mid + BigInt::from(self.rad.clone())
    }

    /// Certified sign: `Some(Equal)` only for an exact zero.
    pub fn sign(&self) -> Option<Ordering> {
        if self.rad.is_zero() && self.mid.is_zero() {
            return Some(Ordering::Equal);
        }
        if self.lo_scaled().sign() == Sign::Plus {
            Some(Ordering::Greater)
        } else if self.hi_scaled().sign() == Sign::Minus {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    pub fn cmp_cert(&self, other: &Self) -> Option<Ordering> {
        self.sub(other).sign()
    }

    /// `Some(true)` iff certified `self < other`, `Some(false)` iff certified `self >= other`.
    pub fn lt(&self, other: &Self) -> Option<bool> {
        let d = self.sub(other);
        if d.hi_scaled().sign() == Sign::Minus {
            Some(true)
        } else if d.lo_scaled().sign() != Sign::Minus {
            Some(false)
        } else {
            None
        }
    }

    /// True iff every point of `inner` lies in `self`.
    pub fn encloses(&self, inner: &Self) -> bool {
        let bits = self.bits.max(inner.bits);
        let (a, b) = (self.rescale(bits), inner.rescale(bits));
        a.lo_scaled() <= b.lo_scaled() && b.hi_scaled() <= a.hi_scaled()
    }

    /// True iff the two balls share at least one point.
    pub fn overlaps(&self, other: &Self) -> bool {
        let bits = self.bits.max(other.bits);
        let (a, b) = (self.rescale(bits), other.rescale(bits));
        a.lo_scaled() <= b.hi_scaled() && b.lo_scaled() <= a.hi_scaled()
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Some(Ordering::Greater)
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Some(Ordering::Less)
    }

    pub fn contains_zero(&self) -> bool {
        self.lo_scaled().sign() != Sign::Plus && self.hi_scaled().sign() != Sign::Minus
    }

    pub fn floor_lo(&self) -> BigInt {
        self.lo_scaled().div_floor(&pow2(self.bits))
    }

    pub fn floor_hi(&self) -> BigInt {
        self.hi_scaled().div_floor(&pow2(self.bits))
    }

    pub fn ceil_hi(&self) -> BigInt {
        let d = pow2(self.bits);
        let (q, r) = self.hi_scaled().div_mod_floor(&d);
        if r.is_zero() {
            q
        } else {
            q + 1
        }
    }

    /// Certified floor, if the ball does not straddle an integer.
    pub fn floor(&self) -> Option<BigInt> {
        let lo = self.floor_lo();
        if lo == self.floor_hi() {
            Some(lo)
        } else {
            None
        }
    }

    /// Nearest integer to the midpoint (ties away from zero).
    pub fn round_mid(&self) -> BigInt {
        round_shift(&self.mid, self.bits).0
    }

    pub fn from_interval_scaled(lo: &BigInt, hi: &BigInt, bits: u32) -> Self {
        debug_assert!(lo <= hi);
        let sum = lo + hi;
        let mid = sum.div_floor(&BigInt::from(2));
        let rad = (hi - &mid).magnitude().clone();
        CertReal { mid, rad, bits }
    }

    pub fn abs(&self) -> Self {
        match self.sign() {
            Some(Ordering::Less) => self.neg(),
            Some(_) => self.clone(),
            None => {
                let lo = self.lo_scaled();
                let hi = self.hi_scaled();
                let top = lo.abs().max(hi.abs());
                Self::from_interval_scaled(&BigInt::zero(), &top, self.bits)
            }
        }
    }

    /// Certified distance to the nearest integer, `‖x‖ ∈ [0, 1/2]`.
    ///
    /// `‖·‖` is 1-Lipschitz, so the midpoint distance widened by the radius
    /// and clipped to `[0, 1/2]` encloses every value in the ball.
    pub fn dist_to_nearest_int(&self) -> Self {
        let one = pow2(self.bits);
        let half: BigInt = &one >> 1usize;
        let frac = self.mid.mod_floor(&one);
        let d = if frac > half { &one - &frac } else { frac };
        let rad = BigInt::from(self.rad.clone());
        let lo = (&d - &rad).max(BigInt::zero());
        let hi = (&d + &rad).min(half);
        Self::from_interval_scaled(&lo, &hi, self.bits)
    }

    /// Upper bound as an `f64` approximation (reporting only).
    pub fn to_f64(&self) -> f64 {
        scaled_to_f64(&self.mid, self.bits)
    }

    pub fn hi_f64(&self) -> f64 {
        scaled_to_f64(&self.hi_scaled(), self.bits)
    }

    pub fn lo_f64(&self) -> f64 {
        scaled_to_f64(&self.lo_scaled(), self.bits)
    }

    /// Radius as an `f64` in real units.
    pub fn radius_f64(&self) -> f64 {
        scaled_to_f64(&BigInt::from(self.rad.clone()), self.bits)
    }

    /// Midpoint in scientific notation with `sig` significant digits.
    pub fn to_sci(&self, sig: u32) -> String {
        sci_string(&self.mid, self.bits, sig)
    }

    /// Upper endpoint in scientific notation.
    pub fn hi_sci(&self, sig: u32) -> String {
        sci_string(&self.hi_scaled(), self.bits, sig)
    }
}

fn ceil_shift_div(x: &BigUint, d: &BigUint) -> BigUint {
    let (q, r) = x.div_rem(d);
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

fn scaled_to_f64(v: &BigInt, bits: u32) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let len = v.bits() as i64;
    let excess = (len - 60).max(0);
    let top = (v >> excess as usize).to_f64().unwrap_or(f64::NAN);
    let e = excess - bits as i64;
    top * 2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

fn sci_string(v: &BigInt, bits: u32, sig: u32) -> String {
    if v.is_zero() {
        return "0".to_string();
    }
    let sig = sig.max(1);
    let neg = v.sign() == Sign::Minus;
    let mag = BigInt::from(v.magnitude().clone());
    let len = mag.bits() as f64;
    let mut e10 = ((len - 1.0 - bits as f64) * std::f64::consts::LOG10_2).floor() as i64;
    let den = pow2(bits);
    let lower = BigInt::from(10u32).pow(sig - 1);
    let upper = BigInt::from(10u32).pow(sig);
    let digits = loop {
        let p = sig as i64 - 1 - e10;
        let (num, d) = if p >= 0 {
            (&mag * BigInt::from(10u32).pow(p as u32), den.clone())
        } else {
            (mag.clone(), &den * BigInt::from(10u32).pow((-p) as u32))
        };
        let (q, r) = num.div_rem(&d);
        let q = if (&r << 1usize) >= d { q + 1 } else { q };
        if q >= upper {
            e10 += 1;
        } else if q < lower {
            e10 -= 1;
        } else {
            break q.to_string();
        }
    };
    let (head, tail) = digits.split_at(1);
    let tail = tail.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(head);
    if !tail.is_empty() {
        out.push('.');
        out.push_str(tail);
    }
    if e10 != 0 {
        out.push_str(&format!("e{}", e10));
    }
    out
}

fn parse_decimal(s: &str) -> Result<(BigInt, BigInt)> {
    let bad = || Error::InvalidInput(format!("not a decimal literal: {s:?}"));
    let s = s.trim();
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut num: BigInt = all.parse().map_err(|_| bad())?;
    if neg {
        num = -num;
    }
    let e = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    if e >= 0 {
        Ok((num * ten.pow(e as u32), BigInt::one()))
    } else {
        Ok((num, ten.pow((-e) as u32)))
    }
}

impl fmt::Display for CertReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", self.to_sci(20), sci_string(&BigInt::from(self.rad.clone()), self.bits, 3))
    }
}

/// Per-computation precision context.
#[derive(Clone, Debug)]
pub struct Ctx {
    digits: u32,
    bits: u32,
    work: u32,
    ln2: BigInt,
    ln2_err: u64,
}

const WORK_GUARD_BITS: u32 = 96;

impl Ctx {
    pub fn new(digits: u32) -> Self {
        let bits = digits_to_bits(digits);
        let work = bits + WORK_GUARD_BITS;
        let third = (BigInt::one() << work as usize) / 3;
        let (s, err) = atanh_series(&third, work);
        Ctx { digits, bits, work, ln2: s << 1usize, ln2_err: 2 * err + 2 }
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Context at twice the precision.
    pub fn doubled(&self) -> Self {
        Ctx::new(self.digits * 2)
    }

    pub fn int(&self, v: i64) -> CertReal {
        CertReal::from_i64(v, self.bits)
    }

    pub fn big(&self, v: &BigInt) -> CertReal {
        CertReal::from_int(v, self.bits)
    }

    pub fn ubig(&self, v: &BigUint) -> CertReal {
        CertReal::from_uint(v, self.bits)
    }

    pub fn ratio(&self, num: i64, den: i64) -> CertReal {
        CertReal::from_ratio(&BigInt::from(num), &BigInt::from(den), self.bits)
    }

    /// Decimal literal; panics on malformed input, for internal constants.
    pub fn dec(&self, s: &str) -> CertReal {
        CertReal::from_decimal(s, self.bits).expect("malformed decimal constant")
    }

    pub fn ln2(&self) -> CertReal {
        self.finish(&self.ln2, self.ln2_err)
    }

    pub fn ln10(&self) -> CertReal {
        self.ln_uint(&BigUint::from(10u32))
    }

    /// Natural log of a positive integer.
    pub fn ln_uint(&self, n: &BigUint) -> CertReal {
        assert!(!n.is_zero(), "ln of zero");
        let (v, err) = self.ln_fixed(n, 0);
        self.finish(&v, err)
    }

    pub fn ln_u64(&self, n: u64) -> CertReal {
        self.ln_uint(&BigUint::from(n))
    }

    /// Natural log of a ball whose lower endpoint is certified positive.
    pub fn ln(&self, x: &CertReal) -> Result<CertReal> {
        let x = x.rescale(self.bits);
        let lo = x.lo_scaled();
        if lo.sign() != Sign::Plus {
            return Err(Error::PrecisionFault("ln of a ball reaching zero or below".into()));
        }
        let (v, err) = self.ln_fixed(x.mid.magnitude(), self.bits as i64);
        let mut out = self.finish(&v, err);
        if !x.rad.is_zero() {
            let num: BigUint = &x.rad << self.bits as usize;
            out.rad += ceil_shift_div(&num, lo.magnitude());
        }
        Ok(out)
    }

    fn finish(&self, v: &BigInt, err: u64) -> CertReal {
        let k = self.work - self.bits;
        let (mid, _) = round_shift(v, k);
        let rad = ceil_shift(&BigUint::from(err), k) + 1u32;
        CertReal { mid, rad, bits: self.bits }
    }

    /// `ln(m / 2^scale)` at the working scale, plus an error bound in working ulps.
    fn ln_fixed(&self, m: &BigUint, scale: i64) -> (BigInt, u64) {
        let work = self.work as i64;
        let mut e = m.bits() as i64 - 1;
        let mut err: u64 = 0;
        let mut y: BigInt = if work >= e {
            BigInt::from(m.clone()) << (work - e) as usize
        } else {
            err += 1;
            BigInt::from(m.clone()) >> (e - work) as usize
        };
        let one = pow2(self.work);
        let three_halves: BigInt = (&one * 3) >> 1usize;
        if y >= three_halves {
            e += 1;
            y >>= 1usize;
            err += 1;
        }
        let num: BigInt = (&y - &one) << self.work as usize;
        let z = num / (&y + &one);
        let neg = z.sign() == Sign::Minus;
        let (mut s, serr) = atanh_series(&BigInt::from(z.magnitude().clone()), self.work);
        if neg {
            s = -s;
        }
        let k = e - scale;
        let v = (s << 1usize) + &self.ln2 * BigInt::from(k);
        let total = err * 2 + 2 * serr + 4 + k.unsigned_abs() * self.ln2_err;
        (v, total)
    }
}

/// `atanh(z)` for `0 <= z <= 1/3`, fixed point at scale `work`.
fn atanh_series(z: &BigInt, work: u32) -> (BigInt, u64) {
    debug_assert!(z.sign() != Sign::Minus);
    let w = work as usize;
    let z2: BigInt = (z * z) >> w;
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut i: u64 = 1;
    loop {
        term = (&term * &z2) >> w;
        if term.is_zero() {
            break;
        }
        sum += &term / BigInt::from(2 * i + 1);
        i += 1;
    }
    (sum, 6 * i + 8)
}
