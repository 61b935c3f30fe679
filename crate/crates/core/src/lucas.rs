//! Exact k-generalized Lucas terms, repdigit recognition and 2-/5-adic
//! valuations.

use std::collections::VecDeque;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{invalid, Result};

/// A term position `L_n^{(k)}`; `n` may be negative down to `2 - k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KIndex {
    k: u32,
    n: i64,
}

impl KIndex {
    pub fn new(k: u32, n: i64) -> Result<Self> {
        if k < 2 {
            return invalid(format!("order k must be at least 2, got {k}"));
        }
        if n < 2 - k as i64 {
            return invalid(format!("index {n} is below the first seed 2-k = {}", 2 - k as i64));
        }
        Ok(KIndex { k, n })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn value(&self) -> BigUint {
        klucas_unchecked(self.k, self.n)
    }
}

/// Streams `L_n^{(k)}` for `n = 2-k, 3-k, ...`, keeping only the last `k`
/// terms and a running window sum.
#[derive(Clone, Debug)]
pub struct KLucasIter {
    window: VecDeque<BigUint>,
    sum: BigUint,
    next_index: i64,
    k: u32,
}

impl KLucasIter {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return invalid(format!("order k must be at least 2, got {k}"));
        }
        Ok(KLucasIter {
            window: VecDeque::with_capacity(k as usize),
            sum: BigUint::zero(),
            next_index: 2 - k as i64,
            k,
        })
    }

    pub fn next_index(&self) -> i64 {
        self.next_index
    }
}

impl Iterator for KLucasIter {
    type Item = (i64, BigUint);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.next_index;
        let value = match n {
            0 => BigUint::from(2u32),
            1 => BigUint::one(),
            n if n < 0 => BigUint::zero(),
            _ => self.sum.clone(),
        };
        self.sum += &value;
        self.window.push_back(value.clone());
        if self.window.len() > self.k as usize {
            let old = self.window.pop_front().expect("window is non-empty");
            self.sum -= old;
        }
        self.next_index += 1;
        Some((n, value))
    }
}

fn klucas_unchecked(k: u32, n: i64) -> BigUint {
    KLucasIter::new(k)
        .expect("validated order")
        .find(|(i, _)| *i == n)
        .map(|(_, v)| v)
        .expect("iterator is unbounded")
}

/// `L_n^{(k)}`, exactly.
pub fn klucas(k: u32, n: i64) -> Result<BigUint> {
    Ok(KIndex::new(k, n)?.value())
}

/// `L_lo^{(k)}, ..., L_hi^{(k)}`.
pub fn klucas_window(k: u32, lo: i64, hi: i64) -> Result<Vec<BigUint>> {
    KIndex::new(k, lo)?;
    if lo > hi {
        return invalid(format!("empty window {lo}..{hi}"));
    }
    Ok(KLucasIter::new(k)?
        .skip_while(|(i, _)| *i < lo)
        .take_while(|(i, _)| *i <= hi)
        .map(|(_, v)| v)
        .collect())
}

/// `L_0^{(k)}, ..., L_hi^{(k)}` (the non-negative indices only).
pub fn klucas_prefix(k: u32, hi: u32) -> Result<Vec<BigUint>> {
    klucas_window(k, 0, hi as i64)
}

/// `3 * 2^(i-2)`, the value of `L_i^{(k)}` for `2 <= i <= k`.
pub fn closed_form_small(k: u32, i: u32) -> Result<BigUint> {
    if k < 2 {
        return invalid(format!("order k must be at least 2, got {k}"));
    }
    if i < 2 || i > k {
        return invalid(format!("closed form holds for 2 <= i <= k, got i={i}, k={k}"));
    }
    Ok(BigUint::from(3u32) << (i - 2) as usize)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Repdigit {
    a: u8,
    d: u32,
    value: BigUint,
}

impl Repdigit {
    pub fn new(a: u8, d: u32) -> Result<Self> {
        if !(1..=9).contains(&a) {
            return invalid(format!("repdigit digit must be 1..9, got {a}"));
        }
        if d == 0 {
            return invalid("repdigit needs at least one digit");
        }
        Ok(Repdigit { a, d, value: repdigit_value(a, d) })
    }

    pub fn a(&self) -> u8 {
        self.a
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }
}

/// `a (10^d - 1) / 9`.
pub fn repdigit_value(a: u8, d: u32) -> BigUint {
    let ten = BigUint::from(10u32);
    (ten.pow(d) - 1u32) / 9u32 * a as u32
}

const CHUNK: u32 = 1_000_000_000;
const REPUNIT_9: u32 = 111_111_111;

/// Recognise `x` as `a (10^d - 1) / 9`, reading decimal digits nine at a time.
pub fn as_repdigit(x: &BigUint) -> Result<Option<Repdigit>> {
    if x.is_zero() {
        return invalid("repdigit test needs x >= 1");
    }
    let a = (x % 10u32).to_u8().expect("digit fits in u8");
    if a == 0 {
        return Ok(None);
    }
    let full_chunk = a as u32 * REPUNIT_9;
    let mut rest = x.clone();
    let mut d: u32 = 0;
    loop {
        let (q, r) = rest.div_rem(&BigUint::from(CHUNK));
        let r = r.to_u32().expect("chunk fits in u32");
        if q.is_zero() {
            // top chunk: must be a repdigit of 1..=9 digits
            let len = decimal_len_u32(r);
            if r != a as u32 * repunit_u32(len) {
                return Ok(None);
            }
            d += len;
            break;
        }
        if r != full_chunk {
            return Ok(None);
        }
        d += 9;
        rest = q;
    }
    Ok(Some(Repdigit { a, d, value: x.clone() }))
}

fn decimal_len_u32(mut r: u32) -> u32 {
    let mut len = 1;
    while r >= 10 {
        r /= 10;
        len += 1;
    }
    len
}

fn repunit_u32(len: u32) -> u32 {
    (0..len).fold(0, |acc, _| acc * 10 + 1)
}

/// True iff a residue modulo `10^9` can be the low nine digits of a repdigit.
pub fn is_repdigit_residue(r: u64) -> bool {
    debug_assert!(r < CHUNK as u64);
    let a = r % 10;
    if a == 0 {
        return false;
    }
    if !r.is_multiple_of(a) {
        return false;
    }
    let ones = r / a;
    let len = decimal_len_u32(ones as u32);
    ones as u32 == repunit_u32(len)
}

/// Prime for which valuations are supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValuationPrime {
    Two,
    Five,
}

impl ValuationPrime {
    pub fn from_u32(p: u32) -> Result<Self> {
        match p {
            2 => Ok(ValuationPrime::Two),
            5 => Ok(ValuationPrime::Five),
            _ => invalid(format!("valuations are only supported for p in {{2, 5}}, got {p}")),
        }
    }
}

impl fmt::Display for ValuationPrime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValuationPrime::Two => write!(f, "2"),
            ValuationPrime::Five => write!(f, "5"),
        }
    }
}

/// Largest `e` with `p^e | x`.
pub fn valuation(p: ValuationPrime, x: &BigUint) -> Result<u32> {
    if x.is_zero() {
        return invalid("valuation needs x >= 1");
    }
    Ok(match p {
        ValuationPrime::Two => x.trailing_zeros().expect("x is non-zero") as u32,
        ValuationPrime::Five => {
            let mut e = 0;
            let mut rest = x.clone();
            // strip 5^13 (fits in u32) at a time, then single fives
            let big = BigUint::from(1_220_703_125u32);
            loop {
                let (q, r) = rest.div_rem(&big);
                if !r.is_zero() {
                    break;
                }
                e += 13;
                rest = q;
            }
            loop {
                let (q, r) = rest.div_rem(&BigUint::from(5u32));
                if !r.is_zero() {
                    break;
                }
                e += 1;
                rest = q;
            }
            e
        }
    })
}

/// A tuple `(k, n, m, l, a, d)` claimed to satisfy
/// `L_n L_m L_l = a (10^d - 1) / 9` with `n >= m >= l >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolutionRecord {
    pub k: u32,
    pub n: u32,
    pub m: u32,
    pub l: u32,
    pub a: u8,
    pub d: u32,
}

impl SolutionRecord {
    pub const fn new(k: u32, n: u32, m: u32, l: u32, a: u8, d: u32) -> Self {
        SolutionRecord { k, n, m, l, a, d }
    }

    pub fn product(&self) -> Result<BigUint> {
        let terms = klucas_prefix(self.k, self.n)?;
        Ok(&terms[self.n as usize] * &terms[self.m as usize] * &terms[self.l as usize])
    }
}

impl fmt::Display for SolutionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{},{},{})", self.k, self.n, self.m, self.l, self.a, self.d)
    }
}

/// Exact check of a claimed solution; false for records outside the
/// admissible ranges.
pub fn verify_solution(r: &SolutionRecord) -> bool {
    if r.k < 2 || !(r.n >= r.m && r.m >= r.l) || !(1..=9).contains(&r.a) || r.d < 2 {
        return false;
    }
    match r.product() {
        Ok(p) => p == repdigit_value(r.a, r.d),
        Err(_) => false,
    }
}

/// The thirteen published tuples, ordered lexicographically.
pub const PUBLISHED_SOLUTIONS: [SolutionRecord; 13] = [
    SolutionRecord::new(2, 5, 0, 0, 4, 2),
    SolutionRecord::new(2, 5, 1, 0, 2, 2),
    SolutionRecord::new(2, 5, 1, 1, 1, 2),
    SolutionRecord::new(2, 5, 2, 0, 6, 2),
    SolutionRecord::new(2, 5, 2, 1, 3, 2),
    SolutionRecord::new(2, 5, 2, 2, 9, 2),
    SolutionRecord::new(2, 5, 3, 0, 8, 2),
    SolutionRecord::new(2, 5, 3, 1, 4, 2),
    SolutionRecord::new(2, 5, 4, 1, 7, 2),
    SolutionRecord::new(4, 5, 0, 0, 8, 2),
    SolutionRecord::new(4, 5, 1, 0, 4, 2),
    SolutionRecord::new(4, 5, 1, 1, 2, 2),
    SolutionRecord::new(4, 5, 2, 1, 6, 2),
];
