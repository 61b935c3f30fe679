//! Certified continued fractions of real targets given as ball providers.
//!
//! A ball `[lo, hi]` with dyadic endpoints is expanded by running Euclid on
//! both endpoints in lockstep; quotients are kept while they agree and both
//! endpoints still have a non-terminal remainder. Every real in the ball then
//! shares that prefix. On top of this, each prefix is computed at two
//! precisions `P` and `2P` and only the common part is accepted.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::cert::{decimal_digits, CertReal, Ctx, DEFAULT_PRECISION, MAX_DOUBLINGS};
use crate::error::{invalid, Error, Result};
use crate::root::dominant_root;

/// Guard digits added on top of `2·digits(Q)` when denominators up to `Q`
/// are requested.
pub const CF_GUARD_DIGITS: u32 = 30;

/// A real number that can be delivered as a ball at any precision.
pub trait CfTarget: Send + Sync {
    fn describe(&self) -> String;
    fn eval(&self, ctx: &Ctx) -> Result<CertReal>;
}

/// `log α(k) / log 10`.
#[derive(Clone, Copy, Debug)]
pub struct LogAlphaRatio {
    pub k: u32,
}

impl CfTarget for LogAlphaRatio {
    fn describe(&self) -> String {
        format!("log alpha({}) / log 10", self.k)
    }

    fn eval(&self, ctx: &Ctx) -> Result<CertReal> {
        let root = dominant_root(self.k, ctx.digits())?;
        ctx.ln(root.alpha())?.div(&ctx.ln10())
    }
}

/// `log 2 / log 10`.
#[derive(Clone, Copy, Debug)]
pub struct LogTwoTen;

impl CfTarget for LogTwoTen {
    fn describe(&self) -> String {
        "log 2 / log 10".to_string()
    }

    fn eval(&self, ctx: &Ctx) -> Result<CertReal> {
        ctx.ln2().div(&ctx.ln10())
    }
}

/// A target defined by a closure.
pub struct FnTarget<F> {
    name: String,
    f: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&Ctx) -> Result<CertReal> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnTarget { name: name.into(), f }
    }
}

impl<F> CfTarget for FnTarget<F>
where
    F: Fn(&Ctx) -> Result<CertReal> + Send + Sync,
{
    fn describe(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, ctx: &Ctx) -> Result<CertReal> {
        (self.f)(ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub index: usize,
    pub p: BigInt,
    pub q: BigInt,
}

impl fmt::Display for Convergent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p_{i}/q_{i} = {}/{}", self.p, self.q, i = self.index)
    }
}

#[derive(Clone, Debug)]
pub struct CFExpansion {
    pub target: String,
    pub partial_quotients: Vec<BigInt>,
    pub certified_len: usize,
}

impl CFExpansion {
    pub fn len(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partial_quotients.is_empty()
    }
}

/// Quotients shared by every real in `x`.
pub fn interval_prefix(x: &CertReal) -> Vec<BigInt> {
    let rad = BigInt::from(x.rad_raw().clone());
    let den = BigInt::one() << x.bits() as usize;
    let mut a = (x.mid_raw() - &rad, den.clone());
    let mut b = (x.mid_raw() + &rad, den);
    let mut out = Vec::new();
    loop {
        let (qa, ra) = a.0.div_mod_floor(&a.1);
        let (qb, rb) = b.0.div_mod_floor(&b.1);
        if qa != qb || ra.is_zero() || rb.is_zero() {
            break;
        }
        out.push(qa);
        a = (a.1, ra);
        b = (b.1, rb);
    }
    out
}

fn common_prefix(a: &[BigInt], b: &[BigInt]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Convergents `p_i/q_i` of a quotient list.
pub fn convergents_of(quotients: &[BigInt]) -> Vec<Convergent> {
    let mut out = Vec::with_capacity(quotients.len());
    let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
    let (mut p1, mut q1) = (BigInt::zero(), BigInt::one());
    for (i, a) in quotients.iter().enumerate() {
        let p = a * &p0 + &p1;
        let q = a * &q0 + &q1;
        p1 = std::mem::replace(&mut p0, p.clone());
        q1 = std::mem::replace(&mut q0, q.clone());
        out.push(Convergent { index: i, p, q });
    }
    out
}

pub fn convergents(cf: &CFExpansion) -> Vec<Convergent> {
    convergents_of(&cf.partial_quotients[..cf.certified_len])
}

/// Lazily extended, dual-precision certified expansion of a target.
pub struct CfStream {
    target: Arc<dyn CfTarget>,
    digits: u32,
    evaluated: bool,
    quotients: Vec<BigInt>,
    convs: Vec<Convergent>,
}

impl CfStream {
    pub fn new(target: Arc<dyn CfTarget>, start_digits: u32) -> Self {
        CfStream {
            target,
            digits: start_digits.max(30),
            evaluated: false,
            quotients: Vec::new(),
            convs: Vec::new(),
        }
    }

    pub fn target(&self) -> &Arc<dyn CfTarget> {
        &self.target
    }

    /// Digits at which the current prefix was certified.
    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn certified_len(&self) -> usize {
        self.quotients.len()
    }

    pub fn quotients(&self) -> &[BigInt] {
        &self.quotients
    }

    /// Make sure the next refinement runs at `digits` or more.
    pub fn require_digits(&mut self, digits: u32) {
        if digits > self.digits {
            self.digits = digits;
            self.evaluated = false;
        }
    }

    /// Certified prefix at `P` and `2P` digits.
    fn dual_prefix(&self, digits: u32) -> Result<Vec<BigInt>> {
        let lo = interval_prefix(&self.target.eval(&Ctx::new(digits))?);
        let hi = interval_prefix(&self.target.eval(&Ctx::new(2 * digits))?);
        let n = common_prefix(&lo, &hi);
        if n < lo.len().min(hi.len()) {
            return Err(Error::ContractViolation(format!(
                "expansions of {} at {digits} and {} digits disagree at index {n}",
                self.target.describe(),
                2 * digits
            )));
        }
        Ok(lo[..n].to_vec())
    }

    fn refine(&mut self) -> Result<()> {
        let before = self.quotients.len();
        for _ in 0..=MAX_DOUBLINGS {
            if self.evaluated {
                self.digits *= 2;
            }
            self.evaluated = true;
            let prefix = self.dual_prefix(self.digits)?;
            if common_prefix(&prefix, &self.quotients) < prefix.len().min(self.quotients.len()) {
                return Err(Error::ContractViolation(format!(
                    "refined expansion of {} contradicts the certified prefix",
                    self.target.describe()
                )));
            }
            if prefix.len() > before {
                self.quotients = prefix;
                self.convs = convergents_of(&self.quotients);
                return Ok(());
            }
        }
        Err(Error::PrecisionFault(format!(
            "continued fraction of {} stalled at {before} quotients ({} digits)",
            self.target.describe(),
            self.digits
        )))
    }

    /// Extend until at least `n` quotients are certified.
    pub fn ensure_len(&mut self, n: usize) -> Result<()> {
        while self.quotients.len() < n {
            self.refine()?;
        }
        Ok(())
    }

    pub fn quotient(&mut self, i: usize) -> Result<&BigInt> {
        self.ensure_len(i + 1)?;
        Ok(&self.quotients[i])
    }

    pub fn convergent(&mut self, i: usize) -> Result<&Convergent> {
        self.ensure_len(i + 1)?;
        Ok(&self.convs[i])
    }

    /// Least-index convergent with `q > bound`.
    pub fn first_q_exceeding(&mut self, bound: &BigUint) -> Result<Convergent> {
        if bound.is_zero() {
            return invalid("bound must be at least 1");
        }
        self.require_digits(2 * decimal_digits(bound) + CF_GUARD_DIGITS);
        let bound = BigInt::from(bound.clone());
        let mut i = 0;
        loop {
            let c = self.convergent(i)?;
            if c.q > bound {
                return Ok(c.clone());
            }
            i += 1;
        }
    }

    /// Snapshot of the certified expansion.
    pub fn expansion(&self) -> CFExpansion {
        CFExpansion {
            target: self.target.describe(),
            partial_quotients: self.quotients.clone(),
            certified_len: self.quotients.len(),
        }
    }
}

/// First `count` certified quotients of `target`.
pub fn cf_expand(target: Arc<dyn CfTarget>, count: usize) -> Result<CFExpansion> {
    let mut s = CfStream::new(target, DEFAULT_PRECISION);
    s.ensure_len(count)?;
    Ok(s.expansion())
}

/// `max(a_0, ..., a_upto)`.
pub fn max_partial_quotient(cf: &CFExpansion, upto: usize) -> Result<BigInt> {
    if upto >= cf.certified_len {
        return invalid(format!(
            "index {upto} is beyond the certified prefix of length {}",
            cf.certified_len
        ));
    }
    Ok(cf.partial_quotients[..=upto].iter().max().cloned().expect("non-empty prefix"))
}

/// Outcome of the convergent-quality fallback.
#[derive(Clone, Debug)]
pub struct LegendreBound {
    /// Last index with `q_i <= window`.
    pub last_index: usize,
    /// `max(a_0, ..., a_{last_index + 1})`.
    pub max_quotient: BigInt,
    /// `log(max_a · c · window / log 10) / log B`.
    pub exponent_real: CertReal,
    /// The same with `max_a + 2`, which is what the convergent gap gives.
    pub exponent_real_strict: CertReal,
    /// Largest exponent compatible with the strict bound.
    pub exponent_max: BigInt,
}

/// Bound on the exponent `e` in `|τ - v/u| < c / (u B^e log 10)` for
/// `u <= window`.
///
/// Either `v/u` is a convergent `p_i/q_i` with `q_i <= window`, and then
/// `|τ - p_i/q_i| > 1/((a_{i+1} + 2) q_i^2)`, or the approximation is worse
/// than `1/(2u^2)`. Both are covered by
/// `B^e < (max_a + 2) · c · window / log 10`.
pub fn legendre_bound_step(
    stream: &mut CfStream,
    window: &BigUint,
    coefficient: &CertReal,
    log_b: &CertReal,
    ctx: &Ctx,
) -> Result<LegendreBound> {
    if !coefficient.is_positive() {
        return invalid("Legendre coefficient must be positive");
    }
    if !log_b.is_positive() {
        return invalid("log B must be positive");
    }
    let first_beyond = stream.first_q_exceeding(window)?;
    let last_index = first_beyond.index.saturating_sub(1);
    stream.ensure_len(last_index + 2)?;
    let max_quotient = stream.quotients()[..=last_index + 1]
        .iter()
        .max()
        .cloned()
        .expect("non-empty prefix");
    let max_a = if max_quotient.sign() == Sign::Plus { max_quotient.clone() } else { BigInt::one() };
    let scale = coefficient.mul(&ctx.ubig(window)).div(&ctx.ln10())?;
    let exponent_real = ctx.ln(&ctx.big(&max_a).mul(&scale))?.div(log_b)?;
    let exponent_real_strict = ctx.ln(&ctx.big(&(&max_a + 2)).mul(&scale))?.div(log_b)?;
    // e < x  =>  e <= ceil(x) - 1
    let exponent_max = exponent_real_strict.ceil_hi() - 1;
    Ok(LegendreBound { last_index, max_quotient, exponent_real, exponent_real_strict, exponent_max })
}

/// `i<TAB>a_i<TAB>p_i<TAB>q_i`, one line per index.
pub fn dump(cf: &CFExpansion) -> String {
    let mut out = String::new();
    for (c, a) in convergents(cf).iter().zip(&cf.partial_quotients) {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", c.index, a, c.p, c.q));
    }
    out
}
