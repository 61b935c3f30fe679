//! The Baker–Davenport reduction: given `0 < |uτ - v + μ| < A B^-w` with
//! `u <= M`, a convergent `p/q` of `τ` with `q > 6M` and
//! `ε = ‖μq‖ - M‖τq‖ > 0` rule out every `w >= log(Aq/ε)/log B`.
//!
//! Besides the single-instance engine this module runs the three per-`k`
//! campaigns over the digit `a` and the small indices `l, m`, and the two
//! rounds that push the bound on `k` below 650.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bounds::{bound_n, certified_ceil};
use crate::cert::{decimal_digits, parse_decimal_uint, CertReal, Ctx, DEFAULT_PRECISION, MAX_DOUBLINGS};
use crate::contfrac::{legendre_bound_step, CfStream, CfTarget, Convergent, FnTarget, LegendreBound, LogAlphaRatio, LogTwoTen};
use crate::error::{invalid, Error, Result};
use crate::lucas::{klucas_prefix, valuation, ValuationPrime};
use crate::root::dominant_root;

/// A real number deliverable at any precision.
pub type Real = Arc<dyn CfTarget>;

/// Convergent advances allowed before a reduction is declared failed.
pub const MAX_ADVANCE: usize = 400;

/// Digits added on top of `digits(q) + digits(M)` for one ε evaluation.
const CELL_GUARD_DIGITS: u32 = 40;

#[derive(Clone)]
pub struct ReductionInstance {
    pub tau: Real,
    pub mu: Real,
    pub m: BigUint,
    pub a: Real,
    pub b: Real,
    pub label: String,
}

impl ReductionInstance {
    pub fn new(tau: Real, mu: Real, m: BigUint, a: Real, b: Real, label: impl Into<String>) -> Result<Self> {
        if m.is_zero() {
            return invalid("reduction needs M >= 1");
        }
        let ctx = Ctx::new(DEFAULT_PRECISION);
        if !a.eval(&ctx)?.is_positive() {
            return invalid("reduction needs A > 0");
        }
        if ctx.int(1).lt(&b.eval(&ctx)?) != Some(true) {
            return invalid("reduction needs B > 1");
        }
        Ok(ReductionInstance { tau, mu, m, a, b, label: label.into() })
    }
}

impl fmt::Debug for ReductionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReductionInstance")
            .field("tau", &self.tau.describe())
            .field("mu", &self.mu.describe())
            .field("m", &self.m)
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Degenerate,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Degenerate => "degenerate",
            Status::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReductionOutcome {
    pub label: String,
    pub convergent_index: usize,
    pub q: BigInt,
    pub epsilon: CertReal,
    /// `log(Aq/ε)/log B`, present when `status` is ok.
    pub w_real: Option<CertReal>,
    /// `⌈w_real⌉`; every solution has `w < w_bound`.
    pub w_bound: Option<BigInt>,
    pub status: Status,
    pub advances: usize,
    pub digits: u32,
}

/// `‖x‖`, the distance to the nearest integer.
pub fn dist_to_nearest_int(x: &CertReal) -> CertReal {
    x.dist_to_nearest_int()
}

fn cell_digits(q: &BigInt, m: &BigUint) -> u32 {
    decimal_digits(q.magnitude()) + decimal_digits(m) + CELL_GUARD_DIGITS
}

/// `(ε, ‖μq‖)`.
fn epsilon(mu: &CertReal, tau: &CertReal, q: &BigInt, m: &BigUint) -> (CertReal, CertReal) {
    let dist_mu = mu.mul_int(q).dist_to_nearest_int();
    let dist_tau = tau.mul_int(q).dist_to_nearest_int();
    let eps = dist_mu.sub(&dist_tau.mul_int(&BigInt::from(m.clone())));
    (eps, dist_mu)
}

enum Verdict {
    Ok(CertReal, BigInt),
    Degenerate,
    Failed,
    Undecided,
}

fn degenerate_floor(ctx: &Ctx) -> CertReal {
    ctx.dec(&format!("1e-{}", ctx.digits() / 2))
}

enum Sign {
    Positive,
    Failed,
    Degenerate,
    Undecided,
}

fn eps_sign(eps: &CertReal, dist_mu: &CertReal, floor: &CertReal) -> Sign {
    if eps.is_negative() {
        return Sign::Failed;
    }
    if dist_mu.lt(floor) == Some(true) {
        return Sign::Degenerate;
    }
    match eps.sign() {
        Some(std::cmp::Ordering::Greater) if *eps.mid_raw() > BigInt::from(eps.rad_raw() * 4u32) => Sign::Positive,
        Some(_) => Sign::Failed,
        None => Sign::Undecided,
    }
}

/// `(log(Aq/ε)/log B, its ceiling)`.
fn w_bound_of(eps: &CertReal, a: &CertReal, log_b: &CertReal, q: &BigInt, ctx: &Ctx) -> Result<(CertReal, BigInt)> {
    let w = ctx.ln(&a.mul_int(q).div(eps)?)?.div(log_b)?;
    let bound = w.ceil_hi();
    Ok((w, bound))
}

fn judge(eps: &CertReal, dist_mu: &CertReal, a: &CertReal, log_b: &CertReal, q: &BigInt, ctx: &Ctx) -> Result<Verdict> {
    Ok(match eps_sign(eps, dist_mu, &degenerate_floor(ctx)) {
        Sign::Positive => {
            let (w, b) = w_bound_of(eps, a, log_b, q, ctx)?;
            Verdict::Ok(w, b)
        }
        Sign::Failed => Verdict::Failed,
        Sign::Degenerate => Verdict::Degenerate,
        Sign::Undecided => Verdict::Undecided,
    })
}

/// Rough `log(q/ε)` used only to rank candidate convergents.
fn log_ratio_estimate(q: &BigInt, eps: &CertReal) -> f64 {
    let lq = match q.to_f64() {
        Some(x) if x.is_finite() => x.ln(),
        _ => q.bits() as f64 * std::f64::consts::LN_2,
    };
    let e = eps.lo_f64();
    if e > 0.0 {
        lq - e.ln()
    } else {
        f64::INFINITY
    }
}

/// One application of the reduction at the convergent `c`.
pub fn reduce_once(inst: &ReductionInstance, c: &Convergent, start_digits: u32) -> Result<ReductionOutcome> {
    let six_m = BigInt::from(&inst.m * 6u32);
    if c.q <= six_m {
        return invalid(format!("convergent q_{} does not exceed 6M", c.index));
    }
    let mut digits = start_digits.max(cell_digits(&c.q, &inst.m));
    for _ in 0..=MAX_DOUBLINGS {
        let ctx = Ctx::new(digits);
        let tau = inst.tau.eval(&ctx)?;
        let mu = inst.mu.eval(&ctx)?;
        let a = inst.a.eval(&ctx)?;
        let log_b = ctx.ln(&inst.b.eval(&ctx)?)?;
        let (eps, dist_mu) = epsilon(&mu, &tau, &c.q, &inst.m);
        let (status, w_real, w_bound) = match judge(&eps, &dist_mu, &a, &log_b, &c.q, &ctx)? {
            Verdict::Ok(w, b) => (Status::Ok, Some(w), Some(b)),
            Verdict::Degenerate => (Status::Degenerate, None, None),
            Verdict::Failed => (Status::Failed, None, None),
            Verdict::Undecided => {
                digits *= 2;
                continue;
            }
        };
        return Ok(ReductionOutcome {
            label: inst.label.clone(),
            convergent_index: c.index,
            q: c.q.clone(),
            epsilon: eps,
            w_real,
            w_bound,
            status,
            advances: 0,
            digits,
        });
    }
    Err(Error::PrecisionFault(format!("sign of ε undecidable for {}", inst.label)))
}

/// Reduce at the first convergent with `q > 6M`, advancing to the next one
/// while `ε <= 0`, at most `max_advance` times.
pub fn reduce_with_retry(inst: &ReductionInstance, stream: &mut CfStream, max_advance: usize) -> Result<ReductionOutcome> {
    if max_advance == 0 {
        return invalid("max_advance must be at least 1");
    }
    let first = stream.first_q_exceeding(&(&inst.m * 6u32))?.index;
    for adv in 0..=max_advance {
        let c = stream.convergent(first + adv)?.clone();
        let mut out = reduce_once(inst, &c, DEFAULT_PRECISION)?;
        out.advances = adv;
        if out.status != Status::Failed {
            return Ok(out);
        }
    }
    Err(Error::ReductionFailed { label: inst.label.clone(), advances: max_advance })
}

/// The three per-`k` reductions, over `w = l - 3`, `m - 2` and `n - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Campaign {
    Gamma1,
    Gamma2,
    Gamma3,
}

impl Campaign {
    pub fn number(self) -> u8 {
        match self {
            Campaign::Gamma1 => 1,
            Campaign::Gamma2 => 2,
            Campaign::Gamma3 => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Campaign::Gamma1),
            2 => Ok(Campaign::Gamma2),
            3 => Ok(Campaign::Gamma3),
            _ => invalid(format!("campaign must be 1, 2 or 3, got {n}")),
        }
    }

    /// Power of `f_k(α)(2α - 1)` in the form; also the shift between the
    /// reduced exponent and the index it bounds, and the multiple of the
    /// `n` bound that bounds `u`.
    pub fn shift(self) -> u32 {
        4 - self.number() as u32
    }

    /// Coefficient of `k^12 log^7 k` in `M_k`.
    pub fn m_coefficient(self) -> &'static str {
        match self {
            Campaign::Gamma1 => "5.4e45",
            Campaign::Gamma2 => "3.6e45",
            Campaign::Gamma3 => "1.8e45",
        }
    }

    /// `c` in `|Γ| < c/α^w`; `A = c / log 10`.
    pub fn numerator(self, ctx: &Ctx) -> CertReal {
        match self {
            Campaign::Gamma1 => ctx.int(30),
            Campaign::Gamma2 => ctx.ratio(25, 2),
            Campaign::Gamma3 => ctx.int(5),
        }
    }

    /// Name of the bounded index.
    pub fn variable(self) -> &'static str {
        match self {
            Campaign::Gamma1 => "l",
            Campaign::Gamma2 => "m",
            Campaign::Gamma3 => "n",
        }
    }
}

impl fmt::Display for Campaign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma{}", self.number())
    }
}

/// `M_k = ⌈c · k^12 log^7 k⌉`.
pub fn campaign_m(k: u32, campaign: Campaign) -> Result<BigUint> {
    certified_ceil(DEFAULT_PRECISION, |ctx| {
        let kk = BigUint::from(k);
        Ok(ctx.dec(campaign.m_coefficient()).mul(&ctx.ubig(&kk.pow(12))).mul(&ctx.ln_u64(k as u64).powi(7)))
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CampaignConfig {
    pub start_digits: u32,
    pub max_advance: usize,
    /// Further convergents tried after the first success; the smallest
    /// bound wins.
    pub lookahead: usize,
    /// Working precision never exceeds this many digits.
    pub max_digits: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { start_digits: DEFAULT_PRECISION, max_advance: MAX_ADVANCE, lookahead: 3, max_digits: 1 << 14 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub k: u32,
    pub a: u8,
    pub l: Option<u32>,
    pub m: Option<u32>,
}

#[derive(Clone, Debug)]
pub enum CellResult {
    Reduced {
        q_index: usize,
        epsilon: CertReal,
        w_real: CertReal,
        w_bound: BigInt,
        advances: usize,
        digits: u32,
    },
    /// `μ ≡ jτ (mod 1)`: handled through convergent quality instead.
    Legendre { window: BigUint, bound: LegendreBound },
}

#[derive(Clone, Debug)]
pub struct CellRecord {
    pub key: CellKey,
    pub campaign: Campaign,
    pub result: CellResult,
}

impl CellRecord {
    /// Largest exponent `w` this cell allows.
    pub fn exponent_max(&self) -> BigInt {
        match &self.result {
            CellResult::Reduced { w_bound, .. } => w_bound - 1,
            CellResult::Legendre { bound, .. } => bound.exponent_max.clone(),
        }
    }

    pub fn exponent_real(&self) -> &CertReal {
        match &self.result {
            CellResult::Reduced { w_real, .. } => w_real,
            CellResult::Legendre { bound, .. } => &bound.exponent_real_strict,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.result, CellResult::Legendre { .. })
    }

    /// `k,a,l,m,campaign,q_index,epsilon,w_bound,status`.
    pub fn line(&self) -> String {
        let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        let (q_index, eps, w_bound, status) = match &self.result {
            CellResult::Reduced { q_index, epsilon, w_bound, .. } => {
                (q_index.to_string(), epsilon.to_sci(6), w_bound.to_string(), Status::Ok)
            }
            CellResult::Legendre { bound, .. } => (
                bound.last_index.to_string(),
                "-".to_string(),
                (&bound.exponent_max + BigInt::one()).to_string(),
                Status::Degenerate,
            ),
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.key.k,
            self.key.a,
            opt(self.key.l),
            opt(self.key.m),
            self.campaign.number(),
            q_index,
            eps,
            w_bound,
            status
        )
    }
}

#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub campaign: Campaign,
    pub k: u32,
    pub m_k: BigUint,
    /// Index of the first convergent of `τ_k` with `q > 6 M_k`.
    pub first_index: usize,
    pub cells: Vec<CellRecord>,
    pub pruned: usize,
    /// Exponents up to this value are not covered by the reduction because
    /// `|Λ| < 1/2` fails there.
    pub threshold_exponent: BigInt,
    pub exponent_max: BigInt,
    /// Largest real exponent bound over all cells, plus the shift.
    pub bound_real: f64,
    /// Certified bound on the campaign's index.
    pub bound: u32,
    pub min_epsilon: Option<CertReal>,
    pub max_index: usize,
}

impl CampaignResult {
    pub fn degenerate_cells(&self) -> Vec<CellKey> {
        self.cells.iter().filter(|c| c.is_degenerate()).map(|c| c.key).collect()
    }

    /// Largest bound over the cells that went through the reduction.
    pub fn reduced_bound(&self) -> Option<BigInt> {
        self.cells
            .iter()
            .filter(|c| !c.is_degenerate())
            .map(|c| c.exponent_max() + self.campaign.shift())
            .max()
    }
}

/// Everything at one working precision that the cells of a given `k` share.
struct Level {
    ctx: Ctx,
    tau: CertReal,
    ln_alpha: CertReal,
    ln_weight: CertReal,
    ln10: CertReal,
    /// `log(9/a)` at index `a`.
    ln_nine_over: Vec<CertReal>,
    /// `A` per campaign.
    coef: [CertReal; 3],
    floor: CertReal,
    ln_terms: Vec<OnceLock<CertReal>>,
}

impl Level {
    fn new(k: u32, digits: u32, n_terms: usize) -> Result<Self> {
        let ctx = Ctx::new(digits);
        let root = dominant_root(k, digits)?;
        let ln_alpha = ctx.ln(root.alpha())?;
        let ln10 = ctx.ln10();
        let tau = ln_alpha.div(&ln10)?;
        let ln_weight = ctx.ln(&root.weight())?;
        let ln_terms = (0..n_terms).map(|_| OnceLock::new()).collect();
        let ln9 = ctx.ln_u64(9);
        let ln_nine_over = (0..=9u64).map(|a| if a == 0 { ctx.int(0) } else { ln9.sub(&ctx.ln_u64(a)) }).collect();
        let coef = [
            Campaign::Gamma1.numerator(&ctx).div(&ln10)?,
            Campaign::Gamma2.numerator(&ctx).div(&ln10)?,
            Campaign::Gamma3.numerator(&ctx).div(&ln10)?,
        ];
        let floor = degenerate_floor(&ctx);
        Ok(Level { ctx, tau, ln_alpha, ln_weight, ln10, ln_nine_over, coef, floor, ln_terms })
    }

    fn ln_term(&self, terms: &[BigUint], j: u32) -> &CertReal {
        self.ln_terms[j as usize].get_or_init(|| self.ctx.ln_uint(&terms[j as usize]))
    }
}

/// Shared state for all campaigns at one `k`.
pub struct KEngine {
    k: u32,
    terms: Vec<BigUint>,
    v2: Vec<u32>,
    v5: Vec<u32>,
    stream: Mutex<CfStream>,
    levels: Mutex<HashMap<u32, Arc<Level>>>,
}

fn quantize(digits: u32) -> u32 {
    digits.div_ceil(32) * 32
}

fn is_power_of_ten(n: &BigUint) -> bool {
    let ten = BigUint::from(10u32);
    let mut n = n.clone();
    if n.is_zero() {
        return false;
    }
    while (&n % &ten).is_zero() {
        n /= &ten;
    }
    n.is_one()
}

impl KEngine {
    /// Engine for `k` with exact terms `L_0 .. L_max_index`.
    pub fn new(k: u32, max_index: u32) -> Result<Self> {
        if !(2..=650).contains(&k) {
            return invalid(format!("campaigns run for 2 <= k <= 650, got {k}"));
        }
        let terms = klucas_prefix(k, max_index)?;
        let v2 = terms.iter().map(|t| valuation(ValuationPrime::Two, t)).collect::<Result<_>>()?;
        let v5 = terms.iter().map(|t| valuation(ValuationPrime::Five, t)).collect::<Result<_>>()?;
        let stream = CfStream::new(Arc::new(LogAlphaRatio { k }), DEFAULT_PRECISION);
        Ok(KEngine { k, terms, v2, v5, stream: Mutex::new(stream), levels: Mutex::new(HashMap::new()) })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    fn level(&self, digits: u32) -> Result<Arc<Level>> {
        let digits = quantize(digits);
        if let Some(l) = self.levels.lock().expect("level cache poisoned").get(&digits) {
            return Ok(l.clone());
        }
        let level = Arc::new(Level::new(self.k, digits, self.terms.len())?);
        let mut map = self.levels.lock().expect("level cache poisoned");
        Ok(map.entry(digits).or_insert(level).clone())
    }

    fn convergent(&self, i: usize) -> Result<Convergent> {
        Ok(self.stream.lock().expect("stream poisoned").convergent(i)?.clone())
    }

    fn first_index(&self, m: &BigUint) -> Result<usize> {
        Ok(self.stream.lock().expect("stream poisoned").first_q_exceeding(&(m * 6u32))?.index)
    }

    fn check_index(&self, j: Option<u32>) -> Result<()> {
        match j {
            Some(j) if j as usize >= self.terms.len() => {
                invalid(format!("index {j} beyond the engine's term table"))
            }
            _ => Ok(()),
        }
    }

    /// `μ = (s · log F + log L_l + log L_m + log(9/a)) / log 10`.
    fn mu(&self, lv: &Level, campaign: Campaign, key: &CellKey) -> Result<CertReal> {
        let mut num = lv.ln_weight.mul_i64(campaign.shift() as i64);
        for j in [key.l, key.m].into_iter().flatten() {
            num = num.add(lv.ln_term(&self.terms, j));
        }
        num = num.add(&lv.ln_nine_over[key.a as usize]);
        num.div(&lv.ln10)
    }

    /// `9 L_l L_m / a` is a power of ten and `F = α`, so `μ - sτ` is an integer.
    fn symbolic_degenerate(&self, key: &CellKey) -> bool {
        if self.k != 2 {
            return false;
        }
        let mut p = BigUint::from(9u32);
        for j in [key.l, key.m].into_iter().flatten() {
            p *= &self.terms[j as usize];
        }
        let a = BigUint::from(key.a);
        (&p % &a).is_zero() && is_power_of_ten(&(p / a))
    }

    fn classify(&self, campaign: Campaign, key: &CellKey, start: u32, cap: u32) -> Result<bool> {
        let symbolic = self.symbolic_degenerate(key);
        let mut digits = start;
        for _ in 0..=MAX_DOUBLINGS {
            if digits > cap {
                break;
            }
            let lv = self.level(digits)?;
            let mu = self.mu(&lv, campaign, key)?;
            let gap = mu.sub(&lv.tau.mul_i64(campaign.shift() as i64)).dist_to_nearest_int();
            let numeric = gap.lt(&lv.floor) == Some(true);
            match (numeric, symbolic) {
                (true, true) => return Ok(true),
                (false, false) => return Ok(false),
                (false, true) => {
                    return Err(Error::PrecisionFault(format!(
                        "{campaign} cell {key:?} is degenerate algebraically but not numerically"
                    )))
                }
                (true, false) => digits *= 2,
            }
        }
        Err(Error::PrecisionFault(format!(
            "{campaign} cell {key:?} looks degenerate numerically without an algebraic reason"
        )))
    }

    fn legendre(&self, campaign: Campaign) -> Result<CellResult> {
        let ctx = Ctx::new(DEFAULT_PRECISION);
        let window = bound_n(self.k as u64)? * campaign.shift();
        let lv = self.level(DEFAULT_PRECISION)?;
        let mut stream = self.stream.lock().expect("stream poisoned");
        let bound = legendre_bound_step(&mut stream, &window, &campaign.numerator(&ctx), &lv.ln_alpha, &ctx)?;
        Ok(CellResult::Legendre { window, bound })
    }

    /// Certified positive `ε` at `c` with the precision level that decided it.
    fn try_convergent(&self, campaign: Campaign, key: &CellKey, m: &BigUint, c: &Convergent, cfg: &CampaignConfig) -> Result<Option<(CertReal, Arc<Level>)>> {
        let mut digits = cfg.start_digits.max(cell_digits(&c.q, m));
        for _ in 0..=MAX_DOUBLINGS {
            if digits > cfg.max_digits {
                break;
            }
            let lv = self.level(digits)?;
            let mu = self.mu(&lv, campaign, key)?;
            let (eps, dist_mu) = epsilon(&mu, &lv.tau, &c.q, m);
            match eps_sign(&eps, &dist_mu, &lv.floor) {
                Sign::Positive => return Ok(Some((eps, lv))),
                Sign::Failed => return Ok(None),
                // degeneracy was excluded up front; a tiny ‖μq‖ only needs precision
                Sign::Degenerate | Sign::Undecided => digits *= 2,
            }
        }
        Err(Error::PrecisionFault(format!("sign of ε undecidable for {campaign} cell {key:?} at q_{}", c.index)))
    }

    fn reduce_cell(&self, campaign: Campaign, key: &CellKey, m: &BigUint, first: usize, cfg: &CampaignConfig) -> Result<CellResult> {
        for adv in 0..=cfg.max_advance {
            let c = self.convergent(first + adv)?;
            let Some((eps, lv)) = self.try_convergent(campaign, key, m, &c, cfg)? else {
                continue;
            };
            let mut best = (log_ratio_estimate(&c.q, &eps), c, eps, lv, adv);
            for extra in 1..=cfg.lookahead {
                let c = self.convergent(first + adv + extra)?;
                if let Some((eps, lv)) = self.try_convergent(campaign, key, m, &c, cfg)? {
                    let score = log_ratio_estimate(&c.q, &eps);
                    if score < best.0 {
                        best = (score, c, eps, lv, adv + extra);
                    }
                }
            }
            let (_, c, eps, lv, advances) = best;
            let a = &lv.coef[campaign.number() as usize - 1];
            let (w_real, w_bound) = w_bound_of(&eps, a, &lv.ln_alpha, &c.q, &lv.ctx)?;
            return Ok(CellResult::Reduced { q_index: c.index, epsilon: eps, w_real, w_bound, advances, digits: lv.ctx.digits() });
        }
        Err(Error::ReductionFailed {
            label: format!("{campaign} k={} a={} l={:?} m={:?}", key.k, key.a, key.l, key.m),
            advances: cfg.max_advance,
        })
    }

    fn pruned(&self, key: &CellKey) -> bool {
        let (mut e2, mut e5) = (0, 0);
        for j in [key.l, key.m].into_iter().flatten() {
            e2 += self.v2[j as usize];
            e5 += self.v5[j as usize];
        }
        e2 > key.a.trailing_zeros() || e5 > u32::from(key.a == 5)
    }

    fn run(&self, campaign: Campaign, keys: Vec<CellKey>, cfg: &CampaignConfig) -> Result<CampaignResult> {
        for key in &keys {
            self.check_index(key.l)?;
            self.check_index(key.m)?;
        }
        let m = campaign_m(self.k, campaign)?;
        let first = self.first_index(&m)?;
        let start = cfg.start_digits.max(cell_digits(&self.convergent(first)?.q, &m));
        let total = keys.len();
        let live: Vec<CellKey> = keys.into_iter().filter(|k| !self.pruned(k)).collect();
        let pruned = total - live.len();
        // warm the shared precision level before fanning out
        self.level(start)?;
        let mut cells = live
            .par_iter()
            .map(|key| {
                let result = if self.classify(campaign, key, start, cfg.max_digits)? {
                    self.legendre(campaign)?
                } else {
                    self.reduce_cell(campaign, key, &m, first, cfg)?
                };
                Ok(CellRecord { key: *key, campaign, result })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.sort_by_key(|c| c.key);

        let ctx = Ctx::new(DEFAULT_PRECISION);
        let lv = self.level(DEFAULT_PRECISION)?;
        let threshold_exponent = ctx.ln(&campaign.numerator(&ctx))?.div(&lv.ln_alpha)?.floor_hi();
        let cell_max = cells.iter().map(|c| c.exponent_max()).max();
        let exponent_max = match cell_max {
            Some(e) => e.max(threshold_exponent.clone()),
            None => threshold_exponent.clone(),
        };
        let shift = campaign.shift();
        let bound = u32::try_from(&exponent_max + shift)
            .map_err(|_| Error::ContractViolation(format!("{campaign} bound does not fit in u32")))?;
        let bound_real = cells.iter().map(|c| c.exponent_real().hi_f64()).fold(f64::NEG_INFINITY, f64::max)
            + shift as f64;
        let min_epsilon = cells
            .iter()
            .filter_map(|c| match &c.result {
                CellResult::Reduced { epsilon, .. } => Some(epsilon.clone()),
                _ => None,
            })
            .min_by(|x, y| x.lo_f64().total_cmp(&y.lo_f64()));
        let max_index = cells
            .iter()
            .map(|c| match &c.result {
                CellResult::Reduced { q_index, .. } => *q_index,
                CellResult::Legendre { bound, .. } => bound.last_index,
            })
            .max()
            .unwrap_or(first);
        Ok(CampaignResult {
            campaign,
            k: self.k,
            m_k: m,
            first_index: first,
            cells,
            pruned,
            threshold_exponent,
            exponent_max,
            bound_real,
            bound,
            min_epsilon,
            max_index,
        })
    }

    /// Cells `a = 1..9`, bounding `l`.
    pub fn gamma1(&self, cfg: &CampaignConfig) -> Result<CampaignResult> {
        let keys = (1..=9).map(|a| CellKey { k: self.k, a, l: None, m: None }).collect();
        self.run(Campaign::Gamma1, keys, cfg)
    }

    /// Cells `a = 1..9`, `0 <= l <= l_max`, bounding `m`.
    pub fn gamma2(&self, l_max: u32, cfg: &CampaignConfig) -> Result<CampaignResult> {
        let mut keys = Vec::new();
        for a in 1..=9 {
            for l in 0..=l_max {
                keys.push(CellKey { k: self.k, a, l: Some(l), m: None });
            }
        }
        self.run(Campaign::Gamma2, keys, cfg)
    }

    /// Cells `a = 1..9`, `0 <= l <= m <= m_max` with `l <= l_max`, bounding `n`.
    pub fn gamma3(&self, l_max: u32, m_max: u32, cfg: &CampaignConfig) -> Result<CampaignResult> {
        let mut keys = Vec::new();
        for a in 1..=9 {
            for m in 0..=m_max {
                for l in 0..=m.min(l_max) {
                    keys.push(CellKey { k: self.k, a, l: Some(l), m: Some(m) });
                }
            }
        }
        self.run(Campaign::Gamma3, keys, cfg)
    }
}

pub fn campaign_gamma1(k: u32, cfg: &CampaignConfig) -> Result<CampaignResult> {
    KEngine::new(k, 1)?.gamma1(cfg)
}

pub fn campaign_gamma2(k: u32, l_max: u32, cfg: &CampaignConfig) -> Result<CampaignResult> {
    KEngine::new(k, l_max)?.gamma2(l_max, cfg)
}

pub fn campaign_gamma3(k: u32, l_max: u32, m_max: u32, cfg: &CampaignConfig) -> Result<CampaignResult> {
    KEngine::new(k, m_max.max(l_max))?.gamma3(l_max, m_max, cfg)
}

/// All three campaigns at one `k`, each feeding its bound to the next.
#[derive(Clone, Debug)]
pub struct KCampaigns {
    pub k: u32,
    pub gamma1: CampaignResult,
    pub gamma2: CampaignResult,
    pub gamma3: CampaignResult,
}

pub fn run_campaigns(k: u32, cfg: &CampaignConfig) -> Result<KCampaigns> {
    let g1 = campaign_gamma1(k, cfg)?;
    let engine = KEngine::new(k, g1.bound)?;
    let g2 = engine.gamma2(g1.bound, cfg)?;
    let engine = KEngine::new(k, g2.bound.max(g1.bound))?;
    let g3 = engine.gamma3(g1.bound, g2.bound, cfg)?;
    Ok(KCampaigns { k, gamma1: g1, gamma2: g2, gamma3: g3 })
}

/// One round of the reduction of `k/2 - 4` in
/// `|(n+m+l-6) log 2/log 10 - d + log(243/a)/log 10| < 1/(2^(k/2-4) log 10)`.
#[derive(Clone, Debug)]
pub struct KReductionRound {
    pub round: u32,
    pub m: BigUint,
    /// `3 · bound_n(k_prev) <= M`.
    pub m_dominates: bool,
    pub k_prev: u64,
    pub first_index: usize,
    /// `(a, ε at q_first, ε at q_first+1, outcome used)`.
    pub per_a: Vec<(u8, ReductionOutcome, ReductionOutcome, ReductionOutcome)>,
    pub w_real: CertReal,
    pub w_bound: BigInt,
    /// Every solution has `k < k_bound`.
    pub k_bound: BigInt,
    pub min_epsilon: CertReal,
}

fn k_reduction_instance(a: u8, m: &BigUint) -> Result<ReductionInstance> {
    let mu = FnTarget::new(format!("log(243/{a}) / log 10"), move |ctx: &Ctx| {
        ctx.ln_u64(243).sub(&ctx.ln_u64(a as u64)).div(&ctx.ln10())
    });
    let a_coef = FnTarget::new("1 / log 10", |ctx: &Ctx| ctx.int(1).div(&ctx.ln10()));
    let b = FnTarget::new("2", |ctx: &Ctx| Ok(ctx.int(2)));
    ReductionInstance::new(Arc::new(LogTwoTen), Arc::new(mu), m.clone(), Arc::new(a_coef), Arc::new(b), format!("k-reduction a={a}"))
}

/// Round of the `k` reduction with bound `M` on `u = n + m + l - 6`.
pub fn k_reduction_round(round: u32, m: &BigUint, k_prev: u64, max_advance: usize) -> Result<KReductionRound> {
    let n_prev = bound_n(k_prev)?;
    let m_dominates = &n_prev * 3u32 <= *m;
    let mut stream = CfStream::new(Arc::new(LogTwoTen), DEFAULT_PRECISION);
    let first = stream.first_q_exceeding(&(m * 6u32))?;
    let next = stream.convergent(first.index + 1)?.clone();
    let mut per_a = Vec::new();
    for a in 1..=9u8 {
        let inst = k_reduction_instance(a, m)?;
        let at_first = reduce_once(&inst, &first, DEFAULT_PRECISION)?;
        let at_next = reduce_once(&inst, &next, DEFAULT_PRECISION)?;
        let used = reduce_with_retry(&inst, &mut stream, max_advance)?;
        if used.status != Status::Ok {
            return Err(Error::ContractViolation(format!("k-reduction a={a} is degenerate")));
        }
        per_a.push((a, at_first, at_next, used));
    }
    let (w_real, w_bound) = per_a
        .iter()
        .map(|(_, _, _, o)| (o.w_real.clone().expect("ok outcome"), o.w_bound.clone().expect("ok outcome")))
        .max_by(|x, y| x.1.cmp(&y.1).then(x.0.hi_f64().total_cmp(&y.0.hi_f64())))
        .expect("nine digits");
    let min_epsilon = per_a
        .iter()
        .map(|(_, _, _, o)| o.epsilon.clone())
        .min_by(|x, y| x.lo_f64().total_cmp(&y.lo_f64()))
        .expect("nine digits");
    // k/2 - 4 < w_real  =>  k < 2 w_real + 8
    let k_bound = w_real.mul_i64(2).add(&CertReal::from_i64(8, w_real.bits())).ceil_hi();
    Ok(KReductionRound { round, m: m.clone(), m_dominates, k_prev, first_index: first.index, per_a, w_real, w_bound, k_bound, min_epsilon })
}

/// First-round `M`.
pub const K_ROUND1_M: &str = "1e246";
/// Second-round `M`.
pub const K_ROUND2_M: &str = "2.94e90";

#[derive(Clone, Debug)]
pub struct KReduction {
    pub rounds: Vec<KReductionRound>,
    /// Final `k` bound is at most 650, contradicting `k > 650`.
    pub contradiction: bool,
}


/// Both rounds of the reduction of the large-`k` bound.
pub fn k_reduce(max_advance: usize) -> Result<KReduction> {
    let m1 = parse_decimal_uint(K_ROUND1_M)?;
    let r1 = k_reduction_round(1, &m1, crate::bounds::K_LARGE_BOUND, max_advance)?;
    let k1: u64 = (&r1.k_bound - 1u32).try_into().map_err(|_| Error::ContractViolation("k bound overflow".into()))?;
    let m2 = parse_decimal_uint(K_ROUND2_M)?;
    let r2 = k_reduction_round(2, &m2, k1, max_advance)?;
    let contradiction = r2.k_bound <= BigInt::from(650);
    Ok(KReduction { rounds: vec![r1, r2], contradiction })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn konst(name: &str, f: fn(&Ctx) -> Result<CertReal>) -> Real {
        Arc::new(FnTarget::new(name, f))
    }

    fn sqrt2_instance(m: u32) -> ReductionInstance {
        ReductionInstance::new(
            konst("sqrt 2", |c| c.int(2).sqrt()),
            konst("1/3", |c| Ok(c.ratio(1, 3))),
            BigUint::from(m),
            konst("1", |c| Ok(c.int(1))),
            konst("2", |c| Ok(c.int(2))),
            "toy",
        )
        .unwrap()
    }

    #[test]
    fn dist_examples() {
        let ctx = Ctx::new(40);
        assert!(dist_to_nearest_int(&ctx.dec("3.25")).sub(&ctx.dec("0.25")).abs().lt(&ctx.dec("1e-30")) == Some(true));
        assert!(dist_to_nearest_int(&ctx.dec("7.5")).sub(&ctx.dec("0.5")).abs().lt(&ctx.dec("1e-30")) == Some(true));
        assert!(dist_to_nearest_int(&ctx.dec("-2.8")).sub(&ctx.dec("0.2")).abs().lt(&ctx.dec("1e-30")) == Some(true));
    }

    #[test]
    fn toy_reduction_is_sound() {
        let inst = sqrt2_instance(1000);
        let mut stream = CfStream::new(inst.tau.clone(), 40);
        let out = reduce_with_retry(&inst, &mut stream, 10).unwrap();
        assert_eq!(out.status, Status::Ok);
        let w0: i64 = out.w_bound.clone().unwrap().try_into().unwrap();
        let ctx = Ctx::new(60);
        let s = ctx.int(2).sqrt().unwrap();
        let third = ctx.ratio(1, 3);
        for u in 1..=1000i64 {
            let x = s.mul_i64(u).add(&third);
            let r = x.dist_to_nearest_int();
            for w in w0..w0 + 5 {
                let rhs = ctx.int(1).div(&ctx.int(2).powi(w as u64)).unwrap();
                assert_ne!(r.lt(&rhs), Some(true), "u={u} w={w}");
            }
        }
    }

    #[test]
    fn rational_mu_skips_convergent_divisible_by_denominator() {
        let inst = sqrt2_instance(1000);
        let mut stream = CfStream::new(inst.tau.clone(), 40);
        let out = reduce_with_retry(&inst, &mut stream, 5).unwrap();
        // q = 13860 is a multiple of 3, so ‖q/3‖ = 0 there
        assert_eq!(out.advances, 1);
        assert_eq!(out.q, BigInt::from(33461));
        assert!(out.epsilon.is_positive());
        assert!(out.epsilon.lt(&Ctx::new(40).ratio(1, 2)) != Some(false));
    }

    #[test]
    fn mu_equal_tau_fails_at_cap() {
        let tau = konst("sqrt 2", |c| c.int(2).sqrt());
        let inst = ReductionInstance::new(
            tau.clone(),
            tau.clone(),
            BigUint::from(50u32),
            konst("1", |c| Ok(c.int(1))),
            konst("2", |c| Ok(c.int(2))),
            "adversarial",
        )
        .unwrap();
        let mut stream = CfStream::new(tau, 40);
        match reduce_with_retry(&inst, &mut stream, 6) {
            Err(Error::ReductionFailed { advances, .. }) => assert_eq!(advances, 6),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn reduce_once_requires_large_q() {
        let inst = sqrt2_instance(1000);
        let c = Convergent { index: 0, p: BigInt::from(1), q: BigInt::from(1) };
        assert!(reduce_once(&inst, &c, 40).is_err());
    }

    #[test]
    fn instance_validation() {
        let one = konst("1", |c| Ok(c.int(1)));
        let zero = konst("0", |c| Ok(c.int(0)));
        assert!(ReductionInstance::new(one.clone(), one.clone(), BigUint::zero(), one.clone(), konst("2", |c| Ok(c.int(2))), "x").is_err());
        assert!(ReductionInstance::new(one.clone(), one.clone(), BigUint::one(), zero, konst("2", |c| Ok(c.int(2))), "x").is_err());
        assert!(ReductionInstance::new(one.clone(), one.clone(), BigUint::one(), one.clone(), one, "x").is_err());
    }

    #[test]
    fn symbolic_degeneracy_only_at_the_three_cells() {
        let e = KEngine::new(2, 40).unwrap();
        let hits: Vec<(u8, Option<u32>, Option<u32>)> = (1..=9u8)
            .flat_map(|a| {
                let mut v = vec![(a, None, None)];
                for l in 0..=40 {
                    v.push((a, Some(l), None));
                    for m in l..=40 {
                        v.push((a, Some(l), Some(m)));
                    }
                }
                v
            })
            .filter(|&(a, l, m)| e.symbolic_degenerate(&CellKey { k: 2, a, l, m }))
            .collect();
        assert_eq!(hits, vec![(9, None, None), (9, Some(1), None), (9, Some(1), Some(1))]);
        let e3 = KEngine::new(3, 5).unwrap();
        assert!(!e3.symbolic_degenerate(&CellKey { k: 3, a: 9, l: None, m: None }));
    }

    #[test]
    fn gamma1_small_k() {
        let r = campaign_gamma1(3, &CampaignConfig::default()).unwrap();
        assert_eq!(r.cells.len(), 9);
        assert!(r.degenerate_cells().is_empty());
        assert!(r.bound <= 300, "{}", r.bound);
        let r2 = campaign_gamma1(2, &CampaignConfig::default()).unwrap();
        assert_eq!(r2.degenerate_cells(), vec![CellKey { k: 2, a: 9, l: None, m: None }]);
        assert!(r2.bound <= 300);
    }

    #[test]
    fn power_of_ten() {
        assert!(is_power_of_ten(&BigUint::from(1u32)));
        assert!(is_power_of_ten(&BigUint::from(1000u32)));
        assert!(!is_power_of_ten(&BigUint::from(20u32)));
        assert!(!is_power_of_ten(&BigUint::zero()));
    }
}
