//! Matveev-type lower bounds for linear forms in three logarithms, chained
//! into explicit upper bounds on `l`, `m`, `n` and finally on `k`.
//!
//! Every bound is evaluated in ball arithmetic and rounded outward. The
//! auxiliary relaxations (`1 + log k < 2.5 log k`, `1 + log 3n < 1.6 log 3n`,
//! `1 + log 3n < 45 log k`) are applied as stated, so the constants match the
//! published milestones; [`chain_milestones`] re-assembles each published
//! constant from its ingredients and checks that it dominates.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::cert::{CertReal, Ctx, DEFAULT_PRECISION, MAX_DOUBLINGS};
use crate::error::{invalid, Error, Result};
use crate::lucas::{as_repdigit, klucas, SolutionRecord};

/// Coefficient of `k^4 log^2 k log 3n` in the bound on `l`.
pub const L_COEFFICIENT: &str = "2.3e13";
/// Coefficient of `k^8 log^3 k log^2 3n` in the bound on `m`.
pub const M_COEFFICIENT: &str = "2.2e25";
/// Coefficient of `k^12 log^7 k` in the bound on `n`.
pub const N_COEFFICIENT: &str = "1.8e45";
/// Coefficient of `log k` in the large-`k` inequality.
pub const K_LARGE_COEFFICIENT: &str = "1.63e14";
/// The rounded large-`k` bound.
pub const K_LARGE_BOUND: u64 = 6_000_000_000_000_000;
/// The published bound on `n` for `k < 6·10^15`.
pub const N_LARGE_BOUND: &str = "3.3e245";

#[derive(Clone, Debug)]
pub struct MatveevInstance {
    t: u32,
    dk: u64,
    b: BigUint,
    a: Vec<CertReal>,
}

impl MatveevInstance {
    pub fn new(t: u32, dk: u64, b: BigUint, a: Vec<CertReal>) -> Result<Self> {
        if t == 0 || dk == 0 || b.is_zero() {
            return invalid("Matveev instance needs t >= 1, d_K >= 1 and B >= 1");
        }
        if a.len() != t as usize {
            return invalid(format!("expected {t} height parameters, got {}", a.len()));
        }
        for (i, ai) in a.iter().enumerate() {
            let floor = CertReal::from_ratio(&BigInt::from(4), &BigInt::from(25), ai.bits());
            if ai.lt(&floor) == Some(true) {
                return invalid(format!("A_{} is below 0.16", i + 1));
            }
        }
        Ok(MatveevInstance { t, dk, b, a })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn dk(&self) -> u64 {
        self.dk
    }

    pub fn b(&self) -> &BigUint {
        &self.b
    }

    pub fn a(&self) -> &[CertReal] {
        &self.a
    }
}

/// `1.4 · 30^(t+3) · t^4.5`.
pub fn matveev_constant(t: u32, ctx: &Ctx) -> Result<CertReal> {
    let pow30 = BigInt::from(30u32).pow(t + 3);
    let t4 = BigInt::from(t).pow(4);
    let sqrt_t = ctx.int(t as i64).sqrt()?;
    Ok(ctx.ratio(7, 5).mul(&ctx.big(&(pow30 * t4))).mul(&sqrt_t))
}

/// Magnitude `E` with `|Λ| > exp(-E)`:
/// `1.4·30^(t+3)·t^4.5·d_K^2 (1 + log d_K)(1 + log B)·A_1⋯A_t`.
pub fn matveev_exponent(inst: &MatveevInstance, ctx: &Ctx) -> Result<CertReal> {
    let one = ctx.int(1);
    let dk = BigUint::from(inst.dk);
    let mut out = matveev_constant(inst.t, ctx)?
        .mul(&ctx.ubig(&(&dk * &dk)))
        .mul(&one.add(&ctx.ln_uint(&dk)))
        .mul(&one.add(&ctx.ln_uint(&inst.b)));
    for ai in &inst.a {
        out = out.mul(&ai.rescale(ctx.bits()));
    }
    Ok(out)
}

fn k_pow(k: u64, e: u32, ctx: &Ctx) -> CertReal {
    ctx.ubig(&BigUint::from(k).pow(e))
}

fn check_k(k: u64) -> Result<()> {
    if k < 2 {
        return invalid(format!("order k must be at least 2, got {k}"));
    }
    Ok(())
}

/// `2.3·10^13 · k^4 log^2 k · log 3n` as a ball.
pub fn bound_l_value(k: u64, n: &BigUint, ctx: &Ctx) -> Result<CertReal> {
    check_k(k)?;
    if *n < BigUint::from(2u32) {
        return invalid("bound on l needs n >= 2");
    }
    let log_k = ctx.ln_u64(k);
    let log_3n = ctx.ln_uint(&(n * 3u32));
    Ok(ctx
        .dec(L_COEFFICIENT)
        .mul(&k_pow(k, 4, ctx))
        .mul(&log_k.mul(&log_k))
        .mul(&log_3n))
}

/// `2.2·10^25 · k^8 log^3 k · log^2 3n` as a ball.
pub fn bound_m_value(k: u64, n: &BigUint, ctx: &Ctx) -> Result<CertReal> {
    check_k(k)?;
    if *n < BigUint::from(2u32) {
        return invalid("bound on m needs n >= 2");
    }
    let log_k = ctx.ln_u64(k);
    let log_3n = ctx.ln_uint(&(n * 3u32));
    Ok(ctx
        .dec(M_COEFFICIENT)
        .mul(&k_pow(k, 8, ctx))
        .mul(&log_k.powi(3))
        .mul(&log_3n.mul(&log_3n)))
}

/// `1.8·10^45 · k^12 log^7 k` as a ball.
pub fn bound_n_value(k: u64, ctx: &Ctx) -> Result<CertReal> {
    check_k(k)?;
    Ok(ctx.dec(N_COEFFICIENT).mul(&k_pow(k, 12, ctx)).mul(&ctx.ln_u64(k).powi(7)))
}

/// Certified ceiling of a positive ball-valued expression, raising the
/// precision until the fractional part is decided.
pub fn certified_ceil<F>(start_digits: u32, f: F) -> Result<BigUint>
where
    F: Fn(&Ctx) -> Result<CertReal>,
{
    let probe = f(&Ctx::new(start_digits))?;
    let magnitude = probe.hi_f64().abs().log10().max(0.0).ceil() as u32;
    let mut digits = start_digits.max(magnitude + 30);
    for _ in 0..=MAX_DOUBLINGS {
        let v = f(&Ctx::new(digits))?;
        if let Some(fl) = v.floor() {
            let c: BigInt = fl + 1;
            return c
                .to_biguint()
                .ok_or_else(|| Error::ContractViolation("bound is negative".into()));
        }
        digits *= 2;
    }
    Err(Error::PrecisionFault("ceiling of a bound is undecidable".into()))
}

/// `⌈2.3·10^13 · k^4 log^2 k log 3n⌉`.
pub fn bound_l(k: u64, n: &BigUint) -> Result<BigUint> {
    certified_ceil(DEFAULT_PRECISION, |ctx| bound_l_value(k, n, ctx))
}

/// `⌈2.2·10^25 · k^8 log^3 k log^2 3n⌉`.
pub fn bound_m(k: u64, n: &BigUint) -> Result<BigUint> {
    certified_ceil(DEFAULT_PRECISION, |ctx| bound_m_value(k, n, ctx))
}

/// `⌈1.8·10^45 · k^12 log^7 k⌉`.
pub fn bound_n(k: u64) -> Result<BigUint> {
    certified_ceil(DEFAULT_PRECISION, |ctx| bound_n_value(k, ctx))
}

/// `2^s T (log T)^s`, valid as a bound on `x` whenever `x/(log x)^s < T`
/// and `T > (4 s^2)^s`.
pub fn guzman_envelope(s: u32, t: &CertReal, ctx: &Ctx) -> Result<CertReal> {
    if s == 0 {
        return invalid("envelope exponent s must be at least 1");
    }
    let threshold = ctx.big(&BigInt::from(4 * s * s).pow(s));
    if threshold.lt(t) != Some(true) {
        return invalid(format!("envelope needs T > (4s^2)^s = {}", threshold.to_sci(6)));
    }
    let log_t = ctx.ln(t)?;
    Ok(ctx.big(&(BigInt::one() << s as usize)).mul(t).mul(&log_t.powi(s as u64)))
}

/// One re-assembled constant of the bound chain against its published value.
#[derive(Clone, Debug)]
pub struct ChainMilestone {
    pub name: &'static str,
    pub assembled: CertReal,
    pub stated: &'static str,
    /// `assembled <= stated`, certified.
    pub holds: bool,
}

impl fmt::Display for ChainMilestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: assembled {} <= stated {}: {}",
            self.name,
            self.assembled.hi_sci(6),
            self.stated,
            self.holds
        )
    }
}

fn milestone(name: &'static str, assembled: CertReal, stated: &'static str, ctx: &Ctx) -> ChainMilestone {
    let holds = assembled.lt(&ctx.dec(stated)) == Some(true);
    ChainMilestone { name, assembled, stated, holds }
}

/// Re-assemble every published constant of the chain from its ingredients.
pub fn chain_milestones(ctx: &Ctx) -> Result<Vec<ChainMilestone>> {
    let c3 = matveev_constant(3, ctx)?;
    let ln10 = ctx.ln10();
    let ln2 = ctx.ln2();
    let ln3 = ctx.ln_u64(3);
    let relax = ctx.ratio(5, 2).mul(&ctx.dec("1.6"));
    let mut out = Vec::new();

    // l - 3 < C·k^2·(2.5 log k)(1.6 log 3n)·(k log 10)·(17 k log k) / log α · log α
    let l_coef = c3.mul(&relax).mul(&ln10).mul_i64(17);
    out.push(milestone("l coefficient", l_coef, L_COEFFICIENT, ctx));

    // l log 2 dominates h(η_3) of the second form
    let h2 = ctx.dec(L_COEFFICIENT).mul(&ln2);
    out.push(milestone("second-form height coefficient", h2, "1.6e13", ctx));

    let m_coef = c3.mul(&relax).mul(&ln10).mul(&ctx.dec("1.6e13"));
    out.push(milestone("m coefficient", m_coef, M_COEFFICIENT, ctx));

    // 2 m log 2 dominates h(η_3) of the third form
    let h3 = ctx.dec(M_COEFFICIENT).mul(&ln2).mul_i64(2);
    out.push(milestone("third-form height coefficient", h3, "3.1e25", ctx));

    let three_n = c3.mul(&relax).mul(&ln10).mul(&ctx.dec("3.1e25")).mul_i64(3);
    out.push(milestone("3n coefficient", three_n, "1.3e38", ctx));

    // x = 3n, s = 3, (log T)^3 < 170^3 log^3 k
    let n_coef = ctx.dec("1.3e38").mul_i64(8 * 170 * 170 * 170).div_int(&BigInt::from(3));
    out.push(milestone("n coefficient", n_coef, N_COEFFICIENT, ctx));

    // (k/2 - 3) log 2 < C (45 log k) log 2 · log 10 · 5 log 3
    let k_coef = c3.mul_i64(2 * 45).mul(&ln10).mul(&ln3.mul_i64(5));
    out.push(milestone("large-k coefficient", k_coef, K_LARGE_COEFFICIENT, ctx));

    let n_large = bound_n_value(K_LARGE_BOUND, ctx)?;
    out.push(milestone("n bound at k = 6e15", n_large, N_LARGE_BOUND, ctx));
    Ok(out)
}

/// `log T < 170 log k` for `T = 1.3·10^38 k^12 log^4 k`.
pub fn log_t_envelope_holds(k: u64, ctx: &Ctx) -> Result<bool> {
    check_k(k)?;
    let log_k = ctx.ln_u64(k);
    let t = ctx.dec("1.3e38").mul(&k_pow(k, 12, ctx)).mul(&log_k.powi(4));
    let log_t = ctx.ln(&t)?;
    Ok(log_t.lt(&log_k.mul_i64(170)) == Some(true))
}

/// `1 + log 3n < 45 log k` with `n` at its bound `1.8·10^45 k^12 log^7 k`.
pub fn log_3n_envelope_holds(k: u64, ctx: &Ctx) -> Result<bool> {
    let three_n = bound_n_value(k, ctx)?.mul_i64(3);
    let lhs = ctx.int(1).add(&ctx.ln(&three_n)?);
    Ok(lhs.lt(&ctx.ln_u64(k).mul_i64(45)) == Some(true))
}

/// `n < 2^(k/2)` at the bound on `n`.
pub fn n_below_half_power(k: u64, ctx: &Ctx) -> Result<bool> {
    let log_n = ctx.ln(&bound_n_value(k, ctx)?)?;
    let rhs = ctx.ln2().mul_i64(k as i64).div_int(&BigInt::from(2));
    Ok(log_n.lt(&rhs) == Some(true))
}

/// `3ζ + 3ζ^2 + ζ^3 < 7/2^(k/2)` at `ζ = 2^(-k/2)`, exact for even `k`.
pub fn zeta_tail_holds(k: u32) -> bool {
    // scale everything by 2^(3h) where ζ = 2^-h
    let h = (k / 2) as usize;
    let one = BigUint::one();
    let lhs = (BigUint::from(3u32) << (2 * h)) + (BigUint::from(3u32) << h) + &one;
    let rhs = BigUint::from(7u32) << (2 * h);
    lhs < rhs
}

/// `|L_n^{(k)} - 3·2^(n-2)| < 3·2^(n-2) / 2^(k/2)`, decided with integers.
pub fn lemma4_residual_holds(k: u32, n: u32) -> Result<bool> {
    if n < k + 1 {
        return invalid("residual estimate needs n >= k + 1");
    }
    let l = BigInt::from(klucas(k, n as i64)?);
    let main = BigInt::from(3u32) << (n as usize - 2);
    let diff = (l - &main).magnitude().clone();
    // diff^2 · 2^k < main^2
    let lhs: BigUint = (&diff * &diff) << k as usize;
    Ok(lhs < main.magnitude() * main.magnitude())
}

/// Outcome of the large-`k` analysis.
#[derive(Clone, Debug)]
pub struct KLargeBound {
    pub coefficient: CertReal,
    /// Fixed point of `k = 1.63·10^14 log k`.
    pub raw_fixed_point: CertReal,
    pub bound: u64,
    /// `bound > 1.63·10^14 log(bound)`, so every solution lies below it.
    pub bound_certified: bool,
    pub n_bound: BigUint,
    pub n_bound_holds: bool,
    pub n_below_half_power: bool,
    pub log_3n_envelope: bool,
    pub tail_holds: bool,
}

/// Solve `k < 1.63·10^14 log k` and derive the bound on `n`.
pub fn bound_k_large(ctx: &Ctx) -> Result<KLargeBound> {
    let c = ctx.dec(K_LARGE_COEFFICIENT);
    let mut x = ctx.dec("1e14");
    for _ in 0..200 {
        let next = c.mul(&ctx.ln(&x)?);
        let step = next.sub(&x).abs();
        x = next;
        if step.lt(&ctx.int(1)) == Some(true) {
            break;
        }
    }
    let bound = K_LARGE_BOUND;
    // k - c log k is increasing for k > c
    let bound_certified = c.mul(&ctx.ln_u64(bound)).lt(&ctx.ubig(&BigUint::from(bound))) == Some(true);
    let assembled = chain_milestones(ctx)?
        .into_iter()
        .find(|m| m.name == "large-k coefficient")
        .expect("large-k milestone");
    let n_bound = bound_n(bound)?;
    let n_bound_holds = ctx.ubig(&n_bound).lt(&ctx.dec(N_LARGE_BOUND)) == Some(true);
    Ok(KLargeBound {
        coefficient: assembled.assembled,
        raw_fixed_point: x,
        bound,
        bound_certified,
        n_bound,
        n_bound_holds,
        // both sides are increasing in k, the right one faster for k > 650
        n_below_half_power: n_below_half_power(651, ctx)?,
        log_3n_envelope: log_3n_envelope_holds(651, ctx)?,
        tail_holds: zeta_tail_holds(650),
    })
}

/// Admissible digit counts `(n-3)/5 < d < n+2` as an inclusive range.
pub fn d_window(n: u32, m: u32, l: u32) -> Result<(u32, u32)> {
    if !(n >= m && m >= l) || n < 2 {
        return invalid(format!("d window needs n >= m >= l and n >= 2, got ({n},{m},{l})"));
    }
    let d_min = Integer::div_floor(&(n as i64 - 3), &5) + 1;
    Ok((d_min.max(1) as u32, n + 1))
}

/// Record of the `n <= k` case.
#[derive(Clone, Debug)]
pub struct SmallCaseRecord {
    /// Largest admissible `n + m + l` from the 2-adic argument.
    pub index_sum_max: u32,
    pub n_max: u32,
    /// `max_k L_9^{(k)}`.
    pub l9_max: BigUint,
    pub cells_checked: u64,
    pub solutions: Vec<SolutionRecord>,
}

/// The `n <= k` case: `3^5 · 2^(n+m+l-6) = a(10^d - 1)` with `10^d - 1` odd
/// forces `n + m + l - 6 <= v_2(a) <= 3`, hence `n <= 9`; every triple
/// `l <= m <= n <= min(k, 9)` is then checked exactly. For `k >= 9` the
/// terms involved no longer depend on `k`.
pub fn case_n_le_k() -> Result<SmallCaseRecord> {
    let max_v2_a = (1u8..=9).map(|a| a.trailing_zeros()).max().unwrap_or(0);
    let index_sum_max = 6 + max_v2_a;
    let n_max = index_sum_max;
    let mut l9_max = BigUint::zero();
    let mut cells = 0u64;
    let mut solutions = Vec::new();
    for k in 2..=n_max {
        l9_max = l9_max.max(klucas(k, 9)?);
        let terms: Vec<BigUint> = (0..=k as i64).map(|i| klucas(k, i)).collect::<Result<_>>()?;
        for n in 0..=k.min(n_max) {
            for m in 0..=n {
                for l in 0..=m {
                    cells += 1;
                    let p = &terms[n as usize] * &terms[m as usize] * &terms[l as usize];
                    if let Some(r) = as_repdigit(&p)? {
                        if r.d() >= 2 {
                            solutions.push(SolutionRecord::new(k, n, m, l, r.a(), r.d()));
                        }
                    }
                }
            }
        }
    }
    Ok(SmallCaseRecord { index_sum_max, n_max, l9_max, cells_checked: cells, solutions })
}

/// Where a bound in a [`BoundChain`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSource {
    /// Linear forms in logarithms.
    Matveev,
    /// A successful reduction.
    Reduction,
    /// The convergent-quality fallback for degenerate forms.
    Legendre,
}

impl fmt::Display for BoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundSource::Matveev => "matveev",
            BoundSource::Reduction => "reduction",
            BoundSource::Legendre => "legendre",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundChain {
    pub k: u64,
    pub l_bound: BigUint,
    pub m_bound: BigUint,
    pub n_bound: BigUint,
    pub provenance: [BoundSource; 3],
}

impl BoundChain {
    /// The analytic chain at `k`: `n` first, then `l` and `m` at that `n`.
    pub fn matveev(k: u64) -> Result<Self> {
        let n_bound = bound_n(k)?;
        let l_bound = bound_l(k, &n_bound)?;
        let m_bound = bound_m(k, &n_bound)?;
        Ok(BoundChain { k, l_bound, m_bound, n_bound, provenance: [BoundSource::Matveev; 3] })
    }
}

#[cfg(test)]
mod tests {
    use num_traits::ToPrimitive;

    use super::*;

    fn ctx() -> Ctx {
        Ctx::new(60)
    }

    fn ones(t: u32, ctx: &Ctx) -> Vec<CertReal> {
        vec![ctx.int(1); t as usize]
    }

    #[test]
    fn matveev_examples() {
        let ctx = ctx();
        let e = matveev_exponent(&MatveevInstance::new(3, 1, 1u32.into(), ones(3, &ctx)).unwrap(), &ctx)
            .unwrap();
        // 1.4 · 7.29e8 · 140.296...
        assert!((e.to_f64() / 1.431_862e11 - 1.0).abs() < 1e-6, "{}", e);
        let one = MatveevInstance::new(1, 1, 1u32.into(), vec![ctx.dec("0.16")]).unwrap();
        let e1 = matveev_exponent(&one, &ctx).unwrap();
        assert!((e1.to_f64() - 1.4 * 810_000.0 * 0.16).abs() < 1e-6);
        assert!((e1.to_f64() / 1.814e5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn matveev_scales_linearly_and_monotonically() {
        let ctx = ctx();
        let base = MatveevInstance::new(3, 4, 100u32.into(), ones(3, &ctx)).unwrap();
        let mut doubled_a = ones(3, &ctx);
        doubled_a[0] = ctx.int(2);
        let doubled = MatveevInstance::new(3, 4, 100u32.into(), doubled_a).unwrap();
        let e = matveev_exponent(&base, &ctx).unwrap();
        let e2 = matveev_exponent(&doubled, &ctx).unwrap();
        assert!(e2.sub(&e.mul_i64(2)).abs().lt(&ctx.dec("1e-40")) == Some(true));
        let bigger_b = MatveevInstance::new(3, 4, 101u32.into(), ones(3, &ctx)).unwrap();
        assert_eq!(e.lt(&matveev_exponent(&bigger_b, &ctx).unwrap()), Some(true));
    }

    #[test]
    fn matveev_rejects_bad_instances() {
        let ctx = ctx();
        assert!(MatveevInstance::new(0, 1, 1u32.into(), vec![]).is_err());
        assert!(MatveevInstance::new(2, 1, 1u32.into(), ones(3, &ctx)).is_err());
        assert!(MatveevInstance::new(1, 1, 1u32.into(), vec![ctx.dec("0.1")]).is_err());
    }

    #[test]
    fn bound_l_matches_plug_in() {
        let n = BigUint::from(26u32);
        let b = bound_l(2, &n).unwrap();
        let expect = 2.3e13 * 16.0 * 2f64.ln().powi(2) * 78f64.ln();
        assert!((b.to_f64().unwrap() / expect - 1.0).abs() < 1e-12);
        assert!(bound_l(2, &n).unwrap() <= bound_l(2, &BigUint::from(27u32)).unwrap());
        let n650 = bound_n(650).unwrap();
        let l650 = bound_l(650, &n650).unwrap().to_f64().unwrap();
        assert!(l650 > 3.3e28 && l650 < 3.5e28, "{l650:e}");
    }

    #[test]
    fn bound_m_dominates_bound_l() {
        for k in [2u64, 3, 10, 100, 650] {
            for n in [26u32, 100, 1000, 100_000] {
                let n = BigUint::from(n);
                assert!(bound_m(k, &n).unwrap() >= bound_l(k, &n).unwrap());
                assert!(bound_m(k, &n).unwrap() <= bound_m(k, &(&n + 1u32)).unwrap());
            }
        }
        let m = bound_m(2, &BigUint::from(26u32)).unwrap();
        let expect = 2.2e25 * 256.0 * 2f64.ln().powi(3) * 78f64.ln().powi(2);
        assert!((m.to_f64().unwrap() / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_n_examples() {
        let n2 = bound_n(2).unwrap().to_f64().unwrap();
        assert!((n2 / 5.7e47 - 1.0).abs() < 0.01, "{n2:e}");
        assert!(n2 * 3.0 < 1.8e48);
        let big = bound_n(K_LARGE_BOUND).unwrap();
        assert!(big < "33".parse::<BigUint>().unwrap() * BigUint::from(10u32).pow(244));
    }

    #[test]
    fn ceilings_agree_across_precisions() {
        let ctx = Ctx::new(300);
        let twice = ctx.doubled();
        for k in [2u64, 650, K_LARGE_BOUND] {
            let a = bound_n_value(k, &ctx).unwrap();
            let b = bound_n_value(k, &twice).unwrap();
            assert_eq!(a.floor(), b.floor());
            assert!(a.overlaps(&b));
        }
    }

    #[test]
    fn guzman_examples() {
        let ctx = ctx();
        let v = guzman_envelope(1, &ctx.int(100), &ctx).unwrap();
        assert!((v.to_f64() - 200.0 * 100f64.ln()).abs() < 1e-9);
        assert!((v.to_f64() - 921.03).abs() < 0.01);
        assert!(guzman_envelope(3, &ctx.int(36 * 36 * 36), &ctx).is_err());
        assert!(guzman_envelope(3, &ctx.int(36 * 36 * 36 + 1), &ctx).is_ok());
        let t = ctx.dec("1.3e38").mul(&ctx.int(4096)).mul(&ctx.ln_u64(2).powi(4));
        assert!(guzman_envelope(3, &t, &ctx).unwrap().to_f64().is_finite());
    }

    #[test]
    fn guzman_usable_direction() {
        // any x with x/(log x)^s < T lies below the envelope
        let ctx = Ctx::new(40);
        for s in 1u32..=3 {
            let floor = (4.0 * (s * s) as f64).powi(s as i32);
            for scale in [1.5f64, 10.0, 1e3, 1e6] {
                let t = floor * scale;
                let env = guzman_envelope(s, &ctx.dec(&format!("{t:e}")), &ctx).unwrap().to_f64();
                let mut x = 3.0f64;
                while x < env * 4.0 {
                    if x / x.ln().powi(s as i32) < t {
                        assert!(x < env, "s={s} T={t} x={x}");
                    }
                    x *= 1.07;
                }
            }
        }
    }

    #[test]
    fn chain_milestones_hold() {
        let ctx = Ctx::new(80);
        let ms = chain_milestones(&ctx).unwrap();
        assert_eq!(ms.len(), 8);
        for m in &ms {
            assert!(m.holds, "{m}");
        }
        let l = &ms[0].assembled;
        assert!((l.to_f64() / 2.2418e13 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn envelopes_hold_over_the_small_range() {
        let ctx = Ctx::new(40);
        for k in 2..=650u64 {
            assert!(log_t_envelope_holds(k, &ctx).unwrap(), "k={k}");
        }
        assert!(log_3n_envelope_holds(651, &ctx).unwrap());
        assert!(n_below_half_power(651, &ctx).unwrap());
        assert!(!n_below_half_power(300, &ctx).unwrap());
    }

    #[test]
    fn k_large_fixed_point() {
        let ctx = Ctx::new(60);
        let r = bound_k_large(&ctx).unwrap();
        let fp = r.raw_fixed_point.to_f64();
        assert!(fp > 5.8e15 && fp < 6.0e15, "{fp:e}");
        assert!(r.bound_certified && r.n_bound_holds && r.n_below_half_power);
        assert!(r.log_3n_envelope && r.tail_holds);
    }

    #[test]
    fn residual_and_tail() {
        for k in 2u32..=12 {
            let top = (1u64 << (k / 2)).min(200) as u32;
            for n in k + 1..top.max(k + 1) {
                assert!(lemma4_residual_holds(k, n).unwrap(), "k={k} n={n}");
            }
        }
        assert!(zeta_tail_holds(650));
        assert!(zeta_tail_holds(4));
    }

    #[test]
    fn d_window_examples() {
        assert_eq!(d_window(25, 0, 0).unwrap(), (5, 26));
        assert_eq!(d_window(2, 1, 0).unwrap().1, 3);
        assert_eq!(d_window(1216, 3, 1).unwrap(), (243, 1217));
        assert!(d_window(3, 4, 0).is_err());
    }

    #[test]
    fn small_case_is_empty() {
        let r = case_n_le_k().unwrap();
        assert!(r.solutions.is_empty());
        assert_eq!(r.index_sum_max, 9);
        assert_eq!(r.n_max, 9);
        assert_eq!(r.l9_max, BigUint::from(384u32));
    }
}
