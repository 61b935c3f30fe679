//! The dominant root `α(k)` of `Ψ_k(x) = x^k - x^(k-1) - ... - x - 1`, the
//! weight `f_k(α)`, the approximation defect of `L_n^{(k)}`, and the closed
//! form height budgets of the three linear forms.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::One;

use crate::cert::{digits_to_bits, CertReal, Ctx, DEFAULT_PRECISION, MAX_DOUBLINGS};
use crate::error::{invalid, Error, Result};
use crate::lucas::klucas_prefix;

/// Bisection steps used to isolate `α` before Newton refinement.
pub const BISECTION_STEPS: u32 = 60;

/// `x^(k+1) - 2 x^k + 1 = (x - 1) Ψ_k(x)`.
fn telescoped(k: u32, x: &CertReal) -> CertReal {
    let xk = x.powi(k as u64);
    let two = CertReal::from_i64(2, x.bits());
    xk.mul(&x.sub(&two)).add(&CertReal::from_i64(1, x.bits()))
}

/// `Ψ_k(x)` through the telescoped rational form.
pub fn psi_eval(k: u32, x: &CertReal) -> Result<CertReal> {
    if k < 2 {
        return invalid(format!("order k must be at least 2, got {k}"));
    }
    // the telescoped form loses about k bits to cancellation near x = 2
    let work = x.bits() + k + 64;
    let xw = x.rescale(work);
    let den = xw.sub(&CertReal::from_i64(1, work));
    if den.contains_zero() {
        return invalid("Ψ_k evaluation point must be bounded away from 1");
    }
    Ok(telescoped(k, &xw).div(&den)?.rescale(x.bits()))
}

#[derive(Clone, Debug)]
pub struct DominantRoot {
    k: u32,
    digits: u32,
    alpha: CertReal,
    fk_alpha: CertReal,
    two_alpha_minus_one: CertReal,
}

impl DominantRoot {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn alpha(&self) -> &CertReal {
        &self.alpha
    }

    pub fn fk_alpha(&self) -> &CertReal {
        &self.fk_alpha
    }

    pub fn two_alpha_minus_one(&self) -> &CertReal {
        &self.two_alpha_minus_one
    }

    /// `f_k(α)(2α - 1)`, the leading coefficient of the Binet-type expansion.
    pub fn weight(&self) -> CertReal {
        self.fk_alpha.mul(&self.two_alpha_minus_one)
    }

    /// `2(1 - 2^-k) < α < 2`, decided with certified comparisons.
    pub fn certified_in_interval(&self) -> bool {
        let bits = self.alpha.bits();
        let two = CertReal::from_i64(2, bits);
        let lower = CertReal::from_ratio(
            &((BigInt::one() << (self.k as usize + 1)) - 2),
            &(BigInt::one() << self.k as usize),
            bits,
        );
        self.alpha.lt(&two) == Some(true) && lower.lt(&self.alpha) == Some(true)
    }

    /// `1/2 < f_k(α) < 3/4`.
    pub fn certified_weight_bounds(&self) -> bool {
        let bits = self.fk_alpha.bits();
        let half = CertReal::from_ratio(&BigInt::from(1), &BigInt::from(2), bits);
        let three_quarters = CertReal::from_ratio(&BigInt::from(3), &BigInt::from(4), bits);
        half.lt(&self.fk_alpha) == Some(true) && self.fk_alpha.lt(&three_quarters) == Some(true)
    }
}

impl fmt::Display for DominantRoot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha({}) = {}", self.k, self.alpha.to_sci(30))
    }
}

/// `f_k(x) = (x - 1) / (2 + (k + 1)(x - 2))`.
pub fn fk(k: u32, x: &CertReal) -> Result<CertReal> {
    let bits = x.bits();
    let num = x.sub(&CertReal::from_i64(1, bits));
    let den = x
        .sub(&CertReal::from_i64(2, bits))
        .mul_i64(k as i64 + 1)
        .add(&CertReal::from_i64(2, bits));
    num.div(&den)
}

/// Certified `α(k)` to `digits` decimal digits.
///
/// Sixty bisection steps isolate the root inside `(2(1 - 2^-k), 2)`, Newton
/// iterations on the midpoint refine it, and a final sign change of `Ψ_k`
/// across `[x - δ, x + δ]` certifies the enclosure. The internal precision is
/// doubled on failure, up to [`MAX_DOUBLINGS`] times.
pub fn dominant_root(k: u32, digits: u32) -> Result<DominantRoot> {
    if k < 2 {
        return invalid(format!("order k must be at least 2, got {k}"));
    }
    if digits < 30 {
        return invalid(format!("precision must be at least 30 digits, got {digits}"));
    }
    // α sits within about 2^-k of both ends of its interval; keep k extra bits
    let out_bits = digits_to_bits(digits) + k;
    let mut extra = 0u32;
    for _ in 0..=MAX_DOUBLINGS {
        if let Some(alpha) = isolate(k, out_bits + extra)? {
            let alpha = alpha.rescale(out_bits);
            let fk_alpha = fk(k, &alpha)?;
            let two_alpha_minus_one = alpha.mul_i64(2).sub(&CertReal::from_i64(1, out_bits));
            let root = DominantRoot { k, digits, alpha, fk_alpha, two_alpha_minus_one };
            if !root.certified_in_interval() {
                return Err(Error::ContractViolation(format!(
                    "alpha({k}) escaped (2(1-2^-k), 2)"
                )));
            }
            return Ok(root);
        }
        extra = (extra * 2).max(64);
    }
    Err(Error::PrecisionFault(format!("could not certify a sign change of Ψ_{k}")))
}

fn isolate(k: u32, bits: u32) -> Result<Option<CertReal>> {
    let work = bits + k + 64;
    let one = BigInt::one();
    // endpoints as integers scaled by 2^work
    let mut lo: BigInt = ((&one << (k as usize + 1)) - 2u32) << (work - k) as usize;
    let mut hi: BigInt = BigInt::from(2u32) << work as usize;
    let at = |v: &BigInt| telescoped(k, &CertReal::from_parts(v.clone(), BigUint::default(), work));
    if at(&lo).sign() != Some(Ordering::Less) || at(&hi).sign() != Some(Ordering::Greater) {
        return Err(Error::ContractViolation(format!(
            "Ψ_{k} does not change sign on (2(1-2^-k), 2)"
        )));
    }
    for _ in 0..BISECTION_STEPS {
        let mid: BigInt = (&lo + &hi) >> 1usize;
        match at(&mid).sign() {
            Some(Ordering::Less) => lo = mid,
            Some(Ordering::Greater) => hi = mid,
            _ => break,
        }
    }
    // Newton on the midpoint; g(x) = x^(k+1) - 2x^k + 1
    let mut x = CertReal::from_parts((&lo + &hi) >> 1usize, BigUint::default(), work);
    let two = CertReal::from_i64(2, work);
    let tolerance = BigInt::one() << 8usize;
    for _ in 0..200 {
        let xk1 = x.powi(k as u64 - 1);
        let xk = xk1.mul(&x);
        let g = xk.mul(&x.sub(&two)).add(&CertReal::from_i64(1, work));
        let dg = xk.mul_i64(k as i64 + 1).sub(&xk1.mul_i64(2 * k as i64));
        let step = match g.div(&dg) {
            Ok(s) => s,
            Err(_) => break,
        };
        let next = CertReal::from_parts(x.mid_raw() - step.mid_raw(), BigUint::default(), work);
        let moved = (next.mid_raw() - x.mid_raw()).magnitude().clone();
        x = next;
        if BigInt::from(moved) <= tolerance {
            break;
        }
    }
    let delta = BigInt::one() << (work - bits + 2) as usize;
    let below = CertReal::from_parts(x.mid_raw() - &delta, BigUint::default(), work);
    let above = CertReal::from_parts(x.mid_raw() + &delta, BigUint::default(), work);
    if telescoped(k, &below).sign() == Some(Ordering::Less)
        && telescoped(k, &above).sign() == Some(Ordering::Greater)
    {
        let mag = delta.magnitude().clone();
        Ok(Some(CertReal::from_parts(x.mid_raw().clone(), mag, work)))
    } else {
        Ok(None)
    }
}

/// `|L_n^{(k)} - f_k(α)(2α - 1)α^(n-1)|`, certified strictly below `3/2`.
pub fn approx_defect(k: u32, n: u32, root: &DominantRoot) -> Result<CertReal> {
    if n < 1 {
        return invalid("defect is defined for n >= 1");
    }
    if root.k() != k {
        return invalid(format!("root is for k={}, asked for k={k}", root.k()));
    }
    let bits = root.alpha().bits();
    let term = klucas_prefix(k, n)?.pop().expect("non-empty prefix");
    let main = root.weight().mul(&root.alpha().powi(n as u64 - 1));
    let defect = CertReal::from_uint(&term, bits).sub(&main).abs();
    let bound = CertReal::from_ratio(&BigInt::from(3), &BigInt::from(2), bits);
    match defect.lt(&bound) {
        Some(true) => Ok(defect),
        Some(false) => Err(Error::ContractViolation(format!(
            "|e_{k}({n})| = {} is not below 3/2",
            defect.to_sci(8)
        ))),
        None => Err(Error::PrecisionFault(format!(
            "cannot decide |e_{k}({n})| < 3/2 at {} digits",
            root.digits()
        ))),
    }
}

/// Digits needed so that `α^(n-1)` keeps about `DEFAULT_PRECISION` correct
/// digits after the decimal point.
pub fn digits_for_index(n: u32) -> u32 {
    DEFAULT_PRECISION + (n as f64 * std::f64::consts::LOG10_2).ceil() as u32
}

/// [`approx_defect`] with the precision-doubling policy applied.
pub fn approx_defect_auto(k: u32, n: u32) -> Result<CertReal> {
    let mut digits = digits_for_index(n);
    for _ in 0..=MAX_DOUBLINGS {
        let root = dominant_root(k, digits)?;
        match approx_defect(k, n, &root) {
            Err(Error::PrecisionFault(_)) => digits *= 2,
            other => return other,
        }
    }
    Err(Error::PrecisionFault(format!("defect of L_{n}^({k}) undecidable")))
}

/// Which of the three linear forms a height budget belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormCase {
    /// `η_3 = f^-3 (2α-1)^-3 (a/9)`.
    Triple,
    /// `η_3 = f^-2 (2α-1)^-2 (a/9) / L_l`.
    Double { l: u32 },
    /// `η_3 = f^-1 (2α-1)^-1 (a/9) / (L_l L_m)`.
    Single { l: u32, m: u32 },
}

impl FormCase {
    pub fn from_parts(case: u8, l: Option<u32>, m: Option<u32>) -> Result<Self> {
        match (case, l, m) {
            (1, _, _) => Ok(FormCase::Triple),
            (2, Some(l), _) => Ok(FormCase::Double { l }),
            (3, Some(l), Some(m)) => Ok(FormCase::Single { l, m }),
            _ => invalid(format!("malformed height case {case} (l={l:?}, m={m:?})")),
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            FormCase::Triple => 1,
            FormCase::Double { .. } => 2,
            FormCase::Single { .. } => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeightBudget {
    pub case: FormCase,
    /// Upper bound on `h(η_3)` in nats.
    pub bound: CertReal,
}

/// Closed-form upper bound on the logarithmic height of the third algebraic
/// number of each linear form, assembled from `h(f_k(α)) < 3 log k`,
/// `h(2α - 1) < log 3` and `h(a/9) <= log 9`.
pub fn height_eta3(case: FormCase, k: u32, _a: u8, ctx: &Ctx) -> Result<HeightBudget> {
    if k < 2 {
        return invalid(format!("order k must be at least 2, got {k}"));
    }
    let log_k = ctx.ln_u64(k as u64);
    let log2 = ctx.ln2();
    let bound = match case {
        FormCase::Triple => log_k.mul_i64(17),
        FormCase::Double { l } => log_k.mul_i64(14).add(&log2.mul_i64(l as i64)),
        FormCase::Single { m, .. } => log_k.mul_i64(10).add(&log2.mul_i64(2 * m as i64)),
    };
    if !bound.is_positive() {
        return Err(Error::ContractViolation("height budget must be positive".into()));
    }
    Ok(HeightBudget { case, bound })
}

/// The height sum before the final `< c log k` relaxation, for checking that
/// relaxation: `log 9 + j·3 log k + j·log 3 (+ log of the L factors)`.
pub fn height_eta3_raw(case: FormCase, k: u32, ctx: &Ctx) -> CertReal {
    let log_k = ctx.ln_u64(k as u64);
    let log3 = ctx.ln_u64(3);
    let log9 = ctx.ln_u64(9);
    let log2 = ctx.ln2();
    match case {
        FormCase::Triple => log9.add(&log_k.mul_i64(9)).add(&log3.mul_i64(3)),
        // h(L_l) <= log(2 α^l) < log 2 + l log 2
        FormCase::Double { l } => log9
            .add(&log_k.mul_i64(6))
            .add(&log3.mul_i64(2))
            .add(&log2.mul_i64(l as i64 + 1)),
        FormCase::Single { l, m } => log9
            .add(&log_k.mul_i64(3))
            .add(&log3)
            .add(&log2.mul_i64((l + m) as i64 + 2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        let c = Ctx::new(40);
        let v = psi_eval(2, &c.int(2)).unwrap();
        assert!(v.sub(&c.int(1)).contains_zero());
        let v = psi_eval(5, &c.int(2)).unwrap();
        assert!(v.sub(&c.int(1)).contains_zero());
        let phi = c.int(1).add(&c.int(5).sqrt().unwrap()).div(&c.int(2)).unwrap();
        assert!(psi_eval(2, &phi).unwrap().contains_zero());
        assert!(psi_eval(3, &c.int(1)).is_err());
        assert!(psi_eval(1, &c.int(2)).is_err());
    }

    #[test]
    fn golden_ratio_and_tribonacci() {
        let r = dominant_root(2, 50).unwrap();
        let c = Ctx::new(50);
        let phi = c.int(1).add(&c.int(5).sqrt().unwrap()).div(&c.int(2)).unwrap();
        assert!(r.alpha().sub(&phi).abs().lt(&c.dec("1e-50")).unwrap());
        let r3 = dominant_root(3, 50).unwrap();
        // bisection oracle on x^3 - x^2 - x - 1 in f64
        let (mut lo, mut hi) = (1.5f64, 2.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m * m * m - m * m - m - 1.0 < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((r3.alpha().to_f64() - lo).abs() < 1e-15);
        assert!((lo - 1.839_286_755_214_16).abs() < 1e-13);
    }

    #[test]
    fn root_rejects_bad_input() {
        assert!(dominant_root(1, 50).is_err());
        assert!(dominant_root(3, 20).is_err());
    }

    #[test]
    fn root_encloses_sign_change_and_weight_bounds() {
        for k in [2u32, 3, 7, 40, 200, 650] {
            let r = dominant_root(k, 64).unwrap();
            assert!(r.certified_in_interval(), "k={k}");
            assert!(r.certified_weight_bounds(), "k={k}");
            assert!(r.alpha().radius_f64() < 1e-64);
        }
    }

    #[test]
    fn refinement_stays_inside_prior_interval() {
        for k in [2u32, 5, 31, 400] {
            let coarse = dominant_root(k, 40).unwrap();
            let fine = dominant_root(k, 80).unwrap();
            assert!(coarse.alpha().overlaps(fine.alpha()), "k={k}");
            assert!(fine.alpha().radius_f64() < coarse.alpha().radius_f64());
        }
    }

    #[test]
    fn golden_identity_for_k2() {
        let r = dominant_root(2, 60).unwrap();
        let c = Ctx::new(60);
        // f_2(α)(2α-1) = α, so 3 log α - 3 log(f(2α-1)) = 0
        let lhs = c
            .ln(r.alpha())
            .unwrap()
            .mul_i64(3)
            .sub(&c.ln(&r.weight()).unwrap().mul_i64(3));
        assert!(lhs.contains_zero());
        assert!(lhs.abs().lt(&c.dec("1e-55")).unwrap());
    }

    #[test]
    fn defect_examples() {
        let r = dominant_root(2, 60).unwrap();
        let psi = (1.0 - 5f64.sqrt()) / 2.0;
        let d10 = approx_defect(2, 10, &r).unwrap();
        assert!((d10.to_f64() - psi.abs().powi(10)).abs() < 1e-12);
        let d1 = approx_defect(2, 1, &r).unwrap();
        assert!((d1.to_f64() - 0.618_033_988_749_894_8).abs() < 1e-12);
        assert!(approx_defect_auto(5, 20).is_ok());
        assert!(approx_defect(3, 5, &r).is_err());
    }

    #[test]
    fn binet_bounds_sampled() {
        // α^(n-1) <= L_n <= 2 α^n
        for k in [2u32, 3, 4, 10, 30] {
            let r = dominant_root(k, 100).unwrap();
            let terms = klucas_prefix(k, 200).unwrap();
            for n in 2..=200u32 {
                let ln = CertReal::from_uint(&terms[n as usize], r.alpha().bits());
                let lower = r.alpha().powi(n as u64 - 1);
                let upper = r.alpha().powi(n as u64).mul_i64(2);
                assert_eq!(lower.lt(&ln), Some(true), "k={k} n={n}");
                assert_eq!(ln.lt(&upper), Some(true), "k={k} n={n}");
            }
            assert_eq!(terms[1], BigUint::one());
        }
    }

    #[test]
    fn height_budgets() {
        let c = Ctx::new(40);
        let h = height_eta3(FormCase::Triple, 10, 1, &c).unwrap();
        assert!((h.bound.to_f64() - 17.0 * 10f64.ln()).abs() < 1e-12);
        assert!((h.bound.to_f64() - 39.14).abs() < 0.01);
        let h = height_eta3(FormCase::Double { l: 0 }, 2, 1, &c).unwrap();
        assert!((h.bound.to_f64() - 9.704).abs() < 1e-3);
        let h = height_eta3(FormCase::Single { l: 0, m: 5 }, 3, 1, &c).unwrap();
        assert!((h.bound.to_f64() - 17.917).abs() < 1e-3);
        assert!(FormCase::from_parts(2, None, None).is_err());
        assert!(FormCase::from_parts(4, Some(1), Some(1)).is_err());
    }

    #[test]
    fn triple_height_relaxation_holds() {
        let c = Ctx::new(40);
        for k in 2..=650u32 {
            let raw = height_eta3_raw(FormCase::Triple, k, &c);
            let budget = height_eta3(FormCase::Triple, k, 9, &c).unwrap().bound;
            assert_eq!(raw.lt(&budget), Some(true), "k={k}");
        }
    }
}
