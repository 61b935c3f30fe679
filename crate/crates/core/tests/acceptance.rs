//! End-to-end acceptance checks, one test per criterion. Each prints a
//! `criterion N: PASS|FAIL` line with the measured values; run with
//! `--nocapture` to see them all.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use klucas::bounds::{bound_k_large, case_n_le_k, certified_ceil, chain_milestones};
use klucas::cert::{parse_decimal_uint, CertReal, Ctx};
use klucas::contfrac::{CfStream, FnTarget, LogAlphaRatio, LogTwoTen};
use klucas::lucas::{klucas_prefix, PUBLISHED_SOLUTIONS};
use klucas::reduce::{k_reduce, reduce_with_retry, run_campaigns, CampaignConfig, CellKey, CellResult, KCampaigns, ReductionInstance, Status, MAX_ADVANCE};
use klucas::root::{approx_defect, digits_for_index, dominant_root};
use klucas::search::{corollaries, published_for, sweep, sweep_small, sweep_verify, SweepConfig, PUBLISHED_LUCAS_SET};
use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn report(n: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {n}: {} : {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn within(t: Duration, limit_secs: u64) -> bool {
    t <= Duration::from_secs(limit_secs)
}

#[test]
fn criterion_01_table_reproduction() {
    let t = Instant::now();
    let s = sweep_small().unwrap();
    let el = t.elapsed();
    let pass = s == PUBLISHED_SOLUTIONS.to_vec() && within(el, 300);
    report(1, pass, format!("{} tuples, exact match {}, {:.2?}", s.len(), s == PUBLISHED_SOLUTIONS.to_vec(), el));
}

#[test]
fn criterion_02_lucas_repdigit_set() {
    let c = corollaries(&sweep_small().unwrap()).unwrap();
    let got: BTreeSet<u64> = c.lucas_set.iter().copied().collect();
    let want: BTreeSet<u64> = PUBLISHED_LUCAS_SET.iter().copied().collect();
    let extra: Vec<_> = got.difference(&want).collect();
    let missing: Vec<_> = want.difference(&got).collect();
    report(2, got == want, format!("derived {got:?}; extra {extra:?}; missing {missing:?}"));
}

#[test]
fn criterion_03_n_le_k_case() {
    let t = Instant::now();
    let r = case_n_le_k().unwrap();
    let el = t.elapsed();
    let pass = r.index_sum_max - 6 <= 3 && r.n_max == 9 && r.solutions.is_empty() && el < Duration::from_secs(1);
    report(3, pass, format!("n+m+l-6 <= {}, n <= {}, {} cells, {} solutions, {:.2?}", r.index_sum_max - 6, r.n_max, r.cells_checked, r.solutions.len(), el));
}

#[test]
fn criterion_04_root_and_weight_intervals() {
    let t = Instant::now();
    let bad: Vec<u32> = (2..=650u32)
        .filter(|&k| {
            let r = dominant_root(k, 100).unwrap();
            !(r.certified_in_interval() && r.certified_weight_bounds())
        })
        .collect();
    let el = t.elapsed();
    report(4, bad.is_empty() && within(el, 600), format!("violations at k = {bad:?}, {:.2?}", el));
}

#[test]
fn criterion_05_approximation_defect() {
    let mut violations = Vec::new();
    let mut checked = 0;
    for k in 2..=30u32 {
        let root = dominant_root(k, digits_for_index(300)).unwrap();
        for n in k + 1..=300 {
            checked += 1;
            if approx_defect(k, n, &root).is_err() {
                violations.push((k, n));
            }
        }
    }
    report(5, violations.is_empty(), format!("{checked} pairs, violations {violations:?}"));
}

#[test]
fn criterion_06_bound_chain_milestones() {
    let (lo, hi) = (Ctx::new(300), Ctx::new(600));
    let a = chain_milestones(&lo).unwrap();
    let b = chain_milestones(&hi).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (x, y) in a.iter().zip(&b) {
        let (cx, cy) = (x.assembled.ceil_hi(), y.assembled.ceil_hi());
        let agree = cx == cy && x.assembled.floor_lo() + 1 == cx;
        pass &= agree && x.holds && y.holds;
        lines.push(format!("{} {} <= {} ceil-agree {}", x.name, x.assembled.hi_sci(5), x.stated, agree));
    }
    let kl = bound_k_large(&lo).unwrap();
    pass &= kl.bound_certified && kl.n_bound_holds && kl.bound == 6_000_000_000_000_000;
    let n_ceil = certified_ceil(60, |c| klucas::bounds::bound_n_value(kl.bound, c)).unwrap();
    pass &= n_ceil == kl.n_bound;
    lines.push(format!("k < {} certified {}, n < 3.3e245 {}", kl.bound, kl.bound_certified, kl.n_bound_holds));
    report(6, pass, lines.join("; "));
}

#[test]
fn criterion_07_continued_fractions() {
    let t = Instant::now();
    let mut s = CfStream::new(Arc::new(LogAlphaRatio { k: 2 }), 64);
    s.ensure_len(8).unwrap();
    let prefix: Vec<i64> = s.quotients()[..8].iter().map(|q| q.to_i64().unwrap()).collect();
    let window = parse_decimal_uint("1.8e48").unwrap();
    let beyond = s.first_q_exceeding(&window).unwrap().index;
    let last = beyond - 1;
    s.ensure_len(last + 2).unwrap();
    let max_upto_last = s.quotients()[..=last].iter().max().unwrap().clone();
    let max_with_next = s.quotients()[..=last + 1].iter().max().unwrap().clone();
    let mut t2 = CfStream::new(Arc::new(LogTwoTen), 64);
    let i504 = t2.first_q_exceeding(&parse_decimal_uint("6e246").unwrap()).unwrap().index;
    let i184 = t2.first_q_exceeding(&(parse_decimal_uint("2.94e90").unwrap() * 6u32)).unwrap().index;
    let el = t.elapsed();
    let near = |i: usize, c: usize| i.abs_diff(c) <= 2;
    let pass = prefix == [0, 4, 1, 3, 1, 1, 1, 6]
        && max_upto_last == BigInt::from(106)
        && max_with_next == BigInt::from(106)
        && near(i504, 504)
        && near(i184, 184)
        && within(el, 60);
    report(
        7,
        pass,
        format!("prefix {prefix:?}, last q <= 1.8e48 at i = {last}, max a = {max_upto_last} ({max_with_next} with a_(i+1)), indices {i504} and {i184}, {:.2?}", el),
    );
}

#[test]
fn criterion_08_k_reduction() {
    let kr = k_reduce(MAX_ADVANCE).unwrap();
    let (r1, r2) = (&kr.rounds[0], &kr.rounds[1]);
    let all_pos = kr.rounds.iter().all(|r| r.per_a.iter().all(|(_, _, _, o)| o.status == Status::Ok && o.epsilon.is_positive()));
    let w1 = r1.w_real.hi_f64();
    let w2 = r2.w_real.hi_f64();
    let pass = all_pos
        && r1.m_dominates
        && r2.m_dominates
        && w1 < 825.0
        && r1.k_bound <= BigInt::from(1660)
        && w2 < 310.0
        && r2.k_bound <= BigInt::from(630)
        && kr.contradiction;
    let f1 = r1.min_epsilon.to_f64() / 0.05055;
    let f2 = r2.min_epsilon.to_f64() / 0.009382;
    report(
        8,
        pass,
        format!(
            "round 1: w < {w1:.2}, k < {}, min eps {} (ratio to published floor {f1:.2}); round 2: w < {w2:.2}, k < {}, min eps {} (ratio {f2:.2}); contradiction {}",
            r1.k_bound,
            r1.min_epsilon.to_sci(6),
            r2.k_bound,
            r2.min_epsilon.to_sci(6),
            kr.contradiction
        ),
    );
}

fn campaigns_k2() -> &'static (KCampaigns, Duration) {
    static CELL: OnceLock<(KCampaigns, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let r = run_campaigns(2, &CampaignConfig::default()).unwrap();
        (r, t.elapsed())
    })
}

#[test]
fn criterion_09_campaign_spot_checks() {
    let published = [
        (3u32, 230.93),
        (100, 263.5),
        (200, 273.95),
        (300, 284.7),
        (400, 281.1),
        (500, 284.9),
        (600, 293.97),
        (605, 297.4),
        (650, 290.3),
    ];
    let mut total = Duration::ZERO;
    let mut pass = true;
    let mut lines = Vec::new();
    let (k2, t2) = campaigns_k2();
    total += *t2;
    let ok2 = k2.gamma1.bound <= 300 && k2.gamma2.bound <= 606 && k2.gamma3.bound_real <= 1216.0 + 3.0;
    pass &= ok2;
    lines.push(format!("k=2 l<={} m<={} n<{:.2}", k2.gamma1.bound, k2.gamma2.bound, k2.gamma3.bound_real));
    for (k, stated) in published {
        let t = Instant::now();
        let r = run_campaigns(k, &CampaignConfig::default()).unwrap();
        total += t.elapsed();
        let ok = r.gamma1.bound <= 300 && r.gamma2.bound <= 300 && r.gamma3.bound_real <= stated + 3.0;
        pass &= ok;
        lines.push(format!("k={k} l<={} m<={} n<{:.2} (published {stated}){}", r.gamma1.bound, r.gamma2.bound, r.gamma3.bound_real, if ok { "" } else { " EXCEEDS" }));
    }
    pass &= within(total, 1800);
    lines.push(format!("{:.1?}", total));
    report(9, pass, lines.join("; "));
}

#[test]
fn criterion_10_degenerate_path() {
    let (k2, _) = campaigns_k2();
    let key = |l, m| CellKey { k: 2, a: 9, l, m };
    let routed = [
        k2.gamma1.degenerate_cells() == vec![key(None, None)],
        k2.gamma2.degenerate_cells() == vec![key(Some(1), None)],
        k2.gamma3.degenerate_cells() == vec![key(Some(1), Some(1))],
    ];
    let legendre_bound = |cells: &[klucas::reduce::CellRecord], shift: u32| -> Option<BigInt> {
        cells.iter().find_map(|c| match &c.result {
            CellResult::Legendre { bound, .. } => Some(&bound.exponent_max + shift),
            _ => None,
        })
    };
    let l = legendre_bound(&k2.gamma1.cells, 3).unwrap();
    let m = legendre_bound(&k2.gamma2.cells, 2).unwrap();
    let n = legendre_bound(&k2.gamma3.cells, 1).unwrap();
    let pass = routed.iter().all(|&b| b) && l < BigInt::from(250) && m < BigInt::from(250) && k2.gamma3.bound_real < 1216.0;
    report(
        10,
        pass,
        format!("routing {routed:?}; Legendre path gives l <= {l}, m <= {m}, n <= {n}; n(2) < {:.2}", k2.gamma3.bound_real),
    );
}

fn is_square(r: u32) -> bool {
    let s = (r as f64).sqrt().round() as u32;
    s * s == r
}

#[test]
fn criterion_11_reduction_soundness() {
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 50, failure_persistence: None, max_global_rejects: 10_000, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let strategy = (2u32..80, 1i64..40, 2i64..40, 10u32..=500, 1i64..=10, 2i64..=3);
    let instances = std::cell::Cell::new(0);
    let counterexamples = std::cell::RefCell::new(Vec::new());
    let result = runner.run(&strategy, |(r, c, d, m, a, b)| {
        prop_assume!(!is_square(r) && c % d != 0);
        let tau = Arc::new(FnTarget::new(format!("sqrt {r}"), move |ctx: &Ctx| ctx.int(r as i64).sqrt()));
        let inst = ReductionInstance::new(
            tau.clone(),
            Arc::new(FnTarget::new(format!("{c}/{d}"), move |ctx: &Ctx| Ok(ctx.ratio(c, d)))),
            BigUint::from(m),
            Arc::new(FnTarget::new(format!("{a}"), move |ctx: &Ctx| Ok(ctx.int(a)))),
            Arc::new(FnTarget::new(format!("{b}"), move |ctx: &Ctx| Ok(ctx.int(b)))),
            "toy",
        )
        .unwrap();
        let mut stream = CfStream::new(tau, 40);
        let out = reduce_with_retry(&inst, &mut stream, 40);
        prop_assume!(matches!(&out, Ok(o) if o.status == Status::Ok));
        let w0: u64 = out.unwrap().w_bound.unwrap().try_into().unwrap();
        let ctx = Ctx::new(80);
        let tau = ctx.int(r as i64).sqrt().unwrap();
        let mu = ctx.ratio(c, d);
        for u in 1..=m as i64 {
            let dist = tau.mul_i64(u).add(&mu).dist_to_nearest_int();
            for w in w0..w0 + 4 {
                let rhs: CertReal = ctx.int(a).div(&ctx.int(b).powi(w)).unwrap();
                if dist.lt(&rhs) != Some(false) {
                    counterexamples.borrow_mut().push((r, c, d, m, a, b, u, w));
                }
            }
        }
        instances.set(instances.get() + 1);
        Ok(())
    });
    let (instances, counterexamples) = (instances.get(), counterexamples.into_inner());
    let pass = result.is_ok() && instances >= 50 && counterexamples.is_empty();
    report(11, pass, format!("{instances} instances, counterexamples {counterexamples:?}, runner {result:?}"));
}

#[test]
fn criterion_12_verification_sweeps() {
    let t = Instant::now();
    let k2 = sweep_verify(2, 1216, 606, 300, None).unwrap().solutions;
    let t2 = t.elapsed();
    let k4 = sweep_verify(4, 297, 300, 300, None).unwrap().solutions;
    let k7 = sweep_verify(7, 297, 300, 300, None).unwrap().solutions;
    let cfg = SweepConfig::new(2, 6, 60, 60, 60).unwrap();
    let pruned = sweep(&cfg, None).unwrap().solutions;
    let unpruned = sweep(&cfg.unpruned(), None).unwrap().solutions;
    // terms reach the stated size
    let big = klucas_prefix(2, 1216).unwrap().pop().unwrap().to_str_radix(10).len();
    let pass = k2 == published_for(2) && k4 == published_for(4) && k7.is_empty() && pruned == unpruned && within(t2, 7200);
    report(
        12,
        pass,
        format!(
            "k=2: {} tuples ({:.2?}, L_1216 has {big} digits); k=4: {} tuples; k=7: {}; pruned == unpruned on k<=6, n<=60: {}",
            k2.len(),
            t2,
            k4.len(),
            k7.len(),
            pruned == unpruned
        ),
    );
}
