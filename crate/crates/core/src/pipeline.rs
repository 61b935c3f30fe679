//! Stage runners that turn each part of the proof into certificate records,
//! and `prove_all`, which chains them.

use std::path::PathBuf;
use std::time::Instant;

use crate::bounds::{bound_k_large, case_n_le_k, chain_milestones, BoundChain, BoundSource};
use crate::cert::{Ctx, DEFAULT_PRECISION};
use crate::certificate::{ProofCertificate, StageRecord};
use crate::error::Result;
use crate::lucas::{SolutionRecord, PUBLISHED_SOLUTIONS};
use crate::reduce::{k_reduce, run_campaigns, CampaignConfig, CampaignResult, KCampaigns, KReduction, MAX_ADVANCE};
use crate::root::dominant_root;
use crate::search::{corollaries, sweep_small, sweep_verify, Checkpoint, SweepConfig, SweepReport};

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub precision_start: u32,
    pub precision_cap: u32,
    pub max_advance: usize,
    pub lookahead: usize,
    /// Directory for sweep checkpoints; none disables checkpointing.
    pub out_dir: Option<PathBuf>,
    pub resume: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let c = CampaignConfig::default();
        PipelineConfig {
            precision_start: DEFAULT_PRECISION,
            precision_cap: c.max_digits,
            max_advance: MAX_ADVANCE,
            lookahead: c.lookahead,
            out_dir: None,
            resume: false,
        }
    }
}

impl PipelineConfig {
    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            start_digits: self.precision_start,
            max_advance: self.max_advance,
            lookahead: self.lookahead,
            max_digits: self.precision_cap,
        }
    }
}

fn solutions_field(s: &[SolutionRecord]) -> String {
    if s.is_empty() {
        "none".into()
    } else {
        s.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
    }
}

pub fn stage_sweep_small() -> Result<(StageRecord, Vec<SolutionRecord>)> {
    let sols = sweep_small()?;
    let mut r = StageRecord::new("sweep-small");
    r.push("domain", "2<=k<=25, 0<=l<=m<=n<=25, d>=2")
        .push("overlap", "n<=k handled by case-n-le-k; n>25 or k>25 by the reductions")
        .push("count", sols.len())
        .push("solutions", solutions_field(&sols));
    Ok((r, sols))
}

pub fn stage_corollaries(solutions: &[SolutionRecord]) -> Result<StageRecord> {
    let c = corollaries(solutions)?;
    let mut r = StageRecord::new("corollaries");
    r.push(
        "two_factor",
        c.two_factor.iter().map(|t| format!("L{}^({})L{}^({})={}", t.n, t.k, t.m, t.k, t.value)).collect::<Vec<_>>().join(" "),
    )
    .push("lucas_set", c.lucas_set.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    Ok(r)
}

pub fn stage_case_n_le_k() -> Result<StageRecord> {
    let s = case_n_le_k()?;
    let mut r = StageRecord::new("case-n-le-k");
    r.push("formula", "3^5 2^(n+m+l-6) = a(10^d-1)")
        .push("index_sum_max", s.index_sum_max)
        .push("n_max", s.n_max)
        .push("l9_max", &s.l9_max)
        .push("cells_checked", s.cells_checked)
        .push("solutions", solutions_field(&s.solutions));
    Ok(r)
}

pub fn stage_chain(digits: u32) -> Result<StageRecord> {
    let ctx = Ctx::new(digits);
    let mut r = StageRecord::new("bound-chain");
    r.push("precision", digits);
    for m in chain_milestones(&ctx)? {
        r.push(m.name.replace(' ', "_"), format!("{} <= {} {}", m.assembled.hi_sci(6), m.stated, m.holds));
    }
    Ok(r)
}

pub fn stage_bounds(k: u32, digits: u32) -> Result<StageRecord> {
    let chain = BoundChain::matveev(k as u64)?;
    let root = dominant_root(k, digits)?;
    let ctx = Ctx::new(10);
    let sci = |v: &num_bigint::BigUint| ctx.ubig(v).hi_sci(6);
    let mut r = StageRecord::new("bounds");
    r.push("k", k)
        .push("precision", digits)
        .push("alpha", root.alpha().to_sci(20))
        .push("alpha_in_interval", root.certified_in_interval())
        .push("fk_alpha", root.fk_alpha().to_sci(20))
        .push("fk_alpha_in_interval", root.certified_weight_bounds())
        .push("n_bound", format!("{} (1.8e45 k^12 log^7 k)", sci(&chain.n_bound)))
        .push("m_bound", format!("{} (2.2e25 k^8 log^3 k log^2 3n)", sci(&chain.m_bound)))
        .push("l_bound", format!("{} (2.3e13 k^4 log^2 k log 3n)", sci(&chain.l_bound)));
    Ok(r)
}

pub fn stage_k_large(digits: u32) -> Result<StageRecord> {
    let ctx = Ctx::new(digits);
    let b = bound_k_large(&ctx)?;
    let mut r = StageRecord::new("k-large");
    r.push("precision", digits)
        .push("coefficient", format!("{} <= 1.63e14", b.coefficient.hi_sci(6)))
        .push("fixed_point", b.raw_fixed_point.hi_sci(6))
        .push("k_bound", b.bound)
        .push("k_bound_certified", b.bound_certified)
        .push("n_bound", format!("{} < 3.3e245 {}", ctx.ubig(&b.n_bound).hi_sci(6), b.n_bound_holds))
        .push("n_below_half_power", b.n_below_half_power)
        .push("log_3n_envelope", b.log_3n_envelope)
        .push("zeta_tail", b.tail_holds);
    Ok(r)
}

pub fn stage_k_reduce(max_advance: usize) -> Result<(StageRecord, KReduction)> {
    let kr = k_reduce(max_advance)?;
    let mut r = StageRecord::new("k-reduce");
    r.push("formula", "k/2-4 < log(q/(eps log 10))/log 2");
    for round in &kr.rounds {
        let p = format!("round{}", round.round);
        r.push(format!("{p}_m"), format!("{} dominates_3n_bound={}", Ctx::new(10).ubig(&round.m).hi_sci(3), round.m_dominates))
            .push(format!("{p}_k_prev"), round.k_prev)
            .push(format!("{p}_first_index"), round.first_index);
        for (a, first, next, used) in &round.per_a {
            r.push(
                format!("{p}_a{a}"),
                format!(
                    "eps(q{})={} eps(q{})={} used=q{} w<{}",
                    first.convergent_index,
                    first.epsilon.to_sci(6),
                    next.convergent_index,
                    next.epsilon.to_sci(6),
                    used.convergent_index,
                    used.w_real.as_ref().map(|w| w.hi_sci(6)).unwrap_or_default()
                ),
            );
        }
        r.push(format!("{p}_min_epsilon"), round.min_epsilon.to_sci(6))
            .push(format!("{p}_w_real"), round.w_real.hi_sci(8))
            .push(format!("{p}_k_below"), &round.k_bound);
    }
    r.push("contradiction", kr.contradiction);
    Ok((r, kr))
}

fn campaign_fields(r: &mut StageRecord, c: &CampaignResult) {
    let p = c.campaign.to_string();
    let degenerate: Vec<String> = c
        .degenerate_cells()
        .iter()
        .map(|k| {
            let mut s = format!("(k={},a={}", k.k, k.a);
            if let Some(l) = k.l {
                s += &format!(",l={l}");
            }
            if let Some(m) = k.m {
                s += &format!(",m={m}");
            }
            s + ")"
        })
        .collect();
    r.push(format!("{p}_m"), &c.m_k)
        .push(format!("{p}_first_index"), c.first_index)
        .push(format!("{p}_max_index"), c.max_index)
        .push(format!("{p}_cells"), c.cells.len())
        .push(format!("{p}_pruned"), c.pruned)
        .push(format!("{p}_min_epsilon"), c.min_epsilon.as_ref().map(|e| e.to_sci(6)).unwrap_or_else(|| "-".into()))
        .push(format!("{p}_bound_real"), format!("{:.2}", c.bound_real))
        .push(format!("{p}_{}_max", c.campaign.variable()), c.bound)
        .push(format!("{p}_degenerate"), if degenerate.is_empty() { "none".into() } else { degenerate.join(" ") });
}

pub fn stage_campaigns(k: u32, cfg: &PipelineConfig) -> Result<(StageRecord, Vec<String>, KCampaigns, BoundChain)> {
    let kc = run_campaigns(k, &cfg.campaign())?;
    let mut r = StageRecord::new("campaigns");
    r.push("k", k).push("formula", "w < log(A q/eps)/log alpha; Legendre for mu = j tau mod 1");
    let mut cells = Vec::new();
    for c in [&kc.gamma1, &kc.gamma2, &kc.gamma3] {
        campaign_fields(&mut r, c);
        cells.extend(c.cells.iter().map(|x| x.line()));
    }
    let source = |c: &CampaignResult| {
        if c.reduced_bound().is_none_or(|b| b < c.bound.into()) && !c.degenerate_cells().is_empty() {
            BoundSource::Legendre
        } else {
            BoundSource::Reduction
        }
    };
    let chain = BoundChain {
        k: k as u64,
        l_bound: kc.gamma1.bound.into(),
        m_bound: kc.gamma2.bound.into(),
        n_bound: kc.gamma3.bound.into(),
        provenance: [source(&kc.gamma1), source(&kc.gamma2), source(&kc.gamma3)],
    };
    r.push("provenance", chain.provenance.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","));
    Ok((r, cells, kc, chain))
}

pub fn stage_verify(k: u32, n_max: u32, m_max: u32, l_max: u32, cfg: &PipelineConfig) -> Result<(StageRecord, SweepReport)> {
    let checkpoint = match &cfg.out_dir {
        Some(dir) => Some(Checkpoint::open(
            &dir.join(format!("verify-k{k}")),
            &SweepConfig::new(k, k, n_max, m_max, l_max)?,
            cfg.resume,
        )?),
        None => None,
    };
    let rep = sweep_verify(k, n_max, m_max, l_max, checkpoint)?;
    let mut r = StageRecord::new("verify");
    r.push("k", k)
        .push("n_max", n_max)
        .push("m_max", m_max)
        .push("l_max", l_max)
        .push("prunes", "v2<=3 v5<=1 d-window residue-1e9")
        .push("cells", rep.stats.cells)
        .push("valuation_pruned", rep.stats.valuation_pruned)
        .push("full_tests", rep.stats.full_tests)
        .push("solutions", solutions_field(&rep.solutions));
    Ok((r, rep))
}

#[derive(Clone, Debug)]
pub struct ProofOutcome {
    pub certificate: ProofCertificate,
    pub table: Vec<SolutionRecord>,
    /// The recomputed table equals the published one.
    pub matches_published: bool,
}

/// Every stage for `2 <= k <= min(k_max, 650)`, plus the `k > 650` analysis.
pub fn prove_all(k_max: u32, cfg: &PipelineConfig) -> Result<ProofOutcome> {
    let mut cert = ProofCertificate::new(cfg.precision_start, cfg.precision_cap);
    let mut table = std::collections::BTreeSet::new();
    let digits = cfg.precision_start.max(DEFAULT_PRECISION);

    let t = Instant::now();
    let (r, small) = stage_sweep_small()?;
    cert.add_stage(r, t.elapsed());
    table.extend(small.iter().copied());

    let t = Instant::now();
    cert.add_stage(stage_corollaries(&small)?, t.elapsed());
    let t = Instant::now();
    cert.add_stage(stage_case_n_le_k()?, t.elapsed());
    let t = Instant::now();
    cert.add_stage(stage_chain(digits)?, t.elapsed());

    for k in 2..=k_max.min(650) {
        let t = Instant::now();
        cert.add_stage(stage_bounds(k, digits)?, t.elapsed());
        let t = Instant::now();
        let (r, cells, _, chain) = stage_campaigns(k, cfg)?;
        cert.add_stage(r, t.elapsed());
        cert.cells.extend(cells);
        let big = |v: &num_bigint::BigUint| u32::try_from(v).expect("reduced bounds are small");
        let t = Instant::now();
        let (r, rep) = stage_verify(k, big(&chain.n_bound), big(&chain.m_bound), big(&chain.l_bound), cfg)?;
        cert.add_stage(r, t.elapsed());
        table.extend(rep.solutions);
    }

    let t = Instant::now();
    cert.add_stage(stage_k_large(digits)?, t.elapsed());
    let t = Instant::now();
    let (r, _) = stage_k_reduce(cfg.max_advance)?;
    cert.add_stage(r, t.elapsed());

    let table: Vec<SolutionRecord> = table.into_iter().collect();
    let matches_published = table == PUBLISHED_SOLUTIONS.to_vec();
    let mut r = StageRecord::new("final");
    r.push("k_max", k_max)
        .push("count", table.len())
        .push("matches_published", matches_published)
        .push("solutions", solutions_field(&table));
    cert.add_stage(r, std::time::Duration::ZERO);
    cert.solutions = table.clone();
    Ok(ProofOutcome { certificate: cert, table, matches_published })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_stages() {
        let (r, s) = stage_sweep_small().unwrap();
        assert_eq!(s.len(), 13);
        assert_eq!(r.get("count"), Some("13"));
        let c = stage_case_n_le_k().unwrap();
        assert_eq!(c.get("n_max"), Some("9"));
        assert_eq!(c.get("solutions"), Some("none"));
    }

    #[test]
    fn bounds_stage_reports_interval_checks() {
        let r = stage_bounds(5, 60).unwrap();
        assert_eq!(r.get("alpha_in_interval"), Some("true"));
        assert_eq!(r.get("fk_alpha_in_interval"), Some("true"));
    }
}
