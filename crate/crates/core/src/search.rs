//! Exhaustive searches for `L_n L_m L_l = a (10^d - 1) / 9`.
//!
//! Each `(k, l)` pair is one shard. Inside a shard `L_l L_m` is fixed per
//! `m` and `n` streams upward; cells are rejected first by 2-/5-adic
//! valuations, then by the low nine digits, and only survivors are
//! multiplied out in full.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::bounds::d_window;
use crate::error::{invalid, Error, Result};
use crate::lucas::{as_repdigit, is_repdigit_residue, klucas_prefix, valuation, SolutionRecord, ValuationPrime, PUBLISHED_SOLUTIONS};

const RESIDUE: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub n_max: u32,
    pub m_max: u32,
    pub l_max: u32,
    pub d_min: u32,
    pub prune_valuation: bool,
    pub prune_d_window: bool,
}

impl SweepConfig {
    pub fn new(k_min: u32, k_max: u32, n_max: u32, m_max: u32, l_max: u32) -> Result<Self> {
        let cfg = SweepConfig { k_min, k_max, n_max, m_max, l_max, d_min: 2, prune_valuation: true, prune_d_window: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min < 2 || self.k_max > 650 || self.k_min > self.k_max {
            return invalid(format!("k range {}..={} must lie within 2..=650", self.k_min, self.k_max));
        }
        Ok(())
    }

    pub fn unpruned(mut self) -> Self {
        self.prune_valuation = false;
        self.prune_d_window = false;
        self
    }

    /// Line identifying the search domain, stored in checkpoints.
    pub fn fingerprint(&self) -> String {
        format!(
            "# k={}..{} n<={} m<={} l<={} d>={} v={} w={}",
            self.k_min, self.k_max, self.n_max, self.m_max, self.l_max, self.d_min, self.prune_valuation, self.prune_d_window
        )
    }

    fn shards(&self) -> Vec<(u32, u32)> {
        let top = self.l_max.min(self.m_max).min(self.n_max);
        (self.k_min..=self.k_max).flat_map(|k| (0..=top).map(move |l| (k, l))).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub cells: u64,
    pub valuation_pruned: u64,
    pub residue_rejected: u64,
    pub full_tests: u64,
    pub window_rejected: u64,
}

impl SweepStats {
    fn absorb(&mut self, o: &SweepStats) {
        self.cells += o.cells;
        self.valuation_pruned += o.valuation_pruned;
        self.residue_rejected += o.residue_rejected;
        self.full_tests += o.full_tests;
        self.window_rejected += o.window_rejected;
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub solutions: Vec<SolutionRecord>,
    pub stats: SweepStats,
    pub shards: usize,
    pub resumed_shards: usize,
}

struct KTable {
    terms: Vec<BigUint>,
    residues: Vec<u64>,
    v2: Vec<u32>,
    v5: Vec<u32>,
}

impl KTable {
    fn new(k: u32, n_max: u32) -> Result<Self> {
        let terms = klucas_prefix(k, n_max)?;
        let residues = terms.iter().map(|t| (t % RESIDUE).to_u64().expect("residue fits")).collect();
        let v2 = terms.iter().map(|t| valuation(ValuationPrime::Two, t)).collect::<Result<_>>()?;
        let v5 = terms.iter().map(|t| valuation(ValuationPrime::Five, t)).collect::<Result<_>>()?;
        Ok(KTable { terms, residues, v2, v5 })
    }
}

fn mul_mod(x: u64, y: u64) -> u64 {
    ((x as u128 * y as u128) % RESIDUE as u128) as u64
}

fn run_shard(cfg: &SweepConfig, t: &KTable, k: u32, l: u32) -> Result<(Vec<SolutionRecord>, SweepStats)> {
    let mut st = SweepStats::default();
    let mut out = Vec::new();
    let li = l as usize;
    for m in l..=cfg.m_max.min(cfg.n_max) {
        let mi = m as usize;
        let (v2_lm, v5_lm) = (t.v2[li] + t.v2[mi], t.v5[li] + t.v5[mi]);
        if cfg.prune_valuation && (v2_lm > 3 || v5_lm > 1) {
            st.cells += (cfg.n_max - m + 1) as u64;
            st.valuation_pruned += (cfg.n_max - m + 1) as u64;
            continue;
        }
        let r_lm = mul_mod(t.residues[li], t.residues[mi]);
        let p_lm = &t.terms[li] * &t.terms[mi];
        for n in m..=cfg.n_max {
            let ni = n as usize;
            st.cells += 1;
            if cfg.prune_valuation && (v2_lm + t.v2[ni] > 3 || v5_lm + t.v5[ni] > 1) {
                st.valuation_pruned += 1;
                continue;
            }
            if !is_repdigit_residue(mul_mod(r_lm, t.residues[ni])) {
                st.residue_rejected += 1;
                continue;
            }
            st.full_tests += 1;
            let product = &p_lm * &t.terms[ni];
            let Some(rep) = as_repdigit(&product)? else { continue };
            if rep.d() < cfg.d_min {
                continue;
            }
            if cfg.prune_d_window && n >= 2 {
                let (lo, hi) = d_window(n, m, l)?;
                if rep.d() < lo || rep.d() > hi {
                    st.window_rejected += 1;
                    continue;
                }
            }
            out.push(SolutionRecord::new(k, n, m, l, rep.a(), rep.d()));
        }
    }
    Ok((out, st))
}

/// Completed shards and their solutions, persisted atomically after each
/// shard as `checkpoint.csv` (`k,l,done`) and `results.csv`.
pub struct Checkpoint {
    dir: PathBuf,
    fingerprint: String,
    done: BTreeSet<(u32, u32)>,
    results: BTreeSet<SolutionRecord>,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.csv";
pub const RESULTS_FILE: &str = "results.csv";

impl Checkpoint {
    /// Open `dir`; with `resume` earlier progress for the same configuration
    /// is loaded, otherwise it is discarded.
    pub fn open(dir: &Path, cfg: &SweepConfig, resume: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut cp = Checkpoint { dir: dir.to_path_buf(), fingerprint: cfg.fingerprint(), done: BTreeSet::new(), results: BTreeSet::new() };
        let path = dir.join(CHECKPOINT_FILE);
        if resume && path.exists() {
            let text = fs::read_to_string(&path)?;
            let mut lines = text.lines();
            if lines.next() != Some(cp.fingerprint.as_str()) {
                return invalid(format!("checkpoint in {} belongs to a different sweep", dir.display()));
            }
            for line in lines {
                let f: Vec<&str> = line.split(',').collect();
                match f.as_slice() {
                    [k, l, "done"] => {
                        cp.done.insert((parse(k)?, parse(l)?));
                    }
                    _ => return invalid(format!("bad checkpoint line {line:?}")),
                }
            }
            cp.results = read_results(&dir.join(RESULTS_FILE))?.into_iter().collect();
        }
        Ok(cp)
    }

    pub fn is_done(&self, k: u32, l: u32) -> bool {
        self.done.contains(&(k, l))
    }

    pub fn record(&mut self, k: u32, l: u32, found: &[SolutionRecord]) -> Result<()> {
        self.done.insert((k, l));
        self.results.extend(found.iter().copied());
        self.flush()
    }

    fn flush(&self) -> Result<()> {
        let mut cp = format!("{}\n", self.fingerprint);
        for (k, l) in &self.done {
            writeln!(cp, "{k},{l},done").expect("string write");
        }
        write_atomic(&self.dir.join(CHECKPOINT_FILE), cp.as_bytes())?;
        write_atomic(&self.dir.join(RESULTS_FILE), results_csv(&self.results.iter().copied().collect::<Vec<_>>())?.as_bytes())
    }

    pub fn results(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.results.iter()
    }
}

fn parse(s: &str) -> Result<u32> {
    s.trim().parse().map_err(|_| Error::InvalidInput(format!("not an integer: {s:?}")))
}

/// Replace `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `k,n,m,l,a,d,product` rows with a header.
pub fn results_csv(rows: &[SolutionRecord]) -> Result<String> {
    let mut s = String::from("k,n,m,l,a,d,product\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{},{},{}", r.k, r.n, r.m, r.l, r.a, r.d, r.product()?).expect("string write");
    }
    Ok(s)
}

pub fn read_results(path: &Path) -> Result<Vec<SolutionRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in fs::read_to_string(path)?.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return invalid(format!("bad results line {line:?}"));
        }
        let a: u32 = parse(f[4])?;
        out.push(SolutionRecord::new(parse(f[0])?, parse(f[1])?, parse(f[2])?, parse(f[3])?, a as u8, parse(f[5])?));
    }
    Ok(out)
}

/// Run every shard of `cfg`, optionally checkpointing into `checkpoint`.
pub fn sweep(cfg: &SweepConfig, checkpoint: Option<Checkpoint>) -> Result<SweepReport> {
    cfg.validate()?;
    let shards = cfg.shards();
    let total = shards.len();
    let checkpoint = checkpoint.map(Mutex::new);
    let (pending, resumed): (Vec<_>, Vec<_>) = shards.into_iter().partition(|(k, l)| {
        checkpoint.as_ref().is_none_or(|c| !c.lock().expect("checkpoint poisoned").is_done(*k, *l))
    });
    let tables = (cfg.k_min..=cfg.k_max)
        .into_par_iter()
        .map(|k| KTable::new(k, cfg.n_max))
        .collect::<Result<Vec<_>>>()?;
    let parts = pending
        .par_iter()
        .map(|&(k, l)| {
            let (found, st) = run_shard(cfg, &tables[(k - cfg.k_min) as usize], k, l)?;
            if let Some(c) = &checkpoint {
                c.lock().expect("checkpoint poisoned").record(k, l, &found)?;
            }
            Ok((found, st))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = SweepStats::default();
    let mut set = BTreeSet::new();
    for (found, st) in &parts {
        stats.absorb(st);
        set.extend(found.iter().copied());
    }
    if let Some(c) = checkpoint {
        set.extend(c.into_inner().expect("checkpoint poisoned").results().copied());
    }
    Ok(SweepReport { config: *cfg, solutions: set.into_iter().collect(), stats, shards: total, resumed_shards: resumed.len() })
}

/// The desk search `2 <= k <= 25`, `0 <= l <= m <= n <= 25`, `d >= 2`.
pub fn sweep_small() -> Result<Vec<SolutionRecord>> {
    Ok(sweep(&SweepConfig::new(2, 25, 25, 25, 25)?, None)?.solutions)
}

/// Published index maxima `(n, m, l)` after the reductions.
pub fn default_verify_bounds(k: u32) -> (u32, u32, u32) {
    if k == 2 {
        (1216, 606, 300)
    } else {
        (297, 300, 300)
    }
}

/// Verification sweep of a single `k` under reduced bounds.
pub fn sweep_verify(k: u32, n_max: u32, m_max: u32, l_max: u32, checkpoint: Option<Checkpoint>) -> Result<SweepReport> {
    sweep(&SweepConfig::new(k, k, n_max, m_max, l_max)?, checkpoint)
}

/// Pair products `L_n L_m` obtained from triples with a unit factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TwoFactor {
    pub k: u32,
    pub n: u32,
    pub m: u32,
    pub value: u64,
}

#[derive(Clone, Debug)]
pub struct Corollaries {
    pub two_factor: Vec<TwoFactor>,
    /// Repdigits (any number of digits) that are products of three Lucas
    /// numbers, from the `k = 2` search with `d >= 1`.
    pub lucas_set: Vec<u64>,
}

/// Two-factor table read off the three-factor solutions, and the set of
/// repdigit products of three ordinary Lucas numbers.
pub fn corollaries(solutions: &[SolutionRecord]) -> Result<Corollaries> {
    let mut two = BTreeSet::new();
    for s in solutions {
        let t = klucas_prefix(s.k, s.n)?;
        let one = BigUint::from(1u32);
        let pair = if t[s.l as usize] == one {
            (s.n, s.m)
        } else if t[s.m as usize] == one {
            (s.n, s.l)
        } else {
            continue;
        };
        let value = (&t[pair.0 as usize] * &t[pair.1 as usize]).to_u64().expect("small product");
        two.insert(TwoFactor { k: s.k, n: pair.0, m: pair.1, value });
    }
    let mut cfg = SweepConfig::new(2, 2, 25, 25, 25)?;
    cfg.d_min = 1;
    let mut set = BTreeSet::new();
    for r in sweep(&cfg, None)?.solutions.iter().chain(solutions.iter().filter(|s| s.k == 2)) {
        set.insert(r.product()?.to_u64().expect("small product"));
    }
    Ok(Corollaries { two_factor: two.into_iter().collect(), lucas_set: set.into_iter().collect() })
}

/// Published repdigit products of three Lucas numbers.
pub const PUBLISHED_LUCAS_SET: [u64; 13] = [1, 2, 3, 4, 7, 11, 22, 33, 44, 66, 77, 88, 99];

/// Solutions not in the published table.
pub fn unexpected(solutions: &[SolutionRecord]) -> Vec<SolutionRecord> {
    solutions.iter().filter(|s| !PUBLISHED_SOLUTIONS.contains(s)).copied().collect()
}

pub fn published_for(k: u32) -> Vec<SolutionRecord> {
    PUBLISHED_SOLUTIONS.iter().filter(|s| s.k == k).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_matches_table() {
        assert_eq!(sweep_small().unwrap(), PUBLISHED_SOLUTIONS.to_vec());
    }

    #[test]
    fn small_sweep_rows() {
        let s = sweep_small().unwrap();
        assert!(s.contains(&SolutionRecord::new(2, 5, 4, 1, 7, 2)));
        assert!(s.contains(&SolutionRecord::new(4, 5, 0, 0, 8, 2)));
        assert!(s.iter().all(|r| r.d >= 2 && crate::lucas::verify_solution(r)));
    }

    #[test]
    fn pruning_is_sound_on_small_domain() {
        let cfg = SweepConfig::new(2, 6, 60, 60, 60).unwrap();
        let a = sweep(&cfg, None).unwrap();
        let b = sweep(&cfg.unpruned(), None).unwrap();
        assert_eq!(a.solutions, b.solutions);
        assert!(a.stats.valuation_pruned > 0);
    }

    #[test]
    fn verify_seven_is_empty() {
        assert!(sweep_verify(7, 297, 297, 297, None).unwrap().solutions.is_empty());
    }

    #[test]
    fn two_factor_table() {
        let c = corollaries(&PUBLISHED_SOLUTIONS).unwrap();
        let vals: Vec<(u32, u64)> = c.two_factor.iter().map(|t| (t.k, t.value)).collect();
        assert_eq!(vals.len(), 8);
        assert!(c.two_factor.contains(&TwoFactor { k: 4, n: 5, m: 2, value: 66 }));
        for t in &c.two_factor {
            assert!(PUBLISHED_SOLUTIONS.iter().any(|s| s.k == t.k && s.n == t.n && (s.m == t.m || s.l == t.m)));
        }
    }

    #[test]
    fn lucas_set_includes_single_digit_products() {
        let c = corollaries(&PUBLISHED_SOLUTIONS).unwrap();
        for v in PUBLISHED_LUCAS_SET {
            assert!(c.lucas_set.contains(&v), "{v}");
        }
        // 2·3·1, 2·4·1 and 3·3·1
        for v in [6, 8, 9] {
            assert!(c.lucas_set.contains(&v), "{v}");
        }
    }

    #[test]
    fn checkpoint_resume_matches_fresh_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig::new(2, 4, 30, 30, 30).unwrap();
        let fresh = sweep(&cfg, None).unwrap();
        let mut cp = Checkpoint::open(dir.path(), &cfg, false).unwrap();
        let t = KTable::new(2, 30).unwrap();
        let (found, _) = run_shard(&cfg, &t, 2, 0).unwrap();
        cp.record(2, 0, &found).unwrap();
        let cp = Checkpoint::open(dir.path(), &cfg, true).unwrap();
        assert!(cp.is_done(2, 0));
        let resumed = sweep(&cfg, Some(cp)).unwrap();
        assert_eq!(resumed.resumed_shards, 1);
        assert_eq!(resumed.solutions, fresh.solutions);
        let text = fs::read_to_string(dir.path().join(CHECKPOINT_FILE)).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",done"));
        assert_eq!(read_results(&dir.path().join(RESULTS_FILE)).unwrap(), fresh.solutions);
    }

    #[test]
    fn checkpoint_rejects_other_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig::new(2, 3, 10, 10, 10).unwrap();
        Checkpoint::open(dir.path(), &cfg, false).unwrap().record(2, 0, &[]).unwrap();
        let other = SweepConfig::new(2, 3, 11, 10, 10).unwrap();
        assert!(Checkpoint::open(dir.path(), &other, true).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::new(1, 5, 10, 10, 10).is_err());
        assert!(SweepConfig::new(2, 651, 10, 10, 10).is_err());
        assert!(SweepConfig::new(5, 4, 10, 10, 10).is_err());
    }
}
