use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use klucas::cert::parse_decimal_uint;
use klucas::certificate::{emit_certificate, ProofCertificate, StageRecord};
use klucas::contfrac::{dump, CfStream, CfTarget, LogAlphaRatio, LogTwoTen};
use klucas::pipeline::{self, PipelineConfig};
use klucas::reduce::{Campaign, KEngine};
use klucas::search::{default_verify_bounds, published_for, unexpected};
use klucas::{Error, SolutionRecord};

#[derive(Parser)]
#[command(name = "klucas-prover", version, about = "Certified search for repdigits that are products of three k-Lucas numbers")]
struct Cli {
    /// Starting working precision in decimal digits.
    #[arg(long, global = true, default_value_t = 64)]
    precision_start: u32,
    /// Largest working precision in decimal digits.
    #[arg(long, global = true, default_value_t = 16384)]
    precision_cap: u32,
    /// Directory receiving certificates and checkpoints.
    #[arg(long, global = true, env = "KLUCAS_OUT_DIR", default_value = "klucas-out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    shards: usize,
    /// Resume sweeps from existing checkpoints.
    #[arg(long, global = true)]
    resume: bool,
    /// Convergent advances allowed per reduction.
    #[arg(long, global = true, default_value_t = klucas::reduce::MAX_ADVANCE)]
    max_advance: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Alpha,
    TwoTen,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exhaustive search over 2 <= k <= 25, n <= 25.
    SweepSmall,
    /// The case n <= k.
    CaseNLeK,
    /// Analytic bounds and root data for one k.
    Bounds {
        #[arg(long)]
        k: u32,
    },
    /// One reduction campaign (earlier campaigns run first to supply bounds).
    Reduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        campaign: u8,
        #[arg(long)]
        k: u32,
    },
    /// Bound on k when k > 650.
    KLarge,
    /// Two-round reduction of the large-k bound.
    KReduce,
    /// Verification sweep for one k.
    Verify {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        m_max: Option<u32>,
        #[arg(long)]
        l_max: Option<u32>,
        /// Take the index bounds from freshly run campaigns.
        #[arg(long)]
        from_campaigns: bool,
    },
    /// Every stage for 2 <= k <= k-max plus the k > 650 analysis.
    ProveAll {
        #[arg(long, default_value_t = 30)]
        k_max: u32,
    },
    /// Continued fraction of log alpha(k)/log 10 or log 2/log 10.
    Contfrac {
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, conflicts_with = "q_exceeds")]
        count: Option<usize>,
        /// Report the first convergent whose denominator exceeds this value.
        #[arg(long)]
        q_exceeds: Option<String>,
    },
}

enum Outcome {
    Ok,
    Alarm(String),
}

fn config(cli: &Cli) -> PipelineConfig {
    PipelineConfig {
        precision_start: cli.precision_start,
        precision_cap: cli.precision_cap,
        max_advance: cli.max_advance,
        out_dir: Some(cli.out_dir.clone()),
        resume: cli.resume,
        ..PipelineConfig::default()
    }
}

fn emit(cli: &Cli, name: &str, cert: &ProofCertificate) -> klucas::Result<()> {
    let dir = cli.out_dir.join(name);
    emit_certificate(cert, &dir)?;
    println!("certificate written to {}", dir.display());
    Ok(())
}

fn single(cli: &Cli, name: &str, r: StageRecord, started: Instant) -> klucas::Result<()> {
    print!("{}", r.render());
    let mut cert = ProofCertificate::new(cli.precision_start, cli.precision_cap);
    cert.add_stage(r, started.elapsed());
    emit(cli, name, &cert)
}

fn alarm_if_unexpected(found: &[SolutionRecord]) -> Outcome {
    let bad = unexpected(found);
    if bad.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Alarm(format!("solutions outside the published table: {bad:?}"))
    }
}

fn run(cli: &Cli) -> klucas::Result<Outcome> {
    let cfg = config(cli);
    let t = Instant::now();
    match &cli.cmd {
        Cmd::SweepSmall => {
            let (r, sols) = pipeline::stage_sweep_small()?;
            for s in &sols {
                println!("{s}");
            }
            let mut cert = ProofCertificate::new(cli.precision_start, cli.precision_cap);
            cert.add_stage(r, t.elapsed());
            cert.solutions = sols.clone();
            emit(cli, "sweep-small", &cert)?;
            Ok(alarm_if_unexpected(&sols))
        }
        Cmd::CaseNLeK => {
            single(cli, "case-n-le-k", pipeline::stage_case_n_le_k()?, t)?;
            Ok(Outcome::Ok)
        }
        Cmd::Bounds { k } => {
            single(cli, &format!("bounds-k{k}"), pipeline::stage_bounds(*k, cli.precision_start)?, t)?;
            Ok(Outcome::Ok)
        }
        Cmd::Reduce { campaign, k } => {
            let campaign = Campaign::from_number(*campaign)?;
            let cc = cfg.campaign();
            let g1 = KEngine::new(*k, 1)?.gamma1(&cc)?;
            let result = match campaign {
                Campaign::Gamma1 => g1,
                _ => {
                    let g2 = KEngine::new(*k, g1.bound)?.gamma2(g1.bound, &cc)?;
                    if campaign == Campaign::Gamma2 {
                        g2
                    } else {
                        KEngine::new(*k, g1.bound.max(g2.bound))?.gamma3(g1.bound, g2.bound, &cc)?
                    }
                }
            };
            let mut r = StageRecord::new(format!("reduce-{campaign}"));
            r.push("k", k)
                .push("m", &result.m_k)
                .push("first_index", result.first_index)
                .push("cells", result.cells.len())
                .push("pruned", result.pruned)
                .push("bound_real", format!("{:.2}", result.bound_real))
                .push(format!("{}_max", campaign.variable()), result.bound)
                .push("degenerate", format!("{:?}", result.degenerate_cells()));
            print!("{}", r.render());
            let mut cert = ProofCertificate::new(cli.precision_start, cli.precision_cap);
            cert.add_stage(r, t.elapsed());
            cert.cells = result.cells.iter().map(|c| c.line()).collect();
            emit(cli, &format!("reduce-{campaign}-k{k}"), &cert)?;
            Ok(Outcome::Ok)
        }
        Cmd::KLarge => {
            single(cli, "k-large", pipeline::stage_k_large(cli.precision_start)?, t)?;
            Ok(Outcome::Ok)
        }
        Cmd::KReduce => {
            let (r, kr) = pipeline::stage_k_reduce(cli.max_advance)?;
            for round in &kr.rounds {
                println!("round {}: k < {}", round.round, round.k_bound);
            }
            single(cli, "k-reduce", r, t)?;
            if kr.contradiction {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::Alarm("k reduction did not reach 650".into()))
            }
        }
        Cmd::Verify { k, n_max, m_max, l_max, from_campaigns } => {
            let (mut n, mut m, mut l) = default_verify_bounds(*k);
            if *from_campaigns {
                let (_, _, _, chain) = pipeline::stage_campaigns(*k, &cfg)?;
                let small = |v: &num_bigint::BigUint| u32::try_from(v).map_err(|_| Error::ContractViolation("bound too large".into()));
                (n, m, l) = (small(&chain.n_bound)?, small(&chain.m_bound)?, small(&chain.l_bound)?);
            }
            let (n, m, l) = (n_max.unwrap_or(n), m_max.unwrap_or(m), l_max.unwrap_or(l));
            let (r, rep) = pipeline::stage_verify(*k, n, m, l, &cfg)?;
            for s in &rep.solutions {
                println!("{s}");
            }
            let mut cert = ProofCertificate::new(cli.precision_start, cli.precision_cap);
            cert.add_stage(r, t.elapsed());
            cert.solutions = rep.solutions.clone();
            emit(cli, &format!("verify-k{k}"), &cert)?;
            let expected: Vec<_> = published_for(*k).into_iter().filter(|s| s.n <= n && s.m <= m && s.l <= l).collect();
            if rep.solutions != expected {
                return Ok(Outcome::Alarm(format!("k={k}: found {:?}, expected {expected:?}", rep.solutions)));
            }
            Ok(Outcome::Ok)
        }
        Cmd::ProveAll { k_max } => {
            let out = pipeline::prove_all(*k_max, &cfg)?;
            for s in &out.table {
                println!("{s}");
            }
            emit_certificate(&out.certificate, &cli.out_dir)?;
            println!("certificate written to {}", cli.out_dir.display());
            if out.matches_published {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::Alarm("recomputed table differs from the published one".into()))
            }
        }
        Cmd::Contfrac { target, k, count, q_exceeds } => {
            let tgt: Arc<dyn CfTarget> = match (target, k) {
                (Target::Alpha, Some(k)) => Arc::new(LogAlphaRatio { k: *k }),
                (Target::Alpha, None) => return Err(Error::InvalidInput("--target alpha needs --k".into())),
                (Target::TwoTen, _) => Arc::new(LogTwoTen),
            };
            let mut s = CfStream::new(tgt, cli.precision_start);
            if let Some(b) = q_exceeds {
                let c = s.first_q_exceeding(&parse_decimal_uint(b)?)?;
                println!("target {}", s.target().describe());
                println!("index {}", c.index);
                println!("p {}", c.p);
                println!("q {}", c.q);
            } else {
                s.ensure_len(count.unwrap_or(20))?;
                let mut cf = s.expansion();
                let n = count.unwrap_or(20).min(cf.partial_quotients.len());
                cf.partial_quotients.truncate(n);
                cf.certified_len = n;
                print!("{}", dump(&cf));
            }
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.shards > 0 {
        // the global pool can only be configured once; ignore a second attempt
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.shards).build_global();
    }
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Alarm(msg)) => {
            eprintln!("alarm: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
