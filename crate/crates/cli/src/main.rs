//! `otv` – run simulations, print analytic heuristics and check the worked
//! example.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use otv_core::analytics::{heuristic_table, LoadParams};
use otv_core::toy::verify_toy;
use otv_core::WeightTable;
use otv_netsim::metrics::{write_jsonl, RunReport};
use otv_netsim::{run_traced, safety_partition, AdversaryConfig, SimConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "otv", version, about = "On Tangle Voting simulator and analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more replications of a configured scenario.
    Simulate(SimulateArgs),
    /// Print the closed-form performance heuristics for a parameter set.
    Analyze(AnalyzeArgs),
    /// Recompute the four-node worked example and compare every value.
    VerifyToy,
    /// Show the group sizes the safety-breaking partition can use.
    Partition {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        theta: f64,
        #[arg(long, default_value_t = 100)]
        nodes: usize,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML or JSON configuration (defaults when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the first replication (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replications: u64,
    /// Adversary weights to sweep (comma separated); each value replaces
    /// `q` of the configured adversary.
    #[arg(long, value_delimiter = ',')]
    sweep_q: Vec<f64>,
    /// Output directory for per-run reports and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, env = "OTV_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    /// Network delay in seconds.
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    theta: f64,
    /// Confluence target fraction.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 0.0)]
    zipf_s: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    q: Option<f64>,
    runs: usize,
    consensus_rate: f64,
    broken_safety_runs: usize,
    confirmation_median: Stat,
    tip_pool_mean: Stat,
    consensus_time: Stat,
}

/// Median and 10/90 percentiles across replications (finite values only).
#[derive(Serialize)]
struct Stat {
    values: usize,
    p10: Option<f64>,
    median: Option<f64>,
    p90: Option<f64>,
}

impl Stat {
    fn of(mut v: Vec<f64>) -> Self {
        v.retain(|x| x.is_finite());
        v.sort_by(f64::total_cmp);
        let at = |p: f64| (!v.is_empty()).then(|| v[((v.len() - 1) as f64 * p).round() as usize]);
        Self { values: v.len(), p10: at(0.1), median: at(0.5), p90: at(0.9) }
    }
}

fn with_q(adv: &AdversaryConfig, q: f64) -> Result<AdversaryConfig> {
    let mut adv = adv.clone();
    match &mut adv {
        AdversaryConfig::BaitAndSwitch { q: x, .. }
        | AdversaryConfig::MetastabilityII { q: x, .. }
        | AdversaryConfig::SafetyBreaker { q: x, .. } => *x = q,
        other => bail!("adversary {} has no weight to sweep", other.name()),
    }
    Ok(adv)
}

fn write_run(dir: &Path, report: &RunReport, trace: &[otv_netsim::TraceEvent]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    report.write_json(&dir.join("report.json"))?;
    report.write_samples_csv(&dir.join("metrics.csv"))?;
    if !trace.is_empty() {
        write_jsonl(&dir.join("events.jsonl"), trace)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let first_seed = args.seed.unwrap_or(base.seed);
    let qs: Vec<Option<f64>> = if args.sweep_q.is_empty() { vec![None] } else { args.sweep_q.iter().map(|&q| Some(q)).collect() };
    let mut jobs = Vec::new();
    for &q in &qs {
        for r in 0..args.replications {
            let mut cfg = base.clone();
            if let Some(q) = q {
                cfg.adversary = with_q(&base.adversary, q)?;
            }
            cfg.seed = first_seed + r;
            cfg.validate()?;
            jobs.push((q, cfg));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.workers).build()?;
    let started = Instant::now();
    let results: Vec<Result<(Option<f64>, RunReport)>> = pool.install(|| {
        jobs.into_par_iter()
            .map(|(q, cfg)| {
                let seed = cfg.seed;
                let (report, trace) = run_traced(cfg)?;
                if let Some(out) = &args.out {
                    let name = match q {
                        Some(q) => format!("q{q}-seed{seed}"),
                        None => format!("seed{seed}"),
                    };
                    write_run(&out.join(name), &report, &trace)?;
                }
                Ok((q, report))
            })
            .collect()
    });
    let results: Vec<(Option<f64>, RunReport)> = results.into_iter().collect::<Result<_>>()?;
    let summaries: Vec<SweepSummary> = qs
        .iter()
        .map(|&q| {
            let runs: Vec<&RunReport> = results.iter().filter(|(rq, _)| *rq == q).map(|(_, r)| r).collect();
            SweepSummary {
                q,
                runs: runs.len(),
                consensus_rate: runs.iter().filter(|r| r.consensus).count() as f64 / runs.len().max(1) as f64,
                broken_safety_runs: runs.iter().filter(|r| !r.broken_safety.is_empty()).count(),
                confirmation_median: Stat::of(runs.iter().map(|r| r.confirmation.median.unwrap_or(f64::INFINITY)).collect()),
                tip_pool_mean: Stat::of(runs.iter().map(|r| r.tip_pool_mean).collect()),
                consensus_time: Stat::of(
                    runs.iter()
                        .flat_map(|r| r.conflicts.iter().map(|c| c.consensus_time.unwrap_or(f64::INFINITY)))
                        .collect(),
                ),
            }
        })
        .collect();
    let text = serde_json::to_string_pretty(&summaries)?;
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("summary.json"), &text)?;
    }
    println!("{text}");
    eprintln!("{} run(s) in {:.1} s", results.len(), started.elapsed().as_secs_f64());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let params = LoadParams::new(a.lambda, a.h, a.k, a.theta, a.eps)?;
    let table = WeightTable::zipf(a.nodes, a.zipf_s)?;
    let h = heuristic_table(&params, &table)?;
    println!("{}", serde_json::to_string_pretty(&h)?);
    Ok(())
}

/// Prints one line per check; returns whether all passed.
fn verify() -> bool {
    let started = Instant::now();
    let checks = verify_toy();
    for c in &checks {
        println!("{} {:<32} expected {:<10} got {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.expected, c.actual);
    }
    let ok = checks.iter().all(|c| c.pass);
    println!("{} checks, {} ({:.1} ms)", checks.len(), if ok { "all passed" } else { "FAILED" }, started.elapsed().as_secs_f64() * 1e3);
    ok
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Analyze(args) => analyze(args),
        Command::VerifyToy => {
            if !verify() {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Partition { q, theta, nodes } => {
            let plan = safety_partition(q, theta, nodes)?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
            Ok(())
        }
    }
}
