use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mecsim_core::engine::{run, RunOutput};
use mecsim_core::metrics::{emit_metrics, fmt_f64, Format};
use mecsim_core::oracle::{self, Corruption};
use mecsim_core::{Baseline, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "mecsim",
    version,
    about = "Multi-time-scale MEC admission and resource allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation; writes metric files and a manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Run a baseline instead of the full algorithm; defaults to the config value.
        #[arg(long)]
        baseline: Option<Baseline>,
    },
    /// Proposed algorithm and baselines on paired seeds, plus a summary table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "FA,FC,TC")]
        baselines: Vec<Baseline>,
        /// Number of consecutive seeds starting at the base seed.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// One run per (value, seed) along a config axis; writes series.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config field, or one of the aliases eta, V, U, F_k.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Checks the solvers against brute-force oracles.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inject a solver fault; the run must then fail.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; reference defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path).with_context(|| format!("bad config {}", path.display()))?,
            None => ScenarioConfig::from_env().context("bad config from environment")?,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn axis_field(axis: &str) -> &str {
    match axis {
        "eta" => "eta",
        "V" | "v" => "lyapunov_v",
        "U" | "u" => "num_users",
        "F_k" | "F" | "f_k" => "compute_per_sbs",
        "K" | "k" => "num_sbs",
        other => other,
    }
}

fn execute(cfg: &ScenarioConfig, format: Format, dir: &Path) -> Result<RunOutput> {
    let out = run(cfg).with_context(|| format!("run failed (seed {})", cfg.seed))?;
    emit_metrics(&out, cfg, format, dir).with_context(|| format!("cannot write metrics to {}", dir.display()))?;
    Ok(out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start worker pool")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_run(common: &Common, baseline: Option<Baseline>) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(b) = baseline {
        cfg.baseline = b;
    }
    let out = execute(&cfg, common.format, &common.out)?;
    println!(
        "{} seed {}: mean utility {:.6e}, mean admitted {:.2}, violation rate {:.4}",
        cfg.baseline,
        cfg.seed,
        out.mean_utility(),
        out.mean_admitted(),
        out.audit_violation_rate()
    );
    Ok(())
}

struct Summary {
    method: Baseline,
    utility: f64,
    per_type: Vec<f64>,
    violation_rate: f64,
}

/// `per_type` is the mean number of admitted users per short slot.
fn summarize(method: Baseline, runs: &[RunOutput], types: usize, slots: usize) -> Summary {
    let n = runs.len().max(1) as f64;
    let mut per_type = vec![0.0; types];
    for r in runs {
        let lts = (r.lts.len() * slots).max(1) as f64;
        for rec in &r.lts {
            for (t, c) in rec.admitted_per_type.iter().enumerate() {
                per_type[t] += *c as f64 / lts / n;
            }
        }
    }
    Summary {
        method,
        utility: runs.iter().map(RunOutput::mean_utility).sum::<f64>() / n,
        per_type,
        violation_rate: runs.iter().map(RunOutput::audit_violation_rate).sum::<f64>() / n,
    }
}

fn cmd_compare(common: &Common, baselines: &[Baseline], seeds: u64, jobs: usize) -> Result<()> {
    let base = common.config()?;
    let mut methods = vec![Baseline::None];
    methods.extend(baselines.iter().copied().filter(|b| *b != Baseline::None));
    let tasks: Vec<(Baseline, u64)> = methods.iter().flat_map(|&m| (0..seeds).map(move |i| (m, i))).collect();
    let results: Vec<Result<RunOutput>> = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(method, i)| {
                let mut cfg = base.clone();
                cfg.baseline = method;
                cfg.seed = base.seed.wrapping_add(i);
                let dir = common.out.join(method.label()).join(format!("seed-{}", cfg.seed));
                execute(&cfg, common.format, &dir)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let types = base.task_types.len();
    let mut table = String::from("method,seeds,mean_utility");
    for t in 0..types {
        write!(table, ",admitted_type{t}").unwrap();
    }
    table.push_str(",violation_rate\n");
    for (m, chunk) in methods.iter().zip(results.chunks(seeds as usize)) {
        let s = summarize(*m, chunk, types, base.slots_per_lts());
        write!(table, "{},{},{}", s.method, seeds, fmt_f64(s.utility)).unwrap();
        for c in &s.per_type {
            write!(table, ",{}", fmt_f64(*c)).unwrap();
        }
        writeln!(table, ",{}", fmt_f64(s.violation_rate)).unwrap();
        let types: Vec<String> = s.per_type.iter().map(|c| format!("{c:.2}")).collect();
        println!(
            "{:<9} mean utility {:>12.5e}  admitted/type [{}]  violation rate {:.4}",
            s.method,
            s.utility,
            types.join(", "),
            s.violation_rate
        );
    }
    fs::create_dir_all(&common.out).with_context(|| format!("cannot create {}", common.out.display()))?;
    write_file(&common.out.join("summary.csv"), &table)
}

const SERIES_HEADER: &str = "axis,value,seed,config_hash,lts_index,metric,observation\n";

fn cmd_sweep(common: &Common, axis: &str, values: &[String], seeds: u64, jobs: usize) -> Result<()> {
    let base = common.config()?;
    let field = axis_field(axis);
    let mut cfgs = Vec::new();
    for value in values {
        let at = base
            .with_override(field, value)
            .with_context(|| format!("bad sweep point {axis}={value}"))?;
        for i in 0..seeds {
            let mut cfg = at.clone();
            cfg.seed = base.seed.wrapping_add(i);
            cfgs.push((value.clone(), cfg));
        }
    }
    let results: Vec<Result<RunOutput>> = pool(jobs)?.install(|| {
        cfgs.par_iter()
            .map(|(value, cfg)| {
                let dir = common
                    .out
                    .join("runs")
                    .join(format!("{field}={value}"))
                    .join(format!("seed-{}", cfg.seed));
                execute(cfg, common.format, &dir)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut series = String::from(SERIES_HEADER);
    for ((value, cfg), out) in cfgs.iter().zip(&results) {
        let hash = cfg.hash();
        for rec in &out.lts {
            let admitted = rec.y.iter().filter(|&&b| b).count() as f64;
            for (metric, x) in [
                ("revenue", rec.revenue),
                ("cost", rec.cost),
                ("utility", rec.utility),
                ("mean_utility", rec.mean_utility),
                ("admitted", admitted),
            ] {
                writeln!(
                    series,
                    "{field},{value},{},{hash},{},{metric},{}",
                    cfg.seed,
                    rec.lts_index,
                    fmt_f64(x)
                )
                .unwrap();
            }
        }
    }
    fs::create_dir_all(&common.out).with_context(|| format!("cannot create {}", common.out.display()))?;
    write_file(&common.out.join("series.csv"), &series)?;
    println!(
        "{} runs, series written to {}",
        results.len(),
        common.out.join("series.csv").display()
    );
    Ok(())
}

fn cmd_selftest(seed: u64, corrupt: bool) -> Result<()> {
    let mode = if corrupt { Corruption::Compute } else { Corruption::None };
    let reports = oracle::run_all(seed, mode);
    let mut failed = 0;
    for r in &reports {
        let tag = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{tag} {:<12} {} cases, {} failures, worst rel err {:.3e}",
            r.name, r.cases, r.failures, r.worst
        );
        if !r.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} oracle suite(s) failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { common, baseline } => cmd_run(common, *baseline),
        Command::Compare {
            common,
            baselines,
            seeds,
            jobs,
        } => cmd_compare(common, baselines, *seeds, *jobs),
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
            jobs,
        } => cmd_sweep(common, axis, values, *seeds, *jobs),
        Command::Selftest { seed, corrupt } => cmd_selftest(*seed, *corrupt),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
