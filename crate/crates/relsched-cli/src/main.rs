//! Command-line driver: instance I/O, seeded generators, pipeline execution,
//! oracle comparison, and CSV reporting.
//!
//! Exit status is 0 exactly when every requested invariant audit passes;
//! malformed inputs produce a nonzero exit with line-numbered diagnostics.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relsched_core::bands::{eptas_no_release, NRParams};
use relsched_core::cost;
use relsched_core::oracle::{self, Objective, OracleLimits};
use relsched_core::release::{eptas_release, release_ledger_csv};
use relsched_core::schedule::timed_from_ordered;
use relsched_core::{Instance, Job, Machine, ParamPack, TimedSchedule};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "relsched", about = "Scheduling toolkit for weighted completion time on related machines", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Practical,
    Faithful,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Uniform,
    BimodalDensity,
    ReleaseBursts,
    PowerSpeeds,
}

#[derive(Subcommand)]
enum Command {
    /// Run the approximation pipeline on an instance (release pipeline is
    /// chosen by the instance's release flag).
    Solve {
        /// Instance file path.
        #[arg(long)]
        instance: PathBuf,
        /// Approximation parameter in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Parameter profile.
        #[arg(long, value_enum, default_value_t = ProfileArg::Practical)]
        profile: ProfileArg,
        /// Exact-solver job cap for fallback branches.
        #[arg(long, default_value_t = 7)]
        oracle_max_jobs: usize,
        /// Exact-solver machine cap for fallback branches.
        #[arg(long, default_value_t = 3)]
        oracle_max_machines: usize,
        /// Schedule output path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance exactly with the enumeration oracles.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 8)]
        oracle_max_jobs: usize,
        #[arg(long, default_value_t = 3)]
        oracle_max_machines: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a schedule file against an instance and report its cost.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Schedule file path.
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Run a seeded generator/pipeline suite and emit a ratio table.
    Bench {
        /// Suite name.
        #[arg(long, default_value = "small")]
        suite: String,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Base seed; each suite row derives its own stream from it.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Report CSV path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the per-stage inequality audit of a pipeline run as CSV.
    Ledger {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Practical)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 7)]
        oracle_max_jobs: usize,
        #[arg(long, default_value_t = 3)]
        oracle_max_machines: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded instance and print or write it.
    Generate {
        #[arg(long, value_enum)]
        shape: Shape,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        jobs: usize,
        #[arg(long, default_value_t = 2)]
        machines: usize,
        /// Used for grid snapping where the shape requires it.
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

/// Reads and parses an instance, converting parse failures into diagnostics
/// that name the offending line number.
fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read instance file {}", path.display()))?;
    Instance::parse(&text).map_err(|e| diagnose(path, &text, e))
}

fn read_schedule(path: &Path, instance: &Instance) -> Result<TimedSchedule> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read schedule file {}", path.display()))?;
    TimedSchedule::parse(&text, instance).map_err(|e| diagnose(path, &text, e))
}

/// Attaches a 1-based line number to a parse error when the error message
/// quotes a line of the file.
fn diagnose(path: &Path, text: &str, err: relsched_core::Error) -> anyhow::Error {
    let msg = err.to_string();
    for (ix, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if !trimmed.is_empty() && msg.contains(trimmed) {
            return anyhow!("{}:{}: {msg}", path.display(), ix + 1);
        }
    }
    anyhow!("{}: {msg}", path.display())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            instance,
            eps,
            profile,
            oracle_max_jobs,
            oracle_max_machines,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let limits = OracleLimits {
                max_jobs: oracle_max_jobs,
                max_machines: oracle_max_machines,
            };
            let (schedule, cost, all_pass) = solve_instance(&inst, eps, profile, &limits)?;
            emit(&out, &schedule.render(&inst))?;
            eprintln!("cost {cost}");
            if !all_pass {
                bail!("a pipeline stage audit failed; run `ledger` for details");
            }
            Ok(())
        }
        Command::Oracle {
            instance,
            oracle_max_jobs,
            oracle_max_machines,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let limits = OracleLimits {
                max_jobs: oracle_max_jobs,
                max_machines: oracle_max_machines,
            };
            let (schedule, value) = if inst.has_release_dates {
                oracle::opt_release(&inst, &limits, Objective::Cost, None)?
            } else {
                let (ordered, value) = oracle::opt_no_release(&inst, &limits)?;
                (timed_from_ordered(&inst, &ordered), value)
            };
            emit(&out, &schedule.render(&inst))?;
            eprintln!("cost {value}");
            Ok(())
        }
        Command::Verify { instance, schedule } => {
            let inst = read_instance(&instance)?;
            let sched = read_schedule(&schedule, &inst)?;
            let report = cost::cost_timed(&inst, &sched)?;
            println!("valid; cost {}", report.total);
            Ok(())
        }
        Command::Bench {
            suite,
            eps,
            seed,
            out,
        } => {
            let csv = run_bench(&suite, eps, seed)?;
            emit(&out, &csv.text)?;
            if !csv.all_pass {
                bail!("bench suite contains rows above the 1+eps ratio bound");
            }
            Ok(())
        }
        Command::Ledger {
            instance,
            eps,
            profile,
            oracle_max_jobs,
            oracle_max_machines,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let limits = OracleLimits {
                max_jobs: oracle_max_jobs,
                max_machines: oracle_max_machines,
            };
            let (csv, all_pass) = run_ledger(&inst, eps, profile, &limits)?;
            emit(&out, &csv)?;
            if !all_pass {
                bail!("a pipeline stage audit failed");
            }
            Ok(())
        }
        Command::Generate {
            shape,
            seed,
            jobs,
            machines,
            eps,
            out,
        } => {
            let inst = generate(shape, seed, jobs, machines, eps)?;
            emit(&out, &inst.render())?;
            Ok(())
        }
    }
}

fn solve_instance(
    inst: &Instance,
    eps: f64,
    profile: ProfileArg,
    limits: &OracleLimits,
) -> Result<(TimedSchedule, f64, bool)> {
    if inst.has_release_dates {
        let (schedule, report) = eptas_release(inst, eps, limits)?;
        let all_pass = report.stages.iter().all(|s| s.pass);
        Ok((schedule, report.cost, all_pass))
    } else {
        let pack = match profile {
            ProfileArg::Practical => ParamPack::practical(eps)?,
            ProfileArg::Faithful => ParamPack::faithful_no_release(eps, 3)?,
        };
        let nr = match profile {
            ProfileArg::Practical => NRParams::practical(&pack),
            ProfileArg::Faithful => NRParams::faithful(&pack),
        };
        let (ordered, report) = eptas_no_release(inst, &pack, &nr)?;
        let all_pass = report.stages.iter().all(|s| s.slack() >= -1e-9);
        Ok((
            timed_from_ordered(inst, &ordered),
            report.cost_original,
            all_pass,
        ))
    }
}

fn run_ledger(
    inst: &Instance,
    eps: f64,
    profile: ProfileArg,
    limits: &OracleLimits,
) -> Result<(String, bool)> {
    if inst.has_release_dates {
        let (_, report) = eptas_release(inst, eps, limits)?;
        let all_pass = report.stages.iter().all(|s| s.pass);
        Ok((release_ledger_csv(&report), all_pass))
    } else {
        let pack = match profile {
            ProfileArg::Practical => ParamPack::practical(eps)?,
            ProfileArg::Faithful => ParamPack::faithful_no_release(eps, 3)?,
        };
        let nr = match profile {
            ProfileArg::Practical => NRParams::practical(&pack),
            ProfileArg::Faithful => NRParams::faithful(&pack),
        };
        let (_, report) = eptas_no_release(inst, &pack, &nr)?;
        let mut csv = String::from("stage,lhs,rhs,slack,pass\n");
        let mut all_pass = true;
        for stage in &report.stages {
            let pass = stage.slack() >= -1e-9;
            all_pass &= pass;
            let _ = writeln!(
                csv,
                "{},{:.9},{:.9},{:.9},{}",
                stage.name,
                stage.lhs,
                stage.rhs,
                stage.slack(),
                pass
            );
        }
        Ok((csv, all_pass))
    }
}

// ---------------------------------------------------------------------------
// Seeded generators
// ---------------------------------------------------------------------------

fn shape_tag(shape: Shape) -> &'static str {
    match shape {
        Shape::Uniform => "uniform",
        Shape::BimodalDensity => "bimodal-density",
        Shape::ReleaseBursts => "release-bursts",
        Shape::PowerSpeeds => "power-speeds",
    }
}

/// Deterministic instance generator; all randomness flows from the one seed.
fn generate(shape: Shape, seed: u64, n: usize, m: usize, eps: f64) -> Result<Instance> {
    if n == 0 || m == 0 {
        bail!("need at least one job and one machine");
    }
    let tag = shape_tag(shape);
    let mut hash = 0xcbf2_29ce_4845_1625u64 ^ seed;
    for b in tag.bytes() {
        hash = (hash ^ b as u64).wrapping_mul(0x100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hash);
    let pack = ParamPack::practical(eps).map_err(|e| anyhow!(e.to_string()))?;
    let delta = pack.delta;
    let snap = |x: f64| relsched_core::geo::round_up(delta, x).value(delta);
    let mut machines = Vec::with_capacity(m);
    for id in 0..m {
        let speed = match shape {
            Shape::PowerSpeeds => pack.pow(rng.gen_range(-2i64..=2)),
            _ => rng.gen_range(0.5..2.0),
        };
        machines.push(Machine { id, speed });
    }
    let mut jobs = Vec::with_capacity(n);
    let has_release = matches!(shape, Shape::ReleaseBursts);
    // Burst centers are exact grid powers so downstream grid passes accept
    // the releases unchanged.
    let burst_exps: [i64; 3] = [0, 4, 8];
    for id in 0..n {
        let size = rng.gen_range(0.5..4.0);
        let weight = match shape {
            Shape::BimodalDensity => {
                let density = if rng.gen_bool(0.5) {
                    rng.gen_range(4.0..8.0)
                } else {
                    rng.gen_range(0.1..0.3)
                };
                size * density
            }
            _ => rng.gen_range(0.5..4.0),
        };
        let release = if has_release {
            pack.pow(burst_exps[rng.gen_range(0..burst_exps.len())])
        } else {
            0.0
        };
        let (size, weight) = match shape {
            Shape::PowerSpeeds => (snap(size), snap(weight)),
            _ => (size, weight),
        };
        jobs.push(Job {
            id,
            size,
            weight,
            release,
        });
    }
    Instance::new(jobs, machines, has_release).map_err(|e| anyhow!(e.to_string()))
}

// ---------------------------------------------------------------------------
// Bench suite
// ---------------------------------------------------------------------------

struct BenchCsv {
    text: String,
    all_pass: bool,
}

/// Runs the seeded suite: approximation pipelines against the exact oracles,
/// one CSV row per (shape, seed) with the realized cost ratio.
fn run_bench(suite: &str, eps: f64, seed: u64) -> Result<BenchCsv> {
    let (seeds_per_shape, n, m) = match suite {
        "small" => (3u64, 5usize, 2usize),
        "tiny" => (2u64, 4usize, 2usize),
        other => bail!("unknown suite `{other}` (expected `small` or `tiny`)"),
    };
    let limits = OracleLimits {
        max_jobs: 8,
        max_machines: 3,
    };
    let mut text = String::from("shape,seed,n,m,eps,algo_cost,oracle_cost,ratio,pass\n");
    let mut all_pass = true;
    let shapes = [
        Shape::Uniform,
        Shape::BimodalDensity,
        Shape::PowerSpeeds,
        Shape::ReleaseBursts,
    ];
    for shape in shapes {
        let (n, m) = match shape {
            // Release enumeration is costlier; keep those rows smaller.
            Shape::ReleaseBursts => (n.min(4), m),
            _ => (n, m),
        };
        for s in 0..seeds_per_shape {
            let inst = generate(shape, seed.wrapping_add(s), n, m, eps)?;
            let (_, algo_cost, audits_ok) =
                solve_instance(&inst, eps, ProfileArg::Practical, &limits)?;
            let oracle_cost = if inst.has_release_dates {
                oracle::opt_release(&inst, &limits, Objective::Cost, None)?.1
            } else {
                oracle::opt_no_release(&inst, &limits)?.1
            };
            let ratio = algo_cost / oracle_cost;
            let pass = audits_ok && ratio <= 1.0 + eps + 1e-9;
            all_pass &= pass;
            let _ = writeln!(
                text,
                "{},{},{},{},{},{:.9},{:.9},{:.6},{}",
                shape_tag(shape),
                seed.wrapping_add(s),
                n,
                m,
                eps,
                algo_cost,
                oracle_cost,
                ratio,
                pass
            );
        }
    }
    Ok(BenchCsv { text, all_pass })
}
