use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gpurace::oracle::{predictable_races, DEFAULT_BUDGET, DEFAULT_LIMIT};
use gpurace::trace::{parse_trace, write_trace, Trace};
use gpurace::workloads::{gen_random, gen_litmus, RandomConfig, CORPUS, MAX_RANDOM_EVENTS};
use gpurace::{compare, compression_stats, detect, order_matrix, prepare_trace, DetectorKind, Options};

const EXIT_RACES: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;

/// Data-race detection for GPU kernel traces.
#[derive(Parser)]
#[command(name = "gpurace", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one detector and print its race reports as JSON lines.
    Check {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Detector::Gwcp)]
        detector: Detector,
        #[command(flatten)]
        flags: Flags,
        /// Also print the pairwise event order (gwcp and hb only).
        #[arg(long)]
        order_matrix: bool,
    },
    /// Run every detector and, for small traces, the oracle.
    Compare {
        trace: PathBuf,
        #[command(flatten)]
        flags: Flags,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        json: bool,
    },
    /// Enumerate correct reorderings and print the predictable race pairs.
    Oracle {
        trace: PathBuf,
        #[command(flatten)]
        limits: Limits,
    },
    /// Write a corpus trace, or a random one with `random --seed S`.
    Gen {
        name: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Event cap for random traces.
        #[arg(long, default_value_t = 12)]
        events: usize,
        /// List corpus traces with their expected verdicts.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print vector-clock compression counters of the GWCP detector.
    Stats {
        trace: PathBuf,
        #[arg(long)]
        no_inactive_opt: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Detector {
    Gwcp,
    Hb,
    Lockset,
}

impl From<Detector> for DetectorKind {
    fn from(d: Detector) -> Self {
        match d {
            Detector::Gwcp => DetectorKind::Gwcp,
            Detector::Hb => DetectorKind::Hb,
            Detector::Lockset => DetectorKind::Lockset,
        }
    }
}

#[derive(Args)]
struct Flags {
    /// Use dense vector clocks instead of the compressed hierarchy.
    #[arg(long)]
    no_compress: bool,
    /// Give every thread its own acquire queue from the start.
    #[arg(long)]
    no_inactive_opt: bool,
    /// Lockset only: treat a warp as one thread.
    #[arg(long)]
    warp_granularity: bool,
}

impl Flags {
    fn options(&self) -> Options {
        Options {
            compress: !self.no_compress,
            inactive_opt: !self.no_inactive_opt,
            warp_granularity: self.warp_granularity,
        }
    }
}

#[derive(Args)]
struct Limits {
    /// Largest trace the oracle accepts.
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: usize,
    /// Maximum number of oracle states.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

/// Failure carrying the process exit code.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_USAGE, e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = run(cli, &mut out);
    let flushed = out.flush();
    match (result, flushed) {
        (Ok(code), Ok(())) => ExitCode::from(code),
        (Err(Failure(code, e)), _) => {
            eprintln!("gpurace: {e:#}");
            ExitCode::from(code)
        }
        (Ok(_), Err(e)) => {
            eprintln!("gpurace: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> Result<Trace, Failure> {
    let text = read_text(path)?;
    let trace = parse_trace(&text).map_err(|e| Failure(EXIT_USAGE, anyhow!("{}: {e}", path.display())))?;
    match prepare_trace(trace) {
        Ok(p) => {
            for w in &p.warnings {
                eprintln!("gpurace: warning: {w}");
            }
            Ok(p.trace)
        }
        Err(diags) => {
            for d in &diags {
                eprintln!("gpurace: {}: {d}", path.display());
            }
            Err(Failure(EXIT_INVALID, anyhow!("{} validation error(s)", diags.len())))
        }
    }
}

fn race_code(found: bool) -> u8 {
    if found {
        EXIT_RACES
    } else {
        0
    }
}

fn run(cli: Cli, out: &mut impl Write) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Check { trace, detector, flags, order_matrix: with_order } => {
            let t = load(&trace)?;
            let opts = flags.options();
            let reports = detect(&t, detector.into(), &opts);
            for r in &reports {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
            if with_order {
                let Some(m) = order_matrix(&t, detector.into(), &opts) else {
                    return Err(anyhow!("--order-matrix needs the gwcp or hb detector").into());
                };
                writeln!(out, "{}", serde_json::json!({ "order": m }))?;
            }
            Ok(race_code(!reports.is_empty()))
        }
        Cmd::Compare { trace, flags, limits, json } => {
            let t = load(&trace)?;
            let c = compare(&t, &flags.options(), limits.limit, limits.budget);
            if json {
                writeln!(out, "{}", serde_json::to_string(&c)?)?;
            } else {
                let oracle = c.oracle.map_or("-".to_string(), |n| n.to_string());
                let partial = if c.oracle_complete { "" } else { " (incomplete)" };
                writeln!(out, "gwcp:{} hb:{} lockset:{} oracle:{oracle}{partial}", c.gwcp, c.hb, c.lockset)?;
            }
            Ok(race_code(c.gwcp + c.hb + c.lockset + c.oracle.unwrap_or(0) > 0))
        }
        Cmd::Oracle { trace, limits } => {
            let t = load(&trace)?;
            let r = predictable_races(&t, limits.limit, limits.budget)?;
            writeln!(out, "{}", serde_json::to_string(&r)?)?;
            Ok(race_code(r.has_race()))
        }
        Cmd::Gen { name, seed, events, list, json } => {
            if list {
                for l in CORPUS {
                    if json {
                        writeln!(out, "{}", serde_json::to_string(l)?)?;
                    } else {
                        let e = l.expected;
                        let v = |b: bool| if b { "race" } else { "no-race" };
                        writeln!(
                            out,
                            "{:<24} gwcp={:<7} hb={:<7} lockset={:<7} oracle={:<7} {}",
                            l.name,
                            v(e.gwcp),
                            v(e.hb),
                            v(e.lockset),
                            v(e.oracle),
                            l.summary
                        )?;
                    }
                }
                return Ok(0);
            }
            let trace = match (name.as_deref(), seed) {
                (Some("random"), Some(seed)) => {
                    if events > MAX_RANDOM_EVENTS {
                        return Err(anyhow!("--events is capped at {MAX_RANDOM_EVENTS}").into());
                    }
                    gen_random(seed, &RandomConfig { events, ..RandomConfig::default() })?
                }
                (Some("random"), None) => return Err(anyhow!("`gen random` needs --seed").into()),
                (Some(name), _) => gen_litmus(name)?,
                (None, _) => return Err(anyhow!("give a corpus name, `random --seed S`, or --list").into()),
            };
            write!(out, "{}", write_trace(&trace))?;
            Ok(0)
        }
        Cmd::Stats { trace, no_inactive_opt } => {
            let t = load(&trace)?;
            let opts = Options { inactive_opt: !no_inactive_opt, ..Options::default() };
            writeln!(out, "{}", serde_json::to_string(&compression_stats(&t, &opts))?)?;
            Ok(0)
        }
    }
}
