use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ratioblock::analysis::{
    self, consecutive_ratio, df_envelope, dispersion_trace, geometric_grid, index_dilation_ratio, lambda_trace,
    lemma1_check, log_count_trace, mean_ratio, ndense_probe, ratio_scan, step_df, LimitTrace, Verdict,
};
use ratioblock::arith::{fmt_rational, parse_natural, parse_rational, to_f64, Natural, Rational};
use ratioblock::generators::from_params;
use ratioblock::ratiogeom::{
    coverage_probe, coverage_scan, dispersion_bound_check, forbidden_scan, homeomorphism_check, ratio_points_k,
    ForbiddenSpec,
};
use ratioblock::set::{default_budget, SetDescriptor};
use ratioblock::suite::{emit, load_suite, run_suite, Format, StatSpec};

#[derive(Parser)]
#[command(name = "ratioblock", version, about = "Ratio block sequences of integer sets at finite truncation")]
struct Cli {
    /// Element budget for enumeration [env: RATIOBLOCK_BUDGET]
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    /// Seed for sampled checks
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the descriptor of a generator family (or a prefix of it)
    Gen {
        #[arg(long)]
        family: String,
        /// key=value, repeatable
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Emit the first N elements as JSON lines instead
        #[arg(long)]
        prefix: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a statistic of a set
    Analyze {
        stat: Stat,
        #[command(flatten)]
        set: SetArgs,
        /// Prefix length for prefix-based statistics
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// `lo..hi`: index window (df-envelope) or t window (ratio-scan, log-count, lemma1)
        #[arg(long)]
        window: Option<String>,
        /// Comma-separated rationals in [0,1]
        #[arg(long, default_value = "1/4,1/2,3/4,1")]
        grid: String,
        /// Ratio c
        #[arg(long, default_value = "2")]
        c: String,
        /// Dilation factor or dimension
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Number of geometric checkpoints in the window
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Explicit comma-separated checkpoints, overriding the window grid
        #[arg(long)]
        checkpoints: Option<String>,
        #[arg(long, default_value_t = analysis::DEFAULT_TOL)]
        tol: f64,
    },
    /// Ratio set coverage of (0,1)^{k-1}
    Ratioset {
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        bound: String,
        /// Boxes per axis
        #[arg(long, default_value_t = 8)]
        grid: u32,
        /// Write the points as CSV of exact p/q columns
        #[arg(long)]
        points: Option<PathBuf>,
        /// Also scan R^{k+1} for the forbidden shape of dispersion d
        #[arg(long)]
        forbidden_d: Option<String>,
        /// Denominator threshold for the forbidden scan
        #[arg(long, default_value = "5040")]
        threshold: String,
    },
    /// (N)-denseness probe: A(ct) > A(t) over a window
    Probe {
        #[command(flatten)]
        set: SetArgs,
        /// Repeatable
        #[arg(long = "c", required = true)]
        cs: Vec<String>,
        /// `lo..hi`
        #[arg(long)]
        window: String,
    },
    /// Run a check suite; exit status 1 if any check fails
    Report {
        /// `paper` or a JSON suite file
        #[arg(long, default_value = "paper")]
        suite: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Text)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include per-check timings (JSON only)
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Args)]
struct SetArgs {
    /// Descriptor JSON file, `-` for stdin
    #[arg(long = "in", value_name = "FILE", conflicts_with = "family")]
    input: Option<PathBuf>,
    /// Generator family, as an alternative to --in
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stat {
    MeanRatio,
    Lambda,
    Dispersion,
    ConsecutiveRatio,
    IndexDilation,
    RatioScan,
    LogCount,
    StepDf,
    DfEnvelope,
    Lemma1,
    DispersionBound,
    Maps,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
    Text,
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, String>> {
    raw.iter()
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got `{p}`"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl SetArgs {
    fn load(&self) -> Result<SetDescriptor> {
        match (&self.input, &self.family) {
            (Some(path), None) => {
                let mut text = String::new();
                if path.as_os_str() == "-" {
                    io::stdin().read_to_string(&mut text)?;
                } else {
                    text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                }
                Ok(SetDescriptor::from_json(&text)?)
            }
            (None, Some(f)) => Ok(from_params(f, &parse_params(&self.params)?)?),
            _ => bail!("give either --in FILE or --family NAME"),
        }
    }
}

fn window(s: &str) -> Result<(Natural, Natural)> {
    let (a, b) = s.split_once("..").ok_or_else(|| anyhow!("window must look like lo..hi"))?;
    let (lo, hi) = (parse_natural(a)?, parse_natural(b)?);
    if hi <= lo {
        bail!("empty window {s}");
    }
    Ok((lo, hi))
}

fn index_window(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = window(s)?;
    let conv = |v: Natural| usize::try_from(v).map_err(|_| anyhow!("index window too large"));
    Ok((conv(lo)?, conv(hi)?))
}

fn list<T>(s: &str, f: impl Fn(&str) -> ratioblock::Result<T>) -> Result<Vec<T>> {
    s.split(',').map(|x| Ok(f(x.trim())?)).collect()
}

fn rat_json(r: &Rational) -> serde_json::Value {
    json!({"exact": fmt_rational(r), "value": to_f64(r)})
}

fn trace_text(name: &str, t: &LimitTrace) -> String {
    let verdict = match &t.verdict {
        Verdict::Converged { value, tol } => format!("converged to {value:.6} (tol {tol})"),
        Verdict::Oscillating { inf, sup } => format!("oscillating in [{inf:.6}, {sup:.6}]"),
        Verdict::Diverging => "diverging".to_string(),
    };
    format!(
        "{name}: {} checkpoints, last {:.6}, tail inf {:.6}, tail sup {:.6}, {verdict}",
        t.checkpoints.len(),
        t.last_value(),
        t.inf,
        t.sup
    )
}

struct Ctx {
    budget: u64,
    json: bool,
    seed: u64,
}

impl Ctx {
    fn print(&self, value: serde_json::Value, text: impl FnOnce() -> String) -> Result<()> {
        let out = io::stdout();
        let mut out = out.lock();
        if self.json {
            serde_json::to_writer_pretty(&mut out, &value)?;
            writeln!(out)?;
        } else {
            writeln!(out, "{}", text())?;
        }
        Ok(())
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Ctx { budget: cli.budget.unwrap_or_else(default_budget), json: cli.json, seed: cli.seed };
    match cli.cmd {
        Cmd::Gen { family, params, prefix, out } => {
            let set = from_params(&family, &parse_params(&params)?)?;
            let mut w = sink(&out)?;
            match prefix {
                Some(n) => set.take_prefix(n, ctx.budget)?.write_json_lines(&mut w)?,
                None => writeln!(w, "{}", set.to_json())?,
            }
            w.flush()?;
        }
        Cmd::Analyze { stat, set, n, window: win, grid, c, k, points, checkpoints, tol } => {
            analyze(&ctx, stat, &set, n, win.as_deref(), &grid, &c, k, points, checkpoints.as_deref(), tol)?;
        }
        Cmd::Ratioset { set, k, bound, grid, points, forbidden_d, threshold } => {
            let set = set.load()?;
            let bound = parse_natural(&bound)?;
            let mut value = if k == 2 && points.is_none() {
                serde_json::to_value(coverage_scan(&set, &bound, grid, ctx.budget)?)?
            } else {
                let pts = ratio_points_k(&set, k, &bound, true, ctx.budget)?;
                if let Some(p) = &points {
                    let mut w = sink(&Some(p.clone()))?;
                    let header: Vec<String> = (1..k).map(|i| format!("x{i}")).collect();
                    writeln!(w, "{}", header.join(","))?;
                    for q in &pts {
                        writeln!(w, "{}", q.csv_row())?;
                    }
                    w.flush()?;
                }
                serde_json::to_value(coverage_probe(&pts, k, grid, &bound, None)?)?
            };
            if let Some(d) = forbidden_d {
                let spec = ForbiddenSpec { threshold: parse_natural(&threshold)?, ..ForbiddenSpec::new(parse_rational(&d)?) };
                value["forbidden"] = serde_json::to_value(forbidden_scan(&set, &spec, &bound, ctx.budget)?)?;
            }
            ctx.print(value.clone(), || {
                let mut s = format!(
                    "k={k} bound={bound} grid={grid}: {} of {} boxes hit ({:.4})",
                    value["hit"], value["boxes"], value["fraction"].as_f64().unwrap_or(f64::NAN)
                );
                if let Some(f) = value.get("forbidden") {
                    s += &format!("\nforbidden shape: {} violations over {} denominators", f["violations"], f["checked"]);
                }
                s
            })?;
        }
        Cmd::Probe { set, cs, window: win } => {
            let set = set.load()?;
            let (lo, hi) = window(&win)?;
            let cs = cs.iter().map(|c| parse_rational(c)).collect::<ratioblock::Result<Vec<_>>>()?;
            let r = ndense_probe(&set, &cs, &lo, &hi, ctx.budget)?;
            ctx.print(serde_json::to_value(&r)?, || {
                let mut s = format!("window [{lo}, {hi}], tail from {}", r.tail_start);
                for scan in &r.scans {
                    s += &format!("\n{scan} condition_i={} condition_ii={}", scan.condition_i, scan.condition_ii);
                }
                s
            })?;
        }
        Cmd::Report { suite, format, out, timing } => {
            let mut spec = load_suite(&suite)?;
            for c in &mut spec.checks {
                if let StatSpec::Homeomorphism { seed, .. } = &mut c.stat {
                    *seed = ctx.seed;
                }
            }
            let report = run_suite(&spec, ctx.budget)?;
            let format = match (format, ctx.json) {
                (_, true) | (OutFormat::Json, _) => Format::Json,
                (OutFormat::Csv, _) => Format::Csv,
                (OutFormat::Text, _) => Format::Text,
            };
            let mut w = sink(&out)?;
            emit(&report, format, timing, &mut w)?;
            w.flush()?;
            if !report.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    ctx: &Ctx,
    stat: Stat,
    set: &SetArgs,
    n: usize,
    win: Option<&str>,
    grid: &str,
    c: &str,
    k: usize,
    points: usize,
    checkpoints: Option<&str>,
    tol: f64,
) -> Result<()> {
    if let Stat::Maps = stat {
        let r = homeomorphism_check(k, n.min(1_000_000), 1000, ctx.seed)?;
        return ctx.print(serde_json::to_value(&r)?, || {
            format!(
                "k={k}: max |FG(y)-y| {:e}, max |GF(x)-x| {:e}, involution failures {}/{}",
                r.max_fg_error, r.max_gf_error, r.involution_failures, r.involution_samples
            )
        });
    }
    let set = set.load()?;
    let c = parse_rational(c)?;
    let ts = || -> Result<Vec<Natural>> {
        match (checkpoints, win) {
            (Some(list_s), _) => list(list_s, parse_natural),
            (None, Some(w)) => {
                let (lo, hi) = window(w)?;
                Ok(geometric_grid(&lo, &hi, points))
            }
            (None, None) => bail!("give --window lo..hi or --checkpoints"),
        }
    };
    let prefix = || set.take_prefix(n, ctx.budget);
    let trace = |name: &str, t: LimitTrace| ctx.print(t.to_json(), || trace_text(name, &t));
    match stat {
        Stat::MeanRatio => trace("mean ratio", mean_ratio(&prefix()?, tol)),
        Stat::Lambda => trace("lambda", lambda_trace(&prefix()?, tol)),
        Stat::Dispersion => trace("dispersion", dispersion_trace(&prefix()?, tol)),
        Stat::ConsecutiveRatio => trace("consecutive ratio", consecutive_ratio(&prefix()?, tol)),
        Stat::IndexDilation => trace("index dilation", index_dilation_ratio(&prefix()?, k, tol)?),
        Stat::RatioScan => trace("counting ratio", ratio_scan(&set, &c, &ts()?, tol)?),
        Stat::LogCount => trace("log count", log_count_trace(&set, &ts()?, tol)?),
        Stat::StepDf => {
            let p = prefix()?;
            let xs = list(grid, parse_rational)?;
            let vals = xs.iter().map(|x| step_df(&p, n, x)).collect::<ratioblock::Result<Vec<_>>>()?;
            let rows: Vec<_> = xs.iter().zip(&vals).map(|(x, v)| json!([fmt_rational(x), rat_json(v)])).collect();
            ctx.print(json!({"n": n, "values": rows}), || {
                xs.iter()
                    .zip(&vals)
                    .map(|(x, v)| format!("F(A_{n}, {}) = {} ≈ {:.6}", fmt_rational(x), fmt_rational(v), to_f64(v)))
                    .collect::<Vec<_>>()
                    .join("\n")
            })
        }
        Stat::DfEnvelope => {
            let (lo, hi) = index_window(win.ok_or_else(|| anyhow!("df-envelope needs --window lo..hi (indices)"))?)?;
            let p = set.take_prefix(hi, ctx.budget)?;
            let env = df_envelope(&p, lo..=hi, &list(grid, parse_rational)?, tol)?;
            ctx.print(env.to_json(), || {
                let mut s = String::new();
                for ((x, l), u) in env.grid.iter().zip(&env.lower).zip(&env.upper) {
                    s += &format!("x={}  lower={:.6}  upper={:.6}\n", fmt_rational(x), to_f64(l), to_f64(u));
                }
                s + &format!("model {:?}, singleton {}", env.model, env.singleton)
            })
        }
        Stat::Lemma1 => {
            let (lo, hi) = window(win.ok_or_else(|| anyhow!("lemma1 needs --window lo..hi"))?)?;
            let r = lemma1_check(&set, &c, &lo, &hi, points)?;
            ctx.print(serde_json::to_value(&r)?, || {
                format!(
                    "grid sup/inf {:.6}/{:.6}, restricted sup/inf {:.6}/{:.6}, differences {:.2e}/{:.2e}",
                    r.grid_sup, r.grid_inf, r.restricted_sup, r.restricted_inf, r.sup_diff, r.inf_diff
                )
            })
        }
        Stat::DispersionBound => {
            let p = prefix()?;
            let bound = p.elements().last().cloned().unwrap_or_default();
            let coverage = if k == 2 {
                coverage_scan(&set, &bound, 8, ctx.budget)?.fraction
            } else {
                coverage_probe(&ratio_points_k(&set, k, &bound, true, ctx.budget)?, k, 8, &bound, None)?.fraction
            };
            let r = dispersion_bound_check(&p, k, coverage, 0.02)?;
            ctx.print(serde_json::to_value(&r)?, || {
                format!(
                    "dispersion {:.6} vs 1/{k}: holds={} (coverage {:.4}, applicable={})",
                    r.dispersion, r.holds, r.coverage, r.applicable
                )
            })
        }
        Stat::Maps => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
