//! `bellctl`: batch frontend over the closed forms, the verification
//! campaigns, the infimum oracle and the extremal constructions.
//!
//! Exit codes: 0 success, 1 usage error, 2 verification violation,
//! 3 internal error. All numeric output uses the shortest round-trip
//! decimal representation, so identical seeds give byte-identical files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremizers;
use crate::forms;
use crate::oracle::{self, BellmanQuery, ObjectiveSpec, SandwichResult};
use crate::tree::{StepFunction, TreeParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bellctl", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a single closed form.
    Eval(EvalArgs),
    /// Tabulate the closed forms over parameter grids.
    Sweep(SweepArgs),
    /// Random lower-bound campaign over seeded step functions.
    Verify(VerifyArgs),
    /// Bracket a Bellman infimum between closed form and search.
    Oracle(OracleArgs),
    /// Build an extremal construction and report its gap.
    Extremal(ExtremalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Formula {
    Lp,
    Dp,
    Weak,
    Bpq,
    Blq,
    Chain,
    BqLess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Construction {
    Chain,
    Concentrated,
    Dp,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    formula: Formula,
    #[arg(long = "N", default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "F")]
    big_f: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "L")]
    level: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long = "N", default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "F")]
    big_f: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "L")]
    level: Option<f64>,
    /// Comma list or start:stop:count.
    #[arg(long = "kappa-grid")]
    kappa_grid: Option<String>,
    /// Comma list or start:stop:count.
    #[arg(long = "F-grid")]
    big_f_grid: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "N", default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 3.0)]
    q: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long = "kappa-grid")]
    kappa_grid: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Failure-path hook: add a constant to every bound before checking.
    #[arg(long = "corrupt-bound", hide = true, default_value_t = 0.0)]
    corrupt_bound: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long = "N", default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "F", default_value_t = 2.0)]
    big_f: f64,
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "L")]
    level: Option<f64>,
    #[arg(long = "depth-list", default_value = "1,2,3")]
    depth_list: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Objective evaluation budget per depth.
    #[arg(long, default_value_t = 4000)]
    samples: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtremalArgs {
    #[arg(long, value_enum)]
    construction: Construction,
    #[arg(long = "N", default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "F", default_value_t = 2.0)]
    big_f: f64,
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn require<T>(opt: Option<T>, flag: &str) -> Result<T> {
    opt.ok_or_else(|| usage(format!("missing required flag {}", flag)))
}

/// "a,b,c" as explicit points, or "start:stop:count" as an inclusive
/// linearly spaced grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let start: f64 = parts[0].parse().map_err(|_| usage("bad grid start"))?;
        let stop: f64 = parts[1].parse().map_err(|_| usage("bad grid stop"))?;
        let count: usize = parts[2].parse().map_err(|_| usage("bad grid count"))?;
        if count == 0 {
            return Err(usage("empty grid"));
        }
        if count == 1 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()
        }
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| usage("bad grid value")))
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(usage("empty grid"));
    }
    Ok(grid)
}

fn parse_depth_list(spec: &str) -> Result<Vec<u32>> {
    let list: Vec<u32> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<u32>().map_err(|_| usage("bad depth value")))
        .collect::<Result<Vec<u32>>>()?;
    if list.is_empty() {
        return Err(usage("empty depth list"));
    }
    Ok(list)
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Entry point used by both the binary and the determinism tests. Returns
/// the process exit code and writes all normal output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                writeln!(stdout, "{}", err.render())
            } else {
                writeln!(std::io::stderr(), "{}", err.render())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Eval(args) => cmd_eval(&args, stdout),
        Command::Sweep(args) => cmd_sweep(&args, stdout),
        Command::Verify(args) => cmd_verify(&args, stdout),
        Command::Oracle(args) => cmd_oracle(&args, stdout),
        Command::Extremal(args) => cmd_extremal(&args, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(std::io::stderr(), "error: {}", err);
            match err {
                Error::Io(_) | Error::Serde(_) | Error::ProjectionFailed => EXIT_INTERNAL,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let n = args.branching;
    let p = args.p;
    let f = args.f;
    match args.formula {
        Formula::Lp => {
            let big_f = require(args.big_f, "--F")?;
            writeln!(stdout, "{}", forms::lp_lower(big_f, f, n, p)?)?;
        }
        Formula::Dp => {
            let big_f = require(args.big_f, "--F")?;
            let kappa = require(args.kappa, "--kappa")?;
            let piecewise = forms::dp_piecewise(big_f, f, kappa, n, p)?;
            let min_form = forms::dp_min_form(big_f, f, kappa, n, p)?;
            writeln!(stdout, "{}", piecewise)?;
            writeln!(stdout, "piecewise = {}", piecewise)?;
            writeln!(stdout, "min_form = {}", min_form)?;
            writeln!(stdout, "difference = {}", piecewise - min_form)?;
        }
        Formula::Weak => {
            let big_f = require(args.big_f, "--F")?;
            let q = require(args.q, "--q")?;
            writeln!(stdout, "{}", forms::weak_lower(big_f, f, n, p, q)?)?;
        }
        Formula::Bpq => {
            let big_f = require(args.big_f, "--F")?;
            let q = require(args.q, "--q")?;
            writeln!(stdout, "{}", forms::bpq_lower(big_f, f, n, p, q)?)?;
        }
        Formula::Blq => {
            let big_f = require(args.big_f, "--F")?;
            let q = require(args.q, "--q")?;
            let level = require(args.level, "--L")?;
            writeln!(stdout, "{}", forms::blq_lower(big_f, f, level, n, p, q)?)?;
        }
        Formula::Chain => {
            let q = require(args.q, "--q")?;
            let m = require(args.m, "--m")?;
            writeln!(stdout, "{}", forms::bpq_chain_value(f, n, m, p, q)?)?;
        }
        Formula::BqLess => {
            let q = require(args.q, "--q")?;
            writeln!(stdout, "{}", forms::bq_less_p(f, q)?)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    #[serde(rename = "N")]
    branching: u32,
    p: f64,
    q: Option<f64>,
    #[serde(rename = "F")]
    big_f: f64,
    f: f64,
    kappa: Option<f64>,
    lp: f64,
    dp_piecewise: Option<f64>,
    dp_min_form: Option<f64>,
    bpq: Option<f64>,
    weak: Option<f64>,
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<i32> {
    let big_f_grid = match (&args.big_f_grid, args.big_f) {
        (Some(spec), _) => parse_grid(spec)?,
        (None, Some(big_f)) => vec![big_f],
        (None, None) => return Err(usage("need --F or --F-grid")),
    };
    let kappa_grid = match (&args.kappa_grid, args.kappa) {
        (Some(spec), _) => Some(parse_grid(spec)?),
        (None, Some(kappa)) => Some(vec![kappa]),
        (None, None) => None,
    };
    let mut rows = Vec::new();
    // Lexicographic over the grid axes: F outer, kappa inner.
    for &big_f in &big_f_grid {
        let kappas: Vec<Option<f64>> = match &kappa_grid {
            Some(grid) => grid.iter().map(|&k| Some(k)).collect(),
            None => vec![None],
        };
        for kappa in kappas {
            let lp = forms::lp_lower(big_f, args.f, args.branching, args.p)?;
            let (dp_piecewise, dp_min_form) = match kappa {
                Some(k) => (
                    Some(forms::dp_piecewise(big_f, args.f, k, args.branching, args.p)?),
                    Some(forms::dp_min_form(big_f, args.f, k, args.branching, args.p)?),
                ),
                None => (None, None),
            };
            let (bpq, weak) = match args.q {
                Some(q) => (
                    Some(forms::bpq_lower(big_f, args.f, args.branching, args.p, q)?),
                    Some(forms::weak_lower(big_f, args.f, args.branching, args.p, q)?),
                ),
                None => (None, None),
            };
            rows.push(SweepRow {
                branching: args.branching,
                p: args.p,
                q: args.q,
                big_f,
                f: args.f,
                kappa,
                lp,
                dp_piecewise,
                dp_min_form,
                bpq,
                weak,
            });
        }
    }
    let text = match args.format {
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&rows)?),
        OutputFormat::Csv => {
            let mut text = String::from("N,p,q,F,f,kappa,lp,dp_piecewise,dp_min_form,bpq,weak\n");
            for r in &rows {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.branching,
                    r.p,
                    opt_str(r.q),
                    r.big_f,
                    r.f,
                    opt_str(r.kappa),
                    r.lp,
                    opt_str(r.dp_piecewise),
                    opt_str(r.dp_min_form),
                    opt_str(r.bpq),
                    opt_str(r.weak)
                );
            }
            text
        }
    };
    emit(&text, &args.out, stdout)?;
    Ok(EXIT_OK)
}

/// Random feasible step function: log-uniform leaves, then projection onto
/// ∫φ = 1 and ∫φ^p = F with F itself log-uniform below the depth-m maximum.
fn sample_function(
    rng: &mut ChaCha8Rng,
    params: TreeParams,
    p: f64,
) -> Result<StepFunction<f64>> {
    let n = params.leaf_count();
    let leaves: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0_f64).exp()).collect();
    // The projection spreads along φ_t = (1 + t(φ−1))⁺; its reachable
    // p-moment is capped by the normalized positive part, so sample F
    // log-uniform below that limit (with margin) to keep failures rare.
    let mut limit_shape: Vec<f64> = leaves.iter().map(|&v| (v - 1.0).max(0.0)).collect();
    let limit_mean = limit_shape.iter().sum::<f64>() / n as f64;
    let reach = if limit_mean > 0.0 {
        for v in limit_shape.iter_mut() {
            *v /= limit_mean;
        }
        limit_shape.iter().map(|&v| v.powf(p)).sum::<f64>() / n as f64
    } else {
        1.0
    };
    let hard_cap =
        (0.8 * (p - 1.0) * params.depth() as f64 * (params.branching() as f64).ln()).exp();
    let log_max = (0.9 * reach).min(hard_cap).max(1.0).ln();
    let big_f = (rng.gen_range(0.0..1.0) * log_max).exp();
    oracle::feasible_project(params, &leaves, 1.0, big_f, p)
}

fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    if args.samples < 1 {
        return Err(usage("--samples must be at least 1"));
    }
    if args.q <= args.p {
        return Err(usage("verification requires q > p"));
    }
    let params = TreeParams::new(args.branching, args.depth)?;
    let kappa_grid = match &args.kappa_grid {
        Some(spec) => parse_grid(spec)?,
        None => (1..=9).map(|i| i as f64 / 10.0).collect(),
    };
    let l_grid = [1.0, 1.5, 2.0, 3.0, 5.0];

    let mut min_slack = f64::INFINITY;
    let mut violations = 0u64;
    let mut projection_failures = 0u64;
    let mut rows = Vec::new();
    for i in 0..args.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(i));
        let phi = match sample_function(&mut rng, params, args.p) {
            Ok(phi) => phi,
            Err(Error::ProjectionFailed) => {
                projection_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let report = extremizers::verify_bounds_with_offset(
            &phi,
            args.p,
            args.q,
            &kappa_grid,
            &l_grid,
            args.corrupt_bound,
        )?;
        if report.violation(args.tol).is_some() {
            violations += 1;
        }
        min_slack = min_slack.min(report.min_slack);
        rows.push((i, report.mean, report.p_moment, report.min_slack));
    }
    let checked = rows.len() as u64;

    let text = match args.format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct VerifyRow {
                sample: u64,
                mean: f64,
                p_moment: f64,
                min_slack: f64,
            }
            let json: Vec<VerifyRow> = rows
                .iter()
                .map(|&(sample, mean, p_moment, min_slack)| VerifyRow {
                    sample,
                    mean,
                    p_moment,
                    min_slack,
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&json)?)
        }
        OutputFormat::Csv => {
            let mut text = String::from("sample,mean,p_moment,min_slack\n");
            for (sample, mean, p_moment, slack) in &rows {
                let _ = writeln!(text, "{},{},{},{}", sample, mean, p_moment, slack);
            }
            text
        }
    };
    emit(&text, &args.out, stdout)?;
    writeln!(
        stdout,
        "verify: samples={} checked={} projection_failures={} violations={} min_slack={}",
        args.samples, checked, projection_failures, violations, min_slack
    )?;
    let failure_budget = (args.samples as f64 * 0.01).ceil() as u64;
    if violations > 0 || projection_failures > failure_budget {
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let spec = if let Some(kappa) = args.kappa {
        ObjectiveSpec::TopKappaP { p: args.p, kappa }
    } else if let Some(level) = args.level {
        let q = require(args.q, "--q")?;
        ObjectiveSpec::MaxWithL { p: args.p, q, level }
    } else {
        let q = require(args.q, "--q")?;
        ObjectiveSpec::StrongQ { p: args.p, q }
    };
    let query = BellmanQuery {
        branching: args.branching,
        p: args.p,
        q: args.q,
        big_f: args.big_f,
        f: args.f,
        kappa: args.kappa,
        level: args.level,
    };
    let depth_list = parse_depth_list(&args.depth_list)?;
    let seeds = [args.seed, args.seed.wrapping_add(1), args.seed.wrapping_add(2)];
    let results = oracle::sandwich(&query, &spec, &depth_list, &seeds, args.samples)?;

    let text = match args.format {
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&results)?),
        OutputFormat::Csv => {
            let mut text = format!("{}\n", SandwichResult::csv_header());
            for r in &results {
                let _ = writeln!(text, "{}", r.to_csv_row());
            }
            text
        }
    };
    emit(&text, &args.out, stdout)?;
    let trajectory: Vec<String> = results.iter().map(|r| r.gap.to_string()).collect();
    writeln!(stdout, "gap trajectory: {}", trajectory.join(" "))?;
    Ok(EXIT_OK)
}

fn cmd_extremal(args: &ExtremalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let (phi, report) = match args.construction {
        Construction::Chain => {
            let phi = extremizers::chain_function(args.branching, args.m, args.f)?;
            let q = args.q.unwrap_or(args.p);
            let target = forms::bpq_chain_value(args.f, args.branching, args.m, args.p, q)?;
            let achieved = phi.maximal().integral_power(q);
            let report = extremizers::ExtremizerReport {
                target_value: target,
                achieved_value: achieved,
                achieved_f: phi.integral(),
                achieved_big_f: phi.integral_power(args.p),
                depth: args.m,
                relative_gap: (achieved - target) / target,
            };
            (phi, report)
        }
        Construction::Concentrated => {
            let depth = args.depth.unwrap_or(args.m + 4);
            if depth <= args.m {
                return Err(usage("--depth must exceed --m"));
            }
            extremizers::concentrated_function(
                args.branching,
                args.m,
                args.f,
                args.big_f,
                args.p,
                depth - args.m,
            )?
        }
        Construction::Dp => {
            let kappa = require(args.kappa, "--kappa")?;
            let depth = args.depth.unwrap_or(4);
            extremizers::dp_near_extremizer(
                args.big_f,
                args.f,
                kappa,
                args.branching,
                args.p,
                depth,
            )?
        }
    };
    if let Some(path) = &args.out {
        fs::write(path, format!("{}\n", serde_json::to_string(&phi)?))?;
    }
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = run(args.iter().map(|s| s.to_string()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn eval_examples() {
        let (code, out) = run_capture(&[
            "bellctl", "eval", "--formula", "dp", "--N", "2", "--p", "2", "--F", "2", "--f", "1",
            "--kappa", "0.5",
        ]);
        assert_eq!(code, EXIT_OK);
        let first: f64 = out.lines().next().unwrap().parse().unwrap();
        assert!((first - 1.875).abs() < 1e-15);
        assert!(out.contains("difference = 0"));

        let (code, out) = run_capture(&[
            "bellctl", "eval", "--formula", "lp", "--F", "1", "--f", "1", "--p", "2", "--N", "2",
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.trim(), "1");

        let (code, out) = run_capture(&[
            "bellctl", "eval", "--formula", "chain", "--N", "2", "--m", "1", "--q", "3", "--p",
            "2", "--f", "1",
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.trim(), "4.5");
    }

    #[test]
    fn eval_missing_flag_is_usage_error() {
        let (code, _) = run_capture(&["bellctl", "eval", "--formula", "dp", "--F", "2"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _) = run_capture(&["bellctl", "eval", "--formula", "nope"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn sweep_row_count_and_continuity() {
        let (code, out) = run_capture(&[
            "bellctl", "sweep", "--N", "2", "--p", "2", "--F", "2", "--f", "1", "--kappa-grid",
            "0.25,0.5,0.75",
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), 4);

        // Dense sweep across the upper branch boundary kappa = 3/4: adjacent
        // dp values stay continuous.
        let (code, out) = run_capture(&[
            "bellctl", "sweep", "--N", "2", "--p", "2", "--F", "2", "--f", "1", "--kappa-grid",
            "0.74:0.76:21",
        ]);
        assert_eq!(code, EXIT_OK);
        let values: Vec<f64> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(7).unwrap().parse().unwrap())
            .collect();
        for pair in values.windows(2) {
            assert!((pair[1] - pair[0]).abs() < 1e-2);
        }

        let (code, out) = run_capture(&[
            "bellctl", "sweep", "--N", "2", "--p", "2", "--F-grid", "1,2,4", "--f", "1", "--q",
            "3", "--format", "json",
        ]);
        assert_eq!(code, EXIT_OK);
        let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(rows.as_array().unwrap().len(), 3);
    }

    #[test]
    fn verify_small_campaign_passes() {
        let (code, out) = run_capture(&[
            "bellctl", "verify", "--samples", "20", "--seed", "5", "--N", "2", "--depth", "3",
            "--p", "2", "--q", "3",
        ]);
        assert_eq!(code, EXIT_OK, "output:\n{}", out);
        assert!(out.contains("violations=0"));
    }

    #[test]
    fn verify_corrupted_bound_fails() {
        let (code, out) = run_capture(&[
            "bellctl", "verify", "--samples", "5", "--seed", "5", "--N", "2", "--depth", "3",
            "--p", "2", "--q", "3", "--corrupt-bound", "0.5",
        ]);
        assert_eq!(code, EXIT_VIOLATION, "output:\n{}", out);
    }

    #[test]
    fn oracle_equality_case_gap_closes() {
        let (code, out) = run_capture(&[
            "bellctl", "oracle", "--N", "2", "--p", "2", "--q", "3", "--F", "2", "--f", "1",
            "--depth-list", "1,2",
        ]);
        assert_eq!(code, EXIT_OK, "output:\n{}", out);
        let last = out.lines().last().unwrap();
        assert!(last.starts_with("gap trajectory:"));
        for gap in last.trim_start_matches("gap trajectory:").split_whitespace() {
            let gap: f64 = gap.parse().unwrap();
            assert!(gap.abs() <= 1e-9, "gap {}", gap);
        }
    }

    #[test]
    fn extremal_chain_writes_leaves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let (code, out) = run_capture(&[
            "bellctl",
            "extremal",
            "--construction",
            "chain",
            "--N",
            "2",
            "--m",
            "2",
            "--f",
            "1",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "output:\n{}", out);
        let phi: StepFunction<f64> =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(phi.leaves(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn extremal_dp_rejects_non_adic_kappa() {
        let (code, _) = run_capture(&[
            "bellctl", "extremal", "--construction", "dp", "--N", "2", "--kappa", "0.3",
            "--depth", "2",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }
}
