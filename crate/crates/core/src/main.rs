use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use steersim::scenario::{
    apply_fixes, fmt_sig, max_simultaneous_pairs, parse_axes, post_pair1_ellipsoids, run_scenario, scan_region,
    sharing_window, sweep_curve, write_scan_csv, write_sweep_csv, Mode, ParamId, ScenarioConfig, DEFAULT_GRID,
};
use steersim::steering::{classical_bound, SteeringEllipsoid};

#[derive(Parser)]
#[command(name = "steersim", version, about = "Sequential steering sharing with unsharp measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the headline values of the GHZ scenarios.
    Demo {
        /// Grid resolution for the max-sharing search.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Region scan over equal first- and second-pair strengths.
    Scan {
        #[arg(long, default_value_t = 2)]
        pairs: usize,
        #[arg(long, default_value = "compare")]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Strength of the third pair (sharp by default).
        #[arg(long)]
        lambda3: Option<f64>,
        /// Template config; overrides --pairs and --mode.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-parameter sweep, e.g. --fix lambda1.1=0.7071 --vary lambda1.2.
    Sweep {
        /// NAME=VALUE, repeatable. Unfixed pairs measure sharply.
        #[arg(long = "fix", value_parser = parse_fix)]
        fixes: Vec<(ParamId, f64)>,
        #[arg(long)]
        vary: ParamId,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value = "compare")]
        mode: Mode,
        #[arg(long, default_value_t = 2)]
        pairs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ellipsoids of the state handed to pair 2, as JSON.
    Ellipsoids {
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classical bound for Charlie's settings, e.g. x,y or x,y,z.
    Bound {
        #[arg(long, default_value = "x,y")]
        settings: String,
    },
    /// Run a JSON scenario file and print per-pair results as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_fix(s: &str) -> Result<(ParamId, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let id = name.parse::<ParamId>().map_err(|e| e.to_string())?;
    let v = value.trim().parse::<f64>().map_err(|e| format!("{value:?}: {e}"))?;
    Ok((id, v))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

#[derive(Serialize)]
struct EllipsoidReport {
    lambda1: f64,
    lambda2: f64,
    charlie: SteeringEllipsoid,
    ab: SteeringEllipsoid,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Demo { grid } => demo(grid)?,
        Command::Scan { pairs, mode, grid, lambda3, config, out } => {
            let template = match config {
                Some(p) => load_config(&p)?,
                None => {
                    if lambda3.is_some() && pairs != 3 {
                        bail!("--lambda3 needs --pairs 3");
                    }
                    let mut strengths = vec![0.0; pairs.min(2)];
                    if pairs > 2 {
                        strengths.push(lambda3.unwrap_or(1.0));
                    }
                    ScenarioConfig::equal(mode, &strengths)
                }
            };
            let records = scan_region(&template, grid)?;
            write_scan_csv(&records, output(out.as_deref())?)?;
        }
        Command::Sweep { fixes, vary, from, to, samples, mode, pairs, config, out } => {
            let base = match config {
                Some(p) => load_config(&p)?,
                None => ScenarioConfig::equal(mode, &vec![1.0; pairs]),
            };
            let template = apply_fixes(&base, &fixes)?;
            let records = sweep_curve(&template, vary, from, to, samples)?;
            write_sweep_csv(&records, output(out.as_deref())?)?;
        }
        Command::Ellipsoids { lambda1, lambda2, out } => {
            let sample = post_pair1_ellipsoids(&ScenarioConfig::default(), [lambda1, lambda2])?;
            let report = EllipsoidReport {
                lambda1,
                lambda2,
                charlie: sample.charlie,
                ab: sample.ab,
            };
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Command::Bound { settings } => {
            let axes = parse_axes(&settings)?;
            let dirs: Vec<_> = axes.iter().map(|a| a.matrix()).collect();
            println!("{:.12}", classical_bound(&dirs)?);
        }
        Command::Run { config, out } => {
            let run = run_scenario(&load_config(&config)?)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &run)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn pair_values(cfg: &ScenarioConfig) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let run = run_scenario(cfg)?;
    let take = |v: Option<Vec<steersim::scenario::PairReport>>| v.unwrap_or_default().iter().map(|p| p.steering).collect();
    Ok((take(run.nonlocal), take(run.local)))
}

fn demo(grid: usize) -> anyhow::Result<()> {
    let c2 = ScenarioConfig::default().bound()?;
    println!("C2 = {}", fmt_sig(c2));

    let (s, st) = pair_values(&ScenarioConfig::equal(Mode::Compare, &[0.5, 0.8]))?;
    println!("lambda = (0.5, 0.8): S2 = {}  St2 = {}", fmt_sig(s[1]), fmt_sig(st[1]));

    let (s, st) = pair_values(&ScenarioConfig::equal(Mode::Compare, &[0.4, 0.8, 0.95]))?;
    println!(
        "lambda = (0.4, 0.8, 0.95): S2 = {}  S3 = {}  St2 = {}  St3 = {}",
        fmt_sig(s[1]),
        fmt_sig(s[2]),
        fmt_sig(st[1]),
        fmt_sig(st[2])
    );

    let fixed = std::f64::consts::FRAC_1_SQRT_2;
    let unequal = apply_fixes(&ScenarioConfig::equal(Mode::Nonlocal, &[1.0, 1.0]), &[("lambda1.1".parse()?, fixed)])?;
    let windows = [
        ("equal nonlocal", ScenarioConfig::equal(Mode::Nonlocal, &[1.0, 1.0]), "lambda1", false),
        ("unequal nonlocal", unequal.clone(), "lambda1.2", false),
        ("unequal local", unequal, "lambda1.2", true),
    ];
    for (name, cfg, vary, local) in windows {
        match sharing_window(&cfg, vary.parse()?, local, 1001)? {
            Some((lo, hi)) => println!("window ({name}): ({}, {})", fmt_sig(lo), fmt_sig(hi)),
            None => println!("window ({name}): empty"),
        }
    }

    let e = post_pair1_ellipsoids(&ScenarioConfig::default(), [fixed, 0.9])?;
    println!(
        "post-pair-1 Charlie semiaxes at (1/sqrt2, 0.9): x = {}  y = {}  z = {}",
        fmt_sig(e.charlie.semiaxis_along([1.0, 0.0, 0.0])),
        fmt_sig(e.charlie.semiaxis_along([0.0, 1.0, 0.0])),
        fmt_sig(e.charlie.semiaxis_along([0.0, 0.0, 1.0]))
    );

    let template = ScenarioConfig::equal(Mode::Nonlocal, &[0.0, 0.0, 1.0]);
    println!("max simultaneous pairs (grid {grid}): {}", max_simultaneous_pairs(&template, grid)?);
    Ok(())
}
