//! Command-line harness: deterministic simulations, sweeps and price tools.
//!
//! Every subcommand writes its data files plus a `summary.json` that echoes
//! the fully resolved configuration, sufficient to re-run it exactly.
//! Identical invocations produce byte-identical data files, and results are
//! invariant to `--workers`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use marketgames::engine::{self, SimConfig};
use marketgames::experiments::{
    self, memory_sweep, real_run, sweep_grid, sweep_walk, MemorySource, SweepConfig,
};
use marketgames::prices::{
    self, estimate_table, generate_trend, generate_walk, pattern_label, CsvSpec, PriceSeries,
    TrendParams,
};
use marketgames::schemes::{GameKind, Scheme};

use config::{Defaults, FileConfig, Overrides, Resolved};

#[derive(Parser)]
#[command(
    name = "marketgames",
    version,
    about = "Agent-based market simulator: wealth/minority/majority strategy evaluation on exogenous prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation on a real or generated price series
    Run(RunArgs),
    /// Sweep the up-move probability of a biased random walk
    SweepWalk(SweepWalkArgs),
    /// Sweep the (p_l, p_s) trend plane of the order-2 generator
    SweepGrid(SweepGridArgs),
    /// Sweep the score-memory size T of the finite-memory schemes
    SweepMemory(SweepMemoryArgs),
    /// Estimate transition probabilities from a CSV price file
    Estimate(EstimateArgs),
    /// Generate a price series and write it as CSV
    GenPrice(GenPriceArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat `key = value` config file; flags override file values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; every random decision derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps; 0 = one per CPU
    #[arg(long)]
    workers: Option<usize>,
    /// Agents per scheme (N)
    #[arg(long)]
    agents: Option<usize>,
    /// Market history length in bits (m)
    #[arg(long)]
    history_bits: Option<u32>,
    /// Strategies per agent (s)
    #[arg(long)]
    strategies: Option<usize>,
    /// Initial wealth as a multiple of the initial price
    #[arg(long)]
    multiplier: Option<f64>,
    /// Reference-scale defaults: N=10000, 5000 steps (sweep-walk: 1000
    /// steps and 1000 samples, sweep-grid: 19x19 grid)
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// CSV file of real closes (otherwise generate with --p-up or --p-l/--p-s)
    #[arg(long, value_name = "FILE", conflicts_with_all = ["p_up", "p_l", "p_s"])]
    input: Option<PathBuf>,
    /// Up-move probability of a biased random walk
    #[arg(long, conflicts_with_all = ["p_l", "p_s"])]
    p_up: Option<f64>,
    /// Long-term trend parameter of the order-2 generator
    #[arg(long, requires = "p_s", allow_hyphen_values = true)]
    p_l: Option<f64>,
    /// Short-term trend parameter of the order-2 generator
    #[arg(long, requires = "p_l", allow_hyphen_values = true)]
    p_s: Option<f64>,
    /// Steps to generate (generated sources only)
    #[arg(long)]
    steps: Option<usize>,
    /// Initial price of generated series
    #[arg(long)]
    p0: Option<f64>,
    /// Comma list of scheme kinds: wg, ming, majg
    #[arg(long, default_value = "wg,ming,majg")]
    schemes: String,
    /// Finite score memory T; omitted = infinite
    #[arg(long)]
    memory: Option<u32>,
    /// With --memory, also run the infinite-memory baselines
    #[arg(long)]
    baselines: bool,
    #[arg(long, default_value = "Date")]
    date_col: String,
    #[arg(long, default_value = "Close")]
    close_col: String,
}

#[derive(Args)]
struct SweepWalkArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma list of up-move probabilities
    #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
    p_up_list: String,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Time index at which average wealth is measured (default: steps)
    #[arg(long)]
    measure_at: Option<usize>,
    #[arg(long)]
    p0: Option<f64>,
}

#[derive(Args)]
struct SweepGridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma list of p_l values (default: -0.4,0.4; 19 values with --paper-scale)
    #[arg(long, allow_hyphen_values = true)]
    p_l_list: Option<String>,
    /// Comma list of p_s values (default: -0.4,0.4; 19 values with --paper-scale)
    #[arg(long, allow_hyphen_values = true)]
    p_s_list: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    measure_at: Option<usize>,
    #[arg(long)]
    p0: Option<f64>,
}

#[derive(Args)]
struct SweepMemoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma list of score-memory sizes T
    #[arg(long, default_value = "10,100,1000")]
    t_list: String,
    /// Semicolon list of p_l,p_s cells, e.g. "-0.4,-0.4;0,0;0.4,0.4"
    /// (default: the five-cell probe of the trend plane)
    #[arg(long, conflicts_with = "input", allow_hyphen_values = true)]
    cells: Option<String>,
    /// Comma list of biased-walk up-probabilities instead of trend cells
    #[arg(long, conflicts_with_all = ["cells", "input"])]
    p_up_list: Option<String>,
    /// Fixed CSV series instead of generated cells
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Run the infinite-memory baselines alongside on the same samples
    #[arg(long)]
    baselines: bool,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    measure_at: Option<usize>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long, default_value = "Date")]
    date_col: String,
    #[arg(long, default_value = "Close")]
    close_col: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// CSV file of closes
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Markov order (0, 1 or 2)
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = "Date")]
    date_col: String,
    #[arg(long, default_value = "Close")]
    close_col: String,
}

#[derive(Args)]
struct GenPriceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Up-move probability of a biased random walk
    #[arg(long, conflicts_with_all = ["p_l", "p_s"])]
    p_up: Option<f64>,
    #[arg(long, requires = "p_s", allow_hyphen_values = true)]
    p_l: Option<f64>,
    #[arg(long, requires = "p_l", allow_hyphen_values = true)]
    p_s: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    p0: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::SweepWalk(args) => cmd_sweep_walk(args),
        Command::SweepGrid(args) => cmd_sweep_grid(args),
        Command::SweepMemory(args) => cmd_sweep_memory(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::GenPrice(args) => cmd_gen_price(args),
    }
}

/// Merge defaults, config file and flags into the resolved settings.
fn resolve(
    common: &CommonArgs,
    defaults: Defaults,
    steps: Option<usize>,
    samples: Option<usize>,
    measure_at: Option<usize>,
    p0: Option<f64>,
) -> Result<Resolved> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        agents: common.agents,
        history_bits: common.history_bits,
        strategies: common.strategies,
        multiplier: common.multiplier,
        seed: common.seed,
        steps,
        samples,
        measure_at,
        p0,
        workers: common.workers,
        out_dir: common.out_dir.clone(),
    };
    let resolved = config::resolve(defaults, &file, &flags)?;
    if resolved.workers > 0 {
        // best-effort: the global pool can only be sized once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.workers)
            .build_global();
    }
    Ok(resolved)
}

fn desk_defaults(common: &CommonArgs) -> Defaults {
    if common.paper_scale {
        Defaults {
            agents: 10_000,
            steps: 5000,
            samples: 100,
        }
    } else {
        Defaults::default()
    }
}

fn sim_config(r: &Resolved, schemes: Vec<Scheme>) -> SimConfig {
    SimConfig {
        agents_per_scheme: r.agents,
        history_bits: r.history_bits,
        strategies_per_agent: r.strategies,
        initial_wealth_multiplier: r.multiplier,
        schemes,
        seed: r.seed,
    }
}

fn sweep_config(r: &Resolved, schemes: Vec<Scheme>) -> SweepConfig {
    SweepConfig {
        sim: sim_config(r, schemes),
        steps: r.steps,
        samples: r.samples,
        measure_at: r.measure_at,
        initial_price: r.p0,
    }
}

fn common_params(r: &Resolved) -> serde_json::Value {
    json!({
        "agents": r.agents,
        "history_bits": r.history_bits,
        "strategies": r.strategies,
        "multiplier": r.multiplier,
        "seed": r.seed,
        "steps": r.steps,
        "samples": r.samples,
        "measure_at": r.measure_at,
        "p0": r.p0,
        "workers": r.workers,
        "out_dir": r.out_dir,
    })
}

fn write_summary(
    out_dir: &Path,
    command: &str,
    mut params: serde_json::Value,
    extra: serde_json::Value,
    outputs: &[&str],
    started: Instant,
) -> Result<()> {
    if let (Some(base), Some(more)) = (params.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    let summary = json!({
        "command": command,
        "params": params,
        "outputs": outputs,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    let path = out_dir.join("summary.json");
    std::fs::write(
        &path,
        format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_file(out_dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("cannot parse number {tok:?}"))
        })
        .collect()
}

fn parse_u32_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u32>()
                .with_context(|| format!("cannot parse integer {tok:?}"))
        })
        .collect()
}

fn parse_cells(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(';')
        .map(|pair| {
            let nums = parse_f64_list(pair)?;
            if nums.len() != 2 {
                bail!("cell {pair:?} must be `p_l,p_s`");
            }
            Ok((nums[0], nums[1]))
        })
        .collect()
}

fn parse_kinds(s: &str) -> Result<Vec<GameKind>> {
    s.split(',')
        .map(|tok| match tok.trim().to_ascii_lowercase().as_str() {
            "wg" => Ok(GameKind::Wealth),
            "ming" => Ok(GameKind::Minority),
            "majg" => Ok(GameKind::Majority),
            other => bail!("unknown scheme {other:?} (expected wg, ming or majg)"),
        })
        .collect()
}

fn schemes_from(kinds: &[GameKind], memory: Option<u32>, baselines: bool) -> Vec<Scheme> {
    match memory {
        None => kinds.iter().map(|&k| Scheme::infinite(k)).collect(),
        Some(t) => {
            let mut schemes = Vec::new();
            if baselines {
                schemes.extend(kinds.iter().map(|&k| Scheme::infinite(k)));
            }
            schemes.extend(kinds.iter().map(|&k| Scheme::windowed(k, t)));
            schemes
        }
    }
}

fn paper_scale_axis() -> Vec<f64> {
    (0..19)
        .map(|i| ((i as f64 * 0.05 - 0.45) * 100.0).round() / 100.0)
        .collect()
}

fn load_series(
    path: &Path,
    date_col: &str,
    close_col: &str,
    min_rows: usize,
) -> Result<prices::CsvLoad> {
    let spec = CsvSpec {
        date_column: date_col.to_string(),
        close_column: close_col.to_string(),
        min_rows,
    };
    let load = prices::load_series_csv(path, &spec)?;
    if load.skipped_rows > 0 {
        eprintln!(
            "warning: skipped {} row(s) with missing or non-positive closes",
            load.skipped_rows
        );
    }
    Ok(load)
}

fn estimate_csv(estimate: &prices::TableEstimate) -> String {
    let mut out = String::from("pattern,p_up,rises,occurrences\n");
    for mu in 0..estimate.occurrences.len() {
        let p = estimate
            .probability(mu)
            .map(|p| p.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            pattern_label(mu, estimate.order),
            p,
            estimate.rises[mu],
            estimate.occurrences[mu]
        ));
    }
    out
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let started = Instant::now();
    let r = resolve(
        &args.common,
        desk_defaults(&args.common),
        args.steps,
        None,
        None,
        args.p0,
    )?;
    let kinds = parse_kinds(&args.schemes)?;
    let schemes = schemes_from(&kinds, args.memory, args.baselines);
    let cfg = sim_config(&r, schemes);

    let (series, skipped) = match (&args.input, args.p_up, args.p_l, args.p_s) {
        (Some(path), None, None, None) => {
            let load = load_series(
                path,
                &args.date_col,
                &args.close_col,
                r.history_bits as usize + 2,
            )?;
            (load.series, load.skipped_rows)
        }
        (None, Some(p_up), None, None) => (generate_walk(p_up, r.steps, r.p0, r.seed)?, 0),
        (None, None, Some(p_l), Some(p_s)) => (
            generate_trend(TrendParams::new(p_l, p_s)?, r.steps, r.p0, r.seed)?,
            0,
        ),
        _ => bail!("choose a price source: --input FILE, --p-up P, or --p-l X --p-s Y"),
    };

    let is_real = args.input.is_some();
    let mut outputs = vec!["timeseries.csv", "summary.json"];
    let record;
    if is_real {
        let (rec, estimate) = real_run(&cfg, &series)?;
        record = rec;
        write_file(
            &r.out_dir,
            "estimate.csv",
            estimate_csv(&estimate).as_bytes(),
        )?;
        outputs.insert(1, "estimate.csv");
    } else {
        record = engine::run(&cfg, &series)?;
    }
    let mut csv = Vec::new();
    record.write_csv(&mut csv)?;
    write_file(&r.out_dir, "timeseries.csv", &csv)?;

    let extra = json!({
        "schemes": cfg.schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "source": series.provenance(),
        "skipped_rows": skipped,
        "final_avg_wealth": cfg.schemes.iter().enumerate().map(|(i, s)| {
            json!({"scheme": s.to_string(), "value": record.avg_wealth[i][record.steps()]})
        }).collect::<Vec<_>>(),
    });
    write_summary(
        &r.out_dir,
        "run",
        common_params(&r),
        extra,
        &outputs,
        started,
    )
}

fn cmd_sweep_walk(args: SweepWalkArgs) -> Result<()> {
    let started = Instant::now();
    let mut defaults = desk_defaults(&args.common);
    if args.common.paper_scale {
        defaults.steps = 1000;
        defaults.samples = 1000;
    }
    let r = resolve(
        &args.common,
        defaults,
        args.steps,
        args.samples,
        args.measure_at,
        args.p0,
    )?;
    let p_ups = parse_f64_list(&args.p_up_list)?;
    let cfg = sweep_config(&r, Scheme::all_infinite());
    let result = sweep_walk(&cfg, &p_ups)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    write_file(&r.out_dir, "grid.csv", &csv)?;
    let extra = json!({ "p_up_list": p_ups });
    write_summary(
        &r.out_dir,
        "sweep-walk",
        common_params(&r),
        extra,
        &["grid.csv", "summary.json"],
        started,
    )
}

fn cmd_sweep_grid(args: SweepGridArgs) -> Result<()> {
    let started = Instant::now();
    let r = resolve(
        &args.common,
        desk_defaults(&args.common),
        args.steps,
        args.samples,
        args.measure_at,
        args.p0,
    )?;
    let default_axis = || {
        if args.common.paper_scale {
            paper_scale_axis()
        } else {
            vec![-0.4, 0.4]
        }
    };
    let p_ls = match &args.p_l_list {
        Some(s) => parse_f64_list(s)?,
        None => default_axis(),
    };
    let p_ss = match &args.p_s_list {
        Some(s) => parse_f64_list(s)?,
        None => default_axis(),
    };
    let cfg = sweep_config(&r, Scheme::all_infinite());
    let result = sweep_grid(&cfg, &p_ls, &p_ss)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    write_file(&r.out_dir, "grid.csv", &csv)?;
    let extra = json!({ "p_l_list": p_ls, "p_s_list": p_ss });
    write_summary(
        &r.out_dir,
        "sweep-grid",
        common_params(&r),
        extra,
        &["grid.csv", "summary.json"],
        started,
    )
}

fn cmd_sweep_memory(args: SweepMemoryArgs) -> Result<()> {
    let started = Instant::now();
    let mut r = resolve(
        &args.common,
        desk_defaults(&args.common),
        args.steps,
        args.samples,
        args.measure_at,
        args.p0,
    )?;
    let windows = parse_u32_list(&args.t_list)?;

    let (source, source_json) = match &args.input {
        Some(path) => {
            let load = load_series(
                path,
                &args.date_col,
                &args.close_col,
                r.history_bits as usize + 2,
            )?;
            let steps = load.series.steps();
            r.steps = steps;
            r.measure_at = r.measure_at.min(steps);
            let provenance = serde_json::to_value(load.series.provenance())?;
            (MemorySource::Fixed(load.series), provenance)
        }
        None => match &args.p_up_list {
            Some(list) => {
                let p_ups = parse_f64_list(list)?;
                let p_ups_json = json!({ "p_up_list": p_ups });
                (MemorySource::WalkCells(p_ups), p_ups_json)
            }
            None => {
                let cells = match &args.cells {
                    Some(s) => parse_cells(s)?,
                    None => experiments::PROBE_CELLS.to_vec(),
                };
                let cells_json = json!(cells);
                (MemorySource::TrendCells(cells), cells_json)
            }
        },
    };

    let cfg = sweep_config(&r, Scheme::all_infinite());
    let result = memory_sweep(&cfg, &source, &windows, args.baselines)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    write_file(&r.out_dir, "grid.csv", &csv)?;
    let extra = json!({
        "t_list": windows,
        "source": source_json,
        "baselines": args.baselines,
    });
    write_summary(
        &r.out_dir,
        "sweep-memory",
        common_params(&r),
        extra,
        &["grid.csv", "summary.json"],
        started,
    )
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let started = Instant::now();
    let r = resolve(
        &args.common,
        desk_defaults(&args.common),
        None,
        None,
        None,
        None,
    )?;
    let load = load_series(&args.input, &args.date_col, &args.close_col, args.order + 2)?;
    let estimate = estimate_table(&load.series, args.order)?;
    for mu in 0..estimate.occurrences.len() {
        let label = pattern_label(mu, args.order);
        match estimate.probability(mu) {
            Some(p) => println!(
                "p_up({label}) = {:.4}  ({} rises / {} occurrences)",
                p, estimate.rises[mu], estimate.occurrences[mu]
            ),
            None => println!("p_up({label}) undefined (pattern never occurs)"),
        }
    }
    write_file(
        &r.out_dir,
        "estimate.csv",
        estimate_csv(&estimate).as_bytes(),
    )?;
    let extra = json!({
        "input": args.input,
        "order": args.order,
        "skipped_rows": load.skipped_rows,
        "estimate": estimate,
    });
    write_summary(
        &r.out_dir,
        "estimate",
        common_params(&r),
        extra,
        &["estimate.csv", "summary.json"],
        started,
    )
}

fn cmd_gen_price(args: GenPriceArgs) -> Result<()> {
    let started = Instant::now();
    let r = resolve(
        &args.common,
        desk_defaults(&args.common),
        args.steps,
        None,
        None,
        args.p0,
    )?;
    let series: PriceSeries = match (args.p_up, args.p_l, args.p_s) {
        (Some(p_up), None, None) => generate_walk(p_up, r.steps, r.p0, r.seed)?,
        (None, Some(p_l), Some(p_s)) => {
            generate_trend(TrendParams::new(p_l, p_s)?, r.steps, r.p0, r.seed)?
        }
        _ => bail!("choose a generator: --p-up P, or --p-l X --p-s Y"),
    };
    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    write_file(&r.out_dir, "prices.csv", &csv)?;
    let extra = json!({ "source": series.provenance() });
    write_summary(
        &r.out_dir,
        "gen-price",
        common_params(&r),
        extra,
        &["prices.csv", "summary.json"],
        started,
    )
}
