//! Monte Carlo sweep harness.
//!
//! A sweep is a list of parameter cells; each cell runs `samples`
//! independent simulations and aggregates the per-scheme average wealth at
//! the measurement step into mean, standard deviation and chance-of-best.
//!
//! Work items are embarrassingly parallel. Every (cell, sample) task derives
//! its seeds from the master seed, the cell's coordinates and the sample
//! index, so results are invariant to cell order, worker count and
//! scheduling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{run, RunRecord, SimConfig};
use crate::prices::{
    estimate_table, generate_trend, generate_walk, PriceSeries, TableEstimate, TrendParams,
};
use crate::schemes::{GameKind, Scheme};
use crate::{rng, Error, Result};

/// The five-cell probe of the trend plane used by the finite-memory
/// comparisons: the four corners at ±0.4 plus the unbiased center.
pub const PROBE_CELLS: [(f64, f64); 5] = [
    (-0.4, -0.4),
    (-0.4, 0.4),
    (0.0, 0.0),
    (0.4, -0.4),
    (0.4, 0.4),
];

/// Common knobs of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sim: SimConfig,
    /// Steps per generated series.
    pub steps: usize,
    /// Independent runs per cell.
    pub samples: usize,
    /// Time index at which average wealth is read (after that step's
    /// settlement); clamped to the series length for fixed series.
    pub measure_at: usize,
    pub initial_price: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sim: SimConfig::default(),
            steps: 2000,
            samples: 100,
            measure_at: 2000,
            initial_price: 1000.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        if self.measure_at > self.steps {
            return Err(Error::InvalidConfig(format!(
                "measure_at {} exceeds steps {}",
                self.measure_at, self.steps
            )));
        }
        if self.initial_price <= 0.0 || self.initial_price.is_nan() {
            return Err(Error::NonPositivePrice(self.initial_price));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum SourceSpec {
    Walk(f64),
    Trend(f64, f64),
    Fixed(PriceSeries),
}

#[derive(Clone, Debug)]
struct CellSpec {
    coords: Vec<f64>,
    source: SourceSpec,
    schemes: Vec<Scheme>,
}

/// Aggregates for one scheme in one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeCellStats {
    pub scheme: Scheme,
    pub mean_wealth: f64,
    pub std_wealth: f64,
    pub chance_best: f64,
    pub samples: usize,
}

/// One parameter cell with its per-sample outcomes and aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub coords: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// `finals[sample][scheme]`: average wealth at the measurement step.
    pub finals: Vec<Vec<f64>>,
    pub stats: Vec<SchemeCellStats>,
}

impl GridCell {
    /// Chance-of-best restricted to a subset of this cell's schemes,
    /// indexed into `self.schemes`.
    pub fn chance_of_best_among(&self, indices: &[usize]) -> Vec<f64> {
        let restricted: Vec<Vec<f64>> = self
            .finals
            .iter()
            .map(|sample| indices.iter().map(|&i| sample[i]).collect())
            .collect();
        chance_of_best(&restricted)
    }

    /// Index (into `indices`) of the scheme with the highest restricted
    /// chance-of-best.
    pub fn winner_among(&self, indices: &[usize]) -> usize {
        let fractions = self.chance_of_best_among(indices);
        let mut best = 0;
        for (i, &f) in fractions.iter().enumerate() {
            if f > fractions[best] {
                best = i;
            }
        }
        best
    }
}

/// All cells of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    /// Names of the coordinate columns, e.g. `["p_l", "p_s"]`.
    pub axes: Vec<&'static str>,
    pub cells: Vec<GridCell>,
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

impl GridResult {
    /// CSV with the coordinate columns, then
    /// `scheme,mean_w,std_w,chance_best,n` per (cell, scheme).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for axis in &self.axes {
            write!(out, "{},", axis)?;
        }
        writeln!(out, "scheme,mean_w,std_w,chance_best,n")?;
        for cell in &self.cells {
            for stats in &cell.stats {
                for c in &cell.coords {
                    write!(out, "{},", fmt_num(*c))?;
                }
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    stats.scheme.label(),
                    stats.mean_wealth,
                    stats.std_wealth,
                    stats.chance_best,
                    stats.samples
                )?;
            }
        }
        Ok(())
    }
}

/// Fraction of samples in which each scheme attains the highest value;
/// exact ties split equally among the tied schemes.
pub fn chance_of_best(finals: &[Vec<f64>]) -> Vec<f64> {
    assert!(
        !finals.is_empty(),
        "chance_of_best needs at least one sample"
    );
    let n_schemes = finals[0].len();
    let mut fractions = vec![0.0f64; n_schemes];
    for sample in finals {
        debug_assert_eq!(sample.len(), n_schemes);
        let max = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..n_schemes).filter(|&i| sample[i] == max).collect();
        let share = 1.0 / tied.len() as f64;
        for i in tied {
            fractions[i] += share;
        }
    }
    for f in &mut fractions {
        *f /= finals.len() as f64;
    }
    fractions
}

fn aggregate(schemes: &[Scheme], finals: &[Vec<f64>]) -> Vec<SchemeCellStats> {
    let n = finals.len();
    let chance = chance_of_best(finals);
    schemes
        .iter()
        .enumerate()
        .map(|(i, &scheme)| {
            let values: Vec<f64> = finals.iter().map(|s| s[i]).collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n < 2 {
                0.0
            } else {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n - 1) as f64).sqrt()
            };
            SchemeCellStats {
                scheme,
                mean_wealth: mean,
                std_wealth: std,
                chance_best: chance[i],
                samples: n,
            }
        })
        .collect()
}

/// Mix a cell's coordinates into a stable 64-bit key, so task seeds depend
/// on what the cell is, not where it sits in the list.
fn cell_key(coords: &[f64]) -> u64 {
    coords.iter().fold(0xCE11_0000_0000_0000u64, |acc, c| {
        rng::mix64(acc ^ c.to_bits())
    })
}

fn run_task(cfg: &SweepConfig, cell: &CellSpec, sample: usize) -> Result<Vec<f64>> {
    let cell_seed = rng::derive_seed(cfg.sim.seed, rng::DOMAIN_CELL, cell_key(&cell.coords));
    let task_seed = rng::derive_seed(cell_seed, rng::DOMAIN_SAMPLE, sample as u64);
    let series = match &cell.source {
        SourceSpec::Walk(p_up) => generate_walk(
            *p_up,
            cfg.steps,
            cfg.initial_price,
            rng::derive_seed(task_seed, rng::DOMAIN_PRICE, 0),
        )?,
        SourceSpec::Trend(p_l, p_s) => generate_trend(
            TrendParams::new(*p_l, *p_s)?,
            cfg.steps,
            cfg.initial_price,
            rng::derive_seed(task_seed, rng::DOMAIN_PRICE, 0),
        )?,
        SourceSpec::Fixed(series) => series.clone(),
    };
    let sim = SimConfig {
        seed: rng::derive_seed(task_seed, rng::DOMAIN_SIM, 0),
        schemes: cell.schemes.clone(),
        ..cfg.sim.clone()
    };
    let record = run(&sim, &series)?;
    let measure = cfg.measure_at.min(series.steps());
    Ok((0..sim.schemes.len())
        .map(|i| record.avg_wealth[i][measure])
        .collect())
}

#[cfg(feature = "parallel")]
fn map_tasks<F>(n_tasks: usize, f: F) -> Vec<Result<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Send + Sync,
{
    use rayon::prelude::*;
    (0..n_tasks).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_tasks<F>(n_tasks: usize, f: F) -> Vec<Result<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Send + Sync,
{
    (0..n_tasks).map(f).collect()
}

fn run_cells(
    cfg: &SweepConfig,
    axes: Vec<&'static str>,
    cells: Vec<CellSpec>,
) -> Result<GridResult> {
    cfg.validate()?;
    let samples = cfg.samples;
    let n_tasks = cells.len() * samples;
    let outputs = map_tasks(n_tasks, |task| {
        let cell = &cells[task / samples];
        run_task(cfg, cell, task % samples)
    });

    let mut out_cells = Vec::with_capacity(cells.len());
    let mut outputs = outputs.into_iter();
    for cell in cells {
        let mut finals = Vec::with_capacity(samples);
        for _ in 0..samples {
            finals.push(outputs.next().expect("task output missing")?);
        }
        let stats = aggregate(&cell.schemes, &finals);
        out_cells.push(GridCell {
            coords: cell.coords,
            schemes: cell.schemes,
            finals,
            stats,
        });
    }
    Ok(GridResult {
        axes,
        cells: out_cells,
    })
}

/// One-dimensional sweep over the up-move probability of a biased walk.
pub fn sweep_walk(cfg: &SweepConfig, p_ups: &[f64]) -> Result<GridResult> {
    let cells = p_ups
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::ProbabilityOutOfRange(p));
            }
            Ok(CellSpec {
                coords: vec![p],
                source: SourceSpec::Walk(p),
                schemes: cfg.sim.schemes.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_cells(cfg, vec!["p_up"], cells)
}

/// Two-dimensional sweep over the trend plane, row-major over
/// `p_ls x p_ss`.
pub fn sweep_grid(cfg: &SweepConfig, p_ls: &[f64], p_ss: &[f64]) -> Result<GridResult> {
    let mut cells = Vec::with_capacity(p_ls.len() * p_ss.len());
    for &p_l in p_ls {
        for &p_s in p_ss {
            TrendParams::new(p_l, p_s)?;
            cells.push(CellSpec {
                coords: vec![p_l, p_s],
                source: SourceSpec::Trend(p_l, p_s),
                schemes: cfg.sim.schemes.clone(),
            });
        }
    }
    run_cells(cfg, vec!["p_l", "p_s"], cells)
}

/// Sweep an explicit list of `(p_l, p_s)` cells.
pub fn sweep_trend_cells(cfg: &SweepConfig, cells: &[(f64, f64)]) -> Result<GridResult> {
    let cells = cells
        .iter()
        .map(|&(p_l, p_s)| {
            TrendParams::new(p_l, p_s)?;
            Ok(CellSpec {
                coords: vec![p_l, p_s],
                source: SourceSpec::Trend(p_l, p_s),
                schemes: cfg.sim.schemes.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_cells(cfg, vec!["p_l", "p_s"], cells)
}

/// Price source for a score-memory sweep.
#[derive(Clone, Debug)]
pub enum MemorySource {
    /// Generated trend cells, one sub-sweep per cell.
    TrendCells(Vec<(f64, f64)>),
    /// Biased-walk cells, one sub-sweep per up-probability.
    WalkCells(Vec<f64>),
    /// A fixed series (typically real closes); samples vary the agents only.
    Fixed(PriceSeries),
}

fn distinct_kinds(schemes: &[Scheme]) -> Vec<GameKind> {
    let mut kinds = Vec::new();
    for scheme in schemes {
        if !kinds.contains(&scheme.kind) {
            kinds.push(scheme.kind);
        }
    }
    kinds
}

/// Sweep the score-memory size `T`. Each cell runs the finite-memory
/// variants of the configured scheme kinds; with `include_baselines` the
/// infinite-memory originals run alongside on the same samples, for paired
/// comparison.
pub fn memory_sweep(
    cfg: &SweepConfig,
    source: &MemorySource,
    windows: &[u32],
    include_baselines: bool,
) -> Result<GridResult> {
    if windows.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one memory size is required".into(),
        ));
    }
    if windows.contains(&0) {
        return Err(Error::InvalidConfig(
            "score memory window must be >= 1".into(),
        ));
    }
    let kinds = distinct_kinds(&cfg.sim.schemes);
    let schemes_for = |t: u32| -> Vec<Scheme> {
        let mut schemes = Vec::new();
        if include_baselines {
            schemes.extend(kinds.iter().map(|&k| Scheme::infinite(k)));
        }
        schemes.extend(kinds.iter().map(|&k| Scheme::windowed(k, t)));
        schemes
    };

    match source {
        MemorySource::TrendCells(trend_cells) => {
            let mut cells = Vec::with_capacity(trend_cells.len() * windows.len());
            for &(p_l, p_s) in trend_cells {
                TrendParams::new(p_l, p_s)?;
                for &t in windows {
                    cells.push(CellSpec {
                        coords: vec![p_l, p_s, t as f64],
                        source: SourceSpec::Trend(p_l, p_s),
                        schemes: schemes_for(t),
                    });
                }
            }
            run_cells(cfg, vec!["p_l", "p_s", "T"], cells)
        }
        MemorySource::WalkCells(p_ups) => {
            let mut cells = Vec::with_capacity(p_ups.len() * windows.len());
            for &p_up in p_ups {
                if !(0.0..=1.0).contains(&p_up) || p_up.is_nan() {
                    return Err(Error::ProbabilityOutOfRange(p_up));
                }
                for &t in windows {
                    cells.push(CellSpec {
                        coords: vec![p_up, t as f64],
                        source: SourceSpec::Walk(p_up),
                        schemes: schemes_for(t),
                    });
                }
            }
            run_cells(cfg, vec!["p_up", "T"], cells)
        }
        MemorySource::Fixed(series) => {
            let cells = windows
                .iter()
                .map(|&t| CellSpec {
                    coords: vec![t as f64],
                    source: SourceSpec::Fixed(series.clone()),
                    schemes: schemes_for(t),
                })
                .collect();
            run_cells(cfg, vec!["T"], cells)
        }
    }
}

/// Run a loaded series once and estimate its order-2 transition table.
pub fn real_run(cfg: &SimConfig, series: &PriceSeries) -> Result<(RunRecord, TableEstimate)> {
    let record = run(cfg, series)?;
    let estimate = estimate_table(series, 2)?;
    Ok((record, estimate))
}
