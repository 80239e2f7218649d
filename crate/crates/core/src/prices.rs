//! Exogenous price sources.
//!
//! Three kinds of series drive the simulator: real index closes loaded from
//! CSV, a biased ±1 random walk, and an order-2 Markov chain in the
//! `(p_l, p_s)` trend parameterization. The same table mechanism covers
//! orders 0, 1 and 2, and [`estimate_table`] recovers transition
//! probabilities from any series using the strict-rise bit convention
//! (1 iff the price strictly rose; falls and flat closes count as 0).

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Where a series came from; recorded so a run summary can reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Real { file: String },
    Walk { p_up: f64, seed: u64 },
    Trend { p_l: f64, p_s: f64, seed: u64 },
    Table { p_up: Vec<f64>, seed: u64 },
}

/// An ordered, strictly positive price series.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    prices: Vec<f64>,
    provenance: Provenance,
}

impl PriceSeries {
    pub fn new(prices: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::SeriesTooShort {
                got: prices.len(),
                need: 2,
            });
        }
        for &p in &prices {
            if p <= 0.0 || p.is_nan() {
                return Err(Error::NonPositivePrice(p));
            }
        }
        Ok(PriceSeries { prices, provenance })
    }

    #[inline]
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of price moves, one less than the number of prices.
    pub fn steps(&self) -> usize {
        self.prices.len() - 1
    }

    /// Two-column CSV: step index and price.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,price")?;
        for (i, p) in self.prices.iter().enumerate() {
            writeln!(out, "{},{}", i, p)?;
        }
        Ok(())
    }
}

/// Long-term and short-term trend strengths of the order-2 generator.
///
/// `p_l > 0` favors sustained runs (the up-probability after two rises is
/// `0.5 + p_l`), `p_s > 0` favors period-2 zig-zags (the up-probability
/// after a rise-then-fall is `0.5 + p_s`). Both must lie in [-0.5, 0.5] so
/// every derived probability lies in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    p_l: f64,
    p_s: f64,
}

impl TrendParams {
    pub fn new(p_l: f64, p_s: f64) -> Result<Self> {
        if !(-0.5..=0.5).contains(&p_l) || p_l.is_nan() {
            return Err(Error::TrendParamOutOfRange {
                name: "p_l",
                value: p_l,
            });
        }
        if !(-0.5..=0.5).contains(&p_s) || p_s.is_nan() {
            return Err(Error::TrendParamOutOfRange {
                name: "p_s",
                value: p_s,
            });
        }
        Ok(TrendParams { p_l, p_s })
    }

    pub fn p_l(&self) -> f64 {
        self.p_l
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }
}

/// Up-move probabilities indexed by the last `order` moves.
///
/// The index reads oldest move to newest, most significant bit first, the
/// same convention as [`crate::domain::MarketHistory`]. For order 2 the
/// indices 0..=3 mean: 0 = fall,fall — 1 = fall,rise — 2 = rise,fall —
/// 3 = rise,rise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovTable {
    order: usize,
    p_up: Vec<f64>,
}

impl MarkovTable {
    pub fn new(order: usize, p_up: Vec<f64>) -> Result<Self> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if p_up.len() != (1 << order) {
            return Err(Error::BadTableLength {
                got: p_up.len(),
                expected: 1 << order,
            });
        }
        for &p in &p_up {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        Ok(MarkovTable { order, p_up })
    }

    /// Order-0 table: a history-independent biased walk.
    pub fn constant(p_up: f64) -> Result<Self> {
        MarkovTable::new(0, vec![p_up])
    }

    /// Order-2 table from trend parameters.
    ///
    /// Complementary pairs are built by subtraction from one, so
    /// `p(fall,fall) + p(rise,rise)` and `p(fall,rise) + p(rise,fall)` are
    /// exactly 1 in floating point.
    pub fn from_trend(tp: TrendParams) -> Self {
        let p_uu = 0.5 + tp.p_l;
        let p_ud = 0.5 + tp.p_s;
        MarkovTable {
            order: 2,
            p_up: vec![1.0 - p_uu, 1.0 - p_ud, p_ud, p_uu],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Up-move probability after history `mu`.
    #[inline]
    pub fn p_up(&self, mu: usize) -> f64 {
        self.p_up[mu]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p_up
    }
}

/// History pattern `mu` rendered oldest-first, `u` for a rise and `d`
/// otherwise; `-` for the order-0 pattern.
pub fn pattern_label(mu: usize, order: usize) -> String {
    if order == 0 {
        return "-".to_string();
    }
    let mut s = String::with_capacity(order);
    for i in (0..order).rev() {
        let _ = write!(s, "{}", if (mu >> i) & 1 == 1 { 'u' } else { 'd' });
    }
    s
}

fn generate_inner(
    table: &MarkovTable,
    steps: usize,
    initial_price: f64,
    seed: u64,
    provenance: Provenance,
) -> Result<PriceSeries> {
    if steps < 1 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    if initial_price <= 0.0 || initial_price.is_nan() {
        return Err(Error::NonPositivePrice(initial_price));
    }
    let mut rng = rng::stream(seed, rng::DOMAIN_PRICE, 0);
    let mask = (1usize << table.order) - 1;
    let mut mu: usize = if table.order == 0 {
        0
    } else {
        rng.gen_range(0..(1usize << table.order))
    };
    let mut prices = Vec::with_capacity(steps + 1);
    let mut p = initial_price;
    prices.push(p);
    for step in 0..steps {
        let rose = rng.gen_bool(table.p_up(mu));
        p += if rose { 1.0 } else { -1.0 };
        if p <= 0.0 {
            return Err(Error::PriceReachedZero { step: step + 1 });
        }
        prices.push(p);
        mu = ((mu << 1) | rose as usize) & mask;
    }
    Ok(PriceSeries { prices, provenance })
}

/// Generate `steps` ±1 moves from `initial_price` under `table`, starting
/// from a uniformly random initial generator history. The series has
/// `steps + 1` prices; reaching zero aborts with a distinct error.
pub fn generate(
    table: &MarkovTable,
    steps: usize,
    initial_price: f64,
    seed: u64,
) -> Result<PriceSeries> {
    generate_inner(
        table,
        steps,
        initial_price,
        seed,
        Provenance::Table {
            p_up: table.p_up.clone(),
            seed,
        },
    )
}

/// Biased random walk: order-0 generation with `Walk` provenance.
pub fn generate_walk(
    p_up: f64,
    steps: usize,
    initial_price: f64,
    seed: u64,
) -> Result<PriceSeries> {
    let table = MarkovTable::constant(p_up)?;
    generate_inner(
        &table,
        steps,
        initial_price,
        seed,
        Provenance::Walk { p_up, seed },
    )
}

/// Order-2 trend-parameterized generation with `Trend` provenance.
pub fn generate_trend(
    tp: TrendParams,
    steps: usize,
    initial_price: f64,
    seed: u64,
) -> Result<PriceSeries> {
    let table = MarkovTable::from_trend(tp);
    generate_inner(
        &table,
        steps,
        initial_price,
        seed,
        Provenance::Trend {
            p_l: tp.p_l,
            p_s: tp.p_s,
            seed,
        },
    )
}

/// Empirical transition counts for each history pattern.
///
/// Patterns that never occur are reported as undefined rather than silently
/// zeroed; [`TableEstimate::to_table`] refuses to build a generator table
/// while any pattern is undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEstimate {
    pub order: usize,
    /// Times the price rose after each pattern.
    pub rises: Vec<u64>,
    /// Times each pattern occurred.
    pub occurrences: Vec<u64>,
}

impl TableEstimate {
    /// `p̂_up(mu)`, or `None` if the pattern never occurred.
    pub fn probability(&self, mu: usize) -> Option<f64> {
        if self.occurrences[mu] == 0 {
            None
        } else {
            Some(self.rises[mu] as f64 / self.occurrences[mu] as f64)
        }
    }

    pub fn undefined_patterns(&self) -> Vec<usize> {
        (0..self.occurrences.len())
            .filter(|&mu| self.occurrences[mu] == 0)
            .collect()
    }

    pub fn to_table(&self) -> Result<MarkovTable> {
        let undefined = self.undefined_patterns();
        if !undefined.is_empty() {
            let labels: Vec<String> = undefined
                .iter()
                .map(|&mu| pattern_label(mu, self.order))
                .collect();
            return Err(Error::UndefinedTransitions(labels.join(", ")));
        }
        let p_up = (0..self.occurrences.len())
            .map(|mu| self.probability(mu).unwrap())
            .collect();
        MarkovTable::new(self.order, p_up)
    }
}

/// Measure `p̂_up(mu)` = (rises after `mu`) / (occurrences of `mu`) over the
/// whole series, with the strict-rise convention (a flat close counts as a
/// non-rise).
pub fn estimate_table(series: &PriceSeries, order: usize) -> Result<TableEstimate> {
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let prices = series.prices();
    let moves = prices.len() - 1;
    if moves < order + 1 {
        return Err(Error::SeriesTooShort {
            got: prices.len(),
            need: order + 2,
        });
    }
    let patterns = 1usize << order;
    let mask = patterns - 1;
    let mut rises = vec![0u64; patterns];
    let mut occurrences = vec![0u64; patterns];
    let rose = |j: usize| prices[j + 1] > prices[j];

    let mut mu = 0usize;
    for j in 0..order {
        mu = ((mu << 1) | rose(j) as usize) & mask;
    }
    for j in order..moves {
        occurrences[mu] += 1;
        rises[mu] += rose(j) as u64;
        mu = ((mu << 1) | rose(j) as usize) & mask;
    }
    Ok(TableEstimate {
        order,
        rises,
        occurrences,
    })
}

/// Column names and the minimum usable-row count for CSV ingestion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsvSpec {
    pub date_column: String,
    pub close_column: String,
    pub min_rows: usize,
}

impl Default for CsvSpec {
    fn default() -> Self {
        CsvSpec {
            date_column: "Date".to_string(),
            close_column: "Close".to_string(),
            min_rows: 4,
        }
    }
}

/// A loaded series plus how many rows were skipped for missing or
/// non-positive closes.
#[derive(Clone, Debug)]
pub struct CsvLoad {
    pub series: PriceSeries,
    pub skipped_rows: usize,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y/%m/%d"))
        .ok()
}

/// Load closing prices from a headered CSV file.
///
/// Dates must parse (ISO-8601 or `YYYY/MM/DD`) and be strictly increasing
/// across all rows. Rows whose close is missing or not a positive number are
/// skipped and counted; a close that is present but unparseable is an error.
pub fn load_series_csv(path: &Path, spec: &CsvSpec) -> Result<CsvLoad> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::CsvOpen {
        path: path_str.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::CsvRow {
            path: path_str.clone(),
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::CsvMissingColumn {
                path: path_str.clone(),
                column: name.to_string(),
            })
    };
    let date_idx = col(&spec.date_column)?;
    let close_idx = col(&spec.close_column)?;

    let mut closes = Vec::new();
    let mut skipped = 0usize;
    let mut prev_date: Option<NaiveDate> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::CsvRow {
            path: path_str.clone(),
            row,
            msg: e.to_string(),
        })?;
        let date_raw = record.get(date_idx).unwrap_or("").trim();
        let date = parse_date(date_raw).ok_or_else(|| Error::CsvRow {
            path: path_str.clone(),
            row,
            msg: format!("unparseable date {date_raw:?}"),
        })?;
        if let Some(prev) = prev_date {
            if date <= prev {
                return Err(Error::CsvDateOrder {
                    path: path_str.clone(),
                    row,
                });
            }
        }
        prev_date = Some(date);

        let close_raw = record.get(close_idx).unwrap_or("").trim();
        if close_raw.is_empty() || close_raw.eq_ignore_ascii_case("null") {
            skipped += 1;
            continue;
        }
        let close: f64 = close_raw.parse().map_err(|_| Error::CsvRow {
            path: path_str.clone(),
            row,
            msg: format!("unparseable close {close_raw:?}"),
        })?;
        if close <= 0.0 || close.is_nan() {
            skipped += 1;
            continue;
        }
        closes.push(close);
    }

    let need = spec.min_rows.max(2);
    if closes.len() < need {
        return Err(Error::CsvTooFewRows {
            path: path_str,
            usable: closes.len(),
            need,
        });
    }
    let series = PriceSeries::new(closes, Provenance::Real { file: path_str })?;
    Ok(CsvLoad {
        series,
        skipped_rows: skipped,
    })
}
