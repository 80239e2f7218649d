//! Browser demo: three interactive operations over the core simulator,
//! exported through wasm-bindgen and returned as JSON strings.
//!
//! - [`gen_series`] — explore generated price paths over the trend plane,
//! - [`run_demo`] — run all three schemes on one generated path and plot
//!   average wealth and strategy-switcher counts,
//! - [`winner_probe`] — Monte Carlo chance-of-best at one (p_l, p_s) cell.
//!
//! The payload builders are plain functions so the host test suite covers
//! them without a wasm toolchain; the `#[wasm_bindgen]` wrappers only
//! translate errors.

use serde_json::json;
use wasm_bindgen::prelude::*;

use marketgames::engine::{run, SimConfig};
use marketgames::experiments::{sweep_trend_cells, SweepConfig};
use marketgames::prices::{generate_trend, TrendParams};
use marketgames::schemes::Scheme;

const MAX_STEPS: usize = 20_000;
const MAX_AGENTS: usize = 5_000;
const MAX_SAMPLES: usize = 500;

fn check_limit(name: &str, value: usize, max: usize) -> Result<(), String> {
    if value == 0 || value > max {
        return Err(format!("{name} must lie in 1..={max}, got {value}"));
    }
    Ok(())
}

/// JSON `{"prices": [...]}` for one generated trend path.
pub fn series_payload(p_l: f64, p_s: f64, steps: usize, seed: u64) -> Result<String, String> {
    check_limit("steps", steps, MAX_STEPS)?;
    let params = TrendParams::new(p_l, p_s).map_err(|e| e.to_string())?;
    let series = generate_trend(params, steps, 1000.0, seed).map_err(|e| e.to_string())?;
    Ok(json!({ "prices": series.prices() }).to_string())
}

/// JSON with the price path plus per-scheme wealth and switcher series.
/// `memory` 0 means infinite score memory; otherwise the finite-memory
/// variants run with window `memory`.
pub fn run_payload(
    p_l: f64,
    p_s: f64,
    agents: usize,
    memory: u32,
    steps: usize,
    seed: u64,
) -> Result<String, String> {
    check_limit("steps", steps, MAX_STEPS)?;
    check_limit("agents", agents, MAX_AGENTS)?;
    let params = TrendParams::new(p_l, p_s).map_err(|e| e.to_string())?;
    let series = generate_trend(params, steps, 1000.0, seed).map_err(|e| e.to_string())?;
    let schemes = if memory == 0 {
        Scheme::all_infinite()
    } else {
        Scheme::all_windowed(memory)
    };
    let cfg = SimConfig {
        agents_per_scheme: agents,
        schemes,
        seed,
        ..SimConfig::default()
    };
    let record = run(&cfg, &series).map_err(|e| e.to_string())?;
    let schemes: Vec<_> = record
        .schemes
        .iter()
        .enumerate()
        .map(|(i, scheme)| {
            json!({
                "label": scheme.label(),
                "avg_wealth": record.avg_wealth[i],
                "switchers": record.switchers[i],
            })
        })
        .collect();
    Ok(json!({ "prices": record.prices, "schemes": schemes }).to_string())
}

/// JSON chance-of-best and wealth aggregates for one trend cell.
pub fn probe_payload(
    p_l: f64,
    p_s: f64,
    agents: usize,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<String, String> {
    check_limit("steps", steps, MAX_STEPS)?;
    check_limit("agents", agents, MAX_AGENTS)?;
    check_limit("samples", samples, MAX_SAMPLES)?;
    TrendParams::new(p_l, p_s).map_err(|e| e.to_string())?;
    let cfg = SweepConfig {
        sim: SimConfig {
            agents_per_scheme: agents,
            seed,
            ..SimConfig::default()
        },
        steps,
        samples,
        measure_at: steps,
        initial_price: 1000.0,
    };
    let result = sweep_trend_cells(&cfg, &[(p_l, p_s)]).map_err(|e| e.to_string())?;
    let cell = &result.cells[0];
    let stats: Vec<_> = cell
        .stats
        .iter()
        .map(|s| {
            json!({
                "label": s.scheme.label(),
                "chance_best": s.chance_best,
                "mean_wealth": s.mean_wealth,
                "std_wealth": s.std_wealth,
            })
        })
        .collect();
    Ok(json!({ "samples": samples, "schemes": stats }).to_string())
}

#[wasm_bindgen]
pub fn gen_series(p_l: f64, p_s: f64, steps: u32, seed: u32) -> Result<String, JsValue> {
    series_payload(p_l, p_s, steps as usize, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_demo(
    p_l: f64,
    p_s: f64,
    agents: u32,
    memory: u32,
    steps: u32,
    seed: u32,
) -> Result<String, JsValue> {
    run_payload(
        p_l,
        p_s,
        agents as usize,
        memory,
        steps as usize,
        seed as u64,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn winner_probe(
    p_l: f64,
    p_s: f64,
    agents: u32,
    steps: u32,
    samples: u32,
    seed: u32,
) -> Result<String, JsValue> {
    probe_payload(
        p_l,
        p_s,
        agents as usize,
        steps as usize,
        samples as usize,
        seed as u64,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_payload_is_deterministic_json() {
        let a = series_payload(0.4, -0.4, 200, 9).unwrap();
        let b = series_payload(0.4, -0.4, 200, 9).unwrap();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["prices"].as_array().unwrap().len(), 201);
        assert_eq!(v["prices"][0], 1000.0);
    }

    #[test]
    fn run_payload_has_three_schemes() {
        let payload = run_payload(-0.4, 0.4, 40, 0, 150, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&payload).unwrap();
        let schemes = v["schemes"].as_array().unwrap();
        assert_eq!(schemes.len(), 3);
        assert_eq!(schemes[0]["label"], "WG");
        assert_eq!(schemes[0]["avg_wealth"].as_array().unwrap().len(), 151);

        let windowed = run_payload(-0.4, 0.4, 40, 50, 150, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&windowed).unwrap();
        assert_eq!(v["schemes"][0]["label"], "DWG");
    }

    #[test]
    fn probe_payload_fractions_sum_to_one() {
        let payload = probe_payload(0.4, 0.4, 25, 120, 8, 11).unwrap();
        let v: serde_json::Value = serde_json::from_str(&payload).unwrap();
        let total: f64 = v["schemes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["chance_best"].as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        assert!(series_payload(0.7, 0.0, 100, 1).is_err());
        assert!(series_payload(0.1, 0.0, 0, 1).is_err());
        assert!(run_payload(0.1, 0.0, 0, 0, 100, 1).is_err());
        assert!(probe_payload(0.1, 0.0, 10, 100, 100_000, 1).is_err());
    }
}
