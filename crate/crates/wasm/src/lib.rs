//! Browser bindings. Every export takes a network description as JSON and
//! returns a JSON string; errors become JavaScript exceptions.
//!
//! Nodes are numbered from 1, as on the command line.

use jackson_sojourn::compare::exact_moment;
use jackson_sojourn::io::parse_network;
use jackson_sojourn::moments::{first_moments, moment_table_overtake_free};
use jackson_sojourn::network::classify_topology;
use jackson_sojourn::simulator::{empirical_cdf, empirical_moments, simulate, SimConfig, DEFAULT_BATCHES};
use jackson_sojourn::uniformization::{sojourn_analysis, AnalysisOptions, Deficits, PathMode};
use jackson_sojourn::{NetworkSpec, TopologyClass, TrafficSolution};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest queue-length cap the page may request.
const MAX_CAP: usize = 40;

fn load(network_json: &str) -> Result<(NetworkSpec, TrafficSolution), String> {
    let spec = parse_network(network_json).map_err(|e| e.to_string())?;
    let traffic = spec.solve_traffic().map_err(|e| e.to_string())?;
    Ok((spec, traffic))
}

fn entry_index(spec: &NetworkSpec, entry: usize) -> Result<usize, String> {
    if entry == 0 || entry > spec.nodes() {
        return Err(format!("entry must be between 1 and {}", spec.nodes()));
    }
    Ok(entry - 1)
}

fn linspace(stop: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|i| stop * i as f64 / (count - 1) as f64).collect()
}

/// Plot range: five times the mean sojourn from `entry`.
fn horizon(spec: &NetworkSpec, traffic: &TrafficSolution, entry: usize) -> f64 {
    5.0 * exact_moment(spec, traffic, entry, None, 1).unwrap_or(1.0)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BoundsOut {
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    alpha: f64,
    k: usize,
    cap: usize,
    states: usize,
    deficits: Deficits,
    mean_lower_bound: f64,
    exact_mean: Option<f64>,
}

/// Certified distribution bounds for a customer entering at `entry`.
/// `cap = 0` picks the cap from `epsilon`.
pub fn bounds_json(network_json: &str, entry: usize, epsilon: f64, cap: usize, points: usize) -> Result<String, String> {
    let (spec, traffic) = load(network_json)?;
    traffic.require_stable().map_err(|e| e.to_string())?;
    let entry = entry_index(&spec, entry)?;
    if cap > MAX_CAP {
        return Err(format!("cap above {MAX_CAP} is too large for the browser"));
    }
    let options = AnalysisOptions {
        epsilon,
        cap: (cap > 0).then_some(cap),
        moment_orders: vec![1],
        ..Default::default()
    };
    let grid = linspace(horizon(&spec, &traffic, entry), points);
    let a = sojourn_analysis(&spec, &traffic, entry, &PathMode::RandomRouting, &options, &grid)
        .map_err(|e| e.to_string())?;
    to_json(&BoundsOut {
        t: grid,
        lower: a.bounds.lower,
        upper: a.bounds.upper,
        alpha: a.alpha,
        k: a.jumps,
        cap: a.cap,
        states: a.states,
        deficits: a.deficits,
        mean_lower_bound: a.moment_bounds[0].lower_bound,
        exact_mean: exact_moment(&spec, &traffic, entry, None, 1),
    })
}

#[derive(Serialize)]
struct MomentsOut {
    theta: Vec<f64>,
    rho: Vec<f64>,
    stable: bool,
    topology: TopologyClass,
    mean: Option<Vec<f64>>,
    second: Option<Vec<f64>>,
    second_refused: Option<String>,
}

/// Traffic solution, topology and the exact moments the topology permits.
pub fn moments_json(network_json: &str) -> Result<String, String> {
    let (spec, traffic) = load(network_json)?;
    let topology = classify_topology(&spec);
    let mut out = MomentsOut {
        theta: traffic.theta.clone(),
        rho: traffic.rho.clone(),
        stable: traffic.stable,
        topology,
        mean: None,
        second: None,
        second_refused: None,
    };
    if traffic.stable {
        out.mean = first_moments(&spec, &traffic).ok().map(|m| m.values);
        match moment_table_overtake_free(&spec, &traffic, 2) {
            Ok(mut table) => out.second = table.pop(),
            Err(e) => {
                let fallback: Option<Vec<f64>> = (0..spec.nodes())
                    .map(|j| exact_moment(&spec, &traffic, j, None, 2))
                    .collect();
                match fallback {
                    Some(values) => out.second = Some(values),
                    None => out.second_refused = Some(e.to_string()),
                }
            }
        }
    }
    to_json(&out)
}

#[derive(Serialize)]
struct SimulationOut {
    t: Vec<f64>,
    empirical: Vec<f64>,
    dkw_half_width: f64,
    histogram_edges: Vec<f64>,
    histogram: Vec<usize>,
    mean: f64,
    mean_se: f64,
    samples: usize,
}

/// Simulated sojourns of customers entering at `entry`: empirical CDF on the
/// plot grid and a histogram of the totals.
pub fn simulate_json(network_json: &str, entry: usize, tags: usize, seed: u64, points: usize) -> Result<String, String> {
    let (spec, traffic) = load(network_json)?;
    traffic.require_stable().map_err(|e| e.to_string())?;
    let entry = entry_index(&spec, entry)?;
    let mut config = SimConfig::new(seed, tags);
    config.entry_filter = Some(entry);
    let sim = simulate(&spec, &config).map_err(|e| e.to_string())?;
    let grid = linspace(horizon(&spec, &traffic, entry), points);
    let ecdf = empirical_cdf(&sim.samples, &grid).map_err(|e| e.to_string())?;
    let moments = empirical_moments(&sim.samples, 1, DEFAULT_BATCHES).map_err(|e| e.to_string())?;

    let stop = *grid.last().unwrap_or(&1.0);
    let bins = 40;
    let width = stop / bins as f64;
    let mut histogram = vec![0usize; bins];
    for s in &sim.samples {
        let b = ((s.total / width) as usize).min(bins - 1);
        histogram[b] += 1;
    }
    to_json(&SimulationOut {
        t: grid,
        empirical: ecdf.values,
        dkw_half_width: ecdf.dkw_half_width,
        histogram_edges: (0..=bins).map(|i| i as f64 * width).collect(),
        histogram,
        mean: moments.mean,
        mean_se: moments.mean_se,
        samples: sim.samples.len(),
    })
}

#[wasm_bindgen]
pub fn cdf_bounds(network_json: &str, entry: usize, epsilon: f64, cap: usize, points: usize) -> Result<String, JsValue> {
    bounds_json(network_json, entry, epsilon, cap, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn exact_moments(network_json: &str) -> Result<String, JsValue> {
    moments_json(network_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_sojourns(network_json: &str, entry: usize, tags: usize, seed: u64, points: usize) -> Result<String, JsValue> {
    simulate_json(network_json, entry, tags, seed, points).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const TANDEM: &str = r#"{"nodes": 2, "arrival_rates": [1, 0], "service_rates": [2, 2],
        "routing": [[0, 1], [0, 0]]}"#;
    const FEEDBACK: &str = r#"{"nodes": 1, "arrival_rates": [1], "service_rates": [3], "routing": [[0.5]]}"#;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn bounds_bracket_erlang() {
        let v = parse(&bounds_json(TANDEM, 1, 1e-4, 0, 21).unwrap());
        let t = v["t"].as_array().unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t[20].as_f64().unwrap(), 10.0);
        for i in 0..21 {
            let x = t[i].as_f64().unwrap();
            let erlang = 1.0 - (-x).exp() * (1.0 + x);
            let (l, u) = (v["lower"][i].as_f64().unwrap(), v["upper"][i].as_f64().unwrap());
            assert!(l <= erlang + 1e-12 && erlang <= u + 1e-12);
        }
        assert_eq!(v["exact_mean"], 2.0);
    }

    #[test]
    fn moments_by_topology() {
        let v = parse(&moments_json(TANDEM).unwrap());
        assert_eq!(v["mean"], serde_json::json!([2.0, 1.0]));
        assert_eq!(v["second"], serde_json::json!([6.0, 2.0]));
        let f = parse(&moments_json(FEEDBACK).unwrap());
        assert!((f["second"][0].as_f64().unwrap() - (44.0 / 7.0 + 4.0)).abs() < 1e-12);
        let unstable = r#"{"nodes": 1, "arrival_rates": [3], "service_rates": [2], "routing": [[0]]}"#;
        let u = parse(&moments_json(unstable).unwrap());
        assert_eq!(u["stable"], false);
        assert!(u["mean"].is_null());
    }

    #[test]
    fn simulation_histogram_counts_every_sample() {
        let v = parse(&simulate_json(FEEDBACK, 1, 5000, 3, 11).unwrap());
        let total: u64 = v["histogram"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(total, 5000);
        assert_eq!(v["samples"], 5000);
        assert_eq!(v["empirical"].as_array().unwrap().len(), 11);
    }

    #[test]
    fn errors_are_messages() {
        assert!(bounds_json("{", 1, 1e-4, 0, 10).is_err());
        assert!(bounds_json(TANDEM, 3, 1e-4, 0, 10).unwrap_err().contains("entry"));
        assert!(bounds_json(TANDEM, 1, 1e-4, 500, 10).unwrap_err().contains("cap"));
        assert!(simulate_json(TANDEM, 0, 10, 1, 10).is_err());
    }
}
