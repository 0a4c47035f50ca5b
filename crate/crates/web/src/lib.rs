//! Browser bindings: simulate a scenario, print its settling bounds, and
//! sample the fuzzy membership functions. Each export takes and returns JSON.

use auv_formation::config::parse_config_str;
use auv_formation::fuzzy::{membership, FuzzyNet};
use auv_formation::sim::{self, MetricsAccumulator, SWEEP_TOL};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest horizon the page will simulate.
const MAX_T_END: f64 = 60.0;
const MAX_POINTS: usize = 2000;

#[derive(Serialize)]
struct Trace {
    t: Vec<f64>,
    /// `[agent][sample]` of `‖ε₁,i‖∞`.
    eps1: Vec<Vec<f64>>,
    /// `[agent][sample]` of `(x, y, z)`.
    position: Vec<Vec<[f64; 3]>>,
    /// `[agent][sample]` of the largest applied input component.
    u_peak: Vec<Vec<f64>>,
    metrics: sim::Metrics,
}

fn config_text(config: &str) -> &str {
    if config.trim().is_empty() {
        "{}"
    } else {
        config
    }
}

pub fn simulate_json(config: &str, points: usize) -> Result<String, String> {
    let sc = parse_config_str(config_text(config)).map_err(|e| e.to_string())?;
    if sc.t_end > MAX_T_END {
        return Err(format!(
            "t_end {} exceeds the demo limit of {MAX_T_END} s",
            sc.t_end
        ));
    }
    let n = sc.n();
    let every = (sc.steps() / points.clamp(2, MAX_POINTS)).max(1);
    let mut trace = Trace {
        t: Vec::new(),
        eps1: vec![Vec::new(); n],
        position: vec![Vec::new(); n],
        u_peak: vec![Vec::new(); n],
        metrics: MetricsAccumulator::new(SWEEP_TOL).finish(),
    };
    let mut acc = MetricsAccumulator::new(SWEEP_TOL);
    let mut k = 0usize;
    sim::run_with(&sc, &mut |s| {
        acc.push(s);
        if k.is_multiple_of(every) {
            trace.t.push(s.t);
            for i in 0..n {
                trace.eps1[i].push(s.eps1.rows(6 * i, 6).amax());
                trace.position[i].push([s.eta[6 * i], s.eta[6 * i + 1], s.eta[6 * i + 2]]);
                trace.u_peak[i].push(s.u.rows(6 * i, 6).amax());
            }
        }
        k += 1;
    })
    .map_err(|e| e.to_string())?;
    trace.metrics = acc.finish();
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

pub fn settling_bounds_json(config: &str) -> Result<String, String> {
    let sc = parse_config_str(config_text(config)).map_err(|e| e.to_string())?;
    let report = sim::bound_report(&sc).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curves {
    z: Vec<f64>,
    centers: Vec<f64>,
    /// `[rule][sample]`
    membership: Vec<Vec<f64>>,
}

pub fn fuzzy_basis_curve_json(z_min: f64, z_max: f64, points: usize) -> Result<String, String> {
    if !(z_min.is_finite() && z_max.is_finite()) || z_min >= z_max {
        return Err(format!("need z_min < z_max, got {z_min} and {z_max}"));
    }
    let points = points.clamp(2, MAX_POINTS);
    let net = FuzzyNet::benchmark();
    let z: Vec<f64> = (0..points)
        .map(|k| z_min + (z_max - z_min) * k as f64 / (points - 1) as f64)
        .collect();
    let membership = net
        .centers
        .iter()
        .map(|&c| z.iter().map(|&x| membership(x, c, net.width)).collect())
        .collect();
    serde_json::to_string(&Curves {
        z,
        centers: net.centers.clone(),
        membership,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(config: &str, points: usize) -> Result<String, JsValue> {
    simulate_json(config, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn settling_bounds(config: &str) -> Result<String, JsValue> {
    settling_bounds_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fuzzy_basis_curve(z_min: f64, z_max: f64, points: usize) -> Result<String, JsValue> {
    fuzzy_basis_curve_json(z_min, z_max, points).map_err(|e| JsValue::from_str(&e))
}
