//! wasm-bindgen bindings for the browser demo.
//!
//! Three operations, all JSON-in/JSON-out so the page needs no generated
//! types: [`solve_eap`] returns the closed-form solution, [`network_trace`]
//! returns plot-ready columns of the induced queueing trace, and
//! [`regime_map`] rasterizes the regime tag over a 2-d parameter sweep.
//! The JSON layer lives in plain functions so the host test suite covers it
//! without a wasm runtime.

use eap_core::network::{compose, Class, GameParams};
use eap_core::solver::{solve, JointProfile};
use eap_core::verifier::{check_equilibrium, social_cost};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn parse_params(params_json: &str) -> Result<GameParams, String> {
    let p: GameParams = serde_json::from_str(params_json).map_err(|e| e.to_string())?;
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

#[derive(Serialize)]
struct SolveOutput {
    solution: eap_core::solver::EapSolution,
    social_cost: f64,
    equilibrium_pass: bool,
}

pub fn solve_eap_json(params_json: &str) -> Result<String, String> {
    let p = parse_params(params_json)?;
    let solution = solve(&p).map_err(|e| e.to_string())?;
    let profile = solution.verification_profiles()[0].clone();
    let social = social_cost(&profile.f1, &profile.f2, &p).map_err(|e| e.to_string())?;
    let pass = check_equilibrium(&profile.f1, &profile.f2, &p, 1e-9)
        .map_err(|e| e.to_string())?
        .passed;
    serde_json::to_string(&SolveOutput { solution, social_cost: social, equilibrium_pass: pass })
        .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct TraceOutput {
    tag: String,
    t: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    q1: Vec<f64>,
    q2: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

pub fn network_trace_json(params_json: &str, rows: usize) -> Result<String, String> {
    let p = parse_params(params_json)?;
    let solution = solve(&p).map_err(|e| e.to_string())?;
    let JointProfile { f1, f2 } = solution.verification_profiles()[0].clone();
    let trace = compose(&f1, &f2, &p).map_err(|e| e.to_string())?;

    let mut times = trace.critical_times();
    let (lo, hi) = match (times.first(), times.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo - 0.2 * (hi - lo), hi + 0.1 * (hi - lo)),
        _ => (-1.0, 1.0),
    };
    let rows = rows.clamp(2, 5000);
    for i in 0..rows {
        times.push(lo + (hi - lo) * i as f64 / (rows - 1) as f64);
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let mut out = TraceOutput {
        tag: solution.tag.to_string(),
        t: Vec::with_capacity(times.len()),
        f1: Vec::new(),
        f2: Vec::new(),
        q1: Vec::new(),
        q2: Vec::new(),
        c1: Vec::new(),
        c2: Vec::new(),
    };
    for &t in &times {
        out.t.push(t);
        out.f1.push(f1.eval(t));
        out.f2.push(f2.eval(t));
        out.q1.push(trace.queue1.q.eval(t));
        out.q2.push(trace.queue2.q.eval(t));
        out.c1.push(trace.class_cost(Class::One, t));
        out.c2.push(trace.class_cost(Class::Two, t));
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct MapAxis {
    axis: String,
    from: f64,
    to: f64,
    steps: usize,
}

#[derive(Deserialize)]
struct MapSpec {
    x: MapAxis,
    y: MapAxis,
}

#[derive(Serialize)]
struct MapOutput {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Regime tag per (y, x) cell.
    tags: Vec<Vec<String>>,
}

fn apply_axis(p: &mut GameParams, axis: &str, value: f64) -> Result<(), String> {
    match axis {
        "mu1" => p.mu1 = value,
        "mu2" => p.mu2 = value,
        "lambda1" => p.lambda1 = value,
        "lambda2" => p.lambda2 = value,
        "gamma1" => p.gamma1 = value,
        "gamma2" => p.gamma2 = value,
        other => return Err(format!("unknown axis {other:?}")),
    }
    Ok(())
}

fn axis_values(a: &MapAxis) -> Result<Vec<f64>, String> {
    if a.steps == 0 {
        return Err("axis needs at least one step".to_string());
    }
    if a.steps == 1 {
        return Ok(vec![a.from]);
    }
    Ok((0..a.steps)
        .map(|i| a.from + (a.to - a.from) * i as f64 / (a.steps - 1) as f64)
        .collect())
}

pub fn regime_map_json(params_json: &str, spec_json: &str) -> Result<String, String> {
    let base = parse_params(params_json)?;
    let spec: MapSpec = serde_json::from_str(spec_json).map_err(|e| e.to_string())?;
    let xs = axis_values(&spec.x)?;
    let ys = axis_values(&spec.y)?;
    let mut tags = Vec::with_capacity(ys.len());
    for &y in &ys {
        let mut row = Vec::with_capacity(xs.len());
        for &x in &xs {
            let mut p = base;
            apply_axis(&mut p, &spec.x.axis, x)?;
            apply_axis(&mut p, &spec.y.axis, y)?;
            let tag = match p.validate() {
                Ok(()) => eap_core::solver::classify(&p)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|e| format!("error: {e}")),
                Err(_) => String::from("invalid"),
            };
            row.push(tag);
        }
        tags.push(row);
    }
    serde_json::to_string(&MapOutput { xs, ys, tags }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn solve_eap(params_json: &str) -> Result<String, JsError> {
    solve_eap_json(params_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn network_trace(params_json: &str, rows: usize) -> Result<String, JsError> {
    network_trace_json(params_json, rows).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn regime_map(params_json: &str, spec_json: &str) -> Result<String, JsError> {
    regime_map_json(params_json, spec_json).map_err(|e| JsError::new(&e))
}
