//! Browser bindings for the distributed precision-matrix pipeline. Each
//! export takes plain numbers (plus comma-separated lists), runs the
//! seeded computation, and returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never traps.
//!
//! The JSON builders are ordinary host-testable functions; `wasm-bindgen`
//! only wraps them.

use dicov_core::datagen::sample_all_machines;
use dicov_core::debias::machine_pipeline;
use dicov_core::experiment::{sweep_beta, sweep_machines, Estimator, ExperimentConfig};
use dicov_core::hub::{aggregate, final_threshold, hub_variance, naive_estimator};
use dicov_core::matrix::DenseSymMatrix;
use dicov_core::metrics::{frobenius_sq_error, linf_error, support_metrics};
use dicov_core::{chain_precision, Result, SparseUpdate};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn rows(m: &DenseSymMatrix) -> Vec<Vec<f64>> {
    let p = m.p();
    (0..p).map(|i| (0..p).map(|j| m.get(i, j)).collect()).collect()
}

fn or_error(result: Result<Value>) -> String {
    match result {
        Ok(value) => value.to_string(),
        Err(err) => json!({ "error": err.to_string() }).to_string(),
    }
}

fn config(p: u32, n: u32, machines: u32, beta: f64, bandwidth: u32, seed: u32) -> ExperimentConfig {
    ExperimentConfig {
        p: p as usize,
        n: n as usize,
        machines: machines as usize,
        beta,
        bandwidth: bandwidth as usize,
        base_seed: seed as u64,
        ..Default::default()
    }
}

fn trial_value(c: &ExperimentConfig) -> Result<Value> {
    c.validate()?;
    let model = chain_precision(c.p, c.a)?;
    let blocks = sample_all_machines(&model, c.base_seed, c.machines as u32, c.n);
    let mut fits = Vec::new();
    let mut updates: Vec<SparseUpdate> = Vec::new();
    for (m, x) in blocks.iter().enumerate() {
        let (sol, update) = machine_pipeline(x, c.lambda(), c.bandwidth, m as u32)?;
        fits.push(sol.theta_hat);
        updates.push(update);
    }
    let theta_bar = aggregate(&updates)?;
    let sigma_m = hub_variance(&theta_bar)?;
    let estimate = final_threshold(&theta_bar, &sigma_m, c.tau(), c.machines)?;
    let final_dense = estimate.theta_final.to_dense();
    let naive = naive_estimator(&fits)?;

    let score = |dense: &DenseSymMatrix, support| -> Result<Value> {
        let (fpr, fnr) = support_metrics(support, &model)?;
        Ok(json!({
            "mse": frobenius_sq_error(dense, model.theta())?,
            "linf": linf_error(dense, model.theta())?,
            "fpr": fpr,
            "fnr": fnr,
        }))
    };
    let naive_support = dicov_core::SparseSymMatrix::from_dense(&naive);
    Ok(json!({
        "p": c.p,
        "lambda": c.lambda(),
        "tau": c.tau(),
        "bandwidth_used": updates.iter().map(|u| u.bandwidth_used).collect::<Vec<_>>(),
        "truth": rows(model.theta()),
        "estimate": rows(&final_dense),
        "metrics": {
            "distributed": score(&final_dense, &estimate.theta_final)?,
            "naive": score(&naive, &naive_support)?,
        },
    }))
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim().parse().map_err(|_| {
                dicov_core::Error::InvalidParameter(format!("bad number `{}`", s.trim()))
            })
        })
        .collect()
}

fn beta_sweep_value(c: &ExperimentConfig, betas: &str) -> Result<Value> {
    let rows = sweep_beta(c, &parse_f64_list(betas)?)?;
    Ok(Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "beta": r.beta,
                    "fpr": { "q1": r.fpr.q1, "median": r.fpr.median, "q3": r.fpr.q3 },
                    "fnr": { "q1": r.fnr.q1, "median": r.fnr.median, "q3": r.fnr.q3 },
                })
            })
            .collect(),
    ))
}

fn machines_sweep_value(c: &ExperimentConfig, m_values: &str) -> Result<Value> {
    let counts: Vec<usize> = parse_f64_list(m_values)?.iter().map(|&v| v as usize).collect();
    let rows = sweep_machines(c, &counts)?;
    Ok(Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "machines": r.machines,
                    "estimator": r.estimator,
                    "mse": { "q1": r.mse.q1, "median": r.mse.median, "q3": r.mse.q3 },
                })
            })
            .collect(),
    ))
}

/// One full round at the given shape: ground truth, final estimate, and
/// distributed-vs-naive metrics.
#[wasm_bindgen]
pub fn trial_json(p: u32, n: u32, machines: u32, beta: f64, bandwidth: u32, seed: u32) -> String {
    or_error(trial_value(&config(p, n, machines, beta, bandwidth, seed)))
}

/// Selection-rate quartiles of the distributed estimator per tuning
/// multiplier; `betas` is a comma-separated list.
#[wasm_bindgen]
pub fn beta_sweep_json(p: u32, n: u32, machines: u32, trials: u32, seed: u32, betas: &str) -> String {
    let mut c = config(p, n, machines, 1.0, 10 * p, seed);
    c.trials = trials as usize;
    or_error(beta_sweep_value(&c, betas))
}

/// Median MSE (with quartiles) per estimator at each machine count;
/// `m_values` is a comma-separated list.
#[wasm_bindgen]
pub fn machines_sweep_json(p: u32, n: u32, trials: u32, seed: u32, m_values: &str) -> String {
    let mut c = config(p, n, 2, 1.0, 10 * p, seed);
    c.trials = trials as usize;
    c.estimators = vec![Estimator::Distributed, Estimator::Naive, Estimator::FullDebiased];
    or_error(machines_sweep_value(&c, m_values))
}
