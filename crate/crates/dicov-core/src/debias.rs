//! Machine-side pipeline: remove the shrinkage bias from a graphical-lasso
//! fit, score each entry against its estimated standard deviation, and keep
//! only the entries that fit the communication budget.
//!
//! The bias correction is the one-step update
//!
//!   Θ̂ᵈ = Θ̂ + Θ̂·(Θ̂⁻¹ − Σ̂)·Θ̂ = 2Θ̂ − Θ̂·Σ̂·Θ̂,
//!
//! computed in the right-hand form so no inverse is ever materialized.
//! Entry (i,j) gets the plug-in variance σ̂²ᵢⱼ = Θ̂ᵢᵢΘ̂ⱼⱼ + Θ̂ᵢⱼ², and the
//! transmit threshold ρ is the smallest significance level whose surviving
//! entries still fit the channel.

use crate::error::{Error, Result};
use crate::glasso::graphical_lasso;
use crate::matrix::{
    check_same_p, empirical_covariance, sym_sandwich, DataMatrix, DenseSymMatrix,
    SparseSymMatrix,
};

/// A machine's thresholded debiased estimate: the unit of communication.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUpdate {
    pub machine_id: u32,
    /// Local sample count the estimate was computed from.
    pub n: u32,
    /// Surviving entries of the debiased estimate (upper triangle).
    pub entries: SparseSymMatrix,
    /// The significance threshold actually used.
    pub rho: f64,
    /// Logical matrix cells represented: diagonal entries count once,
    /// off-diagonal entries twice (they stand for both triangles).
    pub bandwidth_used: usize,
}

impl SparseUpdate {
    pub fn p(&self) -> usize {
        self.entries.p()
    }
}

/// One-step bias correction 2Θ̂ − Θ̂·Σ̂·Θ̂.
pub fn debias(theta_hat: &DenseSymMatrix, sigma_hat: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    check_same_p(theta_hat, sigma_hat)?;
    let sandwich = sym_sandwich(theta_hat, sigma_hat)?;
    theta_hat.scale(2.0).sub(&sandwich)
}

/// Plug-in variances σ̂²ᵢⱼ = Θ̂ᵢᵢΘ̂ⱼⱼ + Θ̂ᵢⱼ², strictly positive when the
/// diagonal is.
pub fn variance_estimates(theta_hat: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    let p = theta_hat.p();
    for i in 0..p {
        if theta_hat.get(i, i) <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "variance estimate needs a positive diagonal; entry {i} is {}",
                theta_hat.get(i, i)
            )));
        }
    }
    Ok(DenseSymMatrix::from_fn(p, |i, j| {
        theta_hat.get(i, i) * theta_hat.get(j, j) + theta_hat.get(i, j).powi(2)
    }))
}

/// Thresholds the debiased estimate to fit a channel of B logical cells.
///
/// The diagonal is always sent (cost p). The remaining capacity holds
/// k = ⌊(B − p)/2⌋ off-diagonal pairs; pairs are ranked by the score
/// rᵢⱼ = |Θ̂ᵈᵢⱼ|/σ̂ᵢⱼ, ρ is set to the (k+1)-th largest score (0 when
/// every nonzero score fits), and exactly the pairs with rᵢⱼ > ρ survive
/// — ties at ρ are dropped, so the budget is never exceeded.
pub fn bandwidth_threshold(
    theta_d: &DenseSymMatrix,
    sigma_sq: &DenseSymMatrix,
    bandwidth: usize,
    machine_id: u32,
    n: u32,
) -> Result<SparseUpdate> {
    check_same_p(theta_d, sigma_sq)?;
    let p = theta_d.p();
    if bandwidth < p {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {bandwidth} cannot fit the {p} diagonal entries"
        )));
    }
    let capacity = (bandwidth - p) / 2;

    let mut scores: Vec<f64> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            scores.push(theta_d.get(i, j).abs() / sigma_sq.get(i, j).sqrt());
        }
    }
    scores.sort_unstable_by(|a, b| b.partial_cmp(a).expect("scores are never NaN"));
    let nonzero = scores.iter().take_while(|&&r| r > 0.0).count();
    let rho = if nonzero <= capacity { 0.0 } else { scores[capacity] };

    let mut entries = Vec::new();
    for i in 0..p {
        for j in i..p {
            let v = theta_d.get(i, j);
            if i == j {
                if v != 0.0 {
                    entries.push((i as u32, j as u32, v));
                }
            } else {
                let r = v.abs() / sigma_sq.get(i, j).sqrt();
                if r > rho {
                    entries.push((i as u32, j as u32, v));
                }
            }
        }
    }
    let entries = SparseSymMatrix::new(p, entries)?;
    let bandwidth_used = entries.count_diag() + 2 * entries.count_offdiag();
    debug_assert!(bandwidth_used <= bandwidth);
    Ok(SparseUpdate { machine_id, n, entries, rho, bandwidth_used })
}

/// The whole machine pipeline: sample covariance → graphical lasso →
/// debias → variance estimates → bandwidth threshold. Deterministic
/// given the data.
pub fn machine_estimate(
    x_m: &DataMatrix,
    lambda: f64,
    bandwidth: usize,
    machine_id: u32,
) -> Result<SparseUpdate> {
    Ok(machine_pipeline(x_m, lambda, bandwidth, machine_id)?.1)
}

/// As `machine_estimate`, but also hands back the raw penalized fit so
/// callers comparing estimators don't solve the same problem twice.
pub fn machine_pipeline(
    x_m: &DataMatrix,
    lambda: f64,
    bandwidth: usize,
    machine_id: u32,
) -> Result<(crate::glasso::GlassoSolution, SparseUpdate)> {
    let sigma_hat = empirical_covariance(x_m);
    let sol = graphical_lasso(&sigma_hat, lambda)?;
    let theta_d = debias(&sol.theta_hat, &sigma_hat)?;
    let sigma_sq = variance_estimates(&sol.theta_hat)?;
    let update = bandwidth_threshold(
        &theta_d,
        &sigma_sq,
        bandwidth,
        machine_id,
        x_m.n() as u32,
    )?;
    Ok((sol, update))
}
