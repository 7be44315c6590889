//! Hub-side pipeline: average the machines' sparse updates (absent entries
//! count as zero), re-estimate entrywise variances from the average, and
//! apply the final significance threshold. Also provides the reference
//! estimators a distributed run is judged against: the naive average of
//! biased fits and the pooled-data fits.

use crate::debias::{debias, variance_estimates, SparseUpdate};
use crate::error::{Error, Result};
use crate::glasso::graphical_lasso;
use crate::matrix::{empirical_covariance, DataMatrix, DenseSymMatrix, SparseSymMatrix};

/// The hub's final output for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct HubEstimate {
    /// Θ̄, the entrywise mean of the updates with missing entries as zero.
    pub theta_bar: DenseSymMatrix,
    /// The averaged estimate after the final threshold; diagonal copied
    /// from `theta_bar` unconditionally.
    pub theta_final: SparseSymMatrix,
    /// Final significance threshold used.
    pub tau: f64,
    /// Number of updates aggregated.
    pub machines: usize,
}

/// Entrywise mean of the updates, treating absent entries as zero.
/// Summation runs in the given order; callers wanting bit-reproducible
/// aggregates order updates by machine id first.
pub fn aggregate(updates: &[SparseUpdate]) -> Result<DenseSymMatrix> {
    let Some(first) = updates.first() else {
        return Err(Error::InvalidParameter("no updates to aggregate".into()));
    };
    let p = first.p();
    let mut seen = std::collections::BTreeSet::new();
    let mut sum = DenseSymMatrix::zeros(p);
    for u in updates {
        if u.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "update from machine {} has p={}, expected {p}",
                u.machine_id,
                u.p()
            )));
        }
        if !seen.insert(u.machine_id) {
            return Err(Error::DuplicateMachine(u.machine_id));
        }
        for &(i, j, v) in u.entries.entries() {
            let (i, j) = (i as usize, j as usize);
            sum.set(i, j, sum.get(i, j) + v);
        }
    }
    Ok(sum.scale(1.0 / updates.len() as f64))
}

/// Plug-in variances computed from the averaged estimate; same formula as
/// the machine-side estimates.
pub fn hub_variance(theta_bar: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    variance_estimates(theta_bar)
}

/// Keeps off-diagonal entries strictly above τ·σ̂ and copies the diagonal
/// unconditionally; kept values are unmodified.
pub fn final_threshold(
    theta_bar: &DenseSymMatrix,
    sigma_m: &DenseSymMatrix,
    tau: f64,
    machines: usize,
) -> Result<HubEstimate> {
    crate::matrix::check_same_p(theta_bar, sigma_m)?;
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    let p = theta_bar.p();
    let mut entries = Vec::new();
    for i in 0..p {
        for j in i..p {
            let v = theta_bar.get(i, j);
            if v == 0.0 {
                continue;
            }
            if i == j || v.abs() > tau * sigma_m.get(i, j).sqrt() {
                entries.push((i as u32, j as u32, v));
            }
        }
    }
    Ok(HubEstimate {
        theta_bar: theta_bar.clone(),
        theta_final: SparseSymMatrix::new(p, entries)?,
        tau,
        machines,
    })
}

/// Mean of the raw (biased) per-machine fits.
pub fn naive_estimator(theta_hats: &[DenseSymMatrix]) -> Result<DenseSymMatrix> {
    let Some(first) = theta_hats.first() else {
        return Err(Error::InvalidParameter("no estimates to average".into()));
    };
    let mut sum = DenseSymMatrix::zeros(first.p());
    for t in theta_hats {
        sum = sum.add(t)?;
    }
    Ok(sum.scale(1.0 / theta_hats.len() as f64))
}

/// Pooled-data reference fits: the plain penalized fit on all the data,
/// and its debiased, variance-thresholded refinement.
pub fn full_estimators(
    x: &DataMatrix,
    lambda_full: f64,
    tau_full: f64,
) -> Result<(DenseSymMatrix, SparseSymMatrix)> {
    let sigma_hat = empirical_covariance(x);
    let sol = graphical_lasso(&sigma_hat, lambda_full)?;
    let theta_d = debias(&sol.theta_hat, &sigma_hat)?;
    let sigma_sq = hub_variance(&theta_d)?;
    let thresholded = final_threshold(&theta_d, &sigma_sq, tau_full, 1)?;
    Ok((sol.theta_hat, thresholded.theta_final))
}
