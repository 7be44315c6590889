//! Estimation-error and support-recovery metrics. Error norms run over all
//! p² cells; edge selection rates run over off-diagonal upper-triangle
//! pairs only, since the diagonal is never a candidate edge.

use crate::datagen::GroundTruthModel;
use crate::error::Result;
use crate::matrix::{check_same_p, DenseSymMatrix, SparseSymMatrix};

/// One estimator's scores on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub estimator: &'static str,
    pub trial: usize,
    pub machines: usize,
    /// Squared Frobenius distance to the truth.
    pub mse: f64,
    /// Largest absolute entrywise error.
    pub linf: f64,
    /// Fraction of true non-edges declared edges.
    pub fpr: f64,
    /// Fraction of true edges missed.
    pub fnr: f64,
}

/// Σᵢⱼ (estᵢⱼ − truthᵢⱼ)² over all p² cells.
pub fn frobenius_sq_error(est: &DenseSymMatrix, truth: &DenseSymMatrix) -> Result<f64> {
    check_same_p(est, truth)?;
    let p = est.p();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            acc += (est.get(i, j) - truth.get(i, j)).powi(2);
        }
    }
    Ok(acc)
}

/// max |estᵢⱼ − truthᵢⱼ|.
pub fn linf_error(est: &DenseSymMatrix, truth: &DenseSymMatrix) -> Result<f64> {
    check_same_p(est, truth)?;
    let p = est.p();
    let mut acc = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            acc = acc.max((est.get(i, j) - truth.get(i, j)).abs());
        }
    }
    Ok(acc)
}

/// (false positive rate, false negative rate) of the estimated edge set
/// against the truth, over upper-triangle off-diagonal pairs. An empty
/// class contributes rate 0.
pub fn support_metrics(
    est: &SparseSymMatrix,
    truth: &GroundTruthModel,
) -> Result<(f64, f64)> {
    if est.p() != truth.p() {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "estimate p={} vs truth p={}",
            est.p(),
            truth.p()
        )));
    }
    let p = truth.p();
    let total_pairs = p * (p - 1) / 2;
    let edges = truth.support().len();
    let non_edges = total_pairs - edges;

    let false_positives = est
        .offdiag_pairs()
        .filter(|&(i, j)| !truth.is_edge(i, j))
        .count();
    let false_negatives = truth
        .support()
        .iter()
        .filter(|&&(i, j)| est.get(i as usize, j as usize) == 0.0)
        .count();

    let fpr = if non_edges == 0 { 0.0 } else { false_positives as f64 / non_edges as f64 };
    let fnr = if edges == 0 { 0.0 } else { false_negatives as f64 / edges as f64 };
    Ok((fpr, fnr))
}
