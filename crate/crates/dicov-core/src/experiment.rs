//! Experiment orchestration: runs seeded trials of the distributed
//! pipeline against its reference estimators on the chain model, collects
//! per-trial metrics, and summarizes sweeps over machine counts and tuning
//! multipliers. All output rendering is plain CSV with fixed columns so
//! re-runs are byte-identical.

use std::time::Instant;

use crate::datagen::{chain_precision, sample_all_machines, GroundTruthModel};
use crate::debias::machine_pipeline;
use crate::error::{Error, Result};
use crate::hub::{aggregate, final_threshold, full_estimators, hub_variance, naive_estimator};
use crate::matrix::{DataMatrix, DenseSymMatrix, SparseSymMatrix};
use crate::metrics::{frobenius_sq_error, linf_error, support_metrics, MetricsRecord};

/// The estimators an experiment can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Bandwidth-limited debiased averaging with a final threshold.
    Distributed,
    /// Plain average of the biased per-machine fits.
    Naive,
    /// Penalized fit on the pooled data.
    Full,
    /// Debiased, thresholded fit on the pooled data.
    FullDebiased,
}

impl Estimator {
    /// Canonical ordering used for output rows.
    pub const ALL: [Estimator; 4] = [
        Estimator::Distributed,
        Estimator::Naive,
        Estimator::Full,
        Estimator::FullDebiased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Distributed => "distributed",
            Estimator::Naive => "naive",
            Estimator::Full => "full",
            Estimator::FullDebiased => "full_debiased",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "distributed" => Ok(Estimator::Distributed),
            "naive" => Ok(Estimator::Naive),
            "full" => Ok(Estimator::Full),
            "full_debiased" => Ok(Estimator::FullDebiased),
            other => Err(Error::InvalidParameter(format!("unknown estimator \"{other}\""))),
        }
    }
}

/// Everything a run needs. Tuning follows the rates λ = β·√(ln p / n) and
/// τ = β·√(ln p / (M·n)); the pooled reference fit uses the pooled-sample
/// versions of the same rates.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Matrix dimension.
    pub p: usize,
    /// Samples per machine.
    pub n: usize,
    /// Machine count M.
    pub machines: usize,
    pub trials: usize,
    /// Chain coupling of the ground truth.
    pub a: f64,
    /// Tuning multiplier β applied to both rates.
    pub beta: f64,
    /// Per-machine channel budget B, in logical matrix cells.
    pub bandwidth: usize,
    /// Trial t draws from seed base_seed + t.
    pub base_seed: u64,
    pub estimators: Vec<Estimator>,
    /// Hub bind / worker connect address.
    pub address: String,
    pub port: u16,
    /// Network receive deadline.
    pub timeout_ms: u64,
    /// When false (default), wall_ms is written as 0 so output bytes are
    /// reproducible; when true, rows carry real wall-clock times.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 50,
            n: 100,
            machines: 10,
            trials: 20,
            a: 0.4,
            beta: 1.0,
            bandwidth: 500,
            base_seed: 1,
            estimators: Estimator::ALL.to_vec(),
            address: "127.0.0.1".into(),
            port: 7878,
            timeout_ms: 30_000,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidParameter("p must be >= 2".into()));
        }
        if self.n < 1 || self.trials < 1 || self.machines < 1 {
            return Err(Error::InvalidParameter(
                "n, trials, and machines must all be >= 1".into(),
            ));
        }
        if self.bandwidth < self.p {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {} cannot fit the {} diagonal entries",
                self.bandwidth, self.p
            )));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidParameter("no estimators requested".into()));
        }
        Ok(())
    }

    /// Per-machine penalty β·√(ln p / n).
    pub fn lambda(&self) -> f64 {
        self.beta * ((self.p as f64).ln() / self.n as f64).sqrt()
    }

    /// Hub threshold β·√(ln p / (M·n)).
    pub fn tau(&self) -> f64 {
        self.beta * ((self.p as f64).ln() / (self.machines * self.n) as f64).sqrt()
    }

    /// Penalty for the pooled fit: the per-machine rate at the pooled
    /// sample size M·n.
    pub fn lambda_full(&self) -> f64 {
        self.tau()
    }

    /// Threshold for the pooled debiased fit; same rate as `tau`.
    pub fn tau_full(&self) -> f64 {
        self.tau()
    }

    pub fn with_machines(&self, machines: usize) -> Self {
        Self { machines, ..self.clone() }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn requests(&self, estimator: Estimator) -> bool {
        self.estimators.contains(&estimator)
    }
}

/// One CSV row of a per-trial run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub record: MetricsRecord,
    pub beta: f64,
    pub wall_ms: u64,
}

/// Runs every requested estimator on one trial's data and scores it.
/// All estimators see the same samples.
pub fn run_trial(
    config: &ExperimentConfig,
    model: &GroundTruthModel,
    trial: usize,
) -> Result<Vec<TrialRow>> {
    let started = Instant::now();
    let trial_seed = config.base_seed + trial as u64;
    let blocks = sample_all_machines(model, trial_seed, config.machines as u32, config.n);

    let mut theta_hats: Vec<DenseSymMatrix> = Vec::new();
    let mut updates = Vec::new();
    if config.requests(Estimator::Distributed) || config.requests(Estimator::Naive) {
        for (m, x) in blocks.iter().enumerate() {
            let (sol, update) =
                machine_pipeline(x, config.lambda(), config.bandwidth, m as u32)?;
            theta_hats.push(sol.theta_hat);
            updates.push(update);
        }
    }
    let pooled = if config.requests(Estimator::Full) || config.requests(Estimator::FullDebiased)
    {
        let x = DataMatrix::vstack(&blocks)?;
        Some(full_estimators(&x, config.lambda_full(), config.tau_full())?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for estimator in Estimator::ALL {
        if !config.requests(estimator) {
            continue;
        }
        let (dense, support): (DenseSymMatrix, SparseSymMatrix) = match estimator {
            Estimator::Distributed => {
                let theta_bar = aggregate(&updates)?;
                let sigma_m = hub_variance(&theta_bar)?;
                let est = final_threshold(&theta_bar, &sigma_m, config.tau(), config.machines)?;
                (est.theta_final.to_dense(), est.theta_final)
            }
            Estimator::Naive => {
                let mean = naive_estimator(&theta_hats)?;
                let support = SparseSymMatrix::from_dense(&mean);
                (mean, support)
            }
            Estimator::Full => {
                let full = pooled.as_ref().expect("pooled fit computed above").0.clone();
                let support = SparseSymMatrix::from_dense(&full);
                (full, support)
            }
            Estimator::FullDebiased => {
                let sparse = pooled.as_ref().expect("pooled fit computed above").1.clone();
                (sparse.to_dense(), sparse)
            }
        };
        let (fpr, fnr) = support_metrics(&support, model)?;
        rows.push(TrialRow {
            record: MetricsRecord {
                estimator: estimator.name(),
                trial,
                machines: config.machines,
                mse: frobenius_sq_error(&dense, model.theta())?,
                linf: linf_error(&dense, model.theta())?,
                fpr,
                fnr,
            },
            beta: config.beta,
            wall_ms: 0,
        });
    }
    if config.timing {
        let elapsed = started.elapsed().as_millis() as u64;
        for row in &mut rows {
            row.wall_ms = elapsed;
        }
    }
    Ok(rows)
}

/// Runs all trials; rows come out ordered by (trial, estimator) with the
/// estimator order of [`Estimator::ALL`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    config.validate()?;
    let model = chain_precision(config.p, config.a)?;
    let mut rows = Vec::new();
    for trial in 0..config.trials {
        let trial_rows = run_trial(config, &model, trial).map_err(|source| Error::Trial {
            trial,
            source: Box::new(source),
        })?;
        rows.extend(trial_rows);
    }
    Ok(rows)
}

pub const TRIAL_CSV_HEADER: &str = "trial,M,beta,estimator,mse,linf,fpr,fnr,wall_ms";

pub fn render_trials_csv(rows: &[TrialRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.record.trial,
            r.record.machines,
            r.beta,
            r.record.estimator,
            r.record.mse,
            r.record.linf,
            r.record.fpr,
            r.record.fnr,
            r.wall_ms,
        ));
    }
    out
}

/// Quartile summary of one metric across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quantile by linear interpolation between order statistics (the common
/// spreadsheet/R-default rule). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are never NaN"));
    MetricSummary {
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    }
}

/// One summary row of a machine sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MachinesSummaryRow {
    pub machines: usize,
    pub estimator: &'static str,
    pub mse: MetricSummary,
    pub linf: MetricSummary,
    pub fpr: MetricSummary,
    pub fnr: MetricSummary,
}

/// Re-runs the experiment at each machine count; the same base seed is
/// reused, so machine m's data is identical across sweep points.
pub fn sweep_machines(
    config: &ExperimentConfig,
    m_values: &[usize],
) -> Result<Vec<MachinesSummaryRow>> {
    let mut out = Vec::new();
    for &machines in m_values {
        let cfg = config.with_machines(machines);
        let rows = run_experiment(&cfg)?;
        for estimator in Estimator::ALL {
            if !cfg.requests(estimator) {
                continue;
            }
            let of: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.record.estimator == estimator.name())
                .collect();
            let col = |f: fn(&MetricsRecord) -> f64| -> Vec<f64> {
                of.iter().map(|r| f(&r.record)).collect()
            };
            out.push(MachinesSummaryRow {
                machines,
                estimator: estimator.name(),
                mse: summarize(&col(|r| r.mse)),
                linf: summarize(&col(|r| r.linf)),
                fpr: summarize(&col(|r| r.fpr)),
                fnr: summarize(&col(|r| r.fnr)),
            });
        }
    }
    Ok(out)
}

pub const MACHINES_CSV_HEADER: &str = "M,estimator,mse_q1,mse_median,mse_q3,linf_q1,linf_median,linf_q3,fpr_q1,fpr_median,fpr_q3,fnr_q1,fnr_median,fnr_q3";

pub fn render_machines_csv(rows: &[MachinesSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(MACHINES_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.machines,
            r.estimator,
            r.mse.q1,
            r.mse.median,
            r.mse.q3,
            r.linf.q1,
            r.linf.median,
            r.linf.q3,
            r.fpr.q1,
            r.fpr.median,
            r.fpr.q3,
            r.fnr.q1,
            r.fnr.median,
            r.fnr.q3,
        ));
    }
    out
}

/// One summary row of a tuning sweep: selection rates of the distributed
/// estimator at one multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSummaryRow {
    pub beta: f64,
    pub fpr: MetricSummary,
    pub fnr: MetricSummary,
}

/// Re-runs the distributed estimator at each tuning multiplier.
pub fn sweep_beta(config: &ExperimentConfig, beta_values: &[f64]) -> Result<Vec<BetaSummaryRow>> {
    let mut out = Vec::new();
    for &beta in beta_values {
        let mut cfg = config.with_beta(beta);
        cfg.estimators = vec![Estimator::Distributed];
        let rows = run_experiment(&cfg)?;
        let fpr: Vec<f64> = rows.iter().map(|r| r.record.fpr).collect();
        let fnr: Vec<f64> = rows.iter().map(|r| r.record.fnr).collect();
        out.push(BetaSummaryRow {
            beta,
            fpr: summarize(&fpr),
            fnr: summarize(&fnr),
        });
    }
    Ok(out)
}

pub const BETA_CSV_HEADER: &str = "beta,fpr_q1,fpr_median,fpr_q3,fnr_q1,fnr_median,fnr_q3";

pub fn render_beta_csv(rows: &[BetaSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(BETA_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.beta, r.fpr.q1, r.fpr.median, r.fpr.q3, r.fnr.q1, r.fnr.median, r.fnr.q3,
        ));
    }
    out
}
