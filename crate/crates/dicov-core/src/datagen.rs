//! Synthetic ground truth and Gaussian sampling: the chain-graph precision
//! model, seeded multivariate normal draws, and the equal split of samples
//! across machines.
//!
//! Randomness is ChaCha8 throughout. Trial t of an experiment seeds a
//! generator with `base_seed + t`; machine m then draws from stream m of
//! that generator. A worker process can therefore regenerate exactly its
//! own block from `(base_seed, machine_id)` without knowing how many other
//! machines exist, and no two (trial, machine) pairs share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{cholesky, invert_spd, DataMatrix, DenseSymMatrix, LowerTriangular};

/// Ground truth for a simulation: the precision matrix Θ, its inverse
/// Σ, the edge set, and the sparsity counts the theory tracks.
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    theta: DenseSymMatrix,
    sigma: DenseSymMatrix,
    chol: LowerTriangular,
    /// Nonzero off-diagonal positions (i, j) with i < j, sorted.
    support: Vec<(u32, u32)>,
    /// Off-diagonal nonzero count over both triangles (= 2·support.len()).
    s: usize,
    /// Maximum nonzeros in any row, diagonal included.
    d: usize,
}

impl GroundTruthModel {
    /// Builds the model from an SPD precision matrix, deriving Σ = Θ⁻¹,
    /// the support set, and the sparsity counts.
    pub fn from_precision(theta: DenseSymMatrix) -> Result<Self> {
        let sigma = invert_spd(&theta)?;
        let chol = cholesky(&sigma)?;
        let p = theta.p();
        let mut support = Vec::new();
        let mut d = 0;
        for i in 0..p {
            let mut row_nnz = 0;
            for j in 0..p {
                if theta.get(i, j) != 0.0 {
                    row_nnz += 1;
                }
                if j > i && theta.get(i, j) != 0.0 {
                    support.push((i as u32, j as u32));
                }
            }
            d = d.max(row_nnz);
        }
        let s = 2 * support.len();
        Ok(Self { theta, sigma, chol, support, s, d })
    }

    pub fn theta(&self) -> &DenseSymMatrix {
        &self.theta
    }

    pub fn sigma(&self) -> &DenseSymMatrix {
        &self.sigma
    }

    pub fn p(&self) -> usize {
        self.theta.p()
    }

    /// Upper-triangle edge list, sorted by (i, j).
    pub fn support(&self) -> &[(u32, u32)] {
        &self.support
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Whether (i, j), i ≠ j, is an edge of the truth (order-insensitive).
    pub fn is_edge(&self, i: u32, j: u32) -> bool {
        let key = (i.min(j), i.max(j));
        self.support.binary_search(&key).is_ok()
    }

    /// Draws n rows of N(0, Σ) as x = L·z with z standard normal,
    /// consuming exactly n·p draws from `rng`.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> DataMatrix {
        let p = self.p();
        let mut data = Vec::with_capacity(n * p);
        let mut z = vec![0.0f64; p];
        for _ in 0..n {
            for zi in &mut z {
                *zi = rng.sample(StandardNormal);
            }
            data.extend_from_slice(&self.chol.mul_vec(&z));
        }
        DataMatrix::from_raw(n, p, data).expect("n, p >= 1")
    }
}

/// Chain-graph model: Θᵢᵢ = 1, Θᵢ,ᵢ₊₁ = Θᵢ₊₁,ᵢ = a, zero elsewhere.
/// Diagonally dominant (hence SPD) for |a| < 0.5. The edges form a path,
/// so s = 2(p−1) and d = 3 (for a ≠ 0).
pub fn chain_precision(p: usize, a: f64) -> Result<GroundTruthModel> {
    if p < 2 {
        return Err(Error::InvalidParameter("chain model needs p >= 2".into()));
    }
    if !a.is_finite() || a.abs() >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "chain coupling must satisfy |a| < 0.5 for positive definiteness, got {a}"
        )));
    }
    let theta = DenseSymMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            a
        } else {
            0.0
        }
    });
    GroundTruthModel::from_precision(theta)
}

/// RNG for machine `m` under trial seed `trial_seed` (see module docs).
pub fn machine_rng(trial_seed: u64, machine: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(machine as u64);
    rng
}

/// Draws n i.i.d. rows of N(0, Σ); deterministic given the seed.
/// Equals machine 0's block under the same seed.
pub fn sample_gaussian(model: &GroundTruthModel, n: usize, seed: u64) -> DataMatrix {
    sample_machine(model, seed, 0, n)
}

/// Samples machine `m`'s local data set: n rows of N(0, Σ) from stream m.
pub fn sample_machine(
    model: &GroundTruthModel,
    trial_seed: u64,
    machine: u32,
    n: usize,
) -> DataMatrix {
    let mut rng = machine_rng(trial_seed, machine);
    model.sample(n, &mut rng)
}

/// Samples all M machines' data sets for one trial.
pub fn sample_all_machines(
    model: &GroundTruthModel,
    trial_seed: u64,
    machines: u32,
    n: usize,
) -> Vec<DataMatrix> {
    (0..machines)
        .map(|m| sample_machine(model, trial_seed, m, n))
        .collect()
}

/// Splits X into M contiguous equal row blocks, order preserved.
pub fn split_samples(x: &DataMatrix, machines: usize) -> Result<Vec<DataMatrix>> {
    if machines == 0 {
        return Err(Error::InvalidParameter("machine count must be >= 1".into()));
    }
    if !x.n().is_multiple_of(machines) {
        return Err(Error::InvalidParameter(format!(
            "{} rows cannot be split equally over {machines} machines",
            x.n()
        )));
    }
    let block = x.n() / machines;
    let p = x.p();
    let mut out = Vec::with_capacity(machines);
    for m in 0..machines {
        let mut data = Vec::with_capacity(block * p);
        for k in 0..block {
            data.extend_from_slice(x.row(m * block + k));
        }
        out.push(DataMatrix::from_raw(block, p, data)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{empirical_covariance, identity_residual};

    #[test]
    fn chain_structure() {
        let model = chain_precision(3, 0.4).unwrap();
        let t = model.theta();
        assert_eq!(t.get(0, 0), 1.0);
        assert_eq!(t.get(0, 1), 0.4);
        assert_eq!(t.get(1, 0), 0.4);
        assert_eq!(t.get(1, 2), 0.4);
        assert_eq!(t.get(0, 2), 0.0);
        assert_eq!(model.support(), &[(0, 1), (1, 2)]);
        assert_eq!(model.s(), 4);
        assert_eq!(model.d(), 3);
    }

    #[test]
    fn chain_zero_coupling_has_no_edges() {
        let model = chain_precision(2, 0.0).unwrap();
        assert_eq!(model.theta(), &DenseSymMatrix::identity(2));
        assert!(model.support().is_empty());
        assert_eq!(model.d(), 1);
    }

    #[test]
    fn chain_rejects_bad_parameters() {
        assert!(chain_precision(1, 0.4).is_err());
        assert!(chain_precision(4, 0.5).is_err());
        assert!(chain_precision(4, -0.6).is_err());
    }

    #[test]
    fn chain_sigma_inverts_theta() {
        let model = chain_precision(4, 0.4).unwrap();
        assert!(identity_residual(model.sigma(), model.theta()) <= 1e-10);
    }

    #[test]
    fn chain_is_spd_across_sizes_and_couplings() {
        for &p in &[2usize, 17, 100, 1000] {
            for &a in &[-0.49, -0.2, 0.0, 0.3, 0.49] {
                assert!(
                    chain_precision(p, a).is_ok(),
                    "chain({p}, {a}) should factor"
                );
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = chain_precision(5, 0.4).unwrap();
        assert_eq!(sample_gaussian(&model, 10, 7), sample_gaussian(&model, 10, 7));
    }

    #[test]
    fn machine_streams_and_trial_seeds_differ() {
        let model = chain_precision(5, 0.4).unwrap();
        assert_ne!(
            sample_machine(&model, 7, 0, 10),
            sample_machine(&model, 7, 1, 10)
        );
        assert_ne!(
            sample_machine(&model, 1, 0, 10),
            sample_machine(&model, 2, 0, 10)
        );
    }

    #[test]
    fn gaussian_sample_matches_machine_zero() {
        let model = chain_precision(4, 0.3).unwrap();
        assert_eq!(sample_gaussian(&model, 6, 11), sample_machine(&model, 11, 0, 6));
    }

    #[test]
    fn identity_model_covariance_concentrates() {
        let model =
            GroundTruthModel::from_precision(DenseSymMatrix::identity(2)).unwrap();
        let x = sample_gaussian(&model, 10_000, 3);
        let c = empirical_covariance(&x);
        let diff = c.max_abs_diff(&DenseSymMatrix::identity(2)).unwrap();
        assert!(diff <= 0.1, "covariance off by {diff}");
    }

    #[test]
    fn chain_covariance_concentrates() {
        let model = chain_precision(10, 0.4).unwrap();
        let x = sample_gaussian(&model, 10_000, 5);
        let c = empirical_covariance(&x);
        let diff = c.max_abs_diff(model.sigma()).unwrap();
        assert!(diff <= 0.1, "covariance off by {diff}");
    }

    #[test]
    fn small_normal_sample_is_near_identity() {
        let model =
            GroundTruthModel::from_precision(DenseSymMatrix::identity(3)).unwrap();
        let x = sample_gaussian(&model, 100, 9);
        let c = empirical_covariance(&x);
        let diff = c.max_abs_diff(&DenseSymMatrix::identity(3)).unwrap();
        assert!(diff <= 0.6, "covariance off by {diff}");
    }

    #[test]
    fn split_is_contiguous_and_invertible() {
        let rows: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64, -(k as f64)]).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let blocks = split_samples(&x, 3).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1].row(0), &[2.0, -2.0]);
        assert_eq!(blocks[1].row(1), &[3.0, -3.0]);
        assert_eq!(DataMatrix::vstack(&blocks).unwrap(), x);
    }

    #[test]
    fn split_single_machine_is_identity() {
        let x = DataMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let blocks = split_samples(&x, 1).unwrap();
        assert_eq!(blocks, vec![x]);
    }

    #[test]
    fn split_rejects_ragged() {
        let x = DataMatrix::from_rows(&vec![vec![1.0]; 5]).unwrap();
        assert!(split_samples(&x, 2).is_err());
    }

    #[test]
    fn block_covariances_pool_to_full_covariance() {
        let model = chain_precision(10, 0.4).unwrap();
        let x = sample_gaussian(&model, 1000, 21);
        let blocks = split_samples(&x, 4).unwrap();
        let pooled = empirical_covariance(&x);
        let mut mean = DenseSymMatrix::zeros(10);
        for b in &blocks {
            mean = mean.add(&empirical_covariance(b)).unwrap();
        }
        mean = mean.scale(0.25);
        let diff = mean.max_abs_diff(&pooled).unwrap();
        assert!(diff <= 0.05, "pooled vs averaged block covariance differ by {diff}");
    }
}
