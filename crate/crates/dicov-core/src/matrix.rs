//! Dense symmetric matrices, their sparse coordinate form, and the few
//! factorizations the estimators need (Cholesky, SPD inverse, sample
//! covariance). Storage is plain row-major `Vec<f64>`; the problem sizes
//! here are desk-scale, so no packed or blocked formats.

use crate::error::{Error, Result};

/// A p×p real symmetric matrix. Symmetry is exact and enforced at
/// construction; `set` writes both mirror cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "dimension must be at least 1");
        Self { p, data: vec![0.0; p * p] }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            m.data[i * p + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds from full row-major data, requiring exact symmetry.
    pub fn from_raw(p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if data.len() != p * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {p}x{p} matrix, got {}",
                p * p,
                data.len()
            )));
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if data[i * p + j] != data[j * p + i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut data = Vec::with_capacity(p * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row of length {} in a {p}x{p} matrix",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_raw(p, data)
    }

    /// Fills the upper triangle from `f` and mirrors it, so symmetry is
    /// exact by construction.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m.data[i * p + j] = v;
                m.data[j * p + i] = v;
            }
        }
        m
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    /// Sets both (i,j) and (j,i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
        self.data[j * self.p + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.data[i * self.p + i]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute off-diagonal entry (0 for p = 1).
    pub fn max_abs_offdiag(&self) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                acc = acc.max(self.get(i, j).abs());
            }
        }
        acc
    }

    /// Entrywise max |self − other|.
    pub fn max_abs_diff(&self, other: &DenseSymMatrix) -> Result<f64> {
        check_same_p(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn scale(&self, c: f64) -> DenseSymMatrix {
        DenseSymMatrix {
            p: self.p,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &DenseSymMatrix) -> Result<DenseSymMatrix> {
        check_same_p(self, other)?;
        Ok(DenseSymMatrix {
            p: self.p,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseSymMatrix) -> Result<DenseSymMatrix> {
        check_same_p(self, other)?;
        Ok(DenseSymMatrix {
            p: self.p,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }
}

pub(crate) fn check_same_p(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Result<()> {
    if a.p != b.p {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.p, a.p, b.p, b.p
        )));
    }
    Ok(())
}

/// Raw row-major product of two symmetric matrices (result is generally
/// not symmetric).
fn mul_raw(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Vec<f64> {
    let p = a.p;
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            let aik = a.data[i * p + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * p..(k + 1) * p];
            let orow = &mut out[i * p..(i + 1) * p];
            for j in 0..p {
                orow[j] += aik * brow[j];
            }
        }
    }
    out
}

/// max |(A·B − I)ᵢⱼ| — how far b is from being a's inverse.
pub fn identity_residual(a: &DenseSymMatrix, b: &DenseSymMatrix) -> f64 {
    assert_eq!(a.p, b.p, "identity_residual needs matching dimensions");
    let p = a.p;
    let ab = mul_raw(a, b);
    let mut acc = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            acc = acc.max((ab[i * p + j] - target).abs());
        }
    }
    acc
}

/// a·b·a, symmetrized entrywise to wash out rounding (exact in real
/// arithmetic since a and b are symmetric).
pub fn sym_sandwich(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    check_same_p(a, b)?;
    let p = a.p;
    let ab = mul_raw(a, b);
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            let v = ab[i * p + k];
            if v == 0.0 {
                continue;
            }
            let arow = &a.data[k * p..(k + 1) * p];
            let orow = &mut out[i * p..(i + 1) * p];
            for j in 0..p {
                orow[j] += v * arow[j];
            }
        }
    }
    Ok(DenseSymMatrix::from_fn(p, |i, j| {
        0.5 * (out[i * p + j] + out[j * p + i])
    }))
}

/// Lower-triangular Cholesky factor L with A = L·Lᵀ.
#[derive(Debug, Clone)]
pub struct LowerTriangular {
    p: usize,
    data: Vec<f64>, // row-major, entries above the diagonal are zero
}

impl LowerTriangular {
    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    /// L·Lᵀ, for verifying the factorization.
    pub fn reconstruct(&self) -> DenseSymMatrix {
        let p = self.p;
        DenseSymMatrix::from_fn(p, |i, j| {
            let mut s = 0.0;
            for k in 0..=i.min(j) {
                s += self.data[i * p + k] * self.data[j * p + k];
            }
            s
        })
    }

    /// L·z for a length-p vector.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let p = self.p;
        assert_eq!(z.len(), p);
        (0..p)
            .map(|i| {
                self.data[i * p..i * p + i + 1]
                    .iter()
                    .zip(z)
                    .map(|(l, zk)| l * zk)
                    .sum()
            })
            .collect()
    }

    /// log det(L·Lᵀ) = 2·Σ log Lᵢᵢ.
    pub fn log_det(&self) -> f64 {
        (0..self.p)
            .map(|i| self.data[i * self.p + i].ln())
            .sum::<f64>()
            * 2.0
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseSymMatrix) -> Result<LowerTriangular> {
    let p = a.p();
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(LowerTriangular { p, data: l })
}

/// Inverse of a symmetric positive definite matrix via Cholesky:
/// A⁻¹ = L⁻ᵀ·L⁻¹, symmetrized entrywise.
pub fn invert_spd(a: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    let p = a.p();
    let l = cholesky(a)?;
    // Invert L by forward substitution, column by column.
    let mut linv = vec![0.0f64; p * p];
    for j in 0..p {
        linv[j * p + j] = 1.0 / l.data[j * p + j];
        for i in (j + 1)..p {
            let mut s = 0.0;
            for k in j..i {
                s += l.data[i * p + k] * linv[k * p + j];
            }
            linv[i * p + j] = -s / l.data[i * p + i];
        }
    }
    // (L⁻¹)ᵀ·(L⁻¹): entry (i,j) = Σ_k Linv[k,i]·Linv[k,j].
    Ok(DenseSymMatrix::from_fn(p, |i, j| {
        let mut s = 0.0;
        for k in i.max(j)..p {
            s += linv[k * p + i] * linv[k * p + j];
        }
        s
    }))
}

/// An n×p data matrix, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>, // row-major
}

impl DataMatrix {
    pub fn from_raw(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter(
                "data matrix needs n >= 1 and p >= 1".into(),
            ));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for an {n}x{p} data matrix, got {}",
                n * p,
                data.len()
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter("no rows".into()));
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Self::from_raw(n, p, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.p..(k + 1) * self.p]
    }

    /// Stacks blocks vertically, preserving row order.
    pub fn vstack(blocks: &[DataMatrix]) -> Result<DataMatrix> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("no blocks to stack".into()));
        }
        let p = blocks[0].p;
        let mut data = Vec::new();
        let mut n = 0;
        for b in blocks {
            if b.p != p {
                return Err(Error::DimensionMismatch("blocks disagree on p".into()));
            }
            data.extend_from_slice(&b.data);
            n += b.n;
        }
        DataMatrix::from_raw(n, p, data)
    }
}

/// Sample covariance with mean-centering and 1/n scaling.
pub fn empirical_covariance(x: &DataMatrix) -> DenseSymMatrix {
    let (n, p) = (x.n, x.p);
    let mut mean = vec![0.0f64; p];
    for k in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(k)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0f64; p * p];
    let mut centered = vec![0.0f64; p];
    for k in 0..n {
        for (c, (v, m)) in centered.iter_mut().zip(x.row(k).iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..p {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..p {
                cov[i * p + j] += ci * centered[j];
            }
        }
    }
    let scale = 1.0 / n as f64;
    DenseSymMatrix::from_fn(p, |i, j| cov[i * p + j] * scale)
}

/// Upper-triangle coordinate form of a symmetric matrix: entries (i, j, v)
/// with i ≤ j, sorted by (i, j), no duplicates, no stored zeros. An entry
/// with i < j stands for both (i,j) and (j,i).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    p: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseSymMatrix {
    pub fn new(p: usize, entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut prev: Option<(u32, u32)> = None;
        for &(i, j, v) in &entries {
            if i > j {
                return Err(Error::InvariantViolation(format!(
                    "lower-triangle entry ({i},{j})"
                )));
            }
            if j as usize >= p {
                return Err(Error::InvariantViolation(format!(
                    "index ({i},{j}) out of range for p={p}"
                )));
            }
            if v == 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "stored zero at ({i},{j})"
                )));
            }
            if let Some(prev) = prev {
                if (i, j) <= prev {
                    return Err(Error::InvariantViolation(format!(
                        "entries not strictly sorted at ({i},{j})"
                    )));
                }
            }
            prev = Some((i, j));
        }
        Ok(Self { p, entries })
    }

    /// Collects the nonzero upper triangle of a dense matrix.
    pub fn from_dense(m: &DenseSymMatrix) -> Self {
        let p = m.p();
        let mut entries = Vec::new();
        for i in 0..p {
            for j in i..p {
                let v = m.get(i, j);
                if v != 0.0 {
                    entries.push((i as u32, j as u32, v));
                }
            }
        }
        Self { p, entries }
    }

    pub fn to_dense(&self) -> DenseSymMatrix {
        let mut m = DenseSymMatrix::zeros(self.p);
        for &(i, j, v) in &self.entries {
            m.set(i as usize, j as usize, v);
        }
        m
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value at (i,j) using the symmetric completion; 0 when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j) as u32, i.max(j) as u32);
        match self
            .entries
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
        {
            Ok(idx) => self.entries[idx].2,
            Err(_) => 0.0,
        }
    }

    pub fn count_diag(&self) -> usize {
        self.entries.iter().filter(|&&(i, j, _)| i == j).count()
    }

    pub fn count_offdiag(&self) -> usize {
        self.entries.iter().filter(|&&(i, j, _)| i != j).count()
    }

    /// Upper-triangle off-diagonal index pairs, for support comparisons.
    pub fn offdiag_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries
            .iter()
            .filter(|&&(i, j, _)| i != j)
            .map(|&(i, j, _)| (i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cholesky_identity() {
        let a = DenseSymMatrix::identity(2);
        let l = cholesky(&a).unwrap();
        assert_eq!(l.get(0, 0), 1.0);
        assert_eq!(l.get(1, 1), 1.0);
        assert_eq!(l.get(1, 0), 0.0);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = DenseSymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let diff = l.reconstruct().max_abs_diff(&a).unwrap();
        assert!(diff <= 1e-12, "reconstruction error {diff}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseSymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn invert_diag() {
        let a = DenseSymMatrix::from_diag(&[2.0, 4.0]);
        let b = invert_spd(&a).unwrap();
        assert!(approx(b.get(0, 0), 0.5, 1e-14));
        assert!(approx(b.get(1, 1), 0.25, 1e-14));
        assert_eq!(b.get(0, 1), 0.0);
    }

    #[test]
    fn invert_2x2_closed_form() {
        let a = DenseSymMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 1.0]]).unwrap();
        let b = invert_spd(&a).unwrap();
        let det = 0.84;
        assert!(approx(b.get(0, 0), 1.0 / det, 1e-12));
        assert!(approx(b.get(0, 1), -0.4 / det, 1e-12));
        // a·b should be the identity
        let prod = sym_sandwich(&a, &b).unwrap(); // a·b·a = a when b = a⁻¹
        assert!(prod.max_abs_diff(&a).unwrap() <= 1e-12);
    }

    #[test]
    fn invert_identity() {
        let a = DenseSymMatrix::identity(5);
        let b = invert_spd(&a).unwrap();
        assert!(b.max_abs_diff(&a).unwrap() <= 1e-15);
    }

    #[test]
    fn covariance_single_row_is_zero() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let c = empirical_covariance(&x);
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn covariance_plus_minus_one() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let c = empirical_covariance(&x);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(c.get(1, 1), 0.0);
    }

    #[test]
    fn sparse_rejects_bad_entries() {
        assert!(SparseSymMatrix::new(3, vec![(1, 0, 1.0)]).is_err()); // lower triangle
        assert!(SparseSymMatrix::new(3, vec![(0, 3, 1.0)]).is_err()); // out of range
        assert!(SparseSymMatrix::new(3, vec![(0, 1, 0.0)]).is_err()); // stored zero
        assert!(SparseSymMatrix::new(3, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err()); // duplicate
        assert!(SparseSymMatrix::new(3, vec![(1, 2, 1.0), (0, 1, 2.0)]).is_err()); // unsorted
    }

    #[test]
    fn sparse_dense_round_trip() {
        let m = DenseSymMatrix::from_rows(&[
            vec![1.0, 0.0, -0.3],
            vec![0.0, 2.0, 0.0],
            vec![-0.3, 0.0, 0.0],
        ])
        .unwrap();
        let s = SparseSymMatrix::from_dense(&m);
        assert_eq!(s.to_dense(), m);
        assert_eq!(s.get(2, 0), -0.3);
        assert_eq!(s.get(2, 2), 0.0);
    }

    #[test]
    fn vstack_preserves_rows() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = DataMatrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = DataMatrix::vstack(&[a, b]).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.row(2), &[5.0, 6.0]);
    }
}
