//! Symmetric scale matrices and their lower-triangular factors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default pivot threshold, relative to the largest diagonal entry.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// Symmetric `n × n` matrix. Only the lower triangle is stored, so symmetry is
/// exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    lower: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, lower: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds from the lower triangle: `f(i, j)` is called for `j <= i`.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.lower[packed(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from dense rows, rejecting non-square or visibly asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i},{j}) is not finite")));
                }
                if (v - rows[j][i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[packed(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[packed(i, j)] = v;
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += (self.get(i, j) - other.get(i, j)).powi(2);
            }
        }
        s.sqrt()
    }

    /// Simultaneous row/column permutation: result `(i, j)` = `self(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, lower: self.lower.iter().map(|v| v * c).collect() }
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Lower-triangular `A` with `A Aᵀ` equal to the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor {
    n: usize,
    entries: Vec<f64>,
    rank: usize,
}

impl LowerFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `A Aᵀ`
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |i, j| (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum())
    }

    /// `out = A y`
    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.entries[i * n..i * n + i + 1];
            out[i] = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(y, &mut out);
        out
    }

    /// Forward substitution for `A y = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        if !self.is_full_rank() {
            return Err(Error::Singular(format!("factor has rank {} < {}", self.rank, self.n)));
        }
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.get(i, k) * y[k];
            }
            y[i] = acc / self.get(i, i);
        }
        Ok(y)
    }

    /// `ln |Σ| = 2 Σ ln a_kk`
    pub fn log_det(&self) -> Result<f64> {
        if !self.is_full_rank() {
            return Err(Error::Singular("determinant of a rank-deficient factor".into()));
        }
        Ok(2.0 * (0..self.n).map(|k| self.get(k, k).ln()).sum::<f64>())
    }
}

/// Cholesky factor by the column recurrences
/// `a_kk = √(σ_kk − Σ_{i<k} a_ki²)`, `a_ik = (σ_ik − Σ_{j<k} a_ij a_kj) / a_kk`.
pub fn cholesky(s: &SymMatrix, tol: f64) -> Result<LowerFactor> {
    let n = s.n();
    let threshold = tol.max(0.0) * s.max_diag();
    let mut a = vec![0.0; n * n];
    for k in 0..n {
        let pivot_sq = s.get(k, k) - (0..k).map(|i| a[k * n + i] * a[k * n + i]).sum::<f64>();
        if !(pivot_sq > threshold) {
            return Err(Error::NotPositiveDefinite { pivot: k, value: pivot_sq });
        }
        let akk = pivot_sq.sqrt();
        a[k * n + k] = akk;
        for i in k + 1..n {
            let dot: f64 = (0..k).map(|j| a[i * n + j] * a[k * n + j]).sum();
            a[i * n + k] = (s.get(i, k) - dot) / akk;
        }
    }
    Ok(LowerFactor { n, entries: a, rank: n })
}

/// Factor of a positive semidefinite matrix through its eigendecomposition.
///
/// Eigenvalues in `[−tol·max_diag, 0)` are clamped to zero. The square-root
/// factor `V Λ^{1/2}` is brought to lower-triangular form with an LQ step.
pub fn psd_factor(s: &SymMatrix, tol: f64) -> Result<LowerFactor> {
    let n = s.n();
    let threshold = tol.max(0.0) * s.max_diag();
    let eig = SymmetricEigen::new(s.to_dmatrix());
    let mut rank = 0;
    let mut root = DMatrix::<f64>::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -threshold {
            return Err(Error::Indefinite { eigenvalue: lambda });
        }
        if lambda > threshold {
            rank += 1;
        }
        let r = lambda.max(0.0).sqrt();
        for i in 0..n {
            root[(i, k)] = eig.eigenvectors[(i, k)] * r;
        }
    }
    // root = L Q  ⇔  rootᵀ = Qᵀ Lᵀ, so Lᵀ is the R of a QR of rootᵀ.
    let r = root.transpose().qr().r();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            entries[i * n + j] = r[(j, i)];
        }
    }
    for j in 0..n {
        if entries[j * n + j] < 0.0 {
            for i in j..n {
                entries[i * n + j] = -entries[i * n + j];
            }
        }
    }
    Ok(LowerFactor { n, entries, rank })
}

/// Cholesky when `s` is numerically positive definite, eigen factor otherwise.
pub fn factor(s: &SymMatrix) -> Result<LowerFactor> {
    match cholesky(s, DEFAULT_PIVOT_TOL) {
        Ok(f) => Ok(f),
        Err(Error::NotPositiveDefinite { .. }) => psd_factor(s, DEFAULT_PIVOT_TOL),
        Err(e) => Err(e),
    }
}

/// `½ (x − μ)ᵀ Σ^{−1} (x − μ)` through a triangular solve.
pub fn mahalanobis_half(factor: &LowerFactor, x: &[f64], mu: &[f64]) -> Result<f64> {
    if x.len() != factor.n() || mu.len() != factor.n() {
        return Err(Error::DimensionMismatch { expected: factor.n(), got: x.len().min(mu.len()) });
    }
    let d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let y = factor.solve(&d)?;
    Ok(0.5 * y.iter().map(|v| v * v).sum::<f64>())
}

/// Random symmetric positive definite matrix `B Bᵀ/n + ridge·I`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, ridge: f64, rng: &mut R) -> SymMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::from_fn(n, |i, j| {
        let dot: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
        dot / n as f64 + if i == j { ridge } else { 0.0 }
    })
}

/// Random rank-`r` PSD matrix `B Bᵀ` with `B` of shape `n × r`.
pub fn random_psd_rank<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> SymMatrix {
    let b: Vec<f64> = (0..n * r).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::from_fn(n, |i, j| (0..r).map(|k| b[i * r + k] * b[j * r + k]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_two_by_two() {
        let s = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let a = cholesky(&s, DEFAULT_PIVOT_TOL).unwrap();
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert!((a.get(1, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_identity() {
        let a = cholesky(&SymMatrix::identity(4), DEFAULT_PIVOT_TOL).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn cholesky_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_spd(5, 0.1, &mut rng);
        let a = cholesky(&s, DEFAULT_PIVOT_TOL).unwrap();
        assert!(a.reconstruct().frobenius_distance(&s) / s.frobenius_norm() < 1e-12);
        assert!((0..5).all(|k| a.get(k, k) > 0.0));
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        match cholesky(&s, DEFAULT_PIVOT_TOL) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn psd_rank_one_and_zero() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let a = psd_factor(&s, DEFAULT_PIVOT_TOL).unwrap();
        assert_eq!(a.rank(), 1);
        assert!(a.reconstruct().frobenius_distance(&s) < 1e-12);
        for i in 0..2 {
            for j in i + 1..2 {
                assert_eq!(a.get(i, j), 0.0);
            }
        }

        let z = psd_factor(&SymMatrix::zeros(3), DEFAULT_PIVOT_TOL).unwrap();
        assert_eq!(z.rank(), 0);
        assert!((0..3).all(|i| (0..3).all(|j| z.get(i, j) == 0.0)));
    }

    #[test]
    fn psd_random_rank_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_psd_rank(5, 3, &mut rng);
        let a = psd_factor(&s, DEFAULT_PIVOT_TOL).unwrap();
        assert_eq!(a.rank(), 3);
        assert!(a.reconstruct().frobenius_distance(&s) / s.frobenius_norm() < 1e-10);
    }

    #[test]
    fn psd_rejects_indefinite() {
        let s = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(psd_factor(&s, DEFAULT_PIVOT_TOL), Err(Error::Indefinite { .. })));
    }

    #[test]
    fn mahalanobis_examples() {
        let a = cholesky(&SymMatrix::identity(2), DEFAULT_PIVOT_TOL).unwrap();
        assert_eq!(mahalanobis_half(&a, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mahalanobis_half(&a, &[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5);
    }

    #[test]
    fn mahalanobis_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_spd(4, 0.2, &mut rng);
        let a = cholesky(&s, DEFAULT_PIVOT_TOL).unwrap();
        let inv = s.to_dmatrix().try_inverse().unwrap();
        let x = [0.3, -1.2, 2.0, 0.7];
        let mu = [0.1, 0.2, -0.3, 0.4];
        let d = nalgebra::DVector::from_iterator(4, x.iter().zip(&mu).map(|(a, b)| a - b));
        let dense = 0.5 * (d.transpose() * inv * &d)[(0, 0)];
        let got = mahalanobis_half(&a, &x, &mu).unwrap();
        assert!(((got - dense) / dense).abs() < 1e-11);
    }

    #[test]
    fn singular_factor_has_no_quadratic_form() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let a = psd_factor(&s, DEFAULT_PIVOT_TOL).unwrap();
        assert!(matches!(mahalanobis_half(&a, &[1.0, 0.0], &[0.0, 0.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn asymmetric_rows_rejected() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 0.5]]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn cholesky_and_eigen_factor_agree(seed in any::<u64>(), n in 1usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_spd(n, 0.05, &mut rng);
                let a = cholesky(&s, DEFAULT_PIVOT_TOL).unwrap();
                let b = psd_factor(&s, DEFAULT_PIVOT_TOL).unwrap();
                prop_assert_eq!(b.rank(), n);
                let d = a.reconstruct().frobenius_distance(&b.reconstruct());
                prop_assert!(d <= 1e-11 * s.frobenius_norm().max(1.0), "d={}", d);
            }

            #[test]
            fn quadratic_form_is_nonnegative(seed in any::<u64>(), n in 1usize..6,
                                             x in proptest::collection::vec(-5.0f64..5.0, 6)) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_spd(n, 0.05, &mut rng);
                let a = cholesky(&s, DEFAULT_PIVOT_TOL).unwrap();
                let mu: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
                let q = mahalanobis_half(&a, &x[..n], &mu).unwrap();
                prop_assert!(q >= 0.0);
                let same = mahalanobis_half(&a, &mu, &mu).unwrap();
                prop_assert!(same.abs() <= 1e-12);
                let moved = x[..n].iter().zip(&mu).any(|(a, b)| (a - b).abs() > 1e-3);
                if moved { prop_assert!(q > 0.0); }
            }
        }
    }
}
