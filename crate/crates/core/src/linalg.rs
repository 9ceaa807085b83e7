//! Dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.
///
/// Eigenvalues with `|λ| <= max(n, 1) · ε · max|λ|` are treated as zero.
#[derive(Debug, Clone)]
pub struct SymmetricPinv {
    eigenvectors: DMatrix<f64>,
    /// `1/λ` on the retained spectrum, `0` elsewhere.
    inverse_eigenvalues: DVector<f64>,
    rank: usize,
}

impl SymmetricPinv {
    pub fn new(matrix: &DMatrix<f64>) -> Self {
        assert!(matrix.is_square(), "pseudo-inverse of a non-square matrix");
        let n = matrix.nrows();
        let eig = SymmetricEigen::new(matrix.clone());
        let max = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let cutoff = n.max(1) as f64 * f64::EPSILON * max;
        let mut rank = 0;
        let inverse_eigenvalues = eig.eigenvalues.map(|l| {
            if l.abs() > cutoff && max > 0.0 {
                rank += 1;
                1.0 / l
            } else {
                0.0
            }
        });
        Self { eigenvectors: eig.eigenvectors, inverse_eigenvalues, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `A⁺ x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let coords = self.eigenvectors.tr_mul(x).component_mul(&self.inverse_eigenvalues);
        &self.eigenvectors * coords
    }

    /// `xᵀ A⁺ x`, accumulated in the eigenbasis so it is nonnegative for PSD input.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        let coords = self.eigenvectors.tr_mul(x);
        coords
            .iter()
            .zip(self.inverse_eigenvalues.iter())
            .map(|(c, l)| c * c * l)
            .sum()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.eigenvectors.nrows(), self.eigenvectors.ncols(), |i, j| {
            self.eigenvectors[(i, j)] * self.inverse_eigenvalues[j]
        });
        scaled * self.eigenvectors.transpose()
    }

    /// Orthogonal projector `A A⁺` onto the retained eigenspace.
    pub fn range_projector(&self) -> DMatrix<f64> {
        let n = self.eigenvectors.nrows();
        let mut p = DMatrix::zeros(n, n);
        for (j, l) in self.inverse_eigenvalues.iter().enumerate() {
            if *l != 0.0 {
                let col = self.eigenvectors.column(j);
                p += col * col.transpose();
            }
        }
        p
    }
}

pub fn pinv(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    SymmetricPinv::new(matrix).matrix()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Largest entry of `|QᵀQ - I|`.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    max_abs_diff(&q.tr_mul(q), &DMatrix::identity(n, n))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
