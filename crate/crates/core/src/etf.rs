//! Simplex equiangular tight frames.
//!
//! The `M` standard basis vectors of `R^M`, centered at their centroid and
//! normalized, have pairwise inner products `-1/(M-1)` and sum to zero. They
//! span the `(M-1)`-dimensional complement of `1`; expressing them in the
//! Helmert basis of that complement gives coordinates in `R^{M-1}`, which are
//! then zero-padded to `R^d` and optionally rotated.

use nalgebra::DMatrix;

use crate::compression;
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::network::UnitVector;

/// Rotations are accepted when `|QᵀQ - I|` is below this entrywise.
pub const ROTATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EtfFrame {
    vectors: Vec<UnitVector>,
    coherence: Option<f64>,
}

impl EtfFrame {
    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<UnitVector> {
        self.vectors
    }

    /// Common off-diagonal inner product `-1/(M-1)`; undefined for a single vector.
    pub fn coherence(&self) -> Option<f64> {
        self.coherence
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn make_etf(m: usize, d: usize, rotation: Option<&DMatrix<f64>>) -> Result<EtfFrame> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("frame size and dimension must be positive".into()));
    }
    if m > d + 1 {
        return Err(Error::FrameTooLarge { m, d });
    }
    if let Some(q) = rotation {
        if q.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: q.nrows() });
        }
        let defect = linalg::orthogonality_defect(q);
        if defect > ROTATION_TOL {
            return Err(Error::NotOrthogonal(defect));
        }
    }

    let mut vectors = Vec::with_capacity(m);
    if m == 1 {
        vectors.push(UnitVector::basis(d, 0));
    } else {
        let scale = (m as f64 / (m as f64 - 1.0)).sqrt();
        for i in 0..m {
            let mut coords = vec![0.0; d];
            // Helmert vector h_k = (1, …, 1, -k, 0, …) / √(k(k+1)) with k ones
            for (k, c) in coords.iter_mut().enumerate().take(m - 1) {
                let k1 = (k + 1) as f64;
                let entry = match i.cmp(&(k + 1)) {
                    std::cmp::Ordering::Less => 1.0,
                    std::cmp::Ordering::Equal => -k1,
                    std::cmp::Ordering::Greater => 0.0,
                };
                *c = scale * entry / (k1 * (k1 + 1.0)).sqrt();
            }
            vectors.push(UnitVector::from_raw(coords));
        }
    }
    if let Some(q) = rotation {
        vectors = vectors.iter().map(|v| v.rotate(q)).collect();
    }
    let coherence = (m > 1).then(|| -1.0 / (m as f64 - 1.0));
    Ok(EtfFrame { vectors, coherence })
}

/// Limit objective attained by any `M`-vector ETF: `M / (g(1) + (M-1) g(-1/(M-1)))`.
pub fn etf_objective(m: usize) -> Result<f64> {
    match m {
        0 => Err(Error::InvalidParameter("ETF objective needs M >= 1".into())),
        1 => Ok(1.0 / kernel::g(1.0)?),
        _ => {
            let mf = m as f64;
            Ok(mf / (kernel::g(1.0)? + (mf - 1.0) * kernel::g(-1.0 / (mf - 1.0))?))
        }
    }
}

/// Whether every off-diagonal inner product is within `tol` of `-1/(M-1)`.
/// A single vector is trivially equiangular.
pub fn is_etf(vectors: &[UnitVector], tol: f64) -> bool {
    let m = vectors.len();
    if m < 2 {
        return m == 1;
    }
    let target = -1.0 / (m as f64 - 1.0);
    (0..m).all(|i| ((i + 1)..m).all(|j| (vectors[i].dot(&vectors[j]) - target).abs() <= tol))
}

/// Gram matrix `c₁ 11ᵀ + c₂ I` of any `M`-vector simplex frame, whatever the dimension.
pub fn etf_gram(m: usize) -> DMatrix<f64> {
    if m < 2 {
        return DMatrix::from_element(m, m, 0.5);
    }
    let off = kernel::g_unchecked(-1.0 / (m as f64 - 1.0));
    DMatrix::from_fn(m, m, |i, j| if i == j { 0.5 } else { off })
}

/// Frobenius distance between the kernel Gram matrices of two weight sets.
///
/// Depends on the order of the vectors; against an ETF it does not, since
/// the ETF Gram is permutation invariant.
pub fn gram_distance(v: &[UnitVector], other: &[UnitVector]) -> Result<f64> {
    if v.len() != other.len() {
        return Err(Error::SizeMismatch(format!("{} vs {} vectors", v.len(), other.len())));
    }
    let a = compression::self_gram_matrix(v)?;
    let b = compression::self_gram_matrix(other)?;
    Ok((a - b).norm())
}

/// [`gram_distance`] to any simplex ETF of the same size.
pub fn distance_to_etf(v: &[UnitVector]) -> Result<f64> {
    let a = compression::self_gram_matrix(v)?;
    Ok((a - etf_gram(v.len())).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn antipodal_pair_in_one_dimension() {
        let f = make_etf(2, 1, None).unwrap();
        assert_eq!(f.vectors()[0].as_slice(), &[1.0]);
        assert_eq!(f.vectors()[1].as_slice(), &[-1.0]);
        assert_eq!(f.coherence(), Some(-1.0));
    }

    #[test]
    fn mercedes_frame() {
        let f = make_etf(3, 2, None).unwrap();
        for i in 0..3 {
            assert!((linalg::norm(f.vectors()[i].as_slice()) - 1.0).abs() < 1e-15);
            for j in (i + 1)..3 {
                assert!((f.vectors()[i].dot(&f.vectors()[j]) + 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_simplex_in_ten_dimensions() {
        let f = make_etf(11, 10, None).unwrap();
        let mut pairs = 0;
        for i in 0..11 {
            for j in (i + 1)..11 {
                assert!((f.vectors()[i].dot(&f.vectors()[j]) + 0.1).abs() < 1e-12);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 55);
        let mut sum = vec![0.0; 10];
        for v in f.vectors() {
            for (s, x) in sum.iter_mut().zip(v.as_slice()) {
                *s += x;
            }
        }
        assert!(linalg::norm(&sum) < 1e-10);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(make_etf(5, 3, None), Err(Error::FrameTooLarge { m: 5, d: 3 })));
        assert!(make_etf(0, 3, None).is_err());
        let mut q = DMatrix::identity(3, 3);
        q[(0, 1)] = 0.1;
        assert!(matches!(make_etf(3, 3, Some(&q)), Err(Error::NotOrthogonal(_))));
        let single = make_etf(1, 4, None).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.coherence(), None);
    }

    #[test]
    fn objective_values() {
        assert!((etf_objective(1).unwrap() - 2.0).abs() < 1e-15);
        assert!((etf_objective(2).unwrap() - 4.0).abs() < 1e-15);
        assert!((etf_objective(3).unwrap() - 4.926_126_323_245_373).abs() < 1e-12);
        assert!((etf_objective(30).unwrap() - 6.162_394_282_848_902).abs() < 1e-12);
        assert!(etf_objective(0).is_err());
    }

    #[test]
    fn closed_form_matches_eigendecomposition() {
        for m in 2..=30 {
            let f = make_etf(m, m + 5, None).unwrap();
            let direct = compression::limit_objective(f.vectors()).unwrap();
            let closed = etf_objective(m).unwrap();
            assert!(((direct - closed) / closed).abs() < 1e-12, "M={m}");
        }
    }

    #[test]
    fn objective_increases_towards_two_pi() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut prev = etf_objective(1).unwrap();
        for m in 2..=1000 {
            let r = etf_objective(m).unwrap();
            assert!(r > prev && r < two_pi, "M={m}");
            prev = r;
        }
        assert!(prev > 0.98 * two_pi);
    }

    #[test]
    fn etf_detection() {
        let f = make_etf(5, 8, None).unwrap();
        assert!(is_etf(f.vectors(), 1e-10));

        let mut r = rng::seeded(99);
        let random: Vec<_> = (0..5).map(|_| UnitVector::random(8, &mut r)).collect();
        assert!(!is_etf(&random, 1e-3));

        let mut perturbed = f.clone().into_vectors();
        let mut c = perturbed[0].as_slice().to_vec();
        c[0] += 1e-2;
        perturbed[0] = UnitVector::normalize(c).unwrap();
        assert!(!is_etf(&perturbed, 1e-4));
        assert!(is_etf(&perturbed, 1e-1));
    }

    #[test]
    fn distance_examples() {
        let f = make_etf(3, 2, None).unwrap();
        assert_eq!(gram_distance(f.vectors(), f.vectors()).unwrap(), 0.0);
        let e = UnitVector::basis(2, 0);
        let collapsed = vec![e.clone(), e.clone(), e];
        let expected = (6.0f64).sqrt() * (0.5 - kernel::g(-0.5).unwrap());
        let got = gram_distance(f.vectors(), &collapsed).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 1.0913).abs() < 1e-4);
        assert!(gram_distance(f.vectors(), &collapsed[..2]).is_err());
        assert!(distance_to_etf(f.vectors()).unwrap() < 1e-15);
    }

    #[test]
    fn rotated_frames_share_a_gram() {
        let mut r = rng::seeded(17);
        for (m, d) in [(4, 6), (7, 6), (10, 15)] {
            let q = linalg::random_orthogonal(d, &mut r);
            let a = make_etf(m, d, None).unwrap();
            let b = make_etf(m, d, Some(&q)).unwrap();
            assert!(gram_distance(a.vectors(), b.vectors()).unwrap() < 1e-13);
            assert!(is_etf(b.vectors(), 1e-12));
        }
    }

    #[test]
    fn distance_is_a_pseudometric() {
        let mut r = rng::seeded(23);
        for _ in 0..50 {
            let sets: Vec<Vec<UnitVector>> =
                (0..3).map(|_| (0..5).map(|_| UnitVector::random(4, &mut r)).collect()).collect();
            let d = |i: usize, j: usize| gram_distance(&sets[i], &sets[j]).unwrap();
            assert_eq!(d(0, 1), d(1, 0));
            assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-15);
        }
    }
}
