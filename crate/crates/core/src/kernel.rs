//! The ReLU Gaussian correlation kernel.
//!
//! For unit vectors `u, v` with `α = <u, v>` and `X ~ N(0, I)`,
//!
//! ```text
//! g(α) = E[relu(<u, X>) relu(<v, X>)] = (1/2π) (√(1-α²) + α (π - arccos α))
//! ```
//!
//! which is the degree-1 arc-cosine kernel. It is smooth on `(-1, 1)`,
//! nondecreasing, with `g(-1) = 0`, `g(0) = 1/2π`, `g(1) = 1/2`, and has the
//! power series `1/2π + α/4 + Σ_{k≥1} c_k α^{2k}` with
//! `c_k = ((2k-3)!!)² / (2π (2k)!)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::UnitVector;

/// Inner products this far outside `[-1, 1]` are clamped; beyond it they are rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Largest series order accepted by [`taylor_g`].
pub const MAX_TAYLOR_ORDER: usize = 200;

const TWO_PI: f64 = 2.0 * PI;

/// A kernel evaluation `g(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub alpha: f64,
    pub value: f64,
}

impl KernelValue {
    pub fn eval(alpha: f64) -> Result<Self> {
        let alpha = clamp_alpha(alpha)?;
        Ok(Self { alpha, value: g_unchecked(alpha) })
    }
}

/// Clamp `alpha` into `[-1, 1]` if it is within [`DOMAIN_SLACK`] of the interval.
pub fn clamp_alpha(alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain { value: alpha });
    }
    Ok(alpha.clamp(-1.0, 1.0))
}

pub fn g(alpha: f64) -> Result<f64> {
    clamp_alpha(alpha).map(g_unchecked)
}

pub fn g_prime(alpha: f64) -> Result<f64> {
    clamp_alpha(alpha).map(g_prime_unchecked)
}

/// `g` for an argument already known to lie in `[-1, 1]`.
///
/// With `φ = arccos(-α) = π - arccos(α)` the closed form reads
/// `(sin φ - φ cos φ) / 2π`. Near `α = -1` the two terms cancel to `φ³/3`,
/// so small `φ` switches to the series of `sin φ - φ cos φ`.
#[inline]
pub(crate) fn g_unchecked(alpha: f64) -> f64 {
    let phi = (-alpha).acos();
    let core = if phi < 0.1 {
        let p2 = phi * phi;
        // Σ_k (-1)^{k+1} 2k / (2k+1)! φ^{2k+1}, k = 1..5
        phi * p2
            * (1.0 / 3.0
                + p2 * (-1.0 / 30.0
                    + p2 * (1.0 / 840.0 + p2 * (-1.0 / 45_360.0 + p2 * (1.0 / 3_991_680.0)))))
    } else {
        // sin φ = √(1-α²), cos φ = -α
        (1.0 - alpha * alpha).max(0.0).sqrt() + alpha * phi
    };
    core / TWO_PI
}

#[inline]
pub(crate) fn g_prime_unchecked(alpha: f64) -> f64 {
    (-alpha).acos() / TWO_PI
}

/// Coefficient `c_k` of `α^{2k}` in the power series of `g`, for `k ≥ 1`.
pub fn taylor_coefficient(k: usize) -> f64 {
    assert!(k >= 1, "series coefficients start at k = 1");
    let mut c = 1.0 / (4.0 * PI);
    for j in 1..k {
        let j = j as f64;
        c *= (2.0 * j - 1.0).powi(2) / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
    }
    c
}

/// Partial sum of the power series of `g` through order `α^{2K}`.
pub fn taylor_g(alpha: f64, order: usize) -> Result<f64> {
    let alpha = clamp_alpha(alpha)?;
    if order > MAX_TAYLOR_ORDER {
        return Err(Error::InvalidParameter(format!(
            "series order {order} exceeds the maximum of {MAX_TAYLOR_ORDER}"
        )));
    }
    let a2 = alpha * alpha;
    let mut sum = 1.0 / TWO_PI + alpha / 4.0;
    let mut c = 1.0 / (4.0 * PI);
    let mut power = a2;
    for k in 1..=order {
        sum += c * power;
        let kf = k as f64;
        // c_{k+1} / c_k = (2k-1)² / ((2k+1)(2k+2))
        c *= (2.0 * kf - 1.0).powi(2) / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        power *= a2;
    }
    Ok(sum)
}

/// Matrix of kernel values between two sets of unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

fn check_dims(u: &[UnitVector], v: &[UnitVector]) -> Result<usize> {
    let d = match u.first().or(v.first()) {
        Some(x) => x.dim(),
        None => return Ok(0),
    };
    for x in u.iter().chain(v) {
        if x.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
        }
    }
    Ok(d)
}

/// `[G]_{ij} = g(<u_i, v_j>)`.
pub fn gram(u: &[UnitVector], v: &[UnitVector]) -> Result<GramMatrix> {
    check_dims(u, v)?;
    let mut out = DMatrix::zeros(u.len(), v.len());
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            out[(i, j)] = g(ui.dot(vj))?;
        }
    }
    Ok(GramMatrix { entries: out })
}

/// `G_UU`; exactly symmetric with diagonal `g(1) = 1/2`.
pub fn gram_self(u: &[UnitVector]) -> Result<GramMatrix> {
    check_dims(u, &[])?;
    let m = u.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        out[(i, i)] = 0.5;
        for j in (i + 1)..m {
            let value = g(u[i].dot(&u[j]))?;
            out[(i, j)] = value;
            out[(j, i)] = value;
        }
    }
    Ok(GramMatrix { entries: out })
}
