//! Population loss between a target and a compressed network, its minimizer
//! over the output coefficients, and the limit loss obtained by replacing the
//! target-dependent correlation vector with its mean-field value.
//!
//! With `G_WW`, `G_VW`, `G_VV` the kernel Gram matrices and
//! `s = (1/N) G_VW a`, the loss under `X ~ N(0, I)` is
//!
//! ```text
//! L(V, W) = (1/N²) aᵀ G_WW a - (2/M) bᵀ s + (1/M²) bᵀ G_VV b.
//! ```
//!
//! It is minimized by `b* = M G_VV⁺ s`, leaving `(1/N²) aᵀ G_WW a - sᵀ G_VV⁺ s`.
//! Replacing `s` by `(μ_a/2π) 1` gives the limit loss, whose minimizer is
//! `b̃ = (M μ_a / 2π) G_VV⁺ 1` and whose value only depends on `V` through
//! the limit objective `1ᵀ G_VV⁺ 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{self, GramMatrix};
use crate::linalg::SymmetricPinv;
use crate::network::{Network, TargetNetwork, UnitVector};
use crate::rng;

/// Loss below this is rounding noise and reported as zero.
pub const LOSS_FLOOR: f64 = -1e-10;

/// Row block used when streaming `aᵀ G_WW a` for large targets.
const ENERGY_BLOCK: usize = 256;

/// Samples per Monte Carlo chunk; each chunk draws from its own RNG stream.
pub const MC_CHUNK: usize = 4096;

/// The three terms of the population loss and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub b_used: Vec<f64>,
    /// `(1/N²) aᵀ G_WW a`
    pub target_energy: f64,
    /// `(1/(NM)) bᵀ G_VW a`
    pub cross_term: f64,
    /// `(1/M²) bᵀ G_VV b`
    pub self_term: f64,
}

/// `s = (1/N) G_VW a`, with the mean-field value `μ_a/2π` when the coefficient mean is known.
#[derive(Debug, Clone, PartialEq)]
pub struct SVector {
    pub values: DVector<f64>,
    pub mean_target: Option<f64>,
}

impl SVector {
    /// `max_i |s_i - μ_a/2π|`
    pub fn max_deviation(&self) -> Option<f64> {
        self.mean_target
            .map(|m| self.values.iter().fold(0.0f64, |acc, s| acc.max((s - m).abs())))
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

fn same_dim(w: &Network, v: &Network) -> Result<()> {
    if w.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: v.dim() });
    }
    Ok(())
}

/// Kernel values between the rows of two weight matrices.
fn cross_gram(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut inner = left * right.transpose();
    inner.apply(|x| *x = kernel::g_unchecked(x.clamp(-1.0, 1.0)));
    inner
}

pub(crate) fn self_gram_matrix(weights: &[UnitVector]) -> Result<DMatrix<f64>> {
    kernel::gram_self(weights).map(GramMatrix::into_matrix)
}

/// `(1/N²) aᵀ G_WW a`, streamed in row blocks.
pub fn target_energy(w: &Network) -> f64 {
    let n = w.size();
    let wm = w.weight_matrix();
    let a = w.coeff_vector();
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let rows = ENERGY_BLOCK.min(n - start);
        let block = cross_gram(&wm.rows(start, rows).into_owned(), &wm);
        total += a.rows(start, rows).dot(&(block * &a));
        start += rows;
    }
    total / (n as f64 * n as f64)
}

fn s_values(w: &Network, v_weights: &DMatrix<f64>) -> DVector<f64> {
    let g_vw = cross_gram(v_weights, &w.weight_matrix());
    g_vw * w.coeff_vector() / w.size() as f64
}

pub fn s_vector(w: &TargetNetwork, v: &Network) -> Result<SVector> {
    same_dim(w, v)?;
    let mean_target = w.mu_a().ok().map(|m| m / (2.0 * PI));
    Ok(SVector { values: s_values(w, &v.weight_matrix()), mean_target })
}

/// Exact population loss using the coefficients stored in `v`.
pub fn population_loss(w: &Network, v: &Network) -> Result<LossReport> {
    same_dim(w, v)?;
    let mf = v.size() as f64;
    let b = v.coeff_vector();
    let target_energy = target_energy(w);
    let s = s_values(w, &v.weight_matrix());
    let cross_term = b.dot(&s) / mf;
    let g_vv = self_gram_matrix(v.weights())?;
    let self_term = b.dot(&(&g_vv * &b)) / (mf * mf);
    let raw = target_energy - 2.0 * cross_term + self_term;
    debug_assert!(raw >= LOSS_FLOOR * (1.0 + target_energy + self_term), "negative loss {raw}");
    Ok(LossReport {
        loss: raw.max(0.0),
        b_used: v.coeffs().to_vec(),
        target_energy,
        cross_term,
        self_term,
    })
}

/// `b* = M G_VV⁺ s`, the minimizer of the population loss for fixed `V` weights.
pub fn optimal_b(w: &Network, v: &Network) -> Result<DVector<f64>> {
    same_dim(w, v)?;
    let s = s_values(w, &v.weight_matrix());
    let pinv = SymmetricPinv::new(&self_gram_matrix(v.weights())?);
    finite("b*", pinv.apply(&s) * v.size() as f64)
}

fn finite(what: &str, b: DVector<f64>) -> Result<DVector<f64>> {
    if b.iter().all(|x| x.is_finite()) {
        Ok(b)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Loss at `b*`: `(1/N²) aᵀ G_WW a - sᵀ G_VV⁺ s`.
pub fn reduced_loss(w: &Network, v: &Network) -> Result<f64> {
    same_dim(w, v)?;
    let s = s_values(w, &v.weight_matrix());
    let pinv = SymmetricPinv::new(&self_gram_matrix(v.weights())?);
    Ok((target_energy(w) - pinv.quadratic_form(&s)).max(0.0))
}

/// The loss with `s` replaced by `(μ_a/2π) 1`, using the coefficients stored in `v`.
pub fn limit_loss(w: &TargetNetwork, v: &Network) -> Result<f64> {
    same_dim(w, v)?;
    let mu_a = w.mu_a()?;
    let mf = v.size() as f64;
    let b = v.coeff_vector();
    let g_vv = self_gram_matrix(v.weights())?;
    Ok(target_energy(w) - 2.0 / mf * mu_a / (2.0 * PI) * b.sum() + b.dot(&(&g_vv * &b)) / (mf * mf))
}

/// `b̃ = (M μ_a / 2π) G_VV⁺ 1`.
pub fn limit_b(v_weights: &[UnitVector], mu_a: f64) -> Result<DVector<f64>> {
    if mu_a == 0.0 || !mu_a.is_finite() {
        return Err(Error::MissingMeanCoefficient);
    }
    let m = v_weights.len();
    let pinv = SymmetricPinv::new(&self_gram_matrix(v_weights)?);
    finite("b̃", pinv.apply(&DVector::from_element(m, 1.0)) * (m as f64 * mu_a / (2.0 * PI)))
}

/// `1ᵀ G_VV⁺ 1`
pub fn limit_objective(v_weights: &[UnitVector]) -> Result<f64> {
    Ok(limit_objective_of_gram(&self_gram_matrix(v_weights)?))
}

pub fn limit_objective_of_gram(g_vv: &DMatrix<f64>) -> f64 {
    let ones = DVector::from_element(g_vv.nrows(), 1.0);
    SymmetricPinv::new(g_vv).quadratic_form(&ones)
}

/// Monte Carlo estimate of `E[(f_W(X) - f_V(X))²]`.
///
/// Samples are drawn in chunks of [`MC_CHUNK`]; chunk `k` uses RNG stream `k`
/// of `seed`, and chunk statistics are merged in chunk order, so the result
/// does not depend on the thread count.
pub fn mc_loss(w: &Network, v: &Network, samples: usize, seed: u64) -> Result<McEstimate> {
    same_dim(w, v)?;
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
    }
    let d = w.dim();
    let (wt, vt) = (w.weight_matrix().transpose(), v.weight_matrix().transpose());
    let a = w.coeff_vector() / w.size() as f64;
    let b = v.coeff_vector() / v.size() as f64;
    let chunks = samples.div_ceil(MC_CHUNK);

    let stats: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let rows = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut r = rng::stream(seed, k as u64);
            // row-major fill so each sample's coordinates are consecutive draws
            let x = DMatrix::from_row_iterator(rows, d, (0..rows * d).map(|_| StandardNormal.sample(&mut r)));
            let fw = relu(&x * &wt) * &a;
            let fv = relu(&x * &vt) * &b;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (i, (p, q)) in fw.iter().zip(fv.iter()).enumerate() {
                let diff = p - q;
                let y = diff * diff;
                let delta = y - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (y - mean);
            }
            (rows as f64, mean, m2)
        })
        .collect();

    let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (c, m, s) in stats {
        let total = count + c;
        let delta = m - mean;
        mean += delta * c / total;
        m2 += s + delta * delta * count * c / total;
        count = total;
    }
    let var = m2 / (count - 1.0);
    Ok(McEstimate { estimate: mean, std_error: (var / count).sqrt() })
}

fn relu(mut m: DMatrix<f64>) -> DMatrix<f64> {
    m.apply(|x| *x = x.max(0.0));
    m
}

/// Constants of the concentration bound, which are not determined numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c: f64,
    pub t: f64,
    pub sigma_w: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { c: 1.0, t: 4.0, sigma_w: 2.0 }
    }
}

/// Value of the `s`-deviation bound and the probability with which it may fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrBound {
    pub value: f64,
    /// `4 e^{-t²/16} + 2 e^{-d}`
    pub failure_probability: f64,
}

/// `C · A · (σ_W²/d + t (1 + σ_W) / √N)`.
pub fn err_bound(n: usize, d: usize, a_bound: f64, sigma_w: f64, t: f64, c: f64) -> Result<ErrBound> {
    let reals = [a_bound, sigma_w, t, c];
    if n == 0 || d == 0 || reals.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidParameter(
            "error bound arguments must be positive and finite".into(),
        ));
    }
    let (nf, df) = (n as f64, d as f64);
    let value = c * a_bound * (sigma_w * sigma_w / df + t * (1.0 + sigma_w) / nf.sqrt());
    let failure_probability = 4.0 * (-t * t / 16.0).exp() + 2.0 * (-df).exp();
    Ok(ErrBound { value, failure_probability })
}

/// `B · M · err`, bounding `|L - L̃|` when `|b_m| <= B`.
pub fn loss_gap_bound(b_bound: f64, m: usize, err: f64) -> Result<f64> {
    if m == 0 || !(b_bound.is_finite() && b_bound > 0.0) || !(err.is_finite() && err > 0.0) {
        return Err(Error::InvalidParameter("gap bound arguments must be positive".into()));
    }
    Ok(b_bound * m as f64 * err)
}
