//! Riemannian gradient ascent of the limit objective `1ᵀ G_VV⁺ 1` over `M`
//! points on the sphere.
//!
//! Inside the ascent the pseudo-inverse is replaced by `(G_VV + ρI)⁻¹`, whose
//! gradient is defined everywhere. With `q = (G_VV + ρI)⁻¹ 1`, the Euclidean
//! gradient with respect to `v_i` is `-2 q_i Σ_{j≠i} q_j g'(<v_i, v_j>) v_j`;
//! projecting out the radial part gives the Riemannian gradient, and the
//! update is retracted to the sphere by renormalization. Reported objective
//! values always use the exact pseudo-inverse.

use nalgebra::{DMatrix, DVector};

use crate::compression;
use crate::error::{Error, Result};
use crate::etf;
use crate::kernel;
use crate::linalg;
use crate::network::UnitVector;
use crate::rng;

/// How the `M` starting points are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    RandomSphere,
    Etf,
    Explicit(Vec<UnitVector>),
}

/// Armijo backtracking. Each iteration first tries the previous accepted
/// step times `growth`, then shrinks by `shrink` until
/// `F(new) >= F(old) + slope · t · ‖grad‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub shrink: f64,
    pub slope: f64,
    pub growth: f64,
    pub max_step: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { shrink: 0.5, slope: 1e-4, growth: 2.0, max_step: 1e6, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub m: usize,
    pub d: usize,
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub init: Init,
    pub ridge: f64,
    pub line_search: Option<LineSearch>,
}

/// The size-independent part of a [`GdConfig`], shared across experiment sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct GdOptions {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub ridge: f64,
    pub line_search: Option<LineSearch>,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_iters: 1000,
            grad_tol: 1e-13,
            ridge: 1e-10,
            line_search: Some(LineSearch::default()),
        }
    }
}

impl GdConfig {
    pub fn new(m: usize, d: usize, seed: u64) -> Self {
        Self::with_options(m, d, seed, &GdOptions::default())
    }

    pub fn with_options(m: usize, d: usize, seed: u64, opts: &GdOptions) -> Self {
        Self {
            m,
            d,
            step_size: opts.step_size,
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
            seed,
            init: Init::RandomSphere,
            ridge: opts.ridge,
            line_search: opts.line_search,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(Error::InvalidParameter("M and d must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter("step size must be positive".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidParameter("ridge must be nonnegative".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::InvalidParameter("gradient tolerance must be nonnegative".into()));
        }
        if let Some(ls) = &self.line_search {
            let ok = ls.shrink > 0.0 && ls.shrink < 1.0 && ls.slope > 0.0 && ls.slope < 1.0 && ls.growth >= 1.0;
            if !ok || ls.max_step.is_nan() || ls.max_step < self.step_size {
                return Err(Error::InvalidParameter(format!("bad line search parameters {ls:?}")));
            }
        }
        Ok(())
    }
}

/// State after `iteration` updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdRecord {
    pub iteration: usize,
    /// Exact limit objective `1ᵀ G⁺ 1`.
    pub objective: f64,
    /// Frobenius norm of the Riemannian gradient of the ridged objective.
    pub grad_norm: f64,
    /// Gram distance to a simplex ETF of the same size.
    pub etf_distance: f64,
    /// Step length used to leave this state; zero for the final record.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient norm fell below the tolerance.
    Converged,
    /// The line search found no ascent step; the objective is flat to rounding.
    Stalled,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdTrace {
    pub records: Vec<GdRecord>,
    pub vectors: Vec<UnitVector>,
    pub stop: StopReason,
    pub warnings: Vec<String>,
}

impl GdTrace {
    pub fn last(&self) -> &GdRecord {
        self.records.last().expect("a trace always holds the initial state")
    }

    pub fn final_objective(&self) -> f64 {
        self.last().objective
    }

    pub fn iterations(&self) -> usize {
        self.last().iteration
    }

    /// Value of `field` at `iteration`, holding the last record after an early stop.
    pub fn at(&self, iteration: usize) -> &GdRecord {
        self.records.get(iteration).unwrap_or_else(|| self.last())
    }
}

struct Ridged {
    value: f64,
    grad: Vec<DVector<f64>>,
    grad_norm: f64,
}

fn gram_with_ridge(vs: &[UnitVector], ridge: f64) -> Result<DMatrix<f64>> {
    let mut g = compression::self_gram_matrix(vs)?;
    for i in 0..vs.len() {
        g[(i, i)] += ridge;
    }
    Ok(g)
}

fn solve_ones(g: DMatrix<f64>) -> Result<DVector<f64>> {
    let ones = DVector::from_element(g.nrows(), 1.0);
    let n = g.nrows() as f64;
    let ch = g.cholesky().ok_or(Error::Singular)?;
    let diag = ch.l_dirty().diagonal().map(|x| x * x);
    if diag.min() <= n * f64::EPSILON * diag.max() {
        return Err(Error::Singular);
    }
    Ok(ch.solve(&ones))
}

fn ridged_value(vs: &[UnitVector], ridge: f64) -> Result<f64> {
    Ok(solve_ones(gram_with_ridge(vs, ridge)?)?.sum())
}

fn ridged_state(vs: &[UnitVector], ridge: f64) -> Result<Ridged> {
    let m = vs.len();
    let q = solve_ones(gram_with_ridge(vs, ridge)?)?;
    let coords: Vec<DVector<f64>> = vs.iter().map(|v| DVector::from_column_slice(v.as_slice())).collect();
    let mut grad = Vec::with_capacity(m);
    let mut sq = 0.0;
    for i in 0..m {
        let mut gi = DVector::zeros(vs[i].dim());
        for j in 0..m {
            if j != i {
                let w = q[j] * kernel::g_prime_unchecked(vs[i].dot(&vs[j]).clamp(-1.0, 1.0));
                gi.axpy(w, &coords[j], 1.0);
            }
        }
        gi *= -2.0 * q[i];
        let radial = gi.dot(&coords[i]);
        gi.axpy(-radial, &coords[i], 1.0);
        sq += gi.norm_squared();
        grad.push(gi);
    }
    Ok(Ridged { value: q.sum(), grad, grad_norm: sq.sqrt() })
}

/// Riemannian ascent direction of `1ᵀ (G_VV + ρI)⁻¹ 1` at each vector.
pub fn limit_objective_gradient(vs: &[UnitVector], ridge: f64) -> Result<Vec<Vec<f64>>> {
    Ok(ridged_state(vs, ridge)?.grad.into_iter().map(|g| g.iter().copied().collect()).collect())
}

/// `1ᵀ (G_VV + ρI)⁻¹ 1`
pub fn ridged_objective(vs: &[UnitVector], ridge: f64) -> Result<f64> {
    ridged_value(vs, ridge)
}

fn retract(vs: &[UnitVector], grad: &[DVector<f64>], step: f64) -> Vec<UnitVector> {
    vs.iter()
        .zip(grad)
        .map(|(v, g)| {
            let moved: Vec<f64> = v.as_slice().iter().zip(g.iter()).map(|(x, dx)| x + step * dx).collect();
            let n = linalg::norm(&moved);
            UnitVector::from_raw(moved.into_iter().map(|x| x / n).collect())
        })
        .collect()
}

fn initial_vectors(cfg: &GdConfig) -> Result<Vec<UnitVector>> {
    match &cfg.init {
        Init::RandomSphere => {
            let mut r = rng::seeded(cfg.seed);
            Ok((0..cfg.m).map(|_| UnitVector::random(cfg.d, &mut r)).collect())
        }
        Init::Etf => Ok(etf::make_etf(cfg.m, cfg.d, None)?.into_vectors()),
        Init::Explicit(vs) => {
            if vs.len() != cfg.m {
                return Err(Error::SizeMismatch(format!("{} initial vectors for M = {}", vs.len(), cfg.m)));
            }
            if let Some(v) = vs.iter().find(|v| v.dim() != cfg.d) {
                return Err(Error::DimensionMismatch { expected: cfg.d, got: v.dim() });
            }
            Ok(vs.clone())
        }
    }
}

/// Runs gradient ascent on the limit objective. Deterministic given the config.
pub fn maximize(cfg: &GdConfig) -> Result<GdTrace> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if cfg.m > cfg.d + 1 {
        warnings.push(format!(
            "M = {} exceeds d + 1 = {}; no simplex frame exists in this dimension",
            cfg.m,
            cfg.d + 1
        ));
    }
    let etf_gram = etf::etf_gram(cfg.m);
    let snapshot = |vs: &[UnitVector], iteration: usize, grad_norm: f64, step: f64| -> Result<GdRecord> {
        let g = compression::self_gram_matrix(vs)?;
        Ok(GdRecord {
            iteration,
            objective: compression::limit_objective_of_gram(&g),
            grad_norm,
            etf_distance: (g - &etf_gram).norm(),
            step,
        })
    };

    let mut vs = initial_vectors(cfg)?;
    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let mut step = cfg.step_size;
    let mut stop = StopReason::MaxIters;
    let mut iteration = 0;
    let final_grad_norm = loop {
        let state = ridged_state(&vs, cfg.ridge)?;
        if iteration == cfg.max_iters {
            break state.grad_norm;
        }
        if state.grad_norm < cfg.grad_tol {
            stop = StopReason::Converged;
            break state.grad_norm;
        }
        let next = match &cfg.line_search {
            None => Some((retract(&vs, &state.grad, step), step)),
            Some(ls) => {
                let mut t = (step * ls.growth).min(ls.max_step);
                let target_slope = ls.slope * state.grad_norm * state.grad_norm;
                let mut accepted = None;
                for _ in 0..=ls.max_backtracks {
                    let trial = retract(&vs, &state.grad, t);
                    if ridged_value(&trial, cfg.ridge)? >= state.value + t * target_slope {
                        accepted = Some((trial, t));
                        break;
                    }
                    t *= ls.shrink;
                }
                accepted
            }
        };
        let Some((trial, used)) = next else {
            stop = StopReason::Stalled;
            break state.grad_norm;
        };
        records.push(snapshot(&vs, iteration, state.grad_norm, used)?);
        vs = trial;
        step = used;
        iteration += 1;
    };
    records.push(snapshot(&vs, iteration, final_grad_norm, 0.0)?);
    Ok(GdTrace { records, vectors: vs, stop, warnings })
}

/// Limit objective of two unit vectors with inner product `alpha`.
pub fn m2_objective(alpha: f64) -> Result<f64> {
    let off = kernel::g(alpha)?;
    let g = DMatrix::from_row_slice(2, 2, &[0.5, off, off, 0.5]);
    Ok(compression::limit_objective_of_gram(&g))
}

/// `(α, objective)` on a uniform grid of `[-1, 1]`.
pub fn m2_objective_curve(grid_points: usize) -> Result<Vec<(f64, f64)>> {
    if grid_points < 3 {
        return Err(Error::InvalidParameter("need at least 3 grid points".into()));
    }
    let last = (grid_points - 1) as f64;
    (0..grid_points)
        .map(|k| {
            let alpha = if k + 1 == grid_points { 1.0 } else { -1.0 + 2.0 * k as f64 / last };
            m2_objective(alpha).map(|v| (alpha, v))
        })
        .collect()
}

/// Exhaustive search of the `M = 2` limit objective over the inner product.
/// Returns the maximizing `α` and the maximum.
pub fn brute_force_m2(grid_points: usize) -> Result<(f64, f64)> {
    let curve = m2_objective_curve(grid_points)?;
    Ok(curve.into_iter().fold((f64::NAN, f64::NEG_INFINITY), |best, (a, v)| if v > best.1 { (a, v) } else { best }))
}
