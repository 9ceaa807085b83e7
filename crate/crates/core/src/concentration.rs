//! How fast the correlation vector `s` approaches its mean-field value.
//!
//! Expanding `g` around zero, `[s]_i - μ_a/2π` splits into a linear term
//! `(1/4N) Σ a_n <v_i, w_n>` and higher even-order terms bounded by
//! `(1/N) Σ |a_n| <v_i, w_n>²`. The suprema of both over the sphere have
//! closed forms (a vector norm and a top eigenvalue). The supremum of the
//! full deviation does not, and is estimated from below by multistart
//! ascent.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngCore;
use rayon::prelude::*;

use crate::compression::{self, BoundConstants};
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::network::{sample_target, CoeffLaw, Network, SamplerConfig, TargetNetwork, UnitVector, WeightLaw};
use crate::rng;

/// Number of best probes kept as refinement starts.
pub const REFINE_STARTS: usize = 5;

/// Directions are evaluated in padded batches of this width. Matrix product
/// rounding depends on the batch layout, so a fixed width keeps every
/// direction's value independent of how many others are evaluated.
const BATCH: usize = 8;

/// Splits `cols` into batches of exactly [`BATCH`] columns, padding the last
/// one with copies of its first column. Returns the batches and the number of
/// real columns in each.
fn batches(cols: &[DVector<f64>]) -> Vec<(DMatrix<f64>, usize)> {
    cols.chunks(BATCH)
        .map(|chunk| {
            let mut padded = chunk.to_vec();
            padded.resize(BATCH, chunk[0].clone());
            (DMatrix::from_columns(&padded), chunk.len())
        })
        .collect()
}

/// `sup_{‖v‖=1} |(1/N) Σ a_n <v, w_n>| = ‖(1/N) Σ a_n w_n‖₂`.
pub fn linear_term_sup(w: &Network) -> f64 {
    mean_direction(w).norm()
}

fn mean_direction(w: &Network) -> DVector<f64> {
    w.weight_matrix().tr_mul(&w.coeff_vector()) / w.size() as f64
}

/// `sup_{‖v‖=1} (1/N) Σ |a_n| <v, w_n>²`, the top eigenvalue of `(1/N) Σ |a_n| w_n w_nᵀ`.
pub fn quadratic_term_sup(w: &Network) -> f64 {
    let n = w.size() as f64;
    let mut b = w.weight_matrix();
    for (mut row, a) in b.row_iter_mut().zip(w.coeffs()) {
        row *= (a.abs() / n).sqrt();
    }
    // BᵀB and BBᵀ share their nonzero spectrum; factor the smaller one
    let small = if b.nrows() <= b.ncols() { &b * b.transpose() } else { b.tr_mul(&b) };
    SymmetricEigen::new(small).eigenvalues.max().max(0.0)
}

/// Deviations and kernel derivative sums for a batch of directions (columns of `dirs`).
struct Probe {
    deviation: Vec<f64>,
    signed: Vec<f64>,
    /// Column `k` is `Σ_n (a_n/N) g'(<v_k, w_n>) w_n`.
    slope: DMatrix<f64>,
}

struct DeviationField<'a> {
    weights: DMatrix<f64>,
    scaled_coeffs: DVector<f64>,
    center: f64,
    net: &'a Network,
}

impl<'a> DeviationField<'a> {
    fn new(net: &'a Network, mu_a: f64) -> Self {
        Self {
            weights: net.weight_matrix(),
            scaled_coeffs: net.coeff_vector() / net.size() as f64,
            center: mu_a / (2.0 * PI),
            net,
        }
    }

    fn values(&self, dirs: &DMatrix<f64>) -> Vec<f64> {
        let mut inner = &self.weights * dirs;
        inner.apply(|x| *x = kernel::g_unchecked(x.clamp(-1.0, 1.0)));
        let s = inner.tr_mul(&self.scaled_coeffs);
        s.iter().map(|v| (v - self.center).abs()).collect()
    }

    fn probe(&self, dirs: &DMatrix<f64>) -> Probe {
        let inner = &self.weights * dirs;
        let mut gv = inner.clone();
        gv.apply(|x| *x = kernel::g_unchecked(x.clamp(-1.0, 1.0)));
        let mut gp = inner;
        gp.apply(|x| *x = kernel::g_prime_unchecked(x.clamp(-1.0, 1.0)));
        for (mut col, a) in gp.row_iter_mut().zip(self.scaled_coeffs.iter()) {
            col *= *a;
        }
        let signed: Vec<f64> = gv.tr_mul(&self.scaled_coeffs).iter().map(|s| s - self.center).collect();
        let slope = self.weights.tr_mul(&gp);
        Probe { deviation: signed.iter().map(|x| x.abs()).collect(), signed, slope }
    }
}

/// Lower-bound estimate of `sup_v |(1/N) Σ a_n g(<v, w_n>) - μ_a/2π|`.
///
/// Candidates are `±(1/N) Σ a_n w_n` (normalized) followed by `probes`
/// uniform random directions. Scanning them in that order, every candidate
/// that enters the running top [`REFINE_STARTS`] is refined by
/// `refine_iters` steps of projected ascent with adaptive step length. The
/// result is the maximum over everything evaluated, so enlarging `probes`
/// with the same seed never lowers it.
pub fn s_deviation(w: &TargetNetwork, probes: usize, refine_iters: usize, seed: u64) -> Result<f64> {
    let mu_a = w.mu_a()?;
    let field = DeviationField::new(&w.network, mu_a);
    let d = w.dim();

    let mut candidates: Vec<DVector<f64>> = Vec::with_capacity(probes + 2);
    let mean = mean_direction(field.net);
    if mean.norm() > 0.0 {
        let u = mean.normalize();
        candidates.push(-&u);
        candidates.push(u);
    }
    let mut r = rng::seeded(seed);
    candidates.extend((0..probes).map(|_| DVector::from_vec(UnitVector::random(d, &mut r).into_inner())));
    if candidates.is_empty() {
        return Ok(0.0);
    }

    let raw: Vec<f64> = batches(&candidates)
        .into_iter()
        .flat_map(|(dirs, real)| field.values(&dirs).into_iter().take(real))
        .collect();
    let mut best = raw.iter().cloned().fold(0.0, f64::max);

    let mut top: Vec<f64> = Vec::with_capacity(REFINE_STARTS + 1);
    let mut starts = Vec::new();
    for (k, &dev) in raw.iter().enumerate() {
        if top.len() < REFINE_STARTS || dev > top[top.len() - 1] {
            starts.push(k);
            let pos = top.partition_point(|&t| t >= dev);
            top.insert(pos, dev);
            top.truncate(REFINE_STARTS);
        }
    }
    if refine_iters > 0 && !starts.is_empty() {
        let cols: Vec<DVector<f64>> = starts.iter().map(|&k| candidates[k].clone()).collect();
        for (points, real) in batches(&cols) {
            best = best.max(refine(&field, points, refine_iters, real));
        }
    }
    Ok(best)
}

/// Batched projected ascent of `|s(v) - μ_a/2π|`, each column with its own step.
/// Only the first `real` columns count towards the result.
fn refine(field: &DeviationField<'_>, mut points: DMatrix<f64>, iters: usize, real: usize) -> f64 {
    let k = points.ncols();
    let mut state = field.probe(&points);
    let mut angle = vec![0.05f64; k];
    for _ in 0..iters {
        let mut trial = points.clone();
        for c in 0..k {
            let v = points.column(c);
            let mut grad = state.slope.column(c) * state.signed[c];
            let radial = grad.dot(&v);
            grad.axpy(-radial, &v, 1.0);
            let gn = grad.norm();
            if gn == 0.0 {
                continue;
            }
            let t = angle[c];
            let moved = v * t.cos() + grad * (t.sin() / gn);
            trial.set_column(c, &(moved.normalize()));
        }
        let next = field.probe(&trial);
        for c in 0..k {
            if next.deviation[c] > state.deviation[c] {
                points.set_column(c, &trial.column(c));
                state.deviation[c] = next.deviation[c];
                state.signed[c] = next.signed[c];
                state.slope.set_column(c, &next.slope.column(c));
                angle[c] = (angle[c] * 2.0).min(0.5);
            } else {
                angle[c] *= 0.5;
            }
        }
    }
    state.deviation.iter().take(real).cloned().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateConfig {
    pub ns: Vec<usize>,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    pub weight_law: WeightLaw,
    pub coeff_law: CoeffLaw,
    pub probes: usize,
    pub refine_iters: usize,
    pub bound: BoundConstants,
}

impl RateConfig {
    pub fn new(ns: Vec<usize>, d: usize, trials: usize, seed: u64) -> Self {
        Self {
            ns,
            d,
            trials,
            seed,
            weight_law: WeightLaw::UniformSphere,
            coeff_law: CoeffLaw::Uniform { lo: 0.5, hi: 1.5 },
            probes: 32,
            refine_iters: 10,
            bound: BoundConstants::default(),
        }
    }
}

/// Per-trial measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSample {
    pub n: usize,
    pub trial: usize,
    pub linear_sup: f64,
    pub quadratic_sup: f64,
    pub s_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationRow {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub max_linear_sup: f64,
    pub max_quadratic_sup: f64,
    /// Median over trials of the [`s_deviation`] estimate.
    pub est_s_deviation: f64,
    pub err_bound_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationTable {
    pub rows: Vec<DeviationRow>,
    pub samples: Vec<TrialSample>,
}

impl DeviationTable {
    /// Least-squares slope of `ln est_s_deviation` against `ln N`.
    pub fn loglog_slope(&self) -> Option<f64> {
        if self.rows.len() < 2 {
            return None;
        }
        let x: Vec<f64> = self.rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.est_s_deviation.ln()).collect();
        Some(linalg::fit_slope(&x, &y))
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Sweeps `N`, sampling a fresh target per `(N, trial)` cell from RNG stream
/// `(index of N) << 32 | trial` of `seed`.
pub fn rate_experiment(cfg: &RateConfig) -> Result<DeviationTable> {
    if cfg.ns.is_empty() || cfg.trials == 0 || cfg.d == 0 {
        return Err(Error::InvalidParameter("need a nonempty N list, d > 0 and trials > 0".into()));
    }
    if cfg.ns.windows(2).any(|p| p[0] >= p[1]) || cfg.ns[0] == 0 {
        return Err(Error::InvalidParameter("N values must be positive and strictly increasing".into()));
    }
    cfg.coeff_law.validate()?;

    let cells: Vec<(usize, usize)> =
        (0..cfg.ns.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let samples: Vec<TrialSample> = cells
        .par_iter()
        .map(|&(i, trial)| {
            let mut r = rng::stream(cfg.seed, ((i as u64) << 32) | trial as u64);
            let sampler = SamplerConfig::new(cfg.ns[i], cfg.d, cfg.weight_law, cfg.coeff_law, r.next_u64());
            let target = sample_target(&sampler)?;
            Ok(TrialSample {
                n: cfg.ns[i],
                trial,
                linear_sup: linear_term_sup(&target),
                quadratic_sup: quadratic_term_sup(&target),
                s_deviation: s_deviation(&target, cfg.probes, cfg.refine_iters, r.next_u64())?,
            })
        })
        .collect::<Result<_>>()?;

    let a_bound = cfg.coeff_law.bound();
    let rows = cfg
        .ns
        .iter()
        .map(|&n| {
            let cell: Vec<&TrialSample> = samples.iter().filter(|s| s.n == n).collect();
            let mut devs: Vec<f64> = cell.iter().map(|s| s.s_deviation).collect();
            let b = &cfg.bound;
            Ok(DeviationRow {
                n,
                d: cfg.d,
                trials: cfg.trials,
                max_linear_sup: cell.iter().map(|s| s.linear_sup).fold(0.0, f64::max),
                max_quadratic_sup: cell.iter().map(|s| s.quadratic_sup).fold(0.0, f64::max),
                est_s_deviation: median(&mut devs),
                err_bound_value: compression::err_bound(n, cfg.d, a_bound, b.sigma_w, b.t, b.c)?.value,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DeviationTable { rows, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(n: usize, d: usize, law: CoeffLaw, seed: u64) -> TargetNetwork {
        sample_target(&SamplerConfig::new(n, d, WeightLaw::UniformSphere, law, seed)).unwrap()
    }

    /// Points of a spherical grid in dimension 2 or 3.
    fn sphere_grid(d: usize, steps: usize) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        match d {
            2 => {
                for i in 0..steps {
                    let t = 2.0 * PI * i as f64 / steps as f64;
                    pts.push(vec![t.cos(), t.sin()]);
                }
            }
            3 => {
                for i in 0..=steps {
                    let th = PI * i as f64 / steps as f64;
                    for j in 0..(2 * steps) {
                        let ph = PI * j as f64 / steps as f64;
                        pts.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                    }
                }
            }
            _ => unreachable!(),
        }
        pts
    }

    /// Grid maximum polished by coordinate-free local refinement around the best point.
    fn brute_max(d: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        let grid = sphere_grid(d, if d == 2 { 20_000 } else { 400 });
        let mut best = grid.iter().map(|p| (f(p), p.clone())).fold((f64::MIN, vec![]), |b, x| if x.0 > b.0 { x } else { b });
        let mut r = rng::seeded(0);
        let mut radius = 1e-2;
        for _ in 0..4000 {
            let noise = UnitVector::random(d, &mut r);
            let cand: Vec<f64> = best.1.iter().zip(noise.as_slice()).map(|(a, b)| a + radius * b).collect();
            let n = linalg::norm(&cand);
            let cand: Vec<f64> = cand.iter().map(|x| x / n).collect();
            let v = f(&cand);
            if v > best.0 {
                best = (v, cand);
            } else {
                radius = (radius * 0.999).max(1e-9);
            }
        }
        best.0
    }

    #[test]
    fn linear_sup_simple_cases() {
        let zero = Network::new(vec![UnitVector::basis(3, 0)], vec![0.0]).unwrap();
        assert_eq!(linear_term_sup(&zero), 0.0);
        let one = Network::new(vec![UnitVector::basis(3, 1)], vec![1.0]).unwrap();
        assert!((linear_term_sup(&one) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_sup_simple_cases() {
        let one = Network::new(vec![UnitVector::basis(3, 1)], vec![1.0]).unwrap();
        assert!((quadratic_term_sup(&one) - 1.0).abs() < 1e-14);
        let d = 6;
        let basis = Network::new((0..d).map(|i| UnitVector::basis(d, i)).collect(), vec![1.0; d]).unwrap();
        assert!((quadratic_term_sup(&basis) - 1.0 / d as f64).abs() < 1e-14);
    }

    #[test]
    fn closed_form_suprema_match_grid_search() {
        for (d, seed) in [(2, 1u64), (3, 2), (3, 3)] {
            let t = target(7, d, CoeffLaw::Uniform { lo: -1.0, hi: 2.0 }, seed);
            let lin = |v: &[f64]| {
                t.weights().iter().zip(t.coeffs()).map(|(w, a)| a * linalg::dot(w.as_slice(), v)).sum::<f64>().abs() / 7.0
            };
            let quad = |v: &[f64]| {
                t.weights().iter().zip(t.coeffs()).map(|(w, a)| a.abs() * linalg::dot(w.as_slice(), v).powi(2)).sum::<f64>() / 7.0
            };
            assert!((brute_max(d, lin) - linear_term_sup(&t)).abs() < 1e-6, "d={d}");
            assert!((brute_max(d, quad) - quadratic_term_sup(&t)).abs() < 1e-4, "d={d}");
        }
    }

    #[test]
    fn suprema_scale_linearly_in_coefficients() {
        let t = target(50, 5, CoeffLaw::Uniform { lo: -1.0, hi: 3.0 }, 8);
        let c = 3.5;
        let scaled = t.with_coeffs(t.coeffs().iter().map(|a| a * c).collect()).unwrap();
        assert!((linear_term_sup(&scaled) - c * linear_term_sup(&t)).abs() < 1e-14);
        assert!((quadratic_term_sup(&scaled) - c * quadratic_term_sup(&t)).abs() < 1e-13);
    }

    #[test]
    fn linear_sup_concentrates() {
        let n = 10_000;
        let bound = 4.0 * 1.0 * 2.0 / (n as f64).sqrt();
        let mut ok = 0;
        for seed in 0..100 {
            let t = target(n, 100, CoeffLaw::Constant(1.0), seed);
            if linear_term_sup(&t) < bound {
                ok += 1;
            }
        }
        assert!(ok >= 95);
    }

    #[test]
    fn quadratic_sup_concentrates() {
        let (n, d) = (10_000.0, 100.0);
        let bound = 10.0 * (1.0 / d + 1.0 / n + 1.0 / f64::sqrt(n * d));
        for seed in 0..20 {
            let t = target(10_000, 100, CoeffLaw::Constant(1.0), seed);
            assert!(quadratic_term_sup(&t) < bound);
        }
    }

    #[test]
    fn single_neuron_deviation() {
        let w = UnitVector::basis(3, 0);
        let t = TargetNetwork::with_stats(Network::new(vec![w], vec![2.0 * PI]).unwrap(), 1.0, 2.0 * PI);
        // the candidate set starts with ±w₁
        let dev = s_deviation(&t, 0, 0, 0).unwrap();
        assert!(dev >= PI - 1.0 - 1e-12);
    }

    #[test]
    fn orthogonal_probe_sees_no_deviation() {
        let mu = 1.3;
        let d = 4;
        let ws: Vec<_> = (0..3).map(|i| UnitVector::basis(d, i)).collect();
        let t = TargetNetwork::with_stats(Network::new(ws, vec![mu; 3]).unwrap(), mu, mu);
        let field = DeviationField::new(&t.network, mu);
        let probe = DMatrix::from_column_slice(d, 1, &[0.0, 0.0, 0.0, 1.0]);
        assert!(field.values(&probe)[0].abs() < 1e-15);
    }

    #[test]
    fn deviation_needs_a_mean() {
        let t = TargetNetwork::new(target(5, 2, CoeffLaw::Constant(1.0), 0).network);
        assert!(s_deviation(&t, 4, 2, 0).is_err());
    }

    #[test]
    fn more_probes_never_lower_the_estimate() {
        let t = target(300, 10, CoeffLaw::Uniform { lo: 0.5, hi: 1.5 }, 4);
        let mut prev = 0.0;
        for probes in [0, 1, 3, 8, 20, 60] {
            let est = s_deviation(&t, probes, 8, 9).unwrap();
            assert!(est >= prev, "probes={probes}");
            prev = est;
        }
    }

    #[test]
    fn refinement_only_improves() {
        let t = target(200, 6, CoeffLaw::Uniform { lo: 0.5, hi: 1.5 }, 5);
        let raw = s_deviation(&t, 16, 0, 3).unwrap();
        let refined = s_deviation(&t, 16, 20, 3).unwrap();
        assert!(refined >= raw);
    }

    #[test]
    fn large_target_s_is_near_mean_field() {
        let t = target(100_000, 200, CoeffLaw::Constant(1.0), 1);
        let mut r = rng::seeded(2);
        let v = Network::with_zero_coeffs(vec![UnitVector::random(200, &mut r)]).unwrap();
        let s = compression::s_vector(&t, &v).unwrap();
        assert!((s.values[0] - 1.0 / (2.0 * PI)).abs() < 0.01);
    }

    #[test]
    fn small_rate_experiment() {
        let cfg = RateConfig::new(vec![100], 20, 1, 3);
        let table = rate_experiment(&cfg).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        for x in [row.max_linear_sup, row.max_quadratic_sup, row.est_s_deviation, row.err_bound_value] {
            assert!(x.is_finite() && x >= 0.0);
        }
        assert!(row.est_s_deviation <= 1.5 / 2.0 + 1.0 / (2.0 * PI));
        assert_eq!(table.loglog_slope(), None);
        assert!(rate_experiment(&RateConfig::new(vec![100, 100], 20, 1, 3)).is_err());
        assert!(rate_experiment(&RateConfig::new(vec![], 20, 1, 3)).is_err());
    }

    #[test]
    fn rate_experiment_is_reproducible_and_trends_down() {
        let cfg = RateConfig::new(vec![100, 10_000], 50, 3, 11);
        let a = rate_experiment(&cfg).unwrap();
        assert_eq!(a, rate_experiment(&cfg).unwrap());
        assert!(a.rows[1].est_s_deviation < a.rows[0].est_s_deviation);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
