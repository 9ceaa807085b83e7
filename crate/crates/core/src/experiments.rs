//! Data behind the command-line experiments: the kernel table, the
//! compression pipeline, and the gradient-ascent sweeps comparing the
//! optimized limit objective with the ETF value.
//!
//! Every sweep runs its independent cells in parallel and returns rows in
//! sorted key order, so the output does not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::compression::{self, BoundConstants, LossReport, McEstimate};
use crate::error::{Error, Result};
use crate::etf;
use crate::kernel;
use crate::network::{Network, TargetNetwork, UnitVector};
use crate::optimizer::{self, GdConfig, GdOptions, GdTrace};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub alpha: f64,
    pub g: f64,
    pub g_prime: f64,
    pub taylor_k10: f64,
    pub taylor_k50: f64,
}

/// `points` equally spaced values from -1 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter("a grid needs at least 2 points".into()));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { 1.0 } else { -1.0 + 2.0 * k as f64 / last })
        .collect())
}

pub fn kernel_table(alphas: &[f64]) -> Result<Vec<KernelRow>> {
    alphas
        .iter()
        .map(|&a| {
            Ok(KernelRow {
                alpha: a,
                g: kernel::g(a)?,
                g_prime: kernel::g_prime(a)?,
                taylor_k10: kernel::taylor_g(a, 10)?,
                taylor_k50: kernel::taylor_g(a, 50)?,
            })
        })
        .collect()
}

/// Input dimension used for an `M`-neuron run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimRule {
    /// `d = M + k`
    Offset(usize),
    Fixed(usize),
}

impl Default for DimRule {
    fn default() -> Self {
        DimRule::Offset(5)
    }
}

impl DimRule {
    pub fn dim_for(&self, m: usize) -> usize {
        match *self {
            DimRule::Offset(k) => m + k,
            DimRule::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Row {
    pub m: usize,
    pub d: usize,
    /// Best final objective over the seeds.
    pub gd_objective: f64,
    pub etf_objective: f64,
    pub abs_diff: f64,
}

fn run_cells(ms: &[usize], dim: DimRule, seeds: &[u64], opts: &GdOptions) -> Result<Vec<Vec<GdTrace>>> {
    if ms.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one M and one seed".into()));
    }
    if ms.contains(&0) {
        return Err(Error::InvalidParameter("M must be positive".into()));
    }
    let cells: Vec<(usize, u64)> = ms.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let traces: Vec<GdTrace> = cells
        .par_iter()
        .map(|&(m, seed)| optimizer::maximize(&GdConfig::with_options(m, dim.dim_for(m), seed, opts)))
        .collect::<Result<_>>()?;
    Ok(traces.chunks(seeds.len()).map(|c| c.to_vec()).collect())
}

/// GD optimum versus the closed-form ETF objective for each `M`.
pub fn fig2(ms: &[usize], dim: DimRule, seeds: &[u64], opts: &GdOptions) -> Result<Vec<Fig2Row>> {
    let mut ms = ms.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let runs = run_cells(&ms, dim, seeds, opts)?;
    ms.iter()
        .zip(runs)
        .map(|(&m, traces)| {
            let gd = traces.iter().map(GdTrace::final_objective).fold(f64::NEG_INFINITY, f64::max);
            let etf = etf::etf_objective(m)?;
            Ok(Fig2Row { m, d: dim.dim_for(m), gd_objective: gd, etf_objective: etf, abs_diff: (gd - etf).abs() })
        })
        .collect()
}

/// Gram distance to the ETF at every iteration, one series per `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3 {
    pub ms: Vec<usize>,
    /// `distances[k][t]` for `ms[k]` at iteration `t`; runs that stop early hold their last value.
    pub distances: Vec<Vec<f64>>,
    pub iterations: usize,
}

pub fn fig3(ms: &[usize], dim: DimRule, seed: u64, opts: &GdOptions) -> Result<Fig3> {
    let runs = run_cells(ms, dim, &[seed], opts)?;
    let iterations = opts.max_iters;
    let distances = runs
        .iter()
        .map(|t| (0..=iterations).map(|i| t[0].at(i).etf_distance).collect())
        .collect();
    Ok(Fig3 { ms: ms.to_vec(), distances, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

/// Spread of the objective across independent initializations at every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig4 {
    pub ms: Vec<usize>,
    /// `spreads[k][t]` for `ms[k]` at iteration `t`.
    pub spreads: Vec<Vec<Spread>>,
    pub iterations: usize,
}

pub fn fig4(ms: &[usize], dim: DimRule, seeds: &[u64], opts: &GdOptions) -> Result<Fig4> {
    let runs = run_cells(ms, dim, seeds, opts)?;
    let iterations = opts.max_iters;
    let spreads = runs
        .iter()
        .map(|traces| {
            (0..=iterations)
                .map(|i| {
                    let vals: Vec<f64> = traces.iter().map(|t| t.at(i).objective).collect();
                    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let avg = (vals.iter().sum::<f64>() / vals.len() as f64).clamp(min, max);
                    Spread { min, avg, max }
                })
                .collect()
        })
        .collect();
    Ok(Fig4 { ms: ms.to_vec(), spreads, iterations })
}

/// How the output coefficients of the compressed network are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressMethod {
    /// `b* = M G_VV⁺ s`
    ExactB,
    /// `b̃ = (M μ_a/2π) G_VV⁺ 1`
    LimitB,
    /// ETF weights with `b̃`.
    EtfLimit,
}

impl CompressMethod {
    pub fn uses_limit(&self) -> bool {
        !matches!(self, CompressMethod::ExactB)
    }
}

impl FromStr for CompressMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-b" => Ok(Self::ExactB),
            "limit-b" => Ok(Self::LimitB),
            "etf-limit" => Ok(Self::EtfLimit),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for CompressMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExactB => "exact-b",
            Self::LimitB => "limit-b",
            Self::EtfLimit => "etf-limit",
        })
    }
}

/// Where the compressed network's weights come from (ignored by [`CompressMethod::EtfLimit`]).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Etf,
    /// Uniform on the sphere, drawn from the given seed.
    Random(u64),
    /// The first `M` target neurons.
    TargetPrefix,
    Explicit(Vec<UnitVector>),
}

impl WeightSource {
    pub fn weights(&self, target: &Network, m: usize) -> Result<Vec<UnitVector>> {
        let d = target.dim();
        match self {
            Self::Etf => Ok(etf::make_etf(m, d, None)?.into_vectors()),
            Self::Random(seed) => {
                let mut r = rng::seeded(*seed);
                Ok((0..m).map(|_| UnitVector::random(d, &mut r)).collect())
            }
            Self::TargetPrefix => {
                if m > target.size() {
                    return Err(Error::InvalidParameter(format!("M = {m} exceeds the target's {} neurons", target.size())));
                }
                Ok(target.weights()[..m].to_vec())
            }
            Self::Explicit(vs) => {
                if vs.len() != m {
                    return Err(Error::SizeMismatch(format!("{} weights supplied for M = {m}", vs.len())));
                }
                if let Some(v) = vs.iter().find(|v| v.dim() != d) {
                    return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
                }
                Ok(vs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressOptions {
    pub m: usize,
    pub method: CompressMethod,
    pub weights: WeightSource,
    /// Overrides the target's own coefficient mean.
    pub mu_a: Option<f64>,
    /// Monte Carlo samples for the empirical check; zero skips it.
    pub mc_samples: usize,
    pub seed: u64,
    pub bound: BoundConstants,
}

impl CompressOptions {
    pub fn new(m: usize, method: CompressMethod) -> Self {
        Self {
            m,
            method,
            weights: WeightSource::Etf,
            mu_a: None,
            mc_samples: 100_000,
            seed: 0,
            bound: BoundConstants::default(),
        }
    }
}

/// Bound on `|L - L̃|` for the chosen coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBound {
    pub err: f64,
    pub failure_probability: f64,
    /// `max |b_m|`
    pub b_bound: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressReport {
    pub method: CompressMethod,
    pub loss: LossReport,
    /// Loss at the exact optimum `b*` for the same weights.
    pub optimal_loss: f64,
    pub limit_loss: Option<f64>,
    pub limit_objective: f64,
    pub mc: Option<McEstimate>,
    pub gap: Option<GapBound>,
}

pub fn compress(target: &TargetNetwork, opts: &CompressOptions) -> Result<(Network, CompressReport)> {
    let m = opts.m;
    if m == 0 {
        return Err(Error::InvalidParameter("M must be positive".into()));
    }
    let weights = match opts.method {
        CompressMethod::EtfLimit => etf::make_etf(m, target.dim(), None)?.into_vectors(),
        _ => opts.weights.weights(target, m)?,
    };
    let mu_a = match opts.mu_a {
        Some(mu) => Some(mu),
        None => target.mu_a.filter(|m| *m != 0.0),
    };
    let skeleton = Network::with_zero_coeffs(weights)?;
    let b = match opts.method {
        CompressMethod::ExactB => compression::optimal_b(target, &skeleton)?,
        _ => compression::limit_b(skeleton.weights(), mu_a.ok_or(Error::MissingMeanCoefficient)?)?,
    };
    let compressed = skeleton.with_coeffs(b.iter().copied().collect())?;

    let loss = compression::population_loss(target, &compressed)?;
    let optimal_loss = compression::reduced_loss(target, &compressed)?;
    let with_mu = mu_a.map(|mu| TargetNetwork { network: target.network.clone(), mu_a: Some(mu), coeff_bound: target.coeff_bound });
    let limit_loss = with_mu.as_ref().map(|t| compression::limit_loss(t, &compressed)).transpose()?;
    let limit_objective = compression::limit_objective(compressed.weights())?;
    let mc = (opts.mc_samples > 0)
        .then(|| compression::mc_loss(target, &compressed, opts.mc_samples.max(2), opts.seed))
        .transpose()?;
    let gap = if opts.method.uses_limit() {
        let bc = &opts.bound;
        let e = compression::err_bound(target.size(), target.dim(), target.coeff_bound(), bc.sigma_w, bc.t, bc.c)?;
        let b_bound = b.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let gap = compression::loss_gap_bound(b_bound, m, e.value)?;
        Some(GapBound { err: e.value, failure_probability: e.failure_probability, b_bound, gap })
    } else {
        None
    };
    let report = CompressReport { method: opts.method, loss, optimal_loss, limit_loss, limit_objective, mc, gap };
    Ok((compressed, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{sample_target, CoeffLaw, SamplerConfig, WeightLaw};

    #[test]
    fn kernel_table_endpoints() {
        let rows = kernel_table(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(rows[0].g, 0.0);
        assert!((rows[1].g - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-16);
        assert_eq!(rows[2].g, 0.5);
        assert!(kernel_table(&[1.5]).is_err());
    }

    #[test]
    fn default_grid_is_monotone_and_series_accurate() {
        let grid = uniform_grid(201).unwrap();
        assert_eq!(grid.len(), 201);
        assert_eq!((grid[0], grid[200]), (-1.0, 1.0));
        let rows = kernel_table(&grid).unwrap();
        assert!(rows.windows(2).all(|p| p[1].g >= p[0].g));
        for r in rows.iter().filter(|r| r.alpha.abs() <= 0.9) {
            assert!((r.taylor_k50 - r.g).abs() < 1e-6);
        }
        assert!(uniform_grid(1).is_err());
    }

    #[test]
    fn dim_rules() {
        assert_eq!(DimRule::default().dim_for(7), 12);
        assert_eq!(DimRule::Fixed(40).dim_for(7), 40);
    }

    fn target() -> TargetNetwork {
        let cfg = SamplerConfig::new(60, 12, WeightLaw::UniformSphere, CoeffLaw::Uniform { lo: 0.5, hi: 1.5 }, 4);
        sample_target(&cfg).unwrap()
    }

    #[test]
    fn compressing_onto_the_target_itself_is_lossless() {
        let t = target();
        let mut opts = CompressOptions::new(t.size(), CompressMethod::ExactB);
        opts.weights = WeightSource::TargetPrefix;
        opts.mc_samples = 1000;
        let (_, rep) = compress(&t, &opts).unwrap();
        assert!(rep.loss.loss < 1e-10);
        assert!(rep.gap.is_none());
    }

    #[test]
    fn exact_coefficients_beat_limit_coefficients() {
        let t = target();
        for source in [WeightSource::Etf, WeightSource::Random(3)] {
            let mut exact = CompressOptions::new(5, CompressMethod::ExactB);
            exact.weights = source.clone();
            exact.mc_samples = 0;
            let mut limit = exact.clone();
            limit.method = CompressMethod::LimitB;
            let (_, e) = compress(&t, &exact).unwrap();
            let (_, l) = compress(&t, &limit).unwrap();
            assert!(e.loss.loss <= l.loss.loss + 1e-15);
            assert!((e.loss.loss - e.optimal_loss).abs() < 1e-12);
            let gap = l.gap.unwrap();
            assert!((l.loss.loss - l.limit_loss.unwrap()).abs() <= gap.gap);
        }
    }

    #[test]
    fn etf_limit_requires_room_and_a_mean() {
        let t = target();
        assert!(matches!(
            compress(&t, &CompressOptions::new(14, CompressMethod::EtfLimit)),
            Err(Error::FrameTooLarge { .. })
        ));
        let anonymous = TargetNetwork::new(t.network.clone());
        let opts = CompressOptions::new(3, CompressMethod::EtfLimit);
        assert!(matches!(compress(&anonymous, &opts), Err(Error::MissingMeanCoefficient)));
        let mut with_mu = opts.clone();
        with_mu.mu_a = Some(1.0);
        with_mu.mc_samples = 0;
        assert!(compress(&anonymous, &with_mu).is_ok());
    }

    #[test]
    fn methods_parse() {
        for s in ["exact-b", "limit-b", "etf-limit"] {
            assert_eq!(s.parse::<CompressMethod>().unwrap().to_string(), s);
        }
        assert!("best".parse::<CompressMethod>().is_err());
    }

    #[test]
    fn small_sweeps_have_expected_shapes() {
        let opts = GdOptions { max_iters: 30, ..GdOptions::default() };
        let rows = fig2(&[4, 3], DimRule::default(), &[0, 1], &opts).unwrap();
        assert_eq!(rows.iter().map(|r| r.m).collect::<Vec<_>>(), vec![3, 4]);
        let f3 = fig3(&[3, 4], DimRule::default(), 0, &opts).unwrap();
        assert_eq!(f3.distances.len(), 2);
        assert!(f3.distances.iter().all(|d| d.len() == 31));
        let f4 = fig4(&[2], DimRule::default(), &[0, 1, 2], &opts).unwrap();
        assert!(f4.spreads[0].iter().all(|s| s.min <= s.avg && s.avg <= s.max));
        assert!(fig2(&[], DimRule::default(), &[0], &opts).is_err());
    }
}
