//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits nonzero if any check fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use relu_compress::compression::{self, BoundConstants};
use relu_compress::concentration::{rate_experiment, RateConfig};
use relu_compress::experiments::{self, CompressMethod, CompressOptions, DimRule, WeightSource};
use relu_compress::linalg::SymmetricPinv;
use relu_compress::network::{sample_target, CoeffLaw, SamplerConfig, WeightLaw};
use relu_compress::{etf, kernel, optimizer, rng, GdOptions, Network, UnitVector};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

fn kernel_monte_carlo() -> Verdict {
    let samples = 1_000_000;
    let mut worst_z = 0.0f64;
    for (k, alpha) in linspace(-1.0, 1.0, 50).into_iter().enumerate() {
        let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
        let mut r = rng::stream(1, k as u64);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let x1: f64 = r.sample(StandardNormal);
            let x2: f64 = r.sample(StandardNormal);
            let p = x1.max(0.0) * (alpha * x1 + beta * x2).max(0.0);
            sum += p;
            sum_sq += p * p;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
        let err = (kernel::g(alpha).unwrap() - mean).abs();
        let z = if se > 0.0 { err / se } else if err == 0.0 { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z);
    }
    verdict(worst_z <= 3.0, format!("max |g - MC| = {worst_z:.3} standard errors over 50 alphas"))
}

fn taylor_consistency() -> Verdict {
    let max_err = linspace(-0.9, 0.9, 1801)
        .into_iter()
        .map(|a| (kernel::taylor_g(a, 50).unwrap() - kernel::g(a).unwrap()).abs())
        .fold(0.0, f64::max);
    let mut c = 1.0 / (2.0 * PI);
    let mut alt = 1.0 / (2.0 * PI) + 0.9 / 4.0;
    for k in 1..=50usize {
        if k >= 2 {
            c *= ((2 * k - 3) as f64).powi(2);
        }
        c /= k as f64;
        alt += c * 0.81f64.powi(k as i32);
    }
    let alt_err = (alt - kernel::g(0.9).unwrap()).abs();
    verdict(
        max_err < 1e-6,
        format!("max |taylor_50 - g| = {max_err:.2e} on |alpha| <= 0.9; the k! variant misses g(0.9) by {alt_err:.2e}"),
    )
}

fn loss_at(w: &Network, v: &Network, b: &[f64]) -> f64 {
    compression::population_loss(w, &v.with_coeffs(b.to_vec()).unwrap()).unwrap().loss
}

fn lemma_optimality() -> Verdict {
    let mut r = rng::seeded(3);
    let (mut worst_grad, mut worst_rel, mut beaten) = (0.0f64, 0.0f64, 0usize);
    for instance in 0..100u64 {
        let n = r.random_range(1..=50);
        let d = r.random_range(1..=10);
        let m = r.random_range(1..=8);
        let cfg = SamplerConfig::new(n, d, WeightLaw::UniformSphere, CoeffLaw::Uniform { lo: -1.0, hi: 2.0 }, instance);
        let target = sample_target(&cfg).unwrap();
        let weights: Vec<UnitVector> = (0..m).map(|_| UnitVector::random(d, &mut r)).collect();
        let v = Network::with_zero_coeffs(weights).unwrap();
        let b_star = compression::optimal_b(&target, &v).unwrap();
        let best = loss_at(&target, &v, b_star.as_slice());

        let scale = 1.0 + b_star.amax();
        for _ in 0..1000 {
            let b: Vec<f64> = (0..m).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect();
            if loss_at(&target, &v, &b) < best {
                beaten += 1;
            }
        }

        let g_vw = kernel::gram(v.weights(), target.weights()).unwrap().into_matrix();
        let g_vv = kernel::gram_self(v.weights()).unwrap().into_matrix();
        let (nf, mf) = (n as f64, m as f64);
        let a = DVector::from_column_slice(target.coeffs());
        let grad = &g_vw * &a * (-2.0 / (nf * mf)) + &g_vv * &b_star * (2.0 / (mf * mf));
        let projected = SymmetricPinv::new(&g_vv).range_projector() * grad;
        worst_grad = worst_grad.max(projected.norm());

        let reduced = compression::reduced_loss(&target, &v).unwrap();
        let scale = best.abs().max(compression::target_energy(&target));
        worst_rel = worst_rel.max((reduced - best).abs() / scale);
    }
    verdict(
        beaten == 0 && worst_grad < 1e-10 && worst_rel < 1e-10,
        format!(
            "{beaten} of 100000 random b beat b*; max projected gradient {worst_grad:.2e}; max reduced-loss mismatch {worst_rel:.2e}"
        ),
    )
}

fn etf_closed_form() -> Verdict {
    let worst = (2..=30)
        .map(|m| {
            let closed = etf::etf_objective(m).unwrap();
            let frame = etf::make_etf(m, m + 5, None).unwrap();
            (closed - compression::limit_objective(frame.vectors()).unwrap()).abs() / closed
        })
        .fold(0.0, f64::max);
    verdict(worst < 1e-12, format!("max relative error {worst:.2e} for M in 2..=30"))
}

fn figure2() -> Verdict {
    let started = Instant::now();
    let ms: Vec<usize> = (5..=30).collect();
    let rows = experiments::fig2(&ms, DimRule::default(), &[0], &GdOptions::default()).unwrap();
    let elapsed = started.elapsed();
    let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    verdict(
        worst < 1e-8 && elapsed < Duration::from_secs(300),
        format!("max |GD - ETF| = {worst:.2e} for M in 5..=30, one run each, in {:.1}s", elapsed.as_secs_f64()),
    )
}

fn figure3() -> Verdict {
    let ms = [5, 10, 15, 30];
    let (mut worst, mut monotone) = (0.0f64, true);
    for seed in 0..10 {
        let f = experiments::fig3(&ms, DimRule::default(), seed, &GdOptions::default()).unwrap();
        for d in &f.distances {
            worst = worst.max(d[f.iterations]);
            monotone &= d[100..].windows(2).all(|p| p[1] <= p[0] + 1e-12);
        }
    }
    verdict(
        worst < 1e-4 && monotone,
        format!("max final distance {worst:.2e} over 10 seeds; nonincreasing after iteration 100: {monotone}"),
    )
}

fn figure4() -> Verdict {
    let seeds: Vec<u64> = (0..10).collect();
    let f = experiments::fig4(&[2, 4, 8], DimRule::default(), &seeds, &GdOptions::default()).unwrap();
    let spreads: Vec<f64> = f.spreads.iter().map(|s| s[f.iterations].max - s[f.iterations].min).collect();
    let worst = spreads.iter().cloned().fold(0.0, f64::max);
    verdict(worst < 1e-8, format!("final spreads for M = 2, 4, 8: {}", sci(&spreads)))
}

fn case_m2() -> Verdict {
    let (alpha, value) = optimizer::brute_force_m2(100_000).unwrap();
    let curve = optimizer::m2_objective_curve(100_000).unwrap();
    let decreasing = curve.windows(2).all(|p| p[1].1 < p[0].1);
    verdict(
        alpha == -1.0 && (value - 4.0).abs() < 1e-12 && decreasing,
        format!("argmax alpha = {alpha}, value = {value}, strictly decreasing: {decreasing}"),
    )
}

fn theorem_rate() -> Verdict {
    let started = Instant::now();
    let table = rate_experiment(&RateConfig::new(vec![100, 1_000, 10_000, 100_000], 200, 10, 0)).unwrap();
    let elapsed = started.elapsed();
    let slope = table.loglog_slope().unwrap();
    let medians: Vec<f64> = table.rows.iter().map(|r| r.est_s_deviation).collect();
    verdict(
        (-0.65..=-0.35).contains(&slope) && elapsed < Duration::from_secs(600),
        format!("slope {slope:.3} (medians {}) in {:.1}s", sci(&medians), elapsed.as_secs_f64()),
    )
}

fn end_to_end() -> Verdict {
    let cfg = SamplerConfig::new(1_000, 100, WeightLaw::UniformSphere, CoeffLaw::Uniform { lo: 0.5, hi: 1.5 }, 0);
    let target = sample_target(&cfg).unwrap();
    let bound = BoundConstants { c: 10.0, t: 4.0, ..BoundConstants::default() };
    let run = |method, samples| {
        let opts = CompressOptions {
            weights: WeightSource::Etf,
            mc_samples: samples,
            seed: 1,
            bound,
            ..CompressOptions::new(10, method)
        };
        experiments::compress(&target, &opts).unwrap().1
    };
    let etf_limit = run(CompressMethod::EtfLimit, 1_000_000);
    let mc = etf_limit.mc.unwrap();
    let z = (etf_limit.loss.loss - mc.estimate).abs() / mc.std_error;
    let exact = run(CompressMethod::ExactB, 0).loss.loss;
    let limit = run(CompressMethod::LimitB, 0);
    let gap = limit.gap.unwrap();
    let ordered = exact <= limit.loss.loss && limit.loss.loss <= exact + gap.gap;
    verdict(
        z <= 3.0 && ordered,
        format!(
            "analytic {:.6e} vs MC {:.6e} ± {:.1e} ({z:.2} se); exact {exact:.6e} <= limit {:.6e} <= exact + {:.3e}",
            etf_limit.loss.loss, mc.estimate, mc.std_error, limit.loss.loss, gap.gap
        ),
    )
}

fn asymptote() -> Verdict {
    let values: Vec<f64> = (2..=1000).map(|m| etf::etf_objective(m).unwrap()).collect();
    let increasing = values.windows(2).all(|p| p[1] > p[0]);
    let rel = (values[values.len() - 1] - 2.0 * PI).abs() / (2.0 * PI);
    verdict(rel < 0.02 && increasing, format!("etf_objective(1000) is {:.3}% from 2π; strictly increasing: {increasing}", 100.0 * rel))
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("kernel matches Monte Carlo", kernel_monte_carlo),
        ("Taylor series consistency", taylor_consistency),
        ("optimal coefficients", lemma_optimality),
        ("ETF closed form", etf_closed_form),
        ("GD reaches the ETF objective", figure2),
        ("GD converges to the ETF", figure3),
        ("initializations agree", figure4),
        ("two-neuron optimum", case_m2),
        ("concentration rate", theorem_rate),
        ("end-to-end compression", end_to_end),
        ("objective asymptote", asymptote),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = check();
        failures += usize::from(!v.pass);
        println!(
            "criterion {:2} {}: {} [{:.1}s] {}",
            k + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            started.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
