use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::{json, Value};

use relu_compress::compression::BoundConstants;
use relu_compress::concentration::{self, RateConfig};
use relu_compress::experiments::{self, CompressMethod, CompressOptions, DimRule, WeightSource};
use relu_compress::network::{sample_target, CoeffLaw, SamplerConfig, WeightLaw};
use relu_compress::{rng, GdOptions, LineSearch, TargetNetwork};

use crate::args::*;
use crate::config::{parse_csv, parse_list};
use crate::output::{ensure_finite, fmt_f64, manifest_path, seconds, write_text, RunManifest, Table};

/// What a command produced, before the manifest is written.
pub struct Outcome {
    pub outputs: Vec<String>,
    pub results: Option<Value>,
}

fn require_out(out: &Option<String>) -> anyhow::Result<String> {
    out.clone().context("missing --out")
}

pub fn finish<P: Serialize>(
    command: &str,
    params: &P,
    seed: u64,
    out: &str,
    started: Instant,
    outcome: Outcome,
) -> anyhow::Result<()> {
    let mut outputs = outcome.outputs;
    outputs.push(manifest_path(out));
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        params: serde_json::to_value(params)?,
        duration_seconds: seconds(started.elapsed()),
        outputs,
        results: outcome.results,
    };
    manifest.write(out)?;
    Ok(())
}

pub fn kernel_table(mut a: KernelTableArgs) -> anyhow::Result<(KernelTableArgs, Outcome)> {
    let out = require_out(&a.out)?;
    a.seed.get_or_insert(0);
    let alphas = match &a.alphas {
        Some(list) => parse_csv::<f64>(list)?,
        None => experiments::uniform_grid(*a.grid.get_or_insert(201))?,
    };
    let rows = experiments::kernel_table(&alphas)?;
    let mut t = Table::new(["alpha", "g", "g_prime", "taylor_K10", "taylor_K50"]);
    for r in &rows {
        t.push_keyed(fmt_f64(r.alpha), &[r.g, r.g_prime, r.taylor_k10, r.taylor_k50]);
    }
    t.write(&out)?;
    Ok((a, Outcome { outputs: vec![out], results: None }))
}

struct Sampler {
    n: usize,
    dim: usize,
    weight_law: WeightLaw,
    coeff_law: CoeffLaw,
}

fn resolve_sampler(s: &mut SamplerArgs) -> anyhow::Result<Sampler> {
    let n = *s.n.get_or_insert(1000);
    let dim = *s.dim.get_or_insert(100);
    let weight_law: WeightLaw = s.weight_law.get_or_insert_with(|| "uniform-sphere".into()).parse()?;
    let coeff_law: CoeffLaw = s.coeff_law.get_or_insert_with(|| "uniform:0.5:1.5".into()).parse()?;
    Ok(Sampler { n, dim, weight_law, coeff_law })
}

fn draw(s: &Sampler, seed: u64) -> anyhow::Result<TargetNetwork> {
    Ok(sample_target(&SamplerConfig::new(s.n, s.dim, s.weight_law, s.coeff_law, seed))?)
}

pub fn sample(mut a: SampleArgs) -> anyhow::Result<(SampleArgs, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let sampler = resolve_sampler(&mut a.sampler)?;
    let target = draw(&sampler, seed)?;
    write_text(&out, &target.to_json())?;
    Ok((a, Outcome { outputs: vec![out], results: None }))
}

fn resolve_bound(b: &mut BoundArgs) -> BoundConstants {
    let d = BoundConstants::default();
    BoundConstants {
        c: *b.bound_c.get_or_insert(d.c),
        t: *b.bound_t.get_or_insert(d.t),
        sigma_w: *b.sigma_w.get_or_insert(d.sigma_w),
    }
}

pub fn compress(mut a: CompressArgs) -> anyhow::Result<(CompressArgs, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let target = match &a.target {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading target {path}"))?;
            a.sampler = SamplerArgs::default();
            TargetNetwork::from_json(&text).with_context(|| format!("malformed target {path}"))?
        }
        None => draw(&resolve_sampler(&mut a.sampler)?, seed)?,
    };
    let m = *a.m.get_or_insert(10);
    let method: CompressMethod = a.method.get_or_insert_with(|| "etf-limit".into()).parse()?;
    let weights = match a.weights.get_or_insert_with(|| "etf".into()).as_str() {
        "etf" => WeightSource::Etf,
        "random" => WeightSource::Random(rng::derive_seed(seed, 2)),
        "target-prefix" => WeightSource::TargetPrefix,
        other => bail!("unknown weight source `{other}` (expected etf, random or target-prefix)"),
    };
    let opts = CompressOptions {
        m,
        method,
        weights,
        mu_a: a.mu_a,
        mc_samples: *a.samples.get_or_insert(100_000),
        seed: rng::derive_seed(seed, 1),
        bound: resolve_bound(&mut a.bound),
    };
    let (network, rep) = experiments::compress(&target, &opts)?;

    let mut checked = vec![rep.loss.loss, rep.optimal_loss, rep.limit_objective];
    checked.extend(&rep.loss.b_used);
    checked.extend(rep.limit_loss);
    checked.extend(rep.mc.iter().flat_map(|m| [m.estimate, m.std_error]));
    checked.extend(rep.gap.iter().flat_map(|g| [g.err, g.gap]));
    ensure_finite("compression report", checked)?;

    let report = json!({
        "method": method.to_string(),
        "m": m,
        "n": target.size(),
        "d": target.dim(),
        "mu_a": opts.mu_a.or(target.mu_a),
        "loss": rep.loss.loss,
        "target_energy": rep.loss.target_energy,
        "cross_term": rep.loss.cross_term,
        "self_term": rep.loss.self_term,
        "optimal_loss": rep.optimal_loss,
        "limit_loss": rep.limit_loss,
        "limit_objective": rep.limit_objective,
        "mc_loss": rep.mc.map(|m| json!({
            "samples": opts.mc_samples,
            "estimate": m.estimate,
            "std_error": m.std_error,
        })),
        "gap_bound": rep.gap.map(|g| json!({
            "err": g.err,
            "failure_probability": g.failure_probability,
            "b_bound": g.b_bound,
            "gap": g.gap,
        })),
    });
    let report_path = format!("{out}.report.json");
    write_text(&out, &network.to_json())?;
    write_text(&report_path, &serde_json::to_string_pretty(&report)?)?;
    Ok((a, Outcome { outputs: vec![out, report_path], results: None }))
}

fn resolve_gd(g: &mut GdArgs) -> (DimRule, GdOptions) {
    let dim = match g.dim {
        Some(d) => {
            g.dim_offset = None;
            DimRule::Fixed(d)
        }
        None => DimRule::Offset(*g.dim_offset.get_or_insert(5)),
    };
    let d = GdOptions::default();
    let opts = GdOptions {
        step_size: *g.step.get_or_insert(d.step_size),
        max_iters: *g.iters.get_or_insert(d.max_iters),
        grad_tol: *g.grad_tol.get_or_insert(d.grad_tol),
        ridge: *g.ridge.get_or_insert(d.ridge),
        line_search: g.line_search.get_or_insert(d.line_search.is_some()).then(LineSearch::default),
    };
    (dim, opts)
}

fn seeds(seed: u64, trials: usize) -> anyhow::Result<Vec<u64>> {
    if trials == 0 {
        bail!("--trials must be positive");
    }
    Ok((0..trials as u64).map(|k| seed.wrapping_add(k)).collect())
}

pub fn fig2(mut a: Fig2Args) -> anyhow::Result<(Fig2Args, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let ms = parse_list(a.m.get_or_insert_with(|| "2..30".into()))?;
    let seeds = seeds(seed, *a.trials.get_or_insert(10))?;
    let (dim, opts) = resolve_gd(&mut a.gd);
    let rows = experiments::fig2(&ms, dim, &seeds, &opts)?;
    let mut t = Table::new(["M", "gd_objective", "etf_objective", "abs_diff"]);
    for r in &rows {
        t.push(r.m, &[r.gd_objective, r.etf_objective, r.abs_diff]);
    }
    t.write(&out)?;
    let max_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    Ok((a, Outcome { outputs: vec![out], results: Some(json!({ "max_abs_diff": max_diff })) }))
}

pub fn fig3(mut a: Fig3Args) -> anyhow::Result<(Fig3Args, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let ms = parse_list(a.m.get_or_insert_with(|| "5,10,15,30".into()))?;
    let (dim, opts) = resolve_gd(&mut a.gd);
    let f = experiments::fig3(&ms, dim, seed, &opts)?;
    let mut t = Table::new(std::iter::once("iteration".to_string()).chain(ms.iter().map(|m| format!("distance_M{m}"))));
    for i in 0..=f.iterations {
        let row: Vec<f64> = f.distances.iter().map(|d| d[i]).collect();
        t.push(i, &row);
    }
    t.write(&out)?;
    let finals: Vec<f64> = f.distances.iter().map(|d| d[f.iterations]).collect();
    Ok((a, Outcome { outputs: vec![out], results: Some(json!({ "ms": ms, "final_distance": finals })) }))
}

pub fn fig4(mut a: Fig4Args) -> anyhow::Result<(Fig4Args, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let ms = parse_list(a.m.get_or_insert_with(|| "2,4,8".into()))?;
    let seeds = seeds(seed, *a.trials.get_or_insert(10))?;
    let (dim, opts) = resolve_gd(&mut a.gd);
    let f = experiments::fig4(&ms, dim, &seeds, &opts)?;
    let header = std::iter::once("iteration".to_string())
        .chain(ms.iter().flat_map(|m| ["min", "avg", "max"].map(|s| format!("{s}_M{m}"))));
    let mut t = Table::new(header);
    for i in 0..=f.iterations {
        let row: Vec<f64> = f.spreads.iter().flat_map(|s| [s[i].min, s[i].avg, s[i].max]).collect();
        t.push(i, &row);
    }
    t.write(&out)?;
    let spreads: Vec<f64> = f.spreads.iter().map(|s| s[f.iterations].max - s[f.iterations].min).collect();
    Ok((a, Outcome { outputs: vec![out], results: Some(json!({ "ms": ms, "final_spread": spreads })) }))
}

pub fn concentration(mut a: ConcentrationArgs) -> anyhow::Result<(ConcentrationArgs, Outcome)> {
    let out = require_out(&a.out)?;
    let seed = *a.seed.get_or_insert(0);
    let ns = parse_csv::<usize>(a.n.get_or_insert_with(|| "100,1000,10000,100000".into()))?;
    let mut cfg = RateConfig::new(ns, *a.dim.get_or_insert(200), *a.trials.get_or_insert(10), seed);
    cfg.weight_law = a.weight_law.get_or_insert_with(|| cfg.weight_law.to_string()).parse()?;
    cfg.coeff_law = a.coeff_law.get_or_insert_with(|| cfg.coeff_law.to_string()).parse()?;
    cfg.probes = *a.probes.get_or_insert(cfg.probes);
    cfg.refine_iters = *a.refine_iters.get_or_insert(cfg.refine_iters);
    cfg.bound = resolve_bound(&mut a.bound);
    let table = concentration::rate_experiment(&cfg)?;
    let mut t = Table::new(["N", "d", "trials", "max_linear_sup", "max_quadratic_sup", "est_s_deviation", "err_bound"]);
    for r in &table.rows {
        t.push(r.n, &[r.d as f64, r.trials as f64, r.max_linear_sup, r.max_quadratic_sup, r.est_s_deviation, r.err_bound_value]);
    }
    t.write(&out)?;
    let slope = table.loglog_slope();
    ensure_finite("log-log slope", slope)?;
    Ok((a, Outcome { outputs: vec![out], results: Some(json!({ "loglog_slope": slope })) }))
}
