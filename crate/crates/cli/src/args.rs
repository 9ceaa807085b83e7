use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "relu-compress", version, about = "Compress two-layer ReLU networks and run the accompanying experiments")]
pub struct Cli {
    /// JSON file with default values for the subcommand's flags; flags given on the command line win.
    /// A run manifest is also accepted, in which case its recorded parameters are used.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the kernel, its derivative and two truncated series.
    KernelTable(KernelTableArgs),
    /// Sample a target network and write it as JSON.
    Sample(SampleArgs),
    /// Compress a target network to M neurons.
    Compress(CompressArgs),
    /// Optimized limit objective against the ETF value for a range of M.
    Fig2(Fig2Args),
    /// Distance of the gradient-ascent iterate to the ETF at every iteration.
    Fig3(Fig3Args),
    /// Spread of the objective across initializations at every iteration.
    Fig4(Fig4Args),
    /// Deviation of the s vector from its mean-field value as N grows.
    Concentration(ConcentrationArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::KernelTable(_) => "kernel-table",
            Self::Sample(_) => "sample",
            Self::Compress(_) => "compress",
            Self::Fig2(_) => "fig2",
            Self::Fig3(_) => "fig3",
            Self::Fig4(_) => "fig4",
            Self::Concentration(_) => "concentration",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct KernelTableArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<String>,
    /// Accepted for uniformity; the table is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated alpha values; overrides --grid.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    /// Number of equally spaced points on [-1, 1].
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SamplerArgs {
    /// Number of target neurons.
    #[arg(long)]
    pub n: Option<usize>,
    /// Input dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// uniform-sphere, normalized-gaussian or scaled-rademacher.
    #[arg(long)]
    pub weight_law: Option<String>,
    /// constant:MU, uniform:LO:HI or two-point:P:X1:X2.
    #[arg(long)]
    pub coeff_law: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SampleArgs {
    /// Output JSON path.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BoundArgs {
    /// Constant C of the concentration bound.
    #[arg(long)]
    pub bound_c: Option<f64>,
    /// Deviation level t of the concentration bound.
    #[arg(long)]
    pub bound_t: Option<f64>,
    /// Sub-Gaussian parameter of the weight law.
    #[arg(long)]
    pub sigma_w: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct CompressArgs {
    /// Output path for the compressed network JSON; the report goes to <out>.report.json.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target network JSON; when absent a target is sampled from the sampler flags.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    /// Number of neurons in the compressed network.
    #[arg(long)]
    pub m: Option<usize>,
    /// exact-b, limit-b or etf-limit.
    #[arg(long)]
    pub method: Option<String>,
    /// Weights for exact-b and limit-b: etf, random or target-prefix.
    #[arg(long)]
    pub weights: Option<String>,
    /// Coefficient mean, overriding the target's.
    #[arg(long)]
    pub mu_a: Option<f64>,
    /// Monte Carlo samples for the empirical loss; 0 skips it.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub bound: BoundArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct GdArgs {
    /// Fixed input dimension; by default d = M + dim-offset.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub dim_offset: Option<usize>,
    /// Gradient-ascent iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Initial step size.
    #[arg(long)]
    pub step: Option<f64>,
    /// Ridge added to the Gram matrix inside the gradient.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Stop once the Riemannian gradient norm falls below this.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Adapt the step with a backtracking line search.
    #[arg(long)]
    pub line_search: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Fig2Args {
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// M values: a range such as 2..30 (inclusive) or a comma-separated list.
    #[arg(long)]
    pub m: Option<String>,
    /// Independent initializations per M; seeds are seed, seed+1, ...
    #[arg(long)]
    pub trials: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub gd: GdArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Fig3Args {
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// M values: a range such as 5..30 (inclusive) or a comma-separated list.
    #[arg(long)]
    pub m: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub gd: GdArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Fig4Args {
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// M values: a range such as 2..8 (inclusive) or a comma-separated list.
    #[arg(long)]
    pub m: Option<String>,
    /// Independent initializations per M.
    #[arg(long)]
    pub trials: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub gd: GdArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated, strictly increasing N values.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub weight_law: Option<String>,
    #[arg(long)]
    pub coeff_law: Option<String>,
    /// Random directions probed per trial.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Ascent steps applied to the best probes.
    #[arg(long)]
    pub refine_iters: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub bound: BoundArgs,
}
