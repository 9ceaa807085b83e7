//! Two-layer ReLU networks with unit-norm first-layer weights.
//!
//! `f(x) = (1/K) Σ_k c_k relu(<w_k, x>)` where `K` is the number of neurons.
//! The same representation serves the target network (`N` neurons,
//! coefficients `a`) and the compressed one (`M` neurons, coefficients `b`).

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Tolerance on `| ‖w‖₂ - 1 |` for a vector to count as unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `coords` without rescaling; fails unless the norm is within [`UNIT_NORM_TOL`] of 1.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = linalg::norm(&coords);
        if coords.is_empty() || !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { index: 0, norm: n });
        }
        Ok(Self(coords))
    }

    /// Rescales `coords` onto the sphere.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        let n = linalg::norm(&coords);
        if coords.is_empty() || !n.is_finite() || n == 0.0 {
            return Err(Error::NotUnitNorm { index: 0, norm: n });
        }
        Ok(Self(coords.into_iter().map(|x| x / n).collect()))
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn basis(d: usize, i: usize) -> Self {
        assert!(i < d);
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        Self(coords)
    }

    /// Uniform draw from the sphere (normalized standard Gaussian).
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        assert!(d > 0);
        loop {
            let coords: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = linalg::norm(&coords);
            if n > 0.0 {
                return Self(coords.into_iter().map(|x| x / n).collect());
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        linalg::dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    /// `Q x` for a `d × d` matrix `Q`, renormalized to absorb rounding.
    pub fn rotate(&self, q: &DMatrix<f64>) -> Self {
        let x = q * DVector::from_column_slice(&self.0);
        let n = x.norm();
        Self(x.iter().map(|v| v / n).collect())
    }
}

/// Neuron weights and output coefficients of `f(x) = (1/K) Σ c_k relu(<w_k, x>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dim: usize,
    weights: Vec<UnitVector>,
    coeffs: Vec<f64>,
}

/// The `M`-neuron approximant; structurally identical to any other network.
pub type CompressedNetwork = Network;

impl Network {
    pub fn new(weights: Vec<UnitVector>, coeffs: Vec<f64>) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::InvalidParameter("a network needs at least one neuron".into()));
        };
        if weights.len() != coeffs.len() {
            return Err(Error::SizeMismatch(format!(
                "{} weights but {} coefficients",
                weights.len(),
                coeffs.len()
            )));
        }
        let dim = first.dim();
        if let Some(w) = weights.iter().find(|w| w.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: w.dim() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient {i} is not finite")));
        }
        Ok(Self { dim, weights, coeffs })
    }

    /// Network with every coefficient zero.
    pub fn with_zero_coeffs(weights: Vec<UnitVector>) -> Result<Self> {
        let n = weights.len();
        Self::new(weights, vec![0.0; n])
    }

    /// Same weights, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.weights.clone(), coeffs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[UnitVector] {
        &self.weights
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coeffs)
    }

    /// Weights stacked as rows of a `size × dim` matrix.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size(), self.dim, |i, j| self.weights[i].0[j])
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let total: f64 = self
            .weights
            .iter()
            .zip(&self.coeffs)
            .map(|(w, c)| c * linalg::dot(&w.0, x).max(0.0))
            .sum();
        Ok(total / self.size() as f64)
    }

    pub fn to_json(&self) -> String {
        Document::from_network(self, None, None).render()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Document::parse(text)?.into_network()
    }
}

/// A target network together with the statistics of the law its
/// coefficients were drawn from, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetwork {
    pub network: Network,
    /// `E[a_n]`
    pub mu_a: Option<f64>,
    /// Declared bound `A >= |a_n|`.
    pub coeff_bound: Option<f64>,
}

impl TargetNetwork {
    pub fn new(network: Network) -> Self {
        Self { network, mu_a: None, coeff_bound: None }
    }

    pub fn with_stats(network: Network, mu_a: f64, coeff_bound: f64) -> Self {
        Self { network, mu_a: Some(mu_a), coeff_bound: Some(coeff_bound) }
    }

    /// The coefficient mean, which the limit-loss machinery requires to be known and nonzero.
    pub fn mu_a(&self) -> Result<f64> {
        match self.mu_a {
            Some(m) if m != 0.0 && m.is_finite() => Ok(m),
            _ => Err(Error::MissingMeanCoefficient),
        }
    }

    /// Declared bound if present, else the observed `max |a_n|`.
    pub fn coeff_bound(&self) -> f64 {
        self.coeff_bound
            .unwrap_or_else(|| self.network.coeffs.iter().fold(0.0, |m, a| m.max(a.abs())))
    }

    pub fn to_json(&self) -> String {
        Document::from_network(&self.network, self.mu_a, self.coeff_bound).render()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let (mu_a, coeff_bound) = (doc.mu_a, doc.coeff_bound);
        Ok(Self { network: doc.into_network()?, mu_a, coeff_bound })
    }
}

impl Deref for TargetNetwork {
    type Target = Network;

    fn deref(&self) -> &Network {
        &self.network
    }
}

/// On-disk layout: `{"d", "n", "weights", "coeffs"}` plus optional sampler statistics.
#[derive(Debug, Serialize, Deserialize)]
struct Document {
    d: usize,
    n: usize,
    weights: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeff_bound: Option<f64>,
}

impl Document {
    fn from_network(net: &Network, mu_a: Option<f64>, coeff_bound: Option<f64>) -> Self {
        Self {
            d: net.dim,
            n: net.size(),
            weights: net.weights.iter().map(|w| w.0.clone()).collect(),
            coeffs: net.coeffs.clone(),
            mu_a,
            coeff_bound,
        }
    }

    fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("network documents always serialize")
    }

    fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })
    }

    fn into_network(self) -> Result<Network> {
        let invariant = |field: String, msg: String| Error::Invariant { field, msg };
        if self.weights.len() != self.n {
            return Err(invariant(
                "weights".into(),
                format!("{} rows but n = {}", self.weights.len(), self.n),
            ));
        }
        if self.coeffs.len() != self.n {
            return Err(invariant(
                "coeffs".into(),
                format!("{} entries but n = {}", self.coeffs.len(), self.n),
            ));
        }
        let mut weights = Vec::with_capacity(self.n);
        for (i, row) in self.weights.into_iter().enumerate() {
            if row.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: row.len() });
            }
            let norm = linalg::norm(&row);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(invariant(format!("weights[{i}]"), format!("norm {norm} is not 1")));
            }
            weights.push(UnitVector(row));
        }
        if let Some(m) = self.mu_a {
            if !m.is_finite() {
                return Err(invariant("mu_a".into(), "must be finite".into()));
            }
        }
        Network::new(weights, self.coeffs)
    }
}

/// Law of the first-layer weights. Every law produces exactly unit-norm vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightLaw {
    UniformSphere,
    NormalizedGaussian,
    /// Coordinates `±1/√d` with independent fair signs.
    ScaledRademacher,
}

impl WeightLaw {
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> UnitVector {
        match self {
            WeightLaw::UniformSphere | WeightLaw::NormalizedGaussian => UnitVector::random(d, rng),
            WeightLaw::ScaledRademacher => {
                let s = 1.0 / (d as f64).sqrt();
                UnitVector((0..d).map(|_| if rng.random::<bool>() { s } else { -s }).collect())
            }
        }
    }
}

impl FromStr for WeightLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-sphere" => Ok(Self::UniformSphere),
            "normalized-gaussian" => Ok(Self::NormalizedGaussian),
            "scaled-rademacher" => Ok(Self::ScaledRademacher),
            other => Err(Error::InvalidParameter(format!("unknown weight law `{other}`"))),
        }
    }
}

impl fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UniformSphere => "uniform-sphere",
            Self::NormalizedGaussian => "normalized-gaussian",
            Self::ScaledRademacher => "scaled-rademacher",
        })
    }
}

/// Law of the output coefficients `a_n`. Must have a nonzero mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffLaw {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    /// `x1` with probability `p`, otherwise `x2`.
    TwoPoint { p: f64, x1: f64, x2: f64 },
}

impl CoeffLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Constant(mu) => mu,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::TwoPoint { p, x1, x2 } => p * x1 + (1.0 - p) * x2,
        }
    }

    /// `max |support|`
    pub fn bound(&self) -> f64 {
        match *self {
            Self::Constant(mu) => mu.abs(),
            Self::Uniform { lo, hi } => lo.abs().max(hi.abs()),
            Self::TwoPoint { x1, x2, .. } => x1.abs().max(x2.abs()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("{self}: {msg}")));
        match *self {
            Self::Constant(mu) if !mu.is_finite() => return bad("value must be finite"),
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                return bad("need finite lo < hi")
            }
            Self::TwoPoint { p, x1, x2 }
                if !((0.0..=1.0).contains(&p) && x1.is_finite() && x2.is_finite()) =>
            {
                return bad("need p in [0, 1] and finite support")
            }
            _ => {}
        }
        if self.mean() == 0.0 {
            return bad("coefficient mean must be nonzero");
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant(mu) => mu,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::TwoPoint { p, x1, x2 } => {
                if rng.random::<f64>() < p {
                    x1
                } else {
                    x2
                }
            }
        }
    }
}

/// Parses `constant:MU`, `uniform:LO:HI` or `two-point:P:X1:X2`.
impl FromStr for CoeffLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{t}` in coefficient law `{s}`")))
        };
        let law = match parts.as_slice() {
            ["constant", mu] => Self::Constant(num(mu)?),
            ["uniform", lo, hi] => Self::Uniform { lo: num(lo)?, hi: num(hi)? },
            ["two-point", p, x1, x2] => Self::TwoPoint { p: num(p)?, x1: num(x1)?, x2: num(x2)? },
            _ => return Err(Error::InvalidParameter(format!("unknown coefficient law `{s}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for CoeffLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(mu) => write!(f, "constant:{mu}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            Self::TwoPoint { p, x1, x2 } => write!(f, "two-point:{p}:{x1}:{x2}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n: usize,
    pub d: usize,
    pub weight_law: WeightLaw,
    pub coeff_law: CoeffLaw,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(n: usize, d: usize, weight_law: WeightLaw, coeff_law: CoeffLaw, seed: u64) -> Self {
        Self { n, d, weight_law, coeff_law, seed }
    }
}

/// Draws `N` i.i.d. weights and, from an independent stream, `N` i.i.d. coefficients.
pub fn sample_target(cfg: &SamplerConfig) -> Result<TargetNetwork> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    cfg.coeff_law.validate()?;
    let mut weight_rng = rng::stream(cfg.seed, 0);
    let mut coeff_rng = rng::stream(cfg.seed, 1);
    let weights = (0..cfg.n).map(|_| cfg.weight_law.sample(cfg.d, &mut weight_rng)).collect();
    let coeffs = (0..cfg.n).map(|_| cfg.coeff_law.sample(&mut coeff_rng)).collect();
    Ok(TargetNetwork::with_stats(
        Network::new(weights, coeffs)?,
        cfg.coeff_law.mean(),
        cfg.coeff_law.bound(),
    ))
}
