//! Compression of two-layer ReLU networks under the Gaussian population loss.
//!
//! A target network `f_W(x) = (1/N) Σ a_n relu(<w_n, x>)` with unit-norm
//! weights is approximated by a smaller network `f_V` with `M < N` neurons.
//! For standard Gaussian inputs the squared loss between the two is an exact
//! quadratic form in the output coefficients, built from the arc-cosine
//! kernel `g(α) = E[relu(<u, X>) relu(<v, X>)]` with `α = <u, v>`.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | closed form and series of `g`, its derivative, Gram matrices |
//! | [`network`] | unit vectors, networks, samplers, JSON documents |
//! | [`compression`] | population loss, optimal coefficients, limit loss/objective |
//! | [`etf`] | simplex equiangular tight frames and the Gram distance |
//! | [`optimizer`] | Riemannian gradient ascent of the limit objective |
//! | [`concentration`] | suprema of the linear/quadratic terms, s-vector deviation |
//! | [`experiments`] | data generators for the kernel table, compression and GD figures |
//!
//! ```
//! use relu_compress::{etf, compression};
//!
//! let frame = etf::make_etf(5, 8, None).unwrap();
//! let r = compression::limit_objective(frame.vectors()).unwrap();
//! assert!((r - etf::etf_objective(5).unwrap()).abs() < 1e-12);
//! ```

pub mod compression;
pub mod concentration;
pub mod error;
pub mod etf;
pub mod experiments;
pub mod kernel;
pub mod linalg;
pub mod network;
pub mod optimizer;
pub mod rng;

pub use compression::{LossReport, SVector};
pub use concentration::{DeviationRow, DeviationTable};
pub use error::{Error, Result};
pub use etf::EtfFrame;
pub use kernel::{GramMatrix, KernelValue};
pub use network::{
    CoeffLaw, CompressedNetwork, Network, SamplerConfig, TargetNetwork, UnitVector, WeightLaw,
};
pub use optimizer::{GdConfig, GdOptions, GdRecord, GdTrace, Init, LineSearch, StopReason};
