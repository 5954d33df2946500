//! Simulation and inference toolkit for long-range-dependent Lévy-driven
//! continuous-time moving average (CMA) processes.
//!
//! A CMA process is `X_t = ∫ f(t−s) dL_s` for a two-sided centered Lévy
//! process `L` and a kernel `f` that vanishes on `(−∞,0]`, is bounded and
//! decays like `C_d t^{d−1}` with `d ∈ (0, ½)`. The sample autocovariance
//! of such a process has one of three limit laws depending on `(d, α)`:
//! Gaussian, Rosenblatt, or α/2-stable. This crate provides
//!
//! * [`levy`] — the driving noise: increment sampling, moment analytics and
//!   the norming sequences `a_N`, `b_N`;
//! * [`kernel`] — kernel families (bounded power law, fractional Lévy noise
//!   increments, FICARMA) with autocovariance and `G_h` evaluation;
//! * [`simulate`] — path simulation on a mesh with the diagonal /
//!   off-diagonal decomposition of the sample autocovariance;
//! * [`estimate`] — sample autocovariance / autocorrelation, the
//!   long-memory estimator `d̂`, and limit-regime classification;
//! * [`limits`] — samplers for the three limit laws (Rosenblatt quadratic
//!   form, α-stable via Chambers–Mallows–Stuck, stable stochastic
//!   integrals `∫ G dM`);
//! * [`mc`] — the Monte Carlo experiment harness (replication, KS
//!   comparison, Hill tail index, rate regression);
//! * [`config`] — flat key/value experiment configuration with joint
//!   validation and content hashing.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); the concrete aliases below fix the
//! default precision used by the CLI and the experiment harness.

pub mod config;
pub mod error;
pub mod estimate;
pub mod fftconv;
pub mod io;
pub mod kernel;
pub mod levy;
pub mod limits;
pub mod mc;
pub mod quad;
pub mod scalar;
pub mod simulate;
pub mod special;

mod poly;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Default scalar type for the CLI and experiment harness.
pub type Real = f64;

/// Version string recorded in run manifests and summaries.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

// Concrete aliases at the default precision.
pub type LevyModel = levy::LevyModel<Real>;
pub type KernelSpec = kernel::KernelSpec<Real>;
pub type SimulationGrid = simulate::SimulationGrid<Real>;
pub type SamplePath = simulate::SamplePath<Real>;
pub type LimitLaw = limits::LimitLaw<Real>;
pub type ExperimentSpec = mc::ExperimentSpec<Real>;

// Single-precision variants.
pub type LevyModel32 = levy::LevyModel<f32>;
pub type KernelSpec32 = kernel::KernelSpec<f32>;
pub type SimulationGrid32 = simulate::SimulationGrid<f32>;
