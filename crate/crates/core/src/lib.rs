//! Fixed-design kernel regression on `d`-dimensional lattices with dependent
//! stationary noise.
//!
//! Observations follow `Y_i = g(i/n) + ε_i` for `i ∈ {1,…,n}^d`, and `g` is
//! recovered with the ratio estimator
//!
//! ```text
//! g_n(x) = Σ_i Y_i K((x − i/n)/h) / Σ_i K((x − i/n)/h).
//! ```
//!
//! Under a projective dependence condition on `ε`, the rescaled error
//! `(nh)^{d/2}(g_n(x) − E g_n(x))` is asymptotically `σ√η · N(0, I)` jointly over
//! distinct points, where `σ² = ∫K²` and `η = Σ_k Cov(ε_0, ε_k)`. The crate
//! provides the estimator, a plug-in estimator of `η`, χ²(1) p-value maps,
//! noise generators with known `η`, and an image-denoising pipeline built on
//! top of them.
//!
//! With the default `parallel` feature, inner loops (grid estimation, field
//! simulation, Monte Carlo replicates) run on rayon; without it the same code
//! runs sequentially and produces identical results.

pub mod dependence;
pub mod error;
pub mod field_sim;
pub mod imaging;
pub mod inference;
pub mod kernel;
pub mod lattice;
mod par;
pub mod quadrature;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
pub use field_sim::{Field, FieldSpec};
pub use kernel::{Kernel, KernelFamily, Norm};
pub use lattice::{Lattice, MultiIndex};
pub use regression::{BandwidthRule, Estimate};
