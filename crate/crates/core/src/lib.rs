//! # structembed
//!
//! Structured Gaussian matrices for fast randomized nonlinear embeddings.
//!
//! A *P-model* builds every row of an `m × n` projection matrix from one
//! shared vector of `t` standard normals, `a_i = g · P_i`. Choosing the
//! selector matrices `P_i` gives the circulant, skew-circulant, Toeplitz,
//! Hankel and low-displacement-rank families, all of which multiply a vector
//! in `O(n log n)` instead of `O(mn)`. On top of that the crate provides
//!
//! - [`transforms`]: seeded Gaussian budgets, random sign diagonals, the fast
//!   Walsh–Hadamard transform and the `D₁ H D₀` preprocessing map;
//! - [`structured`]: the matrix families, explicit `P_i`, dense oracles and
//!   fast matrix-vector products;
//! - [`diagnostics`]: column cross-correlations `σ`, coherence graphs and their
//!   chromatic numbers, coherence `μ`, unicoherence `μ̃`, the s-vector
//!   identities, balancedness and Gram–Schmidt perturbation;
//! - [`kernels`]: the embedding pipeline, kernel estimators, closed-form
//!   kernels and a brute-force Monte-Carlo oracle;
//! - [`bounds`]: log-space evaluators for the concentration bounds;
//! - [`cli`] and [`verify`]: the batch commands behind the `structembed`
//!   binary and the acceptance suite.
//!
//! ## Quick start
//!
//! ```rust
//! use structembed::kernels::{EmbeddingPipeline, Nonlinearity};
//! use structembed::structured::Family;
//!
//! let v1: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
//! let v2: Vec<f64> = (0..64).map(|i| (i as f64).cos()).collect();
//! let pipe = EmbeddingPipeline::new(Family::Toeplitz, 32, 64, Nonlinearity::Identity, 7).unwrap();
//! let est = pipe.estimate_pair(&v1, &v2).unwrap();
//! let exact: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
//! assert!((est - exact).abs() < 40.0);
//! ```
//!
//! Indices are zero-based throughout: rows `0..m`, columns `0..n`.

pub mod bounds;
pub mod cli;
pub mod dataset;
pub mod diagnostics;
mod error;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod structured;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
