//! Nonlinear embeddings and kernel estimation.
//!
//! A pipeline maps `v` to `f(A · D₁ H D₀ · pad(v))` with `A` a structured
//! matrix. Products of embedded coordinates averaged over the `m` rows
//! estimate `Λ_f(v₁, v₂) = E[f(⟨r,v₁⟩) f(⟨r,v₂⟩)]` for Gaussian `r`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{derive_seed, stream, STREAM_EXPERIMENT};
use crate::structured::{Family, StructuredMatrix};
use crate::transforms::{preprocess, sample_signs, SignDiagonal};

/// Pointwise nonlinearity `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Identity,
    /// `1` for `x ≥ 0`, else `0`.
    Heaviside,
    /// `max(x, 0)`.
    Relu,
    /// `x^b` for `x ≥ 0`, else `0`. Built through [`Nonlinearity::arccos`] so
    /// that `b = 0` and `b = 1` collapse to `Heaviside` and `Relu`.
    ArcCos(u32),
    Sine,
    Cosine,
    /// Interleaved `(sin y, cos y)` features.
    SinCos,
}

impl Nonlinearity {
    pub fn arccos(b: u32) -> Self {
        match b {
            0 => Self::Heaviside,
            1 => Self::Relu,
            b => Self::ArcCos(b),
        }
    }

    /// Features emitted per projection.
    pub fn width(&self) -> usize {
        if *self == Self::SinCos {
            2
        } else {
            1
        }
    }

    /// `f(x)` for the scalar nonlinearities. For `SinCos` this is `sin x`.
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Identity => x,
            Self::Heaviside => step(x),
            Self::Relu => x.max(0.0),
            Self::ArcCos(b) => {
                if x >= 0.0 {
                    x.powi(b as i32)
                } else {
                    0.0
                }
            }
            Self::Sine | Self::SinCos => x.sin(),
            Self::Cosine => x.cos(),
        }
    }

    /// `f(x) f(y)`, with `sin x sin y + cos x cos y = cos(x − y)` for `SinCos`.
    pub fn pair_product(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::SinCos => (x - y).cos(),
            _ => self.apply(x) * self.apply(y),
        }
    }
}

fn step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Heaviside => f.write_str("heaviside"),
            Self::Relu => f.write_str("relu"),
            Self::ArcCos(b) => write!(f, "arccos:{b}"),
            Self::Sine => f.write_str("sine"),
            Self::Cosine => f.write_str("cosine"),
            Self::SinCos => f.write_str("sincos"),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "identity" | "id" | "linear" => Self::Identity,
            "heaviside" | "step" => Self::Heaviside,
            "relu" => Self::Relu,
            "sine" | "sin" => Self::Sine,
            "cosine" | "cos" => Self::Cosine,
            "sincos" | "gaussian" => Self::SinCos,
            other => {
                let b = other
                    .strip_prefix("arccos:")
                    .or_else(|| other.strip_prefix("arccos"))
                    .ok_or_else(|| invalid(format!("unknown nonlinearity `{s}`")))?;
                let b: u32 = b.parse().map_err(|_| invalid(format!("bad arc-cosine order in `{s}`")))?;
                Self::arccos(b)
            }
        })
    }
}

/// Closed form of the heaviside kernel, pinned by the Monte-Carlo oracle.
pub const HEAVISIDE_KERNEL_FORM: &str = "(pi - theta) / (2 pi)";

/// `f(A · D₁ H D₀ · pad(v))` with seeded components.
#[derive(Debug, Clone)]
pub struct EmbeddingPipeline {
    pub matrix: StructuredMatrix,
    pub d0: SignDiagonal,
    pub d1: SignDiagonal,
    pub f: Nonlinearity,
    pub input_dim: usize,
    pub seed: u64,
}

impl EmbeddingPipeline {
    /// Builds an `m`-row pipeline for inputs of dimension `n_input`.
    ///
    /// Inputs are zero-padded to the next power of two, or further up to
    /// `m` for families that need `m ≤ n`. Padding changes no inner product,
    /// so a wide single matrix stands in for stacked blocks.
    pub fn new(family: Family, m: usize, n_input: usize, f: Nonlinearity, seed: u64) -> Result<Self> {
        if n_input == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        let mut n = n_input.next_power_of_two();
        if family != Family::Unstructured {
            n = n.max(m.next_power_of_two());
        }
        let matrix = StructuredMatrix::build(family, m, n, derive_seed(seed, 0))?;
        let d0 = sample_signs(derive_seed(seed, 1), n)?;
        let d1 = sample_signs(derive_seed(seed, 2), n)?;
        Ok(Self { matrix, d0, d1, f, input_dim: n_input, seed })
    }

    /// Uses a given matrix and sign diagonals.
    pub fn from_parts(matrix: StructuredMatrix, d0: SignDiagonal, d1: SignDiagonal, f: Nonlinearity) -> Result<Self> {
        let n = matrix.cols();
        if !n.is_power_of_two() || d0.len() != n || d1.len() != n {
            return Err(invalid("sign diagonals must match a power-of-two column count"));
        }
        let seed = matrix.seed().unwrap_or(0);
        Ok(Self { matrix, d0, d1, f, input_dim: n, seed })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn padded_n(&self) -> usize {
        self.matrix.cols()
    }

    /// `ŷ = A · D₁ H D₀ · pad(v)`.
    pub fn linear(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.padded_n();
        if v.is_empty() || v.len() > n {
            return Err(invalid(format!("input length {} not in 1..={n}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("input has non-finite entries"));
        }
        let mut padded = v.to_vec();
        padded.resize(n, 0.0);
        self.matrix.matvec(&preprocess(&padded, &self.d0, &self.d1)?)
    }

    /// Embedded features, length `m` (or `2m` interleaved for sincos).
    pub fn embed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let y = self.linear(v)?;
        Ok(match self.f {
            Nonlinearity::SinCos => y.iter().flat_map(|&x| [x.sin(), x.cos()]).collect(),
            f => y.iter().map(|&x| f.apply(x)).collect(),
        })
    }

    /// `(1/m) Σ_i f(ŷ_{i,1}) f(ŷ_{i,2})`.
    pub fn estimate_pair(&self, v1: &[f64], v2: &[f64]) -> Result<f64> {
        let y1 = self.linear(v1)?;
        let y2 = self.linear(v2)?;
        Ok(pair_mean(self.f, &y1, &y2))
    }

    /// `Ψ(β(coordinate 1), ..., β(coordinate m))` over the embedded features
    /// of `vs`. For sincos, β sees the `2m` interleaved feature coordinates.
    pub fn estimate_tuple<B, P>(&self, beta: B, psi: P, vs: &[Vec<f64>]) -> Result<f64>
    where
        B: Fn(&[f64]) -> Result<f64>,
        P: Fn(&[f64]) -> Result<f64>,
    {
        if vs.is_empty() {
            return Err(invalid("estimate_tuple needs at least one vector"));
        }
        let feats: Vec<Vec<f64>> = vs.iter().map(|v| self.embed(v)).collect::<Result<_>>()?;
        let width = feats[0].len();
        let mut column = vec![0.0; vs.len()];
        let mut betas = Vec::with_capacity(width);
        for i in 0..width {
            for (slot, f) in column.iter_mut().zip(&feats) {
                *slot = f[i];
            }
            betas.push(beta(&column)?);
        }
        psi(&betas)
    }
}

fn pair_mean(f: Nonlinearity, y1: &[f64], y2: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in y1.iter().zip(y2) {
        acc += f.pair_product(a, b);
    }
    acc / y1.len() as f64
}

/// β = product of the coordinates.
pub fn product(xs: &[f64]) -> Result<f64> {
    Ok(xs.iter().fold(1.0, |acc, x| acc * x))
}

/// Ψ = arithmetic mean.
pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(invalid("mean of an empty list"));
    }
    let mut acc = 0.0;
    for x in xs {
        acc += x;
    }
    Ok(acc / xs.len() as f64)
}

/// Angle between two nonzero vectors via the clamped cosine.
pub fn angle(v1: &[f64], v2: &[f64]) -> Result<f64> {
    let (a, b) = (norm(v1), norm(v2));
    if a == 0.0 || b == 0.0 {
        return Err(invalid("angle undefined for a zero vector"));
    }
    Ok((dot(v1, v2) / (a * b)).clamp(-1.0, 1.0).acos())
}

/// Closed form of `Λ_f(v₁, v₂)`, or `None` when there is none (arc-cosine
/// order above 2).
pub fn exact_kernel(f: Nonlinearity, v1: &[f64], v2: &[f64]) -> Result<Option<f64>> {
    if v1.len() != v2.len() || v1.is_empty() {
        return Err(invalid("kernel arguments must be nonempty and of equal length"));
    }
    let diff = || norm(&crate::linalg::sub(v1, v2)).powi(2);
    let sum = || {
        let s: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
        norm(&s).powi(2)
    };
    Ok(Some(match f {
        Nonlinearity::Identity => dot(v1, v2),
        Nonlinearity::Heaviside => (PI - angle(v1, v2)?) / (2.0 * PI),
        Nonlinearity::Relu => {
            let t = angle(v1, v2)?;
            norm(v1) * norm(v2) * (t.sin() + (PI - t) * t.cos()) / (2.0 * PI)
        }
        Nonlinearity::ArcCos(2) => {
            let t = angle(v1, v2)?;
            let (s, c) = t.sin_cos();
            (norm(v1) * norm(v2)).powi(2) * (3.0 * s * c + (PI - t) * (1.0 + 2.0 * c * c)) / (2.0 * PI)
        }
        Nonlinearity::ArcCos(_) => return Ok(None),
        Nonlinearity::SinCos => (-diff() / 2.0).exp(),
        Nonlinearity::Cosine => ((-diff() / 2.0).exp() + (-sum() / 2.0).exp()) / 2.0,
        Nonlinearity::Sine => ((-diff() / 2.0).exp() - (-sum() / 2.0).exp()) / 2.0,
    }))
}

const ORACLE_CHUNK: usize = 4096;

/// Sample mean and standard error of `f(⟨r,v₁⟩) f(⟨r,v₂⟩)` over `trials`
/// fresh Gaussian vectors `r`. Chunk `k` draws from its own derived stream,
/// so the result does not depend on the thread count.
pub fn mc_oracle(f: Nonlinearity, v1: &[f64], v2: &[f64], trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials < 100 {
        return Err(invalid("Monte-Carlo oracle needs at least 100 trials"));
    }
    if v1.len() != v2.len() || v1.is_empty() {
        return Err(invalid("oracle arguments must be nonempty and of equal length"));
    }
    let chunks = trials.div_ceil(ORACLE_CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = ORACLE_CHUNK.min(trials - k * ORACLE_CHUNK);
            let mut rng = stream(derive_seed(seed, k as u64), STREAM_EXPERIMENT);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let (mut p1, mut p2) = (0.0, 0.0);
                for (a, b) in v1.iter().zip(v2) {
                    let r: f64 = rng.sample(StandardNormal);
                    p1 += r * a;
                    p2 += r * b;
                }
                let x = f.pair_product(p1, p2);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = trials as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// One estimate with its references.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub pair_id: usize,
    pub estimate: f64,
    pub exact: Option<f64>,
    /// `(mean, stderr)` from [`mc_oracle`].
    pub oracle: Option<(f64, f64)>,
    pub abs_error: Option<f64>,
    pub m: usize,
    pub family: Family,
    pub f: Nonlinearity,
    pub seed: u64,
}

impl EstimateReport {
    pub fn new(pipe: &EmbeddingPipeline, pair_id: usize, v1: &[f64], v2: &[f64]) -> Result<Self> {
        let estimate = pipe.estimate_pair(v1, v2)?;
        let exact = exact_kernel(pipe.f, v1, v2)?;
        Ok(Self {
            pair_id,
            estimate,
            exact,
            oracle: None,
            abs_error: exact.map(|e| (estimate - e).abs()),
            m: pipe.rows(),
            family: pipe.matrix.family(),
            f: pipe.f,
            seed: pipe.seed,
        })
    }
}

/// Per-repetition error summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepStats {
    pub rmse: f64,
    pub max_abs_error: f64,
}

/// Aggregated errors for one `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub family: Family,
    pub f: Nonlinearity,
    /// Root mean square error over all repetitions and pairs.
    pub rmse: f64,
    pub max_abs_error: f64,
    pub per_rep: Vec<RepStats>,
}

/// Sweep settings beyond the required arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Pairs beyond this are subsampled deterministically.
    pub max_pairs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { max_pairs: 1000 }
    }
}

/// Pairs `i < j` of `dataset`, subsampled to `max_pairs`. A single vector
/// yields the self pair.
pub fn dataset_pairs(dataset: &[Vec<f64>], max_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if dataset.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    if max_pairs == 0 {
        return Err(invalid("max_pairs must be positive"));
    }
    let k = dataset.len();
    if k == 1 {
        return Ok(vec![(0, 0)]);
    }
    let total = k * (k - 1) / 2;
    let all = || (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)));
    if total <= max_pairs {
        return Ok(all().collect());
    }
    let mut rng = stream(seed, STREAM_EXPERIMENT);
    let mut picked = rand::seq::index::sample(&mut rng, total, max_pairs).into_vec();
    picked.sort_unstable();
    let mut out = Vec::with_capacity(max_pairs);
    let mut next = picked.into_iter().peekable();
    for (idx, p) in all().enumerate() {
        if next.peek() == Some(&idx) {
            out.push(p);
            next.next();
        }
    }
    Ok(out)
}

/// Errors of `estimate_pair` against [`exact_kernel`] over dataset pairs,
/// for each `m` and `reps` fresh pipelines.
pub fn error_sweep(
    dataset: &[Vec<f64>],
    family: Family,
    f: Nonlinearity,
    m_values: &[usize],
    reps: usize,
    seed: u64,
    opts: SweepOptions,
) -> Result<Vec<SweepRow>> {
    let idx = dataset_pairs(dataset, opts.max_pairs, derive_seed(seed, u64::MAX))?;
    let pairs: Vec<(&[f64], &[f64])> = idx.iter().map(|&(i, j)| (&dataset[i][..], &dataset[j][..])).collect();
    error_sweep_pairs(&pairs, family, f, m_values, reps, seed)
}

/// [`error_sweep`] on explicit pairs.
pub fn error_sweep_pairs(
    pairs: &[(&[f64], &[f64])],
    family: Family,
    f: Nonlinearity,
    m_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if pairs.is_empty() {
        return Err(invalid("no pairs to evaluate"));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(invalid("m values must be a nonempty list of positive integers"));
    }
    let dim = pairs[0].0.len();
    if pairs.iter().any(|(a, b)| a.len() != dim || b.len() != dim) {
        return Err(invalid("all vectors must share one dimension"));
    }
    let exact: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| exact_kernel(f, a, b)?.ok_or_else(|| invalid(format!("{f} has no closed-form kernel"))))
        .collect::<Result<_>>()?;

    m_values
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let m_seed = derive_seed(seed, k as u64);
            let sq: Vec<(f64, RepStats)> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let pipe = EmbeddingPipeline::new(family, m, dim, f, derive_seed(m_seed, r as u64))?;
                    let (mut sum_sq, mut worst) = (0.0, 0.0f64);
                    for ((a, b), e) in pairs.iter().zip(&exact) {
                        let err = pipe.estimate_pair(a, b)? - e;
                        sum_sq += err * err;
                        worst = worst.max(err.abs());
                    }
                    let rmse = (sum_sq / pairs.len() as f64).sqrt();
                    Ok((sum_sq, RepStats { rmse, max_abs_error: worst }))
                })
                .collect::<Result<_>>()?;
            let total: f64 = sq.iter().map(|s| s.0).sum();
            let per_rep: Vec<RepStats> = sq.into_iter().map(|s| s.1).collect();
            Ok(SweepRow {
                m,
                family,
                f,
                rmse: (total / (reps * pairs.len()) as f64).sqrt(),
                max_abs_error: per_rep.iter().map(|r| r.max_abs_error).fold(0.0, f64::max),
                per_rep,
            })
        })
        .collect()
}

/// Stacked arc-cosine pipelines: each layer embeds the previous layer's
/// features. There is no closed form to compare against.
#[derive(Debug, Clone)]
pub struct LayeredPipeline {
    pub layers: Vec<EmbeddingPipeline>,
}

impl LayeredPipeline {
    /// `widths[k]` rows in layer `k`, all using `f`.
    pub fn new(family: Family, widths: &[usize], n_input: usize, f: Nonlinearity, seed: u64) -> Result<Self> {
        if widths.is_empty() {
            return Err(invalid("need at least one layer"));
        }
        if f == Nonlinearity::SinCos {
            return Err(invalid("layers must use a scalar nonlinearity"));
        }
        let mut dim = n_input;
        let mut layers = Vec::with_capacity(widths.len());
        for (k, &w) in widths.iter().enumerate() {
            layers.push(EmbeddingPipeline::new(family, w, dim, f, derive_seed(seed, k as u64))?);
            dim = w;
        }
        Ok(Self { layers })
    }

    pub fn embed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut x = v.to_vec();
        for layer in &self.layers {
            x = layer.embed(&x)?;
        }
        Ok(x)
    }

    /// Mean of products of final-layer features.
    pub fn estimate_pair(&self, v1: &[f64], v2: &[f64]) -> Result<f64> {
        let (a, b) = (self.embed(v1)?, self.embed(v2)?);
        Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64)
    }
}
