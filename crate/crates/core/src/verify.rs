//! The acceptance suite, one function per criterion.
//!
//! Each criterion returns an [`Outcome`]: pass or fail plus the measured
//! numbers. [`run`] executes a selection and records timings.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{self, Theorem1Params};
use crate::diagnostics::{self, CoherenceGraph};
use crate::kernels::{exact_kernel, mc_oracle, EmbeddingPipeline, Nonlinearity};
use crate::linalg::{dot, norm, DenseMatrix};
use crate::rng::{derive_seed, stream, DEFAULT_SEED, STREAM_EXPERIMENT};
use crate::structured::{Family, StructuredMatrix};
use crate::transforms::{fwht_in_place, sample_gaussian, sample_signs};

/// `σ` evaluator with indices assumed in range.
pub type SigmaFn = fn(&StructuredMatrix, usize, usize, usize, usize) -> f64;

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// `(id, name)` of every criterion, in order.
pub const CRITERIA: [(u8, &str); 12] = [
    (1, "matvec"),
    (2, "sigma"),
    (3, "chromatic"),
    (4, "normalization"),
    (5, "unbiasedness"),
    (6, "s-identities"),
    (7, "balancedness"),
    (8, "concentration"),
    (9, "gaussian-kernel"),
    (10, "p0-eps"),
    (11, "bounds"),
    (12, "performance"),
];

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Criterion names or ids to run; `None` runs all.
    pub only: Option<Vec<String>>,
    /// A failed performance criterion does not fail the run.
    pub perf_soft: bool,
    pub perf_n: usize,
    pub perf_runs: usize,
    pub sigma_fn: SigmaFn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            only: None,
            perf_soft: false,
            perf_n: 1 << 14,
            perf_runs: 20,
            sigma_fn: diagnostics::sigma_unchecked,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub outcome: Outcome,
    /// A failure that does not count against the run.
    pub soft: bool,
    pub elapsed: Duration,
}

impl CriterionResult {
    /// One line such as `PASS [3] chromatic: ... (0.12 s)`.
    pub fn line(&self) -> String {
        let tag = match (self.outcome.passed, self.soft) {
            (true, _) => "PASS",
            (false, true) => "SOFT-FAIL",
            (false, false) => "FAIL",
        };
        format!(
            "{tag} [{}] {}: {} ({:.2} s)",
            self.id,
            self.name,
            self.outcome.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Resolves `--only` entries (names or ids) to criterion ids.
pub fn select(only: Option<&[String]>) -> crate::Result<Vec<u8>> {
    let Some(list) = only else {
        return Ok(CRITERIA.iter().map(|c| c.0).collect());
    };
    let mut ids = Vec::new();
    for item in list {
        let item = item.trim();
        let hit = CRITERIA
            .iter()
            .find(|(id, name)| *name == item || id.to_string() == item)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown criterion `{item}`")))?;
        if !ids.contains(&hit.0) {
            ids.push(hit.0);
        }
    }
    ids.sort_unstable();
    Ok(ids)
}

pub fn run_one(id: u8, opts: &VerifyOptions) -> CriterionResult {
    let seed = opts.seed;
    let start = Instant::now();
    let outcome = match id {
        1 => matvec_equivalence(seed),
        2 => sigma_closed_forms(opts.sigma_fn),
        3 => chromatic_reproductions(),
        4 => normalization(seed),
        5 => unbiasedness(seed),
        6 => s_identities(seed),
        7 => balancedness(seed),
        8 => concentration(seed),
        9 => gaussian_kernel(seed),
        10 => p0_eps(seed),
        11 => bound_evaluators(seed),
        12 => performance(opts.perf_n, opts.perf_runs, seed),
        _ => Outcome::new(false, format!("no criterion {id}")),
    };
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    CriterionResult { id, name, soft: id == 12 && opts.perf_soft && !outcome.passed, outcome, elapsed: start.elapsed() }
}

/// Runs the selected criteria in order.
pub fn run(opts: &VerifyOptions) -> crate::Result<Vec<CriterionResult>> {
    let ids = select(opts.only.as_deref())?;
    Ok(ids.into_iter().map(|id| run_one(id, opts)).collect())
}

/// True when every result passed or failed softly.
pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.outcome.passed || r.soft)
}

fn unit_vector(seed: u64, n: usize) -> Vec<f64> {
    let g = sample_gaussian(seed, n).expect("n > 0").g;
    let s = norm(&g);
    g.into_iter().map(|x| x / s).collect()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// 1. Fast matvec against the materialized matrix.
pub fn matvec_equivalence(seed: u64) -> Outcome {
    let mut rng = stream(seed, STREAM_EXPERIMENT);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for fam in Family::all_default() {
        for _ in 0..100 {
            let n = rng.random_range(1..=256usize);
            let m = rng.random_range(1..=64usize.min(n));
            let s: u64 = rng.random();
            let fam = match fam {
                Family::Ldr { rank, nnz } => Family::Ldr { rank, nnz: nnz.min(n) },
                other => other,
            };
            let a = StructuredMatrix::build(fam, m, n, s).expect("valid shape");
            let v = sample_gaussian(derive_seed(s, 1), n).expect("n > 0").g;
            let fast = a.matvec(&v).expect("length matches");
            let dense = a.materialize().expect("small").matvec(&v);
            for (x, y) in fast.iter().zip(&dense) {
                worst = worst.max((x - y).abs());
            }
            checked += 1;
        }
    }
    Outcome::new(worst <= 1e-9, format!("{checked} matrices, max |fast - dense| = {worst:.3e}"))
}

/// 2. `σ` against inner products of explicit `P_i` columns, exhaustively
/// for `n ≤ 16`, `m ≤ 8`.
pub fn sigma_closed_forms(sigma_fn: SigmaFn) -> Outcome {
    let mut mismatches = Vec::new();
    let mut count = 0u64;
    for fam in [Family::Circulant, Family::Toeplitz, Family::SkewCirculant, Family::Hankel] {
        for n in 1..=16usize {
            for m in 1..=8usize.min(n) {
                let a = StructuredMatrix::build(fam, m, n, (n * 31 + m) as u64).expect("valid shape");
                let cols: Vec<Vec<Vec<f64>>> = (0..m)
                    .map(|i| {
                        let p = a.p_matrix(i).expect("small");
                        (0..n).map(|c| p.column(c)).collect()
                    })
                    .collect();
                for i1 in 0..m {
                    for i2 in 0..m {
                        for n1 in 0..n {
                            for n2 in 0..n {
                                count += 1;
                                let want = dot(&cols[i1][n1], &cols[i2][n2]);
                                let got = sigma_fn(&a, i1, i2, n1, n2);
                                if got != want && mismatches.len() < 3 {
                                    mismatches.push(format!("{fam} n={n} m={m} ({i1},{i2},{n1},{n2}): {got} vs {want}"));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if mismatches.is_empty() {
        Outcome::new(true, format!("{count} index quadruples agree exactly"))
    } else {
        Outcome::new(false, format!("sigma mismatch, e.g. {}", mismatches.join("; ")))
    }
}

/// 3. The 5-cycle, `χ = 2` for Toeplitz, `χ ≤ 3` and `μ̃ = 0` for circulant.
pub fn chromatic_reproductions() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let c5 = StructuredMatrix::build(Family::Circulant, 2, 5, 0).expect("valid shape");
    let g: CoherenceGraph = diagnostics::coherence_graph(&c5, 0, 1).expect("small");
    let is_cycle = g.num_vertices() == 5 && g.num_edges() == 5 && g.adjacency.iter().all(|a| a.len() == 2);
    let chi5 = diagnostics::exact_chromatic(&g).expect("small");
    ok &= is_cycle && chi5 == 3;
    notes.push(format!("n=5 graph 5-cycle={is_cycle} chi={chi5}"));

    let mut toeplitz_bad = Vec::new();
    let mut circ_bad = Vec::new();
    for n in 2..=16usize {
        for m in 1..=8usize.min(n) {
            let c = StructuredMatrix::build(Family::Circulant, m, n, 1).expect("valid shape");
            let s = diagnostics::model_stats(&c, true).expect("small");
            if !(s.chi_is_exact && s.chi <= 3 && s.mu_tilde == 0.0) {
                circ_bad.push(format!("n={n} m={m} chi={} mu~={}", s.chi, s.mu_tilde));
            }
            // a Toeplitz model has edges once m >= 2 and n >= 3
            if m >= 2 && n >= 3 {
                let t = StructuredMatrix::build(Family::Toeplitz, m, n, 1).expect("valid shape");
                let s = diagnostics::model_stats(&t, true).expect("small");
                if !(s.chi_is_exact && s.chi == 2) {
                    toeplitz_bad.push(format!("n={n} m={m} chi={}", s.chi));
                }
            }
        }
    }
    ok &= toeplitz_bad.is_empty() && circ_bad.is_empty();
    notes.push(if toeplitz_bad.is_empty() {
        "toeplitz chi=2 for all 3<=n<=16, 2<=m<=8".into()
    } else {
        format!("toeplitz failures: {}", toeplitz_bad.join(", "))
    });
    notes.push(if circ_bad.is_empty() {
        "circulant chi<=3, mu~=0 for all n<=16, m<=8".into()
    } else {
        format!("circulant failures: {}", circ_bad.join(", "))
    });
    Outcome::new(ok, notes.join("; "))
}

/// 4. Exact normalization and orthogonality for shift families up to
/// `n = 64`, unit columns for ldr.
pub fn normalization(seed: u64) -> Outcome {
    let mut bad = Vec::new();
    let shift = [Family::Circulant, Family::SkewCirculant, Family::Toeplitz, Family::Hankel];
    let configs: Vec<(Family, usize)> = shift.iter().flat_map(|&f| (1..=64).map(move |n| (f, n))).collect();
    let fails: Vec<String> = configs
        .par_iter()
        .filter_map(|&(fam, n)| {
            let a = StructuredMatrix::build(fam, n, n, derive_seed(seed, n as u64)).expect("valid shape");
            let norm_dev = diagnostics::max_column_norm_deviation(&a).expect("small");
            let cross = diagnostics::max_column_cross_dot(&a).expect("small");
            (norm_dev != 0.0 || cross != 0.0).then(|| format!("{fam} n={n}: norm dev {norm_dev:e}, cross {cross:e}"))
        })
        .collect();
    bad.extend(fails);
    let mut ldr_worst: f64 = 0.0;
    for n in [8usize, 16, 32, 64] {
        for rank in 1..=3 {
            let a = StructuredMatrix::build(Family::Ldr { rank, nnz: 2 }, n, n, derive_seed(seed, 1000 + n as u64))
                .expect("valid shape");
            ldr_worst = ldr_worst.max(diagnostics::max_column_norm_deviation(&a).expect("small"));
        }
    }
    let ok = bad.is_empty() && ldr_worst <= 1e-12;
    let mut detail = format!("shift families exact at n=1..64 ({} failures); ldr max |norm - 1| = {ldr_worst:.2e}", bad.len());
    if let Some(first) = bad.first() {
        detail.push_str(&format!("; first failure {first}"));
    }
    Outcome::new(ok, detail)
}

/// 5. Mean estimate over many pipeline seeds against the Monte-Carlo oracle.
pub fn unbiasedness(seed: u64) -> Outcome {
    const N: usize = 64;
    const M: usize = 8;
    const SEEDS: usize = 20_000;
    const TRIALS: usize = 1_000_000;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10u64)
        .map(|p| (unit_vector(derive_seed(seed, 2 * p), N), unit_vector(derive_seed(seed, 2 * p + 1), N)))
        .collect();
    let fs = [Nonlinearity::Identity, Nonlinearity::Heaviside];
    let oracles: Vec<Vec<(f64, f64)>> = fs
        .iter()
        .map(|&f| {
            pairs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| mc_oracle(f, a, b, TRIALS, derive_seed(seed ^ 0xA5A5, k as u64)).expect("valid"))
                .collect()
        })
        .collect();

    let mut ok = true;
    let mut notes = Vec::new();
    for fam in [Family::Circulant, Family::Toeplitz] {
        // per seed: estimates for every (f, pair)
        let per_seed: Vec<Vec<f64>> = (0..SEEDS)
            .into_par_iter()
            .map(|s| {
                let pipe = EmbeddingPipeline::new(fam, M, N, Nonlinearity::Identity, derive_seed(seed.wrapping_add(1), s as u64))
                    .expect("valid shape");
                let ys: Vec<(Vec<f64>, Vec<f64>)> =
                    pairs.iter().map(|(a, b)| (pipe.linear(a).unwrap(), pipe.linear(b).unwrap())).collect();
                fs.iter()
                    .flat_map(|f| {
                        ys.iter().map(move |(y1, y2)| {
                            let mut acc = 0.0;
                            for (a, b) in y1.iter().zip(y2) {
                                acc += f.pair_product(*a, *b);
                            }
                            acc / M as f64
                        })
                    })
                    .collect()
            })
            .collect();
        for (fi, f) in fs.iter().enumerate() {
            let mut within = 0;
            let mut worst_z: f64 = 0.0;
            for p in 0..pairs.len() {
                let col = fi * pairs.len() + p;
                let (mut s1, mut s2) = (0.0, 0.0);
                for row in &per_seed {
                    s1 += row[col];
                    s2 += row[col] * row[col];
                }
                let n = SEEDS as f64;
                let mean = s1 / n;
                let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
                let (om, ose) = oracles[fi][p];
                let combined = (var / n + ose * ose).sqrt();
                let z = (mean - om).abs() / combined;
                worst_z = worst_z.max(z);
                if z <= 4.0 {
                    within += 1;
                }
            }
            ok &= within >= 9;
            notes.push(format!("{fam}/{f}: {within}/10 within 4 se (max z {worst_z:.2})"));
        }
    }
    Outcome::new(ok, notes.join("; "))
}

/// 6. s-vector identities for circulant and Toeplitz at `n = 16`, `m = 4`.
pub fn s_identities(seed: u64) -> Outcome {
    let mut worst: f64 = 0.0;
    for fam in [Family::Circulant, Family::Toeplitz] {
        for t in 0..20u64 {
            let s = derive_seed(seed, t);
            let a = StructuredMatrix::build(fam, 4, 16, s).expect("valid shape");
            let d1 = sample_signs(derive_seed(s, 1), 16).expect("n > 0");
            let x = unit_vector(derive_seed(s, 2), 16);
            let raw = unit_vector(derive_seed(s, 3), 16);
            let proj = dot(&raw, &x);
            let y: Vec<f64> = raw.iter().zip(&x).map(|(r, xi)| r - proj * xi).collect();
            let ny = norm(&y);
            let y: Vec<f64> = y.into_iter().map(|v| v / ny).collect();
            let rep = diagnostics::verify_s_identities(&a, &d1, &[x, y]).expect("orthonormal basis");
            worst = worst.max(rep.max_deviation());
        }
    }
    Outcome::new(worst <= 1e-9, format!("40 cases, max identity deviation {worst:.2e}"))
}

/// 7. Fraction of `ln(n)`-balanced vectors after `H D₀` at `n = 1024`.
pub fn balancedness(seed: u64) -> Outcome {
    const N: usize = 1024;
    let theta = (N as f64).ln();
    let balanced = (0..1000u64)
        .into_par_iter()
        .filter(|&t| {
            let s = derive_seed(seed, t);
            let x = unit_vector(s, N);
            let d0 = sample_signs(derive_seed(s, 1), N).expect("n > 0");
            let mut w = d0.apply(&x);
            fwht_in_place(&mut w).expect("power of two");
            diagnostics::is_balanced(&w, theta).expect("unit vector")
        })
        .count();
    Outcome::new(balanced >= 990, format!("{balanced}/1000 vectors ln(n)-balanced"))
}

fn random_pairs(seed: u64, count: usize, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count as u64)
        .map(|p| (unit_vector(derive_seed(seed, 2 * p), n), unit_vector(derive_seed(seed, 2 * p + 1), n)))
        .collect()
}

fn pair_errors(pipe: &EmbeddingPipeline, pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|(a, b)| {
            let exact = exact_kernel(pipe.f, a, b).expect("valid").expect("closed form");
            pipe.estimate_pair(a, b).expect("valid") - exact
        })
        .collect()
}

/// Threshold for the max heaviside error at `m = 64`. The corollary formula
/// at `m = 64, τ = 1/4` gives about 0.594; the stricter 0.4303 (its value at
/// `m = 256`) is used.
pub const CONCENTRATION_THRESHOLD: f64 = 0.4303;

/// 8. Max heaviside error below the corollary threshold, and `1/√m` decay.
pub fn concentration(seed: u64) -> Outcome {
    const N: usize = 256;
    let formula = bounds::cor1_threshold(64, 0.25).expect("valid");
    let threshold = CONCENTRATION_THRESHOLD.min(formula);
    let runs: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, r);
            let pipe = EmbeddingPipeline::new(Family::Toeplitz, 64, N, Nonlinearity::Heaviside, s).expect("valid");
            let pairs = random_pairs(derive_seed(s, 7), 100, N);
            pair_errors(&pipe, &pairs).into_iter().map(f64::abs).fold(0.0, f64::max)
        })
        .collect();
    let below = runs.iter().filter(|&&e| e < threshold).count();
    let worst = runs.iter().copied().fold(0.0, f64::max);
    // tail bound for 100 pairs (N = 200 points) is vacuous here, so the
    // frequency check against it is skipped
    let tail = bounds::cor1_tail(200, 64, 0.25).expect("valid");

    let mut ratios: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed ^ 0x5151, r);
            let pairs = random_pairs(derive_seed(s, 9), 100, N);
            let rmse = |m: usize| {
                let pipe = EmbeddingPipeline::new(Family::Toeplitz, m, N, Nonlinearity::Identity, s).expect("valid");
                let e = pair_errors(&pipe, &pairs);
                (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt()
            };
            rmse(64) / rmse(256)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = (ratios[24] + ratios[25]) / 2.0;
    let ok = below >= 19 && (1.2..=2.8).contains(&median);
    Outcome::new(
        ok,
        format!(
            "{below}/20 runs below {threshold:.4} (max {worst:.4}, formula {formula:.4}, tail {tail:.2e} vacuous); median rmse ratio m=64/256 = {median:.3}"
        ),
    )
}

fn unit_ball_point(seed: u64, n: usize) -> Vec<f64> {
    let dir = unit_vector(seed, n);
    let u: f64 = stream(seed, STREAM_EXPERIMENT).random();
    let r = u.powf(1.0 / n as f64);
    dir.into_iter().map(|x| x * r).collect()
}

/// 9. sincos features against the unit-bandwidth Gaussian kernel. The
/// 256-dimensional inputs are padded to fit 512 circulant rows.
pub fn gaussian_kernel(seed: u64) -> Outcome {
    const N: usize = 256;
    const ROWS: usize = 512;
    let pipe = EmbeddingPipeline::new(Family::Circulant, ROWS, N, Nonlinearity::SinCos, seed).expect("valid");
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50u64)
        .map(|p| (unit_ball_point(derive_seed(seed, 2 * p), N), unit_ball_point(derive_seed(seed, 2 * p + 1), N)))
        .collect();
    let e = pair_errors(&pipe, &pairs);
    let rmse = (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt();
    Outcome::new(rmse < 0.05, format!("m={ROWS} rows, padded n={}, rmse {rmse:.4} over 50 pairs", pipe.padded_n()))
}

/// Whether some `ζ ∈ [−ε, ε]²` changes `H(x) H(y)`.
fn flip_possible(x: f64, y: f64, eps: f64) -> bool {
    let step = |v: f64| v >= 0.0;
    let free = |v: f64| v >= -eps && v < eps;
    let (hx, hy) = (step(x), step(y));
    match (free(x), free(y)) {
        (true, true) => true,
        (true, false) => hy,
        (false, true) => hx,
        (false, false) => false,
    }
}

/// 10. Monte-Carlo flip probability against the angular `p₀,ε` bound.
pub fn p0_eps(seed: u64) -> Outcome {
    const N: usize = 64;
    const TRIALS: usize = 100_000;
    let eps = 0.01;
    let bound = bounds::p0_eps_angular(10, eps).expect("valid");
    let flips = (0..TRIALS as u64)
        .into_par_iter()
        .filter(|&t| {
            let s = derive_seed(seed, t);
            let (v1, v2) = (unit_vector(derive_seed(s, 0), N), unit_vector(derive_seed(s, 1), N));
            let r = sample_gaussian(derive_seed(s, 2), N).expect("n > 0").g;
            flip_possible(dot(&r, &v1), dot(&r, &v2), eps)
        })
        .count();
    let p = flips as f64 / TRIALS as f64;
    let limit = bound + 3.0 * (p * (1.0 - p) / TRIALS as f64).sqrt();
    Outcome::new(p <= limit, format!("flip rate {p:.5} vs bound {bound:.5} (limit {limit:.5})"))
}

/// Plain evaluation of the main theorem's probability bound: explicit
/// binomial product, powers and factorials, no logs.
pub fn theorem1_direct(p: &Theorem1Params) -> f64 {
    let (k, m, n) = (p.k as f64, p.m as f64, p.n as f64);
    let mut binom = 1.0;
    for i in 0..p.k {
        binom *= (p.big_n - i) as f64 / (i + 1) as f64;
    }
    let ln_n = n.ln();
    let denom = 8.0 * p.chi * p.chi * p.mu * p.mu;
    let t1 = 2.0 * k * m * p.chi * (-n / (denom * ln_n.powi(6))).exp();
    let t2 = k * k * m * m * p.chi * (-p.eps * p.eps * n.sqrt() / (denom * ln_n.powi(4))).exp();
    let t3 = 2.0 * n * k * (-ln_n * ln_n / 8.0).exp();
    let t4 = (2.0 * m * k / std::f64::consts::PI).sqrt() * (-m * k / 2.0).exp();
    let mut t5 = 0.0;
    for j in p.m_bar + 1..=p.m {
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        t5 += (p.p_lambda_eps * m).powi(j as i32) / fact;
    }
    let rho_sq: f64 = p.rho.iter().map(|r| r * r).sum();
    let t6 = 2.0 * (-2.0 * p.big_k * p.big_k / rho_sq).exp();
    binom * (t1 + t2 + t3 + t4 + t5 + t6)
}

fn random_params(rng: &mut impl Rng) -> Theorem1Params {
    let k = rng.random_range(1..=3u64);
    let m = rng.random_range(2..=128u64);
    Theorem1Params {
        big_n: rng.random_range(k..=2000),
        k,
        m,
        n: 1 << rng.random_range(4..=12u32),
        chi: rng.random_range(1..=5) as f64,
        mu: rng.random_range(0.1..2.0),
        mu_tilde: rng.random_range(0.0..1.0),
        eps: rng.random_range(0.01..1.0),
        big_k: rng.random_range(0.01..1.0),
        m_bar: rng.random_range(0..=m),
        p_lambda_eps: rng.random_range(0.0..0.2),
        rho: (0..m * k).map(|_| rng.random_range(0.5..2.0) / m as f64).collect(),
        delta_m: rng.random_range(0.0..0.1),
        delta_lambda: rng.random_range(0.0..0.1),
    }
}

/// 11. Log-space bound against direct evaluation, plus monotonicity.
pub fn bound_evaluators(seed: u64) -> Outcome {
    let mut rng = stream(seed, STREAM_EXPERIMENT);
    let mut worst: f64 = 0.0;
    let mut mono_fail = Vec::new();
    for g in 0..100 {
        let p = random_params(&mut rng);
        let b = bounds::theorem1_bound(&p).expect("valid grid");
        worst = worst.max(rel_gap(b.probability(), theorem1_direct(&p)));
        let want_err = p.big_k + p.m_bar as f64 * p.delta_m + (p.m - p.m_bar) as f64 * p.delta_lambda;
        worst = worst.max(rel_gap(b.err, want_err));

        let base = b.ln_probability;
        let mut check = |label: &str, q: Theorem1Params| {
            if bounds::theorem1_bound(&q).expect("valid").ln_probability < base {
                mono_fail.push(format!("grid {g}: {label}"));
            }
        };
        check("N", Theorem1Params { big_n: p.big_n * 2, ..p.clone() });
        check("chi", Theorem1Params { chi: p.chi * 2.0, ..p.clone() });
        check("mu", Theorem1Params { mu: p.mu * 1.5, ..p.clone() });
        let t = bounds::theorem1_ln_terms(&p).expect("valid")[5];
        let t2 = bounds::theorem1_ln_terms(&Theorem1Params { big_k: p.big_k * 1.5, ..p.clone() }).expect("valid")[5];
        if t2 > t {
            mono_fail.push(format!("grid {g}: K"));
        }
    }
    let ok = worst <= 1e-6 && mono_fail.is_empty();
    let mut detail = format!("100 grids, max relative gap {worst:.2e}, {} monotonicity failures", mono_fail.len());
    if let Some(f) = mono_fail.first() {
        detail.push_str(&format!(" (first: {f})"));
    }
    Outcome::new(ok, detail)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}

/// Median wall time of `f` over `runs` calls.
pub fn time_median(runs: usize, mut f: impl FnMut()) -> f64 {
    let times: Vec<f64> = (0..runs.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    median(times)
}

/// 12. Circulant fast matvec against the dense product at `n = m`.
pub fn performance(n: usize, runs: usize, seed: u64) -> Outcome {
    let a = match StructuredMatrix::build(Family::Circulant, n, n, seed) {
        Ok(a) => a,
        Err(e) => return Outcome::new(false, format!("cannot build: {e}")),
    };
    let v = sample_gaussian(derive_seed(seed, 1), n).expect("n > 0").g;
    let dense: DenseMatrix = match a.materialize_capped(n * n) {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, format!("dense baseline unavailable: {e}")),
    };
    let mut sink = 0.0;
    let fast = time_median(runs, || sink += a.matvec(&v).expect("length")[0]);
    let slow = time_median(runs, || sink += dense.matvec(&v)[0]);
    drop(dense);
    let speedup = slow / fast;
    Outcome::new(
        speedup >= 5.0 && sink.is_finite(),
        format!("n=m={n}: structured {:.3} ms, dense {:.3} ms, speedup {speedup:.1}x", fast * 1e3, slow * 1e3),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection() {
        assert_eq!(select(None).unwrap().len(), 12);
        let only = vec!["unbiasedness".to_string(), "2".to_string()];
        assert_eq!(select(Some(&only)).unwrap(), vec![2, 5]);
        assert!(select(Some(&["nope".to_string()])).is_err());
    }

    #[test]
    fn flip_rules() {
        assert!(flip_possible(0.005, 0.005, 0.01));
        assert!(flip_possible(0.005, 1.0, 0.01));
        assert!(!flip_possible(0.005, -1.0, 0.01));
        assert!(flip_possible(-0.01, 2.0, 0.01));
        assert!(!flip_possible(0.01, 2.0, 0.01));
        assert!(!flip_possible(1.0, -1.0, 0.01));
    }

    #[test]
    fn direct_oracle_matches_bound_on_reference() {
        let mut rng = stream(3, STREAM_EXPERIMENT);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let b = bounds::theorem1_bound(&p).unwrap().probability();
            assert!(rel_gap(b, theorem1_direct(&p)) < 1e-9);
        }
    }

    #[test]
    fn corrupted_sigma_is_caught() {
        fn off_by_one(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> f64 {
            diagnostics::sigma_unchecked(a, i1, i2, n1, (n2 + 1) % a.cols())
        }
        let out = sigma_closed_forms(off_by_one);
        assert!(!out.passed);
        assert!(out.detail.contains("sigma mismatch"));
    }

    #[test]
    fn soft_performance_failure() {
        let opts = VerifyOptions { perf_soft: true, perf_n: 64, perf_runs: 3, ..Default::default() };
        let r = run_one(12, &opts);
        // at n = 64 the dense product may well win; either way the run passes
        assert!(all_passed(&[r]));
    }
}
