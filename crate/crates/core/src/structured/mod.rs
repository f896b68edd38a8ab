//! Structured Gaussian matrices in the P-model.
//!
//! Row `i` of an `m × n` structured matrix is `a_i = g · P_i`, where `g` is a
//! budget of `t` standard normals shared by all rows and `P_i` is a fixed
//! `t × n` selector. The families differ only in `P_i`:
//!
//! | family           | `t`        | entry `(i, c)`                                   |
//! |------------------|------------|--------------------------------------------------|
//! | unstructured     | `m·n`      | `g[i·n + c]`                                     |
//! | circulant        | `n`        | `g[(c − i) mod n]`                               |
//! | skew-circulant   | `n`        | `g[(c − i) mod n]`, negated when `c < i`         |
//! | Toeplitz         | `n + m − 1`| `g[c − i]` for `c ≥ i`, `g[n + i − c − 1]` below |
//! | Hankel           | `n + m − 1`| Toeplitz entry `(i, n − 1 − c)`                  |
//! | low displacement | `r·n`      | row `i` of `Σ_j Z₁(g_j) Z₋₁(h_j)`               |
//!
//! `Z₁(g)` is the circulant matrix whose row `i` is `g` shifted right by `i`
//! and `Z₋₁(h)` the skew-circulant one with wrapped entries negated. Each
//! `h_j` has `a` nonzeros of magnitude `1/√(a·r)`, so every column of every
//! `P_i` has unit norm.
//!
//! Matrices are never stored densely unless [`StructuredMatrix::materialize`]
//! is called; [`StructuredMatrix::matvec`] runs in `O((n + m) log(n + m))`
//! for every family except the unstructured one.

mod conv;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rustfft::num_complex::Complex64;

pub use conv::circular_convolve;

use crate::error::{invalid, too_large, Error, Result};
use crate::linalg::{dot, is_pow2, DenseMatrix};
use crate::rng::{stream, STREAM_LDR};
use crate::transforms::{sample_gaussian, RandomnessBudget};

/// Below this many columns `matvec` uses direct row products.
pub const FAST_PATH_MIN_N: usize = 64;

/// Default limit on the number of entries of any explicitly built matrix.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

/// Default number of nonzeros per `h` vector of a low-displacement-rank model.
pub const DEFAULT_LDR_NNZ: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Unstructured,
    Circulant,
    SkewCirculant,
    Toeplitz,
    Hankel,
    /// `rank` circulant/skew-circulant products, `nnz` nonzeros per `h` vector.
    Ldr { rank: usize, nnz: usize },
}

impl Family {
    /// Length of the Gaussian budget for an `m × n` matrix.
    pub fn budget_len(&self, m: usize, n: usize) -> usize {
        match self {
            Family::Unstructured => m * n,
            Family::Circulant | Family::SkewCirculant => n,
            Family::Toeplitz | Family::Hankel => n + m - 1,
            Family::Ldr { rank, .. } => rank * n,
        }
    }

    /// Families whose rows are shifts of one budget vector.
    pub fn is_shift(&self) -> bool {
        matches!(
            self,
            Family::Circulant | Family::SkewCirculant | Family::Toeplitz | Family::Hankel
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Unstructured => "unstructured",
            Family::Circulant => "circulant",
            Family::SkewCirculant => "skew_circulant",
            Family::Toeplitz => "toeplitz",
            Family::Hankel => "hankel",
            Family::Ldr { .. } => "ldr",
        }
    }

    pub fn all_default() -> [Family; 6] {
        [
            Family::Unstructured,
            Family::Circulant,
            Family::SkewCirculant,
            Family::Toeplitz,
            Family::Hankel,
            Family::Ldr { rank: 2, nnz: DEFAULT_LDR_NNZ },
        ]
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Ldr { rank, nnz } => f.pad(&format!("ldr:{rank}:{nnz}")),
            other => f.pad(other.name()),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts the family names plus `ldr`, `ldr:RANK` and `ldr:RANK:NNZ`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let fam = match head {
            "unstructured" | "dense" | "gaussian" => Family::Unstructured,
            "circulant" => Family::Circulant,
            "skew_circulant" | "skew-circulant" | "skewcirculant" => Family::SkewCirculant,
            "toeplitz" => Family::Toeplitz,
            "hankel" => Family::Hankel,
            "ldr" => {
                let num = |p: Option<&str>, default: usize| -> Result<usize> {
                    match p {
                        None => Ok(default),
                        Some(x) => x
                            .parse()
                            .map_err(|_| invalid(format!("bad ldr parameter {x:?} in {s:?}"))),
                    }
                };
                let rank = num(parts.next(), 2)?;
                let nnz = num(parts.next(), DEFAULT_LDR_NNZ)?;
                Family::Ldr { rank, nnz }
            }
            _ => return Err(invalid(format!("unknown family {s:?}"))),
        };
        if parts.next().is_some() {
            return Err(invalid(format!("trailing parameters in family {s:?}")));
        }
        Ok(fam)
    }
}

/// A sparse vector of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub n: usize,
    /// `(position, value)`, positions strictly increasing.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &(p, x) in &self.entries {
            v[p] = x;
        }
        v
    }
}

enum Spectrum {
    /// One Toeplitz-embedded kernel; `reverse` marks Hankel input reversal.
    Shift { kernel: Vec<Complex64>, reverse: bool },
    /// One circulant kernel per `g_j` block.
    Ldr { kernels: Vec<Vec<Complex64>> },
}

/// An `m × n` matrix of the P-model.
pub struct StructuredMatrix {
    family: Family,
    m: usize,
    n: usize,
    budget: RandomnessBudget,
    h_vectors: Vec<SparseVector>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for StructuredMatrix {
    fn clone(&self) -> Self {
        Self {
            family: self.family,
            m: self.m,
            n: self.n,
            budget: self.budget.clone(),
            h_vectors: self.h_vectors.clone(),
            spectrum: OnceLock::new(),
        }
    }
}

impl fmt::Debug for StructuredMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructuredMatrix")
            .field("family", &self.family)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("t", &self.budget.len())
            .field("seed", &self.budget.seed)
            .finish()
    }
}

fn check_shape(family: Family, m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(invalid(format!("dimensions must be positive, got m={m}, n={n}")));
    }
    if (family.is_shift() || matches!(family, Family::Ldr { .. })) && m > n {
        return Err(invalid(format!("{} requires m <= n, got m={m}, n={n}", family.name())));
    }
    if let Family::Ldr { rank, nnz } = family {
        if rank == 0 {
            return Err(invalid("ldr displacement rank must be at least 1"));
        }
        if nnz == 0 || nnz > n {
            return Err(invalid(format!("ldr needs 1 <= a <= n, got a={nnz}, n={n}")));
        }
    }
    Ok(())
}

impl StructuredMatrix {
    /// Samples a matrix of the given family; deterministic in `seed`.
    ///
    /// Any positive `n` is accepted here; the embedding pipeline pads inputs
    /// to a power of two before building its matrix.
    pub fn build(family: Family, m: usize, n: usize, seed: u64) -> Result<Self> {
        check_shape(family, m, n)?;
        let budget = sample_gaussian(seed, family.budget_len(m, n))?;
        let h_vectors = match family {
            Family::Ldr { rank, nnz } => {
                let mut rng = stream(seed, STREAM_LDR);
                let mag = 1.0 / ((nnz * rank) as f64).sqrt();
                (0..rank)
                    .map(|_| {
                        let mut pos = sample_indices(&mut rng, n, nnz).into_vec();
                        pos.sort_unstable();
                        let entries = pos
                            .into_iter()
                            .map(|p| (p, if rng.random::<bool>() { mag } else { -mag }))
                            .collect();
                        SparseVector { n, entries }
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { family, m, n, budget, h_vectors, spectrum: OnceLock::new() })
    }

    /// Builds a non-ldr matrix from an explicit budget.
    pub fn with_budget(family: Family, m: usize, n: usize, budget: RandomnessBudget) -> Result<Self> {
        if matches!(family, Family::Ldr { .. }) {
            return Err(invalid("ldr matrices need h vectors; use with_ldr_parts"));
        }
        check_shape(family, m, n)?;
        let t = family.budget_len(m, n);
        if budget.len() != t {
            return Err(invalid(format!("{} needs t={t}, budget has {}", family.name(), budget.len())));
        }
        Ok(Self { family, m, n, budget, h_vectors: Vec::new(), spectrum: OnceLock::new() })
    }

    /// Builds an ldr matrix from an explicit budget and `h` vectors.
    pub fn with_ldr_parts(
        m: usize,
        n: usize,
        budget: RandomnessBudget,
        h_vectors: Vec<SparseVector>,
    ) -> Result<Self> {
        let rank = h_vectors.len();
        let nnz = h_vectors.first().map_or(0, |h| h.entries.len());
        let family = Family::Ldr { rank, nnz };
        check_shape(family, m, n)?;
        if budget.len() != rank * n {
            return Err(invalid(format!("ldr needs t={}, budget has {}", rank * n, budget.len())));
        }
        if h_vectors.iter().any(|h| h.n != n || h.entries.iter().any(|&(p, _)| p >= n)) {
            return Err(invalid("h vectors must have length n"));
        }
        Ok(Self { family, m, n, budget, h_vectors, spectrum: OnceLock::new() })
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn rows(&self) -> usize {
        self.m
    }
    pub fn cols(&self) -> usize {
        self.n
    }
    /// Budget length `t`.
    pub fn budget_len(&self) -> usize {
        self.budget.len()
    }
    pub fn budget(&self) -> &RandomnessBudget {
        &self.budget
    }
    pub fn h_vectors(&self) -> &[SparseVector] {
        &self.h_vectors
    }
    pub fn seed(&self) -> Option<u64> {
        self.budget.seed
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i >= self.m {
            return Err(invalid(format!("row index {i} out of range 0..{}", self.m)));
        }
        Ok(())
    }

    fn check_col(&self, c: usize) -> Result<()> {
        if c >= self.n {
            return Err(invalid(format!("column index {c} out of range 0..{}", self.n)));
        }
        Ok(())
    }

    /// Budget index and sign of entry `(i, c)` for single-selector families.
    fn shift_slot(&self, i: usize, c: usize) -> (usize, f64) {
        let n = self.n;
        match self.family {
            Family::Unstructured => (i * n + c, 1.0),
            Family::Circulant => ((c + n - i) % n, 1.0),
            Family::SkewCirculant => ((c + n - i) % n, if c < i { -1.0 } else { 1.0 }),
            Family::Toeplitz => (toeplitz_slot(n, i, c), 1.0),
            Family::Hankel => (toeplitz_slot(n, i, n - 1 - c), 1.0),
            Family::Ldr { .. } => unreachable!("ldr entries have several slots"),
        }
    }

    /// Column `c` of `P_i` as sparse `(budget index, coefficient)` pairs.
    pub fn p_column(&self, i: usize, c: usize) -> Result<Vec<(usize, f64)>> {
        self.check_row(i)?;
        self.check_col(c)?;
        Ok(self.p_column_unchecked(i, c))
    }

    fn p_column_unchecked(&self, i: usize, c: usize) -> Vec<(usize, f64)> {
        if !matches!(self.family, Family::Ldr { .. }) {
            return vec![self.shift_slot(i, c)];
        }
        let n = self.n;
        let mut out = Vec::with_capacity(self.h_vectors.len() * 2);
        for (j, h) in self.h_vectors.iter().enumerate() {
            for &(p, hv) in &h.entries {
                // Z₋₁(h)[k, c] = ±h[p] with k = (c − p) mod n, negated when wrapped
                let k = (c + n - p) % n;
                let l = (k + n - i) % n;
                let sign = if c < k { -1.0 } else { 1.0 };
                out.push((j * n + l, hv * sign));
            }
        }
        out
    }

    fn entry_unchecked(&self, i: usize, c: usize) -> f64 {
        let g = &self.budget.g;
        match self.family {
            Family::Ldr { .. } => self
                .p_column_unchecked(i, c)
                .into_iter()
                .map(|(l, w)| g[l] * w)
                .sum(),
            _ => {
                let (l, s) = self.shift_slot(i, c);
                g[l] * s
            }
        }
    }

    pub fn entry(&self, i: usize, c: usize) -> Result<f64> {
        self.check_row(i)?;
        self.check_col(c)?;
        Ok(self.entry_unchecked(i, c))
    }

    /// Row `a_i = g · P_i`.
    pub fn row(&self, i: usize) -> Result<Vec<f64>> {
        self.check_row(i)?;
        Ok(self.row_unchecked(i))
    }

    fn row_unchecked(&self, i: usize) -> Vec<f64> {
        match self.family {
            Family::Unstructured => self.budget.g[i * self.n..(i + 1) * self.n].to_vec(),
            _ => (0..self.n).map(|c| self.entry_unchecked(i, c)).collect(),
        }
    }

    /// Explicit `t × n` selector `P_i`, refused above [`DEFAULT_DENSE_CAP`] entries.
    pub fn p_matrix(&self, i: usize) -> Result<DenseMatrix> {
        self.p_matrix_capped(i, DEFAULT_DENSE_CAP)
    }

    pub fn p_matrix_capped(&self, i: usize, cap: usize) -> Result<DenseMatrix> {
        self.check_row(i)?;
        let t = self.budget_len();
        if t.saturating_mul(self.n) > cap {
            return Err(too_large(format!("P_i would have {t}x{} entries (cap {cap})", self.n)));
        }
        let mut p = DenseMatrix::zeros(t, self.n);
        for c in 0..self.n {
            for (l, w) in self.p_column_unchecked(i, c) {
                p.data[l * self.n + c] += w;
            }
        }
        Ok(p)
    }

    /// Dense `m × n` copy, refused above [`DEFAULT_DENSE_CAP`] entries.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        self.materialize_capped(DEFAULT_DENSE_CAP)
    }

    /// Dense copy with a caller-chosen entry cap; allocation failure is
    /// reported as a resource-limit error.
    pub fn materialize_capped(&self, cap: usize) -> Result<DenseMatrix> {
        let size = self.m.saturating_mul(self.n);
        if size > cap {
            return Err(too_large(format!("{}x{} exceeds dense cap {cap}", self.m, self.n)));
        }
        let mut data: Vec<f64> = Vec::new();
        data.try_reserve_exact(size)
            .map_err(|e| too_large(format!("cannot allocate {}x{} matrix: {e}", self.m, self.n)))?;
        for i in 0..self.m {
            data.extend(self.row_unchecked(i));
        }
        Ok(DenseMatrix { rows: self.m, cols: self.n, data })
    }

    /// `A v`, via FFT convolution for structured families with `n ≥ 64`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(invalid(format!("vector has length {}, matrix has {} columns", v.len(), self.n)));
        }
        Ok(match self.family {
            Family::Unstructured => (0..self.m)
                .map(|i| dot(&self.budget.g[i * self.n..(i + 1) * self.n], v))
                .collect(),
            _ if self.n < FAST_PATH_MIN_N => self.matvec_direct(v),
            _ => self.matvec_fast(v),
        })
    }

    /// `A v` by explicit row products, `O(mn)`.
    pub fn matvec_direct(&self, v: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| dot(&self.row_unchecked(i), v)).collect()
    }

    fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| self.compute_spectrum())
    }

    fn compute_spectrum(&self) -> Spectrum {
        let (m, n) = (self.m, self.n);
        let g = &self.budget.g;
        match self.family {
            Family::Circulant if is_pow2(n) => {
                // plain length-n circular convolution
                let b: Vec<f64> = (0..n).map(|r| g[(n - r) % n]).collect();
                Spectrum::Shift { kernel: conv::spectrum(&b, n), reverse: false }
            }
            Family::Ldr { .. } => {
                let kernels = (0..self.h_vectors.len())
                    .map(|j| {
                        let block = &g[j * n..(j + 1) * n];
                        let len = conv::embedding_len(m, n);
                        let b = conv::toeplitz_kernel(m, n, len, |d| {
                            block[d.rem_euclid(n as isize) as usize]
                        });
                        conv::spectrum(&b, len)
                    })
                    .collect();
                Spectrum::Ldr { kernels }
            }
            family => {
                let len = conv::embedding_len(m, n);
                let coef = |d: isize| -> f64 {
                    match family {
                        Family::Circulant => g[d.rem_euclid(n as isize) as usize],
                        Family::SkewCirculant => {
                            let x = g[d.rem_euclid(n as isize) as usize];
                            if d < 0 {
                                -x
                            } else {
                                x
                            }
                        }
                        Family::Toeplitz | Family::Hankel => {
                            if d >= 0 {
                                g[d as usize]
                            } else {
                                g[n - 1 + (-d) as usize]
                            }
                        }
                        _ => unreachable!(),
                    }
                };
                let b = conv::toeplitz_kernel(m, n, len, coef);
                Spectrum::Shift {
                    kernel: conv::spectrum(&b, len),
                    reverse: family == Family::Hankel,
                }
            }
        }
    }

    fn matvec_fast(&self, v: &[f64]) -> Vec<f64> {
        match self.spectrum() {
            Spectrum::Shift { kernel, reverse } => {
                if *reverse {
                    let rv: Vec<f64> = v.iter().rev().copied().collect();
                    conv::convolve_with_spectrum(&rv, kernel, self.m)
                } else {
                    conv::convolve_with_spectrum(v, kernel, self.m)
                }
            }
            Spectrum::Ldr { kernels } => {
                let mut out = vec![0.0; self.m];
                for (h, kernel) in self.h_vectors.iter().zip(kernels) {
                    let u = skew_sparse_matvec(h, v);
                    for (o, x) in out.iter_mut().zip(conv::convolve_with_spectrum(&u, kernel, self.m)) {
                        *o += x;
                    }
                }
                out
            }
        }
    }
}

fn toeplitz_slot(n: usize, i: usize, c: usize) -> usize {
    if c >= i {
        c - i
    } else {
        n + i - c - 1
    }
}

/// `Z₋₁(h) v` for sparse `h` in `O(nnz · n)`.
fn skew_sparse_matvec(h: &SparseVector, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for &(p, hv) in &h.entries {
        for (k, o) in out.iter_mut().enumerate() {
            let c = k + p;
            *o += if c < n { hv * v[c] } else { -hv * v[c - n] };
        }
    }
    out
}
