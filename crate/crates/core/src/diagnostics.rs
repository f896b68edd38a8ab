//! Structuredness diagnostics for P-models.
//!
//! `σ_{i₁,i₂}(n₁,n₂) = ⟨p^{i₁}_{n₁}, p^{i₂}_{n₂}⟩` is the inner product of
//! column `n₁` of `P_{i₁}` with column `n₂` of `P_{i₂}`. From it we derive the
//! coherence graphs, the chromatic number `χ[P]`, the coherence `μ[P]` and the
//! unicoherence `μ̃[P]`, and check the s-vector identities that express
//! `⟨a_i D₁, x⟩` as `⟨g, s⟩`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{invalid, too_large, Result};
use crate::linalg::{dot, norm, DenseMatrix};
use crate::structured::{Family, StructuredMatrix, DEFAULT_DENSE_CAP};
use crate::transforms::SignDiagonal;

/// `|σ|` above this counts as nonzero.
pub const SIGMA_ZERO_TOL: f64 = 1e-10;

/// Size limits for the quadratic and exponential diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagnosticCaps {
    /// Largest `n` for which coherence graphs are built.
    pub max_graph_n: usize,
    /// Largest vertex count handed to the exact chromatic solver.
    pub max_exact_vertices: usize,
    /// Largest entry count of an explicit `P_i`.
    pub max_dense: usize,
}

impl Default for DiagnosticCaps {
    fn default() -> Self {
        Self { max_graph_n: 512, max_exact_vertices: 64, max_dense: DEFAULT_DENSE_CAP }
    }
}

fn check_indices(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> Result<()> {
    let (m, n) = (a.rows(), a.cols());
    if i1 >= m || i2 >= m {
        return Err(invalid(format!("row indices ({i1}, {i2}) out of range 0..{m}")));
    }
    if n1 >= n || n2 >= n {
        return Err(invalid(format!("column indices ({n1}, {n2}) out of range 0..{n}")));
    }
    Ok(())
}

/// `σ_{i₁,i₂}(n₁,n₂)`; closed form for all families except ldr.
pub fn sigma(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> Result<f64> {
    check_indices(a, i1, i2, n1, n2)?;
    Ok(sigma_unchecked(a, i1, i2, n1, n2))
}

/// `σ` without index checks; indices must be in range.
pub fn sigma_unchecked(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> f64 {
    let n = a.cols() as i64;
    let (i1s, i2s, n1s, n2s) = (i1 as i64, i2 as i64, n1 as i64, n2 as i64);
    let hit = |b: bool| if b { 1.0 } else { 0.0 };
    match a.family() {
        Family::Unstructured => hit(i1 == i2 && n1 == n2),
        Family::Circulant => hit((n1s - n2s - (i1s - i2s)).rem_euclid(n) == 0),
        Family::SkewCirculant => {
            if (n1s - n2s - (i1s - i2s)).rem_euclid(n) != 0 {
                0.0
            } else {
                let s1 = if n1 < i1 { -1.0 } else { 1.0 };
                let s2 = if n2 < i2 { -1.0 } else { 1.0 };
                s1 * s2
            }
        }
        Family::Toeplitz => hit(n1s - i1s == n2s - i2s),
        Family::Hankel => hit(n1s + i1s == n2s + i2s),
        Family::Ldr { .. } => sigma_from_columns(a, i1, i2, n1, n2),
    }
}

/// `σ` by multiplying the sparse columns of `P_{i₁}` and `P_{i₂}`.
pub fn sigma_from_columns(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> f64 {
    let c1 = a.p_column(i1, n1).expect("indices checked");
    let c2 = a.p_column(i2, n2).expect("indices checked");
    let mut s = 0.0;
    for &(l1, w1) in &c1 {
        for &(l2, w2) in &c2 {
            if l1 == l2 {
                s += w1 * w2;
            }
        }
    }
    s
}

/// Coherence graph `G_{i₁,i₂}`.
///
/// Vertices are the pairs `n₁ < n₂` for which `σ_{i₁,i₂}` is nonzero in either
/// orientation, `(n₁,n₂)` or `(n₂,n₁)`; both orientations carry the
/// cross terms `x_{n₁} x_{n₂}` of the s-vector expansion. Two vertices are
/// adjacent when their pairs share an index.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceGraph {
    pub i1: usize,
    pub i2: usize,
    /// Sorted lexicographically.
    pub vertices: Vec<(usize, usize)>,
    pub adjacency: Vec<Vec<usize>>,
}

impl CoherenceGraph {
    /// Builds a graph on the given pairs, joining pairs that intersect.
    pub fn from_pairs(i1: usize, i2: usize, mut vertices: Vec<(usize, usize)>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        let top = vertices.iter().map(|&(_, b)| b + 1).max().unwrap_or(0);
        let mut by_index: Vec<Vec<usize>> = vec![Vec::new(); top];
        for (v, &(a, b)) in vertices.iter().enumerate() {
            by_index[a].push(v);
            by_index[b].push(v);
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for members in &by_index {
            for (x, &u) in members.iter().enumerate() {
                for &w in &members[x + 1..] {
                    adjacency[u].push(w);
                    adjacency[w].push(u);
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Self { i1, i2, vertices, adjacency }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges `(u, w)` with `u < w`, as vertex indices.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().filter(move |&&w| w > u).map(move |&w| (u, w)))
    }

    /// One edge per line as `a,b — c,d`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, w) in self.edges() {
            let (a, b) = self.vertices[u];
            let (c, d) = self.vertices[w];
            let _ = writeln!(out, "{a},{b} — {c},{d}");
        }
        out
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.num_vertices()];
        let mut comps = Vec::new();
        for start in 0..self.num_vertices() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    fn is_bipartite(&self, comp: &[usize]) -> bool {
        let mut side = vec![usize::MAX; self.num_vertices()];
        for &start in comp {
            if side[start] != usize::MAX {
                continue;
            }
            side[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if side[w] == usize::MAX {
                        side[w] = 1 - side[u];
                        queue.push_back(w);
                    } else if side[w] == side[u] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn coherence_graph(a: &StructuredMatrix, i1: usize, i2: usize) -> Result<CoherenceGraph> {
    coherence_graph_capped(a, i1, i2, DiagnosticCaps::default().max_graph_n)
}

pub fn coherence_graph_capped(
    a: &StructuredMatrix,
    i1: usize,
    i2: usize,
    max_n: usize,
) -> Result<CoherenceGraph> {
    let n = a.cols();
    if n > max_n {
        return Err(too_large(format!("coherence graph needs n <= {max_n}, got {n}")));
    }
    check_indices(a, i1, i2, 0, 0)?;
    let mut vertices = Vec::new();
    for n1 in 0..n {
        for n2 in n1 + 1..n {
            if sigma_unchecked(a, i1, i2, n1, n2).abs() > SIGMA_ZERO_TOL
                || sigma_unchecked(a, i1, i2, n2, n1).abs() > SIGMA_ZERO_TOL
            {
                vertices.push((n1, n2));
            }
        }
    }
    Ok(CoherenceGraph::from_pairs(i1, i2, vertices))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    /// Color of each vertex, `0..colors_used`.
    pub colors: Vec<usize>,
    pub colors_used: usize,
}

impl Coloring {
    pub fn is_proper(&self, g: &CoherenceGraph) -> bool {
        g.edges().all(|(u, w)| self.colors[u] != self.colors[w])
    }
}

/// Smallest-available-color greedy coloring in lexicographic vertex order.
pub fn greedy_coloring(g: &CoherenceGraph) -> Coloring {
    let mut colors = vec![usize::MAX; g.num_vertices()];
    let mut used = 0;
    let mut taken = Vec::new();
    for v in 0..g.num_vertices() {
        taken.clear();
        taken.resize(g.adjacency[v].len() + 1, false);
        for &w in &g.adjacency[v] {
            let c = colors[w];
            if c < taken.len() {
                taken[c] = true;
            }
        }
        let c = taken.iter().position(|&t| !t).expect("degree + 1 slots");
        colors[v] = c;
        used = used.max(c + 1);
    }
    Coloring { colors, colors_used: used }
}

/// Exact chromatic number by iterative deepening over the color count,
/// solved per connected component. Refuses graphs above 64 vertices.
pub fn exact_chromatic(g: &CoherenceGraph) -> Result<usize> {
    exact_chromatic_capped(g, DiagnosticCaps::default().max_exact_vertices)
}

pub fn exact_chromatic_capped(g: &CoherenceGraph, max_vertices: usize) -> Result<usize> {
    if g.num_vertices() > max_vertices {
        return Err(too_large(format!(
            "exact coloring limited to {max_vertices} vertices, graph has {}",
            g.num_vertices()
        )));
    }
    let mut chi = 0;
    for comp in g.components() {
        let c = if comp.len() == 1 {
            1
        } else if g.is_bipartite(&comp) {
            2
        } else {
            let mut k = 3;
            while !colorable(g, &comp, k) {
                k += 1;
            }
            k
        };
        chi = chi.max(c);
    }
    Ok(chi)
}

fn colorable(g: &CoherenceGraph, comp: &[usize], k: usize) -> bool {
    // highest degree first tends to fail fast
    let mut order = comp.to_vec();
    order.sort_by_key(|&v| std::cmp::Reverse(g.adjacency[v].len()));
    let mut colors = vec![usize::MAX; g.num_vertices()];
    fn go(g: &CoherenceGraph, order: &[usize], pos: usize, k: usize, colors: &mut [usize], max_used: usize) -> bool {
        let Some(&v) = order.get(pos) else { return true };
        // symmetry breaking: never open more than one new color at a time
        let limit = (max_used + 1).min(k);
        for c in 0..limit {
            if g.adjacency[v].iter().all(|&w| colors[w] != c) {
                colors[v] = c;
                if go(g, order, pos + 1, k, colors, max_used.max(c + 1)) {
                    return true;
                }
                colors[v] = usize::MAX;
            }
        }
        false
    }
    go(g, &order, 0, k, &mut colors, 0)
}

/// `χ[P]`, `μ[P]` and `μ̃[P]` of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct PModelStats {
    pub chi: usize,
    /// False when any pair used the greedy upper bound or pairs were sampled.
    pub chi_is_exact: bool,
    pub mu: f64,
    pub mu_tilde: f64,
    /// `χ(i, j)` for every inspected pair, indexed `[i][j]` when all pairs
    /// were inspected.
    pub per_pair_chis: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Default)]
pub struct StatsOptions {
    pub exact: bool,
    pub caps: DiagnosticCaps,
    /// Restrict to these `(i, j)` row pairs; marks `chi` inexact.
    pub pairs: Option<Vec<(usize, usize)>>,
}

pub fn model_stats(a: &StructuredMatrix, exact: bool) -> Result<PModelStats> {
    model_stats_with(a, &StatsOptions { exact, ..Default::default() })
}

/// Statistics over all row pairs `0 ≤ i, j < m` for `χ` and `μ`, and over
/// `i < j` for `μ̃`.
pub fn model_stats_with(a: &StructuredMatrix, opts: &StatsOptions) -> Result<PModelStats> {
    let (m, n) = (a.rows(), a.cols());
    if n > opts.caps.max_graph_n {
        return Err(too_large(format!("diagnostics need n <= {}, got {n}", opts.caps.max_graph_n)));
    }
    let sampled = opts.pairs.is_some();
    let pairs: Vec<(usize, usize)> = match &opts.pairs {
        Some(p) => {
            if let Some(&(i, j)) = p.iter().find(|&&(i, j)| i >= m || j >= m) {
                return Err(invalid(format!("row pair ({i}, {j}) out of range 0..{m}")));
            }
            p.clone()
        }
        None => (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect(),
    };

    let mut chi = 0;
    let mut chi_is_exact = opts.exact && !sampled;
    let mut mu_sq_max: f64 = 0.0;
    let mut mu_tilde: f64 = 0.0;
    let mut table = (!sampled).then(|| vec![vec![0usize; m]; m]);

    for &(i, j) in &pairs {
        let mut sq = 0.0;
        for n1 in 0..n {
            for n2 in n1 + 1..n {
                let s = sigma_unchecked(a, i, j, n1, n2);
                sq += s * s;
            }
        }
        mu_sq_max = mu_sq_max.max(sq / n as f64);
        if i < j {
            let diag: f64 = (0..n).map(|c| sigma_unchecked(a, i, j, c, c).abs()).sum();
            mu_tilde = mu_tilde.max(diag);
        }

        let g = coherence_graph_capped(a, i, j, opts.caps.max_graph_n)?;
        let c = if opts.exact && g.num_vertices() <= opts.caps.max_exact_vertices {
            exact_chromatic_capped(&g, opts.caps.max_exact_vertices)?
        } else {
            chi_is_exact = false;
            greedy_coloring(&g).colors_used
        };
        chi = chi.max(c);
        if let Some(t) = table.as_mut() {
            t[i][j] = c;
        }
    }

    Ok(PModelStats { chi, chi_is_exact, mu: mu_sq_max.sqrt(), mu_tilde, per_pair_chis: table })
}

fn p_matrices(a: &StructuredMatrix, cap: usize) -> Result<Vec<DenseMatrix>> {
    (0..a.rows()).map(|i| a.p_matrix_capped(i, cap)).collect()
}

/// `max_{i,c} |‖p^i_c‖ − 1|` from the explicit `P_i`.
pub fn max_column_norm_deviation(a: &StructuredMatrix) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in p_matrices(a, DEFAULT_DENSE_CAP)? {
        for c in 0..p.cols {
            worst = worst.max((norm(&p.column(c)) - 1.0).abs());
        }
    }
    Ok(worst)
}

/// `max_i max_{c ≠ c'} |⟨p^i_c, p^i_{c'}⟩|` from the explicit `P_i`.
pub fn max_column_cross_dot(a: &StructuredMatrix) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in p_matrices(a, DEFAULT_DENSE_CAP)? {
        let cols: Vec<Vec<f64>> = (0..p.cols).map(|c| p.column(c)).collect();
        for (c, u) in cols.iter().enumerate() {
            for w in &cols[c + 1..] {
                worst = worst.max(dot(u, w).abs());
            }
        }
    }
    Ok(worst)
}

/// Every column of every `P_i` has unit norm (within `1e-12`).
pub fn check_normalized(a: &StructuredMatrix) -> Result<bool> {
    Ok(max_column_norm_deviation(a)? <= 1e-12)
}

/// Distinct columns of every `P_i` are orthogonal (within `1e-12`).
pub fn check_orthogonality(a: &StructuredMatrix) -> Result<bool> {
    Ok(max_column_cross_dot(a)? <= 1e-12)
}

fn check_vector_len(a: &StructuredMatrix, d1: &SignDiagonal, x: &[f64]) -> Result<()> {
    if d1.len() != a.cols() || x.len() != a.cols() {
        return Err(invalid(format!(
            "D1 has {} entries and x has {}, matrix has {} columns",
            d1.len(),
            x.len(),
            a.cols()
        )));
    }
    if a.budget_len().saturating_mul(a.cols()) > DEFAULT_DENSE_CAP {
        return Err(too_large("s-vectors are limited to t*n <= 2^24"));
    }
    Ok(())
}

/// `s_l = Σ_u d_u p^i_{l,u} x_u`, so that `⟨a_i D₁, x⟩ = ⟨g, s⟩`.
pub fn s_vector(a: &StructuredMatrix, d1: &SignDiagonal, x: &[f64], i: usize) -> Result<Vec<f64>> {
    check_vector_len(a, d1, x)?;
    let mut s = vec![0.0; a.budget_len()];
    for u in 0..a.cols() {
        let coeff = d1.d[u] * x[u];
        for (l, w) in a.p_column(i, u)? {
            s[l] += w * coeff;
        }
    }
    Ok(s)
}

/// `⟨a_i D₁, x⟩` computed from the row itself.
pub fn signed_row_dot(a: &StructuredMatrix, d1: &SignDiagonal, x: &[f64], i: usize) -> Result<f64> {
    check_vector_len(a, d1, x)?;
    Ok(dot(&d1.apply(&a.row(i)?), x))
}

/// `⟨s^{i₁}(x₁), s^{i₂}(x₂)⟩` expanded through `σ`:
/// `Σ_c σ(c,c) x₁_c x₂_c + Σ_{c<c'} d_c d_{c'} [x₁_c x₂_{c'} σ(c,c') + x₁_{c'} x₂_c σ(c',c)]`.
pub fn s_dot_expansion(
    a: &StructuredMatrix,
    d1: &SignDiagonal,
    x1: &[f64],
    x2: &[f64],
    i1: usize,
    i2: usize,
) -> Result<f64> {
    check_vector_len(a, d1, x1)?;
    check_vector_len(a, d1, x2)?;
    check_indices(a, i1, i2, 0, 0)?;
    let n = a.cols();
    let d = &d1.d;
    let mut diag = 0.0;
    let mut cross = 0.0;
    for c in 0..n {
        diag += sigma_unchecked(a, i1, i2, c, c) * x1[c] * x2[c];
        for c2 in c + 1..n {
            let fwd = sigma_unchecked(a, i1, i2, c, c2);
            let back = sigma_unchecked(a, i1, i2, c2, c);
            if fwd != 0.0 || back != 0.0 {
                cross += d[c] * d[c2] * (x1[c] * x2[c2] * fwd + x1[c2] * x2[c] * back);
            }
        }
    }
    Ok(diag + cross)
}

/// `‖s^{i}(x)‖² = Σ_c σ_{i,i}(c,c) x_c² + 2 Σ_{c<c'} d_c d_{c'} x_c x_{c'} σ_{i,i}(c,c')`.
pub fn s_norm_sq_expansion(a: &StructuredMatrix, d1: &SignDiagonal, x: &[f64], i: usize) -> Result<f64> {
    check_vector_len(a, d1, x)?;
    check_indices(a, i, i, 0, 0)?;
    let n = a.cols();
    let mut total = 0.0;
    for c in 0..n {
        total += sigma_unchecked(a, i, i, c, c) * x[c] * x[c];
        for c2 in c + 1..n {
            let s = sigma_unchecked(a, i, i, c, c2);
            if s != 0.0 {
                total += 2.0 * d1.d[c] * d1.d[c2] * x[c] * x[c2] * s;
            }
        }
    }
    Ok(total)
}

/// Largest deviations found by [`verify_s_identities`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SIdentityReport {
    /// `|⟨a_i D₁, x_j⟩ − ⟨g, s^{i,j}⟩|`.
    pub row_identity: f64,
    /// Same row, different basis vectors.
    pub same_row: f64,
    /// Different rows, any basis vectors.
    pub cross_row: f64,
    /// `‖s^{i,j}‖²` against its expansion.
    pub norm: f64,
    /// `max |⟨s^{i,j₁}, s^{i,j₂}⟩|` over `j₁ ≠ j₂`; zero for orthogonal-column families.
    pub same_row_magnitude: f64,
}

impl SIdentityReport {
    pub fn max_deviation(&self) -> f64 {
        self.row_identity.max(self.same_row).max(self.cross_row).max(self.norm)
    }
}

/// Evaluates both sides of the s-vector identities for every row pair and
/// basis pair. `basis` must be orthonormal within `1e-10`.
pub fn verify_s_identities(
    a: &StructuredMatrix,
    d1: &SignDiagonal,
    basis: &[Vec<f64>],
) -> Result<SIdentityReport> {
    for (j, x) in basis.iter().enumerate() {
        check_vector_len(a, d1, x)?;
        for (j2, y) in basis.iter().enumerate() {
            let want = if j == j2 { 1.0 } else { 0.0 };
            if (dot(x, y) - want).abs() > 1e-10 {
                return Err(invalid(format!("basis is not orthonormal at ({j}, {j2})")));
            }
        }
    }
    let m = a.rows();
    let g = &a.budget().g;
    let s: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i| basis.iter().map(|x| s_vector(a, d1, x, i)).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let mut rep = SIdentityReport::default();
    for i1 in 0..m {
        for (j1, x1) in basis.iter().enumerate() {
            let lhs = signed_row_dot(a, d1, x1, i1)?;
            rep.row_identity = rep.row_identity.max((lhs - dot(g, &s[i1][j1])).abs());
            let nrm = s_norm_sq_expansion(a, d1, x1, i1)?;
            rep.norm = rep.norm.max((dot(&s[i1][j1], &s[i1][j1]) - nrm).abs());
            for i2 in 0..m {
                for (j2, x2) in basis.iter().enumerate() {
                    if i1 == i2 && j1 == j2 {
                        continue;
                    }
                    let direct = dot(&s[i1][j1], &s[i2][j2]);
                    let dev = (direct - s_dot_expansion(a, d1, x1, x2, i1, i2)?).abs();
                    if i1 == i2 {
                        rep.same_row = rep.same_row.max(dev);
                        rep.same_row_magnitude = rep.same_row_magnitude.max(direct.abs());
                    } else {
                        rep.cross_row = rep.cross_row.max(dev);
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Every `|x_i| ≤ θ/√n` for a unit vector `x`.
pub fn is_balanced(x: &[f64], theta: f64) -> Result<bool> {
    if x.is_empty() {
        return Err(invalid("empty vector"));
    }
    let nrm = norm(x);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("balancedness needs a unit vector, norm is {nrm}")));
    }
    let bound = theta / (x.len() as f64).sqrt();
    Ok(x.iter().all(|v| v.abs() <= bound))
}

/// Gram–Schmidt orthogonalization followed by rescaling each output to the
/// norm of its input. Returns the new vectors and `max_i ‖ŝ_i − s_i‖`.
pub fn gram_schmidt_perturb(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let Some(first) = vectors.first() else {
        return Ok((Vec::new(), 0.0));
    };
    if vectors.iter().any(|v| v.len() != first.len()) {
        return Err(invalid("vectors must share one length"));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut out = Vec::with_capacity(vectors.len());
    let mut worst: f64 = 0.0;
    for (i, s) in vectors.iter().enumerate() {
        let len = norm(s);
        let mut w = s.clone();
        for e in &basis {
            let proj = dot(&w, e);
            w.iter_mut().zip(e).for_each(|(x, y)| *x -= proj * y);
        }
        let wn = norm(&w);
        if len == 0.0 || wn <= 1e-10 * len {
            return Err(invalid(format!("vectors are linearly dependent at index {i}")));
        }
        let e: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let hat: Vec<f64> = e.iter().map(|x| x * len).collect();
        worst = worst.max(norm(&crate::linalg::sub(&hat, s)));
        basis.push(e);
        out.push(hat);
    }
    Ok((out, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{sample_gaussian, sample_signs, RandomnessBudget};
    use proptest::prelude::*;

    fn circ(n: usize, m: usize) -> StructuredMatrix {
        StructuredMatrix::build(Family::Circulant, m, n, 1).unwrap()
    }

    fn cycle(len: usize) -> CoherenceGraph {
        // pairs {k, k+1 mod len} form a cycle of length len
        let pairs = (0..len).map(|k| {
            let (a, b) = (k, (k + 1) % len);
            (a.min(b), a.max(b))
        });
        CoherenceGraph::from_pairs(0, 0, pairs.collect())
    }

    fn random_orthonormal(seed: u64, n: usize, k: usize) -> Vec<Vec<f64>> {
        let raw: Vec<Vec<f64>> = (0..k).map(|j| sample_gaussian(seed + j as u64, n).unwrap().g).collect();
        let (q, _) = gram_schmidt_perturb(&raw).unwrap();
        q.into_iter()
            .map(|v| {
                let s = norm(&v);
                v.into_iter().map(|x| x / s).collect()
            })
            .collect()
    }

    #[test]
    fn circulant_sigma_examples() {
        let a = circ(5, 2);
        assert_eq!(sigma(&a, 0, 1, 2, 3).unwrap(), 1.0);
        assert_eq!(sigma(&a, 0, 1, 2, 2).unwrap(), 0.0);
        assert!(sigma(&a, 0, 2, 0, 0).is_err());
        for fam in Family::all_default() {
            let a = StructuredMatrix::build(fam, 4, 8, 3).unwrap();
            for i in 0..4 {
                for c in 0..8 {
                    assert!((sigma(&a, i, i, c, c).unwrap() - 1.0).abs() < 1e-12, "{fam}");
                }
            }
        }
    }

    #[test]
    fn sigma_closed_forms_match_explicit_p() {
        for fam in [Family::Circulant, Family::SkewCirculant, Family::Toeplitz, Family::Hankel, Family::Unstructured] {
            for n in [3usize, 5, 8] {
                let m = n.min(4);
                let a = StructuredMatrix::build(fam, m, n, 5).unwrap();
                let ps: Vec<DenseMatrix> = (0..m).map(|i| a.p_matrix(i).unwrap()).collect();
                for i1 in 0..m {
                    for i2 in 0..m {
                        for n1 in 0..n {
                            for n2 in 0..n {
                                let want = dot(&ps[i1].column(n1), &ps[i2].column(n2));
                                assert_eq!(sigma(&a, i1, i2, n1, n2).unwrap(), want, "{fam}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn figure_one_five_cycle() {
        let g = coherence_graph(&circ(5, 2), 0, 1).unwrap();
        assert_eq!(g.num_vertices(), 5);
        assert_eq!(g.num_edges(), 5);
        assert!(g.adjacency.iter().all(|a| a.len() == 2));
        assert_eq!(exact_chromatic(&g).unwrap(), 3);
        let col = greedy_coloring(&g);
        assert!(col.is_proper(&g));
        assert_eq!(col.colors_used, 3);
    }

    #[test]
    fn same_row_circulant_graph_is_empty() {
        let g = coherence_graph(&circ(8, 4), 2, 2).unwrap();
        assert_eq!(g.num_vertices(), 0);
        assert_eq!(greedy_coloring(&g).colors_used, 0);
        assert_eq!(exact_chromatic(&g).unwrap(), 0);
    }

    #[test]
    fn toeplitz_graphs_are_paths() {
        let a = StructuredMatrix::build(Family::Toeplitz, 2, 5, 0).unwrap();
        let g = coherence_graph(&a, 0, 1).unwrap();
        assert!(g.max_degree() <= 2);
        // a forest with c components has V - c edges
        assert_eq!(g.num_edges(), g.num_vertices() - g.components().len());
        assert_eq!(exact_chromatic(&g).unwrap(), 2);
    }

    #[test]
    fn coloring_small_graphs() {
        let path = CoherenceGraph::from_pairs(0, 0, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(path.num_vertices(), 4);
        assert_eq!(greedy_coloring(&path).colors_used, 2);
        assert_eq!(exact_chromatic(&path).unwrap(), 2);

        let triangle = CoherenceGraph::from_pairs(0, 0, vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(exact_chromatic(&triangle).unwrap(), 3);

        let edgeless = CoherenceGraph::from_pairs(0, 0, vec![(0, 1), (2, 3)]);
        assert_eq!(edgeless.num_edges(), 0);
        assert_eq!(exact_chromatic(&edgeless).unwrap(), 1);

        let big = cycle(70);
        assert!(exact_chromatic(&big).is_err());
        assert_eq!(exact_chromatic(&cycle(9)).unwrap(), 3);
        assert_eq!(exact_chromatic(&cycle(8)).unwrap(), 2);
    }

    #[test]
    fn clique_from_star_of_pairs() {
        // all pairs containing index 0 form a clique of size 6
        let g = CoherenceGraph::from_pairs(0, 0, (1..7).map(|k| (0, k)).collect());
        assert_eq!(exact_chromatic(&g).unwrap(), 6);
        assert_eq!(greedy_coloring(&g).colors_used, 6);
    }

    #[test]
    fn edge_list_export() {
        let g = coherence_graph(&circ(5, 2), 0, 1).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("0,1 — 1,2"));
    }

    #[test]
    fn circulant_stats() {
        let s = model_stats(&circ(16, 8), true).unwrap();
        assert!(s.chi_is_exact);
        assert!(s.chi <= 3 && s.chi >= 1);
        assert_eq!(s.mu_tilde, 0.0);
        // exhaustive σ enumeration: rows one apart share n − 1 ordered pairs
        let a = circ(16, 8);
        let mut best: f64 = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let mut cnt = 0.0;
                for n1 in 0..16 {
                    for n2 in n1 + 1..16 {
                        if (n1 as i64 - n2 as i64 - (i as i64 - j as i64)).rem_euclid(16) == 0 {
                            cnt += 1.0;
                        }
                    }
                }
                best = best.max(cnt / 16.0);
            }
        }
        let _ = a;
        assert!((best - 15.0 / 16.0).abs() < 1e-15);
        assert!((s.mu - (15.0f64 / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_stats() {
        let a = StructuredMatrix::build(Family::Toeplitz, 8, 16, 0).unwrap();
        let s = model_stats(&a, true).unwrap();
        assert_eq!(s.chi, 2);
        assert!(s.chi_is_exact);
        assert_eq!(s.mu_tilde, 0.0);
    }

    #[test]
    fn sampled_pairs_are_not_exact() {
        let opts = StatsOptions { exact: true, pairs: Some(vec![(0, 1)]), ..Default::default() };
        let s = model_stats_with(&circ(8, 4), &opts).unwrap();
        assert!(!s.chi_is_exact);
        assert!(s.per_pair_chis.is_none());
        let bad = StatsOptions { pairs: Some(vec![(0, 9)]), ..Default::default() };
        assert!(model_stats_with(&circ(8, 4), &bad).is_err());
    }

    #[test]
    fn greedy_bounds_exact_from_above() {
        for fam in [Family::Circulant, Family::Toeplitz, Family::Hankel, Family::SkewCirculant] {
            let a = StructuredMatrix::build(fam, 6, 12, 0).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    let g = coherence_graph(&a, i, j).unwrap();
                    let col = greedy_coloring(&g);
                    assert!(col.is_proper(&g));
                    assert!(col.colors_used <= g.max_degree() + 1);
                    assert!(col.colors_used >= exact_chromatic(&g).unwrap());
                }
            }
        }
    }

    #[test]
    fn normalization_and_orthogonality() {
        for fam in [Family::Circulant, Family::Toeplitz] {
            let a = StructuredMatrix::build(fam, 4, 8, 0).unwrap();
            assert!(check_normalized(&a).unwrap());
            assert!(check_orthogonality(&a).unwrap());
        }
        let ldr = StructuredMatrix::build(Family::Ldr { rank: 2, nnz: 2 }, 8, 8, 0).unwrap();
        assert!(check_normalized(&ldr).unwrap());
        // orthogonality is only guaranteed in expectation; report what we see
        let cross = max_column_cross_dot(&ldr).unwrap();
        assert_eq!(check_orthogonality(&ldr).unwrap(), cross <= 1e-12);
    }

    #[test]
    fn s_vector_with_identity_selector() {
        let mut g = vec![0.0; 8];
        g[0] = 1.0;
        let a = StructuredMatrix::with_budget(Family::Circulant, 2, 8, RandomnessBudget::from_values(g).unwrap()).unwrap();
        let x: Vec<f64> = (0..8).map(|k| k as f64 * 0.1).collect();
        let s = s_vector(&a, &SignDiagonal::ones(8), &x, 0).unwrap();
        assert_eq!(s, x);
    }

    #[test]
    fn s_identities_circulant_and_toeplitz() {
        for fam in [Family::Circulant, Family::Toeplitz, Family::Hankel, Family::SkewCirculant] {
            let a = StructuredMatrix::build(fam, 4, 16, 9).unwrap();
            let d1 = sample_signs(10, 16).unwrap();
            let basis = random_orthonormal(11, 16, 2);
            let rep = verify_s_identities(&a, &d1, &basis).unwrap();
            assert!(rep.max_deviation() <= 1e-9, "{fam}: {rep:?}");
            if fam == Family::Circulant {
                assert!(rep.same_row_magnitude <= 1e-12);
            }
        }
    }

    #[test]
    fn s_identities_hold_for_ldr_too() {
        let a = StructuredMatrix::build(Family::Ldr { rank: 2, nnz: 2 }, 4, 16, 9).unwrap();
        let d1 = sample_signs(3, 16).unwrap();
        let rep = verify_s_identities(&a, &d1, &random_orthonormal(4, 16, 3)).unwrap();
        assert!(rep.max_deviation() <= 1e-9, "{rep:?}");
    }

    #[test]
    fn s_identity_rejects_non_orthonormal() {
        let a = circ(8, 2);
        let basis = vec![vec![1.0; 8], vec![0.0; 8]];
        assert!(verify_s_identities(&a, &SignDiagonal::ones(8), &basis).is_err());
    }

    #[test]
    fn balancedness() {
        let n = 16;
        let flat = vec![1.0 / (n as f64).sqrt(); n];
        assert!(is_balanced(&flat, 1.0).unwrap());
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        assert!(!is_balanced(&e1, (n as f64).ln()).unwrap());
        assert!(is_balanced(&[2.0, 0.0], 10.0).is_err());
    }

    #[test]
    fn gram_schmidt_cases() {
        let ortho = vec![vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0]];
        let (out, dev) = gram_schmidt_perturb(&ortho).unwrap();
        assert!(dev <= 1e-10);
        assert_eq!(out.len(), 2);

        let mut last = f64::INFINITY;
        for kappa in [0.1f64, 0.01, 0.001] {
            let v2 = vec![kappa, (1.0 - kappa * kappa).sqrt()];
            let (_, dev) = gram_schmidt_perturb(&[vec![1.0, 0.0], v2]).unwrap();
            assert!(dev < last);
            last = dev;
        }

        assert!(gram_schmidt_perturb(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
        assert!(gram_schmidt_perturb(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn gram_schmidt_near_orthogonal_triple() {
        let base = random_orthonormal(21, 32, 3);
        let noise = random_orthonormal(99, 32, 3);
        let eps = 3e-4;
        let vs: Vec<Vec<f64>> = base
            .iter()
            .zip(&noise)
            .map(|(b, z)| b.iter().zip(z).map(|(x, y)| 0.95 * (x + eps * y)).collect())
            .collect();
        for (i, u) in vs.iter().enumerate() {
            assert!(norm(u) >= 0.9);
            for w in &vs[i + 1..] {
                assert!(dot(u, w).abs() <= 1e-3);
            }
        }
        let (out, dev) = gram_schmidt_perturb(&vs).unwrap();
        assert!(dev <= 0.1, "{dev}");
        for (i, u) in out.iter().enumerate() {
            assert!((norm(u) - norm(&vs[i])).abs() < 1e-12);
            for w in &out[i + 1..] {
                assert!(dot(u, w).abs() <= 1e-10);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sigma_symmetry(seed in any::<u64>(), n in 2usize..=32, which in 0usize..6) {
            let fam = Family::all_default()[which];
            let m = n.min(4);
            let a = StructuredMatrix::build(fam, m, n, seed).unwrap();
            for i1 in 0..m {
                for i2 in 0..m {
                    for n1 in 0..n {
                        for n2 in 0..n {
                            let x = sigma(&a, i1, i2, n1, n2).unwrap();
                            let y = sigma(&a, i2, i1, n2, n1).unwrap();
                            prop_assert!((x - y).abs() < 1e-14);
                        }
                    }
                }
            }
        }

        #[test]
        fn circulant_graphs_have_degree_two(n in 2usize..=16, seed in any::<u64>()) {
            let m = n.min(8);
            let a = StructuredMatrix::build(Family::Circulant, m, n, seed).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let g = coherence_graph(&a, i, j).unwrap();
                    prop_assert!(g.max_degree() <= 2);
                    prop_assert!(exact_chromatic(&g).unwrap() <= 3);
                }
            }
        }

        #[test]
        fn toeplitz_graphs_are_bipartite(n in 2usize..=16, seed in any::<u64>()) {
            let m = n.min(8);
            let a = StructuredMatrix::build(Family::Toeplitz, m, n, seed).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let g = coherence_graph(&a, i, j).unwrap();
                    prop_assert!(exact_chromatic(&g).unwrap() <= 2);
                }
            }
        }
    }
}
