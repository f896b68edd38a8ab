//! Concentration bounds and thresholds.
//!
//! Everything is natural log. Constants hidden in `O(·)` are taken as 1, so
//! the tails of [`cor1_tail`] and [`cor2_tail`] hold only up to a constant.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Label attached to every bound that drops an unknown constant.
pub const UP_TO_CONSTANT: &str = "up-to-constant";

/// Inputs of the main concentration theorem.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Params {
    /// Dataset size.
    pub big_n: u64,
    /// Tuple arity.
    pub k: u64,
    pub m: u64,
    pub n: u64,
    pub chi: f64,
    pub mu: f64,
    pub mu_tilde: f64,
    pub eps: f64,
    pub big_k: f64,
    pub m_bar: u64,
    pub p_lambda_eps: f64,
    /// `m·k` per-coordinate sensitivities.
    pub rho: Vec<f64>,
    pub delta_m: f64,
    pub delta_lambda: f64,
}

impl Theorem1Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(invalid(msg.to_string()));
        if self.k == 0 || self.big_n < self.k {
            return bad("need 1 <= k <= N");
        }
        if self.m == 0 || self.n < 2 {
            return bad("need m >= 1 and n >= 2");
        }
        if self.m_bar > self.m {
            return bad("m_bar must lie in 0..=m");
        }
        if !(self.chi >= 0.0 && self.mu >= 0.0 && self.mu_tilde >= 0.0) {
            return bad("chi, mu and mu_tilde must be nonnegative");
        }
        if !(self.eps > 0.0 && self.big_k > 0.0) {
            return bad("eps and K must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_lambda_eps) {
            return bad("p_lambda_eps must be a probability");
        }
        if self.rho.len() as u64 != self.m * self.k {
            return bad("rho must have m*k entries");
        }
        if self.rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || self.rho.iter().all(|r| *r == 0.0) {
            return bad("rho entries must be nonnegative, finite and not all zero");
        }
        if !(self.delta_m >= 0.0 && self.delta_lambda >= 0.0) {
            return bad("delta terms must be nonnegative");
        }
        Ok(())
    }
}

/// Probability bound and error level of the main theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Bound {
    /// Natural log of the probability bound. Not clamped at 0.
    pub ln_probability: f64,
    pub err: f64,
}

impl Theorem1Bound {
    pub fn probability(&self) -> f64 {
        self.ln_probability.exp()
    }
}

/// `ln C(N, k)` as `Σ_{i<k} ln(N − i) − ln k!`.
pub fn ln_binomial(big_n: u64, k: u64) -> f64 {
    (0..k).map(|i| ((big_n - i) as f64).ln()).sum::<f64>() - ln_factorial(k)
}

pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Sum with Neumaier compensation.
fn neumaier(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `ln Σ exp(lᵢ)`, ignoring `−∞` entries.
pub fn log_sum_exp(ls: &[f64]) -> f64 {
    let top = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + neumaier(ls.iter().map(|l| (l - top).exp())).ln()
}

/// `ln Σ_{j=m̄+1}^{m} (p m)^j / j!`, dropping terms below `1e-300` of the
/// running total.
pub fn ln_poisson_tail(p: f64, m: u64, m_bar: u64) -> f64 {
    if p == 0.0 || m_bar >= m {
        return f64::NEG_INFINITY;
    }
    let lpm = (p * m as f64).ln();
    let mut ln_fact = ln_factorial(m_bar);
    let mut terms = Vec::new();
    let mut running = f64::NEG_INFINITY;
    let floor = 1e-300f64.ln();
    for j in m_bar + 1..=m {
        ln_fact += (j as f64).ln();
        let t = j as f64 * lpm - ln_fact;
        if t < running + floor {
            // terms only shrink once j exceeds p·m
            if j as f64 > p * m as f64 {
                break;
            }
            continue;
        }
        terms.push(t);
        running = running.max(t);
    }
    log_sum_exp(&terms)
}

/// The six log-terms of the probability bound, before the binomial factor.
pub fn theorem1_ln_terms(p: &Theorem1Params) -> Result<[f64; 6]> {
    p.validate()?;
    let (k, m, n) = (p.k as f64, p.m as f64, p.n as f64);
    let ln_n = n.ln();
    let chi_terms = if p.chi == 0.0 {
        [f64::NEG_INFINITY; 2]
    } else {
        if p.mu == 0.0 {
            return Err(Error::DivisionByZero("mu = 0 makes the chi exponents undefined".into()));
        }
        let denom = 8.0 * p.chi * p.chi * p.mu * p.mu;
        [
            (2.0 * k * m * p.chi).ln() - n / (denom * ln_n.powi(6)),
            (k * k * m * m * p.chi).ln() - p.eps * p.eps * n.sqrt() / (denom * ln_n.powi(4)),
        ]
    };
    let rho_sq = neumaier(p.rho.iter().map(|r| r * r));
    Ok([
        chi_terms[0],
        chi_terms[1],
        (2.0 * n * k).ln() - ln_n * ln_n / 8.0,
        0.5 * (2.0 * m * k / PI).ln() - m * k / 2.0,
        ln_poisson_tail(p.p_lambda_eps, p.m, p.m_bar),
        2f64.ln() - 2.0 * p.big_k * p.big_k / rho_sq,
    ])
}

/// Probability bound (in log form) and `err = K + m̄Δ_M + (m − m̄)Δ_λ`.
pub fn theorem1_bound(p: &Theorem1Params) -> Result<Theorem1Bound> {
    let terms = theorem1_ln_terms(p)?;
    let ln_probability = ln_binomial(p.big_n, p.k) + log_sum_exp(&terms);
    let err = p.big_k + p.m_bar as f64 * p.delta_m + (p.m - p.m_bar) as f64 * p.delta_lambda;
    Ok(Theorem1Bound { ln_probability, err })
}

/// Error level `β̃_ε + m^{−1/(2α)}` of the unbounded-`β` branch. Its tail is
/// qualitative only, the constants are left unspecified.
pub fn theorem1_unbounded_err(beta_tilde: f64, alpha: f64, m: u64) -> Result<f64> {
    if !(alpha > 0.0) || m == 0 {
        return Err(invalid("need alpha > 0 and m >= 1"));
    }
    Ok(beta_tilde + (m as f64).powf(-1.0 / (2.0 * alpha)))
}

/// `p_{0,ε} ≤ 2√2·mε/π + 2/(πm²)` for the angular kernel.
pub fn p0_eps_angular(m: u64, eps: f64) -> Result<f64> {
    if m == 0 || !(eps > 0.0) {
        return Err(invalid("need m >= 1 and eps > 0"));
    }
    let m = m as f64;
    Ok(2.0 * 2f64.sqrt() * m * eps / PI + 2.0 / (PI * m * m))
}

/// `λ = 2 f_max ρ + ρ²`.
pub fn lipschitz_lambda(f_max: f64, rho: f64) -> Result<f64> {
    if !(f_max >= 0.0 && rho >= 0.0) {
        return Err(invalid("f_max and rho must be nonnegative"));
    }
    Ok(2.0 * f_max * rho + rho * rho)
}

fn check_tau(m: u64, tau: f64) -> Result<()> {
    if m < 2 {
        return Err(invalid("need m >= 2"));
    }
    if !(tau > 0.0 && tau < 0.5) {
        return Err(invalid(format!("tau = {tau} outside (0, 0.5)")));
    }
    Ok(())
}

/// `m^{−τ} + 1/ln m`.
pub fn cor1_threshold(m: u64, tau: f64) -> Result<f64> {
    check_tau(m, tau)?;
    let m = m as f64;
    Ok(m.powf(-tau) + 1.0 / m.ln())
}

/// `N² e^{−m^{1−2τ}}`, up to a constant.
pub fn cor1_tail(big_n: u64, m: u64, tau: f64) -> Result<f64> {
    cor2_tail(big_n, m, tau, 1.0)
}

/// `m^{−τ} + 2 f_max ρ + ρ²`.
pub fn cor2_threshold(m: u64, tau: f64, f_max: f64, rho: f64) -> Result<f64> {
    check_tau(m, tau)?;
    Ok((m as f64).powf(-tau) + lipschitz_lambda(f_max, rho)?)
}

/// `N² e^{−m^{1−2τ}/f_max²}`, up to a constant.
pub fn cor2_tail(big_n: u64, m: u64, tau: f64, f_max: f64) -> Result<f64> {
    check_tau(m, tau)?;
    if !(f_max > 0.0) {
        return Err(invalid("f_max must be positive"));
    }
    let n = big_n as f64;
    Ok((2.0 * n.ln() - (m as f64).powf(1.0 - 2.0 * tau) / (f_max * f_max)).exp())
}

/// `2 e^{−a²/(2Σ(αᵢ+βᵢ)²)}`.
pub fn azuma_bound(a: f64, alphas: &[f64], betas: &[f64]) -> Result<f64> {
    if alphas.is_empty() || alphas.len() != betas.len() {
        return Err(invalid("alphas and betas must be nonempty and of equal length"));
    }
    if !(a > 0.0) || alphas.iter().chain(betas).any(|x| !(*x > 0.0)) {
        return Err(invalid("a and all alphas, betas must be positive"));
    }
    let s = neumaier(alphas.iter().zip(betas).map(|(x, y)| (x + y) * (x + y)));
    Ok(2.0 * (-a * a / (2.0 * s)).exp())
}

/// `2 e^{−2a²/Σρᵢ²}`.
pub fn mcdiarmid_bound(a: f64, rhos: &[f64]) -> Result<f64> {
    if rhos.is_empty() {
        return Err(invalid("rhos must be nonempty"));
    }
    if !(a > 0.0) || rhos.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid("a and all rhos must be positive"));
    }
    let s = neumaier(rhos.iter().map(|r| r * r));
    Ok(2.0 * (-2.0 * a * a / s).exp())
}

/// `Δ^Ψ_a ≤ a/m` for the mean.
pub fn delta_psi_mean(a: f64, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    Ok(a / m as f64)
}
