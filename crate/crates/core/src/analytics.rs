//! Closed-form performance heuristics and their numerical oracles.
//!
//! Under a constant network delay `h`, a Poisson block rate `λ` and `k`
//! parents per block, the tip pool settles at `L₀ = kλh/(k−1)`. The number of
//! tips indirectly referencing a block grows like the delay equation
//! `K'(t) = (k−1)²/(kh) · K(t−h)`, whose exponential mode gives the
//! confluence time; the issuance time is the time until enough weight has
//! issued a block. Their sum bounds the time to confirmation.

use crate::identity_weights::WeightTable;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no convergence before t = {horizon}")]
    NoConvergence { horizon: f64 },
    #[error("Lambert W undefined below -1/e, got {0}")]
    LambertDomain(f64),
}

/// How the confluence target relates to `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ConfluenceTarget {
    /// `K(t) = ε·L₀`, i.e. the `log L₀ + log ε` form.
    #[default]
    Fraction,
    /// `K(t) = (1−ε)·L₀`.
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadParams {
    /// Blocks per second.
    pub lambda: f64,
    /// Constant network delay (seconds).
    pub h: f64,
    /// Parents per block.
    pub k: usize,
    pub theta: f64,
    /// Confluence target fraction.
    pub eps: f64,
    pub target: ConfluenceTarget,
}

impl LoadParams {
    pub fn new(lambda: f64, h: f64, k: usize, theta: f64, eps: f64) -> Result<Self, AnalyticsError> {
        let p = Self { lambda, h, k, theta, eps, target: ConfluenceTarget::Fraction };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let bad = |m: &str| Err(AnalyticsError::InvalidParams(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return bad("h must be non-negative");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return bad("theta must lie in (0.5, 1]");
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad("eps must lie in (0, 1]");
        }
        Ok(())
    }

    fn target_fraction(&self) -> f64 {
        match self.target {
            ConfluenceTarget::Fraction => self.eps,
            ConfluenceTarget::Complement => 1.0 - self.eps,
        }
    }
}

/// Upper bound on the expected Witness Weight of a block `t` seconds after
/// issuance: `Σ w_i (1 − exp(−t λ w_i))`.
pub fn ww_growth_bound(t: f64, table: &WeightTable, lambda: f64) -> f64 {
    table.weights().iter().map(|&w| w * (1.0 - (-t * lambda * w).exp())).sum()
}

/// Stationary tip pool size `kλh/(k−1)`.
pub fn expected_tip_pool(p: &LoadParams) -> f64 {
    let k = p.k as f64;
    k * p.lambda * p.h / (k - 1.0)
}

/// Expected time until a block is first approved: `h + h/(k−1)`.
pub fn first_approval_time(p: &LoadParams) -> f64 {
    p.h + p.h / (p.k as f64 - 1.0)
}

/// Principal branch of the Lambert W function, by Halley iteration.
pub fn lambert_w0(z: f64) -> Result<f64, AnalyticsError> {
    let branch_point = -(-1.0f64).exp();
    if z < branch_point || !z.is_finite() {
        return Err(AnalyticsError::LambertDomain(z));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut w = if z < -0.3 {
        // Series around the branch point; log(1+z) is poor there.
        let p = (2.0 * (1.0 + std::f64::consts::E * z)).sqrt();
        -1.0 + p - p * p / 3.0
    } else {
        (1.0 + z).ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-12 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfluenceTime {
    /// `(h / W((k−1)²/k)) · log(target · L₀)`.
    pub exact: f64,
    /// `(h / log k) · log(λh)`.
    pub large_k: f64,
}

/// Confluence time from the exponential mode of the delay equation.
pub fn confluence_time(p: &LoadParams) -> Result<ConfluenceTime, AnalyticsError> {
    p.validate()?;
    let k = p.k as f64;
    let w = lambert_w0((k - 1.0).powi(2) / k)?;
    let l0 = expected_tip_pool(p);
    let exact = p.h / w * (l0.ln() + p.target_fraction().ln());
    let large_k = p.h / k.ln() * (p.lambda * p.h).ln();
    Ok(ConfluenceTime { exact, large_k })
}

/// Integrates `K'(t) = (k−1)²/(kh) · K(t−h)` with explicit Euler steps of
/// `h/steps_per_delay` and returns the first time `K` reaches `target · L₀`.
///
/// The equation is first run from a constant history for `burn_in` delays so
/// that the transient of the arbitrary initial history has died out and the
/// solution follows its dominant mode; the clock and scale are then reset so
/// that `K(0) = 1`.
pub fn ode_confluence_oracle_with(p: &LoadParams, steps_per_delay: usize, burn_in: usize) -> Result<f64, AnalyticsError> {
    p.validate()?;
    if steps_per_delay < 100 {
        return Err(AnalyticsError::InvalidParams("step must be at most h/100".into()));
    }
    let target = p.target_fraction() * expected_tip_pool(p);
    if target <= 1.0 || p.h == 0.0 {
        return Ok(0.0);
    }
    let k = p.k as f64;
    let dt = p.h / steps_per_delay as f64;
    let c = (k - 1.0).powi(2) / (k * p.h);
    let lag = steps_per_delay;
    // Ring buffer of the last `lag + 1` values; history K ≡ 1.
    let mut hist = vec![1.0f64; lag + 1];
    let mut head = 0usize; // index of K(t)
    let step = |hist: &mut Vec<f64>, head: &mut usize| {
        let now = hist[*head];
        let delayed = hist[(*head + 1) % (lag + 1)];
        let next = now + dt * c * delayed;
        *head = (*head + 1) % (lag + 1);
        hist[*head] = next;
        next
    };
    for _ in 0..burn_in * lag {
        step(&mut hist, &mut head);
    }
    let scale = hist[head];
    for v in hist.iter_mut() {
        *v /= scale;
    }
    let horizon = 1000.0 * p.h;
    let mut t = 0.0;
    let mut prev = 1.0;
    while t < horizon {
        let next = step(&mut hist, &mut head);
        if next >= target {
            // Linear interpolation inside the last step.
            return Ok(t + dt * (target - prev) / (next - prev));
        }
        prev = next;
        t += dt;
    }
    Err(AnalyticsError::NoConvergence { horizon })
}

/// [`ode_confluence_oracle_with`] at `h/1000` and a 30-delay burn-in.
pub fn ode_confluence_oracle(p: &LoadParams) -> Result<f64, AnalyticsError> {
    ode_confluence_oracle_with(p, 1000, 30)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IssuanceTime {
    /// `(N/λ) Σ_{j=1..⌈θN⌉} 1/(N−j+1)`.
    pub exact: f64,
    /// `−(N/λ) log(1−θ)`.
    pub asymptotic: f64,
}

/// Expected time until `⌈θN⌉` of `N` equally weighted nodes have issued.
pub fn issuance_time_equal_weights(n: usize, lambda: f64, theta: f64) -> IssuanceTime {
    let nf = n as f64;
    let m = (theta * nf - 1e-9).ceil().max(0.0) as usize;
    let exact = nf / lambda * (1..=m.min(n)).map(|j| 1.0 / (nf - j as f64 + 1.0)).sum::<f64>();
    let asymptotic = if theta >= 1.0 { f64::INFINITY } else { -(nf / lambda) * (1.0 - theta).ln() };
    IssuanceTime { exact, asymptotic }
}

/// Time at which [`ww_growth_bound`] reaches `theta`, by bisection.
pub fn issuance_time_from_bound(table: &WeightTable, lambda: f64, theta: f64) -> Result<f64, AnalyticsError> {
    if theta >= 1.0 {
        return Err(AnalyticsError::NoConvergence { horizon: f64::INFINITY });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ww_growth_bound(hi, table, lambda) < theta {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(AnalyticsError::NoConvergence { horizon: hi });
        }
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ww_growth_bound(mid, table, lambda) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TtcBound {
    pub confluence: f64,
    pub issuance: f64,
    pub total: f64,
}

/// `τ_f ≤ τ_c + τ_iss`, with the exact harmonic form for equal weights and
/// the inverted growth bound otherwise.
pub fn ttc_bound(p: &LoadParams, table: &WeightTable) -> Result<TtcBound, AnalyticsError> {
    let confluence = if p.h == 0.0 { 0.0 } else { confluence_time(p)?.exact.max(0.0) };
    let w = table.weights();
    let equal = w.iter().all(|&x| (x - w[0]).abs() <= 1e-15);
    let issuance = if equal {
        issuance_time_equal_weights(w.len(), p.lambda, p.theta).exact
    } else {
        issuance_time_from_bound(table, p.lambda, p.theta)?
    };
    Ok(TtcBound { confluence, issuance, total: confluence + issuance })
}

/// Security condition of longest-chain protocols: `q < (1−q)/(1+(1−q)λΔ)`.
pub fn blockchain_security_bound(q: f64, lambda: f64, delta: f64) -> bool {
    q < (1.0 - q) / (1.0 + (1.0 - q) * lambda * delta)
}

/// Every heuristic for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeuristicTable {
    pub tip_pool: f64,
    pub first_approval: f64,
    pub confluence: ConfluenceTime,
    pub confluence_oracle: f64,
    pub issuance_equal: IssuanceTime,
    pub issuance_from_bound: f64,
    pub ttc: TtcBound,
}

pub fn heuristic_table(p: &LoadParams, table: &WeightTable) -> Result<HeuristicTable, AnalyticsError> {
    Ok(HeuristicTable {
        tip_pool: expected_tip_pool(p),
        first_approval: first_approval_time(p),
        confluence: confluence_time(p)?,
        confluence_oracle: ode_confluence_oracle(p)?,
        issuance_equal: issuance_time_equal_weights(table.len(), p.lambda, p.theta),
        issuance_from_bound: issuance_time_from_bound(table, p.lambda, p.theta)?,
        ttc: ttc_bound(p, table)?,
    })
}
