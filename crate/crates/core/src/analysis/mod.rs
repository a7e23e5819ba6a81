//! Offline analysis: optimal parameters, identifiability, step-size
//! admissibility, convergence rates and the steady-state error bound.

mod bound;
mod optimal;

pub use bound::{bound_constants, error_bound_curve, BoundConstants, BoundInputs, BoundPoint, KappaTerms};
pub use optimal::{
    minimize_multinomial, optimal_from_samples, optimal_gaussian, optimal_prior, OptimalParams,
    OracleConfig, WeightedDesign,
};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::training::CostConstants;

/// Expected drift of agent `k`'s log-ratio in favour of the truth,
/// `E[x]ᵀΔ°(θ) − Δ̃°(θ)`, for every θ (zero at the truth).
pub fn local_terms(optimal: &OptimalParams, mean: &[f64]) -> Vec<f64> {
    let h = optimal.params.hypotheses();
    (0..h)
        .map(|theta| {
            if theta == optimal.truth {
                0.0
            } else {
                dot(mean, &optimal.delta_w(theta)) - optimal.delta_u(theta)
            }
        })
        .collect()
}

/// Sign of each local term, `None` at the truth.
pub fn local_identifiability(optimal: &OptimalParams, mean: &[f64]) -> Vec<Option<bool>> {
    local_terms(optimal, mean)
        .into_iter()
        .enumerate()
        .map(|(theta, v)| (theta != optimal.truth).then_some(v > 0.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identifiability {
    pub truth: usize,
    /// Network-level separation per hypothesis (zero at the truth).
    pub beta_net: Vec<f64>,
    /// `local[k][θ]`: agent `k`'s own separation term.
    pub local: Vec<Vec<f64>>,
}

impl Identifiability {
    pub fn globally_identifiable(&self) -> bool {
        self.beta_net
            .iter()
            .enumerate()
            .all(|(theta, v)| theta == self.truth || *v > 0.0)
    }

    /// Agents with at least one non-positive local term.
    pub fn locally_confused_agents(&self) -> Vec<usize> {
        self.local
            .iter()
            .enumerate()
            .filter(|(_, row)| {
                row.iter()
                    .enumerate()
                    .any(|(theta, v)| theta != self.truth && *v <= 0.0)
            })
            .map(|(k, _)| k)
            .collect()
    }
}

/// Centrality- and arrival-weighted sum of the local terms.
pub fn beta_net(
    optimal: &[OptimalParams],
    perron: &[f64],
    q_pr: &[f64],
    means: &[Vec<f64>],
) -> Result<Identifiability> {
    let k = optimal.len();
    for (name, len) in [("Perron vector", perron.len()), ("q_pr", q_pr.len()), ("feature means", means.len())] {
        if len != k {
            return Err(Error::DimensionMismatch {
                context: name,
                expected: k,
                found: len,
            });
        }
    }
    let Some(first) = optimal.first() else {
        return Err(Error::Empty);
    };
    let truth = first.truth;
    let h = first.params.hypotheses();
    let local: Vec<Vec<f64>> = optimal
        .iter()
        .zip(means)
        .map(|(o, m)| local_terms(o, m))
        .collect();
    let mut net = alloc::vec![0.0; h];
    for j in 0..k {
        for theta in 0..h {
            net[theta] += perron[j] * q_pr[j] * local[j][theta];
        }
    }
    net[truth] = 0.0;
    Ok(Identifiability {
        truth,
        beta_net: net,
        local,
    })
}

/// Step sizes for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub eta: f64,
    pub eta_tilde: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStability {
    /// Largest admissible discount, `q (min{ν/ξ, ν̃/ξ̃})²`.
    pub delta_bound: f64,
    pub delta_ok: bool,
    /// Smallest root of `q(η²ξ² − 2ην) + δ = 0`, absent when δ is too large.
    pub eta_root: Option<f64>,
    pub eta_limit: Option<f64>,
    pub eta_ok: bool,
    pub eta_tilde_root: Option<f64>,
    pub eta_tilde_limit: Option<f64>,
    pub eta_tilde_ok: bool,
}

impl AgentStability {
    pub fn passed(&self) -> bool {
        self.delta_ok && self.eta_ok && self.eta_tilde_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub delta: f64,
    pub agents: Vec<AgentStability>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.agents.iter().all(AgentStability::passed)
    }
}

fn smallest_root(delta: f64, q: f64, nu: f64, xi: f64) -> Option<f64> {
    let disc = nu * nu - xi * xi * delta / q;
    if disc < 0.0 {
        return None;
    }
    // rationalized form of (ν − √disc)/ξ², stable for small δ
    Some((delta / q) / (nu + libm::sqrt(disc)))
}

/// Admissibility of `(δ, η, η̃)` per agent, with no early exit.
pub fn stability_report(
    delta: f64,
    steps: &[StepSizes],
    constants: &[CostConstants],
    q_tr: &[f64],
) -> StabilityReport {
    let agents = constants
        .iter()
        .zip(steps)
        .zip(q_tr)
        .map(|((c, s), &q)| {
            let ratio = (c.nu / c.xi).min(c.nu_tilde / c.xi_tilde);
            let delta_bound = q * ratio * ratio;
            let eta_root = smallest_root(delta, q, c.nu, c.xi);
            let eta_tilde_root = smallest_root(delta, q, c.nu_tilde, c.xi_tilde);
            let eta_limit = eta_root.map(|r| r.min(2.0 * c.nu / (c.xi * c.xi)));
            let eta_tilde_limit =
                eta_tilde_root.map(|r| r.min(2.0 * c.nu_tilde / (c.xi_tilde * c.xi_tilde)));
            AgentStability {
                delta_bound,
                delta_ok: delta < delta_bound,
                eta_root,
                eta_limit,
                eta_ok: eta_limit.is_some_and(|l| s.eta < l),
                eta_tilde_root,
                eta_tilde_limit,
                eta_tilde_ok: eta_tilde_limit.is_some_and(|l| s.eta_tilde < l),
            }
        })
        .collect();
    StabilityReport { delta, agents }
}

/// Like [`stability_report`] but fails with `NoRealRoots` for the first
/// agent whose root equations have no real solution.
pub fn check_stability(
    delta: f64,
    steps: &[StepSizes],
    constants: &[CostConstants],
    q_tr: &[f64],
) -> Result<StabilityReport> {
    let report = stability_report(delta, steps, constants, q_tr);
    if let Some(agent) = report
        .agents
        .iter()
        .position(|a| a.eta_root.is_none() || a.eta_tilde_root.is_none())
    {
        return Err(Error::NoRealRoots { agent });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub per_agent: Vec<f64>,
    pub per_agent_tilde: Vec<f64>,
    pub phi: f64,
    pub phi_tilde: f64,
}

/// `φ_k = 1 − 2ηqν + η²qξ²` and its prior-side analogue; network rates are
/// the maxima over agents.
pub fn convergence_rates(
    steps: &[StepSizes],
    constants: &[CostConstants],
    q_tr: &[f64],
) -> Result<Rates> {
    let rate = |eta: f64, q: f64, nu: f64, xi: f64| 1.0 - 2.0 * eta * q * nu + eta * eta * q * xi * xi;
    let mut per_agent = Vec::with_capacity(constants.len());
    let mut per_agent_tilde = Vec::with_capacity(constants.len());
    for (agent, ((c, s), &q)) in constants.iter().zip(steps).zip(q_tr).enumerate() {
        let phi = rate(s.eta, q, c.nu, c.xi);
        let phi_t = rate(s.eta_tilde, q, c.nu_tilde, c.xi_tilde);
        for r in [phi, phi_t] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::RateOutOfRange { agent, rate: r });
            }
        }
        per_agent.push(phi);
        per_agent_tilde.push(phi_t);
    }
    Ok(Rates {
        phi: per_agent.iter().copied().fold(0.0, f64::max),
        phi_tilde: per_agent_tilde.iter().copied().fold(0.0, f64::max),
        per_agent,
        per_agent_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constants(nu: f64, xi: f64) -> CostConstants {
        CostConstants {
            nu,
            xi,
            nu_tilde: nu,
            xi_tilde: xi,
            sigma2: 0.0,
            sigma2_tilde: 0.0,
        }
    }

    #[test]
    fn delta_bound_example() {
        let c = [constants(0.05, 1.0)];
        let s = [StepSizes { eta: 1e-4, eta_tilde: 1e-4 }];
        let ok = check_stability(0.001, &s, &c, &[0.7]).unwrap();
        assert_abs_diff_eq!(ok.agents[0].delta_bound, 0.00175, epsilon = 1e-15);
        assert!(ok.agents[0].delta_ok);
        assert!(ok.passed());
        assert!(matches!(
            check_stability(0.005, &s, &c, &[0.7]),
            Err(Error::NoRealRoots { agent: 0 })
        ));
        let r = stability_report(0.005, &s, &c, &[0.7]);
        assert!(!r.agents[0].delta_ok);
        assert!(!r.passed());
    }

    #[test]
    fn root_example() {
        let c = [constants(1.0, 1.0)];
        let s = [StepSizes { eta: 0.05, eta_tilde: 0.05 }];
        let r = check_stability(0.19, &s, &c, &[1.0]).unwrap();
        assert_abs_diff_eq!(r.agents[0].eta_root.unwrap(), 0.1, epsilon = 1e-14);
        assert!(r.agents[0].eta_ok);
        let s = [StepSizes { eta: 0.15, eta_tilde: 0.05 }];
        assert!(!check_stability(0.19, &s, &c, &[1.0]).unwrap().agents[0].eta_ok);
    }

    #[test]
    fn rate_examples() {
        let c = [constants(0.05, 1.0)];
        let r = convergence_rates(&[StepSizes { eta: 0.01, eta_tilde: 0.0 }], &c, &[0.7]).unwrap();
        assert_abs_diff_eq!(r.phi, 0.99937, epsilon = 1e-14);
        assert_eq!(r.phi_tilde, 1.0);
        let r2 = convergence_rates(&[StepSizes { eta: 0.02, eta_tilde: 0.0 }], &c, &[0.7]).unwrap();
        let ratio = (1.0 - r2.phi) / (1.0 - r.phi);
        assert!((1.7..2.0).contains(&ratio), "{ratio}");
        assert!(matches!(
            convergence_rates(&[StepSizes { eta: 1.0, eta_tilde: 0.0 }], &c, &[0.7]),
            Err(Error::RateOutOfRange { .. })
        ));
    }
}
