//! Constants of the instantaneous error-probability bound and its curve.

use alloc::vec::Vec;

use super::{beta_net, convergence_rates, OptimalParams, Rates, StepSizes};
use crate::datagen::FeatureMoments;
use crate::error::{Error, Result};
use crate::graph::PerronData;
use crate::linalg::norm_sq;
use crate::social::{BeliefState, LogBeliefRatios};
use crate::training::{AgentParams, CostConstants};

pub struct BoundInputs<'a> {
    pub delta: f64,
    pub steps: &'a [StepSizes],
    pub q_tr: &'a [f64],
    pub q_pr: &'a [f64],
    pub constants: &'a [CostConstants],
    pub optimal: &'a [OptimalParams],
    /// Moments of each agent's prediction features under the truth.
    pub prediction: &'a [FeatureMoments],
    pub perron: &'a PerronData,
    pub initial_beliefs: &'a BeliefState,
    pub initial_params: &'a [AgentParams],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaTerms {
    pub theta: usize,
    pub beta_net: f64,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub d: f64,
    pub e1: f64,
    pub e2: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    /// `c₁ … c₆`.
    pub c: [f64; 6],
    pub kappas: Vec<KappaTerms>,
    pub rates: Rates,
    pub beta_net: Vec<f64>,
}

impl BoundConstants {
    pub fn steady_state(&self, delta: f64, eta: f64, eta_tilde: f64) -> f64 {
        self.c[3] * delta + self.c[4] * eta + self.c[5] * eta_tilde
    }

    pub fn at(&self, t: u64, delta: f64, eta: f64, eta_tilde: f64) -> f64 {
        let tf = t as f64;
        let [c1, c2, c3, ..] = self.c;
        delta * (c1 * libm::pow(self.rates.phi, tf) + c2 * libm::pow(self.rates.phi_tilde, tf))
            + c3 * libm::pow(1.0 - delta, 2.0 * tf)
            + self.steady_state(delta, eta, eta_tilde)
    }
}

pub fn bound_constants(inp: &BoundInputs<'_>) -> Result<BoundConstants> {
    let k = inp.optimal.len();
    let delta = inp.delta;
    let rates = convergence_rates(inp.steps, inp.constants, inp.q_tr)?;

    let mut inv_b = Vec::with_capacity(k);
    let mut inv_e = Vec::with_capacity(k);
    for j in 0..k {
        let chi = (1.0 - delta) / rates.per_agent[j];
        let chi_t = (1.0 - delta) / rates.per_agent_tilde[j];
        for c in [chi, chi_t] {
            if !(c < 1.0) {
                return Err(Error::ChiNotContractive { agent: j, chi: c });
            }
        }
        inv_b.push(1.0 / (1.0 - chi));
        inv_e.push(1.0 / (1.0 - chi_t));
    }

    let means: Vec<Vec<f64>> = inp.prediction.iter().map(|m| m.mean.clone()).collect();
    let ident = beta_net(inp.optimal, &inp.perron.vector, inp.q_pr, &means)?;
    let truth = ident.truth;
    let h = ident.beta_net.len();
    let beta0 = LogBeliefRatios::from_beliefs(inp.initial_beliefs, truth);

    let graph = inp.perron.kappa * inp.perron.kappa
        / libm::pow(1.0 - (1.0 - delta) * inp.perron.zeta, 2.0);
    let inv_two = 1.0 / (2.0 - delta);

    // θ-independent pieces
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for j in 0..k {
        let q = inp.q_pr[j];
        let ex2 = inp.prediction[j].norm_sq();
        let w_err: f64 = inp.initial_params[j]
            .w
            .iter()
            .zip(&inp.optimal[j].params.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let u_err: f64 = inp.initial_params[j]
            .u
            .iter()
            .zip(&inp.optimal[j].params.u)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        b1 += 4.0 * inv_b[j] * q * ex2 * w_err;
        b2 += 4.0 * q * ex2 * inp.constants[j].sigma2;
        e1 += 4.0 * inv_e[j] * q * u_err;
        e2 += 4.0 * q * inp.constants[j].sigma2_tilde;
    }

    let mut kappas = Vec::with_capacity(h - 1);
    let mut c = [0.0_f64; 6];
    for theta in (0..h).filter(|&t| t != truth) {
        let bn = ident.beta_net[theta];
        if !(bn > 0.0) {
            return Err(Error::ZeroBetaNet {
                hypothesis: theta,
                value: bn,
            });
        }
        let max_beta0 = (0..k).map(|j| beta0.get(j, theta).abs()).fold(0.0, f64::max);
        let a = libm::pow(delta * max_beta0 + bn.abs(), 2.0);
        let (mut cc, mut d, mut f, mut g) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..k {
            let q = inp.q_pr[j];
            let m = &inp.prediction[j];
            let dw = norm_sq(&inp.optimal[j].delta_w(theta));
            let du = libm::pow(inp.optimal[j].delta_u(theta), 2.0);
            let var_sum: f64 = m
                .second
                .iter()
                .zip(&m.mean)
                .map(|(s, mu)| q * s - q * q * mu * mu)
                .sum();
            cc += var_sum * dw;
            d += q * norm_sq(&m.mean) * dw;
            f += q * (1.0 - q) * du;
            g += q * du;
        }
        let terms = KappaTerms {
            theta,
            beta_net: bn,
            a,
            b1,
            b2,
            c: inv_two * cc,
            d: graph * d,
            e1,
            e2,
            f: inv_two * f,
            g: graph * g,
        };
        let bn2 = bn * bn;
        let ratios = [
            terms.b1 / bn2,
            terms.e1 / bn2,
            terms.a / bn2,
            (terms.c + terms.d + terms.f + terms.g) / bn2,
            terms.b2 / bn2,
            terms.e2 / bn2,
        ];
        for (ci, r) in c.iter_mut().zip(ratios) {
            *ci = ci.max(r);
        }
        kappas.push(terms);
    }

    Ok(BoundConstants {
        c,
        kappas,
        rates,
        beta_net: ident.beta_net,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub t: u64,
    pub raw: f64,
    pub clipped: f64,
}

/// Bound values for `t = 0 ..= t_max`.
pub fn error_bound_curve(
    bound: &BoundConstants,
    delta: f64,
    eta: f64,
    eta_tilde: f64,
    t_max: u64,
) -> Vec<BoundPoint> {
    (0..=t_max)
        .map(|t| {
            let raw = bound.at(t, delta, eta, eta_tilde);
            BoundPoint {
                t,
                raw,
                clipped: raw.min(1.0),
            }
        })
        .collect()
}
