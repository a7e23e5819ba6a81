//! Regularized multiclass logistic regression with a pivot class, gated SGD
//! and the decision statistic built from the learned posterior and prior.
//!
//! The posterior parameters of an agent with extended feature dimension `D`
//! and `H` hypotheses are stored as `H − 1` consecutive blocks of length `D`;
//! entry `(m, h)` lives at `h * D + m`. The last hypothesis is the pivot and
//! carries an implicit zero block.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, logsumexp, norm_sq};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    dim: usize,
    hypotheses: usize,
}

impl AgentParams {
    /// Zero parameters for extended dimension `dim` (raw dimension + 1).
    pub fn zeros(dim: usize, hypotheses: usize) -> Self {
        Self {
            w: vec![0.0; dim * (hypotheses - 1)],
            u: vec![0.0; hypotheses - 1],
            dim,
            hypotheses,
        }
    }

    pub fn from_parts(w: Vec<f64>, u: Vec<f64>, dim: usize, hypotheses: usize) -> Result<Self> {
        if hypotheses < 2 {
            return Err(Error::Invalid("at least two hypotheses are required".into()));
        }
        if w.len() != dim * (hypotheses - 1) {
            return Err(Error::DimensionMismatch {
                context: "posterior parameters",
                expected: dim * (hypotheses - 1),
                found: w.len(),
            });
        }
        if u.len() != hypotheses - 1 {
            return Err(Error::DimensionMismatch {
                context: "prior parameters",
                expected: hypotheses - 1,
                found: u.len(),
            });
        }
        Ok(Self {
            w,
            u,
            dim,
            hypotheses,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    /// Block `h` of the posterior parameters (`h < H − 1`).
    pub fn block(&self, h: usize) -> &[f64] {
        &self.w[h * self.dim..(h + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub eta: f64,
    pub eta_tilde: f64,
    pub rho: f64,
    pub rho_tilde: f64,
}

impl SgdConfig {
    pub fn new(eta: f64, eta_tilde: f64, rho: f64, rho_tilde: f64) -> Result<Self> {
        for (name, v) in [
            ("eta", eta),
            ("eta_tilde", eta_tilde),
            ("rho", rho),
            ("rho_tilde", rho_tilde),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive and finite",
                });
            }
        }
        Ok(Self {
            eta,
            eta_tilde,
            rho,
            rho_tilde,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    pub nu: f64,
    pub xi: f64,
    pub nu_tilde: f64,
    pub xi_tilde: f64,
    pub sigma2: f64,
    pub sigma2_tilde: f64,
}

fn hypotheses_for(w: &[f64], dim: usize) -> usize {
    debug_assert!(dim > 0 && w.len().is_multiple_of(dim));
    w.len() / dim + 1
}

/// Logits `xᵀw(θ_h)` for every hypothesis, pivot last at zero.
fn logits_into(w: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let blocks = out.len() - 1;
    for (h, o) in out.iter_mut().take(blocks).enumerate() {
        *o = dot(&w[h * d..(h + 1) * d], x);
    }
    out[blocks] = 0.0;
}

/// Softmax probabilities of the non-pivot classes, written into `probs`
/// (length H); returns the log-partition.
fn class_probabilities(w: &[f64], x: &[f64], probs: &mut [f64]) -> f64 {
    logits_into(w, x, probs);
    let lse = logsumexp(probs);
    for p in probs.iter_mut() {
        *p = libm::exp(*p - lse);
    }
    lse
}

pub fn loss_w(w: &[f64], x: &[f64], label: usize, rho: f64) -> f64 {
    let h = hypotheses_for(w, x.len());
    let mut z = vec![0.0; h];
    logits_into(w, x, &mut z);
    -z[label] + logsumexp(&z) + 0.5 * rho * norm_sq(w)
}

pub fn grad_w(w: &[f64], x: &[f64], label: usize, rho: f64) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut probs = vec![0.0; hypotheses_for(w, x.len())];
    grad_w_into(w, x, label, rho, &mut probs, &mut out);
    out
}

/// Allocation-free gradient; `probs` must have length H.
pub fn grad_w_into(w: &[f64], x: &[f64], label: usize, rho: f64, probs: &mut [f64], out: &mut [f64]) {
    let d = x.len();
    class_probabilities(w, x, probs);
    for h in 0..probs.len() - 1 {
        let coef = probs[h] - if h == label { 1.0 } else { 0.0 };
        for m in 0..d {
            let i = h * d + m;
            out[i] = coef * x[m] + rho * w[i];
        }
    }
}

pub fn loss_u(u: &[f64], label: usize, rho_tilde: f64) -> f64 {
    let mut z = u.to_vec();
    z.push(0.0);
    -z[label] + logsumexp(&z) + 0.5 * rho_tilde * norm_sq(u)
}

pub fn grad_u(u: &[f64], label: usize, rho_tilde: f64) -> Vec<f64> {
    let mut z = u.to_vec();
    z.push(0.0);
    let lse = logsumexp(&z);
    u.iter()
        .enumerate()
        .map(|(h, &uh)| {
            libm::exp(uh - lse) - if h == label { 1.0 } else { 0.0 } + rho_tilde * uh
        })
        .collect()
}

/// Reusable buffers for the per-step hot path.
#[derive(Debug, Clone)]
pub struct Scratch {
    probs: Vec<f64>,
}

impl Scratch {
    pub fn new(hypotheses: usize) -> Self {
        Self {
            probs: vec![0.0; hypotheses],
        }
    }
}

/// One gated SGD step on the posterior parameters. `x` is extended.
pub fn sgd_step_w(params: &mut AgentParams, sample: Option<(&[f64], usize)>, cfg: &SgdConfig) {
    let mut scratch = Scratch::new(params.hypotheses);
    sgd_step_w_with(params, sample, cfg, &mut scratch);
}

pub fn sgd_step_w_with(
    params: &mut AgentParams,
    sample: Option<(&[f64], usize)>,
    cfg: &SgdConfig,
    scratch: &mut Scratch,
) {
    let Some((x, label)) = sample else { return };
    let d = params.dim;
    let probs = &mut scratch.probs;
    class_probabilities(&params.w, x, probs);
    for h in 0..params.hypotheses - 1 {
        let coef = probs[h] - if h == label { 1.0 } else { 0.0 };
        for m in 0..d {
            let i = h * d + m;
            let g = coef * x[m] + cfg.rho * params.w[i];
            params.w[i] -= cfg.eta * g;
        }
    }
}

/// One gated SGD step on the prior parameters.
pub fn sgd_step_u(params: &mut AgentParams, label: Option<usize>, cfg: &SgdConfig) {
    let Some(label) = label else { return };
    let g = grad_u(&params.u, label, cfg.rho_tilde);
    for (u, g) in params.u.iter_mut().zip(g) {
        *u -= cfg.eta_tilde * g;
    }
}

/// `xᵀw(θ) − u(θ)`, zero at the pivot.
pub fn decision_statistic(params: &AgentParams, x: &[f64], theta: usize) -> f64 {
    if theta == params.hypotheses - 1 {
        return 0.0;
    }
    dot(params.block(theta), x) - params.u[theta]
}

pub fn decision_statistics_into(params: &AgentParams, x: &[f64], out: &mut [f64]) {
    for (h, o) in out.iter_mut().enumerate() {
        *o = decision_statistic(params, x, h);
    }
}

/// Empirical strong-convexity, smoothness and gradient-noise constants.
///
/// `samples` holds extended features with labels drawn from the training
/// distribution; `optimal` carries the minimizers at which the noise is measured.
pub fn estimate_constants(
    samples: &[(Vec<f64>, usize)],
    optimal: &AgentParams,
    rho: f64,
    rho_tilde: f64,
) -> Result<CostConstants> {
    const MIN_SAMPLES: usize = 1000;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean_sq = samples.iter().map(|(x, _)| norm_sq(x)).sum::<f64>() / n;

    let grads: Vec<Vec<f64>> = samples
        .iter()
        .map(|(x, l)| grad_w(&optimal.w, x, *l, rho))
        .collect();
    let sigma2 = max_deviation(&grads);
    let grads_u: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, l)| grad_u(&optimal.u, *l, rho_tilde))
        .collect();
    let sigma2_tilde = max_deviation(&grads_u);

    Ok(CostConstants {
        nu: rho,
        xi: rho + 0.5 * mean_sq,
        nu_tilde: rho_tilde,
        xi_tilde: rho_tilde + 0.5,
        sigma2,
        sigma2_tilde,
    })
}

fn max_deviation(vectors: &[Vec<f64>]) -> f64 {
    let dim = vectors[0].len();
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(0.0, f64::max)
}
