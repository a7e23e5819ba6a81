//! Minimizers of the regularized population cross-entropy costs.
//!
//! Gaussian scenarios are handled exactly: every raw feature coordinate is an
//! iid draw, so by exchangeability the unique minimizer assigns the same
//! weight to all raw coordinates of a block. The cost then depends on the raw
//! features only through their sum, which is normal given the label, and a
//! one-dimensional Gauss–Hermite rule integrates it to machine precision. A
//! damped Newton method finishes the job. For ingested features the same
//! Newton solver runs on the sample average.

use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::GaussianComponent;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot, logsumexp};
use crate::quadrature::GaussHermite;
use crate::training::AgentParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Gauss–Hermite nodes per mixture component.
    pub nodes: usize,
    /// Stop once the gradient norm falls below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            nodes: 64,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Weighted points `(φ_n, label_n, ω_n)` defining a multinomial logistic cost
/// `Σ ω_n [−z_label + logsumexp(z)] + ½ Σ_h Σ_i reg_i p_{h,i}²` with
/// `z_h = φ_nᵀ p_h` and the last class pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDesign {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightedDesign {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], label: usize, weight: f64) {
        debug_assert_eq!(features.len(), self.dim);
        self.features.extend_from_slice(features);
        self.labels.push(label);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn point(&self, n: usize) -> (&[f64], usize, f64) {
        (
            &self.features[n * self.dim..(n + 1) * self.dim],
            self.labels[n],
            self.weights[n],
        )
    }

    fn objective(&self, p: &[f64], hypotheses: usize, reg: &[f64], z: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut f = 0.0;
        for n in 0..self.len() {
            let (phi, label, w) = self.point(n);
            for h in 0..hypotheses - 1 {
                z[h] = dot(&p[h * d..(h + 1) * d], phi);
            }
            z[hypotheses - 1] = 0.0;
            f += w * (logsumexp(z) - z[label]);
        }
        for h in 0..hypotheses - 1 {
            for i in 0..d {
                f += 0.5 * reg[i] * p[h * d + i] * p[h * d + i];
            }
        }
        f
    }
}

/// Damped Newton minimization of the cost described by `design`.
pub fn minimize_multinomial(
    design: &WeightedDesign,
    hypotheses: usize,
    reg: &[f64],
    cfg: &OracleConfig,
) -> Result<Vec<f64>> {
    let d = design.dim;
    let blocks = hypotheses - 1;
    let np = blocks * d;
    let mut p = vec![0.0; np];
    let mut z = vec![0.0; hypotheses];
    let mut probs = vec![0.0; hypotheses];
    let mut grad = vec![0.0; np];
    let mut hess = vec![0.0; np * np];
    let mut grad_norm = f64::INFINITY;

    for _ in 0..cfg.max_iterations {
        grad.fill(0.0);
        hess.fill(0.0);
        for n in 0..design.len() {
            let (phi, label, w) = design.point(n);
            for h in 0..blocks {
                z[h] = dot(&p[h * d..(h + 1) * d], phi);
            }
            z[blocks] = 0.0;
            let lse = logsumexp(&z);
            for (pr, zz) in probs.iter_mut().zip(&z) {
                *pr = libm::exp(zz - lse);
            }
            for h in 0..blocks {
                let r = probs[h] - if h == label { 1.0 } else { 0.0 };
                for i in 0..d {
                    grad[h * d + i] += w * r * phi[i];
                }
                for g in 0..blocks {
                    let c = w * (if h == g { probs[h] } else { 0.0 } - probs[h] * probs[g]);
                    if c == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        let row = (h * d + i) * np + g * d;
                        let ci = c * phi[i];
                        for j in 0..d {
                            hess[row + j] += ci * phi[j];
                        }
                    }
                }
            }
        }
        for h in 0..blocks {
            for i in 0..d {
                let a = h * d + i;
                grad[a] += reg[i] * p[a];
                hess[a * np + a] += reg[i];
            }
        }
        grad_norm = libm::sqrt(dot(&grad, &grad));
        if grad_norm < cfg.tolerance {
            return Ok(p);
        }
        cholesky_in_place(&mut hess, np)?;
        let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
        cholesky_solve(&hess, np, &mut step);

        let f0 = design.objective(&p, hypotheses, reg, &mut z);
        let slope = dot(&grad, &step);
        // predicted decrease below roundoff in f: the line search is blind,
        // take the pure Newton step
        let blind = -slope <= 1e-13 * (1.0 + f0.abs());
        let mut t = 1.0;
        let mut trial = vec![0.0; np];
        loop {
            for ((tr, pp), s) in trial.iter_mut().zip(&p).zip(&step) {
                *tr = pp + t * s;
            }
            let f1 = design.objective(&trial, hypotheses, reg, &mut z);
            if blind || f1 <= f0 + 1e-4 * t * slope || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        p.copy_from_slice(&trial);
    }
    Err(Error::NoConvergence {
        what: "optimal-parameter Newton solver",
        iterations: cfg.max_iterations,
        residual: grad_norm,
    })
}

/// Minimizer of the prior cost: softmax cross-entropy against `priors`.
pub fn optimal_prior(priors: &[f64], rho_tilde: f64, cfg: &OracleConfig) -> Result<Vec<f64>> {
    let mut design = WeightedDesign::new(1);
    for (h, &p) in priors.iter().enumerate() {
        if p > 0.0 {
            design.push(&[1.0], h, p);
        }
    }
    minimize_multinomial(&design, priors.len(), &[rho_tilde], cfg)
}

/// Minimizers `w°, u°` for one agent together with the truth used for the
/// difference tables.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalParams {
    pub params: AgentParams,
    pub truth: usize,
}

impl OptimalParams {
    fn block_or_zero(&self, h: usize) -> Vec<f64> {
        if h == self.params.hypotheses() - 1 {
            vec![0.0; self.params.dim()]
        } else {
            self.params.block(h).to_vec()
        }
    }

    fn u_or_zero(&self, h: usize) -> f64 {
        self.params.u.get(h).copied().unwrap_or(0.0)
    }

    /// `w°(θ₀) − w°(θ)`.
    pub fn delta_w(&self, theta: usize) -> Vec<f64> {
        let a = self.block_or_zero(self.truth);
        let b = self.block_or_zero(theta);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    /// `u°(θ₀) − u°(θ)`.
    pub fn delta_u(&self, theta: usize) -> f64 {
        self.u_or_zero(self.truth) - self.u_or_zero(theta)
    }

    pub fn with_truth(&self, truth: usize) -> Self {
        Self {
            params: self.params.clone(),
            truth,
        }
    }
}

/// Exact minimizers for an agent whose raw coordinates are iid draws from the
/// component `components[row[h]]` under label `h`.
pub fn optimal_gaussian(
    components: &[GaussianComponent],
    row: &[usize],
    priors: &[f64],
    raw_dim: usize,
    rho: f64,
    rho_tilde: f64,
    truth: usize,
    cfg: &OracleConfig,
) -> Result<OptimalParams> {
    let hypotheses = priors.len();
    let rule = GaussHermite::new(cfg.nodes)?;
    let m = raw_dim as f64;
    let mut design = WeightedDesign::new(2);
    for (h, &prior) in priors.iter().enumerate() {
        if prior <= 0.0 {
            continue;
        }
        let c = &components[row[h]];
        let mean = m * c.mean;
        let std = libm::sqrt(m) * c.std;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            design.push(&[mean + std * z, 1.0], h, prior * w);
        }
    }
    let reduced = minimize_multinomial(&design, hypotheses, &[rho * m, rho], cfg)?;
    let dim = raw_dim + 1;
    let mut w = vec![0.0; dim * (hypotheses - 1)];
    for h in 0..hypotheses - 1 {
        for i in 0..raw_dim {
            w[h * dim + i] = reduced[2 * h];
        }
        w[h * dim + raw_dim] = reduced[2 * h + 1];
    }
    let u = optimal_prior(priors, rho_tilde, cfg)?;
    Ok(OptimalParams {
        params: AgentParams::from_parts(w, u, dim, hypotheses)?,
        truth,
    })
}

/// Sample-average minimizers from extended training features and labels.
/// The prior cost uses the empirical label frequencies.
pub fn optimal_from_samples(
    samples: &[(Vec<f64>, usize)],
    hypotheses: usize,
    rho: f64,
    rho_tilde: f64,
    truth: usize,
    cfg: &OracleConfig,
) -> Result<OptimalParams> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    };
    let dim = first.0.len();
    let weight = 1.0 / samples.len() as f64;
    let mut design = WeightedDesign::new(dim);
    let mut freq = vec![0.0; hypotheses];
    for (x, l) in samples {
        design.push(x, *l, weight);
        freq[*l] += weight;
    }
    let w = minimize_multinomial(&design, hypotheses, &vec![rho; dim], cfg)?;
    let u = optimal_prior(&freq, rho_tilde, cfg)?;
    Ok(OptimalParams {
        params: AgentParams::from_parts(w, u, dim, hypotheses)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{grad_u, grad_w};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn comps() -> Vec<GaussianComponent> {
        (1..=3).map(GaussianComponent::numbered).collect()
    }

    #[test]
    fn prior_minimizer_reproduces_priors_for_tiny_regularization() {
        let p = [0.3, 0.4, 0.3];
        let u = optimal_prior(&p, 1e-12, &OracleConfig::default()).unwrap();
        let z = [u[0], u[1], 0.0];
        let mut s = [0.0; 3];
        crate::linalg::softmax(&z, &mut s);
        for (a, b) in s.iter().zip(p) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        // zero features: posterior offsets play the role of prior parameters
        let mut design = WeightedDesign::new(2);
        for (h, &ph) in p.iter().enumerate() {
            design.push(&[0.0, 1.0], h, ph);
        }
        let w = minimize_multinomial(&design, 3, &[1e-12, 1e-12], &OracleConfig::default()).unwrap();
        assert_abs_diff_eq!(w[1], u[0], epsilon = 1e-8);
        assert_abs_diff_eq!(w[3], u[1], epsilon = 1e-8);
    }

    #[test]
    fn quadrature_optimum_has_zero_population_gradient() {
        // Verify with a large-sample gradient estimate on fresh data.
        let c = comps();
        let pri = [0.3, 0.4, 0.3];
        let row = [0, 1, 2];
        let opt = optimal_gaussian(&c, &row, &pri, 4, 0.05, 0.05, 0, &OracleConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut g = vec![0.0; opt.params.w.len()];
        let mut gu = vec![0.0; 2];
        for _ in 0..n {
            let l = crate::datagen::draw_label(&pri, &mut rng);
            let mut x: Vec<f64> = (0..4).map(|_| c[row[l]].sample(&mut rng)).collect();
            x.push(1.0);
            for (a, b) in g.iter_mut().zip(grad_w(&opt.params.w, &x, l, 0.05)) {
                *a += b / n as f64;
            }
            for (a, b) in gu.iter_mut().zip(grad_u(&opt.params.u, l, 0.05)) {
                *a += b / n as f64;
            }
        }
        assert!(libm::sqrt(dot(&g, &g)) < 1e-2, "{g:?}");
        assert!(libm::sqrt(dot(&gu, &gu)) < 1e-2);
        // exact prior gradient vanishes
        let exact: Vec<f64> = (0..2)
            .map(|h| (0..3).map(|l| pri[l] * grad_u(&opt.params.u, l, 0.05)[h]).sum::<f64>())
            .collect();
        assert!(exact.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn quadrature_is_converged_in_node_count() {
        let c = comps();
        let a = optimal_gaussian(&c, &[0, 1, 2], &[0.3, 0.4, 0.3], 4, 0.05, 0.05, 0, &OracleConfig { nodes: 48, ..Default::default() }).unwrap();
        let b = optimal_gaussian(&c, &[0, 1, 2], &[0.3, 0.4, 0.3], 4, 0.05, 0.05, 0, &OracleConfig { nodes: 96, ..Default::default() }).unwrap();
        for (x, y) in a.params.w.iter().zip(&b.params.w) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-8);
        }
    }

    #[test]
    fn sample_average_agrees_with_quadrature() {
        let c = comps();
        let pri = [0.3, 0.4, 0.3];
        let row = [0, 0, 2];
        let exact = optimal_gaussian(&c, &row, &pri, 2, 0.05, 0.05, 0, &OracleConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<(Vec<f64>, usize)> = (0..100_000)
            .map(|_| {
                let l = crate::datagen::draw_label(&pri, &mut rng);
                let x = vec![c[row[l]].sample(&mut rng), c[row[l]].sample(&mut rng), 1.0];
                (x, l)
            })
            .collect();
        let approx = optimal_from_samples(&samples, 3, 0.05, 0.05, 0, &OracleConfig::default()).unwrap();
        for (x, y) in exact.params.w.iter().zip(&approx.params.w) {
            assert_abs_diff_eq!(*x, *y, epsilon = 0.05);
        }
        for (x, y) in exact.params.u.iter().zip(&approx.params.u) {
            assert_abs_diff_eq!(*x, *y, epsilon = 0.02);
        }
    }

    #[test]
    fn difference_tables_vanish_at_truth() {
        let c = comps();
        let opt = optimal_gaussian(&c, &[0, 1, 2], &[0.3, 0.4, 0.3], 4, 0.05, 0.05, 1, &OracleConfig::default()).unwrap();
        assert!(opt.delta_w(1).iter().all(|v| *v == 0.0));
        assert_eq!(opt.delta_u(1), 0.0);
        let d2 = opt.delta_w(2);
        assert_eq!(d2, opt.params.block(1).to_vec());
    }
}
