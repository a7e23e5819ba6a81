//! Belief dynamics: discounted local update, geometric pooling, log-ratio
//! recursion and decisions. Everything is kept in the log domain.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::CombinationMatrix;
use crate::linalg::{log_normalize, Matrix};

/// Per-agent log-beliefs, stored agent-major (`k * H + h`).
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    agents: usize,
    hypotheses: usize,
    log_belief: Vec<f64>,
}

impl BeliefState {
    pub fn uniform(agents: usize, hypotheses: usize) -> Self {
        let v = -libm::log(hypotheses as f64);
        Self {
            agents,
            hypotheses,
            log_belief: vec![v; agents * hypotheses],
        }
    }

    pub fn from_probabilities<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let agents = rows.len();
        let hypotheses = rows.first().map_or(0, |r| r.as_ref().len());
        let mut log_belief = Vec::with_capacity(agents * hypotheses);
        for r in rows {
            let r = r.as_ref();
            if r.len() != hypotheses {
                return Err(Error::DimensionMismatch {
                    context: "belief row",
                    expected: hypotheses,
                    found: r.len(),
                });
            }
            if let Some(&bad) = r.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidParameter {
                    name: "belief",
                    value: bad,
                    reason: "initial beliefs must be strictly positive",
                });
            }
            let start = log_belief.len();
            log_belief.extend(r.iter().map(|p| libm::log(*p)));
            log_normalize(&mut log_belief[start..]);
        }
        Ok(Self {
            agents,
            hypotheses,
            log_belief,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn log_row(&self, k: usize) -> &[f64] {
        &self.log_belief[k * self.hypotheses..(k + 1) * self.hypotheses]
    }

    pub fn probabilities(&self, k: usize) -> Vec<f64> {
        self.log_row(k).iter().map(|v| libm::exp(*v)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.log_belief
    }
}

/// `log ψ = (1−δ) log μ + α d`, normalized. `out` has length H.
pub fn adaptive_update(log_mu: &[f64], stats: &[f64], gate: bool, delta: f64, out: &mut [f64]) {
    let keep = 1.0 - delta;
    for ((o, m), d) in out.iter_mut().zip(log_mu).zip(stats) {
        *o = keep * m + if gate { *d } else { 0.0 };
    }
    log_normalize(out);
}

/// Geometric pooling: `log μ_k = Σ_j a_jk log ψ_j`, normalized.
pub fn combine(intermediate: &[f64], a: &CombinationMatrix, out: &mut BeliefState) -> Result<()> {
    let k = a.agents();
    let h = out.hypotheses;
    if intermediate.len() != k * h || out.agents != k {
        return Err(Error::DimensionMismatch {
            context: "combine",
            expected: k * h,
            found: intermediate.len(),
        });
    }
    combine_unchecked(intermediate, a.matrix(), h, &mut out.log_belief);
    Ok(())
}

fn combine_unchecked(intermediate: &[f64], a: &Matrix, h: usize, out: &mut [f64]) {
    let k = a.rows();
    out.fill(0.0);
    for j in 0..k {
        let psi = &intermediate[j * h..(j + 1) * h];
        for (col, &w) in a.row(j).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out[col * h..(col + 1) * h].iter_mut().zip(psi) {
                *o += w * p;
            }
        }
    }
    for col in 0..k {
        log_normalize(&mut out[col * h..(col + 1) * h]);
    }
}

/// One prediction-side iteration for every agent. `stats` is agent-major
/// `K × H`; `scratch` is resized as needed.
pub fn step(
    state: &mut BeliefState,
    stats: &[f64],
    gates: &[bool],
    delta: f64,
    a: &CombinationMatrix,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let (k, h) = (state.agents, state.hypotheses);
    if stats.len() != k * h || gates.len() != k || a.agents() != k {
        return Err(Error::DimensionMismatch {
            context: "belief step",
            expected: k * h,
            found: stats.len(),
        });
    }
    scratch.resize(k * h, 0.0);
    for agent in 0..k {
        let r = agent * h..(agent + 1) * h;
        adaptive_update(
            &state.log_belief[r.clone()],
            &stats[r.clone()],
            gates[agent],
            delta,
            &mut scratch[r],
        );
    }
    combine_unchecked(scratch, a.matrix(), h, &mut state.log_belief);
    Ok(())
}

/// Argmax with ties resolved to the lowest index.
pub fn decide(belief: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in belief.iter().enumerate().skip(1) {
        if *v > belief[best] {
            best = i;
        }
    }
    best
}

/// `β_k(θ) = log μ_k(θ₀) − log μ_k(θ)`, agent-major `K × H` with a zero
/// entry at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBeliefRatios {
    agents: usize,
    hypotheses: usize,
    truth: usize,
    values: Vec<f64>,
}

impl LogBeliefRatios {
    pub fn zeros(agents: usize, hypotheses: usize, truth: usize) -> Self {
        Self {
            agents,
            hypotheses,
            truth,
            values: vec![0.0; agents * hypotheses],
        }
    }

    pub fn from_values(agents: usize, hypotheses: usize, truth: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != agents * hypotheses {
            return Err(Error::DimensionMismatch {
                context: "log-belief ratios",
                expected: agents * hypotheses,
                found: values.len(),
            });
        }
        Ok(Self {
            agents,
            hypotheses,
            truth,
            values,
        })
    }

    pub fn from_beliefs(state: &BeliefState, truth: usize) -> Self {
        let h = state.hypotheses;
        let mut values = Vec::with_capacity(state.log_belief.len());
        for k in 0..state.agents {
            let row = state.log_row(k);
            values.extend(row.iter().map(|v| row[truth] - v));
        }
        Self {
            agents: state.agents,
            hypotheses: h,
            truth,
            values,
        }
    }

    #[inline]
    pub fn get(&self, agent: usize, theta: usize) -> f64 {
        self.values[agent * self.hypotheses + theta]
    }

    pub fn truth(&self) -> usize {
        self.truth
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `λ_k(θ) = α_k (d_k(θ₀) − d_k(θ))`, agent-major `K × H`.
pub fn innovations(stats: &[f64], gates: &[bool], hypotheses: usize, truth: usize) -> Vec<f64> {
    let mut out = vec![0.0; stats.len()];
    for (k, &g) in gates.iter().enumerate() {
        if !g {
            continue;
        }
        let row = &stats[k * hypotheses..(k + 1) * hypotheses];
        for (o, d) in out[k * hypotheses..(k + 1) * hypotheses].iter_mut().zip(row) {
            *o = row[truth] - d;
        }
    }
    out
}

/// `β_k ← Σ_j a_jk ((1−δ) β_j + λ_j)`.
pub fn log_ratio_step(beta: &mut LogBeliefRatios, lambda: &[f64], delta: f64, a: &CombinationMatrix) {
    let h = beta.hypotheses;
    let keep = 1.0 - delta;
    let local: Vec<f64> = beta
        .values
        .iter()
        .zip(lambda)
        .map(|(b, l)| keep * b + l)
        .collect();
    beta.values.fill(0.0);
    let m = a.matrix();
    for j in 0..beta.agents {
        for (col, &w) in m.row(j).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for th in 0..h {
                beta.values[col * h + th] += w * local[j * h + th];
            }
        }
    }
}

/// Closed form of `t` log-ratio steps. `lambda_history[m]` is the innovation
/// at time `m + 1`.
pub fn unfold(
    beta0: &LogBeliefRatios,
    lambda_history: &[Vec<f64>],
    delta: f64,
    a: &CombinationMatrix,
    t: usize,
) -> LogBeliefRatios {
    let (k, h) = (beta0.agents, beta0.hypotheses);
    let m = a.matrix();
    // powers[i] = A^(i+1)
    let mut powers = Vec::with_capacity(t);
    let mut p = m.clone();
    for i in 0..t {
        if i > 0 {
            p = p.matmul(m);
        }
        powers.push(p.clone());
    }
    let keep = 1.0 - delta;
    let mut out = vec![0.0; k * h];
    let accumulate = |out: &mut [f64], power: &Matrix, coef: f64, src: &[f64]| {
        for j in 0..k {
            for col in 0..k {
                let w = coef * power.get(j, col);
                if w == 0.0 {
                    continue;
                }
                for th in 0..h {
                    out[col * h + th] += w * src[j * h + th];
                }
            }
        }
    };
    if t == 0 {
        return beta0.clone();
    }
    accumulate(&mut out, &powers[t - 1], libm::pow(keep, t as f64), &beta0.values);
    for s in 0..t {
        accumulate(&mut out, &powers[s], libm::pow(keep, s as f64), &lambda_history[t - 1 - s]);
    }
    LogBeliefRatios {
        agents: k,
        hypotheses: h,
        truth: beta0.truth,
        values: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probs(row: &[f64]) -> Vec<f64> {
        row.iter().map(|v| libm::exp(*v)).collect()
    }

    #[test]
    fn adaptive_update_examples() {
        let mu: Vec<f64> = [0.9_f64, 0.05, 0.05].iter().map(|p| libm::log(*p)).collect();
        let mut out = [0.0; 3];
        adaptive_update(&mu, &[0.0; 3], false, 0.5, &mut out);
        let p = probs(&out);
        assert_abs_diff_eq!(p[0], 0.6796, epsilon = 1e-4);
        assert_abs_diff_eq!(p[1], 0.1602, epsilon = 1e-4);

        let uni = [-libm::log(3.0); 3];
        adaptive_update(&uni, &[0.0; 3], true, 0.3, &mut out);
        for v in probs(&out) {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }

        // δ = 0 reduces to the Bayesian update ψ ∝ μ e^d
        let d = [0.7, -0.2, 0.0];
        adaptive_update(&mu, &d, true, 0.0, &mut out);
        let raw: Vec<f64> = [0.9, 0.05, 0.05].iter().zip(d).map(|(m, d)| m * libm::exp(d)).collect();
        let s: f64 = raw.iter().sum();
        for (a, b) in probs(&out).iter().zip(&raw) {
            assert_abs_diff_eq!(*a, b / s, epsilon = 1e-14);
        }
    }

    #[test]
    fn combine_examples() {
        let a = CombinationMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let psi: Vec<f64> = [0.8_f64, 0.2, 0.2, 0.8].iter().map(|p| libm::log(*p)).collect();
        let mut out = BeliefState::uniform(2, 2);
        combine(&psi, &a, &mut out).unwrap();
        for k in 0..2 {
            for v in out.probabilities(k) {
                assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
            }
        }
        let id = CombinationMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        combine(&psi, &id, &mut out).unwrap();
        assert_abs_diff_eq!(out.probabilities(0)[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(out.probabilities(1)[1], 0.8, epsilon = 1e-15);

        let same: Vec<f64> = [0.7_f64, 0.3, 0.7, 0.3].iter().map(|p| libm::log(*p)).collect();
        let b = CombinationMatrix::from_rows(&[[0.3, 0.6], [0.7, 0.4]]).unwrap();
        combine(&same, &b, &mut out).unwrap();
        assert_abs_diff_eq!(out.probabilities(0)[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(out.probabilities(1)[0], 0.7, epsilon = 1e-14);

        assert!(combine(&psi[..3], &a, &mut out).is_err());
    }

    #[test]
    fn tempering_drives_beliefs_to_uniform() {
        let id = CombinationMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut s = BeliefState::from_probabilities(&[[0.9, 0.05, 0.05], [0.2, 0.7, 0.1]]).unwrap();
        let mut scratch = Vec::new();
        let zero = [0.0; 6];
        for _ in 0..50 {
            step(&mut s, &zero, &[false, false], 0.2, &id, &mut scratch).unwrap();
        }
        for k in 0..2 {
            for p in s.probabilities(k) {
                assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn single_agent_fixed_point() {
        // log-ratio fixed point: β* = λ/δ for constant statistics
        let a = CombinationMatrix::from_rows(&[[1.0]]).unwrap();
        let d = [0.3, -0.1, 0.0];
        let delta = 0.1;
        let mut s = BeliefState::uniform(1, 3);
        let mut scratch = Vec::new();
        for _ in 0..2000 {
            step(&mut s, &d, &[true], delta, &a, &mut scratch).unwrap();
        }
        let mut expected: Vec<f64> = d.iter().map(|v| v / delta).collect();
        log_normalize(&mut expected);
        for (got, want) in s.log_row(0).iter().zip(&expected) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-9);
        }
        assert_eq!(decide(s.log_row(0)), 0);
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(decide(&[1.0 / 3.0; 3]), 0);
        let logs: Vec<f64> = [0.2_f64, 0.5, 0.3].iter().map(|p| libm::log(*p)).collect();
        assert_eq!(decide(&logs), 1);
    }

    #[test]
    fn relabeling_permutes_beliefs() {
        let a = CombinationMatrix::from_rows(&[[0.6, 0.3], [0.4, 0.7]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s1 = BeliefState::uniform(2, 3);
        let mut s2 = BeliefState::uniform(2, 3);
        let mut scratch = Vec::new();
        for _ in 0..100 {
            let d: Vec<f64> = (0..6).map(|i| if i % 3 == 2 { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
            let swapped = [d[1], d[0], d[2], d[4], d[3], d[5]];
            step(&mut s1, &d, &[true, true], 0.1, &a, &mut scratch).unwrap();
            step(&mut s2, &swapped, &[true, true], 0.1, &a, &mut scratch).unwrap();
            for k in 0..2 {
                let (r1, r2) = (s1.log_row(k), s2.log_row(k));
                assert_abs_diff_eq!(r1[0], r2[1], epsilon = 1e-12);
                assert_abs_diff_eq!(r1[1], r2[0], epsilon = 1e-12);
                let (c1, c2) = (decide(r1), decide(r2));
                let mapped = [1, 0, 2][c1];
                if (r1[0] - r1[1]).abs() > 1e-12 {
                    assert_eq!(mapped, c2);
                }
            }
        }
    }

    fn random_matrix(k: usize, rng: &mut ChaCha8Rng) -> CombinationMatrix {
        let mut m = Matrix::zeros(k, k);
        for col in 0..k {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            for j in 0..k {
                m.set(j, col, raw[j] / s);
            }
        }
        // re-normalize the last entry so the column sum is 1 to rounding
        for col in 0..k {
            let partial: f64 = (0..k - 1).map(|j| m.get(j, col)).sum();
            m.set(k - 1, col, 1.0 - partial);
        }
        CombinationMatrix::validate(m).unwrap()
    }

    #[test]
    fn log_ratio_recursion_matches_belief_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (k, h, truth) = (10, 3, 0);
        let a = random_matrix(k, &mut rng);
        let mut s = BeliefState::uniform(k, h);
        let mut beta = LogBeliefRatios::from_beliefs(&s, truth);
        let mut scratch = Vec::new();
        for _ in 0..100 {
            let stats: Vec<f64> = (0..k * h).map(|i| if i % h == h - 1 { 0.0 } else { rng.random_range(-2.0..2.0) }).collect();
            let gates: Vec<bool> = (0..k).map(|_| rng.random_bool(0.8)).collect();
            step(&mut s, &stats, &gates, 0.05, &a, &mut scratch).unwrap();
            let lambda = innovations(&stats, &gates, h, truth);
            log_ratio_step(&mut beta, &lambda, 0.05, &a);
            assert!(beta.max_abs_diff(&LogBeliefRatios::from_beliefs(&s, truth)) < 1e-9);
        }
    }

    #[test]
    fn unfold_matches_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..5 {
            let (k, h) = (4, 3);
            let a = random_matrix(k, &mut rng);
            let delta = rng.random_range(0.01..0.5);
            let b0: Vec<f64> = (0..k * h).map(|_| rng.random_range(-3.0..3.0)).collect();
            let beta0 = LogBeliefRatios::from_values(k, h, 0, b0).unwrap();
            let t = 20 + trial;
            let history: Vec<Vec<f64>> = (0..t)
                .map(|_| (0..k * h).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut it = beta0.clone();
            for (i, l) in history.iter().enumerate() {
                log_ratio_step(&mut it, l, delta, &a);
                if i == 0 {
                    assert!(it.max_abs_diff(&unfold(&beta0, &history, delta, &a, 1)) < 1e-12);
                }
            }
            assert!(it.max_abs_diff(&unfold(&beta0, &history, delta, &a, t)) < 1e-9);
        }
    }

    #[test]
    fn unfold_forgets_initial_condition_for_large_discount() {
        let a = CombinationMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let beta0 = LogBeliefRatios::from_values(2, 2, 0, vec![0.0, 100.0, 0.0, -50.0]).unwrap();
        let zero = vec![vec![0.0; 4]; 30];
        let b = unfold(&beta0, &zero, 0.99, &a, 30);
        assert!(b.as_slice().iter().all(|v| v.abs() < 1e-40));
    }
}
