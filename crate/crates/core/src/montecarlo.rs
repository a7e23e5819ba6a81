//! Step-level simulation, single runs, and Monte Carlo error-probability
//! estimation with Wilson intervals.

use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::{extend_features, DataSource, SyntheticSource};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::rng::split_seed;
use crate::scenario::Scenario;
use crate::social::{decide, step as belief_step, BeliefState};
use crate::training::{
    decision_statistics_into, sgd_step_u, sgd_step_w_with, AgentParams, Scratch, SgdConfig,
};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// One A²SL network advancing in lock-step over a data source.
pub struct Simulation<'a, S: DataSource> {
    scenario: &'a Scenario,
    source: S,
    params: Vec<AgentParams>,
    sgd: Vec<SgdConfig>,
    beliefs: BeliefState,
    t: u64,
    stats: Vec<f64>,
    gates: Vec<bool>,
    raw: Vec<f64>,
    ext: Vec<f64>,
    scratch: Scratch,
    pool: Vec<f64>,
}

impl<'a, S: DataSource> Simulation<'a, S> {
    pub fn new(scenario: &'a Scenario, source: S, params: Vec<AgentParams>) -> Result<Self> {
        let k = scenario.agents();
        let h = scenario.hypothesis_count();
        if params.len() != k {
            return Err(Error::DimensionMismatch {
                context: "initial parameters",
                expected: k,
                found: params.len(),
            });
        }
        let sgd = (0..k).map(|j| scenario.sgd_config(j)).collect::<Result<_>>()?;
        Ok(Self {
            scenario,
            source,
            params,
            sgd,
            beliefs: scenario.initial_belief_state()?,
            t: 0,
            stats: vec![0.0; k * h],
            gates: vec![false; k],
            raw: Vec::new(),
            ext: Vec::new(),
            scratch: Scratch::new(h),
            pool: Vec::with_capacity(k * h),
        })
    }

    /// Advance one time step: training updates, then statistics on the
    /// prediction sample with the fresh parameters, then the belief update.
    pub fn step(&mut self) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let h = self.scenario.hypothesis_count();
        for k in 0..self.params.len() {
            if let Some(label) = self.source.training(k, t, &mut self.raw) {
                extend_features(&self.raw, &mut self.ext);
                sgd_step_w_with(&mut self.params[k], Some((&self.ext, label)), &self.sgd[k], &mut self.scratch);
                sgd_step_u(&mut self.params[k], Some(label), &self.sgd[k]);
            }
            let row = &mut self.stats[k * h..(k + 1) * h];
            self.gates[k] = self.source.prediction(k, t, &mut self.raw);
            if self.gates[k] {
                extend_features(&self.raw, &mut self.ext);
                decision_statistics_into(&self.params[k], &self.ext, row);
            } else {
                row.fill(0.0);
            }
        }
        belief_step(
            &mut self.beliefs,
            &self.stats,
            &self.gates,
            self.scenario.adaptation.delta,
            &self.scenario.combination,
            &mut self.pool,
        )
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn truth(&self) -> usize {
        self.scenario.schedule.state_at(self.t).truth
    }

    pub fn beliefs(&self) -> &BeliefState {
        &self.beliefs
    }

    pub fn params(&self) -> &[AgentParams] {
        &self.params
    }

    /// Decision statistics of the last step, agent-major `K × H` (zero rows
    /// for agents without a prediction sample).
    pub fn statistics(&self) -> &[f64] {
        &self.stats
    }

    pub fn gates(&self) -> &[bool] {
        &self.gates
    }

    pub fn decision(&self, agent: usize) -> usize {
        decide(self.beliefs.log_row(agent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record log-beliefs every `belief_stride` steps (0 disables).
    pub belief_stride: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSnapshot {
    pub t: u64,
    pub log_beliefs: Vec<f64>,
}

/// Trajectory of one run: decisions and truth at `t = 1..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub agents: usize,
    pub horizon: u64,
    /// `decisions[(t−1)·K + k]`.
    pub decisions: Vec<u16>,
    pub truth: Vec<u16>,
    pub beliefs: Vec<BeliefSnapshot>,
    /// Parameters after the last step.
    pub final_params: Vec<AgentParams>,
}

impl RunRecord {
    #[inline]
    pub fn decision(&self, t: u64, agent: usize) -> usize {
        self.decisions[(t as usize - 1) * self.agents + agent] as usize
    }

    #[inline]
    pub fn truth_at(&self, t: u64) -> usize {
        self.truth[t as usize - 1] as usize
    }

    #[inline]
    pub fn is_error(&self, t: u64, agent: usize) -> bool {
        self.decision(t, agent) != self.truth_at(t)
    }
}

/// Drive a simulation to the scenario horizon and record its trajectory.
pub fn run_with_source<S: DataSource>(
    scenario: &Scenario,
    source: S,
    params: Vec<AgentParams>,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord> {
    let k = scenario.agents();
    let horizon = scenario.horizon;
    let mut sim = Simulation::new(scenario, source, params)?;
    let mut decisions = Vec::with_capacity(horizon as usize * k);
    let mut truth = Vec::with_capacity(horizon as usize);
    let mut beliefs = Vec::new();
    for _ in 0..horizon {
        sim.step()?;
        truth.push(sim.truth() as u16);
        decisions.extend((0..k).map(|j| sim.decision(j) as u16));
        if opts.belief_stride > 0 && sim.time() % opts.belief_stride == 0 {
            beliefs.push(BeliefSnapshot {
                t: sim.time(),
                log_beliefs: sim.beliefs().as_slice().to_vec(),
            });
        }
    }
    Ok(RunRecord {
        seed,
        agents: k,
        horizon,
        decisions,
        truth,
        beliefs,
        final_params: sim.params().to_vec(),
    })
}

/// One synthetic run with the given run seed.
pub fn run_once(scenario: &Scenario, seed: u64, params: Vec<AgentParams>, opts: RunOptions) -> Result<RunRecord> {
    let source = SyntheticSource::new(
        seed,
        &scenario.components,
        &scenario.priors,
        &scenario.feature_dims,
        &scenario.arrivals,
        &scenario.schedule,
    );
    run_with_source(scenario, source, params, seed, opts)
}

/// Seed of run `r` under `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    split_seed(master, run as u64)
}

/// Wilson score interval for `errors` successes out of `n` trials.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// First and last step of the steady-state window (inclusive).
pub fn steady_window(horizon: u64, fraction: f64) -> (u64, u64) {
    let len = (libm::floor(horizon as f64 * fraction) as u64).clamp(1, horizon);
    (horizon - len + 1, horizon)
}

/// Error counts accumulated over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTally {
    agents: usize,
    horizon: u64,
    window: (u64, u64),
    runs: u64,
    counts: Vec<u32>,
    /// `(run index, per-agent error fraction over the window)`.
    window_fractions: Vec<(usize, Vec<f64>)>,
}

impl ErrorTally {
    pub fn new(agents: usize, horizon: u64, window: (u64, u64)) -> Self {
        Self {
            agents,
            horizon,
            window,
            runs: 0,
            counts: vec![0; horizon as usize * agents],
            window_fractions: Vec::new(),
        }
    }

    pub fn add(&mut self, run_index: usize, record: &RunRecord) {
        let k = self.agents;
        let mut in_window = vec![0u32; k];
        for t in 1..=self.horizon {
            let truth = record.truth_at(t);
            let base = (t as usize - 1) * k;
            for j in 0..k {
                if record.decisions[base + j] as usize != truth {
                    self.counts[base + j] += 1;
                    if t >= self.window.0 && t <= self.window.1 {
                        in_window[j] += 1;
                    }
                }
            }
        }
        let len = (self.window.1 - self.window.0 + 1) as f64;
        self.window_fractions
            .push((run_index, in_window.iter().map(|c| *c as f64 / len).collect()));
        self.runs += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.runs += other.runs;
        self.window_fractions.extend(other.window_fractions);
        self
    }

    pub fn finish(mut self) -> ErrorEstimate {
        self.window_fractions.sort_by_key(|(r, _)| *r);
        let n = self.runs;
        let mut p = Vec::with_capacity(self.counts.len());
        let mut lo = Vec::with_capacity(self.counts.len());
        let mut hi = Vec::with_capacity(self.counts.len());
        for &c in &self.counts {
            p.push(if n == 0 { 0.0 } else { c as f64 / n as f64 });
            let (l, h) = wilson_interval(c as u64, n, Z_95);
            lo.push(l);
            hi.push(h);
        }
        let steady = (0..self.agents)
            .map(|j| {
                let xs: Vec<f64> = self.window_fractions.iter().map(|(_, f)| f[j]).collect();
                steady_summary(&xs)
            })
            .collect();
        ErrorEstimate {
            agents: self.agents,
            horizon: self.horizon,
            runs: n,
            window: self.window,
            p,
            lo,
            hi,
            steady,
        }
    }
}

/// Mean and 95% normal-approximation interval of per-run window averages.
fn steady_summary(xs: &[f64]) -> SteadyState {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return SteadyState { mean: 0.0, lo: 0.0, hi: 1.0 };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = Z_95 * libm::sqrt(var / n);
    SteadyState {
        mean,
        lo: (mean - half).max(0.0),
        hi: (mean + half).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Instantaneous error probability per agent and time with 95% intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub agents: usize,
    pub horizon: u64,
    pub runs: u64,
    pub window: (u64, u64),
    p: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    pub steady: Vec<SteadyState>,
}

impl ErrorEstimate {
    #[inline]
    fn idx(&self, t: u64, agent: usize) -> usize {
        (t as usize - 1) * self.agents + agent
    }

    pub fn p(&self, t: u64, agent: usize) -> f64 {
        self.p[self.idx(t, agent)]
    }

    pub fn interval(&self, t: u64, agent: usize) -> (f64, f64) {
        let i = self.idx(t, agent);
        (self.lo[i], self.hi[i])
    }

    /// `p̂_{agent, t}` for `t = 1..=horizon`.
    pub fn curve(&self, agent: usize) -> Vec<f64> {
        (1..=self.horizon).map(|t| self.p(t, agent)).collect()
    }
}

/// Sequential Monte Carlo estimate over `runs` runs of the scenario.
pub fn estimate_error_prob(scenario: &Scenario, runs: usize, master_seed: u64) -> Result<ErrorEstimate> {
    let params = scenario.initial_agent_params()?;
    let window = steady_window(scenario.horizon, scenario.steady_fraction);
    let mut tally = ErrorTally::new(scenario.agents(), scenario.horizon, window);
    for r in 0..runs {
        let rec = run_once(scenario, run_seed(master_seed, r), params.clone(), RunOptions::default())?;
        tally.add(r, &rec);
    }
    Ok(tally.finish())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub delta: f64,
    pub eta: f64,
    pub eta_tilde: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub triplet: Triplet,
    pub agent: usize,
    pub steady: SteadyState,
}

/// Steady-state error for every triplet and agent.
pub fn sweep(scenario: &Scenario, triplets: &[Triplet], runs: usize, master_seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for tr in triplets {
        let s = scenario.with_triplet(tr.delta, tr.eta, tr.eta_tilde);
        let est = estimate_error_prob(&s, runs, master_seed)?;
        rows.extend(est.steady.iter().enumerate().map(|(agent, st)| SweepRow {
            triplet: *tr,
            agent,
            steady: *st,
        }));
    }
    Ok(rows)
}

/// Mean squared deviation `E‖w_t − w_ref‖²` of one agent's posterior
/// parameters over `runs` independent training streams, for `t = 1..=horizon`.
pub fn parameter_msd(
    scenario: &Scenario,
    agent: usize,
    reference: &[f64],
    runs: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let dim = scenario.feature_dims[agent] + 1;
    let h = scenario.hypothesis_count();
    let cfg = scenario.sgd_config(agent)?;
    let mut msd = vec![0.0; scenario.horizon as usize];
    let mut raw = Vec::new();
    let mut ext = Vec::new();
    let mut scratch = Scratch::new(h);
    for r in 0..runs {
        let mut src = SyntheticSource::new(
            run_seed(master_seed, r),
            &scenario.components,
            &scenario.priors,
            &scenario.feature_dims,
            &scenario.arrivals,
            &scenario.schedule,
        );
        let mut p = AgentParams::zeros(dim, h);
        for t in 1..=scenario.horizon {
            if let Some(l) = src.training(agent, t, &mut raw) {
                extend_features(&raw, &mut ext);
                sgd_step_w_with(&mut p, Some((&ext, l)), &cfg, &mut scratch);
            }
            let d: Vec<f64> = p.w.iter().zip(reference).map(|(a, b)| a - b).collect();
            msd[t as usize - 1] += norm_sq(&d) / runs as f64;
        }
    }
    Ok(msd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::vi_a;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert_abs_diff_eq!(lo, 0.4038, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.5962, epsilon = 1e-4);
    }

    #[test]
    fn steady_window_is_last_fifth() {
        assert_eq!(steady_window(3000, 0.2), (2401, 3000));
        assert_eq!(steady_window(3, 0.2), (3, 3));
    }

    #[test]
    fn single_run_settles_on_truth() {
        let mut s = vi_a().with_triplet(0.0055, 0.0275, 0.0275);
        s.horizon = 8000;
        let rec = run_once(&s, 5, s.initial_agent_params().unwrap(), RunOptions { belief_stride: 100 }).unwrap();
        assert_eq!(rec.beliefs.len(), 80);
        let late: Vec<usize> = (0..s.agents())
            .map(|k| (6001..=8000).filter(|&t| rec.is_error(t, k)).count())
            .collect();
        assert!(late.iter().all(|&e| e < 400), "{late:?}");
    }

    #[test]
    fn runs_are_reproducible_and_seed_dependent() {
        let mut s = vi_a();
        s.horizon = 200;
        let p = s.initial_agent_params().unwrap();
        let a = run_once(&s, 1, p.clone(), RunOptions { belief_stride: 1 }).unwrap();
        let b = run_once(&s, 1, p.clone(), RunOptions { belief_stride: 1 }).unwrap();
        let c = run_once(&s, 2, p, RunOptions { belief_stride: 1 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.beliefs, c.beliefs);
    }

    #[test]
    fn tally_merge_is_order_independent() {
        let mut s = vi_a();
        s.horizon = 100;
        let p = s.initial_agent_params().unwrap();
        let recs: Vec<RunRecord> = (0..4)
            .map(|r| run_once(&s, run_seed(3, r), p.clone(), RunOptions::default()).unwrap())
            .collect();
        let w = steady_window(100, 0.2);
        let mut all = ErrorTally::new(10, 100, w);
        for (i, r) in recs.iter().enumerate() {
            all.add(i, r);
        }
        let mut left = ErrorTally::new(10, 100, w);
        let mut right = ErrorTally::new(10, 100, w);
        left.add(2, &recs[2]);
        left.add(3, &recs[3]);
        right.add(0, &recs[0]);
        right.add(1, &recs[1]);
        assert_eq!(all.finish(), left.merge(right).finish());
    }
}
