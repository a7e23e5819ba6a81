//! A complete, validated experiment description and the built-in setups.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::{
    beta_net, bound_constants, optimal_gaussian, stability_report, BoundConstants, BoundInputs,
    Identifiability, OptimalParams, OracleConfig, StabilityReport, StepSizes,
};
use crate::datagen::{
    ArrivalConfig, DriftEvent, DriftKind, DriftSchedule, FeatureMoments, GaussianComponent,
    GenerativeTable, HypothesisSet, PdfNormalization,
};
use crate::error::{Error, Result};
use crate::graph::{CombinationMatrix, PerronData};
use crate::rng::{stream, Purpose};
use crate::social::BeliefState;
use crate::training::{estimate_constants, AgentParams, CostConstants, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptation {
    pub delta: f64,
    pub eta: f64,
    pub eta_tilde: f64,
    pub rho: f64,
    pub rho_tilde: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialBeliefs {
    Uniform,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialParams {
    Zero,
    /// Start every agent at the minimizers of its initial training distribution.
    Optimal,
    Explicit(Vec<AgentParams>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub hypotheses: HypothesisSet,
    pub components: Vec<GaussianComponent>,
    pub pdf_normalization: PdfNormalization,
    /// Raw feature dimension per agent.
    pub feature_dims: Vec<usize>,
    pub priors: Vec<Vec<f64>>,
    pub arrivals: Vec<ArrivalConfig>,
    /// Per-agent step-size overrides.
    pub step_overrides: Vec<Option<StepSizes>>,
    pub schedule: DriftSchedule,
    pub combination: CombinationMatrix,
    pub adaptation: Adaptation,
    pub initial_beliefs: InitialBeliefs,
    pub initial_params: InitialParams,
    pub horizon: u64,
    pub runs: usize,
    pub seed: u64,
    /// Fraction of the horizon, counted from the end, used for steady-state averages.
    pub steady_fraction: f64,
}

fn invalid(path: impl Into<String>, message: impl AsRef<str>) -> Error {
    Error::Invalid(format!("{}: {}", path.into(), message.as_ref()))
}

impl Scenario {
    pub fn agents(&self) -> usize {
        self.feature_dims.len()
    }

    pub fn hypothesis_count(&self) -> usize {
        self.hypotheses.count()
    }

    pub fn steps(&self, agent: usize) -> StepSizes {
        self.step_overrides[agent].unwrap_or(StepSizes {
            eta: self.adaptation.eta,
            eta_tilde: self.adaptation.eta_tilde,
        })
    }

    pub fn sgd_config(&self, agent: usize) -> Result<SgdConfig> {
        let s = self.steps(agent);
        SgdConfig::new(s.eta, s.eta_tilde, self.adaptation.rho, self.adaptation.rho_tilde)
    }

    pub fn all_steps(&self) -> Vec<StepSizes> {
        (0..self.agents()).map(|k| self.steps(k)).collect()
    }

    pub fn q_tr(&self) -> Vec<f64> {
        self.arrivals.iter().map(|a| a.q_tr).collect()
    }

    pub fn q_pr(&self) -> Vec<f64> {
        self.arrivals.iter().map(|a| a.q_pr).collect()
    }

    /// Copy with the shared `(δ, η, η̃)` replaced and per-agent overrides dropped.
    pub fn with_triplet(&self, delta: f64, eta: f64, eta_tilde: f64) -> Self {
        let mut s = self.clone();
        s.adaptation.delta = delta;
        s.adaptation.eta = eta;
        s.adaptation.eta_tilde = eta_tilde;
        s.step_overrides = vec![None; self.agents()];
        s
    }

    pub fn initial_belief_state(&self) -> Result<BeliefState> {
        match &self.initial_beliefs {
            InitialBeliefs::Uniform => Ok(BeliefState::uniform(self.agents(), self.hypothesis_count())),
            InitialBeliefs::Explicit(rows) => BeliefState::from_probabilities(rows),
        }
    }

    /// Exact minimizers for every agent under the training distribution in
    /// force at time `t`, with difference tables taken against the truth at `t`.
    pub fn optimal_params_at(&self, t: u64, cfg: &OracleConfig) -> Result<Vec<OptimalParams>> {
        let state = self.schedule.state_at(t);
        (0..self.agents())
            .map(|k| {
                optimal_gaussian(
                    &self.components,
                    state.table.row(k),
                    &self.priors[k],
                    self.feature_dims[k],
                    self.adaptation.rho,
                    self.adaptation.rho_tilde,
                    state.truth,
                    cfg,
                )
            })
            .collect()
    }

    /// Closed-form moments of each agent's prediction features at time `t`.
    pub fn prediction_moments_at(&self, t: u64) -> Vec<FeatureMoments> {
        let state = self.schedule.state_at(t);
        (0..self.agents())
            .map(|k| {
                let c = &self.components[state.table.component(k, state.truth)];
                FeatureMoments::of_component(c, self.feature_dims[k])
            })
            .collect()
    }

    /// Closed-form moments of each agent's training mixture at time `t`.
    pub fn training_moments_at(&self, t: u64) -> Vec<FeatureMoments> {
        let state = self.schedule.state_at(t);
        (0..self.agents())
            .map(|k| {
                FeatureMoments::of_mixture(
                    &self.components,
                    state.table.row(k),
                    &self.priors[k],
                    self.feature_dims[k],
                )
            })
            .collect()
    }

    pub fn initial_agent_params(&self) -> Result<Vec<AgentParams>> {
        let h = self.hypothesis_count();
        match &self.initial_params {
            InitialParams::Zero => Ok(self
                .feature_dims
                .iter()
                .map(|m| AgentParams::zeros(m + 1, h))
                .collect()),
            InitialParams::Optimal => Ok(self
                .optimal_params_at(0, &OracleConfig::default())?
                .into_iter()
                .map(|o| o.params)
                .collect()),
            InitialParams::Explicit(p) => Ok(p.clone()),
        }
    }

    /// `n` extended training samples of agent `k` drawn from the initial
    /// training distribution on a stream reserved for analysis.
    pub fn training_samples(&self, agent: usize, n: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
        let mut rng = stream(seed, agent, Purpose::TrainSample);
        let table = self.schedule.initial_table();
        (0..n)
            .map(|_| {
                let label = crate::datagen::draw_label(&self.priors[agent], &mut rng);
                let c = &self.components[table.component(agent, label)];
                let mut x: Vec<f64> = (0..self.feature_dims[agent]).map(|_| c.sample(&mut rng)).collect();
                x.push(1.0);
                (x, label)
            })
            .collect()
    }

    /// Oracle, identifiability, admissibility and bound constants at `t = 0`.
    pub fn analyze(&self, cfg: &AnalysisConfig) -> Result<ScenarioAnalysis> {
        let perron = self.combination.perron(cfg.perron_tolerance)?;
        let optimal = self.optimal_params_at(0, &cfg.oracle)?;
        let prediction = self.prediction_moments_at(0);
        let means: Vec<Vec<f64>> = prediction.iter().map(|m| m.mean.clone()).collect();
        let identifiability = beta_net(&optimal, &perron.vector, &self.q_pr(), &means)?;
        let constants = (0..self.agents())
            .map(|k| {
                let samples = self.training_samples(k, cfg.constant_samples, cfg.seed);
                estimate_constants(&samples, &optimal[k].params, self.adaptation.rho, self.adaptation.rho_tilde)
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = self.all_steps();
        let stability = stability_report(self.adaptation.delta, &steps, &constants, &self.q_tr());
        let beliefs = self.initial_belief_state()?;
        let params = self.initial_agent_params()?;
        let bound = bound_constants(&BoundInputs {
            delta: self.adaptation.delta,
            steps: &steps,
            q_tr: &self.q_tr(),
            q_pr: &self.q_pr(),
            constants: &constants,
            optimal: &optimal,
            prediction: &prediction,
            perron: &perron,
            initial_beliefs: &beliefs,
            initial_params: &params,
        });
        Ok(ScenarioAnalysis {
            perron,
            optimal,
            identifiability,
            constants,
            stability,
            bound,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.agents();
        let h = self.hypothesis_count();
        if k == 0 {
            return Err(invalid("agents", "at least one agent is required"));
        }
        for (name, len) in [
            ("priors", self.priors.len()),
            ("arrivals", self.arrivals.len()),
            ("step_overrides", self.step_overrides.len()),
        ] {
            if len != k {
                return Err(invalid(name, format!("expected {k} entries, found {len}")));
            }
        }
        if self.combination.agents() != k {
            return Err(invalid(
                "graph",
                format!("matrix is {0}x{0} but there are {k} agents", self.combination.agents()),
            ));
        }
        if !self.combination.is_primitive() {
            return Err(Error::NonPrimitive);
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.std > 0.0 && c.std.is_finite() && c.mean.is_finite()) {
                return Err(invalid(format!("components[{i}]"), "std must be positive and finite"));
            }
        }
        for (j, m) in self.feature_dims.iter().enumerate() {
            if *m == 0 {
                return Err(invalid(format!("agents[{j}].features"), "feature dimension must be at least 1"));
            }
        }
        for (j, p) in self.priors.iter().enumerate() {
            if p.len() != h {
                return Err(invalid(format!("agents[{j}].priors"), format!("expected {h} entries, found {}", p.len())));
            }
            if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("agents[{j}].priors"), "must be nonnegative and sum to 1"));
            }
        }
        self.validate_table(self.schedule.initial_table(), "agents[].table")?;
        if self.schedule.initial_truth() >= h {
            return Err(invalid("truth", format!("hypothesis index {} out of range", self.schedule.initial_truth())));
        }
        for (i, e) in self.schedule.events().iter().enumerate() {
            match &e.kind {
                DriftKind::Hypothesis(t) if *t >= h => {
                    return Err(invalid(format!("drifts[{i}].hypothesis"), "unknown hypothesis"));
                }
                DriftKind::Model(table) => self.validate_table(table, &format!("drifts[{i}].table"))?,
                _ => {}
            }
        }
        let a = self.adaptation;
        if !(a.delta > 0.0 && a.delta < 1.0) {
            return Err(invalid("adaptation.delta", "must lie in (0, 1)"));
        }
        for k in 0..k {
            self.sgd_config(k)
                .map_err(|e| invalid(format!("agents[{k}].steps"), e.to_string()))?;
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("monte_carlo.runs", "must be at least 1"));
        }
        if !(self.steady_fraction > 0.0 && self.steady_fraction <= 1.0) {
            return Err(invalid("monte_carlo.steady_fraction", "must lie in (0, 1]"));
        }
        if let InitialBeliefs::Explicit(rows) = &self.initial_beliefs {
            if rows.len() != k || rows.iter().any(|r| r.len() != h) {
                return Err(invalid("initial.beliefs", format!("expected {k} rows of {h} probabilities")));
            }
            BeliefState::from_probabilities(rows).map_err(|e| invalid("initial.beliefs", e.to_string()))?;
        }
        if let InitialParams::Explicit(p) = &self.initial_params {
            if p.len() != k {
                return Err(invalid("initial.params", format!("expected {k} agents, found {}", p.len())));
            }
            for (j, ap) in p.iter().enumerate() {
                if ap.dim() != self.feature_dims[j] + 1 || ap.hypotheses() != h {
                    return Err(invalid(format!("initial.params[{j}]"), "shape does not match the agent"));
                }
            }
        }
        Ok(())
    }

    fn validate_table(&self, table: &GenerativeTable, path: &str) -> Result<()> {
        let (k, h) = (self.agents(), self.hypothesis_count());
        if table.agents() != k {
            return Err(invalid(path, format!("expected {k} rows, found {}", table.agents())));
        }
        for j in 0..k {
            let row = table.row(j);
            if row.len() != h {
                return Err(invalid(format!("{path}[{j}]"), format!("expected {h} entries, found {}", row.len())));
            }
            if let Some(c) = row.iter().find(|c| **c >= self.components.len()) {
                return Err(invalid(format!("{path}[{j}]"), format!("component {c} is not defined")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub oracle: OracleConfig,
    pub perron_tolerance: f64,
    /// Training samples per agent used to estimate the cost constants.
    pub constant_samples: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            oracle: OracleConfig::default(),
            perron_tolerance: 1e-12,
            constant_samples: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAnalysis {
    pub perron: PerronData,
    pub optimal: Vec<OptimalParams>,
    pub identifiability: Identifiability,
    pub constants: Vec<CostConstants>,
    pub stability: StabilityReport,
    /// The bound is unavailable when its preconditions fail (non-contractive
    /// rates or a non-identifiable network); the error says which.
    pub bound: Result<BoundConstants>,
}

/// Ten-node ring with two chords; every node also listens to itself.
pub fn ten_node_adjacency() -> Vec<Vec<bool>> {
    const EDGES: [(usize, usize); 17] = [
        (1, 2), (1, 3), (1, 10), (2, 3), (2, 4), (3, 5), (4, 5), (4, 6), (5, 7),
        (6, 7), (6, 8), (7, 9), (8, 9), (8, 10), (9, 10), (2, 5), (6, 9),
    ];
    let mut adj = vec![vec![false; 10]; 10];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in EDGES {
        adj[a - 1][b - 1] = true;
        adj[b - 1][a - 1] = true;
    }
    adj
}

/// Generative assignment with local confusion: rows for agents 1, 2–3, 4–6, 7–10.
pub fn confusion_table() -> GenerativeTable {
    let mut rows = vec![vec![0, 1, 2]];
    rows.extend(core::iter::repeat_n(vec![0, 1, 1], 2));
    rows.extend(core::iter::repeat_n(vec![0, 0, 2], 3));
    rows.extend(core::iter::repeat_n(vec![1, 1, 2], 4));
    GenerativeTable::new(rows).expect("rows have equal length")
}

fn ten_agent_base(name: &str, table: GenerativeTable, truth: usize, events: Vec<DriftEvent>) -> Result<Scenario> {
    let k = 10;
    Ok(Scenario {
        name: name.to_string(),
        hypotheses: HypothesisSet::numbered(3)?,
        components: (1..=3).map(GaussianComponent::numbered).collect(),
        pdf_normalization: PdfNormalization::Proper,
        feature_dims: vec![4; k],
        priors: vec![vec![0.3, 0.4, 0.3]; k],
        arrivals: vec![ArrivalConfig::new(0.7, 0.8)?; k],
        step_overrides: vec![None; k],
        schedule: DriftSchedule::new(truth, table, events)?,
        combination: CombinationMatrix::uniform_averaging(&ten_node_adjacency())?,
        adaptation: Adaptation {
            delta: 0.01,
            eta: 0.05,
            eta_tilde: 0.05,
            rho: 0.05,
            rho_tilde: 0.05,
        },
        initial_beliefs: InitialBeliefs::Uniform,
        initial_params: InitialParams::Zero,
        horizon: 3000,
        runs: 100,
        seed: 1,
        steady_fraction: 0.2,
    })
}

/// The synthetic ten-agent setup with a locally confused generative table.
pub fn vi_a() -> Scenario {
    ten_agent_base("vi-a", confusion_table(), 0, Vec::new()).expect("built-in scenario is valid")
}

/// Hypothesis drift at t = 1000 and a model drift at t = 2000 on an
/// identifiable table, starting from the converged parameters.
pub fn drift_tracking() -> Scenario {
    let table = GenerativeTable::new(vec![vec![0, 1, 2]; 10]).expect("rows have equal length");
    let swapped = table.swap_hypotheses(0, 2);
    let events = vec![
        DriftEvent { time: 1000, kind: DriftKind::Hypothesis(0) },
        DriftEvent { time: 2000, kind: DriftKind::Model(swapped) },
    ];
    let mut s = ten_agent_base("drift", table, 2, events).expect("built-in scenario is valid");
    s.adaptation.delta = 0.005;
    s.initial_params = InitialParams::Optimal;
    for a in &mut s.arrivals {
        a.q_tr = 0.25;
    }
    s
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "vi-a" => Some(vi_a()),
        "drift" => Some(drift_tracking()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 2] = ["vi-a", "drift"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.agents(), 10);
            assert_eq!(s.hypothesis_count(), 3);
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn ten_node_graph_is_primitive_with_degree_centrality() {
        let s = vi_a();
        assert!(s.combination.is_primitive());
        let p = s.combination.perron(1e-12).unwrap();
        let deg = [4.0, 5.0, 4.0, 4.0, 5.0, 5.0, 4.0, 4.0, 5.0, 4.0];
        for (v, d) in p.vector.iter().zip(deg) {
            assert!((v - d / 44.0).abs() < 1e-10);
        }
    }

    #[test]
    fn validation_reports_paths() {
        let mut s = vi_a();
        s.priors[3] = vec![0.5, 0.5];
        let e = s.validate().unwrap_err();
        assert!(e.to_string().starts_with("agents[3].priors"), "{e}");

        let mut s = vi_a();
        s.schedule = DriftSchedule::stationary(0, GenerativeTable::new(vec![vec![0, 1, 7]; 10]).unwrap());
        assert!(s.validate().unwrap_err().to_string().contains("component 7"));

        let mut s = vi_a();
        s.adaptation.delta = 1.5;
        assert!(s.validate().unwrap_err().to_string().starts_with("adaptation.delta"));
    }

    #[test]
    fn triplet_override_drops_agent_overrides() {
        let mut s = vi_a();
        s.step_overrides[0] = Some(StepSizes { eta: 0.3, eta_tilde: 0.3 });
        assert_eq!(s.steps(0).eta, 0.3);
        let t = s.with_triplet(0.001, 0.005, 0.006);
        assert_eq!(t.steps(0).eta, 0.005);
        assert_eq!(t.steps(5).eta_tilde, 0.006);
        assert_eq!(t.adaptation.delta, 0.001);
    }

    #[test]
    fn vi_a_analysis_is_globally_but_not_locally_identifiable() {
        let a = vi_a().analyze(&AnalysisConfig::default()).unwrap();
        let id = &a.identifiability;
        assert!(id.globally_identifiable());
        assert!(id.beta_net[1] > 0.0 && id.beta_net[2] > 0.0);
        assert_eq!(id.locally_confused_agents(), (3..10).collect::<Vec<_>>());
        assert!(a.constants.iter().all(|c| c.xi > c.nu));
    }
}
