//! JSON views of the analysis results and load-time warnings.

use a2sl_core::analysis::{AgentStability, BoundConstants};
use a2sl_core::graph::PerronData;
use a2sl_core::scenario::{Scenario, ScenarioAnalysis};
use a2sl_core::training::CostConstants;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct PerronView {
    pub vector: Vec<f64>,
    pub second_eigenvalue_magnitude: f64,
    pub zeta: f64,
    pub kappa: f64,
    pub i_max: usize,
}

impl From<&PerronData> for PerronView {
    fn from(p: &PerronData) -> Self {
        Self {
            vector: p.vector.clone(),
            second_eigenvalue_magnitude: p.second_eigenvalue_magnitude,
            zeta: p.zeta,
            kappa: p.kappa,
            i_max: p.i_max,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ConstantsView {
    pub nu: f64,
    pub xi: f64,
    pub nu_tilde: f64,
    pub xi_tilde: f64,
    pub sigma2: f64,
    pub sigma2_tilde: f64,
}

impl From<&CostConstants> for ConstantsView {
    fn from(c: &CostConstants) -> Self {
        Self {
            nu: c.nu,
            xi: c.xi,
            nu_tilde: c.nu_tilde,
            xi_tilde: c.xi_tilde,
            sigma2: c.sigma2,
            sigma2_tilde: c.sigma2_tilde,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StabilityView {
    pub agent: usize,
    pub delta_bound: f64,
    pub delta_ok: bool,
    pub eta_root: Option<f64>,
    pub eta_limit: Option<f64>,
    pub eta_ok: bool,
    pub eta_tilde_root: Option<f64>,
    pub eta_tilde_limit: Option<f64>,
    pub eta_tilde_ok: bool,
}

impl StabilityView {
    fn new(agent: usize, a: &AgentStability) -> Self {
        Self {
            agent,
            delta_bound: a.delta_bound,
            delta_ok: a.delta_ok,
            eta_root: a.eta_root,
            eta_limit: a.eta_limit,
            eta_ok: a.eta_ok,
            eta_tilde_root: a.eta_tilde_root,
            eta_tilde_limit: a.eta_tilde_limit,
            eta_tilde_ok: a.eta_tilde_ok,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundView {
    pub c: [f64; 6],
    pub phi: f64,
    pub phi_tilde: f64,
    pub steady_state: f64,
    pub per_agent_rate: Vec<f64>,
    pub per_agent_rate_tilde: Vec<f64>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum BoundStatus {
    Available(BoundView),
    Unavailable { error: &'static str, message: String },
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub truth: usize,
    pub delta: f64,
    pub eta: f64,
    pub eta_tilde: f64,
    pub perron: PerronView,
    /// Network separation per hypothesis (zero at the truth).
    pub beta_net: Vec<f64>,
    pub globally_identifiable: bool,
    /// `local_terms[k][θ]`.
    pub local_terms: Vec<Vec<f64>>,
    pub locally_confused_agents: Vec<usize>,
    pub constants: Vec<ConstantsView>,
    pub stability_passed: bool,
    pub stability: Vec<StabilityView>,
    pub bound: BoundStatus,
}

impl AnalysisReport {
    pub fn new(s: &Scenario, a: &ScenarioAnalysis) -> Self {
        let id = &a.identifiability;
        let bound = match &a.bound {
            Ok(b) => BoundStatus::Available(bound_view(b, s)),
            Err(e) => BoundStatus::Unavailable {
                error: e.kind(),
                message: e.to_string(),
            },
        };
        Self {
            scenario: s.name.clone(),
            truth: id.truth,
            delta: s.adaptation.delta,
            eta: s.adaptation.eta,
            eta_tilde: s.adaptation.eta_tilde,
            perron: (&a.perron).into(),
            beta_net: id.beta_net.clone(),
            globally_identifiable: id.globally_identifiable(),
            local_terms: id.local.clone(),
            locally_confused_agents: id.locally_confused_agents(),
            constants: a.constants.iter().map(Into::into).collect(),
            stability_passed: a.stability.passed(),
            stability: a
                .stability
                .agents
                .iter()
                .enumerate()
                .map(|(k, st)| StabilityView::new(k, st))
                .collect(),
            bound,
        }
    }
}

fn bound_view(b: &BoundConstants, s: &Scenario) -> BoundView {
    let a = s.adaptation;
    BoundView {
        c: b.c,
        phi: b.rates.phi,
        phi_tilde: b.rates.phi_tilde,
        steady_state: b.steady_state(a.delta, a.eta, a.eta_tilde),
        per_agent_rate: b.rates.per_agent.clone(),
        per_agent_rate_tilde: b.rates.per_agent_tilde.clone(),
    }
}

fn agent_list(agents: &[usize]) -> String {
    agents.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

/// Human-readable admissibility warnings; an empty list means every agent
/// satisfies the step-size conditions.
pub fn stability_warnings(s: &Scenario, a: &ScenarioAnalysis) -> Vec<String> {
    let st = &a.stability.agents;
    let pick = |f: &dyn Fn(&AgentStability) -> bool| -> Vec<usize> {
        st.iter().enumerate().filter(|(_, x)| f(x)).map(|(k, _)| k).collect()
    };
    let mut out = Vec::new();
    let delta_bad = pick(&|x| !x.delta_ok);
    if !delta_bad.is_empty() {
        let bound = st.iter().map(|x| x.delta_bound).fold(f64::INFINITY, f64::min);
        out.push(format!(
            "delta = {} exceeds the admissible bound (smallest {bound:e}) for agents {}",
            s.adaptation.delta,
            agent_list(&delta_bad)
        ));
    }
    let no_root = pick(&|x| x.eta_root.is_none() || x.eta_tilde_root.is_none());
    if !no_root.is_empty() {
        out.push(format!(
            "step-size root equations have no real solution for agents {}",
            agent_list(&no_root)
        ));
    }
    let eta_bad = pick(&|x| x.eta_root.is_some() && !x.eta_ok);
    if !eta_bad.is_empty() {
        out.push(format!("eta above the admissible limit for agents {}", agent_list(&eta_bad)));
    }
    let eta_t_bad = pick(&|x| x.eta_tilde_root.is_some() && !x.eta_tilde_ok);
    if !eta_t_bad.is_empty() {
        out.push(format!("eta_tilde above the admissible limit for agents {}", agent_list(&eta_t_bad)));
    }
    out
}
