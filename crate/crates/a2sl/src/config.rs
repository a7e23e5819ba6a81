//! JSON scenario files, built-ins and `key=value` overrides.
//!
//! A scenario file is parsed into a [`serde_json::Value`], overrides are
//! applied to that value, and only then is it deserialized and converted to
//! a validated [`Scenario`]. Errors carry the dotted path of the offending
//! field.

use std::path::{Path, PathBuf};

use a2sl_core::analysis::StepSizes;
use a2sl_core::datagen::{
    ArrivalConfig, DriftEvent, DriftKind, DriftSchedule, GaussianComponent, GenerativeTable,
    HypothesisSet, PdfNormalization,
};
use a2sl_core::graph::CombinationMatrix;
use a2sl_core::scenario::{Adaptation, InitialBeliefs, InitialParams, Scenario};
use a2sl_core::training::AgentParams;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::io::read_params_csv;

pub const SCHEMA_VERSION: u32 = 1;

const BUILTINS: [(&str, &str); 2] = [
    ("vi-a", include_str!("../scenarios/vi-a.json")),
    ("drift", include_str!("../scenarios/drift.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    /// Hypothesis labels; the last one is the pivot class.
    pub hypotheses: Vec<String>,
    /// Index of the initial true hypothesis.
    pub truth: usize,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub pdf_normalization: Normalization,
    pub agents: Vec<AgentSpec>,
    pub graph: GraphSpec,
    pub adaptation: AdaptationSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub drifts: Vec<DriftSpec>,
    pub horizon: u64,
    pub monte_carlo: MonteCarloSpec,
    /// Feature CSV replacing synthetic sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Proper,
    AgentScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Raw feature dimension.
    pub features: usize,
    /// Component index per hypothesis.
    pub table: Vec<usize>,
    pub priors: Vec<f64>,
    pub q_tr: f64,
    pub q_pr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_tilde: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// `adjacency[j][k] = 1` when agent `k` listens to agent `j`; weights
    /// are `1 / |N_k|`.
    Uniform { adjacency: Vec<Vec<u8>> },
    /// Left-stochastic combination matrix, row-major.
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSpec {
    pub delta: f64,
    pub eta: f64,
    pub eta_tilde: f64,
    pub rho: f64,
    pub rho_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub beliefs: BeliefsSpec,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum UniformBeliefs {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum BeliefsSpec {
    Uniform(UniformBeliefs),
    Explicit(Vec<Vec<f64>>),
}

impl Default for BeliefsSpec {
    fn default() -> Self {
        BeliefsSpec::Uniform(UniformBeliefs::Uniform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NamedParams {
    Zero,
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ParamBlock {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum ParamsSpec {
    Named(NamedParams),
    /// Snapshot written by `simulate` or `analyze` (`agent,block,index,value`).
    Csv { csv: PathBuf },
    Explicit { explicit: Vec<ParamBlock> },
}

impl Default for ParamsSpec {
    fn default() -> Self {
        ParamsSpec::Named(NamedParams::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum DriftSpec {
    Hypothesis { time: u64, hypothesis: usize },
    Model { time: u64, table: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_steady_fraction")]
    pub steady_fraction: f64,
    /// Belief snapshot stride for exported trajectories.
    #[serde(default = "default_belief_stride")]
    pub belief_stride: u64,
}

fn default_steady_fraction() -> f64 {
    0.2
}

fn default_belief_stride() -> u64 {
    10
}

/// A validated scenario together with the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// The effective file after overrides; hashing it identifies the run.
    pub file: ScenarioFile,
    pub belief_stride: u64,
    /// Resolved feature CSV path, if any.
    pub features: Option<PathBuf>,
}

/// JSON schema of the scenario file format.
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ScenarioFile)).expect("schemas serialize")
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Load `spec` (a path or a built-in name), apply overrides, validate.
pub fn load(spec: &str, overrides: &[String]) -> Result<LoadedScenario> {
    let path = Path::new(spec);
    let (text, base) = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        (text, path.parent().map(Path::to_path_buf))
    } else if let Some(src) = builtin_source(spec) {
        (src.to_string(), None)
    } else {
        return Err(CliError::UnknownScenario(spec.to_string()));
    };
    let mut value: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: PathBuf::from(spec),
        source,
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let file = parse_value(value)?;
    let scenario = file.to_scenario(base.as_deref())?;
    let features = file.features.as_ref().map(|p| resolve(base.as_deref(), p));
    Ok(LoadedScenario {
        belief_stride: file.monte_carlo.belief_stride,
        scenario,
        file,
        features,
    })
}

/// Deserialize with the path of the failing field in the error.
pub fn parse_value(value: Value) -> Result<ScenarioFile> {
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(if path == "." { "scenario".into() } else { path }, e.into_inner().to_string())
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::schema(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", file.schema_version),
        ));
    }
    Ok(file)
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// Set the value at a dotted path. Numeric segments index arrays and `*`
/// applies the rest of the path to every element.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let bad = |reason: &str| CliError::Override {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (key, raw) = spec.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    if key.is_empty() {
        return Err(bad("empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    set_path(root, &segments, &value).map_err(|r| bad(&r))
}

fn set_path(node: &mut Value, segments: &[&str], value: &Value) -> std::result::Result<(), String> {
    let Some((head, rest)) = segments.split_first() else {
        *node = value.clone();
        return Ok(());
    };
    match node {
        Value::Array(items) if *head == "*" => {
            for item in items.iter_mut() {
                set_path(item, rest, value)?;
            }
            Ok(())
        }
        Value::Array(items) => {
            let i: usize = head.parse().map_err(|_| format!("{head:?} is not an array index"))?;
            let len = items.len();
            let item = items.get_mut(i).ok_or_else(|| format!("index {i} out of range (length {len})"))?;
            set_path(item, rest, value)
        }
        Value::Object(map) => {
            let child = map.entry(head.to_string()).or_insert(if rest.is_empty() {
                Value::Null
            } else {
                Value::Object(Default::default())
            });
            set_path(child, rest, value)
        }
        _ => Err(format!("cannot descend into {head:?}")),
    }
}

impl ScenarioFile {
    /// Convert and validate. `base` resolves relative file references.
    pub fn to_scenario(&self, base: Option<&Path>) -> Result<Scenario> {
        let k = self.agents.len();
        let h = self.hypotheses.len();
        if k == 0 {
            return Err(CliError::schema("agents", "at least one agent is required"));
        }
        let hypotheses = HypothesisSet::new(self.hypotheses.clone()).map_err(CliError::field("hypotheses"))?;
        let components = self
            .components
            .iter()
            .map(|c| GaussianComponent { mean: c.mean, std: c.std })
            .collect();

        let mut arrivals = Vec::with_capacity(k);
        let mut overrides = Vec::with_capacity(k);
        let mut rows = Vec::with_capacity(k);
        for (j, a) in self.agents.iter().enumerate() {
            if a.table.len() != h {
                return Err(CliError::schema(
                    format!("agents[{j}].table"),
                    format!("expected {h} entries, found {}", a.table.len()),
                ));
            }
            rows.push(a.table.clone());
            arrivals.push(ArrivalConfig::new(a.q_tr, a.q_pr).map_err(CliError::field(format!("agents[{j}]")))?);
            overrides.push(match (a.eta, a.eta_tilde) {
                (None, None) => None,
                (eta, eta_tilde) => Some(StepSizes {
                    eta: eta.unwrap_or(self.adaptation.eta),
                    eta_tilde: eta_tilde.unwrap_or(self.adaptation.eta_tilde),
                }),
            });
        }
        let table = GenerativeTable::new(rows).map_err(CliError::field("agents[].table"))?;

        let mut events = Vec::with_capacity(self.drifts.len());
        for (i, d) in self.drifts.iter().enumerate() {
            events.push(match d {
                DriftSpec::Hypothesis { time, hypothesis } => DriftEvent {
                    time: *time,
                    kind: DriftKind::Hypothesis(*hypothesis),
                },
                DriftSpec::Model { time, table } => {
                    if table.len() != k || table.iter().any(|r| r.len() != h) {
                        return Err(CliError::schema(
                            format!("drifts[{i}].table"),
                            format!("expected {k} rows of {h} component indices"),
                        ));
                    }
                    DriftEvent {
                        time: *time,
                        kind: DriftKind::Model(
                            GenerativeTable::new(table.clone()).map_err(CliError::field(format!("drifts[{i}].table")))?,
                        ),
                    }
                }
            });
        }
        let schedule = DriftSchedule::new(self.truth, table, events).map_err(CliError::field("drifts"))?;

        let combination = match &self.graph {
            GraphSpec::Uniform { adjacency } => {
                let adj: Vec<Vec<bool>> = adjacency.iter().map(|r| r.iter().map(|v| *v != 0).collect()).collect();
                CombinationMatrix::uniform_averaging(&adj).map_err(CliError::field("graph.adjacency"))?
            }
            GraphSpec::Explicit { matrix } => {
                CombinationMatrix::from_rows(matrix).map_err(CliError::field("graph.matrix"))?
            }
        };

        let initial_beliefs = match &self.initial.beliefs {
            BeliefsSpec::Uniform(_) => InitialBeliefs::Uniform,
            BeliefsSpec::Explicit(rows) => InitialBeliefs::Explicit(rows.clone()),
        };
        let dims: Vec<usize> = self.agents.iter().map(|a| a.features).collect();
        let initial_params = match &self.initial.params {
            ParamsSpec::Named(NamedParams::Zero) => InitialParams::Zero,
            ParamsSpec::Named(NamedParams::Optimal) => InitialParams::Optimal,
            ParamsSpec::Csv { csv } => InitialParams::Explicit(read_params_csv(&resolve(base, csv), &dims, h)?),
            ParamsSpec::Explicit { explicit } => {
                if explicit.len() != k {
                    return Err(CliError::schema(
                        "initial.params.explicit",
                        format!("expected {k} agents, found {}", explicit.len()),
                    ));
                }
                explicit
                    .iter()
                    .enumerate()
                    .map(|(j, b)| {
                        AgentParams::from_parts(b.w.clone(), b.u.clone(), dims[j] + 1, h)
                            .map_err(CliError::field(format!("initial.params.explicit[{j}]")))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(InitialParams::Explicit)?
            }
        };

        let a = &self.adaptation;
        let scenario = Scenario {
            name: self.name.clone(),
            hypotheses,
            components,
            pdf_normalization: match self.pdf_normalization {
                Normalization::Proper => PdfNormalization::Proper,
                Normalization::AgentScaled => PdfNormalization::AgentScaled,
            },
            feature_dims: dims,
            priors: self.agents.iter().map(|a| a.priors.clone()).collect(),
            arrivals,
            step_overrides: overrides,
            schedule,
            combination,
            adaptation: Adaptation {
                delta: a.delta,
                eta: a.eta,
                eta_tilde: a.eta_tilde,
                rho: a.rho,
                rho_tilde: a.rho_tilde,
            },
            initial_beliefs,
            initial_params,
            horizon: self.horizon,
            runs: self.monte_carlo.runs,
            seed: self.monte_carlo.seed,
            steady_fraction: self.monte_carlo.steady_fraction,
        };
        scenario.validate().map_err(CliError::Invalid)?;
        Ok(scenario)
    }

    /// Lossless description of `s`; the graph is written as an explicit matrix.
    pub fn from_scenario(s: &Scenario, belief_stride: u64) -> Self {
        let table = s.schedule.initial_table();
        let agents = (0..s.agents())
            .map(|k| AgentSpec {
                features: s.feature_dims[k],
                table: table.row(k).to_vec(),
                priors: s.priors[k].clone(),
                q_tr: s.arrivals[k].q_tr,
                q_pr: s.arrivals[k].q_pr,
                eta: s.step_overrides[k].map(|o| o.eta),
                eta_tilde: s.step_overrides[k].map(|o| o.eta_tilde),
            })
            .collect();
        let drifts = s
            .schedule
            .events()
            .iter()
            .map(|e| match &e.kind {
                DriftKind::Hypothesis(h) => DriftSpec::Hypothesis {
                    time: e.time,
                    hypothesis: *h,
                },
                DriftKind::Model(t) => DriftSpec::Model {
                    time: e.time,
                    table: t.rows().to_vec(),
                },
            })
            .collect();
        let a = s.adaptation;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: s.name.clone(),
            hypotheses: s.hypotheses.labels().to_vec(),
            truth: s.schedule.initial_truth(),
            components: s
                .components
                .iter()
                .map(|c| ComponentSpec { mean: c.mean, std: c.std })
                .collect(),
            pdf_normalization: match s.pdf_normalization {
                PdfNormalization::Proper => Normalization::Proper,
                PdfNormalization::AgentScaled => Normalization::AgentScaled,
            },
            agents,
            graph: GraphSpec::Explicit {
                matrix: s.combination.matrix().to_rows(),
            },
            adaptation: AdaptationSpec {
                delta: a.delta,
                eta: a.eta,
                eta_tilde: a.eta_tilde,
                rho: a.rho,
                rho_tilde: a.rho_tilde,
            },
            initial: InitialSpec {
                beliefs: match &s.initial_beliefs {
                    InitialBeliefs::Uniform => BeliefsSpec::default(),
                    InitialBeliefs::Explicit(rows) => BeliefsSpec::Explicit(rows.clone()),
                },
                params: match &s.initial_params {
                    InitialParams::Zero => ParamsSpec::Named(NamedParams::Zero),
                    InitialParams::Optimal => ParamsSpec::Named(NamedParams::Optimal),
                    InitialParams::Explicit(p) => ParamsSpec::Explicit {
                        explicit: p
                            .iter()
                            .map(|ap| ParamBlock {
                                w: ap.w.clone(),
                                u: ap.u.clone(),
                            })
                            .collect(),
                    },
                },
            },
            drifts,
            horizon: s.horizon,
            monte_carlo: MonteCarloSpec {
                runs: s.runs,
                seed: s.seed,
                steady_fraction: s.steady_fraction,
                belief_stride,
            },
            features: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_builtins_match_the_core_definitions() {
        for name in builtin_names() {
            let loaded = load(name, &[]).unwrap();
            assert_eq!(loaded.scenario, a2sl_core::scenario::builtin(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn round_trip_through_json() {
        let mut s = a2sl_core::scenario::vi_a();
        s.step_overrides[2] = Some(StepSizes { eta: 0.01, eta_tilde: 0.02 });
        let f = ScenarioFile::from_scenario(&s, 5);
        let back = parse_value(serde_json::from_str(&f.to_json()).unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_scenario(None).unwrap(), s);
    }

    #[test]
    fn overrides_set_scalars_array_items_and_wildcards() {
        let l = load(
            "vi-a",
            &[
                "adaptation.delta=0.002".into(),
                "agents.3.q_tr=0.5".into(),
                "agents.*.q_pr=0.9".into(),
                "name=custom".into(),
            ],
        )
        .unwrap();
        assert_eq!(l.scenario.adaptation.delta, 0.002);
        assert_eq!(l.scenario.arrivals[3].q_tr, 0.5);
        assert_eq!(l.scenario.arrivals[0].q_tr, 0.7);
        assert!(l.scenario.arrivals.iter().all(|a| a.q_pr == 0.9));
        assert_eq!(l.scenario.name, "custom");

        for bad in ["adaptation.delta", "agents.99.q_tr=1", "horizon.x=3"] {
            assert!(matches!(load("vi-a", &[bad.into()]), Err(CliError::Override { .. })), "{bad}");
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let e = load("vi-a", &["adaptation.dleta=0.1".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("adaptation"), "{e}");

        let e = load("vi-a", &["agents.4.table=[0,1,7]".into()]).unwrap_err();
        assert!(e.to_string().contains("component 7"), "{e}");

        let e = load("vi-a", &["agents.4.table=[0,1]".into()]).unwrap_err();
        assert!(e.to_string().starts_with("agents[4].table"), "{e}");

        let e = load("vi-a", &["horizon=\"long\"".into()]).unwrap_err();
        assert!(e.to_string().starts_with("horizon"), "{e}");
    }

    #[test]
    fn non_primitive_graph_is_rejected() {
        let ring = "graph={\"rule\":\"uniform\",\"adjacency\":[[0,1,0],[0,0,1],[1,0,0]]}";
        let e = load(
            "vi-a",
            &[
                ring.into(),
                "agents=[{\"features\":1,\"table\":[0,1,2],\"priors\":[0.3,0.4,0.3],\"q_tr\":0.7,\"q_pr\":0.8},{\"features\":1,\"table\":[0,1,2],\"priors\":[0.3,0.4,0.3],\"q_tr\":0.7,\"q_pr\":0.8},{\"features\":1,\"table\":[0,1,2],\"priors\":[0.3,0.4,0.3],\"q_tr\":0.7,\"q_pr\":0.8}]".into(),
            ],
        )
        .unwrap_err();
        assert_eq!(e.kind(), "NonPrimitive");
        assert_eq!(e.exit_code(), 2);
    }
}
