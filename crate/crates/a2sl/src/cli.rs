//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use a2sl_core::analysis::error_bound_curve;
use a2sl_core::datagen::ReplaySource;
use a2sl_core::montecarlo::{run_once, run_seed, steady_window, ErrorEstimate, RunOptions, Triplet};
use a2sl_core::scenario::{AnalysisConfig, Scenario};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{self, LoadedScenario};
use crate::error::{CliError, Result};
use crate::io::{self, file_sha256, FileDigest, Manifest};
use crate::parallel;
use crate::plot;
use crate::report::{stability_warnings, AnalysisReport, PerronView};

#[derive(Debug, Parser)]
#[command(name = "a2sl", version, about = "Doubly adaptive social learning: simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of the instantaneous error probability.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "a2sl-out")]
        out: PathBuf,
    },
    /// Steady-state error over a grid of (delta, eta, eta_tilde).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "a2sl-out")]
        out: PathBuf,
        #[command(flatten)]
        grid: Grid,
    },
    /// Optimal parameters, identifiability, admissibility and the error bound.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "a2sl-out")]
        out: PathBuf,
    },
    /// Check a scenario and its graph; prints a report and writes nothing.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Draw SVG figures from the CSV files in a directory.
    Plot {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Agents to draw (0-based).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        agents: Vec<usize>,
    },
    /// Print the JSON schema of scenario files.
    Schema,
    /// Print a scenario file (after overrides) to stdout.
    Show {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file or built-in name (vi-a, drift).
    #[arg(long, default_value = "vi-a")]
    pub scenario: String,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Set a scenario field, e.g. `adaptation.delta=0.005` or `agents.*.q_tr=0.5`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Grid {
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.0055, 0.01])]
    pub deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.005, 0.0275, 0.05])]
    pub etas: Vec<f64>,
    /// Without this flag eta_tilde follows eta; with it the grid is the full
    /// product of the three lists.
    #[arg(long, value_delimiter = ',')]
    pub eta_tildes: Option<Vec<f64>>,
}

impl Grid {
    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::new();
        for &delta in &self.deltas {
            for &eta in &self.etas {
                match &self.eta_tildes {
                    None => out.push(Triplet {
                        delta,
                        eta,
                        eta_tilde: eta,
                    }),
                    Some(ets) => out.extend(ets.iter().map(|&eta_tilde| Triplet { delta, eta, eta_tilde })),
                }
            }
        }
        out
    }
}

impl Common {
    /// Load the scenario with the flag values folded in as overrides, so
    /// the manifest records the effective configuration.
    pub fn load(&self) -> Result<LoadedScenario> {
        let mut overrides = Vec::new();
        if let Some(r) = self.runs {
            overrides.push(format!("monte_carlo.runs={r}"));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("monte_carlo.seed={s}"));
        }
        if let Some(h) = self.horizon {
            overrides.push(format!("horizon={h}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        config::load(&self.scenario, &overrides)
    }
}

#[derive(Serialize)]
struct Warning<'a> {
    warning: &'a str,
}

fn warn(message: &str) {
    eprintln!("{}", serde_json::to_string(&Warning { warning: message }).expect("plain string"));
}

fn emit_load_warnings(s: &Scenario) {
    match s.analyze(&AnalysisConfig::default()) {
        Ok(a) => stability_warnings(s, &a).iter().for_each(|w| warn(w)),
        Err(e) => warn(&format!("admissibility not checked: {e}")),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

#[derive(Serialize)]
struct SteadyLine {
    agent: usize,
    p_ss: f64,
    ci_lo: f64,
    ci_hi: f64,
}

#[derive(Serialize)]
struct Summary {
    out: PathBuf,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    steady_state: Vec<SteadyLine>,
}

fn steady_lines(est: &ErrorEstimate) -> Vec<SteadyLine> {
    est.steady
        .iter()
        .enumerate()
        .map(|(agent, s)| SteadyLine {
            agent,
            p_ss: s.mean,
            ci_lo: s.lo,
            ci_hi: s.hi,
        })
        .collect()
}

fn print_text(text: &str) {
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json<T: Serialize>(value: &T) {
    print_text(&serde_json::to_string_pretty(value).expect("reports always serialize"));
}

pub fn simulate(common: &Common, out: &Path) -> Result<()> {
    let loaded = common.load()?;
    let s = &loaded.scenario;
    emit_load_warnings(s);
    create_dir(out)?;
    let opts = RunOptions {
        belief_stride: loaded.belief_stride,
    };
    let mut manifest = Manifest::new("simulate", &loaded.file);
    let (est, first) = match &loaded.features {
        Some(path) => {
            let records = io::read_features(path, &s.hypotheses)?;
            let source = ReplaySource::new(records, &s.feature_dims, s.hypothesis_count()).map_err(CliError::Invalid)?;
            if s.runs > 1 {
                warn("features replay the same data in every run; running once");
            }
            manifest.runs = 1;
            manifest.features = Some(FileDigest {
                file: path.display().to_string(),
                sha256: file_sha256(path)?,
            });
            parallel::replay(s, source, opts)?
        }
        None => {
            let est = parallel::estimate_error_prob(s, s.runs, s.seed)?;
            let params = s.initial_agent_params().map_err(CliError::Runtime)?;
            let first = run_once(s, run_seed(s.seed, 0), params, opts).map_err(CliError::Runtime)?;
            (est, first)
        }
    };
    io::write_error_prob(&out.join("error_prob.csv"), &est)?;
    io::write_beliefs(&out.join("beliefs.csv"), &first, s.hypothesis_count())?;
    io::write_decisions(&out.join("decisions.csv"), &first)?;
    io::write_params(&out.join("params.csv"), &first.final_params)?;
    io::write_matrix(&out.join("matrix.csv"), &s.combination)?;
    let files = ["error_prob.csv", "beliefs.csv", "decisions.csv", "params.csv", "matrix.csv"];
    manifest.steady_window = Some(est.window);
    manifest.parameters = serde_json::json!({
        "trajectory_run": 0,
        "belief_stride": loaded.belief_stride,
    });
    manifest.write(out, &files)?;
    print_json(&Summary {
        out: out.to_path_buf(),
        files: files.iter().map(|f| f.to_string()).collect(),
        steady_state: steady_lines(&est),
    });
    Ok(())
}

pub fn sweep(common: &Common, out: &Path, grid: &Grid) -> Result<()> {
    let loaded = common.load()?;
    let s = &loaded.scenario;
    let triplets = grid.triplets();
    for (i, t) in triplets.iter().enumerate() {
        s.with_triplet(t.delta, t.eta, t.eta_tilde)
            .validate()
            .map_err(CliError::field(format!("grid[{i}]")))?;
    }
    create_dir(out)?;
    let rows = parallel::sweep(s, &triplets, s.runs, s.seed)?;
    io::write_sweep(&out.join("sweep.csv"), &rows)?;
    let mut manifest = Manifest::new("sweep", &loaded.file);
    manifest.steady_window = Some(steady_window(s.horizon, s.steady_fraction));
    manifest.parameters = serde_json::json!({
        "triplets": triplets.iter().map(|t| [t.delta, t.eta, t.eta_tilde]).collect::<Vec<_>>(),
    });
    manifest.write(out, &["sweep.csv"])?;
    print_json(&Summary {
        out: out.to_path_buf(),
        files: vec!["sweep.csv".into()],
        steady_state: Vec::new(),
    });
    Ok(())
}

pub fn analyze(common: &Common, out: &Path) -> Result<()> {
    let loaded = common.load()?;
    let s = &loaded.scenario;
    let cfg = AnalysisConfig {
        seed: s.seed,
        ..AnalysisConfig::default()
    };
    let analysis = s.analyze(&cfg).map_err(CliError::Runtime)?;
    for w in stability_warnings(s, &analysis) {
        warn(&w);
    }
    create_dir(out)?;
    let report = AnalysisReport::new(s, &analysis);
    let mut files = vec!["analysis.json", "optimal_params.csv", "matrix.csv"];
    io::write_json(&out.join("analysis.json"), &report)?;
    let optimal: Vec<_> = analysis.optimal.iter().map(|o| o.params.clone()).collect();
    io::write_params(&out.join("optimal_params.csv"), &optimal)?;
    io::write_matrix(&out.join("matrix.csv"), &s.combination)?;
    match &analysis.bound {
        Ok(b) => {
            let a = s.adaptation;
            let curve = error_bound_curve(b, a.delta, a.eta, a.eta_tilde, s.horizon);
            io::write_bound(&out.join("bound.csv"), &curve)?;
            files.push("bound.csv");
        }
        Err(e) => warn(&format!("error bound unavailable: {e}")),
    }
    let mut manifest = Manifest::new("analyze", &loaded.file);
    manifest.parameters = serde_json::json!({
        "oracle_nodes": cfg.oracle.nodes,
        "oracle_tolerance": cfg.oracle.tolerance,
        "constant_samples": cfg.constant_samples,
        "constant_seed": cfg.seed,
    });
    manifest.write(out, &files)?;
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport {
    valid: bool,
    scenario: String,
    scenario_hash: String,
    agents: usize,
    hypotheses: usize,
    primitive: bool,
    perron: PerronView,
    warnings: Vec<String>,
}

pub fn validate(common: &Common) -> Result<()> {
    let loaded = common.load()?;
    let s = &loaded.scenario;
    let perron = s.combination.perron(1e-12).map_err(CliError::Invalid)?;
    let warnings = match s.analyze(&AnalysisConfig::default()) {
        Ok(a) => stability_warnings(s, &a),
        Err(e) => vec![format!("admissibility not checked: {e}")],
    };
    if let Some(path) = &loaded.features {
        let records = io::read_features(path, &s.hypotheses)?;
        ReplaySource::new(records, &s.feature_dims, s.hypothesis_count()).map_err(CliError::Invalid)?;
    }
    print_json(&ValidationReport {
        valid: true,
        scenario: s.name.clone(),
        scenario_hash: io::scenario_hash(&loaded.file),
        agents: s.agents(),
        hypotheses: s.hypothesis_count(),
        primitive: s.combination.is_primitive(),
        perron: (&perron).into(),
        warnings,
    });
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common, out } => simulate(common, out),
        Command::Sweep { common, out, grid } => sweep(common, out, grid),
        Command::Analyze { common, out } => analyze(common, out),
        Command::Validate { common } => validate(common),
        Command::Plot { input, agents } => {
            let files = plot::plot_directory(input, agents)?;
            print_json(&files);
            Ok(())
        }
        Command::Schema => {
            print_json(&config::schema());
            Ok(())
        }
        Command::Show { common } => {
            print_text(&common.load()?.file.to_json());
            Ok(())
        }
    }
}

/// Entry point for the binary: exit 0 on success, otherwise print an error
/// report as JSON on stderr and exit 2 (bad input) or 3 (runtime failure).
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).expect("error reports always serialize"));
            report.exit_code
        }
    }
}
