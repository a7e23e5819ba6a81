//! CSV artifacts, feature ingestion and the run manifest.
//!
//! Every CSV is UTF-8, comma-delimited, with a header row. Numbers use the
//! shortest representation that round-trips, so identical runs produce
//! byte-identical files. Agents and hypotheses are 0-based.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use a2sl_core::analysis::BoundPoint;
use a2sl_core::datagen::{FeatureRecord, HypothesisSet, RecordKind};
use a2sl_core::graph::CombinationMatrix;
use a2sl_core::montecarlo::{ErrorEstimate, RunRecord, SweepRow};
use a2sl_core::training::AgentParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioFile;
use crate::error::{CliError, Result};

type CsvOut = csv::Writer<BufWriter<File>>;

fn create(path: &Path, header: &[&str]) -> Result<CsvOut> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(CliError::csv(path))?;
    Ok(w)
}

fn finish(mut w: CsvOut, path: &Path) -> Result<()> {
    w.flush().map_err(CliError::io(path))
}

/// `t,agent,p_hat,ci_lo,ci_hi`
pub fn write_error_prob(path: &Path, est: &ErrorEstimate) -> Result<()> {
    let mut w = create(path, &["t", "agent", "p_hat", "ci_lo", "ci_hi"])?;
    for t in 1..=est.horizon {
        for k in 0..est.agents {
            let (lo, hi) = est.interval(t, k);
            w.write_record([
                t.to_string(),
                k.to_string(),
                est.p(t, k).to_string(),
                lo.to_string(),
                hi.to_string(),
            ])
            .map_err(CliError::csv(path))?;
        }
    }
    finish(w, path)
}

/// `delta,eta,eta_tilde,agent,p_ss,ci_lo,ci_hi`
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = create(path, &["delta", "eta", "eta_tilde", "agent", "p_ss", "ci_lo", "ci_hi"])?;
    for r in rows {
        w.write_record([
            r.triplet.delta.to_string(),
            r.triplet.eta.to_string(),
            r.triplet.eta_tilde.to_string(),
            r.agent.to_string(),
            r.steady.mean.to_string(),
            r.steady.lo.to_string(),
            r.steady.hi.to_string(),
        ])
        .map_err(CliError::csv(path))?;
    }
    finish(w, path)
}

/// `t,agent,theta,belief` at the recorded snapshot times.
pub fn write_beliefs(path: &Path, rec: &RunRecord, hypotheses: usize) -> Result<()> {
    let mut w = create(path, &["t", "agent", "theta", "belief"])?;
    for snap in &rec.beliefs {
        for k in 0..rec.agents {
            for h in 0..hypotheses {
                let b = snap.log_beliefs[k * hypotheses + h].exp();
                w.write_record([snap.t.to_string(), k.to_string(), h.to_string(), b.to_string()])
                    .map_err(CliError::csv(path))?;
            }
        }
    }
    finish(w, path)
}

/// `t,agent,decision,truth,correct`
pub fn write_decisions(path: &Path, rec: &RunRecord) -> Result<()> {
    let mut w = create(path, &["t", "agent", "decision", "truth", "correct"])?;
    for t in 1..=rec.horizon {
        let truth = rec.truth_at(t);
        for k in 0..rec.agents {
            let d = rec.decision(t, k);
            w.write_record([
                t.to_string(),
                k.to_string(),
                d.to_string(),
                truth.to_string(),
                u8::from(d == truth).to_string(),
            ])
            .map_err(CliError::csv(path))?;
        }
    }
    finish(w, path)
}

/// `agent,block,index,value`; block is `w` or `u` and index is the flat
/// storage index (`h·D + m` for `w`).
pub fn write_params(path: &Path, params: &[AgentParams]) -> Result<()> {
    let mut w = create(path, &["agent", "block", "index", "value"])?;
    for (k, p) in params.iter().enumerate() {
        for (block, values) in [("w", &p.w), ("u", &p.u)] {
            for (i, v) in values.iter().enumerate() {
                w.write_record([k.to_string(), block.to_string(), i.to_string(), v.to_string()])
                    .map_err(CliError::csv(path))?;
            }
        }
    }
    finish(w, path)
}

/// Inverse of [`write_params`]; `dims` are raw feature dimensions.
pub fn read_params_csv(path: &Path, dims: &[usize], hypotheses: usize) -> Result<Vec<AgentParams>> {
    let mut blocks: Vec<(Vec<Option<f64>>, Vec<Option<f64>>)> = dims
        .iter()
        .map(|d| (vec![None; (d + 1) * (hypotheses - 1)], vec![None; hypotheses - 1]))
        .collect();
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    let cols = columns(&mut r, path, &["agent", "block", "index", "value"])?;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(CliError::csv(path))?;
        let at = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let here = |what: &str| CliError::schema(format!("{}: row {}", path.display(), row + 1), what.to_string());
        let agent: usize = at(0).parse().map_err(|_| here("bad agent"))?;
        let index: usize = at(2).parse().map_err(|_| here("bad index"))?;
        let value: f64 = at(3).parse().map_err(|_| here("bad value"))?;
        let (w, u) = blocks.get_mut(agent).ok_or_else(|| here("agent out of range"))?;
        let slot = match at(1) {
            "w" => w.get_mut(index),
            "u" => u.get_mut(index),
            _ => return Err(here("block must be w or u")),
        }
        .ok_or_else(|| here("index out of range"))?;
        *slot = Some(value);
    }
    blocks
        .into_iter()
        .zip(dims)
        .enumerate()
        .map(|(k, ((w, u), d))| {
            let missing = || CliError::schema(path.display().to_string(), format!("agent {k} has missing entries"));
            let w: Option<Vec<f64>> = w.into_iter().collect();
            let u: Option<Vec<f64>> = u.into_iter().collect();
            AgentParams::from_parts(w.ok_or_else(missing)?, u.ok_or_else(missing)?, d + 1, hypotheses)
                .map_err(CliError::field(path.display().to_string()))
        })
        .collect()
}

/// `t,bound_raw,bound_clipped`
pub fn write_bound(path: &Path, curve: &[BoundPoint]) -> Result<()> {
    let mut w = create(path, &["t", "bound_raw", "bound_clipped"])?;
    for p in curve {
        w.write_record([p.t.to_string(), p.raw.to_string(), p.clipped.to_string()])
            .map_err(CliError::csv(path))?;
    }
    finish(w, path)
}

/// Row-major combination matrix with one header cell per agent.
pub fn write_matrix(path: &Path, a: &CombinationMatrix) -> Result<()> {
    let k = a.agents();
    let header: Vec<String> = (0..k).map(|j| j.to_string()).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = create(path, &header)?;
    for row in a.matrix().to_rows() {
        w.write_record(row.iter().map(f64::to_string)).map_err(CliError::csv(path))?;
    }
    finish(w, path)
}

fn columns<R: std::io::Read>(r: &mut csv::Reader<R>, path: &Path, wanted: &[&str]) -> Result<Vec<usize>> {
    let headers = r.headers().map_err(CliError::csv(path))?.clone();
    wanted
        .iter()
        .map(|c| {
            headers.iter().position(|h| h.trim() == *c).ok_or_else(|| CliError::MissingColumn {
                file: path.to_path_buf(),
                column: c.to_string(),
            })
        })
        .collect()
}

/// Read a feature file with header `agent,t,kind,label,f0,...`.
///
/// `kind` is `train` or `pred`; prediction rows leave `label` empty and
/// labels name hypotheses. Rows for agents with fewer features leave the
/// trailing cells empty. Dimension and time-order checks happen when the
/// records are handed to the replay source.
pub fn read_features(path: &Path, hypotheses: &HypothesisSet) -> Result<Vec<FeatureRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(CliError::csv(path))?;
    let cols = columns(&mut r, path, &["agent", "t", "kind", "label"])?;
    let headers = r.headers().map_err(CliError::csv(path))?.clone();
    let feature_cols: Vec<usize> = (0..)
        .map_while(|i| headers.iter().position(|h| h.trim() == format!("f{i}")))
        .collect();
    if feature_cols.is_empty() {
        return Err(CliError::MissingColumn {
            file: path.to_path_buf(),
            column: "f0".into(),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(CliError::csv(path))?;
        let at = |c: usize| rec.get(c).unwrap_or("").trim();
        let here = |what: String| CliError::schema(format!("{}: row {}", path.display(), row + 1), what);
        let agent: usize = at(cols[0]).parse().map_err(|_| here(format!("bad agent {:?}", at(cols[0]))))?;
        let time: u64 = at(cols[1]).parse().map_err(|_| here(format!("bad time {:?}", at(cols[1]))))?;
        let kind = match at(cols[2]) {
            "train" | "training" => RecordKind::Training,
            "pred" | "prediction" => RecordKind::Prediction,
            other => return Err(here(format!("kind must be train or pred, got {other:?}"))),
        };
        let label = match at(cols[3]) {
            "" => None,
            l => Some(hypotheses.index_of(l).ok_or_else(|| CliError::UnknownLabel {
                file: path.to_path_buf(),
                row: row + 1,
                label: l.to_string(),
            })?),
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        for (i, &c) in feature_cols.iter().enumerate() {
            match at(c) {
                "" => break,
                v => features.push(v.parse().map_err(|_| here(format!("bad value in f{i}: {v:?}")))?),
            }
        }
        out.push(FeatureRecord {
            agent,
            time,
            kind,
            features,
            label,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(CliError::io(path))?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to reproduce an output directory. No timestamps or
/// host details, so reruns produce the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub runs: usize,
    pub horizon: u64,
    pub steady_window: Option<(u64, u64)>,
    /// SHA-256 of the compact JSON of the effective scenario.
    pub scenario_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<FileDigest>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub parameters: serde_json::Value,
    pub outputs: Vec<FileDigest>,
    pub scenario: ScenarioFile,
}

pub fn scenario_hash(file: &ScenarioFile) -> String {
    sha256_hex(&serde_json::to_vec(file).expect("scenario files always serialize"))
}

impl Manifest {
    pub fn new(command: &str, file: &ScenarioFile) -> Self {
        Self {
            tool: "a2sl",
            version: env!("CARGO_PKG_VERSION"),
            core_version: a2sl_core::VERSION,
            command: command.to_string(),
            seed: file.monte_carlo.seed,
            runs: file.monte_carlo.runs,
            horizon: file.horizon,
            steady_window: None,
            scenario_hash: scenario_hash(file),
            features: None,
            parameters: serde_json::Value::Null,
            outputs: Vec::new(),
            scenario: file.clone(),
        }
    }

    /// Record digests of `files` (relative to `dir`) and write `manifest.json`.
    pub fn write(mut self, dir: &Path, files: &[&str]) -> Result<PathBuf> {
        for f in files {
            self.outputs.push(FileDigest {
                file: f.to_string(),
                sha256: file_sha256(&dir.join(f))?,
            });
        }
        let path = dir.join("manifest.json");
        write_json(&path, &self)?;
        Ok(path)
    }
}
