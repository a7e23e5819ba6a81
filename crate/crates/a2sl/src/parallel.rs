//! Run-parallel Monte Carlo.
//!
//! Each run draws from its own seed `run_seed(master, r)`, and error counts
//! are integers, so the reduction order chosen by the thread pool never
//! changes the result: the estimates are identical to the sequential ones.

use a2sl_core::datagen::ReplaySource;
use a2sl_core::montecarlo::{
    run_once, run_seed, run_with_source, steady_window, ErrorEstimate, ErrorTally, RunOptions, RunRecord,
    SweepRow, Triplet,
};
use a2sl_core::scenario::Scenario;
use a2sl_core::training::AgentParams;
use rayon::prelude::*;

use crate::error::{CliError, Result};

fn tally_for(scenario: &Scenario) -> ErrorTally {
    let window = steady_window(scenario.horizon, scenario.steady_fraction);
    ErrorTally::new(scenario.agents(), scenario.horizon, window)
}

pub fn estimate_error_prob(scenario: &Scenario, runs: usize, master_seed: u64) -> Result<ErrorEstimate> {
    let params = scenario.initial_agent_params().map_err(CliError::Runtime)?;
    estimate_with_params(scenario, &params, runs, master_seed)
}

pub fn estimate_with_params(
    scenario: &Scenario,
    params: &[AgentParams],
    runs: usize,
    master_seed: u64,
) -> Result<ErrorEstimate> {
    let tally = (0..runs)
        .into_par_iter()
        .try_fold(
            || tally_for(scenario),
            |mut tally, r| {
                let rec = run_once(scenario, run_seed(master_seed, r), params.to_vec(), RunOptions::default())?;
                tally.add(r, &rec);
                Ok::<_, a2sl_core::Error>(tally)
            },
        )
        .try_reduce(|| tally_for(scenario), |a, b| Ok(a.merge(b)))
        .map_err(CliError::Runtime)?;
    Ok(tally.finish())
}

/// A single run over recorded features (the data are fixed, so repeated
/// runs would be identical).
pub fn replay(scenario: &Scenario, source: ReplaySource, opts: RunOptions) -> Result<(ErrorEstimate, RunRecord)> {
    let params = scenario.initial_agent_params().map_err(CliError::Runtime)?;
    let rec = run_with_source(scenario, source, params, scenario.seed, opts).map_err(CliError::Runtime)?;
    let mut tally = tally_for(scenario);
    tally.add(0, &rec);
    Ok((tally.finish(), rec))
}

/// Steady-state error for every triplet and agent, runs in parallel inside
/// each triplet.
pub fn sweep(scenario: &Scenario, triplets: &[Triplet], runs: usize, master_seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(triplets.len() * scenario.agents());
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_the_sequential_estimate() {
        let mut s = a2sl_core::scenario::vi_a();
        s.horizon = 300;
        let par = estimate_error_prob(&s, 12, 9).unwrap();
        let seq = a2sl_core::montecarlo::estimate_error_prob(&s, 12, 9).unwrap();
        assert_eq!(par, seq);
    }
}
