//! Generative models, gated sample streams, drift schedules and replay of
//! externally supplied features.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Invalid("at least two hypotheses are required".into()));
        }
        Ok(Self { labels })
    }

    /// Hypotheses labelled `1..=count`.
    pub fn numbered(count: usize) -> Result<Self> {
        Self::new((1..=count).map(|i| alloc::format!("{i}")).collect())
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    /// The reference hypothesis whose statistic is pinned at zero.
    pub fn pivot(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub mean: f64,
    pub std: f64,
}

impl GaussianComponent {
    /// Component `n` of the synthetic family: mean `n`, standard deviation `0.1 n`.
    pub fn numbered(n: u32) -> Self {
        Self {
            mean: n as f64,
            std: n as f64 / 10.0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        INV_SQRT_2PI / self.std * libm::exp(-0.5 * z * z)
    }

    /// Same exponent as [`pdf`](Self::pdf) but with the normalizing constant
    /// taken from `0.1 * agent` (1-based agent number). Not a normalized density
    /// unless `0.1 * agent` equals the component std.
    pub fn agent_scaled_pdf(&self, agent: usize, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        INV_SQRT_2PI / (0.1 * agent as f64) * libm::exp(-0.5 * z * z)
    }

    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.std * self.std
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.std * z
    }
}

/// Which density normalization `component_pdf` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PdfNormalization {
    #[default]
    Proper,
    AgentScaled,
}

/// `table[k][h]` is the component generating agent `k`'s features under hypothesis `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeTable {
    rows: Vec<Vec<usize>>,
}

impl GenerativeTable {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let h = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != h {
                return Err(Error::DimensionMismatch {
                    context: "generative table row",
                    expected: h,
                    found: r.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    pub fn hypotheses(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    #[inline]
    pub fn component(&self, agent: usize, hypothesis: usize) -> usize {
        self.rows[agent][hypothesis]
    }

    pub fn row(&self, agent: usize) -> &[usize] {
        &self.rows[agent]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Exchange two hypothesis columns for every agent.
    pub fn swap_hypotheses(&self, a: usize, b: usize) -> Self {
        let mut rows = self.rows.clone();
        for r in &mut rows {
            r.swap(a, b);
        }
        Self { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalConfig {
    pub q_tr: f64,
    pub q_pr: f64,
}

impl ArrivalConfig {
    pub fn new(q_tr: f64, q_pr: f64) -> Result<Self> {
        for (name, q) in [("q_tr", q_tr), ("q_pr", q_pr)] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: q,
                    reason: "arrival probability must lie in (0, 1]",
                });
            }
        }
        Ok(Self { q_tr, q_pr })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriftKind {
    Hypothesis(usize),
    Model(GenerativeTable),
}

/// A change that takes effect from `time + 1` onward.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEvent {
    pub time: u64,
    pub kind: DriftKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSchedule {
    initial_truth: usize,
    initial_table: GenerativeTable,
    events: Vec<DriftEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftState<'a> {
    pub truth: usize,
    pub table: &'a GenerativeTable,
}

impl DriftSchedule {
    pub fn new(
        initial_truth: usize,
        initial_table: GenerativeTable,
        events: Vec<DriftEvent>,
    ) -> Result<Self> {
        let mut prev: Option<&DriftEvent> = None;
        for (i, e) in events.iter().enumerate() {
            if let Some(p) = prev {
                if e.time < p.time {
                    return Err(Error::UnsortedDrift {
                        time: e.time,
                        previous: p.time,
                    });
                }
            }
            let same_field = events[..i].iter().any(|o| {
                o.time == e.time
                    && core::mem::discriminant(&o.kind) == core::mem::discriminant(&e.kind)
            });
            if same_field {
                let field = match e.kind {
                    DriftKind::Hypothesis(_) => "hypothesis",
                    DriftKind::Model(_) => "model",
                };
                return Err(Error::OverlappingDrift {
                    time: e.time,
                    field,
                });
            }
            prev = Some(e);
        }
        Ok(Self {
            initial_truth,
            initial_table,
            events,
        })
    }

    pub fn stationary(truth: usize, table: GenerativeTable) -> Self {
        Self {
            initial_truth: truth,
            initial_table: table,
            events: Vec::new(),
        }
    }

    pub fn initial_truth(&self) -> usize {
        self.initial_truth
    }

    pub fn initial_table(&self) -> &GenerativeTable {
        &self.initial_table
    }

    pub fn events(&self) -> &[DriftEvent] {
        &self.events
    }

    /// Truth and generative table in force at time `t`.
    pub fn state_at(&self, t: u64) -> DriftState<'_> {
        let mut state = DriftState {
            truth: self.initial_truth,
            table: &self.initial_table,
        };
        for e in self.events.iter().take_while(|e| e.time < t) {
            match &e.kind {
                DriftKind::Hypothesis(h) => state.truth = *h,
                DriftKind::Model(table) => state.table = table,
            }
        }
        state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Training,
    Prediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub agent: usize,
    pub time: u64,
    pub kind: RecordKind,
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

/// Supplier of raw (unextended) feature vectors to the simulation.
///
/// Queries arrive with nondecreasing `t`, once per agent and kind per step.
pub trait DataSource {
    /// Writes the features into `out` and returns the label when a training
    /// sample arrives for `agent` at time `t`.
    fn training(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> Option<usize>;

    /// Writes the features into `out` and returns `true` when a prediction
    /// sample arrives.
    fn prediction(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> bool;
}

#[derive(Debug, Clone)]
pub struct AgentStreams {
    train_arrival: ChaCha8Rng,
    train_sample: ChaCha8Rng,
    pred_arrival: ChaCha8Rng,
    pred_sample: ChaCha8Rng,
}

impl AgentStreams {
    pub fn new(seed: u64, agent: usize) -> Self {
        Self {
            train_arrival: stream(seed, agent, Purpose::TrainArrival),
            train_sample: stream(seed, agent, Purpose::TrainSample),
            pred_arrival: stream(seed, agent, Purpose::PredArrival),
            pred_sample: stream(seed, agent, Purpose::PredSample),
        }
    }
}

/// Draw an index from a discrete distribution by inversion.
pub fn draw_label<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

fn fill_features<R: Rng + ?Sized>(
    component: &GaussianComponent,
    dim: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend((0..dim).map(|_| component.sample(rng)));
}

/// Seeded synthetic generator following the drift schedule.
#[derive(Debug, Clone)]
pub struct SyntheticSource<'a> {
    components: &'a [GaussianComponent],
    priors: &'a [Vec<f64>],
    dims: &'a [usize],
    arrivals: &'a [ArrivalConfig],
    schedule: &'a DriftSchedule,
    streams: Vec<AgentStreams>,
}

impl<'a> SyntheticSource<'a> {
    pub fn new(
        seed: u64,
        components: &'a [GaussianComponent],
        priors: &'a [Vec<f64>],
        dims: &'a [usize],
        arrivals: &'a [ArrivalConfig],
        schedule: &'a DriftSchedule,
    ) -> Self {
        let streams = (0..dims.len()).map(|k| AgentStreams::new(seed, k)).collect();
        Self {
            components,
            priors,
            dims,
            arrivals,
            schedule,
            streams,
        }
    }
}

impl DataSource for SyntheticSource<'_> {
    fn training(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> Option<usize> {
        let s = &mut self.streams[agent];
        if s.train_arrival.random::<f64>() >= self.arrivals[agent].q_tr {
            return None;
        }
        let label = draw_label(&self.priors[agent], &mut s.train_sample);
        let table = self.schedule.state_at(t).table;
        let comp = &self.components[table.component(agent, label)];
        fill_features(comp, self.dims[agent], &mut s.train_sample, out);
        Some(label)
    }

    fn prediction(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> bool {
        let s = &mut self.streams[agent];
        if s.pred_arrival.random::<f64>() >= self.arrivals[agent].q_pr {
            return false;
        }
        let state = self.schedule.state_at(t);
        let comp = &self.components[state.table.component(agent, state.truth)];
        fill_features(comp, self.dims[agent], &mut s.pred_sample, out);
        true
    }
}

/// Replays validated [`FeatureRecord`]s in place of synthetic sampling.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    training: Vec<VecDeque<FeatureRecord>>,
    prediction: Vec<VecDeque<FeatureRecord>>,
}

impl ReplaySource {
    /// Validates dimensions, labels and time order. `dims[k]` is agent `k`'s
    /// raw feature dimension.
    pub fn new(records: Vec<FeatureRecord>, dims: &[usize], hypotheses: usize) -> Result<Self> {
        let agents = dims.len();
        let mut training = vec![VecDeque::new(); agents];
        let mut prediction = vec![VecDeque::new(); agents];
        let mut previous = 0u64;
        for (row, r) in records.into_iter().enumerate() {
            if r.time < previous {
                return Err(Error::NonMonotoneTime {
                    row,
                    time: r.time,
                    previous,
                });
            }
            previous = r.time;
            if r.agent >= agents {
                return Err(Error::Invalid(alloc::format!(
                    "row {row}: agent {} outside 0..{agents}",
                    r.agent
                )));
            }
            if r.features.len() != dims[r.agent] {
                return Err(Error::DimensionMismatch {
                    context: "feature record",
                    expected: dims[r.agent],
                    found: r.features.len(),
                });
            }
            let queue = match r.kind {
                RecordKind::Training => {
                    match r.label {
                        Some(l) if l < hypotheses => {}
                        Some(l) => return Err(Error::UnknownLabel { row, label: l }),
                        None => {
                            return Err(Error::Invalid(alloc::format!(
                                "row {row}: training record without label"
                            )))
                        }
                    }
                    &mut training[r.agent]
                }
                RecordKind::Prediction => &mut prediction[r.agent],
            };
            if queue.back().is_some_and(|b: &FeatureRecord| b.time == r.time) {
                return Err(Error::Invalid(alloc::format!(
                    "row {row}: duplicate record for agent {} at t = {}",
                    r.agent,
                    r.time
                )));
            }
            queue.push_back(r);
        }
        Ok(Self {
            training,
            prediction,
        })
    }

    fn take(queue: &mut VecDeque<FeatureRecord>, t: u64, out: &mut Vec<f64>) -> Option<FeatureRecord> {
        while queue.front().is_some_and(|r| r.time < t) {
            queue.pop_front();
        }
        if queue.front().is_some_and(|r| r.time == t) {
            let r = queue.pop_front()?;
            out.clear();
            out.extend_from_slice(&r.features);
            Some(r)
        } else {
            None
        }
    }
}

impl DataSource for ReplaySource {
    fn training(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> Option<usize> {
        Self::take(&mut self.training[agent], t, out).and_then(|r| r.label)
    }

    fn prediction(&mut self, agent: usize, t: u64, out: &mut Vec<f64>) -> bool {
        Self::take(&mut self.prediction[agent], t, out).is_some()
    }
}

/// Closed-form moments of an agent's extended feature vector `[x, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMoments {
    /// `E[x]` including the trailing unit entry.
    pub mean: Vec<f64>,
    /// `E[x(m)^2]` per extended coordinate.
    pub second: Vec<f64>,
}

impl FeatureMoments {
    pub fn of_component(component: &GaussianComponent, dim: usize) -> Self {
        let mut mean = vec![component.mean; dim];
        mean.push(1.0);
        let mut second = vec![component.second_moment(); dim];
        second.push(1.0);
        Self { mean, second }
    }

    /// Moments of the training mixture `Σ_h π_h g_{table(h)}`.
    pub fn of_mixture(components: &[GaussianComponent], row: &[usize], priors: &[f64], dim: usize) -> Self {
        let m: f64 = row.iter().zip(priors).map(|(&c, p)| p * components[c].mean).sum();
        let s: f64 = row
            .iter()
            .zip(priors)
            .map(|(&c, p)| p * components[c].second_moment())
            .sum();
        let mut mean = vec![m; dim];
        mean.push(1.0);
        let mut second = vec![s; dim];
        second.push(1.0);
        Self { mean, second }
    }

    /// `E‖x‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.second.iter().sum()
    }
}

/// Append the unit offset entry.
pub fn extend_features(raw: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(raw);
    out.push(1.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn table_one() -> GenerativeTable {
        let mut rows = Vec::new();
        rows.push(vec![0, 1, 2]);
        rows.extend(core::iter::repeat_n(vec![0, 1, 1], 2));
        rows.extend(core::iter::repeat_n(vec![0, 0, 2], 3));
        rows.extend(core::iter::repeat_n(vec![1, 1, 2], 4));
        GenerativeTable::new(rows).unwrap()
    }

    fn components() -> Vec<GaussianComponent> {
        (1..=3).map(GaussianComponent::numbered).collect()
    }

    #[test]
    fn pdf_examples() {
        let g1 = GaussianComponent::numbered(1);
        let g2 = GaussianComponent::numbered(2);
        assert_abs_diff_eq!(g1.pdf(1.0), 3.989_422_804, epsilon = 1e-8);
        assert_abs_diff_eq!(g2.pdf(2.0), 1.994_711_402, epsilon = 1e-8);
        assert_abs_diff_eq!(g1.pdf(1.1), g1.pdf(0.9), epsilon = 1e-14);
        // agent-scaled constant coincides with the proper one when 0.1·k = std
        assert_abs_diff_eq!(g2.agent_scaled_pdf(2, 2.3), g2.pdf(2.3), epsilon = 1e-14);
        assert!(g2.agent_scaled_pdf(4, 2.0) < g2.pdf(2.0));
    }

    #[test]
    fn drift_boundary_semantics() {
        let t = table_one();
        let swapped = t.swap_hypotheses(0, 2);
        let s = DriftSchedule::new(
            0,
            t.clone(),
            vec![
                DriftEvent { time: 100, kind: DriftKind::Hypothesis(1) },
                DriftEvent { time: 200, kind: DriftKind::Model(swapped.clone()) },
            ],
        )
        .unwrap();
        assert_eq!(s.state_at(100).truth, 0);
        assert_eq!(s.state_at(101).truth, 1);
        assert_eq!(s.state_at(200).table, &t);
        assert_eq!(s.state_at(201).table, &swapped);
        assert_eq!(s.state_at(5000).truth, 1);

        let empty = DriftSchedule::stationary(2, t.clone());
        assert_eq!(empty.state_at(1_000_000).truth, 2);

        assert!(matches!(
            DriftSchedule::new(
                0,
                t.clone(),
                vec![
                    DriftEvent { time: 5, kind: DriftKind::Hypothesis(1) },
                    DriftEvent { time: 5, kind: DriftKind::Hypothesis(2) },
                ]
            ),
            Err(Error::OverlappingDrift { time: 5, .. })
        ));
        assert!(DriftSchedule::new(
            0,
            t.clone(),
            vec![
                DriftEvent { time: 5, kind: DriftKind::Hypothesis(1) },
                DriftEvent { time: 5, kind: DriftKind::Model(swapped) },
            ]
        )
        .is_ok());
        assert!(matches!(
            DriftSchedule::new(
                0,
                t,
                vec![
                    DriftEvent { time: 9, kind: DriftKind::Hypothesis(1) },
                    DriftEvent { time: 5, kind: DriftKind::Hypothesis(2) },
                ]
            ),
            Err(Error::UnsortedDrift { .. })
        ));
    }

    #[test]
    fn synthetic_rates_labels_and_means() {
        let comps = components();
        let priors = vec![vec![0.3, 0.4, 0.3]; 10];
        let dims = vec![4; 10];
        let arrivals = vec![ArrivalConfig::new(0.7, 0.8).unwrap(); 10];
        let schedule = DriftSchedule::stationary(0, table_one());
        let mut src = SyntheticSource::new(11, &comps, &priors, &dims, &arrivals, &schedule);
        let n = 100_000;
        let mut buf = Vec::new();
        let mut tr = 0usize;
        let mut labels = [0usize; 3];
        let mut pr = 0usize;
        let mut mean1 = 0.0;
        let mut mean7 = 0.0;
        let mut pr7 = 0usize;
        for t in 1..=n as u64 {
            if let Some(l) = src.training(0, t, &mut buf) {
                tr += 1;
                labels[l] += 1;
            }
            if src.prediction(0, t, &mut buf) {
                pr += 1;
                mean1 += buf.iter().sum::<f64>() / 4.0;
            }
            if src.prediction(6, t, &mut buf) {
                pr7 += 1;
                mean7 += buf.iter().sum::<f64>() / 4.0;
            }
        }
        assert_abs_diff_eq!(tr as f64 / n as f64, 0.7, epsilon = 0.01);
        assert_abs_diff_eq!(pr as f64 / n as f64, 0.8, epsilon = 0.01);
        for (c, p) in labels.iter().zip([0.3, 0.4, 0.3]) {
            assert_abs_diff_eq!(*c as f64 / tr as f64, p, epsilon = 0.01);
        }
        assert_abs_diff_eq!(mean1 / pr as f64, 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(mean7 / pr7 as f64, 2.0, epsilon = 0.01);
    }

    #[test]
    fn certain_arrival_always_emits() {
        let comps = components();
        let priors = vec![vec![0.3, 0.4, 0.3]];
        let dims = vec![2];
        let arrivals = vec![ArrivalConfig::new(1.0, 1.0).unwrap()];
        let schedule = DriftSchedule::stationary(0, GenerativeTable::new(vec![vec![0, 1, 2]]).unwrap());
        let mut src = SyntheticSource::new(3, &comps, &priors, &dims, &arrivals, &schedule);
        let mut buf = Vec::new();
        for t in 1..1000 {
            assert!(src.training(0, t, &mut buf).is_some());
            assert!(src.prediction(0, t, &mut buf));
        }
        assert!(ArrivalConfig::new(0.0, 0.5).is_err());
        assert!(ArrivalConfig::new(0.5, 1.5).is_err());
    }

    #[test]
    fn training_features_match_component_given_label() {
        let comps = components();
        let priors = vec![vec![0.3, 0.4, 0.3]];
        let dims = vec![3];
        let arrivals = vec![ArrivalConfig::new(1.0, 1.0).unwrap()];
        let schedule = DriftSchedule::stationary(0, GenerativeTable::new(vec![vec![0, 1, 2]]).unwrap());
        let mut src = SyntheticSource::new(5, &comps, &priors, &dims, &arrivals, &schedule);
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        let mut buf = Vec::new();
        for t in 1..=30_000 {
            let l = src.training(0, t, &mut buf).unwrap();
            sums[l] += buf.iter().sum::<f64>();
            counts[l] += buf.len();
        }
        for h in 0..3 {
            let n = counts[h] as f64;
            let sigma = comps[h].std;
            assert!((sums[h] / n - comps[h].mean).abs() < 3.0 * sigma / libm::sqrt(n));
        }
    }

    #[test]
    fn arrival_streams_are_uncorrelated() {
        let mut a = stream(9, 0, Purpose::TrainArrival);
        let mut b = stream(9, 0, Purpose::PredArrival);
        let mut c = stream(9, 1, Purpose::TrainArrival);
        let n = 100_000;
        let (mut sa, mut sb, mut sc, mut sab, mut sac) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = f64::from(u8::from(a.random::<f64>() < 0.7));
            let y = f64::from(u8::from(b.random::<f64>() < 0.8));
            let z = f64::from(u8::from(c.random::<f64>() < 0.7));
            sa += x;
            sb += y;
            sc += z;
            sab += x * y;
            sac += x * z;
        }
        let n = n as f64;
        let corr = |sxy: f64, sx: f64, sy: f64| {
            let cov = sxy / n - sx / n * sy / n;
            let vx = sx / n * (1.0 - sx / n);
            let vy = sy / n * (1.0 - sy / n);
            cov / libm::sqrt(vx * vy)
        };
        assert!(corr(sab, sa, sb).abs() < 0.01);
        assert!(corr(sac, sa, sc).abs() < 0.01);
    }

    #[test]
    fn same_seed_reproduces_stream() {
        let comps = components();
        let priors = vec![vec![0.3, 0.4, 0.3]];
        let dims = vec![4];
        let arrivals = vec![ArrivalConfig::new(0.7, 0.8).unwrap()];
        let schedule = DriftSchedule::stationary(0, GenerativeTable::new(vec![vec![0, 1, 2]]).unwrap());
        let mut s1 = SyntheticSource::new(42, &comps, &priors, &dims, &arrivals, &schedule);
        let mut s2 = SyntheticSource::new(42, &comps, &priors, &dims, &arrivals, &schedule);
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        for t in 1..500 {
            assert_eq!(s1.training(0, t, &mut b1), s2.training(0, t, &mut b2));
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn replay_validation_and_lookup() {
        let rec = |agent, time, kind, features: Vec<f64>, label| FeatureRecord {
            agent,
            time,
            kind,
            features,
            label,
        };
        let records = vec![
            rec(0, 1, RecordKind::Training, vec![1.0, 2.0], Some(1)),
            rec(0, 1, RecordKind::Prediction, vec![0.5, 0.5], None),
            rec(1, 3, RecordKind::Prediction, vec![7.0], None),
        ];
        let mut src = ReplaySource::new(records.clone(), &[2, 1], 3).unwrap();
        let mut buf = Vec::new();
        assert_eq!(src.training(0, 1, &mut buf), Some(1));
        assert_eq!(buf, vec![1.0, 2.0]);
        assert!(src.prediction(0, 1, &mut buf));
        assert!(!src.prediction(1, 2, &mut buf));
        assert!(src.prediction(1, 3, &mut buf));
        assert_eq!(buf, vec![7.0]);

        let mut bad = records.clone();
        bad[2].features = vec![1.0, 2.0];
        assert!(matches!(
            ReplaySource::new(bad, &[2, 1], 3),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = records.clone();
        bad[0].label = Some(3);
        assert!(matches!(
            ReplaySource::new(bad, &[2, 1], 3),
            Err(Error::UnknownLabel { row: 0, label: 3 })
        ));
        let mut bad = records;
        bad[2].time = 0;
        assert!(matches!(
            ReplaySource::new(bad, &[2, 1], 3),
            Err(Error::NonMonotoneTime { row: 2, .. })
        ));
    }

    #[test]
    fn label_draw_handles_rounding_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(draw_label(&[0.5, 0.5], &mut rng) < 2);
        }
    }

    #[test]
    fn mixture_moments() {
        let comps = components();
        let m = FeatureMoments::of_mixture(&comps, &[0, 1, 2], &[0.3, 0.4, 0.3], 4);
        assert_abs_diff_eq!(m.mean[0], 2.0, epsilon = 1e-12);
        assert_eq!(m.mean[4], 1.0);
        let s = 0.3 * 1.01 + 0.4 * 4.04 + 0.3 * 9.09;
        assert_abs_diff_eq!(m.norm_sq(), 4.0 * s + 1.0, epsilon = 1e-12);
    }
}
