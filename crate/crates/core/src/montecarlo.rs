//! Randomized studies: sample many networks, rank every EMP on each, and
//! tally which pattern wins.
//!
//! Network `k` of a study draws all of its randomness from stream `k` of the
//! master seed (see [`stream_rng`]), so reports do not depend on thread
//! scheduling and any single network can be regenerated on its own.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emp::{direct_modules, enumerate_branch_emps, enumerate_cycle_emps_with, hybrid_emps, CycleOptions, Emp};
use crate::error::{Error, Result};
use crate::infoengine::{Evaluator, SignalConfig};
use crate::netmodel::{EdgeId, NetworkModel};
use crate::simoracle::stream_rng;

/// Consecutive unstable draws tolerated before a study gives up.
pub const MAX_REJECTIONS: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Fixed {
        value: f64,
    },
    /// Uniform on `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Dist {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Dist::Uniform { lo, hi }
    }

    pub fn fixed(value: f64) -> Self {
        Dist::Fixed { value }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            Dist::Fixed { value } if value.is_finite() => Ok(()),
            Dist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => Err(Error::Config(format!("invalid {what} distribution {self:?}"))),
        }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            Dist::Fixed { value } => value,
            Dist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }

    /// Draws until the value is strictly positive (variances).
    fn sample_positive(&self, rng: &mut ChaCha20Rng) -> f64 {
        loop {
            let v = self.sample(rng);
            if v > 0.0 {
                return v;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyTopology {
    Branch {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    /// The six-node branch/loop network of [`NetworkModel::hybrid_example`].
    Hybrid,
}

impl StudyTopology {
    pub fn nodes(&self) -> usize {
        match *self {
            StudyTopology::Branch { n } | StudyTopology::Cycle { n } => n,
            StudyTopology::Hybrid => 6,
        }
    }

    fn edge_count(&self) -> usize {
        match *self {
            StudyTopology::Branch { n } => n - 1,
            StudyTopology::Cycle { n } => n,
            StudyTopology::Hybrid => 6,
        }
    }

    fn build(&self, gains: &[f64]) -> Result<NetworkModel> {
        match *self {
            StudyTopology::Branch { n } => NetworkModel::branch(n, gains),
            StudyTopology::Cycle { n } => NetworkModel::cycle(n, gains),
            StudyTopology::Hybrid => NetworkModel::hybrid_example(gains.try_into().unwrap()),
        }
    }
}

/// Which candidate patterns a study ranks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpSource {
    #[default]
    Minimal,
    /// Even cycles: also the single-doubled-node family.
    WithDoubled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub topology: StudyTopology,
    pub num_networks: usize,
    pub gains: Dist,
    /// Input variance per node.
    pub sigma2: Dist,
    /// Noise variance per node.
    pub lambda: Dist,
    pub master_seed: u64,
    #[serde(default)]
    pub emp_source: EmpSource,
}

impl StudySpec {
    /// Random branch with every gain and variance from `U(0, 50)`.
    pub fn random_branch(n: usize, num_networks: usize, master_seed: u64) -> Self {
        Self {
            topology: StudyTopology::Branch { n },
            num_networks,
            gains: Dist::uniform(0.0, 50.0),
            sigma2: Dist::uniform(0.0, 50.0),
            lambda: Dist::uniform(0.0, 50.0),
            master_seed,
            emp_source: EmpSource::Minimal,
        }
    }

    /// Random cycle with gains from `U[-1, 1]`, `σ² = 1`, `λ = 0.01`.
    pub fn random_cycle(n: usize, num_networks: usize, master_seed: u64) -> Self {
        Self {
            topology: StudyTopology::Cycle { n },
            num_networks,
            gains: Dist::uniform(-1.0, 1.0),
            sigma2: Dist::fixed(1.0),
            lambda: Dist::fixed(0.01),
            master_seed,
            emp_source: EmpSource::Minimal,
        }
    }

    /// Random six-node hybrid network, gains `U[-1, 1]`, `σ² = 1`, `λ = 0.01`.
    pub fn random_hybrid(num_networks: usize, master_seed: u64) -> Self {
        Self { topology: StudyTopology::Hybrid, ..Self::random_cycle(3, num_networks, master_seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_networks == 0 {
            return Err(Error::Config("a study needs at least one network".into()));
        }
        if let StudyTopology::Branch { n } | StudyTopology::Cycle { n } = self.topology {
            if n < 2 {
                return Err(Error::InvalidSize("n must be ≥ 2".into()));
            }
        }
        self.gains.validate("gain")?;
        self.sigma2.validate("input variance")?;
        self.lambda.validate("noise variance")?;
        for (what, d) in [("input variance", self.sigma2), ("noise variance", self.lambda)] {
            let ok = match d {
                Dist::Fixed { value } => value > 0.0,
                Dist::Uniform { hi, .. } => hi > 0.0,
            };
            if !ok {
                return Err(Error::Config(format!("{what} distribution has no positive support")));
            }
        }
        Ok(())
    }

    /// Candidate patterns, in enumeration order.
    pub fn emps(&self) -> Result<Vec<Emp>> {
        match self.topology {
            StudyTopology::Branch { n } => enumerate_branch_emps(n),
            StudyTopology::Cycle { n } => enumerate_cycle_emps_with(
                n,
                CycleOptions { even_doubled_family: self.emp_source == EmpSource::WithDoubled },
            ),
            StudyTopology::Hybrid => Ok(hybrid_emps()),
        }
    }
}

/// Network `index` of the study together with its signal configuration.
///
/// Gains are drawn in edge listing order and the whole gain vector is
/// redrawn while the network is unstable; then input variances and noise
/// variances per node.
pub fn sample_case(spec: &StudySpec, index: usize) -> Result<(NetworkModel, SignalConfig)> {
    let mut rng = stream_rng(spec.master_seed, index as u64);
    let mut model = None;
    for _ in 0..MAX_REJECTIONS {
        let gains: Vec<f64> = (0..spec.topology.edge_count()).map(|_| spec.gains.sample(&mut rng)).collect();
        match spec.topology.build(&gains) {
            Ok(m) => {
                model = Some(m);
                break;
            }
            Err(Error::Unstable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let model = model
        .ok_or_else(|| Error::Sampling(format!("{MAX_REJECTIONS} consecutive unstable draws for network {index}")))?;
    let n = model.n();
    let sigma2 = (1..=n).map(|i| (i, spec.sigma2.sample_positive(&mut rng))).collect();
    let lambda = (1..=n).map(|i| (i, spec.lambda.sample_positive(&mut rng))).collect();
    Ok((model, SignalConfig::new(sigma2, lambda)?))
}

pub fn sample_network(spec: &StudySpec, index: usize) -> Result<NetworkModel> {
    sample_case(spec, index).map(|(m, _)| m)
}

/// Per-network result of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkOutcome {
    /// Index into the candidate list of the smallest-trace pattern; `None`
    /// when every pattern is singular.
    pub winner: Option<usize>,
    /// `tr(P)` per candidate, `+∞` when singular (serialized as null).
    pub traces: Vec<f64>,
    pub largest_module: Option<EdgeId>,
    /// Whether the largest-magnitude module is a direct module of the winner.
    pub largest_is_direct: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: StudySpec,
    pub labels: Vec<String>,
    pub wins: Vec<usize>,
    /// Share of non-degenerate networks, in percent.
    pub percentages: Vec<f64>,
    pub degenerate: usize,
    /// Among non-degenerate networks, how often the largest module was a
    /// direct module of the winner.
    pub largest_direct_rate: f64,
    pub outcomes: Vec<NetworkOutcome>,
    pub runtime_secs: f64,
}

impl StudyReport {
    pub fn wins_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|k| self.wins[k])
    }

    pub fn percent_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|k| self.percentages[k])
    }

    /// Label with the most wins; ties go to the earlier pattern.
    pub fn modal_winner(&self) -> Option<&str> {
        let best = self.wins.iter().enumerate().fold(None, |acc: Option<(usize, usize)>, (k, &w)| match acc {
            Some((_, bw)) if bw >= w => acc,
            _ => Some((k, w)),
        })?;
        (best.1 > 0).then(|| self.labels[best.0].as_str())
    }

    /// `label,wins,percent` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["emp_label", "wins", "percent"]).unwrap();
        for ((l, n), p) in self.labels.iter().zip(&self.wins).zip(&self.percentages) {
            w.write_record([l.clone(), n.to_string(), format!("{p:.4}")]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn evaluate_network(model: &NetworkModel, config: &SignalConfig, emps: &[Emp]) -> Result<NetworkOutcome> {
    let evaluator = Evaluator::new(model)?;
    let mut traces = Vec::with_capacity(emps.len());
    let mut winner: Option<usize> = None;
    for (k, emp) in emps.iter().enumerate() {
        let r = evaluator.evaluate(emp, config)?;
        let t = if r.singular { f64::INFINITY } else { r.trace };
        if t.is_finite() && winner.is_none_or(|w| t < traces[w]) {
            winner = Some(k);
        }
        traces.push(t);
    }
    let largest_module = model.largest_module();
    let largest_is_direct = match (winner, largest_module) {
        (Some(w), Some(e)) => Some(direct_modules(&emps[w], model).contains(&e)),
        _ => None,
    };
    Ok(NetworkOutcome { winner, traces, largest_module, largest_is_direct })
}

pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let start = Instant::now();
    let emps = spec.emps()?;
    let outcomes: Vec<NetworkOutcome> = (0..spec.num_networks)
        .into_par_iter()
        .map(|k| {
            let (model, config) = sample_case(spec, k)?;
            evaluate_network(&model, &config, &emps)
        })
        .collect::<Result<_>>()?;

    let mut wins = vec![0usize; emps.len()];
    let mut degenerate = 0;
    let mut direct_hits = 0;
    for o in &outcomes {
        match o.winner {
            Some(w) => wins[w] += 1,
            None => degenerate += 1,
        }
        if o.largest_is_direct == Some(true) {
            direct_hits += 1;
        }
    }
    let valid = spec.num_networks - degenerate;
    let pct = |c: usize| if valid == 0 { 0.0 } else { 100.0 * c as f64 / valid as f64 };
    Ok(StudyReport {
        spec: spec.clone(),
        labels: emps.iter().map(|e| e.label().unwrap_or_default().to_string()).collect(),
        percentages: wins.iter().map(|&w| pct(w)).collect(),
        wins,
        degenerate,
        largest_direct_rate: pct(direct_hits) / 100.0,
        outcomes,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub hits: usize,
    pub total: usize,
    pub hit_rate: f64,
    /// `max(tr) / min(tr)` of the two alternating patterns, per network.
    pub ratios: Vec<f64>,
    pub median_ratio: f64,
    /// Share of networks whose ratio exceeds 100.
    pub share_above_100: f64,
}

/// On 4-node cycles, predicts the odd-excited pattern wins iff
/// `(a21 a43)² > (a32 a14)²` and scores the prediction against the ranking.
/// Exact trace ties count as hits.
pub fn check_4cycle_conjecture(spec: &StudySpec) -> Result<ConjectureReport> {
    if spec.topology != (StudyTopology::Cycle { n: 4 }) {
        return Err(Error::Config("the alternating-pattern conjecture applies to 4-node cycles".into()));
    }
    let spec = StudySpec { emp_source: EmpSource::Minimal, ..spec.clone() };
    let report = run_study(&spec)?;
    let mut hits = 0;
    let mut total = 0;
    let mut ratios = Vec::new();
    for (k, o) in report.outcomes.iter().enumerate() {
        let Some(_) = o.winner else { continue };
        let model = sample_network(&spec, k)?;
        let g = |f, t| model.gain(EdgeId::new(f, t)).unwrap();
        let odd = (g(1, 2) * g(3, 4)).powi(2);
        let even = (g(2, 3) * g(4, 1)).powi(2);
        let (t1, t2) = (o.traces[0], o.traces[1]);
        total += 1;
        let hit = if t1 == t2 {
            true
        } else if odd > even {
            t1 < t2
        } else {
            t2 < t1
        };
        if hit {
            hits += 1;
        }
        if t1.is_finite() && t2.is_finite() {
            ratios.push(t1.max(t2) / t1.min(t2));
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median_ratio = median(&sorted);
    let share_above_100 = sorted.iter().filter(|&&r| r > 100.0).count() as f64 / sorted.len().max(1) as f64;
    Ok(ConjectureReport {
        hits,
        total,
        hit_rate: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
        ratios,
        median_ratio,
        share_above_100,
    })
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_never_resample() {
        let spec = StudySpec::random_branch(5, 10, 7);
        for k in 0..10 {
            let a = sample_network(&spec, k).unwrap();
            assert_eq!(a, sample_network(&spec, k).unwrap());
        }
    }

    #[test]
    fn single_network_study() {
        let report = run_study(&StudySpec::random_branch(4, 1, 3)).unwrap();
        assert_eq!(report.wins.iter().sum::<usize>(), 1);
        assert!(report.percentages.contains(&100.0));
        assert_eq!(report.degenerate, 0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = StudySpec::random_cycle(3, 0, 1);
        assert!(run_study(&spec).is_err());
        spec.num_networks = 5;
        spec.gains = Dist::uniform(1.0, -1.0);
        assert!(run_study(&spec).is_err());
        assert!(check_4cycle_conjecture(&StudySpec::random_cycle(3, 5, 1)).is_err());
    }

    #[test]
    fn unsatisfiable_sampling() {
        let mut spec = StudySpec::random_cycle(2, 1, 1);
        spec.gains = Dist::uniform(2.0, 3.0);
        assert!(matches!(sample_network(&spec, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn spec_roundtrips_json() {
        let spec = StudySpec::random_hybrid(10, 99);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<StudySpec>(&text).unwrap(), spec);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 5.0]), 2.5);
    }
}
