//! Reference results: deterministic trace/variance tables compared cell by
//! cell, and randomized studies compared through distribution bands.
//!
//! Published values are embedded verbatim. Each report is a flat list of
//! checks; a table passes when every check does.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::closedform::{twonode_emp, twonode_variances, EmpId, TwoNodeCycleParams};
use crate::emp::{direct_modules, enumerate_branch_emps, enumerate_cycle_emps, hybrid_emps, Emp};
use crate::error::{Error, Result};
use crate::infoengine::{information_matrix, rank_emps, Evaluator, SignalConfig};
use crate::montecarlo::{check_4cycle_conjecture, run_study, StudyReport, StudySpec};
use crate::netmodel::{EdgeId, NetworkModel};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_NETWORKS: usize = 2000;

/// Absolute tolerance on the 2-node variances.
pub const TABLE1_TOL: f64 = 0.01;
/// Absolute tolerance on the 3-node cycle traces.
pub const TABLE4_TOL: f64 = 0.001;
/// Absolute tolerance on the 4-node branch traces (two printed decimals).
pub const TABLE6_TOL: f64 = 0.01;
/// Relative tolerance on the hybrid-network traces.
pub const TABLE12_TOL: f64 = 0.005;
/// Relative tolerance on the winning traces of the tripled-module variants.
pub const TABLE13_TOL: f64 = 0.01;
/// Claimed best-to-worst ratio of the hybrid network and the relative slack
/// granted to "approximately". The tabulated traces themselves give 65.6,
/// 12.5% below the claim, so anything tighter than that would reject the
/// source's own numbers.
pub const TABLE12_RATIO: f64 = 75.0;
pub const TABLE12_RATIO_TOL: f64 = 0.15;
/// Minimum half-width of a study band, in percentage points.
pub const BAND_MIN_PP: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TableId {
    T1,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T11,
    T12,
    T13,
    T14,
}

impl TableId {
    pub const ALL: [TableId; 13] = [
        TableId::T1,
        TableId::T3,
        TableId::T4,
        TableId::T5,
        TableId::T6,
        TableId::T7,
        TableId::T8,
        TableId::T9,
        TableId::T10,
        TableId::T11,
        TableId::T12,
        TableId::T13,
        TableId::T14,
    ];

    pub fn number(self) -> u32 {
        match self {
            TableId::T1 => 1,
            TableId::T3 => 3,
            TableId::T4 => 4,
            TableId::T5 => 5,
            TableId::T6 => 6,
            TableId::T7 => 7,
            TableId::T8 => 8,
            TableId::T9 => 9,
            TableId::T10 => 10,
            TableId::T11 => 11,
            TableId::T12 => 12,
            TableId::T13 => 13,
            TableId::T14 => 14,
        }
    }

    /// Tables produced by random studies; these take a network count and seed.
    pub fn is_statistical(self) -> bool {
        matches!(
            self,
            TableId::T3
                | TableId::T5
                | TableId::T7
                | TableId::T8
                | TableId::T9
                | TableId::T10
                | TableId::T11
                | TableId::T14
        )
    }

    pub fn title(self) -> &'static str {
        match self {
            TableId::T1 => "2-node cycle: variances × SNR, three cases, all EMPs",
            TableId::T3 => "3-node cycle: winning EMP counts, random gains",
            TableId::T4 => "3-node cycle: traces for seven gain settings, EMPs VII–XII",
            TableId::T5 => "4-node cycle: direct-module conjecture",
            TableId::T6 => "4-node branch: effect of the direct module",
            TableId::T7 => "4-node branch: winning EMP shares",
            TableId::T8 => "5-node branch: winning EMP shares",
            TableId::T9 => "6-node branch: winning EMP shares",
            TableId::T10 => "7-node branch: winning EMP shares",
            TableId::T11 => "8-node branch: winning EMP shares",
            TableId::T12 => "hybrid network: traces, fully symmetric",
            TableId::T13 => "hybrid network: one module tripled",
            TableId::T14 => "hybrid network: winning EMP counts, random gains",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "table{}", self.number())
    }
}

impl FromStr for TableId {
    type Err = Error;

    /// Accepts `table7`, `7`.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("table").unwrap_or(s);
        digits
            .parse::<u32>()
            .ok()
            .and_then(|n| TableId::ALL.into_iter().find(|t| t.number() == n))
            .ok_or_else(|| Error::UnknownTable(s.to_string()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: impl Into<String>, observed: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), expected: expected.into(), observed: observed.into(), pass }
    }

    fn abs(name: impl Into<String>, paper: f64, observed: f64, tol: f64) -> Self {
        Self::new(name, format!("{paper} ± {tol}"), format!("{observed:.6}"), (observed - paper).abs() <= tol)
    }

    fn rel(name: impl Into<String>, paper: f64, observed: f64, tol: f64) -> Self {
        Self::new(
            name,
            format!("{paper} ± {:.2}%", 100.0 * tol),
            format!("{observed:.6} ({:+.2}%)", 100.0 * (observed / paper - 1.0)),
            (observed - paper).abs() <= tol * paper.abs(),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub id: TableId,
    pub title: String,
    pub checks: Vec<Check>,
    pub runtime_secs: f64,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_pretty(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
        let we = self.checks.iter().map(|c| c.expected.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{} — {}\n", self.id, self.title);
        out.push_str(&format!("{:<w$}  {:<we$}  {:<24}  verdict\n", "check", "expected", "observed"));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<w$}  {:<we$}  {:<24}  {}\n",
                c.name,
                c.expected,
                c.observed,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{}: {} of {} checks passed ({:.2} s)\n",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len() - failed,
            self.checks.len(),
            self.runtime_secs
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "expected", "observed", "pass"]).unwrap();
        for c in &self.checks {
            w.write_record([&c.name, &c.expected, &c.observed, &c.pass.to_string()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReproduceOptions {
    pub networks: usize,
    pub seed: u64,
    /// Overrides the table's default tolerance.
    pub tol: Option<f64>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self { networks: DEFAULT_NETWORKS, seed: DEFAULT_SEED, tol: None }
    }
}

pub fn reproduce_table(id: TableId, opts: &ReproduceOptions) -> Result<TableReport> {
    let start = Instant::now();
    let checks = match id {
        TableId::T1 => table1(opts.tol.unwrap_or(TABLE1_TOL))?,
        TableId::T4 => table4(opts.tol.unwrap_or(TABLE4_TOL))?,
        TableId::T6 => table6(opts.tol.unwrap_or(TABLE6_TOL))?,
        TableId::T12 => table12(opts.tol.unwrap_or(TABLE12_TOL))?,
        TableId::T13 => table13(opts.tol.unwrap_or(TABLE13_TOL))?,
        TableId::T5 => table5(opts)?,
        _ => study_table(id, opts)?,
    };
    Ok(TableReport { id, title: id.title().to_string(), checks, runtime_secs: start.elapsed().as_secs_f64() })
}

// ---------------------------------------------------------------- table 1

/// `(a12, a21)` for the three cases.
pub const TABLE1_CASES: [(f64, f64); 3] = [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5)];

/// Per case: `(var a12, var a21)` for EMPs I–IV.
pub const TABLE1_PAPER: [[(f64, f64); 4]; 3] = [
    [(0.92, 3.64), (3.64, 0.92), (3.64, 0.92), (0.92, 3.64)],
    [(0.66, 4.20), (0.41, 0.65), (0.41, 0.65), (0.66, 4.20)],
    [(0.65, 0.41), (4.20, 0.66), (4.20, 0.66), (0.65, 0.41)],
];

/// One variance of the 2-node table by both routes, at unit SNR.
#[derive(Clone, Copy, Debug)]
pub struct Table1Cell {
    pub case: usize,
    pub emp: EmpId,
    pub edge: EdgeId,
    pub paper: f64,
    pub closed_form: f64,
    pub engine: f64,
}

pub fn table1_cells() -> Result<Vec<Table1Cell>> {
    let mut cells = Vec::new();
    for (c, &(a12, a21)) in TABLE1_CASES.iter().enumerate() {
        let p = TwoNodeCycleParams::uniform(a12, a21, 1.0, 1.0);
        let model = p.model()?;
        let config = p.config()?;
        for (e, id) in EmpId::ALL.into_iter().enumerate() {
            let (c12, c21) = twonode_variances(id, &p)?;
            let r = information_matrix(&model, &twonode_emp(id), &config)?;
            let (p12, p21) = TABLE1_PAPER[c][e];
            for (edge, paper, closed_form) in [(EdgeId::new(2, 1), p12, c12), (EdgeId::new(1, 2), p21, c21)] {
                let engine = r.variance(edge).unwrap();
                cells.push(Table1Cell { case: c + 1, emp: id, edge, paper, closed_form, engine });
            }
        }
    }
    Ok(cells)
}

fn table1(tol: f64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for cell in table1_cells()? {
        let name = format!("case {} {} var({})", cell.case, cell.emp, cell.edge);
        checks.push(Check::abs(format!("{name} closed form"), cell.paper, cell.closed_form, tol));
        checks.push(Check::abs(format!("{name} engine"), cell.paper, cell.engine, tol));
    }
    Ok(checks)
}

// ---------------------------------------------------------------- table 4

/// `(a13, a21, a32)` per experiment.
pub const TABLE4_GAINS: [(f64, f64, f64); 7] = [
    (0.50, 0.50, 0.50),
    (1.00, 0.50, 0.25),
    (1.00, 0.25, 0.50),
    (0.50, 1.00, 0.25),
    (0.25, 1.00, 0.50),
    (0.25, 0.50, 1.00),
    (0.50, 0.25, 1.00),
];

pub const TABLE4_EMPS: [&str; 6] = ["VII", "VIII", "IX", "X", "XI", "XII"];

pub const TABLE4_PAPER: [[f64; 6]; 7] = [
    [0.083, 0.131, 0.083, 0.131, 0.083, 0.131],
    [0.349, 0.031, 0.027, 0.643, 0.099, 0.101],
    [0.099, 0.101, 0.027, 0.643, 0.349, 0.031],
    [0.349, 0.031, 0.099, 0.101, 0.027, 0.643],
    [0.099, 0.109, 0.349, 0.031, 0.027, 0.643],
    [0.027, 0.643, 0.349, 0.031, 0.099, 0.109],
    [0.027, 0.643, 0.099, 0.109, 0.349, 0.031],
];

/// Boldfaced (best) EMPs per experiment.
pub const TABLE4_BEST: [&[&str]; 7] = [&["VII", "IX", "XI"], &["IX"], &["IX"], &["XI"], &["XI"], &["VII"], &["VII"]];

pub fn table4_model(exp: usize) -> Result<NetworkModel> {
    let (a13, a21, a32) = TABLE4_GAINS[exp];
    NetworkModel::cycle(3, &[a21, a32, a13])
}

fn emps_by_label(all: Vec<Emp>, labels: &[&str]) -> Vec<Emp> {
    labels.iter().map(|l| all.iter().find(|e| e.label() == Some(l)).cloned().expect("label present")).collect()
}

/// True when some module of maximal magnitude is a direct module of `emp`.
pub fn largest_module_is_direct(emp: &Emp, model: &NetworkModel) -> bool {
    let max = model.edges().iter().map(|e| e.gain.abs()).fold(0.0, f64::max);
    let direct = direct_modules(emp, model);
    model.edges().iter().any(|e| e.gain.abs() == max && direct.contains(&e.id()))
}

/// Traces of EMPs VII–XII for experiment `exp` (0-based).
pub fn table4_traces(exp: usize) -> Result<Vec<f64>> {
    let model = table4_model(exp)?;
    let config = SignalConfig::uniform(3, 1.0, 0.01)?;
    let ev = Evaluator::new(&model)?;
    emps_by_label(enumerate_cycle_emps(3)?, &TABLE4_EMPS)
        .iter()
        .map(|e| ev.evaluate(e, &config).map(|r| r.trace))
        .collect()
}

fn table4(tol: f64) -> Result<Vec<Check>> {
    let emps = emps_by_label(enumerate_cycle_emps(3)?, &TABLE4_EMPS);
    let mut checks = Vec::new();
    for exp in 0..TABLE4_GAINS.len() {
        let traces = table4_traces(exp)?;
        for (k, label) in TABLE4_EMPS.iter().enumerate() {
            checks.push(Check::abs(format!("exp {} {label}", exp + 1), TABLE4_PAPER[exp][k], traces[k], tol));
        }
        let best = argmin(&traces);
        let winner = TABLE4_EMPS[best];
        checks.push(Check::new(
            format!("exp {} winner", exp + 1),
            TABLE4_BEST[exp].join("/"),
            winner,
            TABLE4_BEST[exp].contains(&winner),
        ));
        let model = table4_model(exp)?;
        let direct = largest_module_is_direct(&emps[best], &model);
        checks.push(Check::new(
            format!("exp {} winner has largest module direct", exp + 1),
            "true",
            direct.to_string(),
            direct,
        ));
    }
    Ok(checks)
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = k;
        }
    }
    best
}

// ---------------------------------------------------------------- table 6

pub const TABLE6_GAINS: [[f64; 3]; 3] = [[20.0, 1.0, 1.0], [1.0, 1.0, 20.0], [1.0, 20.0, 1.0]];
pub const TABLE6_PAPER: [[f64; 4]; 3] = [[0.03, 2.01, 4.04, 0.01], [0.03, 2.01, 0.01, 4.04], [8.03, 0.007, 4.02, 4.02]];
/// The setting is only described as uniformly excited; `σ² = 1, λ = 0.01`
/// (the setting of the other trace tables) reproduces every printed cell.
pub const TABLE6_SIGMA2: f64 = 1.0;
pub const TABLE6_LAMBDA: f64 = 0.01;

fn table6(tol: f64) -> Result<Vec<Check>> {
    let labels = ["I", "II", "III", "IV"];
    let config = SignalConfig::uniform(4, TABLE6_SIGMA2, TABLE6_LAMBDA)?;
    let mut checks = Vec::new();
    for (row, gains) in TABLE6_GAINS.iter().enumerate() {
        let model = NetworkModel::branch(4, gains)?;
        let ranked = rank_emps(&model, &enumerate_branch_emps(4)?, &config)?;
        let mut traces = [0.0; 4];
        for r in &ranked {
            traces[r.index] = r.result.trace;
        }
        let name = format!("({}, {}, {})", gains[0], gains[1], gains[2]);
        for (k, label) in labels.iter().enumerate() {
            checks.push(Check::abs(format!("{name} {label}"), TABLE6_PAPER[row][k], traces[k], tol));
        }
        let expected_best = labels[argmin(&TABLE6_PAPER[row])];
        let best = labels[ranked[0].index];
        checks.push(Check::new(format!("{name} best"), expected_best, best, best == expected_best));
        // ordering of the distinct printed values must be preserved
        let mut consistent = true;
        for i in 0..4 {
            for j in 0..4 {
                let (pi, pj) = (TABLE6_PAPER[row][i], TABLE6_PAPER[row][j]);
                if pi + tol < pj && traces[i] >= traces[j] {
                    consistent = false;
                }
            }
        }
        checks.push(Check::new(
            format!("{name} ordering"),
            "as printed",
            if consistent { "same" } else { "differs" },
            consistent,
        ));
    }
    Ok(checks)
}

// ---------------------------------------------------------------- tables 12, 13

pub const HYBRID_GAIN: f64 = 0.3;

/// Traces of hybrid EMPs 1–24.
#[allow(clippy::approx_constant)]
pub const TABLE12_PAPER: [f64; 24] = [
    0.755, 1.646, 15.87, 2.484, 0.438, 0.721, 0.435, 0.631, 0.242, 2.419, 1.515, 0.626, 0.795, 1.448, 13.656, 2.718,
    0.958, 1.268, 0.445, 0.678, 0.290, 2.254, 1.348, 1.019,
];

/// Tripled module, winning EMP and its trace.
pub const TABLE13_PAPER: [(EdgeId, &str, f64); 6] = [
    (EdgeId { from: 1, to: 2 }, "21", 0.1607),
    (EdgeId { from: 2, to: 3 }, "9", 0.1027),
    (EdgeId { from: 5, to: 3 }, "9", 0.1565),
    (EdgeId { from: 3, to: 4 }, "8", 0.1383),
    (EdgeId { from: 4, to: 5 }, "7", 0.1609),
    (EdgeId { from: 5, to: 6 }, "9", 0.1976),
];

pub fn hybrid_symmetric() -> Result<NetworkModel> {
    NetworkModel::hybrid_example(&[HYBRID_GAIN; 6])
}

pub fn hybrid_config() -> Result<SignalConfig> {
    SignalConfig::uniform(6, 1.0, 0.01)
}

/// Traces of all 24 hybrid EMPs in label order.
pub fn hybrid_traces(model: &NetworkModel) -> Result<Vec<f64>> {
    let ev = Evaluator::new(model)?;
    let config = hybrid_config()?;
    hybrid_emps().iter().map(|e| ev.evaluate(e, &config).map(|r| r.trace)).collect()
}

fn table12(tol: f64) -> Result<Vec<Check>> {
    let traces = hybrid_traces(&hybrid_symmetric()?)?;
    let mut checks: Vec<Check> = traces
        .iter()
        .zip(TABLE12_PAPER)
        .enumerate()
        .map(|(k, (&t, p))| Check::rel(format!("EMP {}", k + 1), p, t, tol))
        .collect();
    let best = argmin(&traces);
    let worst = (0..traces.len()).fold(0, |w, k| if traces[k] > traces[w] { k } else { w });
    checks.push(Check::new("best EMP", "9", (best + 1).to_string(), best == 8));
    checks.push(Check::new("worst EMP", "3", (worst + 1).to_string(), worst == 2));
    let ratio = traces[worst] / traces[best];
    checks.push(Check::new(
        "worst/best ratio",
        format!("≈{TABLE12_RATIO} ± {:.0}%", 100.0 * TABLE12_RATIO_TOL),
        format!("{ratio:.2}"),
        (ratio / TABLE12_RATIO - 1.0).abs() <= TABLE12_RATIO_TOL,
    ));
    Ok(checks)
}

fn table13(tol: f64) -> Result<Vec<Check>> {
    let base = hybrid_symmetric()?;
    let emps = hybrid_emps();
    let mut checks = Vec::new();
    for (edge, paper_emp, paper_trace) in TABLE13_PAPER {
        let model = base.with_gain(edge, 3.0 * HYBRID_GAIN)?;
        let traces = hybrid_traces(&model)?;
        let best = argmin(&traces);
        let label = emps[best].label().unwrap();
        checks.push(Check::new(format!("{edge} tripled: winner"), paper_emp, label, label == paper_emp));
        checks.push(Check::rel(format!("{edge} tripled: winning trace"), paper_trace, traces[best], tol));
        let direct = direct_modules(&emps[best], &model).contains(&edge);
        checks.push(Check::new(format!("{edge} tripled: largest module direct"), "true", direct.to_string(), direct));
    }
    Ok(checks)
}

// ---------------------------------------------------------------- studies

/// Published shares in percent, in EMP label order.
fn paper_shares(id: TableId) -> Vec<f64> {
    let counts_per_mille = |c: &[f64]| c.iter().map(|v| v / 10.0).collect();
    match id {
        TableId::T3 => counts_per_mille(&[0., 0., 0., 0., 0., 0., 236., 117., 201., 105., 238., 103.]),
        TableId::T7 => vec![1.15, 87.94, 5.50, 5.41],
        TableId::T8 => vec![2.02, 46.10, 1.15, 45.79, 0.69, 1.63, 0.68, 1.94],
        TableId::T9 => {
            vec![0.40, 16.63, 0.26, 60.33, 0.27, 2.39, 0.34, 17.66, 0.10, 0.37, 0.10, 0.27, 0.17, 0.25, 0.13, 0.33]
        }
        TableId::T10 => vec![
            0.08, 5.53, 0.03, 42.19, 0.01, 1.34, 0.10, 41.96, 0.07, 0.50, 0.01, 0.95, 0.05, 0.50, 0.17, 5.90, 0.01,
            0.16, 0.01, 0.09, 0.03, 0.01, 0.02, 0.02, 0.01, 0.03, 0.02, 0.06, 0.01, 0.05, 0.01, 0.07,
        ],
        TableId::T11 => vec![
            0.02, 1.69, 0.01, 21.37, 0.01, 0.61, 0.01, 50.09, 0.01, 0.26, 0.01, 1.53, 0.03, 0.33, 0.03, 20.19, 0.01,
            0.09, 0.00, 0.20, 0.01, 0.04, 0.01, 0.51, 0.00, 0.23, 0.02, 0.41, 0.03, 0.15, 0.01, 1.77, 0.00, 0.04, 0.00,
            0.02, 0.00, 0.02, 0.01, 0.03, 0.00, 0.00, 0.02, 0.01, 0.00, 0.00, 0.01, 0.00, 0.01, 0.00, 0.00, 0.02, 0.01,
            0.00, 0.00, 0.03, 0.00, 0.01, 0.01, 0.00, 0.01, 0.01, 0.00, 0.04,
        ],
        TableId::T14 => counts_per_mille(&[
            0., 0., 0., 9., 23., 24., 27., 124., 197., 6., 13., 125., 10., 2., 0., 3., 1., 1., 74., 125., 124., 17.,
            36., 59.,
        ]),
        _ => unreachable!("not a study table"),
    }
}

/// Study specification behind a statistical table.
pub fn study_spec(id: TableId, networks: usize, seed: u64) -> Result<StudySpec> {
    Ok(match id {
        TableId::T3 => StudySpec::random_cycle(3, networks, seed),
        TableId::T5 => StudySpec::random_cycle(4, networks, seed),
        TableId::T7 | TableId::T8 | TableId::T9 | TableId::T10 | TableId::T11 => {
            StudySpec::random_branch(id.number() as usize - 3, networks, seed)
        }
        TableId::T14 => StudySpec::random_hybrid(networks, seed),
        _ => return Err(Error::UnknownTable(format!("{id} is not a study table"))),
    })
}

/// Half-width, in percentage points, of the acceptance band around a
/// published share `p` (percent) for a study of `n` networks: the larger of
/// [`BAND_MIN_PP`] and three binomial standard deviations.
pub fn band_half_width(p: f64, n: usize) -> f64 {
    let q = p / 100.0;
    BAND_MIN_PP.max(300.0 * (q * (1.0 - q) / n as f64).sqrt())
}

fn share_checks(report: &StudyReport, paper: &[f64]) -> Vec<Check> {
    let n = report.spec.num_networks - report.degenerate;
    report
        .labels
        .iter()
        .zip(&report.percentages)
        .zip(paper)
        .map(|((label, &obs), &p)| {
            let h = band_half_width(p, n);
            Check::new(
                format!("EMP {label} share %"),
                format!("{p:.2} ± {h:.2}"),
                format!("{obs:.2}"),
                (obs - p).abs() <= h,
            )
        })
        .collect()
}

fn study_table(id: TableId, opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let report = run_study(&study_spec(id, opts.networks, opts.seed)?)?;
    let mut checks = share_checks(&report, &paper_shares(id));
    let modal = report.modal_winner().unwrap_or("-").to_string();
    match id {
        TableId::T3 => {
            let odd: usize = ["I", "II", "III", "IV", "V", "VI"].iter().map(|l| report.wins_of(l).unwrap()).sum();
            checks.push(Check::new("EMPs I–VI wins", "0", odd.to_string(), odd == 0));
            let balanced: usize = ["VII", "IX", "XI"].iter().map(|l| report.wins_of(l).unwrap()).sum();
            let valid = report.spec.num_networks - report.degenerate;
            checks.push(Check::new(
                "EMPs VII+IX+XI win majority",
                "> 50%",
                format!("{:.2}%", 100.0 * balanced as f64 / valid as f64),
                2 * balanced > valid,
            ));
        }
        TableId::T7 => {
            let p = report.percent_of("II").unwrap();
            checks.push(Check::new(
                "EMP II share in [85, 91]%",
                "[85, 91]",
                format!("{p:.2}"),
                (85.0..=91.0).contains(&p),
            ));
        }
        TableId::T8 | TableId::T10 => {
            let (a, b) = if id == TableId::T8 { ("2", "4") } else { ("4", "8") };
            checks.push(Check::new("modal winner", format!("{a} or {b}"), modal.clone(), modal == a || modal == b));
        }
        TableId::T9 | TableId::T11 => {
            let want = if id == TableId::T9 { "4" } else { "8" };
            checks.push(Check::new("modal winner", want, modal.clone(), modal == want));
        }
        TableId::T14 => {
            let r = report.largest_direct_rate;
            checks.push(Check::new(
                "largest module direct in winner",
                "≥ 88%",
                format!("{:.2}%", 100.0 * r),
                r >= 0.88,
            ));
            let top: f64 = ["8", "9", "12"].iter().map(|l| report.percent_of(l).unwrap()).sum();
            checks.push(Check::new("EMPs 8+9+12 share", "≥ 35%", format!("{top:.2}%"), top >= 35.0));
            checks.push(Check::new("modal winner", "9", modal.clone(), modal == "9"));
        }
        _ => {}
    }
    // ill-conditioned networks are excluded from the shares; reported only
    checks.push(Check::new("degenerate networks (info)", "-", report.degenerate.to_string(), true));
    Ok(checks)
}

fn table5(opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let c = check_4cycle_conjecture(&study_spec(TableId::T5, opts.networks, opts.seed)?)?;
    let above = 100.0 * c.share_above_100;
    let h = band_half_width(20.0, c.total);
    Ok(vec![
        Check::new("conjecture hit rate", "≥ 98% (99.64%)", format!("{:.2}%", 100.0 * c.hit_rate), c.hit_rate >= 0.98),
        Check::new(
            "median trace ratio",
            "[6, 12] (8.7)",
            format!("{:.3}", c.median_ratio),
            (6.0..=12.0).contains(&c.median_ratio),
        ),
        Check::new("ratio above 100", format!("20 ± {h:.2}%"), format!("{above:.2}%"), (above - 20.0).abs() <= h),
    ])
}
