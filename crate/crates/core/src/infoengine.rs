//! Asymptotic information and covariance of the module estimates.
//!
//! Measurement noise is white and enters only the output equation, so the
//! optimal one-step predictor of a measured node is its noise-free response
//! to the known excitations and the predictor gradient is the parameter
//! sensitivity `s_k = ∂w/∂θ_k`. Stacking `x = [w; s_1; …; s_nθ]` gives
//!
//! ```text
//! w(t)   = A w(t-1)   + B r(t)
//! s_k(t) = A s_k(t-1) + E_k w(t-1)
//! ```
//!
//! where `E_k` is the elementary matrix of module `k`. The stationary
//! covariance of `x` solves a discrete Lyapunov equation; the information
//! matrix collects `E[ψ_{j,k} ψ_{j,l}] / λ_j` over measured nodes `j`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emp::Emp;
use crate::error::{Error, Result};
use crate::linalg::{equilibrated_condition, symmetrize, SteinSolver};
use crate::netmodel::{EdgeId, NetworkModel, ParameterVector};

/// Information matrices with a (scaled) condition number at or above this
/// value are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Input variances `σ_i²` per excited node and noise variances `λ_j` per
/// measured node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    sigma2: BTreeMap<usize, f64>,
    lambda: BTreeMap<usize, f64>,
}

impl SignalConfig {
    pub fn new(sigma2: BTreeMap<usize, f64>, lambda: BTreeMap<usize, f64>) -> Result<Self> {
        for (name, map) in [("sigma2", &sigma2), ("lambda", &lambda)] {
            for (&node, &v) in map {
                if node == 0 {
                    return Err(Error::Config(format!("{name}: node indices are 1-based")));
                }
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} for node {node} must be positive and finite, got {v}")));
                }
            }
        }
        Ok(Self { sigma2, lambda })
    }

    /// Same `σ²` and `λ` on every node `1..=n`.
    pub fn uniform(n: usize, sigma2: f64, lambda: f64) -> Result<Self> {
        Self::new((1..=n).map(|i| (i, sigma2)).collect(), (1..=n).map(|i| (i, lambda)).collect())
    }

    /// Parses `{"sigma2": {...}, "lambda": {...}}` where each side is either
    /// `{"uniform": v}` (every node `1..=n`) or a map from node to value,
    /// e.g. `{"1": 1.0, "3": 2.5}`. Noise is per node only; nested entries
    /// (cross-node covariances) are rejected.
    pub fn from_json_str(text: &str, n: usize) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
        if let Some(key) = obj.keys().find(|k| *k != "sigma2" && *k != "lambda") {
            return Err(Error::Parse(format!("unknown config field {key:?} (expected \"sigma2\", \"lambda\")")));
        }
        let side = |name: &str| -> Result<BTreeMap<usize, f64>> {
            let v = obj.get(name).ok_or_else(|| Error::Parse(format!("config is missing field {name:?}")))?;
            parse_node_values(name, v, n)
        };
        Self::new(side("sigma2")?, side("lambda")?)
    }

    pub fn sigma2(&self, node: usize) -> Option<f64> {
        self.sigma2.get(&node).copied()
    }

    pub fn lambda(&self, node: usize) -> Option<f64> {
        self.lambda.get(&node).copied()
    }

    /// Multiplies every input variance by `sigma_factor` and every noise
    /// variance by `lambda_factor`.
    pub fn scaled(&self, sigma_factor: f64, lambda_factor: f64) -> Result<Self> {
        Self::new(
            self.sigma2.iter().map(|(&k, &v)| (k, v * sigma_factor)).collect(),
            self.lambda.iter().map(|(&k, &v)| (k, v * lambda_factor)).collect(),
        )
    }

    /// Restriction to exactly the excited/measured sets of `emp`.
    pub fn restricted_to(&self, emp: &Emp) -> Result<Self> {
        self.check_covers(emp)?;
        Ok(Self {
            sigma2: emp.excited().iter().map(|&i| (i, self.sigma2[&i])).collect(),
            lambda: emp.measured().iter().map(|&j| (j, self.lambda[&j])).collect(),
        })
    }

    /// Every excited node needs a `σ²` and every measured node a `λ`.
    pub fn check_covers(&self, emp: &Emp) -> Result<()> {
        if let Some(i) = emp.excited().iter().find(|i| !self.sigma2.contains_key(i)) {
            return Err(Error::Config(format!("no input variance for excited node {i}")));
        }
        if let Some(j) = emp.measured().iter().find(|j| !self.lambda.contains_key(j)) {
            return Err(Error::Config(format!("no noise variance for measured node {j}")));
        }
        Ok(())
    }
}

fn parse_node_values(name: &str, v: &serde_json::Value, n: usize) -> Result<BTreeMap<usize, f64>> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse(format!("{name}: expected an object of node values or {{\"uniform\": v}}")))?;
    let number = |key: &str, v: &serde_json::Value| -> Result<f64> {
        match v {
            serde_json::Value::Number(x) => Ok(x.as_f64().unwrap()),
            serde_json::Value::Object(_) | serde_json::Value::Array(_) if name == "lambda" => Err(Error::Config(
                format!("lambda[{key}]: noise must be uncorrelated across nodes; give one variance per node"),
            )),
            _ => Err(Error::Parse(format!("{name}[{key}]: expected a number, got {v}"))),
        }
    };
    if let Some(u) = obj.get("uniform") {
        if obj.len() != 1 {
            return Err(Error::Parse(format!("{name}: \"uniform\" cannot be mixed with per-node values")));
        }
        let u = number("uniform", u)?;
        return Ok((1..=n).map(|i| (i, u)).collect());
    }
    let mut out = BTreeMap::new();
    for (key, v) in obj {
        let node: usize =
            key.trim().parse().map_err(|_| Error::Parse(format!("{name}: node key {key:?} is not a node index")))?;
        if node == 0 || node > n {
            return Err(Error::Config(format!("{name}: node {node} outside 1..={n}")));
        }
        out.insert(node, number(key, v)?);
    }
    Ok(out)
}

/// The augmented state-space system propagating the network state together
/// with its parameter sensitivities.
#[derive(Clone, Debug)]
pub struct SensitivitySystem {
    n: usize,
    params: ParameterVector,
    gain: DMatrix<f64>,
    transition: DMatrix<f64>,
    input: DMatrix<f64>,
    excited: Vec<usize>,
    measured: Vec<usize>,
}

impl SensitivitySystem {
    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    /// `n (1 + nθ)`.
    pub fn state_dim(&self) -> usize {
        self.n * (1 + self.params.len())
    }

    /// Block lower-triangular transition matrix `Ã`.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Input matrix `B̃ = [B; 0; …; 0]`, one column per excited node.
    pub fn input(&self) -> &DMatrix<f64> {
        &self.input
    }

    pub fn excited(&self) -> &[usize] {
        &self.excited
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    /// State index of `w_j`.
    pub fn state_index(&self, node: usize) -> usize {
        node - 1
    }

    /// State index of `ψ_{j,k} = e_jᵀ s_k`.
    pub fn sensitivity_index(&self, node: usize, param: usize) -> usize {
        self.n * (1 + param) + node - 1
    }
}

pub fn build_sensitivity(model: &NetworkModel, emp: &Emp) -> SensitivitySystem {
    let n = model.n();
    let params = model.parameters();
    let ntheta = params.len();
    let dim = n * (1 + ntheta);
    let gain = model.gain_matrix();
    let mut transition = DMatrix::zeros(dim, dim);
    for block in 0..=ntheta {
        transition.view_mut((block * n, block * n), (n, n)).copy_from(&gain);
    }
    for (k, edge) in params.iter().enumerate() {
        transition[(n * (1 + k) + edge.to - 1, edge.from - 1)] = 1.0;
    }
    let excited: Vec<usize> = emp.excited().iter().copied().collect();
    let mut input = DMatrix::zeros(dim, excited.len());
    for (c, &i) in excited.iter().enumerate() {
        input[(i - 1, c)] = 1.0;
    }
    SensitivitySystem {
        n,
        params,
        gain,
        transition,
        input,
        excited,
        measured: emp.measured().iter().copied().collect(),
    }
}

/// Stationary covariance blocks of `[w; s_1; …]`: `x00 = E[w wᵀ]`,
/// `xk0[k] = E[s_k wᵀ]`, `xkl[(k, l)] = E[s_k s_lᵀ]` for `k <= l`.
struct Blocks {
    x00: DMatrix<f64>,
    xk0: Vec<DMatrix<f64>>,
    xkl: Vec<Vec<DMatrix<f64>>>,
}

/// `E_k M`: row `to` of the result is row `from` of `M`, all else zero.
fn elem_left(edge: EdgeId, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    out.row_mut(edge.to - 1).copy_from(&m.row(edge.from - 1));
    out
}

/// Solves the block recursions
///
/// ```text
/// X00 = A X00 Aᵀ + Q
/// Xk0 = A Xk0 Aᵀ + E_k X00 Aᵀ
/// Xkl = A Xkl Aᵀ + A Xk0 E_lᵀ + E_k Xl0ᵀ Aᵀ + E_k X00 E_lᵀ
/// ```
///
/// which are the blocks of `X = Ã X Ãᵀ + B̃ Σ B̃ᵀ` for the block
/// lower-triangular `Ã`; every block shares the factorization of `A`.
fn solve_blocks(
    gain: &DMatrix<f64>,
    params: &ParameterVector,
    solver: &SteinSolver,
    q: &DMatrix<f64>,
) -> Result<Blocks> {
    let at = gain.transpose();
    let mut x00 = solver.solve(q)?;
    symmetrize(&mut x00);
    let x00_at = &x00 * &at;
    let xk0: Vec<DMatrix<f64>> = params.iter().map(|&e| solver.solve(&elem_left(e, &x00_at))).collect::<Result<_>>()?;
    let ntheta = params.len();
    let mut xkl = Vec::with_capacity(ntheta);
    for k in 0..ntheta {
        let ek = params[k];
        let mut row = Vec::with_capacity(ntheta - k);
        for l in k..ntheta {
            let el = params[l];
            // A Xk0 E_lᵀ + E_k Xl0ᵀ Aᵀ + E_k X00 E_lᵀ
            let t1 = elem_left(el, &(gain * &xk0[k]).transpose()).transpose();
            let t2 = elem_left(ek, &(xk0[l].transpose() * &at));
            let t3 = elem_left(ek, &elem_left(el, &x00).transpose());
            let mut x = solver.solve(&(t1 + t2 + t3))?;
            if k == l {
                symmetrize(&mut x);
            }
            row.push(x);
        }
        xkl.push(row);
    }
    Ok(Blocks { x00, xk0, xkl })
}

impl Blocks {
    fn sens(&self, k: usize, l: usize) -> DMatrix<f64> {
        if k <= l {
            self.xkl[k][l - k].clone()
        } else {
            self.xkl[l][k - l].transpose()
        }
    }
}

/// Stationary covariance `X = Ã X Ãᵀ + B̃ Σ_r B̃ᵀ` of the augmented state.
pub fn steady_state_covariance(sys: &SensitivitySystem, config: &SignalConfig) -> Result<DMatrix<f64>> {
    let n = sys.n;
    let mut q = DMatrix::zeros(n, n);
    for &i in &sys.excited {
        let s2 = config.sigma2(i).ok_or_else(|| Error::Config(format!("no input variance for excited node {i}")))?;
        q[(i - 1, i - 1)] = s2;
    }
    let solver = SteinSolver::new(&sys.gain)?;
    let blocks = solve_blocks(&sys.gain, &sys.params, &solver, &q)?;
    let ntheta = sys.params.len();
    let dim = sys.state_dim();
    let mut x = DMatrix::zeros(dim, dim);
    x.view_mut((0, 0), (n, n)).copy_from(&blocks.x00);
    for k in 0..ntheta {
        let r = n * (1 + k);
        x.view_mut((r, 0), (n, n)).copy_from(&blocks.xk0[k]);
        x.view_mut((0, r), (n, n)).copy_from(&blocks.xk0[k].transpose());
        for l in 0..ntheta {
            x.view_mut((r, n * (1 + l)), (n, n)).copy_from(&blocks.sens(k, l));
        }
    }
    Ok(x)
}

/// Information matrix, covariance and A-optimality score for one EMP.
#[derive(Clone, Debug)]
pub struct InfoResult {
    pub params: ParameterVector,
    pub information: DMatrix<f64>,
    /// `M⁻¹`, absent when `M` is singular.
    pub covariance: Option<DMatrix<f64>>,
    /// `tr(P)`, `+∞` when singular.
    pub trace: f64,
    /// `diag(P)` in parameter order, `+∞` entries when singular.
    pub variances: Vec<f64>,
    /// Condition number of `M` after scaling to unit diagonal.
    pub condition_number: f64,
    pub singular: bool,
}

impl InfoResult {
    pub fn from_information(params: ParameterVector, mut information: DMatrix<f64>) -> Self {
        symmetrize(&mut information);
        let ntheta = params.len();
        let condition_number = equilibrated_condition(&information);
        let covariance = if condition_number < SINGULAR_CONDITION {
            information.clone().cholesky().map(|c| {
                let mut p = c.inverse();
                symmetrize(&mut p);
                p
            })
        } else {
            None
        };
        match covariance {
            Some(p) => {
                let variances: Vec<f64> = (0..ntheta).map(|k| p[(k, k)]).collect();
                Self {
                    params,
                    information,
                    trace: variances.iter().sum(),
                    variances,
                    covariance: Some(p),
                    condition_number,
                    singular: false,
                }
            }
            None => Self {
                params,
                information,
                covariance: None,
                trace: f64::INFINITY,
                variances: vec![f64::INFINITY; ntheta],
                condition_number,
                singular: true,
            },
        }
    }

    /// `{emp, trace, variances: {edge: value}, singular, condition_number}`;
    /// non-finite numbers become `null`.
    pub fn to_json(&self, emp: &Emp) -> serde_json::Value {
        let num = |x: f64| if x.is_finite() { serde_json::json!(x) } else { serde_json::Value::Null };
        let variances: serde_json::Map<String, serde_json::Value> =
            self.params.iter().zip(&self.variances).map(|(e, &v)| (e.to_string(), num(v))).collect();
        serde_json::json!({
            "emp": {
                "label": emp.label(),
                "excited": emp.excited(),
                "measured": emp.measured(),
            },
            "trace": num(self.trace),
            "variances": variances,
            "singular": self.singular,
            "condition_number": num(self.condition_number),
        })
    }

    /// `M` (and `P` when present) as CSV with a header of parameter names.
    pub fn matrices_csv(&self) -> String {
        let names: Vec<String> = self.params.iter().map(|e| e.to_string()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut dump = |title: &str, m: &DMatrix<f64>| {
            w.write_record(std::iter::once(title.to_string()).chain(names.iter().cloned())).unwrap();
            for (k, name) in names.iter().enumerate() {
                let row = m.row(k).iter().map(|v| format!("{v:e}")).collect::<Vec<_>>();
                w.write_record(std::iter::once(name.clone()).chain(row)).unwrap();
            }
        };
        dump("M", &self.information);
        if let Some(p) = &self.covariance {
            dump("P", p);
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn variance(&self, edge: EdgeId) -> Option<f64> {
        self.params.index_of(edge).map(|k| self.variances[k])
    }

    pub fn per_param_variance(&self) -> BTreeMap<EdgeId, f64> {
        self.params.iter().copied().zip(self.variances.iter().copied()).collect()
    }
}

/// Full evaluation through the augmented system for one (model, EMP, config).
pub fn information_matrix(model: &NetworkModel, emp: &Emp, config: &SignalConfig) -> Result<InfoResult> {
    config.check_covers(emp)?;
    let sys = build_sensitivity(model, emp);
    let x = steady_state_covariance(&sys, config)?;
    let ntheta = sys.params.len();
    let mut m = DMatrix::zeros(ntheta, ntheta);
    for &j in &sys.measured {
        let w = 1.0 / config.lambda(j).unwrap();
        for k in 0..ntheta {
            for l in 0..ntheta {
                m[(k, l)] += w * x[(sys.sensitivity_index(j, k), sys.sensitivity_index(j, l))];
            }
        }
    }
    Ok(InfoResult::from_information(sys.params, m))
}

/// Per-model precomputation for evaluating many EMPs quickly.
///
/// The stationary covariance is linear in the input variances, so the
/// response to a unit-variance input at each node is computed once and every
/// EMP is assembled as `M = Σ_{j∈C} Σ_{i∈B} (σ_i² / λ_j) G_i[j]`, with
/// `G_i[j]_{kl} = E[ψ_{j,k} ψ_{j,l}]` under unit excitation of node `i`.
pub struct Evaluator {
    params: ParameterVector,
    /// `unit[i-1][j-1]` is the nθ×nθ matrix `G_i[j]`.
    unit: Vec<Vec<DMatrix<f64>>>,
}

impl Evaluator {
    pub fn new(model: &NetworkModel) -> Result<Self> {
        let n = model.n();
        let params = model.parameters();
        let ntheta = params.len();
        let gain = model.gain_matrix();
        let solver = SteinSolver::new(&gain)?;
        let mut unit = Vec::with_capacity(n);
        for i in 1..=n {
            let mut q = DMatrix::zeros(n, n);
            q[(i - 1, i - 1)] = 1.0;
            let blocks = solve_blocks(&gain, &params, &solver, &q)?;
            let per_node =
                (1..=n).map(|j| DMatrix::from_fn(ntheta, ntheta, |k, l| blocks.sens(k, l)[(j - 1, j - 1)])).collect();
            unit.push(per_node);
        }
        Ok(Self { params, unit })
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    pub fn information(&self, emp: &Emp, config: &SignalConfig) -> Result<DMatrix<f64>> {
        config.check_covers(emp)?;
        let ntheta = self.params.len();
        let mut m = DMatrix::zeros(ntheta, ntheta);
        for &j in emp.measured() {
            let lambda = config.lambda(j).unwrap();
            for &i in emp.excited() {
                let s2 = config.sigma2(i).unwrap();
                m += &self.unit[i - 1][j - 1] * (s2 / lambda);
            }
        }
        Ok(m)
    }

    pub fn evaluate(&self, emp: &Emp, config: &SignalConfig) -> Result<InfoResult> {
        let m = self.information(emp, config)?;
        Ok(InfoResult::from_information(self.params.clone(), m))
    }
}

#[derive(Clone, Debug)]
pub struct RankedEmp {
    /// Position of the EMP in the input list.
    pub index: usize,
    pub emp: Emp,
    pub result: InfoResult,
}

/// Evaluates every EMP and sorts by ascending `tr(P)`; singular results sort
/// last and ties keep input order.
pub fn rank_emps(model: &NetworkModel, emps: &[Emp], config: &SignalConfig) -> Result<Vec<RankedEmp>> {
    let evaluator = Evaluator::new(model)?;
    let mut ranked: Vec<RankedEmp> = emps
        .par_iter()
        .enumerate()
        .map(|(index, emp)| evaluator.evaluate(emp, config).map(|result| RankedEmp { index, emp: emp.clone(), result }))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        (a.result.singular, a.result.trace, a.index).partial_cmp(&(b.result.singular, b.result.trace, b.index)).unwrap()
    });
    Ok(ranked)
}
