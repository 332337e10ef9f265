//! Closed-form variances for the small networks that admit them: the
//! 2-node cycle, and the 3- and 4-node branches.
//!
//! These are independent of the Lyapunov engine and serve as its oracle.
//! Variances are in parameter order (`a12, a21` for the cycle, `a21, a32,
//! a43` for branches).

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;

use crate::emp::Emp;
use crate::error::{Error, Result};
use crate::infoengine::SignalConfig;
use crate::netmodel::NetworkModel;

const DENOM_EPS: f64 = 1e-12;

/// Roman-numbered pattern of a small network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmpId {
    I,
    II,
    III,
    IV,
}

impl EmpId {
    pub const ALL: [EmpId; 4] = [EmpId::I, EmpId::II, EmpId::III, EmpId::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            EmpId::I => "I",
            EmpId::II => "II",
            EmpId::III => "III",
            EmpId::IV => "IV",
        }
    }
}

impl fmt::Display for EmpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(EmpId::I),
            "II" => Ok(EmpId::II),
            "III" => Ok(EmpId::III),
            "IV" => Ok(EmpId::IV),
            _ => Err(Error::Parse(format!("unknown EMP id {s:?}"))),
        }
    }
}

fn nonzero(name: &str, v: f64) -> Result<f64> {
    if v.abs() < DENOM_EPS || !v.is_finite() {
        Err(Error::Degenerate(format!("{name} = {v} makes the closed form singular")))
    } else {
        Ok(v)
    }
}

/// Lag-0 and lag-2 autocovariance of the filter `1 / (1 - z q⁻²)²` driven
/// by unit white noise, where `z = a12 a21` is the loop gain of the 2-node
/// cycle: `γ0 = (1 + z²)/(1 - z²)³`, `γ2 = 2z/(1 - z²)³`.
pub fn gamma_coeffs(z: f64) -> Result<(f64, f64)> {
    if !z.is_finite() || z.abs() >= 1.0 {
        return Err(Error::Degenerate(format!("loop gain {z} must satisfy |z| < 1")));
    }
    let y = z * z;
    let den = nonzero("(1 - z²)³", (1.0 - y).powi(3))?;
    Ok(((1.0 + y) / den, 2.0 * z / den))
}

/// The rational expressions in the form they are commonly tabulated. They
/// agree with [`gamma_coeffs`] only at `z = 0` and are kept for comparison
/// with published numbers.
pub fn printed_gamma_coeffs(z: f64) -> Result<(f64, f64)> {
    let z2 = z * z;
    let den = z2.powi(4) + 4.0 * z2.powi(3) - 6.0 * z2 * z2 + 4.0 * z2 + 1.0;
    let den = nonzero("γ denominator", den)?;
    Ok(((z2 * z2 + 8.0 * z2 + 1.0) / den, 2.0 * z * (z2 + 1.0) / den))
}

/// 2-node cycle `1 ⇄ 2` with input variances `sigma1, sigma2` and noise
/// variances `lambda1, lambda2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoNodeCycleParams {
    pub a12: f64,
    pub a21: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl TwoNodeCycleParams {
    pub fn uniform(a12: f64, a21: f64, sigma2: f64, lambda: f64) -> Self {
        Self { a12, a21, sigma1: sigma2, sigma2, lambda1: lambda, lambda2: lambda }
    }

    pub fn model(&self) -> Result<NetworkModel> {
        NetworkModel::cycle(2, &[self.a21, self.a12])
    }

    pub fn config(&self) -> Result<SignalConfig> {
        SignalConfig::new([(1, self.sigma1), (2, self.sigma2)].into(), [(1, self.lambda1), (2, self.lambda2)].into())
    }
}

/// The four minimal patterns of the 2-node cycle.
pub fn twonode_emp(id: EmpId) -> Emp {
    match id {
        EmpId::I => Emp::new([1, 2], [1]),
        EmpId::II => Emp::new([1, 2], [2]),
        EmpId::III => Emp::new([1], [1, 2]),
        EmpId::IV => Emp::new([2], [1, 2]),
    }
    .with_label(id.as_str())
}

/// Full 2×2 covariance in the order `(a12, a21)`.
pub fn twonode_covariance(id: EmpId, p: &TwoNodeCycleParams) -> Result<Matrix2<f64>> {
    let TwoNodeCycleParams { a12, a21, sigma1: s1, sigma2: s2, lambda1: l1, lambda2: l2 } = *p;
    let (g0, g2) = gamma_coeffs(a12 * a21)?;
    let m_s = s1 * a21 * a21 + s2;
    let n_s = s1 + s2 * a12 * a12;
    let m_l = l1 * a21 * a21 + l2;
    let n_l = l1 + l2 * a12 * a12;
    let (v12, v21, c) = match id {
        EmpId::I => {
            let d1 = nonzero("d1", g0 * g0 * m_s * n_s - (g0 * s1 * a21 + g2 * s2 * a12).powi(2))?;
            let a12 = nonzero("a12", a12)?;
            (l1 * g0 * n_s / d1, l1 * g0 * m_s / (a12 * a12 * d1), -l1 * (g0 * s1 * a21 / a12 + g2 * s2) / d1)
        }
        EmpId::II => {
            let d2 = nonzero("d2", g0 * g0 * m_s * n_s - (g0 * s2 * a12 + g2 * s1 * a21).powi(2))?;
            let a21 = nonzero("a21", a21)?;
            (l2 * g0 * n_s / (a21 * a21 * d2), l2 * g0 * m_s / d2, -l2 * (g0 * s2 * a12 + g2 * s1 * a21) / (a21 * d2))
        }
        EmpId::III => {
            let d3 = nonzero("d3", s1 * (g0 * g0 * m_l * n_l - (g0 * l2 * a12 + g2 * l1 * a21).powi(2)))?;
            let a21 = nonzero("a21", a21)?;
            (
                l1 * l2 * g0 * n_l / (a21 * a21 * d3),
                l1 * l2 * g0 * m_l / d3,
                -l1 * l2 * (g0 * l2 * a12 + g2 * l1 * a21) / (a21 * d3),
            )
        }
        EmpId::IV => {
            let d4 = nonzero("d4", s2 * (g0 * g0 * m_l * n_l - (g0 * l1 * a21 + g2 * l2 * a12).powi(2)))?;
            let a12 = nonzero("a12", a12)?;
            (
                l1 * l2 * g0 * n_l / d4,
                l1 * l2 * g0 * m_l / (a12 * a12 * d4),
                -l1 * l2 * (g0 * l1 * a21 + g2 * l2 * a12) / (a12 * d4),
            )
        }
    };
    Ok(Matrix2::new(v12, c, c, v21))
}

/// `(var(â12), var(â21))`.
pub fn twonode_variances(id: EmpId, p: &TwoNodeCycleParams) -> Result<(f64, f64)> {
    let cov = twonode_covariance(id, p)?;
    Ok((cov[(0, 0)], cov[(1, 1)]))
}

/// Branch `1 -> 2 -> 3 (-> 4)`. `sigma2[i-1]` and `lambda[i-1]` belong to
/// node `i`; entries for nodes a pattern does not use are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchParams {
    pub a21: f64,
    pub a32: f64,
    pub a43: Option<f64>,
    pub sigma2: [f64; 4],
    pub lambda: [f64; 4],
}

impl BranchParams {
    pub fn three(a21: f64, a32: f64, sigma2: [f64; 3], lambda: [f64; 3]) -> Self {
        Self {
            a21,
            a32,
            a43: None,
            sigma2: [sigma2[0], sigma2[1], sigma2[2], 1.0],
            lambda: [lambda[0], lambda[1], lambda[2], 1.0],
        }
    }

    pub fn four(gains: [f64; 3], sigma2: [f64; 4], lambda: [f64; 4]) -> Self {
        Self { a21: gains[0], a32: gains[1], a43: Some(gains[2]), sigma2, lambda }
    }

    pub fn nodes(&self) -> usize {
        if self.a43.is_some() {
            4
        } else {
            3
        }
    }

    pub fn model(&self) -> Result<NetworkModel> {
        match self.a43 {
            Some(a43) => NetworkModel::branch(4, &[self.a21, self.a32, a43]),
            None => NetworkModel::branch(3, &[self.a21, self.a32]),
        }
    }

    pub fn config(&self) -> Result<SignalConfig> {
        let n = self.nodes();
        SignalConfig::new(
            (1..=n).map(|i| (i, self.sigma2[i - 1])).collect(),
            (1..=n).map(|i| (i, self.lambda[i - 1])).collect(),
        )
    }
}

/// Patterns of the 3-node branch (`I`, `II`) and 4-node branch (`I`…`IV`).
pub fn branch_emp(n: usize, id: EmpId) -> Result<Emp> {
    let emp = match (n, id) {
        (3, EmpId::I) => Emp::new([1, 2], [3]),
        (3, EmpId::II) => Emp::new([1], [2, 3]),
        (4, EmpId::I) => Emp::new([1, 3], [2, 4]),
        (4, EmpId::II) => Emp::new([1, 2], [3, 4]),
        (4, EmpId::III) => Emp::new([1, 2, 3], [4]),
        (4, EmpId::IV) => Emp::new([1], [2, 3, 4]),
        _ => return Err(Error::InvalidSize(format!("no pattern {id} for a {n}-node branch"))),
    };
    Ok(emp.with_label(id.as_str()))
}

/// `(var(â21), var(â32))` for the 3-node branch.
pub fn threenode_branch_variances(id: EmpId, p: &BranchParams) -> Result<(f64, f64)> {
    let [s1, s2, _, _] = p.sigma2;
    let [_, l2, l3, _] = p.lambda;
    let (a21, a32) = (p.a21, p.a32);
    match id {
        EmpId::I => {
            let a32 = nonzero("a32", a32)?;
            Ok((l3 * (a21 * a21 / s2 + 1.0 / s1) / (a32 * a32), l3 / s2))
        }
        EmpId::II => {
            let a21 = nonzero("a21", a21)?;
            Ok((l2 / s1, (a32 * a32 * l2 + l3) / (a21 * a21 * s1)))
        }
        _ => Err(Error::InvalidSize(format!("no pattern {id} for a 3-node branch"))),
    }
}

/// Input variance `σ̄2²` at node 2 for which both 3-node branch patterns
/// give the same trace; above it, exciting node 2 (pattern I) wins.
pub fn sigma2_crossover(p: &BranchParams) -> Result<f64> {
    let s1 = p.sigma2[0];
    let [_, l2, l3, _] = p.lambda;
    let a = p.a21 * p.a21;
    let b = p.a32 * p.a32;
    nonzero("a21", p.a21)?;
    nonzero("a32", p.a32)?;
    let den = l2 * b * (a + b) + l3 * (b - a);
    if den < DENOM_EPS {
        return Err(Error::Degenerate(format!(
            "no crossover: exciting node 1 only is better for every σ2² (denominator {den})"
        )));
    }
    Ok(l3 * s1 * a * (a + b) / den)
}

/// `(var(â21), var(â32), var(â43))` for the 4-node branch.
pub fn fournode_branch_variances(id: EmpId, p: &BranchParams) -> Result<(f64, f64, f64)> {
    let a43 = p.a43.ok_or_else(|| Error::InvalidSize("4-node closed forms need a43".into()))?;
    let [s1, s2, s3, _] = p.sigma2;
    let [_, l2, l3, l4] = p.lambda;
    let (a21, a32) = (p.a21, p.a32);
    let (q21, q32, q43) = (a21 * a21, a32 * a32, a43 * a43);
    match id {
        EmpId::I => {
            nonzero("a21", a21)?;
            nonzero("a43", a43)?;
            Ok((l2 / s1, l2 * q32 / (s1 * q21) + l4 * q32 / (s3 * q43) + l4 / (s1 * q21 * q43), l4 / s3))
        }
        EmpId::II => {
            nonzero("a32", a32)?;
            let m = s1 * q21 + s2;
            let k = l3 * q43 + l4;
            Ok((
                l3 * l4 * m / (s1 * s2 * q32 * k),
                l3 * (s2 * k + l4 * s1 * q21) / (s2 * (l3 * q43 * m + l4 * m)),
                k / (q32 * m),
            ))
        }
        EmpId::III => {
            nonzero("a32", a32)?;
            nonzero("a43", a43)?;
            Ok((l4 * (s1 * q21 + s2) / (s1 * s2 * q32 * q43), l4 * q32 / (s3 * q43) + l4 / (s2 * q43), l4 / s3))
        }
        EmpId::IV => {
            nonzero("a21", a21)?;
            nonzero("a32", a32)?;
            Ok((l2 / s1, (l2 * q32 + l3) / (s1 * q21), (l3 * q43 + l4) / (s1 * q21 * q32)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Autocovariances of `1/(1 - 2z q⁻² + z² q⁻⁴)` from the truncated
    /// impulse response; `h(2k) = z^k` is the response of `1/(1 - z q⁻²)`.
    fn series_gamma(z: f64) -> (f64, f64) {
        // impulse response of 1/Δ, Δ = (1 - z q⁻²)², is h * h
        let n = 600;
        let h: Vec<f64> = (0..n).map(|t| if t % 2 == 0 { z.powi(t as i32 / 2) } else { 0.0 }).collect();
        let mut hh = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                hh[i + j] += h[i] * h[j];
            }
        }
        let r0: f64 = hh.iter().map(|v| v * v).sum();
        let r2: f64 = hh.windows(3).map(|w| w[0] * w[2]).sum();
        (r0, r2)
    }

    #[test]
    fn gamma_against_series() {
        assert_eq!(gamma_coeffs(0.0).unwrap(), (1.0, 0.0));
        for z in [0.25, -0.4, 0.7] {
            let (g0, g2) = gamma_coeffs(z).unwrap();
            let (s0, s2) = series_gamma(z);
            assert!((g0 - s0).abs() < 1e-10 * s0, "{z}: {g0} vs {s0}");
            assert!((g2 - s2).abs() < 1e-10 * s0, "{z}: {g2} vs {s2}");
        }
        let (p0, _) = gamma_coeffs(0.3).unwrap();
        let (m0, _) = gamma_coeffs(-0.3).unwrap();
        assert_eq!(p0, m0);
        assert!(gamma_coeffs(1.0).is_err());
    }

    #[test]
    fn printed_gamma_differs_beyond_origin() {
        assert_eq!(printed_gamma_coeffs(0.0).unwrap(), (1.0, 0.0));
        let (p0, _) = printed_gamma_coeffs(0.25).unwrap();
        let (t0, _) = gamma_coeffs(0.25).unwrap();
        assert!((p0 - t0).abs() > 1e-3);
    }

    #[test]
    fn twonode_symmetry() {
        let p = TwoNodeCycleParams::uniform(0.5, 0.5, 1.0, 1.0);
        let pi = twonode_covariance(EmpId::I, &p).unwrap();
        let piv = twonode_covariance(EmpId::IV, &p).unwrap();
        let pii = twonode_covariance(EmpId::II, &p).unwrap();
        let piii = twonode_covariance(EmpId::III, &p).unwrap();
        assert!((pi - piv).norm() < 1e-12);
        assert!((pii - piii).norm() < 1e-12);
        assert!((pi.trace() - pii.trace()).abs() < 1e-12);
        let (v12_i, v21_i) = twonode_variances(EmpId::I, &p).unwrap();
        let (v12_ii, v21_ii) = twonode_variances(EmpId::II, &p).unwrap();
        assert!(v12_i < v12_ii && v21_i > v21_ii);
    }

    #[test]
    fn twonode_degenerate() {
        let p = TwoNodeCycleParams::uniform(0.0, 0.5, 1.0, 1.0);
        assert!(matches!(twonode_variances(EmpId::I, &p), Err(Error::Degenerate(_))));
        let p = TwoNodeCycleParams::uniform(2.0, 0.5, 1.0, 1.0);
        assert!(matches!(twonode_variances(EmpId::II, &p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn threenode_direct() {
        let p = BranchParams::three(0.5, 0.5, [1.0; 3], [1.0; 3]);
        assert_eq!(threenode_branch_variances(EmpId::I, &p).unwrap().1, 1.0);
        assert_eq!(threenode_branch_variances(EmpId::II, &p).unwrap().0, 1.0);
        let p = BranchParams::three(0.5, 0.0, [1.0; 3], [1.0; 3]);
        assert!(threenode_branch_variances(EmpId::I, &p).is_err());
    }

    #[test]
    fn crossover_reduction() {
        let p = BranchParams::three(0.7, 0.7, [4.0, 1.0, 1.0], [1.0, 2.0, 1.0]);
        assert!((sigma2_crossover(&p).unwrap() - 2.0).abs() < 1e-12);
        let trace = |s2: f64, id| {
            let q = BranchParams { sigma2: [4.0, s2, 1.0, 1.0], ..p };
            let (a, b) = threenode_branch_variances(id, &q).unwrap();
            a + b
        };
        assert!((trace(2.0, EmpId::I) - trace(2.0, EmpId::II)).abs() < 1e-12);
        assert!(trace(4.0, EmpId::I) < trace(4.0, EmpId::II));
    }

    #[test]
    fn fournode_direct() {
        let p = BranchParams::four([20.0, 1.0, 1.0], [1.0; 4], [1.0; 4]);
        assert_eq!(fournode_branch_variances(EmpId::IV, &p).unwrap().0, 1.0);
        let sum = |id| {
            let (a, b, c) = fournode_branch_variances(id, &p).unwrap();
            a + b + c
        };
        assert!(sum(EmpId::IV) < sum(EmpId::I));
        assert!(fournode_branch_variances(EmpId::I, &BranchParams { a43: None, ..p }).is_err());
    }

    #[test]
    fn ids_parse() {
        for id in EmpId::ALL {
            assert_eq!(id.to_string().parse::<EmpId>().unwrap(), id);
        }
        assert!("V".parse::<EmpId>().is_err());
    }
}
