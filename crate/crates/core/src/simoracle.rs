//! Time-domain simulation of the network and its sensitivities, giving an
//! empirical information matrix to check the analytic one against.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::emp::Emp;
use crate::error::{Error, Result};
use crate::infoengine::SignalConfig;
use crate::netmodel::NetworkModel;

pub const MIN_SAMPLES: usize = 1_000;
pub const BATCHES: usize = 32;
const DIVERGENCE_LIMIT: f64 = 1e12;

/// Random stream `stream` of master seed `seed`.
///
/// ChaCha20 keyed by `seed` with the 64-bit stream id selecting an
/// independent keystream, so streams never overlap and any stream can be
/// regenerated without generating the others.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn burn_in(n: usize) -> usize {
    MIN_SAMPLES.max(50 * n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub samples: usize,
    pub seed: u64,
    /// `(1/T) Σ ψ(t) Λ⁻¹ ψ(t)ᵀ`.
    pub empirical_m: DMatrix<f64>,
    /// Batch-means standard error of each entry of `empirical_m`.
    pub standard_error: DMatrix<f64>,
    /// `(1/T) Σ w(t) w(t)ᵀ`.
    pub state_covariance: DMatrix<f64>,
    pub state_standard_error: DMatrix<f64>,
}

impl SimTrace {
    /// Elementwise `(empirical - analytic) / se`. Entries with zero standard
    /// error score 0 when they agree exactly and ±∞ otherwise.
    pub fn z_scores(&self, analytic: &DMatrix<f64>) -> DMatrix<f64> {
        z_scores(&self.empirical_m, &self.standard_error, analytic)
    }

    pub fn max_abs_z(&self, analytic: &DMatrix<f64>) -> f64 {
        self.z_scores(analytic).iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

pub fn z_scores(empirical: &DMatrix<f64>, se: &DMatrix<f64>, analytic: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(empirical.nrows(), empirical.ncols(), |i, j| {
        let d = empirical[(i, j)] - analytic[(i, j)];
        if se[(i, j)] > 0.0 {
            d / se[(i, j)]
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    })
}

/// Accumulates per-batch sums of a symmetric outer-product statistic.
struct BatchStat {
    dim: usize,
    batch_sums: Vec<DMatrix<f64>>,
    batch_counts: Vec<usize>,
}

impl BatchStat {
    fn new(dim: usize) -> Self {
        Self { dim, batch_sums: vec![DMatrix::zeros(dim, dim); BATCHES], batch_counts: vec![0; BATCHES] }
    }

    /// Mean over all samples and batch-means standard error.
    fn finish(self) -> (DMatrix<f64>, DMatrix<f64>) {
        let total: usize = self.batch_counts.iter().sum();
        let mut mean = DMatrix::zeros(self.dim, self.dim);
        for s in &self.batch_sums {
            mean += s;
        }
        mean /= total as f64;
        let means: Vec<DMatrix<f64>> =
            self.batch_sums.iter().zip(&self.batch_counts).map(|(s, &c)| s / c as f64).collect();
        let b = BATCHES as f64;
        let mut var = DMatrix::zeros(self.dim, self.dim);
        for m in &means {
            let d = m - &mean;
            var += d.component_mul(&d);
        }
        let se = (var / (b * (b - 1.0))).map(f64::sqrt);
        let sym = |m: DMatrix<f64>| DMatrix::from_fn(self.dim, self.dim, |i, j| m[(i.min(j), i.max(j))]);
        (sym(mean), sym(se))
    }
}

/// Simulates `samples` steps after burn-in under Gaussian white excitation
/// and returns the empirical information matrix.
pub fn simulate_information(
    model: &NetworkModel,
    emp: &Emp,
    config: &SignalConfig,
    samples: usize,
    seed: u64,
) -> Result<SimTrace> {
    if samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!("simulation needs T ≥ {MIN_SAMPLES} samples, got {samples}")));
    }
    config.check_covers(emp)?;
    let n = model.n();
    let params = model.parameters();
    let ntheta = params.len();
    let edges: Vec<(usize, usize, f64)> = model.edges().iter().map(|e| (e.from - 1, e.to - 1, e.gain)).collect();
    let excited: Vec<(usize, f64)> = emp.excited().iter().map(|&i| (i - 1, config.sigma2(i).unwrap().sqrt())).collect();
    let measured: Vec<(usize, f64)> =
        emp.measured().iter().map(|&j| (j - 1, 1.0 / config.lambda(j).unwrap())).collect();
    let sens_edges: Vec<(usize, usize)> = params.iter().map(|e| (e.from - 1, e.to - 1)).collect();

    let mut rng = stream_rng(seed, 0);
    let mut w = vec![0.0; n];
    let mut w_next = vec![0.0; n];
    // s[k * n + j] = ∂w_j / ∂θ_k
    let mut s = vec![0.0; ntheta * n];
    let mut s_next = vec![0.0; ntheta * n];
    let mut psi = vec![0.0; ntheta];

    let mut info = BatchStat::new(ntheta);
    let mut state = BatchStat::new(n);
    let warmup = burn_in(n);
    let total = warmup + samples;
    for t in 0..total {
        s_next.iter_mut().for_each(|v| *v = 0.0);
        for (k, &(from, to)) in sens_edges.iter().enumerate() {
            let base = k * n;
            for &(ef, et, g) in &edges {
                s_next[base + et] += g * s[base + ef];
            }
            s_next[base + to] += w[from];
        }
        w_next.iter_mut().for_each(|v| *v = 0.0);
        for &(ef, et, g) in &edges {
            w_next[et] += g * w[ef];
        }
        for &(i, sd) in &excited {
            let r: f64 = StandardNormal.sample(&mut rng);
            w_next[i] += sd * r;
        }
        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut s, &mut s_next);

        if t % 1024 == 0 {
            let norm = w.iter().chain(&s).fold(0.0f64, |m, v| m.max(v.abs()));
            if norm.is_nan() || norm > DIVERGENCE_LIMIT {
                return Err(Error::Unstable { radius: model.spectral_radius() });
            }
        }
        if t < warmup {
            continue;
        }
        let b = (t - warmup) * BATCHES / samples;
        info.batch_counts[b] += 1;
        state.batch_counts[b] += 1;
        let m = &mut info.batch_sums[b];
        for &(j, weight) in &measured {
            for k in 0..ntheta {
                psi[k] = s[k * n + j];
            }
            for k in 0..ntheta {
                let pk = weight * psi[k];
                if pk == 0.0 {
                    continue;
                }
                for l in k..ntheta {
                    m[(k, l)] += pk * psi[l];
                }
            }
        }
        let x = &mut state.batch_sums[b];
        for i in 0..n {
            for j in i..n {
                x[(i, j)] += w[i] * w[j];
            }
        }
    }
    let (empirical_m, standard_error) = info.finish();
    let (state_covariance, state_standard_error) = state.finish();
    Ok(SimTrace { samples, seed, empirical_m, standard_error, state_covariance, state_standard_error })
}
