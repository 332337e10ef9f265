//! Discrete Lyapunov (Stein) equations `X = A X Aᵀ + Q` and small helpers.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Above this dimension the Kronecker system gets too large and the solver
/// switches to squared Smith doubling.
pub const DIRECT_SOLVE_MAX_DIM: usize = 24;

const DOUBLING_MAX_ITERS: usize = 80;

/// Reusable solver for `X = A X Aᵀ + Q` with a fixed `A`.
///
/// For small `A` the vectorized system `(I - A⊗A) vec X = vec Q` is LU
/// factored once and reused for every right-hand side.
pub enum SteinSolver {
    Direct { n: usize, lu: LU<f64, Dyn, Dyn> },
    Doubling { a: DMatrix<f64> },
}

impl SteinSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        assert!(a.is_square(), "Stein equation needs a square matrix");
        let n = a.nrows();
        if n > DIRECT_SOLVE_MAX_DIM {
            return Ok(SteinSolver::Doubling { a: a.clone() });
        }
        let k = DMatrix::identity(n * n, n * n) - a.kronecker(a);
        let lu = k.lu();
        // a singular Kronecker system means A has eigenvalues with λ_i λ_j = 1
        if !lu.is_invertible() {
            return Err(Error::Unstable { radius: f64::NAN });
        }
        Ok(SteinSolver::Direct { n, lu })
    }

    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            SteinSolver::Direct { n, lu } => {
                let rhs = DVector::from_column_slice(q.as_slice());
                let x = lu.solve(&rhs).ok_or(Error::Unstable { radius: f64::NAN })?;
                Ok(DMatrix::from_column_slice(*n, *n, x.as_slice()))
            }
            SteinSolver::Doubling { a } => smith_doubling(a, q),
        }
    }
}

/// One-shot solve of `X = A X Aᵀ + Q`.
pub fn solve_stein(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SteinSolver::new(a)?.solve(q)
}

/// `X = Σ_k A^k Q (Aᵀ)^k` summed by repeated squaring.
pub fn smith_doubling(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..DOUBLING_MAX_ITERS {
        let step = &ak * &x * ak.transpose();
        x += &step;
        ak = &ak * &ak;
        let scale = x.norm().max(f64::MIN_POSITIVE);
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.norm() <= 1e-17 * scale && ak.norm() < 1e-8 {
            return Ok(x);
        }
    }
    Err(Error::Unstable { radius: f64::NAN })
}

/// Frobenius residual `‖X - A X Aᵀ - Q‖ / ‖X‖`.
pub fn stein_residual(a: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let r = x - a * x * a.transpose() - q;
    r.norm() / x.norm().max(f64::MIN_POSITIVE)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// 2-norm condition number of a symmetric matrix after symmetric diagonal
/// scaling to unit diagonal. Returns infinity for indefinite or zero-diagonal
/// input.
pub fn equilibrated_condition(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    if d.iter().any(|&v| v.is_nan() || v <= 0.0 || v.is_infinite()) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
