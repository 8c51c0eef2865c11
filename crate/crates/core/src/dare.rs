//! Discrete algebraic Riccati equation solver for the stationary filter.
//!
//! Solves the predicted-covariance fixed point
//!
//! ```text
//! P = A P A' + Q - A P h' (h P h' + r)^{-1} h P A'
//! ```
//!
//! for a scalar measurement row `h`. The default method iterates the
//! right-hand side starting from `Q` with symmetrization each sweep; a
//! doubling iteration is available as an accelerated mode behind the same
//! interface. Transition products are abstracted so block-structured
//! models can supply `O(n^2)` multiplies instead of dense `O(n^3)` ones.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::statespace::StepModel;

static SOLVE_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of DARE solves performed by this process. Instrumentation for
/// tests that assert gain reuse across segments.
pub fn solve_count() -> u64 {
    SOLVE_COUNT.load(Ordering::Relaxed)
}

/// Transition-product hooks used by the solver. `a_mul` is `A * X`,
/// `mul_at` is `X * A'`, `a_mul_vec` is `A * v`.
pub(crate) trait TransitionOps {
    fn dim(&self) -> usize;
    fn a_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    fn mul_at(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    fn a_mul_vec(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Dense transition matrix, materialized for the doubling method.
    fn dense_a(&self) -> DMatrix<f64>;
}

pub(crate) struct DenseTransition<'a>(pub &'a DMatrix<f64>);

impl TransitionOps for DenseTransition<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn a_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0 * x
    }

    fn mul_at(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * self.0.transpose()
    }

    fn a_mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        self.0 * v
    }

    fn dense_a(&self) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// Solver selection; both converge to the same fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DareMethod {
    /// Iterate the Riccati recursion from `P = Q`. Robust, linear rate.
    #[default]
    FixedPoint,
    /// Structure-preserving doubling; quadratic rate, dense products.
    Doubling,
}

/// Tolerance on the max-abs residual, iteration cap and method.
#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: DareMethod,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            method: DareMethod::FixedPoint,
        }
    }
}

/// Stationary quantities derived from the DARE solution: predicted and
/// filtered covariances, the filter gain `K` and the smoother gain `G`.
#[derive(Debug, Clone)]
pub struct StationaryGains {
    /// Stationary predicted covariance `P-_inf`.
    pub p_pred: DMatrix<f64>,
    /// Stationary filtered covariance `P_inf`.
    pub p_filt: DMatrix<f64>,
    /// Stationary filter gain `K = P-_inf h' / (h P-_inf h' + r)`.
    pub gain: DVector<f64>,
    /// Stationary smoother gain `G = P_inf A' [P-_inf]^{-1}`.
    pub smoother_gain: DMatrix<f64>,
    /// Max-abs residual of the DARE at the returned solution.
    pub residual: f64,
    /// Iterations used by the solver.
    pub iterations: usize,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn dare_rhs(
    ops: &dyn TransitionOps,
    q: &DMatrix<f64>,
    h: &DVector<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let ph = p * h;
    let s = h.dot(&ph) + r;
    let u = ops.a_mul_vec(&ph);
    let ap = ops.a_mul(p);
    let mut next = ops.mul_at(&ap) + q;
    // Rank-one downdate of the observed direction.
    let scale = 1.0 / s;
    for i in 0..next.nrows() {
        for j in 0..next.ncols() {
            next[(i, j)] -= u[i] * u[j] * scale;
        }
    }
    symmetrize(&mut next);
    next
}

pub(crate) fn residual_norm(
    ops: &dyn TransitionOps,
    q: &DMatrix<f64>,
    h: &DVector<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> f64 {
    max_abs_diff(&dare_rhs(ops, q, h, r, p), p)
}

fn solve_fixed_point(
    ops: &dyn TransitionOps,
    q: &DMatrix<f64>,
    h: &DVector<f64>,
    r: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, f64, usize)> {
    let mut p = q.clone();
    let mut last_diff = f64::INFINITY;
    for it in 1..=max_iter {
        let next = dare_rhs(ops, q, h, r, &p);
        last_diff = max_abs_diff(&next, &p);
        p = next;
        if last_diff < tol {
            // The step difference bounds the residual of the previous
            // iterate; confirm on the current one.
            let resid = residual_norm(ops, q, h, r, &p);
            if resid < tol {
                return Ok((p, resid, it));
            }
        }
        if !last_diff.is_finite() {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: last_diff,
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: last_diff,
    })
}

/// Structure-preserving doubling iteration on the dual control-form DARE
/// (substitute `A -> A'`, `B -> h'`). Each sweep squares the effective
/// horizon, so slow dynamics converge in tens of iterations.
fn solve_doubling(
    ops: &dyn TransitionOps,
    q: &DMatrix<f64>,
    h: &DVector<f64>,
    r: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, f64, usize)> {
    let n = ops.dim();
    let mut a_k = ops.dense_a().transpose();
    let mut g_k = DMatrix::from_fn(n, n, |i, j| h[i] * h[j] / r);
    let mut p = q.clone();
    let eye = DMatrix::<f64>::identity(n, n);

    let mut last_diff = f64::INFINITY;
    for it in 1..=max_iter {
        let w = &eye + &g_k * &p;
        let w_lu = w.lu();
        let winv_a = w_lu
            .solve(&a_k)
            .ok_or(Error::SolverFailure {
                iterations: it,
                residual: f64::INFINITY,
            })?;
        let winv_g = w_lu.solve(&g_k).ok_or(Error::SolverFailure {
            iterations: it,
            residual: f64::INFINITY,
        })?;

        let a_next = &a_k * &winv_a;
        let mut g_next = &g_k + &a_k * &winv_g * a_k.transpose();
        let mut p_next = &p + a_k.transpose() * &p * &winv_a;
        symmetrize(&mut g_next);
        symmetrize(&mut p_next);

        last_diff = max_abs_diff(&p_next, &p);
        a_k = a_next;
        g_k = g_next;
        p = p_next;
        if last_diff < tol {
            let resid = residual_norm(ops, q, h, r, &p);
            if resid < tol {
                return Ok((p, resid, it));
            }
        }
        if !last_diff.is_finite() {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: last_diff,
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: last_diff,
    })
}

/// Solve `P-_inf X = B` with a Cholesky factorization, one jitter retry.
fn solve_spd(p_pred: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let attempt = |p: &DMatrix<f64>| p.clone().cholesky().map(|ch| ch.solve(rhs));
    if let Some(x) = attempt(p_pred) {
        return Ok(x);
    }
    let jittered = p_pred + DMatrix::identity(p_pred.nrows(), p_pred.ncols()) * 1e-10;
    attempt(&jittered).ok_or_else(|| {
        Error::config("stationary predicted covariance is not positive definite")
    })
}

pub(crate) fn gains_from_pred(
    ops: &dyn TransitionOps,
    h: &DVector<f64>,
    r: f64,
    p_pred: DMatrix<f64>,
    residual: f64,
    iterations: usize,
) -> Result<StationaryGains> {
    let ph = &p_pred * h;
    let s = h.dot(&ph) + r;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::numerical(0, "stationary innovation variance not positive"));
    }
    let gain = &ph / s;
    let mut p_filt = &p_pred - (&gain * gain.transpose()) * s;
    symmetrize(&mut p_filt);

    // G = P_inf A' [P-_inf]^{-1}  <=>  P-_inf G' = A P_inf.
    let rhs = ops.a_mul(&p_filt);
    let smoother_gain = solve_spd(&p_pred, &rhs)?.transpose();

    Ok(StationaryGains {
        p_pred,
        p_filt,
        gain,
        smoother_gain,
        residual,
        iterations,
    })
}

pub(crate) fn solve_with_ops(
    ops: &dyn TransitionOps,
    q: &DMatrix<f64>,
    h: &DVector<f64>,
    r: f64,
    opts: DareOptions,
) -> Result<StationaryGains> {
    SOLVE_COUNT.fetch_add(1, Ordering::Relaxed);
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::config("DARE tolerance must be > 0"));
    }
    if opts.max_iter == 0 {
        return Err(Error::config("DARE max_iter must be >= 1"));
    }
    let (p_pred, residual, iterations) = match opts.method {
        DareMethod::FixedPoint => solve_fixed_point(ops, q, h, r, opts.tol, opts.max_iter)?,
        DareMethod::Doubling => solve_doubling(ops, q, h, r, opts.tol, opts.max_iter)?,
    };
    gains_from_pred(ops, h, r, p_pred, residual, iterations)
}

/// Solve the DARE for a time-invariant [`StepModel`] and derive the
/// stationary filter and smoother gains.
pub fn solve_dare(model: &StepModel, tol: f64, max_iter: usize) -> Result<StationaryGains> {
    solve_dare_with(
        model,
        DareOptions {
            tol,
            max_iter,
            method: DareMethod::FixedPoint,
        },
    )
}

/// [`solve_dare`] with an explicit method selection.
pub fn solve_dare_with(model: &StepModel, opts: DareOptions) -> Result<StationaryGains> {
    let ops = DenseTransition(&model.transition);
    solve_with_ops(
        &ops,
        &model.process_noise,
        &model.measurement_row,
        model.measurement_noise,
        opts,
    )
}

/// Max-abs DARE residual of a candidate solution; the fixed point is
/// self-certifying.
pub fn dare_residual(model: &StepModel, p_pred: &DMatrix<f64>) -> f64 {
    let ops = DenseTransition(&model.transition);
    residual_norm(
        &ops,
        &model.process_noise,
        &model.measurement_row,
        model.measurement_noise,
        p_pred,
    )
}
