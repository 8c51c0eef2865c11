//! Linear-Gaussian state-space machinery: Kalman filter forward pass and
//! RTS smoother backward pass.
//!
//! The model at step `k` is
//!
//! ```text
//! x_k = Psi_k x_{k-1} + q_k,   q_k ~ N(0, Sigma_k)
//! y_k = H_k x_k + r_k,         r_k ~ N(0, R)
//! ```
//!
//! with a scalar measurement throughout. Transition and measurement
//! matrices may vary per step; time-invariant models hand the filter a
//! single shared [`StepModel`] through [`StepModelProvider`].

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gaussian distribution over the latent state: mean vector and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::config(format!(
                "covariance must be {n}x{n}, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov })
    }

    /// Zero-mean state with covariance `var * I`.
    pub fn isotropic(dim: usize, var: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * var,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One step of a linear-Gaussian model: transition, process noise,
/// measurement row and scalar measurement-noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepModel {
    /// Transition matrix `Psi_k` (or `A` for LTI models), n x n.
    pub transition: DMatrix<f64>,
    /// Process-noise covariance `Sigma_k` (or `Q`), n x n.
    pub process_noise: DMatrix<f64>,
    /// Measurement row `H_k` (or `H`), stored as an n-vector.
    pub measurement_row: DVector<f64>,
    /// Measurement-noise variance `R`.
    pub measurement_noise: f64,
}

impl StepModel {
    pub fn new(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        measurement_row: DVector<f64>,
        measurement_noise: f64,
    ) -> Result<Self> {
        let n = transition.nrows();
        if transition.ncols() != n {
            return Err(Error::config("transition matrix must be square"));
        }
        if process_noise.nrows() != n || process_noise.ncols() != n {
            return Err(Error::config(format!(
                "process noise must be {n}x{n}, got {}x{}",
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        if measurement_row.len() != n {
            return Err(Error::config(format!(
                "measurement row must have length {n}, got {}",
                measurement_row.len()
            )));
        }
        if !(measurement_noise.is_finite() && measurement_noise > 0.0) {
            return Err(Error::config(format!(
                "measurement noise must be > 0, got {measurement_noise}"
            )));
        }
        Ok(Self {
            transition,
            process_noise,
            measurement_row,
            measurement_noise,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }
}

/// Per-step model source. `step_model(k)` returns the model used to advance
/// the state from step `k-1` to `k` and assimilate observation `y_k`
/// (0-based `k`). LTI models return a borrow of one shared [`StepModel`];
/// time-varying models build the step on demand.
pub trait StepModelProvider {
    fn state_dim(&self) -> usize;
    fn step_model(&self, k: usize) -> Cow<'_, StepModel>;
}

/// A single [`StepModel`] acts as a time-invariant provider.
impl StepModelProvider for StepModel {
    fn state_dim(&self) -> usize {
        self.state_dim()
    }

    fn step_model(&self, _k: usize) -> Cow<'_, StepModel> {
        Cow::Borrowed(self)
    }
}

/// Full forward-pass record: filtered and predicted states plus gains and
/// innovation variances, one entry per observation.
#[derive(Debug, Clone)]
pub struct FilterTrace {
    pub filtered: Vec<GaussianState>,
    pub predicted: Vec<GaussianState>,
    pub gains: Vec<DVector<f64>>,
    pub innovation_vars: Vec<f64>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }
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

fn ensure_finite_state(step: usize, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(step, "state became non-finite"));
    }
    Ok(())
}

/// Kalman filter forward recursion.
///
/// For each `k`:
///
/// ```text
/// m-_k = Psi_k m_{k-1}
/// P-_k = Psi_k P_{k-1} Psi_k' + Sigma_k
/// S_k  = H_k P-_k H_k' + R
/// K_k  = P-_k H_k' / S_k
/// m_k  = m-_k + K_k (y_k - H_k m-_k)
/// P_k  = P-_k - K_k S_k K_k'
/// ```
///
/// `prior` is the state immediately before the first observation.
/// Covariances are symmetrized after every update.
pub fn kalman_filter(
    provider: &dyn StepModelProvider,
    observations: &[f64],
    prior: &GaussianState,
) -> Result<FilterTrace> {
    let n = provider.state_dim();
    if observations.is_empty() {
        return Err(Error::precondition("observations must be non-empty"));
    }
    if prior.dim() != n {
        return Err(Error::config(format!(
            "prior dimension {} does not match model dimension {n}",
            prior.dim()
        )));
    }

    let len = observations.len();
    let mut filtered = Vec::with_capacity(len);
    let mut predicted = Vec::with_capacity(len);
    let mut gains = Vec::with_capacity(len);
    let mut innovation_vars = Vec::with_capacity(len);

    let mut mean = prior.mean.clone();
    let mut cov = prior.cov.clone();

    for (k, &y) in observations.iter().enumerate() {
        let model = provider.step_model(k);
        if model.state_dim() != n {
            return Err(Error::config(format!(
                "step {k} model dimension {} does not match {n}",
                model.state_dim()
            )));
        }
        let psi = &model.transition;
        let h = &model.measurement_row;

        // Predict.
        let mean_pred = psi * &mean;
        let mut cov_pred = psi * &cov * psi.transpose() + &model.process_noise;
        symmetrize(&mut cov_pred);

        // Update.
        let ph = &cov_pred * h;
        let s = h.dot(&ph) + model.measurement_noise;
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::numerical(
                k,
                format!("innovation variance must be positive, got {s}"),
            ));
        }
        let gain = &ph / s;
        let innovation = y - h.dot(&mean_pred);
        mean = &mean_pred + &gain * innovation;
        cov = &cov_pred - (&gain * gain.transpose()) * s;
        symmetrize(&mut cov);
        ensure_finite_state(k, &mean, &cov)?;

        predicted.push(GaussianState {
            mean: mean_pred,
            cov: cov_pred,
        });
        filtered.push(GaussianState {
            mean: mean.clone(),
            cov: cov.clone(),
        });
        gains.push(gain);
        innovation_vars.push(s);
    }

    Ok(FilterTrace {
        filtered,
        predicted,
        gains,
        innovation_vars,
    })
}

/// Solve `P_pred G' = Psi P_filt` for the smoother gain `G` using a
/// Cholesky factorization, retrying once with diagonal jitter.
fn smoother_gain(
    step: usize,
    psi: &DMatrix<f64>,
    p_filt: &DMatrix<f64>,
    p_pred: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let rhs = psi * p_filt;
    let solve = |p: &DMatrix<f64>| p.clone().cholesky().map(|ch| ch.solve(&rhs).transpose());
    if let Some(g) = solve(p_pred) {
        return Ok(g);
    }
    let jittered = p_pred + DMatrix::identity(p_pred.nrows(), p_pred.ncols()) * 1e-10;
    solve(&jittered).ok_or_else(|| {
        Error::numerical(
            step,
            "predicted covariance not positive definite (after jitter retry)",
        )
    })
}

/// RTS smoother backward recursion over a completed [`FilterTrace`]:
///
/// ```text
/// G_k   = P_k Psi_{k+1}' [P-_{k+1}]^{-1}
/// m^s_k = m_k + G_k (m^s_{k+1} - m-_{k+1})
/// P^s_k = P_k + G_k (P^s_{k+1} - P-_{k+1}) G_k'
/// ```
///
/// The last smoothed state equals the last filtered state exactly.
pub fn rts_smoother(
    trace: &FilterTrace,
    provider: &dyn StepModelProvider,
) -> Result<Vec<GaussianState>> {
    let len = trace.len();
    if len == 0 {
        return Err(Error::precondition("filter trace must be non-empty"));
    }
    if trace.predicted.len() != len || trace.gains.len() != len {
        return Err(Error::config("filter trace has inconsistent lengths"));
    }

    let mut smoothed = vec![trace.filtered[len - 1].clone(); len];
    for k in (0..len.saturating_sub(1)).rev() {
        let model = provider.step_model(k + 1);
        let p_filt = &trace.filtered[k].cov;
        let p_pred_next = &trace.predicted[k + 1].cov;
        let gain = smoother_gain(k + 1, &model.transition, p_filt, p_pred_next)?;

        let dm = &smoothed[k + 1].mean - &trace.predicted[k + 1].mean;
        let dp = &smoothed[k + 1].cov - p_pred_next;
        let mean = &trace.filtered[k].mean + &gain * dm;
        let mut cov = p_filt + &gain * dp * gain.transpose();
        symmetrize(&mut cov);
        ensure_finite_state(k, &mean, &cov)?;
        smoothed[k] = GaussianState { mean, cov };
    }
    Ok(smoothed)
}

/// RTS smoother that returns only the smoothed means, consuming the trace
/// and releasing covariances as the backward pass passes them. Same
/// recursion as [`rts_smoother`]; peak memory stays at roughly the filter
/// trace instead of adding a third covariance sequence.
pub fn rts_smoother_means(
    mut trace: FilterTrace,
    provider: &dyn StepModelProvider,
) -> Result<Vec<DVector<f64>>> {
    let len = trace.len();
    if len == 0 {
        return Err(Error::precondition("filter trace must be non-empty"));
    }
    if trace.predicted.len() != len {
        return Err(Error::config("filter trace has inconsistent lengths"));
    }

    let mut means = vec![DVector::zeros(0); len];
    let last_filtered = trace.filtered.pop().expect("non-empty");
    let mut next_predicted = trace.predicted.pop().expect("non-empty");
    means[len - 1] = last_filtered.mean.clone();
    let mut smoothed_mean = last_filtered.mean;
    let mut smoothed_cov = last_filtered.cov;

    for k in (0..len - 1).rev() {
        let model = provider.step_model(k + 1);
        let filtered = trace.filtered.pop().expect("length checked");
        let predicted = trace.predicted.pop().expect("length checked");
        let gain = smoother_gain(k + 1, &model.transition, &filtered.cov, &next_predicted.cov)?;

        smoothed_mean = &filtered.mean + &gain * (&smoothed_mean - &next_predicted.mean);
        let dp = &smoothed_cov - &next_predicted.cov;
        smoothed_cov = &filtered.cov + &gain * dp * gain.transpose();
        symmetrize(&mut smoothed_cov);
        ensure_finite_state(k, &smoothed_mean, &smoothed_cov)?;
        means[k] = smoothed_mean.clone();

        next_predicted = predicted;
    }
    Ok(means)
}
