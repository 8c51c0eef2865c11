//! Time-varying Fourier-coefficient model.
//!
//! The signal is expanded as `a_0 + sum_j a_j(t) cos(2 pi j f0 t) +
//! b_j(t) sin(2 pi j f0 t)` with independent Ornstein-Uhlenbeck priors on
//! the coefficients. Discretized, every coefficient follows the scalar
//! recursion `c(t_k) = psi c(t_{k-1}) + w_k` with
//!
//! ```text
//! psi   = exp(-lambda dt)
//! Sigma = q (1 - exp(-2 lambda dt))
//! ```
//!
//! so the full state `[a_0, a_1..a_M, b_1..b_M]` has diagonal transition
//! and process noise while the measurement row carries the cos/sin basis
//! evaluated at the sample time. Estimation runs the Kalman filter and
//! RTS smoother and reduces the smoothed coefficient means to a magnitude
//! matrix.

use std::borrow::Cow;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::{Sampling, TimedSignal};
use crate::spectrogram::{magnitude_from_coefficients, CoefficientLayout, SpectroTemporalMatrix};
use crate::statespace::{
    kalman_filter, rts_smoother_means, GaussianState, StepModel, StepModelProvider,
};

/// Hyperparameters of the Fourier-coefficient model.
///
/// `lambda` and `q` apply to every coefficient including `a_0`; the
/// optional per-frequency vectors override them for `j = 1..=M` (both
/// `a_j` and `b_j`), leaving `a_0` on the scalar values.
#[derive(Debug, Clone)]
pub struct FourierBasisSpec {
    /// Fundamental frequency `f0` in Hz; row `j` covers `j * f0`.
    pub f0: f64,
    /// Number of harmonics `M`; the state has `2M + 1` entries.
    pub num_harmonics: usize,
    /// Inverse time constant of the coefficient priors, 1/s.
    pub lambda: f64,
    /// Diffusion coefficient of the coefficient priors.
    pub q: f64,
    /// Measurement-noise variance.
    pub r: f64,
    /// Initial coefficient variance (prior is zero-mean `prior_var * I`).
    pub prior_var: f64,
    /// Optional per-frequency override of `lambda`, length `M`.
    pub lambda_per_freq: Option<Vec<f64>>,
    /// Optional per-frequency override of `q`, length `M`.
    pub q_per_freq: Option<Vec<f64>>,
}

impl FourierBasisSpec {
    /// Spec with scalar `lambda`/`q` and `prior_var = q`.
    pub fn new(f0: f64, num_harmonics: usize, lambda: f64, q: f64, r: f64) -> Self {
        Self {
            f0,
            num_harmonics,
            lambda,
            q,
            r,
            prior_var: q,
            lambda_per_freq: None,
            q_per_freq: None,
        }
    }

    /// Default parameters for 300 Hz ECG signals: `lambda = 10`,
    /// `q = r = 1`, 400 harmonics of 0.1 Hz spanning 0-40 Hz.
    pub fn ecg_default() -> Self {
        Self::new(0.1, 400, 10.0, 1.0, 1.0)
    }

    pub fn state_dim(&self) -> usize {
        2 * self.num_harmonics + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::config(format!("f0 must be > 0, got {}", self.f0)));
        }
        if self.num_harmonics == 0 {
            return Err(Error::config("num_harmonics must be >= 1"));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("q", self.q),
            ("r", self.r),
            ("prior_var", self.prior_var),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, vec) in [
            ("lambda_per_freq", &self.lambda_per_freq),
            ("q_per_freq", &self.q_per_freq),
        ] {
            if let Some(vals) = vec {
                if vals.len() != self.num_harmonics {
                    return Err(Error::config(format!(
                        "{name} must have length {}, got {}",
                        self.num_harmonics,
                        vals.len()
                    )));
                }
                if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::config(format!("{name} entries must be > 0")));
                }
            }
        }
        Ok(())
    }

    /// `lambda` for state entry `i` in `[a_0, a_1..a_M, b_1..b_M]` order.
    fn lambda_at(&self, i: usize) -> f64 {
        match (&self.lambda_per_freq, harmonic_of(i, self.num_harmonics)) {
            (Some(v), Some(j)) => v[j - 1],
            _ => self.lambda,
        }
    }

    fn q_at(&self, i: usize) -> f64 {
        match (&self.q_per_freq, harmonic_of(i, self.num_harmonics)) {
            (Some(v), Some(j)) => v[j - 1],
            _ => self.q,
        }
    }
}

/// Harmonic index `j` of state entry `i`, or `None` for `a_0`.
fn harmonic_of(i: usize, num_harmonics: usize) -> Option<usize> {
    match i {
        0 => None,
        _ if i <= num_harmonics => Some(i),
        _ => Some(i - num_harmonics),
    }
}

/// Measurement row `[1, cos(2 pi f0 t), .., cos(2 pi M f0 t),
/// sin(2 pi f0 t), .., sin(2 pi M f0 t)]`.
fn measurement_row(spec: &FourierBasisSpec, t: f64) -> DVector<f64> {
    let m = spec.num_harmonics;
    let mut h = DVector::zeros(2 * m + 1);
    h[0] = 1.0;
    for j in 1..=m {
        let (sin, cos) = (TAU * j as f64 * spec.f0 * t).sin_cos();
        h[j] = cos;
        h[m + j] = sin;
    }
    h
}

/// Discretized step from `t_prev` to `t_cur`: diagonal transition
/// `exp(-lambda dt)`, diagonal process noise `q (1 - exp(-2 lambda dt))`,
/// measurement row evaluated at `t_cur`.
pub fn build_step_model(spec: &FourierBasisSpec, t_prev: f64, t_cur: f64) -> Result<StepModel> {
    spec.validate()?;
    let dt = t_cur - t_prev;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::precondition(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = spec.state_dim();
    let mut transition = DMatrix::zeros(n, n);
    let mut process_noise = DMatrix::zeros(n, n);
    for i in 0..n {
        let lambda = spec.lambda_at(i);
        transition[(i, i)] = (-lambda * dt).exp();
        process_noise[(i, i)] = spec.q_at(i) * (1.0 - (-2.0 * lambda * dt).exp());
    }
    StepModel::new(
        transition,
        process_noise,
        measurement_row(spec, t_cur),
        spec.r,
    )
}

/// Step-model provider over the sample times of one signal.
///
/// For uniform sampling the diagonal transition/noise are constant and
/// built once; the measurement row still varies with the sample time. The
/// prior sits one `dt` before the first sample; with explicit timestamps
/// the first step is an identity transition so the prior is interpreted
/// at the first sample time.
struct FourierStepProvider<'a> {
    spec: &'a FourierBasisSpec,
    signal: &'a TimedSignal,
    uniform_diag: Option<(DVector<f64>, DVector<f64>)>,
}

impl<'a> FourierStepProvider<'a> {
    fn new(spec: &'a FourierBasisSpec, signal: &'a TimedSignal) -> Self {
        let uniform_diag = signal.uniform_dt().map(|dt| {
            let n = spec.state_dim();
            let psi = DVector::from_fn(n, |i, _| (-spec.lambda_at(i) * dt).exp());
            let sigma =
                DVector::from_fn(n, |i, _| {
                    spec.q_at(i) * (1.0 - (-2.0 * spec.lambda_at(i) * dt).exp())
                });
            (psi, sigma)
        });
        Self {
            spec,
            signal,
            uniform_diag,
        }
    }

    fn step_from_diag(&self, psi: &DVector<f64>, sigma: &DVector<f64>, t: f64) -> StepModel {
        StepModel {
            transition: DMatrix::from_diagonal(psi),
            process_noise: DMatrix::from_diagonal(sigma),
            measurement_row: measurement_row(self.spec, t),
            measurement_noise: self.spec.r,
        }
    }

    fn identity_step(&self, t: f64) -> StepModel {
        let n = self.spec.state_dim();
        StepModel {
            transition: DMatrix::identity(n, n),
            process_noise: DMatrix::zeros(n, n),
            measurement_row: measurement_row(self.spec, t),
            measurement_noise: self.spec.r,
        }
    }
}

impl StepModelProvider for FourierStepProvider<'_> {
    fn state_dim(&self) -> usize {
        self.spec.state_dim()
    }

    fn step_model(&self, k: usize) -> Cow<'_, StepModel> {
        let t = self.signal.time_at(k);
        let model = match (&self.uniform_diag, k) {
            (Some((psi, sigma)), _) => self.step_from_diag(psi, sigma, t),
            (None, 0) => self.identity_step(t),
            (None, _) => {
                let t_prev = self.signal.time_at(k - 1);
                let n = self.spec.state_dim();
                let dt = t - t_prev;
                let psi = DVector::from_fn(n, |i, _| (-self.spec.lambda_at(i) * dt).exp());
                let sigma = DVector::from_fn(n, |i, _| {
                    self.spec.q_at(i) * (1.0 - (-2.0 * self.spec.lambda_at(i) * dt).exp())
                });
                self.step_from_diag(&psi, &sigma, t)
            }
        };
        Cow::Owned(model)
    }
}

/// Burn-in columns: samples within `5 / lambda` seconds of the start,
/// capped at half the signal so very slow priors still leave data usable.
pub(crate) fn burn_in_columns(times_from_start: impl Iterator<Item = f64>, lambda: f64, n: usize) -> usize {
    let horizon = 5.0 / lambda;
    let count = times_from_start.take_while(|&t| t < horizon).count();
    count.min(n / 2)
}

/// Run the full Kalman filter + RTS smoother and reduce the smoothed
/// coefficient means to an `M x N` magnitude matrix.
pub fn estimate_fourierks(
    signal: &TimedSignal,
    spec: &FourierBasisSpec,
) -> Result<SpectroTemporalMatrix> {
    spec.validate()?;
    if let Some(dt) = signal.uniform_dt() {
        let nyquist = 0.5 / dt;
        let top = spec.num_harmonics as f64 * spec.f0;
        if top > nyquist + 1e-12 {
            return Err(Error::config(format!(
                "top frequency {top} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
    }
    let provider = FourierStepProvider::new(spec, signal);
    let prior = GaussianState::isotropic(spec.state_dim(), spec.prior_var);
    let trace = kalman_filter(&provider, signal.samples(), &prior)?;
    let means = rts_smoother_means(trace, &provider)?;

    let layout = CoefficientLayout::fourier(spec.num_harmonics, spec.f0);
    let n = signal.len();
    let t0 = signal.start_time();
    let burn_in = burn_in_columns(
        (0..n).map(|k| signal.time_at(k) - t0),
        spec.lambda,
        n,
    );
    let dt = match signal.sampling() {
        Sampling::Uniform { dt, .. } => *dt,
        // Column spacing metadata for unevenly sampled signals uses the
        // mean spacing; column times are only nominal in that case.
        Sampling::Explicit(times) => {
            (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
        }
    };
    magnitude_from_coefficients(&means, &layout, dt, t0, burn_in)
}
