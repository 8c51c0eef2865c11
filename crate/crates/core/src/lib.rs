//! Bayesian spectro-temporal estimation for quasi-periodic signals.
//!
//! Two estimators produce the same frequency-by-time magnitude matrix:
//!
//! * [`fourier::estimate_fourierks`] puts Ornstein-Uhlenbeck priors on
//!   time-varying Fourier coefficients and runs a full Kalman filter and
//!   RTS smoother. It handles uneven sampling but carries covariance
//!   matrices through every step.
//! * [`oscillator::estimate_oscks`] models the signal as a bank of damped
//!   stochastic oscillators plus a Brownian bias. The model is LTI, so a
//!   single Riccati solve yields stationary gains and the per-sample work
//!   collapses to mean recursions — much faster on long signals.
//!
//! On top of the estimators, [`ecg`] implements an ECG feature pipeline
//! (iterative QRS detection, R-peak-centered segmentation, masked
//! averaging, 50x50 down-sampling) and [`simbench`] provides simulated
//! signals, an STFT baseline and a wall-clock benchmark harness.

pub mod dare;
pub mod ecg;
pub mod error;
pub mod fourier;
pub mod oscillator;
pub mod signal;
pub mod simbench;
pub mod spectrogram;
pub mod statespace;

pub use error::{Error, Result};
pub use signal::{Sampling, TimedSignal};
