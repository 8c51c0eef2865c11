//! Simulated multi-sinusoid signals, an STFT baseline, a frequency-recovery
//! metric and the CPU-time benchmark comparing the estimators.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::fourier::{estimate_fourierks, FourierBasisSpec};
use crate::oscillator::{OscillatorBankSpec, PreparedOscillator};
use crate::signal::{Sampling, TimedSignal};
use crate::spectrogram::SpectroTemporalMatrix;

/// One constant-frequency regime of a piecewise sinusoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub t_start: f64,
    pub t_end: f64,
    /// Unit-amplitude sinusoid frequencies active in `[t_start, t_end)`.
    pub frequencies: Vec<f64>,
}

/// Piecewise multi-sinusoid observed through additive Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSinusoidSpec {
    pub regimes: Vec<Regime>,
    pub noise_sd: f64,
    pub dt: f64,
    pub seed: u64,
}

impl PiecewiseSinusoidSpec {
    /// The reference five-regime signal on `t in [1, 500)`:
    /// frequency pairs (0.01, 0.3), (0.2, 0.3), (0.13, 0.2), (0.2, 0.43),
    /// (0.1, 0.43) switching at t = 150, 250, 300, 400.
    pub fn reference(dt: f64, noise_sd: f64, seed: u64) -> Self {
        let seg = |t0: f64, t1: f64, f: [f64; 2]| Regime {
            t_start: t0,
            t_end: t1,
            frequencies: f.to_vec(),
        };
        Self {
            regimes: vec![
                seg(1.0, 150.0, [0.01, 0.3]),
                seg(150.0, 250.0, [0.2, 0.3]),
                seg(250.0, 300.0, [0.13, 0.2]),
                seg(300.0, 400.0, [0.2, 0.43]),
                seg(400.0, 500.0, [0.1, 0.43]),
            ],
            noise_sd,
            dt,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::config("need at least one regime"));
        }
        for (i, r) in self.regimes.iter().enumerate() {
            if r.t_end.partial_cmp(&r.t_start) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::config(format!("regime {i} has non-positive span")));
            }
            if r.frequencies.is_empty() {
                return Err(Error::config(format!("regime {i} has no frequencies")));
            }
        }
        for w in self.regimes.windows(2) {
            if (w[1].t_start - w[0].t_end).abs() > 1e-12 {
                return Err(Error::config(
                    "regimes must be contiguous, non-overlapping and ascending",
                ));
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::config("noise_sd must be >= 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt must be > 0"));
        }
        Ok(())
    }

    /// Internal regime-switch times.
    pub fn transition_times(&self) -> Vec<f64> {
        self.regimes.iter().skip(1).map(|r| r.t_start).collect()
    }

    /// Noise-free signal value at time `t`, or `None` outside all regimes.
    pub fn clean_value(&self, t: f64) -> Option<f64> {
        self.regime_at(t).map(|r| {
            r.frequencies
                .iter()
                .map(|f| (std::f64::consts::TAU * f * t).sin())
                .sum()
        })
    }

    pub fn regime_at(&self, t: f64) -> Option<&Regime> {
        self.regimes
            .iter()
            .find(|r| t >= r.t_start && t < r.t_end)
    }
}

/// Sample the piecewise sinusoid on its time span; deterministic per seed.
pub fn generate_simulated(spec: &PiecewiseSinusoidSpec) -> Result<TimedSignal> {
    spec.validate()?;
    let t0 = spec.regimes[0].t_start;
    let t_end = spec.regimes.last().unwrap().t_end;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::config(e.to_string()))?;

    let mut samples = Vec::new();
    let mut k = 0usize;
    loop {
        let t = t0 + k as f64 * spec.dt;
        if t >= t_end {
            break;
        }
        let clean = spec.clean_value(t).unwrap_or(0.0);
        let noise = if spec.noise_sd > 0.0 {
            spec.noise_sd * normal.sample(&mut rng)
        } else {
            0.0
        };
        samples.push(clean + noise);
        k += 1;
    }
    TimedSignal::uniform(samples, spec.dt, t0)
}

/// Window shape for the STFT baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rect,
}

fn window_values(window: Window, len: usize) -> Vec<f64> {
    match window {
        Window::Rect => vec![1.0; len],
        Window::Hann => {
            if len == 1 {
                return vec![1.0];
            }
            let denom = (len - 1) as f64;
            (0..len)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / denom).cos())
                .collect()
        }
    }
}

/// Magnitude spectrogram over sliding windows. Rows are the DFT bins
/// `k / (window_len * dt)` for `k = 1..=window_len/2` (DC excluded, the
/// same convention as the model-based estimators); columns sit at window
/// centers spaced by `window_len - overlap` samples.
pub fn stft_baseline(
    signal: &TimedSignal,
    window_len: usize,
    overlap: usize,
    window: Window,
) -> Result<SpectroTemporalMatrix> {
    let dt = match signal.sampling() {
        Sampling::Uniform { dt, .. } => *dt,
        Sampling::Explicit(_) => {
            return Err(Error::config("the STFT baseline requires uniform sampling"))
        }
    };
    let n = signal.len();
    if window_len == 0 || window_len > n {
        return Err(Error::config(format!(
            "window length {window_len} must be in 1..={n}"
        )));
    }
    if overlap >= window_len {
        return Err(Error::config(format!(
            "overlap {overlap} must be smaller than window length {window_len}"
        )));
    }

    let hop = window_len - overlap;
    let taper = window_values(window, window_len);
    let n_bins = window_len / 2;
    let starts: Vec<usize> = (0..)
        .map(|i| i * hop)
        .take_while(|s| s + window_len <= n)
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(window_len);
    let mut values = DMatrix::zeros(n_bins, starts.len());
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    for (col, &start) in starts.iter().enumerate() {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(signal.samples()[start + i] * taper[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 1..=n_bins {
            values[(k - 1, col)] = buf[k].norm();
        }
    }

    let freqs: Vec<f64> = (1..=n_bins)
        .map(|k| k as f64 / (window_len as f64 * dt))
        .collect();
    let center_offset = (window_len - 1) as f64 / 2.0 * dt;
    SpectroTemporalMatrix::new(
        values,
        freqs,
        hop as f64 * dt,
        signal.start_time() + center_offset,
        0,
    )
}

/// Fraction of columns (outside a guard band around regime transitions)
/// whose `top_k` strongest rows cover every active frequency of the
/// column's regime to within one grid bin.
pub fn frequency_recovery_score(
    s: &SpectroTemporalMatrix,
    truth: &PiecewiseSinusoidSpec,
    top_k: usize,
    guard_secs: f64,
) -> f64 {
    let transitions = truth.transition_times();
    let nearest_row = |f: f64| -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, g) in s.freqs.iter().enumerate() {
            let d = (g - f).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    };

    let mut evaluated = 0usize;
    let mut hits = 0usize;
    for col in 0..s.num_cols() {
        let t = s.col_time(col);
        let Some(regime) = truth.regime_at(t) else {
            continue;
        };
        if transitions.iter().any(|&tt| (t - tt).abs() < guard_secs) {
            continue;
        }

        let column = s.values.column(col);
        let mut order: Vec<usize> = (0..s.num_freqs()).collect();
        order.sort_by(|&a, &b| column[b].partial_cmp(&column[a]).unwrap());
        let top = &order[..top_k.min(order.len())];

        let all_found = regime.frequencies.iter().all(|&f| {
            let want = nearest_row(f) as isize;
            top.iter().any(|&r| (r as isize - want).abs() <= 1)
        });
        evaluated += 1;
        if all_found {
            hits += 1;
        }
    }
    if evaluated == 0 {
        return 0.0;
    }
    hits as f64 / evaluated as f64
}

/// Estimation methods covered by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    FourierKs,
    OscKs,
    Stft,
}

impl BenchMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::FourierKs => "fourierks",
            BenchMethod::OscKs => "oscks",
            BenchMethod::Stft => "stft",
        }
    }
}

/// Timed phase of one benchmark repeat. OscKS is split so the one-off
/// Riccati solve is visible next to the per-sample filtering cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchPhase {
    Total,
    DareSolve,
    Filtering,
}

impl BenchPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchPhase::Total => "total",
            BenchPhase::DareSolve => "dare",
            BenchPhase::Filtering => "filter",
        }
    }
}

/// One timed measurement.
#[derive(Debug, Clone)]
pub struct BenchEntry {
    pub method: BenchMethod,
    pub length: usize,
    pub repeat: usize,
    pub phase: BenchPhase,
    pub seconds: f64,
}

/// Shared estimator parameters for the benchmark signal.
#[derive(Debug, Clone)]
pub struct SimEstimatorParams {
    pub f0: f64,
    pub num_freqs: usize,
    pub lambda: f64,
    /// Diffusion for the Fourier-coefficient model (stationary coefficient
    /// variance is `q` directly).
    pub q_fourier: f64,
    /// Diffusion for the oscillator bank (stationary variance `q / 2 lambda`;
    /// `2 lambda * q_fourier` matches the two priors).
    pub q_osc: f64,
    pub q_b: f64,
    pub r: f64,
    pub stft_window: usize,
    pub stft_overlap: usize,
}

impl Default for SimEstimatorParams {
    fn default() -> Self {
        let lambda = 0.01;
        Self {
            f0: 0.01,
            num_freqs: 50,
            lambda,
            q_fourier: 1.0,
            q_osc: 2.0 * lambda,
            q_b: 1e-7,
            r: 1.0,
            stft_window: 350,
            stft_overlap: 340,
        }
    }
}

impl SimEstimatorParams {
    pub fn fourier_spec(&self) -> FourierBasisSpec {
        FourierBasisSpec::new(self.f0, self.num_freqs, self.lambda, self.q_fourier, self.r)
    }

    pub fn oscillator_spec(&self, dt: f64) -> OscillatorBankSpec {
        OscillatorBankSpec::harmonic(
            self.f0,
            self.num_freqs,
            self.lambda,
            self.q_osc,
            self.q_b,
            self.r,
            dt,
        )
    }
}

/// Benchmark configuration: signal lengths (the reference signal resampled
/// to `N` points over its 499 s span), repeat count and estimator params.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<BenchMethod>,
    pub lengths: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub params: SimEstimatorParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![BenchMethod::FourierKs, BenchMethod::OscKs, BenchMethod::Stft],
            lengths: vec![5000, 50000],
            repeats: 20,
            seed: 42,
            noise_sd: 0.1,
            params: SimEstimatorParams::default(),
        }
    }
}

/// Per-repeat wall-clock timings plus a machine note.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
    pub machine: String,
}

impl BenchReport {
    /// Mean seconds over repeats for one cell.
    pub fn mean_seconds(&self, method: BenchMethod, length: usize, phase: BenchPhase) -> Option<f64> {
        let times: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.method == method && e.length == length && e.phase == phase)
            .map(|e| e.seconds)
            .collect();
        if times.is_empty() {
            return None;
        }
        Some(times.iter().sum::<f64>() / times.len() as f64)
    }

    /// Minimum seconds over repeats for one cell.
    pub fn min_seconds(&self, method: BenchMethod, length: usize, phase: BenchPhase) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.method == method && e.length == length && e.phase == phase)
            .map(|e| e.seconds)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.min(s))))
    }

    /// FourierKS / OscKS mean total-time ratio at one length.
    pub fn speedup(&self, length: usize) -> Option<f64> {
        let fourier = self.mean_seconds(BenchMethod::FourierKs, length, BenchPhase::Total)?;
        let osc = self.mean_seconds(BenchMethod::OscKs, length, BenchPhase::Total)?;
        Some(fourier / osc)
    }
}

fn machine_note() -> String {
    let cpus = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!("{}-{} {cpus} cpus", std::env::consts::OS, std::env::consts::ARCH)
}

/// Duration of one timed end-to-end run of `method`, with the OscKS run
/// split into (dare, filtering).
fn run_once(
    method: BenchMethod,
    signal: &TimedSignal,
    params: &SimEstimatorParams,
) -> Result<Vec<(BenchPhase, f64)>> {
    match method {
        BenchMethod::FourierKs => {
            let start = Instant::now();
            let s = estimate_fourierks(signal, &params.fourier_spec())?;
            std::hint::black_box(s.values[(0, 0)]);
            Ok(vec![(BenchPhase::Total, start.elapsed().as_secs_f64())])
        }
        BenchMethod::OscKs => {
            let dt = signal.uniform_dt().expect("benchmark signals are uniform");
            let start = Instant::now();
            let prepared = PreparedOscillator::new(params.oscillator_spec(dt))?;
            let dare_secs = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let s = prepared.estimate(signal)?;
            std::hint::black_box(s.values[(0, 0)]);
            let filter_secs = start.elapsed().as_secs_f64();
            Ok(vec![
                (BenchPhase::DareSolve, dare_secs),
                (BenchPhase::Filtering, filter_secs),
                (BenchPhase::Total, dare_secs + filter_secs),
            ])
        }
        BenchMethod::Stft => {
            let start = Instant::now();
            let window = params.stft_window.min(signal.len());
            let overlap = params.stft_overlap.min(window.saturating_sub(1));
            let s = stft_baseline(signal, window, overlap, Window::Hann)?;
            std::hint::black_box(s.values[(0, 0)]);
            Ok(vec![(BenchPhase::Total, start.elapsed().as_secs_f64())])
        }
    }
}

/// Run every method on the reference signal resampled to each requested
/// length. One warm-up run per (method, length) is discarded; runs are
/// strictly sequential.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    if config.repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    if config.lengths.is_empty() {
        return Err(Error::config("need at least one signal length"));
    }
    let span = 499.0;
    let mut entries = Vec::new();
    for &length in &config.lengths {
        if length < 2 {
            return Err(Error::config("signal length must be >= 2"));
        }
        let dt = span / length as f64;
        let spec = PiecewiseSinusoidSpec::reference(dt, config.noise_sd, config.seed);
        let signal = generate_simulated(&spec)?;
        for &method in &config.methods {
            run_once(method, &signal, &config.params)?; // warm-up, discarded
            for repeat in 1..=config.repeats {
                for (phase, seconds) in run_once(method, &signal, &config.params)? {
                    entries.push(BenchEntry {
                        method,
                        length,
                        repeat,
                        phase,
                        seconds,
                    });
                }
            }
        }
    }
    Ok(BenchReport {
        entries,
        machine: machine_note(),
    })
}
