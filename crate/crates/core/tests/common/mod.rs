//! Shared test oracles and fixtures: exact batch Gaussian conditioning,
//! reference matrix exponentials and quadrature, a naive DFT, and
//! synthetic ECG generators. Everything here is independent of the
//! recursions under test.

#![allow(dead_code)]
// Index-driven loops below walk several parallel sequences and block
// offsets at once.
#![allow(clippy::needless_range_loop)]

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use spectemp::statespace::{GaussianState, StepModel, StepModelProvider};

/// Small deterministic generator for fixtures (64-bit LCG).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn gauss(&mut self) -> f64 {
        let u1 = (self.next_f64()).max(1e-12);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Per-step model list acting as a provider.
pub struct SeqProvider(pub Vec<StepModel>);

impl StepModelProvider for SeqProvider {
    fn state_dim(&self) -> usize {
        self.0[0].state_dim()
    }

    fn step_model(&self, k: usize) -> Cow<'_, StepModel> {
        Cow::Borrowed(&self.0[k])
    }
}

/// Random stable-ish step model for oracle comparisons.
pub fn random_model(rng: &mut Lcg, n: usize) -> StepModel {
    let mut transition = DMatrix::from_fn(n, n, |_, _| rng.uniform(-0.25, 0.25));
    for i in 0..n {
        transition[(i, i)] = rng.uniform(0.3, 0.95);
    }
    let b = DMatrix::from_fn(n, n, |_, _| rng.uniform(-0.5, 0.5));
    let process_noise = &b * b.transpose() * 0.3 + DMatrix::identity(n, n) * 0.02;
    let measurement_row = DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
    StepModel::new(transition, process_noise, measurement_row, rng.uniform(0.2, 2.0)).unwrap()
}

pub fn random_prior(rng: &mut Lcg, n: usize) -> GaussianState {
    let b = DMatrix::from_fn(n, n, |_, _| rng.uniform(-0.5, 0.5));
    GaussianState::new(
        DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0)),
        &b * b.transpose() * 0.5 + DMatrix::identity(n, n) * 0.1,
    )
    .unwrap()
}

/// Largest elementwise `|a - b| / max(1, |b|)` over a vector pair.
pub fn max_rel_diff_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (0..a.len())
        .map(|i| (a[i] - b[i]).abs() / b[i].abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Largest elementwise `|a - b| / max(1, |b|)` over a matrix pair.
pub fn max_rel_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Exact batch Gaussian posterior by direct joint-covariance conditioning.
///
/// Builds the joint distribution of all states `x_0..x_{N-1}` (after the
/// per-step transitions applied to the prior) and the first `num_obs`
/// measurements, conditions in one shot, and returns the posterior mean
/// and covariance of every state. Cubic in `N * n`, fine for the small
/// models it is used on.
pub fn batch_posterior(
    models: &[StepModel],
    prior: &GaussianState,
    ys: &[f64],
    num_obs: usize,
) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
    let n = prior.dim();
    let steps = models.len();
    assert!(num_obs <= steps && num_obs <= ys.len());
    let total = steps * n;

    // Joint mean and covariance of the stacked states.
    let mut mu = DVector::<f64>::zeros(total);
    let mut cov = DMatrix::<f64>::zeros(total, total);

    let mut mean_prev = prior.mean.clone();
    for k in 0..steps {
        let mean_k = &models[k].transition * &mean_prev;
        mu.rows_mut(k * n, n).copy_from(&mean_k);
        mean_prev = mean_k;
    }

    // cov[k][l]: recurse over rows; cov(x_k, x_l) = Psi_k cov(x_{k-1}, x_l)
    // for k > l, and the diagonal adds process noise.
    let mut prev_like = prior.cov.clone(); // cov(x_{k-1}, x_{k-1}) rolling
    for k in 0..steps {
        let psi = &models[k].transition;
        let diag = psi * &prev_like * psi.transpose() + &models[k].process_noise;
        cov.view_mut((k * n, k * n), (n, n)).copy_from(&diag);
        for l in 0..k {
            let above = cov.view((( k - 1) * n, l * n), (n, n)).clone_owned();
            let block = psi * above;
            cov.view_mut((k * n, l * n), (n, n)).copy_from(&block);
            cov.view_mut((l * n, k * n), (n, n))
                .copy_from(&block.transpose());
        }
        prev_like = diag;
    }

    // Measurement projection for the first `num_obs` observations.
    let mut h_big = DMatrix::<f64>::zeros(num_obs, total);
    let mut r_diag = DVector::<f64>::zeros(num_obs);
    for k in 0..num_obs {
        h_big
            .view_mut((k, k * n), (1, n))
            .copy_from(&models[k].measurement_row.transpose());
        r_diag[k] = models[k].measurement_noise;
    }

    let c_yy = &h_big * &cov * h_big.transpose() + DMatrix::from_diagonal(&r_diag);
    let c_xy = &cov * h_big.transpose();
    let y_vec = DVector::from_iterator(num_obs, ys.iter().take(num_obs).cloned());
    let innovation = &y_vec - &h_big * &mu;

    let chol = c_yy.cholesky().expect("measurement covariance must be PD");
    let w = chol.solve(&innovation);
    let post_mu = &mu + &c_xy * w;
    let gain = chol.solve(&c_xy.transpose()); // C_yy^{-1} C_xy'
    let post_cov = &cov - &c_xy * gain;

    let means = (0..steps)
        .map(|k| post_mu.rows(k * n, n).clone_owned())
        .collect();
    let covs = (0..steps)
        .map(|k| post_cov.view((k * n, k * n), (n, n)).clone_owned())
        .collect();
    (means, covs)
}

/// Reference matrix exponential: scaling and squaring with a Taylor tail.
pub fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * n as f64;
    let scale = norm.log2().ceil().max(0.0) as u32 + 2;
    let b = a / 2f64.powi(scale as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..60 {
        term = &term * &b / k as f64;
        result += &term;
        if term.amax() < 1e-20 {
            break;
        }
    }
    for _ in 0..scale {
        result = &result * &result;
    }
    result
}

/// Composite-Simpson quadrature of a matrix-valued function on `[0, upper]`.
pub fn simpson_matrix<F: Fn(f64) -> DMatrix<f64>>(
    f: F,
    upper: f64,
    intervals: usize,
) -> DMatrix<f64> {
    assert!(intervals.is_multiple_of(2));
    let h = upper / intervals as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..intervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(i as f64 * h) * weight;
    }
    acc * (h / 3.0)
}

/// Naive O(L^2) windowed DFT magnitudes for bins `1..=L/2`.
pub fn naive_dft_magnitudes(frame: &[f64], taper: &[f64]) -> Vec<f64> {
    let l = frame.len();
    (1..=l / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, (&x, &w)) in frame.iter().zip(taper).enumerate() {
                let phase = -std::f64::consts::TAU * k as f64 * i as f64 / l as f64;
                re += x * w * phase.cos();
                im += x * w * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Pearson correlation over two equally long slices.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da.sqrt() * db.sqrt())
}

/// Flatten matrix columns `skip_cols..` for correlation comparisons.
pub fn flatten_from(values: &DMatrix<f64>, skip_cols: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for col in skip_cols..values.ncols() {
        for row in 0..values.nrows() {
            out.push(values[(row, col)]);
        }
    }
    out
}

// --- synthetic ECG fixtures ------------------------------------------------

pub struct EcgFixture {
    pub samples: Vec<f64>,
    pub truth: Vec<usize>,
    pub fs: f64,
}

fn add_gaussian(y: &mut [f64], center: f64, sigma: f64, amp: f64) {
    let lo = ((center - 6.0 * sigma).floor().max(0.0)) as usize;
    let hi = ((center + 6.0 * sigma).ceil() as usize).min(y.len().saturating_sub(1));
    for (i, v) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let d = (i as f64 - center) / sigma;
        *v += amp * (-0.5 * d * d).exp();
    }
}

/// Synthetic single-lead ECG: Gaussian QRS spikes with optional P and T
/// waves, beat times driven by the supplied RR sequence.
pub fn synth_ecg(
    fs: f64,
    duration: f64,
    mut rr_of_beat: impl FnMut(usize) -> f64,
    with_waves: bool,
) -> EcgFixture {
    let len = (duration * fs) as usize;
    let mut samples = vec![0.0; len];
    let mut truth = Vec::new();
    let mut t = 0.5;
    let mut beat = 0usize;
    while t < duration - 0.5 {
        let center = t * fs;
        add_gaussian(&mut samples, center, 0.012 * fs, 1.0);
        if with_waves {
            add_gaussian(&mut samples, center - 0.18 * fs, 0.025 * fs, 0.12);
            add_gaussian(&mut samples, center + 0.28 * fs, 0.06 * fs, 0.25);
        }
        truth.push(center.round() as usize);
        t += rr_of_beat(beat);
        beat += 1;
    }
    EcgFixture { samples, truth, fs }
}

/// Regular sinus-like rhythm: RR = 0.8 s with 10% beat-to-beat jitter
/// (upper end of sinus arrhythmia).
pub fn regular_ecg(fs: f64, duration: f64, seed: u64) -> EcgFixture {
    let mut rng = Lcg(seed);
    synth_ecg(fs, duration, move |_| 0.8 * (1.0 + 0.10 * (2.0 * rng.next_f64() - 1.0)), true)
}

/// Irregular rhythm: RR uniformly jittered by +/-30%.
pub fn jittered_ecg(fs: f64, duration: f64, seed: u64) -> EcgFixture {
    let mut rng = Lcg(seed);
    synth_ecg(fs, duration, move |_| 0.8 * (1.0 + 0.3 * (2.0 * rng.next_f64() - 1.0)), true)
}

/// 40 s spike train at 1 Hz with two 20x-amplitude burst artifacts that
/// capture an adaptive detector's thresholds.
pub fn burst_ecg(fs: f64) -> EcgFixture {
    let duration = 40.0;
    let mut fixture = synth_ecg(fs, duration, |_| 1.0, false);
    for burst_t in [2.8, 20.2] {
        add_gaussian(&mut fixture.samples, burst_t * fs, 0.015 * fs, 20.0);
    }
    fixture
}

/// Fraction of `truth` peaks matched by some detection within `tol` samples.
pub fn recovery_fraction(truth: &[usize], detected: &[usize], tol: usize) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth
        .iter()
        .filter(|&&t| {
            detected
                .iter()
                .any(|&p| (p as isize - t as isize).unsigned_abs() <= tol)
        })
        .count();
    hits as f64 / truth.len() as f64
}
