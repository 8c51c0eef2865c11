//! Spectro-temporal matrices: assembly from coefficient estimates,
//! averaging with a max mask, and block-mean resizing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Frequency-by-time matrix of sinusoid magnitudes.
///
/// `values[(j, k)]` is the magnitude of the component at `freqs[j]` at
/// column time `t0 + k * dt`. The first `burn_in_cols` columns cover the
/// filter's transient and are flagged so consumers can trim them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroTemporalMatrix {
    pub values: DMatrix<f64>,
    pub freqs: Vec<f64>,
    pub dt: f64,
    pub t0: f64,
    pub burn_in_cols: usize,
}

impl SpectroTemporalMatrix {
    pub fn new(
        values: DMatrix<f64>,
        freqs: Vec<f64>,
        dt: f64,
        t0: f64,
        burn_in_cols: usize,
    ) -> Result<Self> {
        if freqs.len() != values.nrows() {
            return Err(Error::config(format!(
                "{} frequencies for {} rows",
                freqs.len(),
                values.nrows()
            )));
        }
        if freqs
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::config("frequencies must be strictly ascending"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("matrix entries must be finite and >= 0"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("column spacing dt must be > 0"));
        }
        let burn_in_cols = burn_in_cols.min(values.ncols());
        Ok(Self {
            values,
            freqs,
            dt,
            t0,
            burn_in_cols,
        })
    }

    pub fn num_freqs(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Time of column `k`.
    pub fn col_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

/// Fixed-size feature image produced by the averaging pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Feature images are always `SIDE x SIDE`.
    pub const SIDE: usize = 50;

    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != Self::SIDE || values.ncols() != Self::SIDE {
            return Err(Error::config(format!(
                "feature matrix must be {0}x{0}, got {1}x{2}",
                Self::SIDE,
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("feature entries must be finite and >= 0"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Maps spectro-temporal rows to the positions of the `(a_j, b_j)`
/// coefficient pair inside a state mean vector.
#[derive(Debug, Clone)]
pub struct CoefficientLayout {
    /// `pairs[j] = (index of a_j, index of b_j)`.
    pub pairs: Vec<(usize, usize)>,
    /// Frequency of each pair, ascending.
    pub freqs: Vec<f64>,
}

impl CoefficientLayout {
    /// Layout of the Fourier-coefficient state `[a_0, a_1..a_M, b_1..b_M]`.
    pub fn fourier(num_harmonics: usize, f0: f64) -> Self {
        let pairs = (1..=num_harmonics).map(|j| (j, num_harmonics + j)).collect();
        let freqs = (1..=num_harmonics).map(|j| j as f64 * f0).collect();
        Self { pairs, freqs }
    }

    /// Layout of the oscillator-bank state `[bias, a_1, b_1, .., a_M, b_M]`.
    pub fn oscillator(freqs: &[f64]) -> Self {
        let pairs = (0..freqs.len()).map(|j| (2 * j + 1, 2 * j + 2)).collect();
        Self {
            pairs,
            freqs: freqs.to_vec(),
        }
    }
}

/// Extract per-frequency magnitudes `sqrt(a_j^2 + b_j^2)` from a sequence
/// of state means, one column per step.
pub fn magnitude_from_coefficients(
    smoothed_means: &[DVector<f64>],
    layout: &CoefficientLayout,
    dt: f64,
    t0: f64,
    burn_in_cols: usize,
) -> Result<SpectroTemporalMatrix> {
    if smoothed_means.is_empty() {
        return Err(Error::precondition("no state means supplied"));
    }
    let dim = smoothed_means[0].len();
    for &(ia, ib) in &layout.pairs {
        if ia >= dim || ib >= dim {
            return Err(Error::config(format!(
                "coefficient layout indices ({ia}, {ib}) out of bounds for state dimension {dim}"
            )));
        }
    }
    let rows = layout.pairs.len();
    let cols = smoothed_means.len();
    let mut values = DMatrix::zeros(rows, cols);
    for (k, mean) in smoothed_means.iter().enumerate() {
        if mean.len() != dim {
            return Err(Error::config("state means have inconsistent dimensions"));
        }
        for (j, &(ia, ib)) in layout.pairs.iter().enumerate() {
            values[(j, k)] = mean[ia].hypot(mean[ib]);
        }
    }
    SpectroTemporalMatrix::new(values, layout.freqs.clone(), dt, t0, burn_in_cols)
}

/// Elementwise `(mean over inputs) * (max over inputs)`.
///
/// All inputs must share one shape; metadata is taken from the first.
pub fn average_with_max_mask(matrices: &[SpectroTemporalMatrix]) -> Result<SpectroTemporalMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::precondition("need at least one matrix to average"))?;
    let (rows, cols) = (first.num_freqs(), first.num_cols());
    for (i, m) in matrices.iter().enumerate() {
        if m.num_freqs() != rows || m.num_cols() != cols {
            return Err(Error::precondition(format!(
                "matrix {i} has shape {}x{}, expected {rows}x{cols}",
                m.num_freqs(),
                m.num_cols()
            )));
        }
    }
    let inv_k = 1.0 / matrices.len() as f64;
    let mut values = DMatrix::zeros(rows, cols);
    for j in 0..rows {
        for k in 0..cols {
            let mut sum = 0.0;
            let mut max = f64::NEG_INFINITY;
            for m in matrices {
                let v = m.values[(j, k)];
                sum += v;
                max = max.max(v);
            }
            values[(j, k)] = sum * inv_k * max;
        }
    }
    SpectroTemporalMatrix::new(
        values,
        first.freqs.clone(),
        first.dt,
        first.t0,
        first.burn_in_cols,
    )
}

/// Contiguous bin boundaries splitting `len` indices into `bins` parts as
/// equally as possible, larger bins first.
fn bin_edges(len: usize, bins: usize) -> Vec<(usize, usize)> {
    let base = len / bins;
    let rem = len % bins;
    let mut edges = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 0..bins {
        let size = base + usize::from(b < rem);
        edges.push((start, start + size));
        start += size;
    }
    edges
}

/// Down-sample by averaging over a grid of contiguous blocks.
pub fn resize_block_mean(
    values: &DMatrix<f64>,
    out_rows: usize,
    out_cols: usize,
) -> Result<DMatrix<f64>> {
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::config("output dimensions must be positive"));
    }
    if values.nrows() < out_rows || values.ncols() < out_cols {
        return Err(Error::config(format!(
            "cannot down-sample {}x{} to {out_rows}x{out_cols}",
            values.nrows(),
            values.ncols()
        )));
    }
    let row_bins = bin_edges(values.nrows(), out_rows);
    let col_bins = bin_edges(values.ncols(), out_cols);
    let mut out = DMatrix::zeros(out_rows, out_cols);
    for (bi, &(r0, r1)) in row_bins.iter().enumerate() {
        for (bj, &(c0, c1)) in col_bins.iter().enumerate() {
            let mut sum = 0.0;
            for i in r0..r1 {
                for j in c0..c1 {
                    sum += values[(i, j)];
                }
            }
            out[(bi, bj)] = sum / ((r1 - r0) * (c1 - c0)) as f64;
        }
    }
    Ok(out)
}

/// Resize a spectro-temporal matrix to the fixed feature-image size.
pub fn feature_from_matrix(matrix: &SpectroTemporalMatrix) -> Result<FeatureMatrix> {
    let resized = resize_block_mean(&matrix.values, FeatureMatrix::SIDE, FeatureMatrix::SIDE)?;
    FeatureMatrix::new(resized)
}
