//! Scalar signals with uniform or explicit sample times.

use crate::error::{Error, Result};

/// Sample-time description of a [`TimedSignal`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Uniform grid `t_k = t0 + k * dt`.
    Uniform { dt: f64, t0: f64 },
    /// Explicit strictly increasing timestamps, one per sample.
    Explicit(Vec<f64>),
}

/// A scalar signal `y_1..y_N` with its sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedSignal {
    samples: Vec<f64>,
    sampling: Sampling,
}

impl TimedSignal {
    /// Uniformly sampled signal starting at time `t0` with spacing `dt`.
    pub fn uniform(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("dt must be finite and > 0, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::config("t0 must be finite"));
        }
        Self::validate_samples(&samples)?;
        Ok(Self {
            samples,
            sampling: Sampling::Uniform { dt, t0 },
        })
    }

    /// Signal with explicit timestamps; `times` must be strictly increasing.
    pub fn with_times(samples: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::config(format!(
                "times length {} does not match samples length {}",
                times.len(),
                samples.len()
            )));
        }
        Self::validate_samples(&samples)?;
        for (i, w) in times.windows(2).enumerate() {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::precondition(format!(
                    "timestamps must be strictly increasing (violated at index {})",
                    i + 1
                )));
            }
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::precondition("timestamps must be finite"));
        }
        Ok(Self {
            samples,
            sampling: Sampling::Explicit(times),
        })
    }

    fn validate_samples(samples: &[f64]) -> Result<()> {
        if samples.len() < 2 {
            return Err(Error::precondition(format!(
                "signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::precondition(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sampling(&self) -> &Sampling {
        &self.sampling
    }

    /// Time of sample `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        match &self.sampling {
            Sampling::Uniform { dt, t0 } => t0 + k as f64 * dt,
            Sampling::Explicit(times) => times[k],
        }
    }

    /// Uniform sample spacing, if this signal is uniformly sampled.
    pub fn uniform_dt(&self) -> Option<f64> {
        match &self.sampling {
            Sampling::Uniform { dt, .. } => Some(*dt),
            Sampling::Explicit(_) => None,
        }
    }

    /// Time of the first sample.
    pub fn start_time(&self) -> f64 {
        self.time_at(0)
    }

    /// All sample times, materialized.
    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time_at(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_times() {
        let s = TimedSignal::uniform(vec![0.0, 1.0, 2.0], 0.5, 1.0).unwrap();
        assert_eq!(s.time_at(0), 1.0);
        assert_eq!(s.time_at(2), 2.0);
        assert_eq!(s.uniform_dt(), Some(0.5));
    }

    #[test]
    fn rejects_short_and_nonfinite() {
        assert!(TimedSignal::uniform(vec![1.0], 0.1, 0.0).is_err());
        assert!(TimedSignal::uniform(vec![1.0, f64::NAN], 0.1, 0.0).is_err());
        assert!(TimedSignal::uniform(vec![1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_increasing_times() {
        let err = TimedSignal::with_times(vec![1.0, 2.0, 3.0], vec![0.0, 0.2, 0.2]);
        assert!(err.is_err());
    }
}
