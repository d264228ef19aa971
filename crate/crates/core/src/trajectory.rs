//! Uniformly sampled time series.

use crate::error::{Error, Result};

/// A uniformly sampled observable `x(t)`, optionally with the companion
/// channel `y(t)` of the planar model.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    y: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::build(t0, dt, values, None)
    }

    pub fn with_y(t0: f64, dt: f64, values: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if y.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                got: y.len(),
            });
        }
        Self::build(t0, dt, values, Some(y))
    }

    fn build(t0: f64, dt: f64, values: Vec<f64>, y: Option<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sample spacing must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = y.as_ref().and_then(|y| y.iter().position(|v| !v.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Trajectory { t0, dt, values, y })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Time of sample `i`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Time of the last sample.
    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Nearest sample index for time `t`, if it lies within the trajectory.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t0) / self.dt).round();
        if k < 0.0 || k >= self.len() as f64 {
            return None;
        }
        Some(k as usize)
    }

    /// Radius `|z| = sqrt(x² + y²)` per sample, when both channels are present.
    pub fn radius(&self) -> Option<Vec<f64>> {
        let y = self.y.as_ref()?;
        Some(self.values.iter().zip(y).map(|(x, y)| x.hypot(*y)).collect())
    }

    /// Polar angle per sample, when both channels are present.
    pub fn angle(&self) -> Option<Vec<f64>> {
        let y = self.y.as_ref()?;
        Some(self.values.iter().zip(y).map(|(x, y)| y.atan2(*x)).collect())
    }

    /// Sub-trajectory covering sample indices `[start, end]` inclusive.
    pub fn slice(&self, start: usize, end: usize) -> Result<Trajectory> {
        if start > end || end >= self.len() {
            return Err(Error::OutOfRange(format!(
                "slice [{start}, {end}] outside trajectory of {} samples",
                self.len()
            )));
        }
        Ok(Trajectory {
            t0: self.time(start),
            dt: self.dt,
            values: self.values[start..=end].to_vec(),
            y: self.y.as_ref().map(|y| y[start..=end].to_vec()),
        })
    }

    /// Same samples with a different start time.
    pub fn shifted(&self, t0: f64) -> Trajectory {
        Trajectory {
            t0,
            ..self.clone()
        }
    }

    /// Same samples with a different observable channel.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Trajectory> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Trajectory::new(self.t0, self.dt, values)
    }
}
