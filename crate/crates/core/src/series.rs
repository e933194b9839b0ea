use crate::error::{Error, Result};

/// A function of time sampled on strictly increasing nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} nodes but {} values",
                t.len(),
                values.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::InvalidSeries("empty series".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSeries("time nodes must be strictly increasing".into()));
        }
        if t.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite entry".into()));
        }
        Ok(Self { t, values })
    }

    pub fn from_fn(t: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = t.iter().map(|&s| f(s)).collect();
        Self::new(t, values)
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Applies `f` to every value; the caller keeps the result finite.
    pub(crate) fn map_values(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self { t: self.t.clone(), values: self.values.iter().copied().map(f).collect() }
    }

    /// Piecewise-linear evaluation, clamped to the end values.
    pub fn interpolate(&self, s: f64) -> f64 {
        let n = self.t.len();
        if s <= self.t[0] {
            return self.values[0];
        }
        if s >= self.t[n - 1] {
            return self.values[n - 1];
        }
        let k = self.t.partition_point(|&v| v <= s) - 1;
        let frac = (s - self.t[k]) / (self.t[k + 1] - self.t[k]);
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
