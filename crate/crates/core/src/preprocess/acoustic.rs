use crate::error::{Error, Result};
use crate::series::TimeSeries;

use super::spline::{EndConditions, SmoothingSpline};

/// Sound speed `c(y)` rewritten in travel-time coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticReduction {
    /// Sample positions `y_k`.
    pub depth: Vec<f64>,
    /// `x(y_k) = int_0^{y_k} ds / c(s)`.
    pub travel_time: Vec<f64>,
    /// `p(x(y_k)) = c'' c / 2 - (c')^2 / 4` at `y_k`.
    pub potential: Vec<f64>,
}

impl AcousticReduction {
    /// Linear interpolation of the potential in travel time.
    pub fn potential_at(&self, x: f64) -> f64 {
        let k = self.travel_time.partition_point(|&v| v <= x);
        if k == 0 {
            return self.potential[0];
        }
        if k == self.travel_time.len() {
            return self.potential[k - 1];
        }
        let (x0, x1) = (self.travel_time[k - 1], self.travel_time[k]);
        let frac = (x - x0) / (x1 - x0);
        self.potential[k - 1] * (1.0 - frac) + self.potential[k] * frac
    }
}

/// Reduces `c^{-2} u_tt = u_yy` to potential form. Derivatives of `c` come
/// from the interpolating cubic spline; travel times from cumulative
/// trapezoid quadrature of `1/c`, started at `y = 0`.
pub fn reduce_acoustic(c: &TimeSeries) -> Result<AcousticReduction> {
    if let Some(k) = c.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveSpeed { y: c.t()[k], value: c.values()[k] });
    }
    let spline = SmoothingSpline::fit(c, EndConditions::default(), 1.0)?;
    let y = c.t();
    let inv: Vec<f64> = c.values().iter().map(|v| 1.0 / v).collect();
    let mut cumulative = vec![0.0; y.len()];
    for k in 1..y.len() {
        cumulative[k] = cumulative[k - 1] + 0.5 * (y[k] - y[k - 1]) * (inv[k] + inv[k - 1]);
    }
    // shift so that x(0) = 0; the speed is 1 left of the origin
    let origin = if y[0] >= 0.0 {
        -y[0]
    } else {
        let k = y.partition_point(|&v| v <= 0.0).max(1) - 1;
        let at_k = cumulative[k];
        at_k + (0.0 - y[k]) / (y[k + 1] - y[k]) * (cumulative[k + 1] - at_k)
    };
    let travel_time = cumulative.iter().map(|v| v - origin).collect();
    let potential = y
        .iter()
        .map(|&s| {
            let (v, d1, d2) = (spline.evaluate(s, 0), spline.evaluate(s, 1), spline.evaluate(s, 2));
            0.5 * d2 * v - 0.25 * d1 * d1
        })
        .collect();
    Ok(AcousticReduction { depth: y.to_vec(), travel_time, potential })
}
