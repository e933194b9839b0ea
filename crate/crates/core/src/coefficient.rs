//! The unknown potential `a(x)`, supported on `(0, 1)` and nonnegative there.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The four reference potentials used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestCase {
    /// `x^2 exp(-(2x - 1)^2)`
    One,
    /// `10 exp(-100 (x - 0.5)^2)`
    Two,
    /// three narrow Gaussians of height 2 at 0.3, 0.5, 0.7
    Three,
    /// `1 - sin(pi (x - 0.876) / (1 + pi (x - 0.876)))`, oscillating near `0.876 - 1/pi`
    Four,
}

impl TestCase {
    pub const ALL: [TestCase; 4] = [TestCase::One, TestCase::Two, TestCase::Three, TestCase::Four];

    pub fn id(self) -> u8 {
        match self {
            TestCase::One => 1,
            TestCase::Two => 2,
            TestCase::Three => 3,
            TestCase::Four => 4,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(TestCase::One),
            2 => Ok(TestCase::Two),
            3 => Ok(TestCase::Three),
            4 => Ok(TestCase::Four),
            _ => Err(Error::InvalidParameter(format!("test id {id} is not in 1..=4"))),
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            TestCase::One => "a(x) = x^2 exp(-(2x-1)^2)",
            TestCase::Two => "a(x) = 10 exp(-100(x-0.5)^2)",
            TestCase::Three => "a(x) = 2exp(-400(x-0.3)^2) + 2exp(-200(x-0.5)^2) + 2exp(-400(x-0.7)^2)",
            TestCase::Four => "a(x) = 1 - sin(pi(x-0.876)/(1+pi(x-0.876)))",
        }
    }

    fn eval_inside(self, x: f64) -> f64 {
        match self {
            TestCase::One => x * x * (-(2.0 * x - 1.0).powi(2)).exp(),
            TestCase::Two => 10.0 * (-100.0 * (x - 0.5).powi(2)).exp(),
            TestCase::Three => {
                2.0 * (-400.0 * (x - 0.3).powi(2)).exp()
                    + 2.0 * (-200.0 * (x - 0.5).powi(2)).exp()
                    + 2.0 * (-400.0 * (x - 0.7).powi(2)).exp()
            }
            TestCase::Four => {
                let s = PI * (x - 0.876);
                let v = 1.0 - (s / (1.0 + s)).sin();
                // the pole at x = 0.876 - 1/pi has no limit; any value in [0, 2] is admissible
                if v.is_finite() {
                    v
                } else {
                    1.0
                }
            }
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for TestCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let id: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("test id '{s}' is not an integer")))?;
        Self::from_id(id)
    }
}

/// Potential `a(x)`; evaluation returns 0 outside the open support `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Zero,
    /// A constant value on `(0, 1)`.
    Constant(f64),
    Test(TestCase),
    /// Piecewise-linear interpolation of nodal samples.
    Sampled { xs: Vec<f64>, values: Vec<f64> },
}

impl Coefficient {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidCoefficient(format!("constant {value} must be finite and >= 0")));
        }
        Ok(Coefficient::Constant(value))
    }

    pub fn sampled(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(Error::InvalidCoefficient("need at least two (x, a) samples of equal length".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCoefficient("sample abscissae must increase".into()));
        }
        if let Some((x, v)) = xs.iter().zip(&values).find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidCoefficient(format!("non-finite sample {v} at x = {x}")));
        }
        if let Some((x, v)) = xs
            .iter()
            .zip(&values)
            .find(|(x, v)| **x > 0.0 && **x < 1.0 && **v < 0.0)
        {
            return Err(Error::InvalidCoefficient(format!("negative sample {v} at x = {x}")));
        }
        Ok(Coefficient::Sampled { xs, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::Constant(c) => *c,
            Coefficient::Test(case) => case.eval_inside(x),
            Coefficient::Sampled { xs, values } => {
                let n = xs.len();
                if x <= xs[0] {
                    return values[0];
                }
                if x >= xs[n - 1] {
                    return values[n - 1];
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                let frac = (x - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// True when the coefficient vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Zero => true,
            Coefficient::Constant(c) => *c == 0.0,
            Coefficient::Test(_) => false,
            Coefficient::Sampled { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

impl From<TestCase> for Coefficient {
    fn from(case: TestCase) -> Self {
        Coefficient::Test(case)
    }
}
