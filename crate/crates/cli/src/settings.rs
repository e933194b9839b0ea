//! Run parameters as `key=value` pairs: parsed from config files and flags,
//! written back as the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use convexify_core::coefficient::{Coefficient, TestCase};
use convexify_core::experiment::{forward_grid, ExperimentConfig};
use convexify_core::objective::{CarlemanParams, GradientMetric, InverseConfig};
use convexify_core::preprocess::Smoothing;

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSource {
    /// The reference coefficient of the selected test.
    Test,
    Zero,
    /// CSV with columns `x,a`.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingChoice {
    Auto,
    Gcv,
    Discrepancy,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub test: TestCase,
    pub coefficient: CoefficientSource,
    pub noise: f64,
    pub seed: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    /// `None` takes the default of the chosen metric.
    pub gamma0: Option<f64>,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub metric: GradientMetric,
    pub smoothing: SmoothingChoice,
}

impl Default for Settings {
    fn default() -> Self {
        let inverse = InverseConfig::default();
        Self {
            test: TestCase::One,
            coefficient: CoefficientSource::Test,
            noise: 0.1,
            seed: 1,
            lambda: inverse.carleman.lambda(),
            alpha: inverse.carleman.alpha(),
            beta: inverse.beta,
            mu: inverse.mu,
            gamma0: None,
            stop_tol: inverse.stop_tol,
            max_iter: inverse.max_iter,
            metric: inverse.metric,
            smoothing: SmoothingChoice::Auto,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| anyhow!("{key}: cannot parse '{value}'"))
}

impl Settings {
    pub const KEYS: [&'static str; 13] = [
        "test",
        "coefficient",
        "noise",
        "seed",
        "lambda",
        "alpha",
        "beta",
        "mu",
        "gamma0",
        "stop_tol",
        "max_iter",
        "metric",
        "smoothing",
    ];

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "test" => self.test = value.parse().map_err(|e| anyhow!("test: {e}"))?,
            "coefficient" => {
                self.coefficient = match value {
                    "test" => CoefficientSource::Test,
                    "zero" => CoefficientSource::Zero,
                    path => CoefficientSource::File(PathBuf::from(path)),
                }
            }
            "noise" => self.noise = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "lambda" => self.lambda = number(key, value)?,
            "alpha" => self.alpha = number(key, value)?,
            "beta" => self.beta = number(key, value)?,
            "mu" => self.mu = number(key, value)?,
            "gamma0" => self.gamma0 = Some(number(key, value)?),
            "stop_tol" => self.stop_tol = number(key, value)?,
            "max_iter" => self.max_iter = number(key, value)?,
            "metric" => {
                self.metric = match value {
                    "energy" => GradientMetric::Energy,
                    "nodal" => GradientMetric::Nodal,
                    other => bail!("metric: expected 'energy' or 'nodal', got '{other}'"),
                }
            }
            "smoothing" => {
                self.smoothing = match value {
                    "auto" => SmoothingChoice::Auto,
                    "gcv" => SmoothingChoice::Gcv,
                    "discrepancy" => SmoothingChoice::Discrepancy,
                    p => SmoothingChoice::Fixed(number(key, p)?),
                }
            }
            other => bail!("unknown key '{other}' (known: {})", Self::KEYS.join(", ")),
        }
        Ok(())
    }

    /// Applies every `key=value` line; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').with_context(|| format!("line {}: expected key=value", n + 1))?;
            self.apply(key, value).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn gamma0(&self) -> f64 {
        self.gamma0.unwrap_or(match self.metric {
            GradientMetric::Energy => InverseConfig::default().gamma0,
            GradientMetric::Nodal => InverseConfig::nodal().gamma0,
        })
    }

    /// Every key with its resolved value; applying the result to the defaults
    /// reproduces these settings.
    pub fn manifest(&self, command: &str) -> String {
        let mut out = format!("# convexify {command}\n");
        let coefficient = match &self.coefficient {
            CoefficientSource::Test => "test".to_string(),
            CoefficientSource::Zero => "zero".to_string(),
            CoefficientSource::File(p) => p.display().to_string(),
        };
        let metric = match self.metric {
            GradientMetric::Energy => "energy",
            GradientMetric::Nodal => "nodal",
        };
        let smoothing = match self.smoothing {
            SmoothingChoice::Auto => "auto".to_string(),
            SmoothingChoice::Gcv => "gcv".to_string(),
            SmoothingChoice::Discrepancy => "discrepancy".to_string(),
            SmoothingChoice::Fixed(p) => p.to_string(),
        };
        let pairs: [(&str, String); 13] = [
            ("test", self.test.to_string()),
            ("coefficient", coefficient),
            ("noise", self.noise.to_string()),
            ("seed", self.seed.to_string()),
            ("lambda", self.lambda.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("mu", self.mu.to_string()),
            ("gamma0", self.gamma0().to_string()),
            ("stop_tol", self.stop_tol.to_string()),
            ("max_iter", self.max_iter.to_string()),
            ("metric", metric.to_string()),
            ("smoothing", smoothing),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn coefficient(&self) -> Result<Coefficient> {
        Ok(match &self.coefficient {
            CoefficientSource::Test => Coefficient::Test(self.test),
            CoefficientSource::Zero => Coefficient::Zero,
            CoefficientSource::File(path) => read_coefficient(path)?,
        })
    }

    pub fn inverse(&self) -> Result<InverseConfig> {
        let inverse = InverseConfig {
            carleman: CarlemanParams::new(self.lambda, self.alpha)?,
            beta: self.beta,
            mu: self.mu,
            gamma0: self.gamma0(),
            stop_tol: self.stop_tol,
            max_iter: self.max_iter,
            metric: self.metric,
            ..InverseConfig::default()
        };
        inverse.validate()?;
        Ok(inverse)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            coefficient: self.coefficient()?,
            noise: self.noise,
            seed: self.seed,
            inverse: self.inverse()?,
            smoothing: match self.smoothing {
                SmoothingChoice::Auto => None,
                SmoothingChoice::Gcv => Some(Smoothing::Gcv),
                SmoothingChoice::Discrepancy => Some(Smoothing::Discrepancy { noise: self.noise }),
                SmoothingChoice::Fixed(p) => Some(Smoothing::Fixed(p)),
            },
            forward_grid: forward_grid(),
        })
    }
}

fn read_coefficient(path: &Path) -> Result<Coefficient> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading coefficient {}", path.display()))?;
    let (mut xs, mut values) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|s| s.trim().parse().ok())
                .with_context(|| format!("bad coefficient row {record:?}"))
        };
        xs.push(field(0)?);
        values.push(field(1)?);
    }
    Ok(Coefficient::sampled(xs, values)?)
}
