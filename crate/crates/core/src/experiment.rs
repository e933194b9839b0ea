//! The full pipeline: forward solve, traces, noise, smoothing, boundary data,
//! initial guess and minimization, plus sweeps and the four-test summary.

use std::fmt;

use rayon::prelude::*;

use crate::coefficient::{Coefficient, TestCase};
use crate::error::Error;
use crate::forward::{extract_traces, solve_forward_fd, TraceData};
use crate::mesh::{ScalarField, UniformGrid};
use crate::objective::{CarlemanParams, InverseConfig};
use crate::optimizer::{initial_guess, minimize, RunRecord};
use crate::preprocess::{add_noise_traces, compute_boundary_data, smooth_traces, BoundaryData, NoiseSpec, SmoothedTraces, Smoothing};
use crate::transform::WField;

/// `(-2.2, 2.2) x (0, 4)` with `1024 x 1024` nodes.
pub fn forward_grid() -> UniformGrid {
    UniformGrid::new(-2.2, 2.2, 0.0, 4.0, 1024, 1024).expect("valid forward grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Forward,
    Traces,
    Noise,
    Smoothing,
    BoundaryData,
    InitialGuess,
    Minimize,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Forward => "forward",
            Stage::Traces => "traces",
            Stage::Noise => "noise",
            Stage::Smoothing => "smoothing",
            Stage::BoundaryData => "boundary data",
            Stage::InitialGuess => "initial guess",
            Stage::Minimize => "minimize",
        })
    }
}

/// A pipeline error tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::error::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub coefficient: Coefficient,
    pub noise: f64,
    pub seed: u64,
    pub inverse: InverseConfig,
    /// `None` picks generalized cross-validation for noisy data and an
    /// interpolating fit otherwise.
    pub smoothing: Option<Smoothing>,
    pub forward_grid: UniformGrid,
}

impl ExperimentConfig {
    pub fn test(case: TestCase, noise: f64, seed: u64) -> Self {
        Self {
            coefficient: Coefficient::Test(case),
            noise,
            seed,
            inverse: InverseConfig::default(),
            smoothing: None,
            forward_grid: forward_grid(),
        }
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing.unwrap_or(if self.noise > 0.0 { Smoothing::Gcv } else { Smoothing::Fixed(1.0) })
    }

    /// The truth used for error reporting, absent when it vanishes on `(0, 1)`.
    pub fn truth(&self) -> Option<&Coefficient> {
        (!self.coefficient.is_zero()).then_some(&self.coefficient)
    }
}

/// Everything computed before the minimization.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub u: ScalarField,
    pub clean: TraceData,
    pub noisy: TraceData,
    pub smoothed: SmoothedTraces,
    pub boundary: BoundaryData,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub prepared: Prepared,
    pub w0: WField,
    pub run: RunRecord,
}

pub fn simulate(coefficient: &Coefficient, grid: &UniformGrid) -> Result<(ScalarField, TraceData), StageError> {
    let u = solve_forward_fd(coefficient, grid).at(Stage::Forward)?;
    let traces = extract_traces(&u).at(Stage::Traces)?;
    Ok((u, traces))
}

/// Noise, smoothing and boundary data for given clean traces.
pub fn preprocess(
    clean: &TraceData,
    noise: f64,
    seed: u64,
    smoothing: Smoothing,
    grid: &UniformGrid,
) -> Result<(TraceData, SmoothedTraces, BoundaryData), StageError> {
    let spec = NoiseSpec::new(noise, seed).at(Stage::Noise)?;
    let noisy = add_noise_traces(clean, spec);
    let smoothed = smooth_traces(&noisy, smoothing).at(Stage::Smoothing)?;
    let boundary = compute_boundary_data(&smoothed, grid).at(Stage::BoundaryData)?;
    Ok((noisy, smoothed, boundary))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, StageError> {
    let (u, clean) = simulate(&cfg.coefficient, &cfg.forward_grid)?;
    prepare_from(cfg, u, clean)
}

fn prepare_from(cfg: &ExperimentConfig, u: ScalarField, clean: TraceData) -> Result<Prepared, StageError> {
    let (noisy, smoothed, boundary) = preprocess(&clean, cfg.noise, cfg.seed, cfg.smoothing(), &cfg.inverse.grid)?;
    Ok(Prepared { u, clean, noisy, smoothed, boundary })
}

/// Initial guess and minimization on prepared data.
pub fn invert(prepared: &Prepared, inverse: &InverseConfig, truth: Option<&Coefficient>) -> Result<(WField, RunRecord), StageError> {
    let w0 = initial_guess(&prepared.boundary, &inverse.grid).at(Stage::InitialGuess)?;
    let run = minimize(&w0, &prepared.boundary, inverse, truth).at(Stage::Minimize)?;
    Ok((w0, run))
}

pub fn run_test_case(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let prepared = prepare(cfg)?;
    let (w0, run) = invert(&prepared, &cfg.inverse, cfg.truth())?;
    Ok(Outcome { prepared, w0, run })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Lambda,
    Alpha,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Alpha => "alpha",
        })
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub run: Result<RunRecord, StageError>,
}

/// Independent runs on the same data, differing only in `parameter`. A failed
/// preparation aborts the sweep; failures of single runs are kept per point.
pub fn run_sweep(parameter: SweepParameter, values: &[f64], base: &ExperimentConfig) -> Result<Vec<SweepPoint>, StageError> {
    let prepared = prepare(base)?;
    let truth = base.truth();
    Ok(values
        .par_iter()
        .map(|&value| {
            let (lambda, alpha) = match parameter {
                SweepParameter::Lambda => (value, base.inverse.carleman.alpha()),
                SweepParameter::Alpha => (base.inverse.carleman.lambda(), value),
            };
            let run = CarlemanParams::new(lambda, alpha)
                .at(Stage::Minimize)
                .and_then(|carleman| {
                    let inverse = InverseConfig { carleman, ..base.inverse };
                    invert(&prepared, &inverse, truth).map(|(_, run)| run)
                });
            SweepPoint { value, run }
        })
        .collect())
}

/// Published error and iteration count for each reference test.
pub fn published(case: TestCase) -> (f64, usize) {
    match case {
        TestCase::One => (0.1628, 30),
        TestCase::Two => (0.2907, 33),
        TestCase::Three => (0.0804, 51),
        TestCase::Four => (0.3222, 41),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub error: f64,
    pub iterations: usize,
    pub initial_j: f64,
    pub final_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub case: TestCase,
    pub runs: Vec<SeedRun>,
    /// Seeds whose run failed, with the message.
    pub failures: Vec<(u64, String)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl TableRow {
    fn median_of(&self, f: impl Fn(&SeedRun) -> f64) -> f64 {
        median(self.runs.iter().map(f).collect())
    }

    pub fn median_error(&self) -> f64 {
        self.median_of(|r| r.error)
    }

    pub fn median_iterations(&self) -> f64 {
        self.median_of(|r| r.iterations as f64)
    }

    pub fn median_initial_j(&self) -> f64 {
        self.median_of(|r| r.initial_j)
    }

    pub fn median_final_j(&self) -> f64 {
        self.median_of(|r| r.final_j)
    }

    pub fn median_decrease_factor(&self) -> f64 {
        self.median_of(|r| r.initial_j / r.final_j)
    }
}

/// Runs each test at noise level `noise` for every seed. The forward solve is
/// shared across seeds; tests run concurrently.
pub fn reproduce_table(cases: &[TestCase], seeds: &[u64], noise: f64, inverse: &InverseConfig) -> Vec<TableRow> {
    cases
        .par_iter()
        .map(|&case| {
            let base = ExperimentConfig { inverse: *inverse, ..ExperimentConfig::test(case, noise, 0) };
            let mut row = TableRow { case, runs: Vec::new(), failures: Vec::new() };
            let (u, clean) = match simulate(&base.coefficient, &base.forward_grid) {
                Ok(v) => v,
                Err(e) => {
                    row.failures = seeds.iter().map(|&s| (s, e.to_string())).collect();
                    return row;
                }
            };
            let results: Vec<_> = seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = ExperimentConfig { seed, ..base.clone() };
                    let prepared = prepare_from(&cfg, u.clone(), clean.clone())?;
                    invert(&prepared, &cfg.inverse, cfg.truth()).map(|(_, run)| run)
                })
                .collect();
            for (&seed, result) in seeds.iter().zip(results) {
                match result {
                    Ok(run) => row.runs.push(SeedRun {
                        seed,
                        error: run.error.unwrap_or(f64::NAN),
                        iterations: run.iterations(),
                        initial_j: run.initial_j(),
                        final_j: run.final_j(),
                    }),
                    Err(e) => row.failures.push((seed, e.to_string())),
                }
            }
            row
        })
        .collect()
}
