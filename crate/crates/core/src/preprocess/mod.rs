//! From raw boundary traces to the data `p0`, `p1` of the inverse problem.

mod acoustic;
mod spline;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use acoustic::{reduce_acoustic, AcousticReduction};
pub use spline::{EndConditions, SmoothingSpline};

use crate::error::{Error, Result};
use crate::forward::TraceData;
use crate::mesh::UniformGrid;
use crate::series::TimeSeries;

/// Lowest admissible value of the smoothed `f0`.
pub const F0_FLOOR: f64 = 0.25;

/// Multiplicative uniform noise of relative amplitude `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    level: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::InvalidNoise(level));
        }
        Ok(Self { level, seed })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn perturb(series: &TimeSeries, level: f64, rng: &mut ChaCha8Rng) -> TimeSeries {
    if level == 0.0 {
        return series.clone();
    }
    series.map_values(|v| v * (1.0 + rng.random_range(-level..=level)))
}

/// Multiplies every sample by `1 + r`, `r` uniform on `[-level, level]`.
pub fn add_noise(series: &TimeSeries, spec: NoiseSpec) -> TimeSeries {
    perturb(series, spec.level, &mut spec.rng(0))
}

/// Noise on both traces, drawn from independent streams of the same seed.
pub fn add_noise_traces(traces: &TraceData, spec: NoiseSpec) -> TraceData {
    TraceData {
        f0: perturb(&traces.f0, spec.level, &mut spec.rng(0)),
        f1: perturb(&traces.f1, spec.level, &mut spec.rng(1)),
    }
}

/// How the smoothing parameter of the trace splines is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Generalized cross-validation, separately for each trace.
    Gcv,
    /// Discrepancy principle for uniform noise of the given relative level.
    Discrepancy { noise: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SmoothedTraces {
    pub f0: SmoothingSpline,
    pub f1: SmoothingSpline,
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn fit_trace(series: &TimeSeries, start: f64, smoothing: Smoothing) -> Result<SmoothingSpline> {
    let ends = EndConditions::start_value(start);
    match smoothing {
        Smoothing::Fixed(p) => SmoothingSpline::fit(series, ends, p),
        Smoothing::Gcv => SmoothingSpline::fit_gcv(series, ends),
        Smoothing::Discrepancy { noise } => {
            let target = noise * rms(series.values()) / 3f64.sqrt();
            SmoothingSpline::fit_discrepancy(series, ends, target)
        }
    }
}

/// Smooths `f0` with `f0(0) = 1/2` and `f1` with `f1(0) = 0` imposed exactly;
/// both splines have zero curvature at the final time.
pub fn smooth_traces(traces: &TraceData, smoothing: Smoothing) -> Result<SmoothedTraces> {
    Ok(SmoothedTraces {
        f0: fit_trace(&traces.f0, 0.5, smoothing)?,
        f1: fit_trace(&traces.f1, 0.0, smoothing)?,
    })
}

/// `p0 = w(0, t)` and `p1 = w_x(0, t)` on the time nodes of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub p0: TimeSeries,
    pub p1: TimeSeries,
}

impl BoundaryData {
    pub fn t(&self) -> &[f64] {
        self.p0.t()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,p0,p1")?;
        for ((t, a), b) in self.p0.t().iter().zip(self.p0.values()).zip(self.p1.values()) {
            writeln!(out, "{t},{a},{b}")?;
        }
        Ok(())
    }
}

/// `p0 = f0'/f0` and `p1 = d/dt [(f0' + f1)/f0]`, from exact spline
/// derivatives at the time nodes of `grid`.
pub fn compute_boundary_data(traces: &SmoothedTraces, grid: &UniformGrid) -> Result<BoundaryData> {
    let (t_lo, t_hi) = (grid.t_min(), grid.t_max());
    for (&t, &v) in traces.f0.knots().iter().zip(traces.f0.knot_values()) {
        if t >= t_lo && t <= t_hi && v < F0_FLOOR {
            return Err(Error::TraceBelowFloor { t, value: v, floor: F0_FLOOR });
        }
    }
    let ts = grid.ts();
    let mut p0 = Vec::with_capacity(ts.len());
    let mut p1 = Vec::with_capacity(ts.len());
    for &t in &ts {
        let f = traces.f0.evaluate(t, 0);
        if !(f >= F0_FLOOR) {
            return Err(Error::TraceBelowFloor { t, value: f, floor: F0_FLOOR });
        }
        let df = traces.f0.evaluate(t, 1);
        let ddf = traces.f0.evaluate(t, 2);
        let g = traces.f1.evaluate(t, 0);
        let dg = traces.f1.evaluate(t, 1);
        p0.push(df / f);
        p1.push((ddf + dg) / f - (df + g) * df / (f * f));
    }
    Ok(BoundaryData { p0: TimeSeries::new(ts.clone(), p0)?, p1: TimeSeries::new(ts, p1)? })
}
