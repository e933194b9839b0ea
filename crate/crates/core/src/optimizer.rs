//! Gradient descent on the weighted functional with a raw-descent line search.

use std::io::Write;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::mesh::{ScalarField, UniformGrid};
use crate::objective::{eval_j, gradient_unchecked, j_value, GradientMetric, InverseConfig, FIXED_COLUMNS};
use crate::metric::EnergyMetric;
use crate::preprocess::BoundaryData;
use crate::transform::{reconstruct_a, Reconstruction, WField};

/// Smallest step tried before the line search gives up.
pub const MIN_STEP: f64 = 1e-15;
/// Step growth cap relative to the initial step for the nodal gradient.
pub const STEP_CAP: f64 = 1e3;
/// Below this `L2` norm a coefficient counts as zero in the stopping rule.
pub const ZERO_NORM: f64 = 1e-8;

/// Largest step the line search grows to. In the energy metric a unit step
/// is the exact minimizer of the quadratic part of the functional.
pub fn step_cap(cfg: &InverseConfig) -> f64 {
    match cfg.metric {
        GradientMetric::Nodal => STEP_CAP * cfg.gamma0,
        GradientMetric::Energy => cfg.gamma0.max(1.0),
    }
}

/// `w0 = -p1 x^2 / (2A) + p1 x + p0`, which has `w0(0,t) = p0`,
/// `w0_x(0,t) = p1` and `w0_x(A,t) = 0`; the first two columns are then set to
/// their discrete boundary values exactly.
pub fn initial_guess(bd: &BoundaryData, grid: &UniformGrid) -> Result<WField> {
    if bd.t().len() != grid.n_t() {
        return Err(Error::BoundaryMismatch(format!("{} boundary samples for {} time nodes", bd.t().len(), grid.n_t())));
    }
    let a = grid.x_max();
    let mut field = ScalarField::zeros(*grid);
    for i in 0..grid.n_x() {
        let x = grid.x(i);
        for j in 0..grid.n_t() {
            let (p0, p1) = (bd.p0.values()[j], bd.p1.values()[j]);
            field.set(i, j, -p1 * x * x / (2.0 * a) + p1 * x + p0);
        }
    }
    let mut w = WField::new(field);
    crate::objective::impose_boundary(&mut w, bd)?;
    Ok(w)
}

/// Composite trapezoid of `f^2` over the nodes in `[0, 1]`; the gap between
/// the last such node and `x = 1` takes the last nodal value.
fn l2_on_unit(xs: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let inside: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= 0.0 && xs[i] <= 1.0).collect();
    let mut sum = 0.0;
    for pair in inside.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        sum += 0.5 * (xs[b] - xs[a]) * (f(a).powi(2) + f(b).powi(2));
    }
    if let Some(&last) = inside.last() {
        sum += (1.0 - xs[last]) * f(last).powi(2);
    }
    sum.sqrt()
}

fn l2_distance(a: &Reconstruction, b: &Reconstruction) -> f64 {
    l2_on_unit(&a.xs, |i| a.values[i] - b.values[i])
}

/// `||a_rec - a_true|| / ||a_true||` in `L2(0, 1)` on the reconstruction's
/// nodes.
pub fn compute_error(rec: &Reconstruction, truth: &Coefficient) -> Result<f64> {
    let norm = l2_on_unit(&rec.xs, |i| truth.eval(rec.xs[i]));
    if !(norm > 0.0) {
        return Err(Error::ZeroNormTruth);
    }
    Ok(l2_on_unit(&rec.xs, |i| rec.values[i] - truth.eval(rec.xs[i])) / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    /// `max phi R^2` over the residual stencils.
    pub res_sup: f64,
    pub grad_sup: f64,
    /// Step that produced this iterate (`gamma0` for the starting point).
    pub gamma: f64,
    /// Relative `L2` error of `a_n` when the truth is known.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The relative change of `a_n` fell below the tolerance.
    Converged,
    MaxIterations,
    /// No step of at least `MIN_STEP` decreased the functional.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Entry 0 describes the starting point.
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub w: WField,
    pub reconstruction: Reconstruction,
    pub error: Option<f64>,
}

impl RunRecord {
    /// Number of accepted steps `n*`.
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn initial_j(&self) -> f64 {
        self.history[0].j
    }

    pub fn final_j(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.j)
    }

    /// `J(w_0) / J(w_n*)`.
    pub fn decrease_factor(&self) -> f64 {
        self.initial_j() / self.final_j()
    }

    /// True when the weighted residual sup-norm rises at some step among the
    /// first `window` iterations.
    pub fn residual_rises_within(&self, window: usize) -> bool {
        self.history.iter().take(window + 1).collect::<Vec<_>>().windows(2).any(|p| p[1].res_sup > p[0].res_sup)
    }

    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,J,res_sup,grad_sup,gamma")?;
        for r in &self.history {
            writeln!(out, "{},{},{},{},{}", r.iter, r.j, r.res_sup, r.grad_sup, r.gamma)?;
        }
        Ok(())
    }

    pub fn write_coefficient_csv<W: Write>(&self, truth: Option<&Coefficient>, mut out: W) -> Result<()> {
        writeln!(out, "x,a_rec,a_true")?;
        for (x, a) in self.reconstruction.xs.iter().zip(&self.reconstruction.values) {
            let t = truth.map_or(f64::NAN, |c| c.eval(*x));
            writeln!(out, "{x},{a},{t}")?;
        }
        Ok(())
    }
}

fn error_of(rec: &Reconstruction, truth: Option<&Coefficient>) -> Option<f64> {
    truth.and_then(|c| compute_error(rec, c).ok())
}

/// `w_n = w_{n-1} - gamma J'(w_{n-1})`, with `J'` the gradient in the
/// configured metric. A trial step is accepted iff it strictly decreases `J`;
/// the step then doubles up to `step_cap`, otherwise it is halved and
/// retried. Stops once
/// `||a_{n+1} - a_n|| / ||a_n|| <= stop_tol`. While `||a_n|| < 1e-8` the
/// relative test is replaced by `||a_{n+1} - a_n|| < 1e-8`. A vanishing
/// gradient counts as convergence.
pub fn minimize(w0: &WField, bd: &BoundaryData, cfg: &InverseConfig, truth: Option<&Coefficient>) -> Result<RunRecord> {
    cfg.validate()?;
    let start = eval_j(w0, bd, cfg)?;
    let mut w = w0.clone();
    let mut a = reconstruct_a(&w);
    let mut history = vec![IterationRecord {
        iter: 0,
        j: start.value,
        res_sup: start.residual_sup,
        grad_sup: start.gradient_sup,
        gamma: cfg.gamma0,
        error: error_of(&a, truth),
    }];
    let mut j = start.value;
    let metric = (cfg.metric == GradientMetric::Energy).then(|| EnergyMetric::new(cfg));
    let direction = |w: &WField| {
        let g = gradient_unchecked(w, cfg);
        match &metric {
            Some(m) => m.riesz(&g),
            None => g,
        }
    };
    let mut grad = direction(&w);
    let mut gamma = cfg.gamma0;
    let cap = step_cap(cfg);
    let n = w.grid().n_t();
    let free = FIXED_COLUMNS * n..w.grid().len();
    let mut termination = Termination::MaxIterations;

    for iter in 1..=cfg.max_iter {
        if grad.field.sup_norm() == 0.0 {
            termination = Termination::Converged;
            break;
        }
        let mut trial = w.clone();
        let accepted = loop {
            let (dst, src) = (&mut trial.field.values_mut()[free.clone()], &w.field.values()[free.clone()]);
            let step = &grad.field.values()[free.clone()];
            for ((t, v), g) in dst.iter_mut().zip(src).zip(step) {
                *t = v - gamma * g;
            }
            let value = j_value(&trial, cfg);
            if value < j {
                break Some(value);
            }
            gamma *= 0.5;
            if gamma < MIN_STEP {
                break None;
            }
        };
        let Some(value) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let used = gamma;
        w = trial;
        j = value;
        grad = direction(&w);
        let report = eval_j(&w, bd, cfg)?;
        let a_next = reconstruct_a(&w);
        history.push(IterationRecord {
            iter,
            j,
            res_sup: report.residual_sup,
            grad_sup: report.gradient_sup,
            gamma: used,
            error: error_of(&a_next, truth),
        });
        gamma = (2.0 * gamma).min(cap);
        let norm = l2_on_unit(&a.xs, |i| a.values[i]);
        let change = l2_distance(&a_next, &a);
        a = a_next;
        if (norm >= ZERO_NORM && change / norm <= cfg.stop_tol) || (norm < ZERO_NORM && change < ZERO_NORM) {
            termination = Termination::Converged;
            break;
        }
    }
    let error = error_of(&a, truth);
    Ok(RunRecord { history, termination, w, reconstruction: a, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::TestCase;
    use crate::series::TimeSeries;

    fn bd(grid: &UniformGrid, p0: impl Fn(f64) -> f64, p1: impl Fn(f64) -> f64) -> BoundaryData {
        BoundaryData {
            p0: TimeSeries::from_fn(grid.ts(), p0).unwrap(),
            p1: TimeSeries::from_fn(grid.ts(), p1).unwrap(),
        }
    }

    #[test]
    fn initial_guess_of_zero_data() {
        let g = InverseConfig::default_grid();
        let w = initial_guess(&bd(&g, |_| 0.0, |_| 0.0), &g).unwrap();
        assert_eq!(w.field.sup_norm(), 0.0);
        assert!(reconstruct_a(&w).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_guess_of_constant_p0() {
        let g = InverseConfig::default_grid();
        let w = initial_guess(&bd(&g, |_| 0.7, |_| 0.0), &g).unwrap();
        assert!(w.field.values().iter().all(|v| (*v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn initial_guess_boundary_identities() {
        let g = InverseConfig::default_grid();
        let data = bd(&g, |t| 0.3 * t, |t| t.sin());
        let w = initial_guess(&data, &g).unwrap();
        let (h, n) = (g.hx(), g.n_x());
        for j in 0..g.n_t() {
            let (p0, p1) = (data.p0.values()[j], data.p1.values()[j]);
            assert_eq!(w.field.get(0, j), p0);
            assert!(((w.field.get(1, j) - w.field.get(0, j)) / h - p1).abs() < 1e-12);
            // w_x(A) = 0 for the quadratic: central difference over the last two cells
            let back = (3.0 * w.field.get(n - 1, j) - 4.0 * w.field.get(n - 2, j) + w.field.get(n - 3, j)) / (2.0 * h);
            assert!(back.abs() < 1e-10);
        }
    }

    #[test]
    fn error_metric_basics() {
        let g = InverseConfig::default_grid();
        let truth = Coefficient::Test(TestCase::One);
        let exact = Reconstruction { xs: g.xs(), values: truth.sample(&g.xs()) };
        assert!(compute_error(&exact, &truth).unwrap() < 1e-15);
        let double = Reconstruction { xs: g.xs(), values: exact.values.iter().map(|v| 2.0 * v).collect() };
        assert!((compute_error(&double, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(compute_error(&exact, &Coefficient::Zero), Err(Error::ZeroNormTruth)));
    }

    #[test]
    fn error_metric_against_quadrature() {
        let g = InverseConfig::default_grid();
        let truth = Coefficient::Test(TestCase::Two);
        let bump = |x: f64| 0.1 * (2.0 * std::f64::consts::PI * x).sin();
        let values = g.xs().iter().map(|&x| if x > 0.0 && x < 1.0 { truth.eval(x) + bump(x) } else { 0.0 }).collect();
        let rec = Reconstruction { xs: g.xs(), values };
        let m = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..m {
            let x = (k as f64 + 0.5) / m as f64;
            num += bump(x).powi(2);
            den += truth.eval(x).powi(2);
        }
        let oracle = (num / den).sqrt();
        assert!((compute_error(&rec, &truth).unwrap() - oracle).abs() < 1e-3);
    }

    #[test]
    fn zero_data_stays_at_zero() {
        let cfg = InverseConfig::default();
        let data = bd(&cfg.grid, |_| 0.0, |_| 0.0);
        let w0 = initial_guess(&data, &cfg.grid).unwrap();
        let run = minimize(&w0, &data, &cfg, None).unwrap();
        assert_eq!(run.termination, Termination::Converged);
        assert_eq!(run.iterations(), 0);
        assert!(run.reconstruction.values.iter().all(|v| v.abs() < 1e-2));
    }
}
