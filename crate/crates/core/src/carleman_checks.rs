//! Numerical probes of the weighted Volterra bound and of the Carleman
//! estimate for the operator `u_xx - 2 u_xt`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mesh::{weighted_sum, Region, ScalarField, UniformGrid};

const TINY: f64 = 1e-300;

/// Individual integrals entering the Carleman estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanTerms {
    /// `lambda * int (u_x^2 + u_t^2) phi`
    pub gradient: f64,
    /// `lambda^3 * int u^2 phi`
    pub value: f64,
    /// `lambda * int u_x(x, 0)^2 e^{-2 lambda x}`
    pub trace_gradient: f64,
    /// `lambda^3 * int u(x, 0)^2 e^{-2 lambda x}`
    pub trace_value: f64,
    /// The two `t = T` integrals, weighted by `e^{-2 lambda alpha T}`.
    pub final_time: f64,
}

impl CarlemanTerms {
    pub fn positive(&self) -> f64 {
        self.gradient + self.value + self.trace_gradient + self.trace_value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / max(rhs, tiny)`.
    pub ratio: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Set when the right-hand side vanishes, so the ratio carries no
    /// information.
    pub degenerate: bool,
    /// Breakdown of the right-hand side for the Carleman probe.
    pub terms: Option<CarlemanTerms>,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, lambda: f64, alpha: f64, terms: Option<CarlemanTerms>) -> Self {
        Self { lhs, rhs, ratio: lhs / rhs.max(TINY), lambda, alpha, degenerate: rhs <= TINY, terms }
    }
}

fn whole_grid(g: &UniformGrid) -> Region {
    Region::Rectangle {
        x0: g.x_min() - 0.5 * g.hx(),
        x1: g.x_max() + 0.5 * g.hx(),
        t0: g.t_min() - 0.5 * g.ht(),
        t1: g.t_max() + 0.5 * g.ht(),
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InequalityInput(format!("{name} must be positive, got {v}")))
    }
}

/// Both sides of `int (int_0^t g)^2 phi <= (lambda alpha)^{-2} int g^2 phi`
/// with `phi = exp(-2 lambda (x + alpha t))`. The inner integral is a
/// cumulative trapezoid sum in `t`.
pub fn volterra_bound_check(g: &ScalarField, lambda: f64, alpha: f64) -> Result<InequalityReport> {
    check_positive("lambda", lambda)?;
    check_positive("alpha", alpha)?;
    let grid = *g.grid();
    let ht = grid.ht();
    let mut primitive = ScalarField::zeros(grid);
    let mut square = ScalarField::zeros(grid);
    for i in 0..grid.n_x() {
        let col = g.column(i);
        let mut acc = 0.0;
        for j in 0..grid.n_t() {
            if j > 0 {
                acc += 0.5 * ht * (col[j - 1] + col[j]);
            }
            primitive.set(i, j, acc * acc);
            square.set(i, j, col[j] * col[j]);
        }
    }
    let phi = |x: f64, t: f64| (-2.0 * lambda * (x + alpha * t)).exp();
    let region = whole_grid(&grid);
    let lhs = weighted_sum(&primitive, phi, region);
    let rhs = weighted_sum(&square, phi, region) / (lambda * alpha).powi(2);
    Ok(InequalityReport::new(lhs, rhs, lambda, alpha, None))
}

/// Derivative of a sampled function: central inside, second-order one-sided
/// at the ends.
fn gradient_1d(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h),
            k if k == n - 1 => (3.0 * v[k] - 4.0 * v[k - 1] + v[k - 2]) / (2.0 * h),
            k => (v[k + 1] - v[k - 1]) / (2.0 * h),
        })
        .collect()
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

/// Compares `int (u_xx - 2 u_xt)^2 phi` with the positive minus the negative
/// terms of the Carleman estimate (constant `C = 1`). The volume integrals use
/// central differences at interior nodes.
pub fn carleman_ratio(u: &ScalarField, lambda: f64, alpha: f64) -> Result<InequalityReport> {
    if !(lambda >= 1.0) {
        return Err(Error::InequalityInput(format!("lambda must be at least 1, got {lambda}")));
    }
    check_positive("alpha", alpha)?;
    let grid = *u.grid();
    let (nx, nt, hx, ht) = (grid.n_x(), grid.n_t(), grid.hx(), grid.ht());
    if nx < 4 || nt < 3 {
        return Err(Error::InequalityInput(format!("grid {nx} x {nt} is too small")));
    }
    let scale = u.sup_norm().max(1.0);
    for i in 0..2 {
        if let Some(v) = u.column(i).iter().find(|v| v.abs() > 1e-14 * scale) {
            return Err(Error::InequalityInput(format!("column {i} must vanish, found {v}")));
        }
    }

    let mut operator = ScalarField::zeros(grid);
    let mut gradient = ScalarField::zeros(grid);
    let mut value = ScalarField::zeros(grid);
    for i in 1..nx - 1 {
        for j in 1..nt - 1 {
            let c = u.get(i, j);
            let uxx = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / (hx * hx);
            let uxt = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1) + u.get(i - 1, j - 1))
                / (4.0 * hx * ht);
            let ux = (u.get(i + 1, j) - u.get(i - 1, j)) / (2.0 * hx);
            let ut = (u.get(i, j + 1) - u.get(i, j - 1)) / (2.0 * ht);
            operator.set(i, j, (uxx - 2.0 * uxt).powi(2));
            gradient.set(i, j, ux * ux + ut * ut);
            value.set(i, j, c * c);
        }
    }
    let phi = |x: f64, t: f64| (-2.0 * lambda * (x + alpha * t)).exp();
    let region = whole_grid(&grid);
    let lhs = weighted_sum(&operator, phi, region);

    let row = |j: usize| -> Vec<f64> { (0..nx).map(|i| u.get(i, j)).collect() };
    let trace = |j: usize, weight: &dyn Fn(f64) -> f64| -> (f64, f64) {
        let values = row(j);
        let slope = gradient_1d(&values, hx);
        let w: Vec<f64> = (0..nx).map(|i| weight(grid.x(i))).collect();
        let d: Vec<f64> = slope.iter().zip(&w).map(|(s, w)| s * s * w).collect();
        let v: Vec<f64> = values.iter().zip(&w).map(|(s, w)| s * s * w).collect();
        (trapezoid(&d, hx), trapezoid(&v, hx))
    };
    let (l1, l3) = (lambda, lambda.powi(3));
    let (d0, v0) = trace(0, &|x| (-2.0 * lambda * x).exp());
    let (d1, v1) = trace(nt - 1, &|_| 1.0);
    let terms = CarlemanTerms {
        gradient: l1 * weighted_sum(&gradient, phi, region),
        value: l3 * weighted_sum(&value, phi, region),
        trace_gradient: l1 * d0,
        trace_value: l3 * v0,
        final_time: (-2.0 * lambda * alpha * grid.t_max()).exp() * (l1 * d1 + l3 * v1),
    };
    let rhs = (terms.positive() - terms.final_time).max(0.0);
    let mut report = InequalityReport::new(lhs, rhs, lambda, alpha, Some(terms));
    report.degenerate = terms.positive() <= TINY;
    Ok(report)
}

/// Random smooth field: at most `max_modes` products of cosines, the `k`-th
/// scaled by `1/k^2`.
pub fn random_fourier_field<R: Rng>(grid: UniformGrid, max_modes: usize, rng: &mut R) -> ScalarField {
    let modes = rng.random_range(1..=max_modes.max(1));
    let (lx, lt) = (grid.x_max() - grid.x_min(), grid.t_max() - grid.t_min());
    let terms: Vec<[f64; 5]> = (1..=modes)
        .map(|k| {
            let amplitude = rng.random_range(-1.0..1.0) / (k * k) as f64;
            let kx = rng.random_range(0..=k) as f64;
            let kt = rng.random_range(0..=k) as f64;
            let px = rng.random_range(0.0..std::f64::consts::TAU);
            let pt = rng.random_range(0.0..std::f64::consts::TAU);
            [amplitude, kx, kt, px, pt]
        })
        .collect();
    let pi = std::f64::consts::PI;
    ScalarField::from_fn(grid, |x, t| {
        terms
            .iter()
            .map(|[a, kx, kt, px, pt]| a * (kx * pi * x / lx + px).cos() * (kt * pi * t / lt + pt).cos())
            .sum()
    })
}

/// `x^2 (1 - x)^2 sin(pi t / T)`.
pub fn carleman_test_function(grid: UniformGrid) -> ScalarField {
    let period = grid.t_max();
    ScalarField::from_fn(grid, |x, t| {
        x * x * (1.0 - x).powi(2) * (std::f64::consts::PI * t / period).sin()
    })
}

/// `x^2 (1 - x)^2 sin^2(pi t / (0.8 T))` for `t < 0.8 T`, zero afterwards.
pub fn early_support_test_function(grid: UniformGrid) -> ScalarField {
    let cut = 0.8 * grid.t_max();
    ScalarField::from_fn(grid, |x, t| {
        if t >= cut {
            0.0
        } else {
            x * x * (1.0 - x).powi(2) * (std::f64::consts::PI * t / cut).sin().powi(2)
        }
    })
}

/// Zeroes the first two columns, as required by `carleman_ratio`.
pub fn clamp_boundary_columns(mut u: ScalarField) -> ScalarField {
    for i in 0..2 {
        u.column_mut(i).iter_mut().for_each(|v| *v = 0.0);
    }
    u
}

/// One line of the verification battery.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub lambda: f64,
    pub alpha: f64,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Samples of the Volterra bound: `samples` random fields for every
/// `(lambda, alpha)` pair. Reports the worst ratio per pair.
pub fn volterra_battery<R: Rng>(
    grid: UniformGrid,
    lambdas: &[f64],
    alphas: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<CheckRow>> {
    let fields: Vec<ScalarField> = (0..samples).map(|_| random_fourier_field(grid, 5, rng)).collect();
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for &alpha in alphas {
            let mut worst = 0.0_f64;
            for g in &fields {
                let r = volterra_bound_check(g, lambda, alpha)?;
                if !r.degenerate {
                    worst = worst.max(r.lhs / (r.rhs * (1.0 + 1e-6)));
                }
            }
            rows.push(CheckRow {
                check: "volterra_bound_worst_ratio".into(),
                lambda,
                alpha,
                value: worst,
                threshold: 1.0,
                pass: worst <= 1.0,
            });
        }
    }
    Ok(rows)
}

/// Carleman ratio of `u` at each `lambda`, relative to the first one; passes
/// while it stays above `floor`.
pub fn carleman_battery(u: &ScalarField, lambdas: &[f64], alpha: f64, floor: f64) -> Result<Vec<CheckRow>> {
    let reports = lambdas.iter().map(|&l| carleman_ratio(u, l, alpha)).collect::<Result<Vec<_>>>()?;
    let base = reports.first().map_or(1.0, |r| r.ratio);
    Ok(reports
        .iter()
        .map(|r| {
            let relative = r.ratio / base;
            CheckRow {
                check: "carleman_ratio_relative".into(),
                lambda: r.lambda,
                alpha: r.alpha,
                value: relative,
                threshold: floor,
                pass: !r.degenerate && relative >= floor,
            }
        })
        .collect())
}
