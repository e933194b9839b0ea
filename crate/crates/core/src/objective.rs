//! The weighted Tikhonov functional in `w` and its exact gradient.
//!
//! Node `(i, j)` is `(x_i, t_j)` of the inverse grid, 0-based. The residual of
//! `L(w) = w_xx - 2 w_xt + 2 w_x S - 2 w_x w - 2 w_t S`, with
//! `S(x,t) = int_0^t w_x dtau`, is formed at every stencil base point
//! `i = 0..n_x-3`, `j = 0..n_t-2` from forward differences. Columns `i = 0, 1`
//! hold the boundary data; nodes with `i >= 2` are free.

use crate::error::{Error, Result};
use crate::mesh::{ScalarField, UniformGrid};
use crate::preprocess::BoundaryData;
use crate::transform::WField;

/// Number of leading columns fixed by the boundary data.
pub const FIXED_COLUMNS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanParams {
    lambda: f64,
    alpha: f64,
}

impl CarlemanParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be finite and >= 0")));
        }
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1/2]")));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for CarlemanParams {
    fn default() -> Self {
        Self { lambda: 2.0, alpha: 0.5 }
    }
}

/// Carleman weight `exp(-2 lambda (x + alpha t))`.
pub fn cwf(x: f64, t: f64, params: CarlemanParams) -> f64 {
    (-2.0 * params.lambda * (x + params.alpha * t)).exp()
}

/// Inner product in which the descent direction is the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMetric {
    /// Plain nodal gradient.
    Nodal,
    /// Riesz representative in the inner product given by the Hessian of the
    /// functional at `w = 0`.
    #[default]
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseConfig {
    pub carleman: CarlemanParams,
    pub beta: f64,
    pub mu: f64,
    pub gamma0: f64,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub grid: UniformGrid,
    pub metric: GradientMetric,
}

impl InverseConfig {
    /// Defaults with the plain nodal gradient and its initial step `1e-5`.
    pub fn nodal() -> Self {
        Self { metric: GradientMetric::Nodal, gamma0: 1e-5, ..Self::default() }
    }

    /// The inverse grid `(0, 1.1) x (0, 2)` with `60 x 50` nodes.
    pub fn default_grid() -> UniformGrid {
        UniformGrid::new(0.0, 1.1, 0.0, 2.0, 60, 50).expect("valid default grid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu = {} must be finite and >= 0", self.mu)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma0 = {} must be positive", self.gamma0)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("stop_tol = {} must be positive", self.stop_tol)));
        }
        if self.grid.x_min() != 0.0 || self.grid.t_min() != 0.0 {
            return Err(Error::InvalidGrid("inverse grid must start at x = 0, t = 0".into()));
        }
        Ok(())
    }
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            carleman: CarlemanParams::default(),
            beta: 1e-4,
            mu: 1e2,
            gamma0: 1.0,
            stop_tol: 1e-2,
            max_iter: 200,
            grid: Self::default_grid(),
            metric: GradientMetric::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    /// Total value of the functional.
    pub value: f64,
    pub residual_part: f64,
    pub regularization_part: f64,
    pub boundary_part: f64,
    /// `max phi * R^2` over the residual stencils.
    pub residual_sup: f64,
    pub gradient_sup: f64,
}

/// Checks that `w` lives on the config grid and carries the boundary data.
fn check_boundary(w: &WField, bd: &BoundaryData, cfg: &InverseConfig) -> Result<()> {
    let g = w.grid();
    if *g != cfg.grid {
        return Err(Error::BoundaryMismatch("w is not on the configured inverse grid".into()));
    }
    if bd.t().len() != g.n_t() {
        return Err(Error::BoundaryMismatch(format!("{} boundary samples for {} time nodes", bd.t().len(), g.n_t())));
    }
    let h = g.hx();
    for j in 0..g.n_t() {
        let (p0, p1) = (bd.p0.values()[j], bd.p1.values()[j]);
        let tol = 1e-9 * (1.0 + p0.abs() + h * p1.abs());
        if (w.field.get(0, j) - p0).abs() > tol || (w.field.get(1, j) - p0 - h * p1).abs() > tol {
            return Err(Error::BoundaryMismatch(format!("fixed columns differ from p0, p1 at t = {}", g.t(j))));
        }
    }
    Ok(())
}

/// Writes `w(0,t) = p0` and `w(h_x,t) = p0 + h_x p1` into the fixed columns.
pub fn impose_boundary(w: &mut WField, bd: &BoundaryData) -> Result<()> {
    let g = *w.grid();
    if bd.t().len() != g.n_t() {
        return Err(Error::BoundaryMismatch(format!("{} boundary samples for {} time nodes", bd.t().len(), g.n_t())));
    }
    for j in 0..g.n_t() {
        let (p0, p1) = (bd.p0.values()[j], bd.p1.values()[j]);
        w.field.set(0, j, p0);
        w.field.set(1, j, p0 + g.hx() * p1);
    }
    Ok(())
}

/// Per-column quantities of the residual stencils at base column `i`.
struct Column {
    /// `D_l = (w[i+1][l] - w[i][l]) / h_x`
    d: Vec<f64>,
    /// trapezoid `S_j = int_0^{t_j} D`
    s: Vec<f64>,
}

fn column_terms(w: &ScalarField, i: usize) -> Column {
    let g = w.grid();
    let (hx, ht, m) = (g.hx(), g.ht(), g.n_t() - 1);
    let d: Vec<f64> = (0..m).map(|l| (w.get(i + 1, l) - w.get(i, l)) / hx).collect();
    let mut s = vec![0.0; m];
    for j in 1..m {
        s[j] = s[j - 1] + 0.5 * ht * (d[j - 1] + d[j]);
    }
    Column { d, s }
}

fn residual_at(w: &ScalarField, col: &Column, i: usize, j: usize) -> f64 {
    let g = w.grid();
    let (hx, ht) = (g.hx(), g.ht());
    let dxx = (w.get(i, j) - 2.0 * w.get(i + 1, j) + w.get(i + 2, j)) / (hx * hx);
    let dxt = (w.get(i + 1, j + 1) - w.get(i + 1, j) - w.get(i, j + 1) + w.get(i, j)) / (hx * ht);
    let wt = (w.get(i, j + 1) - w.get(i, j)) / ht;
    let (d, s) = (col.d[j], col.s[j]);
    dxx - 2.0 * dxt + 2.0 * d * s - 2.0 * d * w.get(i, j) - 2.0 * wt * s
}

/// Discrete `L(w)` at the stencil base points; zero at the last two columns
/// and the last time level.
pub fn apply_l(w: &WField) -> ScalarField {
    let g = *w.grid();
    let mut out = ScalarField::zeros(g);
    for i in 0..g.n_x() - 2 {
        let col = column_terms(&w.field, i);
        for j in 0..g.n_t() - 1 {
            out.set(i, j, residual_at(&w.field, &col, i, j));
        }
    }
    out
}

/// `h_x h_t sum phi R^2` over the stencil base points of a residual field.
pub fn residual_part(residual: &ScalarField, params: CarlemanParams) -> f64 {
    let g = residual.grid();
    let mut sum = 0.0;
    for i in 0..g.n_x() - 2 {
        for j in 0..g.n_t() - 1 {
            sum += cwf(g.x(i), g.t(j), params) * residual.get(i, j).powi(2);
        }
    }
    g.hx() * g.ht() * sum
}

fn regularization_part(w: &ScalarField) -> f64 {
    let g = w.grid();
    let (nx, nt, hx, ht) = (g.n_x(), g.n_t(), g.hx(), g.ht());
    let mut sum = 0.0;
    for i in FIXED_COLUMNS..nx - 1 {
        for j in 0..nt - 1 {
            let v = w.get(i, j);
            sum += v * v;
            sum += ((w.get(i + 1, j) - v) / hx).powi(2);
            sum += ((w.get(i, j + 1) - v) / ht).powi(2);
            if i + 2 < nx {
                sum += ((v - 2.0 * w.get(i + 1, j) + w.get(i + 2, j)) / (hx * hx)).powi(2);
            }
            if j + 2 < nt {
                sum += ((v - 2.0 * w.get(i, j + 1) + w.get(i, j + 2)) / (ht * ht)).powi(2);
            }
        }
    }
    hx * ht * sum
}

fn boundary_part(w: &ScalarField) -> f64 {
    let g = w.grid();
    let (nx, hx) = (g.n_x(), g.hx());
    (0..g.n_t() - 1).map(|j| ((w.get(nx - 1, j) - w.get(nx - 2, j)) / hx).powi(2)).sum()
}

struct Parts {
    residual: f64,
    regularization: f64,
    boundary: f64,
    residual_sup: f64,
}

fn parts(w: &ScalarField, cfg: &InverseConfig) -> Parts {
    let g = w.grid();
    let mut residual = 0.0;
    let mut residual_sup = 0.0_f64;
    for i in 0..g.n_x() - 2 {
        let col = column_terms(w, i);
        for j in 0..g.n_t() - 1 {
            let r = residual_at(w, &col, i, j);
            let weighted = cwf(g.x(i), g.t(j), cfg.carleman) * r * r;
            residual += weighted;
            residual_sup = residual_sup.max(weighted);
        }
    }
    Parts {
        residual: g.hx() * g.ht() * residual,
        regularization: regularization_part(w),
        boundary: boundary_part(w),
        residual_sup,
    }
}

/// Value of the functional, without the boundary check; used inside line
/// searches where the fixed columns are never touched.
pub fn j_value(w: &WField, cfg: &InverseConfig) -> f64 {
    let p = parts(&w.field, cfg);
    p.residual + cfg.beta * p.regularization + cfg.mu * p.boundary
}

pub fn eval_j(w: &WField, bd: &BoundaryData, cfg: &InverseConfig) -> Result<ObjectiveReport> {
    check_boundary(w, bd, cfg)?;
    let p = parts(&w.field, cfg);
    let gradient = gradient_unchecked(w, cfg);
    Ok(ObjectiveReport {
        value: p.residual + cfg.beta * p.regularization + cfg.mu * p.boundary,
        residual_part: p.residual,
        regularization_part: p.regularization,
        boundary_part: p.boundary,
        residual_sup: p.residual_sup,
        gradient_sup: gradient.field.sup_norm(),
    })
}

/// Exact gradient with respect to the free nodes; zero on the fixed columns.
pub fn grad_j(w: &WField, bd: &BoundaryData, cfg: &InverseConfig) -> Result<WField> {
    check_boundary(w, bd, cfg)?;
    Ok(gradient_unchecked(w, cfg))
}

pub(crate) fn gradient_unchecked(w: &WField, cfg: &InverseConfig) -> WField {
    let f = &w.field;
    let g = *f.grid();
    let (nx, nt, hx, ht) = (g.n_x(), g.n_t(), g.hx(), g.ht());
    let mut grad = ScalarField::zeros(g);
    let mut add = |i: usize, j: usize, v: f64| {
        let k = g.index(i, j);
        grad.values_mut()[k] += v;
    };

    // residual part
    let m = nt - 1;
    for i in 0..nx - 2 {
        let col = column_terms(f, i);
        // dJ/dD_l accumulated over all stencils of this column
        let mut e = vec![0.0; m];
        // G_j = c R dR/dS_j h_t, consumed by the trapezoid weights of S_j
        let mut big_g = vec![0.0; m];
        for j in 0..m {
            let r = residual_at(f, &col, i, j);
            let c = 2.0 * hx * ht * cwf(g.x(i), g.t(j), cfg.carleman) * r;
            if c == 0.0 {
                continue;
            }
            let (d, s) = (col.d[j], col.s[j]);
            let wij = f.get(i, j);
            let wt = (f.get(i, j + 1) - wij) / ht;
            // w_xx
            add(i, j, c / (hx * hx));
            add(i + 1, j, -2.0 * c / (hx * hx));
            add(i + 2, j, c / (hx * hx));
            // -2 w_xt
            let k = 2.0 * c / (hx * ht);
            add(i + 1, j + 1, -k);
            add(i + 1, j, k);
            add(i, j + 1, k);
            add(i, j, -k);
            // -2 w_t S and -2 D w through their explicit node dependence
            add(i, j + 1, -2.0 * c * s / ht);
            add(i, j, 2.0 * c * s / ht - 2.0 * c * d);
            // 2 D (S - w) through D_j
            e[j] += c * 2.0 * (s - wij);
            big_g[j] = c * (2.0 * d - 2.0 * wt) * ht;
        }
        // S_j = h_t (D_0/2 + D_1 + ... + D_{j-1} + D_j/2) for j >= 1
        let mut tail = 0.0;
        for l in (0..m).rev() {
            if l >= 1 {
                e[l] += tail + 0.5 * big_g[l];
            } else {
                e[l] += 0.5 * tail;
            }
            tail += big_g[l];
        }
        for (l, el) in e.iter().enumerate() {
            add(i + 1, l, el / hx);
            add(i, l, -el / hx);
        }
    }

    // regularization
    let b = 2.0 * cfg.beta * hx * ht;
    for i in FIXED_COLUMNS..nx - 1 {
        for j in 0..nt - 1 {
            let v = f.get(i, j);
            add(i, j, b * v);
            let dx = (f.get(i + 1, j) - v) / hx;
            add(i + 1, j, b * dx / hx);
            add(i, j, -b * dx / hx);
            let dt = (f.get(i, j + 1) - v) / ht;
            add(i, j + 1, b * dt / ht);
            add(i, j, -b * dt / ht);
            if i + 2 < nx {
                let dxx = (v - 2.0 * f.get(i + 1, j) + f.get(i + 2, j)) / (hx * hx);
                let k = b * dxx / (hx * hx);
                add(i, j, k);
                add(i + 1, j, -2.0 * k);
                add(i + 2, j, k);
            }
            if j + 2 < nt {
                let dtt = (v - 2.0 * f.get(i, j + 1) + f.get(i, j + 2)) / (ht * ht);
                let k = b * dtt / (ht * ht);
                add(i, j, k);
                add(i, j + 1, -2.0 * k);
                add(i, j + 2, k);
            }
        }
    }

    // Neumann penalty at x = A
    for j in 0..nt - 1 {
        let k = 2.0 * cfg.mu * (f.get(nx - 1, j) - f.get(nx - 2, j)) / (hx * hx);
        add(nx - 1, j, k);
        add(nx - 2, j, -k);
    }

    for i in 0..FIXED_COLUMNS {
        grad.column_mut(i).fill(0.0);
    }
    WField::new(grad)
}

/// Central differences `(J(w + eps e_k) - J(w - eps e_k)) / (2 eps)` at every
/// free node.
pub fn fd_grad_oracle(w: &WField, bd: &BoundaryData, cfg: &InverseConfig, eps: f64) -> Result<WField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("oracle step {eps} must be positive")));
    }
    check_boundary(w, bd, cfg)?;
    let g = *w.grid();
    let mut probe = w.clone();
    let mut out = ScalarField::zeros(g);
    for i in FIXED_COLUMNS..g.n_x() {
        for j in 0..g.n_t() {
            let v = w.field.get(i, j);
            probe.field.set(i, j, v + eps);
            let up = j_value(&probe, cfg);
            probe.field.set(i, j, v - eps);
            let down = j_value(&probe, cfg);
            probe.field.set(i, j, v);
            out.set(i, j, (up - down) / (2.0 * eps));
        }
    }
    Ok(WField::new(out))
}

/// Second differences of `s -> J((1 - s) w_a + s w_b)` at `n` interior points
/// of `[0, 1]`, with step `1 / (n + 1)`.
pub fn segment_second_differences(w_a: &WField, w_b: &WField, cfg: &InverseConfig, n: usize) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    let at = |s: f64| {
        let values = w_a.field.values().iter().zip(w_b.field.values()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        let field = ScalarField::from_values(*w_a.grid(), values).expect("same grid");
        j_value(&WField::new(field), cfg)
    };
    let samples: Vec<f64> = (0..n + 2).map(|k| at(k as f64 * h)).collect();
    samples.windows(3).map(|v| v[0] - 2.0 * v[1] + v[2]).collect()
}
