//! The substitution `v(x,t) = u(x, t + x)`, `q = ln v`, `w = q_t`, and the
//! recovery `a(x) = 2 w_x(x, 0)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::incident;
use crate::mesh::{lagrange_local, ScalarField, UniformGrid};

/// `w(x,t)` on the inverse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WField {
    pub field: ScalarField,
}

impl WField {
    pub fn new(field: ScalarField) -> Self {
        Self { field }
    }

    pub fn grid(&self) -> &UniformGrid {
        self.field.grid()
    }
}

/// Nodal samples of a reconstructed coefficient, `0` outside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Reconstruction {
    pub fn clamp_nonnegative(mut self) -> Self {
        for v in &mut self.values {
            *v = v.max(0.0);
        }
        self
    }
}

/// One column of the scattered field `u - u0` against the time since the
/// front passed, with the exact value `0` on the front.
struct ConeColumn {
    x: f64,
    lag: Vec<f64>,
    values: Vec<f64>,
}

impl ConeColumn {
    fn new(u: &ScalarField, i: usize) -> Self {
        let g = u.grid();
        let x = g.x(i);
        let mut lag = vec![0.0];
        let mut values = vec![0.0];
        for (j, &v) in u.column(i).iter().enumerate() {
            let tau = g.t(j) - x.abs();
            if tau >= 0.1 * g.ht() {
                lag.push(tau);
                values.push(v - incident(x, g.t(j)));
            }
        }
        Self { x, lag, values }
    }

    fn at(&self, tau: f64) -> f64 {
        lagrange_local(&self.lag, &self.values, tau)
    }
}

/// Cubic Lagrange weights on the four columns around `x`, extrapolating at
/// the ends of the column range.
fn column_stencil(columns: &[ConeColumn], x: f64) -> Vec<(usize, f64)> {
    let n = columns.len();
    let k = columns.partition_point(|c| c.x <= x).saturating_sub(1);
    let width = n.min(4);
    let start = k.saturating_sub(1).min(n - width);
    (start..start + width)
        .map(|a| {
            let weight = (start..start + width)
                .filter(|&b| b != a)
                .map(|b| (x - columns[b].x) / (columns[a].x - columns[b].x))
                .product();
            (a, weight)
        })
        .collect()
}

/// `w = d/dt ln u(x, t + x)` on the nodes of `target` (which must lie in
/// `x >= 0`). The scattered part of `u` is interpolated along the cone-aligned
/// lag `t - |x|` by local cubics, so the jump of `u` on the front never enters
/// an interpolation stencil. Time derivatives are central inside and
/// second-order one-sided at both ends.
pub fn u_to_w(u: &ScalarField, target: &UniformGrid) -> Result<WField> {
    let g = u.grid();
    if target.x_min() < 0.0 {
        return Err(Error::InvalidGrid(format!("target x_min = {} must be >= 0", target.x_min())));
    }
    if target.x_max() > g.x_max() || target.t_max() + target.x_max() > g.t_max() + 1e-12 || target.t_min() < 0.0 {
        return Err(Error::ForwardDomain(format!(
            "forward field on x <= {}, t <= {} does not cover the target",
            g.x_max(),
            g.t_max()
        )));
    }
    let columns: Vec<ConeColumn> = (0..g.n_x())
        .filter(|&i| g.x(i) >= -1e-12 * g.hx())
        .map(|i| ConeColumn::new(u, i))
        .collect();
    if columns.len() < 4 {
        return Err(Error::InvalidGrid("forward grid has fewer than four columns with x >= 0".into()));
    }

    let (nx, nt, ht) = (target.n_x(), target.n_t(), target.ht());
    let rows: Vec<Result<Vec<f64>>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x = target.x(i);
            let stencil = column_stencil(&columns, x);
            let q: Vec<f64> = (0..nt)
                .map(|j| {
                    let t = target.t(j);
                    let s: f64 = stencil.iter().map(|&(c, wgt)| wgt * columns[c].at(t)).sum();
                    let v = 0.5 + s;
                    if !(v > 0.25) {
                        return Err(Error::LogarithmUnsafe { x, t, value: v });
                    }
                    Ok(v.ln())
                })
                .collect::<Result<_>>()?;
            let mut w = vec![0.0; nt];
            w[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * ht);
            w[nt - 1] = (3.0 * q[nt - 1] - 4.0 * q[nt - 2] + q[nt - 3]) / (2.0 * ht);
            for j in 1..nt - 1 {
                w[j] = (q[j + 1] - q[j - 1]) / (2.0 * ht);
            }
            Ok(w)
        })
        .collect();
    let mut values = Vec::with_capacity(nx * nt);
    for row in rows {
        values.extend(row?);
    }
    Ok(WField::new(ScalarField::from_values(*target, values)?))
}

/// `a(x_i) = 2 w_x(x_i, 0)` by second-order one-sided differences, backward
/// except at the first two nodes, so that no stencil reaches past the jump of
/// `w_x` at `x = 1`; zero outside `(0, 1)`.
pub fn reconstruct_a(w: &WField) -> Reconstruction {
    let g = w.grid();
    let h = g.hx();
    let at = |i: usize| w.field.get(i, 0);
    let xs = g.xs();
    let values = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !(x > 0.0 && x < 1.0) {
                return 0.0;
            }
            let dx = if i < 2 {
                (-3.0 * at(i) + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * h)
            } else {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            };
            2.0 * dx
        })
        .collect();
    Reconstruction { xs, values }
}
