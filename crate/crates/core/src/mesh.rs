//! Uniform space-time grids, nodal fields, divided differences and the
//! node-sum quadrature shared by the solvers and the objective.
//!
//! Fields are stored x-major: node `(i, j)` lives at `i * n_t + j`, so all
//! time samples of one spatial column are contiguous.

use std::io::Write;

use crate::error::{Error, Result};

/// Rectangular mesh `[x_min, x_max] x [t_min, t_max]` with `n_x * n_t` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    x_min: f64,
    x_max: f64,
    t_min: f64,
    t_max: f64,
    n_x: usize,
    n_t: usize,
}

impl UniformGrid {
    pub fn new(x_min: f64, x_max: f64, t_min: f64, t_max: f64, n_x: usize, n_t: usize) -> Result<Self> {
        if ![x_min, x_max, t_min, t_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if x_max <= x_min || t_max <= t_min {
            return Err(Error::InvalidGrid(format!(
                "inverted interval: x in [{x_min}, {x_max}], t in [{t_min}, {t_max}]"
            )));
        }
        if n_x < 4 || n_t < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 nodes per axis, got {n_x} x {n_t}")));
        }
        Ok(Self { x_min, x_max, t_min, t_max, n_x, n_t })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn t_min(&self) -> f64 {
        self.t_min
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn len(&self) -> usize {
        self.n_x * self.n_t
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_t - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.ht()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.t(j)).collect()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_x && j < self.n_t);
        i * self.n_t + j
    }
}

/// Real samples of a function on every node of a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: UniformGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite value at node ({}, {})",
                k / grid.n_t(),
                k % grid.n_t()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_x() {
            let x = grid.x(i);
            for j in 0..grid.n_t() {
                values.push(f(x, grid.t(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Time samples of spatial column `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        let n_t = self.grid.n_t();
        &self.values[i * n_t..(i + 1) * n_t]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let n_t = self.grid.n_t();
        &mut self.values[i * n_t..(i + 1) * n_t]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes `x,t,value` rows in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,t,value")?;
        for i in 0..self.grid.n_x() {
            let x = self.grid.x(i);
            for j in 0..self.grid.n_t() {
                writeln!(out, "{},{},{}", x, self.grid.t(j), self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// Integration region; membership is a strict inequality on node coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Open rectangle `(x0, x1) x (t0, t1)`.
    Rectangle { x0: f64, x1: f64, t0: f64, t1: f64 },
    /// `x > 0, t > 0, x + t/2 < 1`.
    Triangle,
    /// `x > 0, t > 0, x + alpha t < 2 alpha - eps`.
    ShrunkTriangle { alpha: f64, eps: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, t: f64) -> bool {
        match *self {
            Region::Rectangle { x0, x1, t0, t1 } => x > x0 && x < x1 && t > t0 && t < t1,
            Region::Triangle => x > 0.0 && t > 0.0 && x + 0.5 * t < 1.0,
            Region::ShrunkTriangle { alpha, eps } => {
                x > 0.0 && t > 0.0 && x + alpha * t < 2.0 * alpha - eps
            }
        }
    }
}

/// `h_x h_t * sum` of `value * weight` over the nodes inside `region`.
pub fn weighted_sum(field: &ScalarField, weight: impl Fn(f64, f64) -> f64, region: Region) -> f64 {
    let g = field.grid();
    let mut acc = 0.0;
    for i in 0..g.n_x() {
        let x = g.x(i);
        for j in 0..g.n_t() {
            let t = g.t(j);
            if region.contains(x, t) {
                acc += field.get(i, j) * weight(x, t);
            }
        }
    }
    acc * g.hx() * g.ht()
}

/// Divided-difference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `(f[k+1] - f[k]) / h`
    Forward,
    /// `(f[k+1] - f[k-1]) / 2h`
    Central,
    /// `(f[k] - 2 f[k+1] + f[k+2]) / h^2`
    Second,
}

fn divided_difference(at: impl Fn(usize) -> f64, k: usize, n: usize, h: f64, scheme: Scheme) -> Option<f64> {
    match scheme {
        Scheme::Forward => (k + 1 < n).then(|| (at(k + 1) - at(k)) / h),
        Scheme::Central => (k >= 1 && k + 1 < n).then(|| (at(k + 1) - at(k - 1)) / (2.0 * h)),
        Scheme::Second => (k + 2 < n).then(|| (at(k) - 2.0 * at(k + 1) + at(k + 2)) / (h * h)),
    }
}

pub fn diff_x(field: &ScalarField, i: usize, j: usize, scheme: Scheme) -> Result<f64> {
    let g = field.grid();
    if j >= g.n_t() {
        return Err(Error::StencilOutOfRange { i, j });
    }
    divided_difference(|k| field.get(k, j), i, g.n_x(), g.hx(), scheme)
        .ok_or(Error::StencilOutOfRange { i, j })
}

pub fn diff_t(field: &ScalarField, i: usize, j: usize, scheme: Scheme) -> Result<f64> {
    let g = field.grid();
    if i >= g.n_x() {
        return Err(Error::StencilOutOfRange { i, j });
    }
    divided_difference(|k| field.get(i, k), j, g.n_t(), g.ht(), scheme)
        .ok_or(Error::StencilOutOfRange { i, j })
}

/// Linear interpolation in a uniformly sampled sequence starting at `x0`;
/// clamps to the end values outside the sampled range.
pub(crate) fn lerp_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let s = (x - x0) / h;
    if s <= 0.0 {
        return values[0];
    }
    let last = values.len() - 1;
    if s >= last as f64 {
        return values[last];
    }
    let k = s.floor() as usize;
    let frac = s - k as f64;
    values[k] * (1.0 - frac) + values[k + 1] * frac
}

/// Cubic Lagrange interpolation through the four nodes around `x`.
/// `nodes` must increase; fewer than four nodes fall back to lower degree and
/// `x` outside the node range is clamped.
pub(crate) fn lagrange_local(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    if n == 1 || x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let k = nodes.partition_point(|&v| v <= x) - 1;
    let width = n.min(4);
    let start = k.saturating_sub(1).min(n - width);
    let stencil = start..start + width;
    let mut sum = 0.0;
    for a in stencil.clone() {
        let mut basis = 1.0;
        for b in stencil.clone() {
            if a != b {
                basis *= (x - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        sum += basis * values[a];
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_spacings() {
        let g = UniformGrid::new(-2.2, 2.2, 0.0, 4.0, 1024, 1024).unwrap();
        assert_abs_diff_eq!(g.hx(), 4.4 / 1023.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.ht(), 4.0 / 1023.0, epsilon = 1e-15);

        let inv = UniformGrid::new(0.0, 1.1, 0.0, 2.0, 60, 50).unwrap();
        assert_abs_diff_eq!(inv.hx(), 1.1 / 59.0, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.x(59), 1.1, epsilon = 1e-14);

        let small = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        assert_abs_diff_eq!(small.hx(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(small.ht(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(UniformGrid::new(0.0, 1.0, 0.0, 1.0, 3, 10).is_err());
        assert!(UniformGrid::new(1.0, 0.0, 0.0, 1.0, 10, 10).is_err());
        assert!(UniformGrid::new(0.0, 1.0, 1.0, 1.0, 10, 10).is_err());
        assert!(UniformGrid::new(0.0, f64::NAN, 0.0, 1.0, 10, 10).is_err());
        assert!(UniformGrid::new(0.0, f64::INFINITY, 0.0, 1.0, 10, 10).is_err());
    }

    #[test]
    fn storage_is_x_major() {
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 4, 5).unwrap();
        let f = ScalarField::from_fn(g, |x, t| 10.0 * x + t);
        assert_eq!(f.values()[1], f.get(0, 1));
        assert_eq!(f.values()[5], f.get(1, 0));
        assert_eq!(f.column(2), &f.values()[10..15]);
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        let mut v = vec![0.0; 16];
        v[7] = f64::NAN;
        assert!(ScalarField::from_values(g, v).is_err());
        assert!(ScalarField::from_values(g, vec![0.0; 15]).is_err());
    }

    #[test]
    fn triangle_membership() {
        assert!(Region::Triangle.contains(0.5, 0.9));
        assert!(!Region::Triangle.contains(0.5, 1.1));
        assert!(!Region::Triangle.contains(0.0, 0.5));
        let shrunk = Region::ShrunkTriangle { alpha: 0.5, eps: 0.1 };
        assert!(shrunk.contains(0.2, 1.0));
        assert!(!shrunk.contains(0.5, 0.9));
    }

    #[test]
    fn constant_field_sum_counts_interior_nodes() {
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 11, 11).unwrap();
        let f = ScalarField::from_fn(g, |_, _| 1.0);
        let r = Region::Rectangle { x0: 0.0, x1: 1.0, t0: 0.0, t1: 1.0 };
        let s = weighted_sum(&f, |_, _| 1.0, r);
        assert_abs_diff_eq!(s, 0.01 * 81.0, epsilon = 1e-14);
        let zero = ScalarField::zeros(g);
        assert_eq!(weighted_sum(&zero, |x, t| (x + t).exp(), r), 0.0);
    }

    #[test]
    fn carleman_weighted_sum_converges_to_closed_form() {
        // Independent closed form: int_0^1 e^{-2x} dx * int_0^2 e^{-t} dt.
        let exact = (1.0 - (-2.0_f64).exp()).powi(2) / 2.0;
        let r = Region::Rectangle { x0: 0.0, x1: 1.0, t0: 0.0, t1: 2.0 };
        let mut errs = Vec::new();
        for n in [41usize, 81, 161, 321] {
            let g = UniformGrid::new(0.0, 1.0, 0.0, 2.0, n, 2 * n - 1).unwrap();
            let f = ScalarField::from_fn(g, |_, _| 1.0);
            let s = weighted_sum(&f, |x, t| (-2.0 * (x + 0.5 * t)).exp(), r);
            errs.push(((s - exact).abs(), g.hx()));
        }
        for (e, h) in &errs {
            assert!(*e < 1.0 * h, "error {e} at h {h}");
        }
        // node sum that drops boundary nodes is first order: halving h halves the error
        for w in errs.windows(2) {
            let ratio = w[0].0 / w[1].0;
            assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn stencil_exactness() {
        let g = UniformGrid::new(-1.0, 2.0, 0.0, 1.0, 31, 7).unwrap();
        let lin = ScalarField::from_fn(g, |x, _| x);
        let quad = ScalarField::from_fn(g, |x, _| x * x);
        for i in 1..29 {
            assert_abs_diff_eq!(diff_x(&lin, i, 3, Scheme::Central).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(diff_x(&quad, i, 3, Scheme::Second).unwrap(), 2.0, epsilon = 1e-9);
        }
        let tq = ScalarField::from_fn(g, |_, t| 3.0 * t * t);
        assert_abs_diff_eq!(diff_t(&tq, 4, 2, Scheme::Second).unwrap(), 6.0, epsilon = 1e-9);
        let konst = ScalarField::from_fn(g, |_, _| 4.2);
        for s in [Scheme::Forward, Scheme::Central, Scheme::Second] {
            assert_eq!(diff_x(&konst, 5, 2, s).unwrap(), 0.0);
            assert_eq!(diff_t(&konst, 5, 2, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn forward_difference_of_sine() {
        // Taylor remainder: |f'(0) - D+f(0)| <= h/2 sup|f''| = 0.005.
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 101, 4).unwrap();
        let f = ScalarField::from_fn(g, |x, _| x.sin());
        let d = diff_x(&f, 0, 0, Scheme::Forward).unwrap();
        assert!((d - 1.0).abs() < 5e-3);
    }

    #[test]
    fn out_of_range_stencils_are_reported() {
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 5, 5).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(diff_x(&f, 4, 0, Scheme::Forward), Err(Error::StencilOutOfRange { .. })));
        assert!(diff_x(&f, 0, 0, Scheme::Central).is_err());
        assert!(diff_t(&f, 0, 3, Scheme::Second).is_err());
        assert!(diff_t(&f, 0, 2, Scheme::Second).is_ok());
    }

    #[test]
    fn csv_layout() {
        let g = UniformGrid::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        let f = ScalarField::from_fn(g, |x, t| x + t);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,t,value"));
        assert_eq!(lines.count(), 16);
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let nodes = [0.0, 0.013, 0.1, 0.25, 0.3, 0.5, 0.9];
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        for k in 0..=90 {
            let x = k as f64 / 100.0;
            assert!((lagrange_local(&nodes, &values, x) - f(x)).abs() < 1e-12);
        }
        assert_eq!(lagrange_local(&nodes, &values, 2.0), values[6]);
        assert_eq!(lagrange_local(&[0.0, 1.0], &[1.0, 3.0], 0.5), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weighted_sum_is_linear_and_monotone(
                vals in proptest::collection::vec(0.0f64..10.0, 36),
                shift in proptest::collection::vec(0.0f64..10.0, 36),
                c in -3.0f64..3.0,
            ) {
                let g = UniformGrid::new(0.0, 1.0, 0.0, 2.0, 6, 6).unwrap();
                let r = Region::Rectangle { x0: -1.0, x1: 2.0, t0: -1.0, t1: 3.0 };
                let w = |x: f64, t: f64| (-(x + t)).exp();
                let a = ScalarField::from_values(g, vals.clone()).unwrap();
                let b = ScalarField::from_values(g, shift.clone()).unwrap();
                let comb: Vec<f64> = vals.iter().zip(&shift).map(|(p, q)| p + c * q).collect();
                let ab = ScalarField::from_values(g, comb).unwrap();
                let lhs = weighted_sum(&ab, w, r);
                let rhs = weighted_sum(&a, w, r) + c * weighted_sum(&b, w, r);
                prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
                let bigger: Vec<f64> = vals.iter().zip(&shift).map(|(p, q)| p + q).collect();
                let big = ScalarField::from_values(g, bigger).unwrap();
                prop_assert!(weighted_sum(&big, w, r) >= weighted_sum(&a, w, r));
            }
        }
    }
}
