//! Synthetic data: the fundamental solution of `u_tt = u_xx + a(x) u` with
//! `u(x,0) = 0, u_t(x,0) = delta(x)`, computed by two independent routes, and
//! the boundary traces `f0(t) = u(0,t)`, `f1(t) = u_x(0,t)`.
//!
//! Both routes split `u = u0 + s` where `u0(x,t) = H(t - |x|) / 2` is the
//! free-space wave carrying the jump along the light cone. The scattered part
//! `s` is continuous, so neither route has to resolve the discontinuity.

use std::io::Write;

use rayon::prelude::*;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::mesh::{lagrange_local, ScalarField, UniformGrid};
use crate::series::TimeSeries;

/// Free-space fundamental solution `H(t - |x|) / 2`, taking the limit from
/// inside the cone on `t = |x|`.
#[inline]
pub fn incident(x: f64, t: f64) -> f64 {
    if t >= x.abs() {
        0.5
    } else {
        0.0
    }
}

/// Fraction of the characteristic diamond centred at offset `lag = t - |x|`
/// from the light cone (half-diagonal `h`) that lies inside the cone. The cone
/// is parallel to two of the diamond's edges, so the fraction is linear in `lag`.
fn diamond_fraction_inside(h: f64, lag: f64) -> f64 {
    ((lag + h) / (2.0 * h)).clamp(0.0, 1.0)
}

fn check_forward_grid(grid: &UniformGrid) -> Result<()> {
    if grid.ht() > grid.hx() {
        return Err(Error::Cfl { ht: grid.ht(), hx: grid.hx() });
    }
    if grid.x_max() < 1.0 {
        return Err(Error::ForwardDomain(format!("A = {} < 1", grid.x_max())));
    }
    if grid.x_min() >= 0.0 {
        return Err(Error::ForwardDomain(format!("B = {} is not positive", -grid.x_min())));
    }
    if grid.t_min() != 0.0 {
        return Err(Error::ForwardDomain(format!("t_min = {} must be 0", grid.t_min())));
    }
    Ok(())
}

fn sample_coefficient(a: &Coefficient, grid: &UniformGrid) -> Result<Vec<f64>> {
    let samples = a.sample(&grid.xs());
    if let Some(k) = samples.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidCoefficient(format!(
            "sample {} at x = {} is not a finite nonnegative number",
            samples[k],
            grid.x(k)
        )));
    }
    Ok(samples)
}

/// Explicit finite differences on `(-B, A) x (0, T)`.
///
/// The scattered part `s = u - u0` obeys `s_tt = s_xx + a s + a u0` with zero
/// Cauchy data. It is advanced by leapfrog with the characteristic step
/// `dt = h_x`, where the three-level scheme propagates kinks without
/// dispersion. Over each characteristic diamond the scheme is the exact
/// identity `s(N) + s(S) - s(E) - s(W) = 1/2 int_diamond (a s + a u0)`, with
/// `a` frozen at the node and the step `u0` integrated exactly. At both ends
/// the first-order upwind discretization of `u_x -+ u_t = 0` is used; `u0`
/// satisfies these conditions identically. Output time levels are interpolated
/// by local cubics in `t`, anchored at `s = 0` on the light cone.
pub fn solve_forward_fd(a: &Coefficient, grid: &UniformGrid) -> Result<ScalarField> {
    check_forward_grid(grid)?;
    let coef = sample_coefficient(a, grid)?;
    let nx = grid.n_x();
    let h = grid.hx();
    let xs = grid.xs();
    let active: Vec<usize> = (1..nx - 1).filter(|&i| coef[i] != 0.0).collect();
    let levels = (grid.t_max() / h).ceil() as usize + 1;

    // rows[m] holds s(., m h)
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(levels + 1);
    rows.push(vec![0.0; nx]);
    let mut first = vec![0.0; nx];
    for &i in &active {
        // s(h) = int_0^h (h - s) a u0(x, s) ds
        let lag = (h - xs[i].abs()).max(0.0);
        first[i] = coef[i] * 0.25 * lag * lag;
    }
    rows.push(first);

    for m in 1..levels {
        let (prev, cur) = (&rows[m - 1], &rows[m]);
        let tm = m as f64 * h;
        let mut next = vec![0.0; nx];
        for i in 1..nx - 1 {
            next[i] = cur[i + 1] + cur[i - 1] - prev[i];
        }
        for &i in &active {
            // 1/2 * u0 * diamond area (2 h^2) * fraction inside the cone
            let src = 0.5 * h * h * diamond_fraction_inside(h, tm - xs[i].abs());
            next[i] += coef[i] * (h * h * cur[i] + src);
        }
        next[nx - 1] = cur[nx - 2];
        next[0] = cur[1];
        rows.push(next);
    }

    let mut field = ScalarField::zeros(*grid);
    for (i, &x) in xs.iter().enumerate() {
        let cone = x.abs();
        let mut nodes = vec![cone];
        let mut values = vec![0.0];
        for (m, row) in rows.iter().enumerate() {
            let tm = m as f64 * h;
            if tm >= cone + 0.1 * h {
                nodes.push(tm);
                values.push(row[i]);
            }
        }
        let col = field.column_mut(i);
        for (j, c) in col.iter_mut().enumerate() {
            let t = grid.t(j);
            let scattered = if t < cone { 0.0 } else { lagrange_local(&nodes, &values, t) };
            *c = incident(x, t) + scattered;
        }
    }
    if !field.all_finite() {
        return Err(Error::InvalidCoefficient("finite-difference solution blew up".into()));
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraOptions {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_terms: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub field: ScalarField,
    /// `sup |u_n|` over the support columns for `n = 0, 1, ...`.
    pub term_sups: Vec<f64>,
    /// `sup |u_n(x,t)| / t^n` over the support columns, `t > 0`.
    pub term_growth: Vec<f64>,
}

impl VolterraSolution {
    pub fn terms(&self) -> usize {
        self.term_sups.len()
    }
}

/// Cumulative trapezoid table of one column, interpolated linearly.
struct Cumulative {
    table: Vec<f64>,
    ht: f64,
}

impl Cumulative {
    fn new(column: &[f64], ht: f64) -> Self {
        let mut table = Vec::with_capacity(column.len());
        let mut acc = 0.0;
        table.push(0.0);
        for w in column.windows(2) {
            acc += 0.5 * ht * (w[0] + w[1]);
            table.push(acc);
        }
        Self { table, ht }
    }

    fn at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            crate::mesh::lerp_uniform(&self.table, 0.0, self.ht, s)
        }
    }
}

/// Successive approximations of the Volterra equation
/// `u = u0 + 1/2 int_D(x,t) a(xi) u(xi, tau) dxi dtau` on the cone `t > |x|`.
///
/// The `xi` integral is the midpoint rule on the grid columns inside `(0, 1)`;
/// the inner `tau` integral uses a cumulative trapezoid table per column.
pub fn solve_forward_volterra(a: &Coefficient, grid: &UniformGrid, opts: VolterraOptions) -> Result<VolterraSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("Volterra tolerance {} must be positive", opts.tol)));
    }
    if grid.t_min() != 0.0 {
        return Err(Error::ForwardDomain(format!("t_min = {} must be 0", grid.t_min())));
    }
    let coef = sample_coefficient(a, grid)?;
    let (hx, ht, nt) = (grid.hx(), grid.ht(), grid.n_t());
    let support: Vec<usize> = (0..grid.n_x())
        .filter(|&i| grid.x(i) > 0.0 && grid.x(i) < 1.0 && coef[i] != 0.0)
        .collect();
    let xi: Vec<f64> = support.iter().map(|&k| grid.x(k)).collect();
    let weight: Vec<f64> = support.iter().map(|&k| 0.5 * hx * coef[k]).collect();
    let ts = grid.ts();

    // one Picard step evaluated at column position x
    let apply = |x: f64, tables: &dyn Fn(usize, f64) -> f64| -> Vec<f64> {
        ts.iter()
            .map(|&t| {
                if t <= x.abs() {
                    return 0.0;
                }
                xi.iter()
                    .zip(&weight)
                    .enumerate()
                    .map(|(m, (&s, &w))| w * tables(m, t - (x - s).abs()))
                    .sum()
            })
            .collect()
    };

    let mut term_sups = vec![0.5];
    let mut term_growth = vec![0.5];
    let mut total: Vec<Vec<f64>> = vec![vec![0.0; nt]; support.len()];
    // C_0(xi, s) = (s - xi)_+ / 2 for the incident term
    let incident_table = |m: usize, s: f64| 0.5 * (s - xi[m]).max(0.0);

    let mut previous: Option<Vec<Cumulative>> = None;
    let mut converged = support.is_empty();
    let mut n = 1;
    while !converged && n < opts.max_terms {
        let term: Vec<Vec<f64>> = match &previous {
            None => xi.par_iter().map(|&x| apply(x, &incident_table)).collect(),
            Some(cum) => {
                let lookup = |m: usize, s: f64| cum[m].at(s);
                xi.par_iter().map(|&x| apply(x, &lookup)).collect()
            }
        };
        let mut sup = 0.0_f64;
        let mut growth = 0.0_f64;
        for col in &term {
            for (j, v) in col.iter().enumerate() {
                sup = sup.max(v.abs());
                if j > 0 {
                    growth = growth.max(v.abs() / ts[j].powi(n as i32));
                }
            }
        }
        term_sups.push(sup);
        term_growth.push(growth);
        for (acc, col) in total.iter_mut().zip(&term) {
            for (a, v) in acc.iter_mut().zip(col) {
                *a += v;
            }
        }
        previous = Some(term.iter().map(|c| Cumulative::new(c, ht)).collect());
        converged = sup < opts.tol;
        n += 1;
    }
    if !converged {
        return Err(Error::VolterraNonConvergence {
            terms: n,
            last_sup: *term_sups.last().unwrap_or(&f64::NAN),
        });
    }

    // full solution on every column: u = u0 + K[u0 + sum_n u_n]
    let totals: Vec<Cumulative> = total.iter().map(|c| Cumulative::new(c, ht)).collect();
    let full = |m: usize, s: f64| incident_table(m, s) + totals[m].at(s);
    let columns: Vec<Vec<f64>> = grid
        .xs()
        .par_iter()
        .map(|&x| {
            let scattered = apply(x, &full);
            ts.iter().zip(scattered).map(|(&t, s)| incident(x, t) + s).collect()
        })
        .collect();
    let field = ScalarField::from_values(*grid, columns.concat())?;
    Ok(VolterraSolution { field, term_sups, term_growth })
}

/// Boundary measurements at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub f0: TimeSeries,
    pub f1: TimeSeries,
}

impl TraceData {
    pub fn new(f0: TimeSeries, f1: TimeSeries) -> Result<Self> {
        if f0.t() != f1.t() {
            return Err(Error::InvalidSeries("f0 and f1 must share time nodes".into()));
        }
        Ok(Self { f0, f1 })
    }

    pub fn t(&self) -> &[f64] {
        self.f0.t()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,f0,f1")?;
        for ((t, a), b) in self.f0.t().iter().zip(self.f0.values()).zip(self.f1.values()) {
            writeln!(out, "{t},{a},{b}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let (mut t, mut f0, mut f1) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidSeries(format!("bad trace row: {record:?}")))
            };
            t.push(parse(0)?);
            f0.push(parse(1)?);
            f1.push(parse(2)?);
        }
        Self::new(TimeSeries::new(t.clone(), f0)?, TimeSeries::new(t, f1)?)
    }
}

/// Traces at `x = 0`. When `0` is a node, `f0` is sampled there and `f1` is
/// the central difference across it; otherwise `f0` interpolates the two
/// bracketing columns and `f1` is their divided difference.
pub fn extract_traces(u: &ScalarField) -> Result<TraceData> {
    let g = u.grid();
    let hx = g.hx();
    let s = -g.x_min() / hx;
    if !(s > 0.0 && s < (g.n_x() - 1) as f64) {
        return Err(Error::NoOriginColumn);
    }
    let ts = g.ts();
    let near = s.round();
    let (f0, f1): (Vec<f64>, Vec<f64>) = if (s - near).abs() < 1e-9 && near >= 1.0 && near + 1.0 < g.n_x() as f64 {
        let k = near as usize;
        (0..g.n_t())
            .map(|j| (u.get(k, j), (u.get(k + 1, j) - u.get(k - 1, j)) / (2.0 * hx)))
            .unzip()
    } else {
        let k = s.floor() as usize;
        let frac = s - k as f64;
        (0..g.n_t())
            .map(|j| {
                let (l, r) = (u.get(k, j), u.get(k + 1, j));
                (l * (1.0 - frac) + r * frac, (r - l) / hx)
            })
            .unzip()
    };
    TraceData::new(TimeSeries::new(ts.clone(), f0)?, TimeSeries::new(ts, f1)?)
}

/// Sup-norms of `u_x + u_t` at `x = A` and `u_x - u_t` at `x = -B`, using
/// second-order one-sided space and central time differences. Times within
/// three steps of the front reaching the boundary are skipped.
pub fn absorbing_residuals(u: &ScalarField) -> (f64, f64) {
    let g = u.grid();
    let (hx, ht, nx) = (g.hx(), g.ht(), g.n_x());
    let skip = 3.0 * hx.max(ht);
    let mut left = 0.0_f64;
    let mut right = 0.0_f64;
    for j in 1..g.n_t() - 1 {
        let t = g.t(j);
        let ut = |i: usize| (u.get(i, j + 1) - u.get(i, j - 1)) / (2.0 * ht);
        if (t - g.x_max()).abs() > skip {
            let ux = (3.0 * u.get(nx - 1, j) - 4.0 * u.get(nx - 2, j) + u.get(nx - 3, j)) / (2.0 * hx);
            right = right.max((ux + ut(nx - 1)).abs());
        }
        if (t + g.x_min()).abs() > skip {
            let ux = (-3.0 * u.get(0, j) + 4.0 * u.get(1, j) - u.get(2, j)) / (2.0 * hx);
            left = left.max((ux - ut(0)).abs());
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::TestCase;

    fn small_grid() -> UniformGrid {
        UniformGrid::new(-2.2, 2.2, 0.0, 4.0, 256, 256).unwrap()
    }

    #[test]
    fn diamond_fraction_limits() {
        let h = 0.1;
        assert_eq!(diamond_fraction_inside(h, -0.2), 0.0);
        assert_eq!(diamond_fraction_inside(h, 0.2), 1.0);
        assert_eq!(diamond_fraction_inside(h, 0.0), 0.5);
        assert!((diamond_fraction_inside(h, 0.05) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_cfl_violation_and_bad_domains() {
        let g = UniformGrid::new(-2.2, 2.2, 0.0, 4.0, 100, 50).unwrap();
        assert!(matches!(solve_forward_fd(&Coefficient::Zero, &g), Err(Error::Cfl { .. })));
        let g = UniformGrid::new(-2.0, 0.9, 0.0, 1.0, 100, 100).unwrap();
        assert!(matches!(solve_forward_fd(&Coefficient::Zero, &g), Err(Error::ForwardDomain(_))));
        let g = UniformGrid::new(0.0, 2.0, 0.0, 1.0, 100, 100).unwrap();
        assert!(matches!(solve_forward_fd(&Coefficient::Zero, &g), Err(Error::ForwardDomain(_))));
    }

    #[test]
    fn zero_potential_is_half_heaviside() {
        let g = small_grid();
        let u = solve_forward_fd(&Coefficient::Zero, &g).unwrap();
        for i in 0..g.n_x() {
            for j in 0..g.n_t() {
                assert_eq!(u.get(i, j), incident(g.x(i), g.t(j)));
            }
        }
        let traces = extract_traces(&u).unwrap();
        for (t, (f0, f1)) in traces.t().iter().zip(traces.f0.values().iter().zip(traces.f1.values())) {
            if *t >= 0.2 {
                assert!((f0 - 0.5).abs() < 0.01);
                assert!(f1.abs() < 0.01);
            }
        }
        let (l, r) = absorbing_residuals(&u);
        assert!(l < 1e-2 && r < 1e-2, "{l} {r}");
    }

    #[test]
    fn volterra_zero_potential_is_single_term() {
        let g = small_grid();
        let sol = solve_forward_volterra(&Coefficient::Zero, &g, VolterraOptions::default()).unwrap();
        assert_eq!(sol.terms(), 1);
        for i in 0..g.n_x() {
            for j in 0..g.n_t() {
                assert_eq!(sol.field.get(i, j), incident(g.x(i), g.t(j)));
            }
        }
    }

    #[test]
    fn volterra_constant_potential_stays_above_half() {
        let g = small_grid();
        let sol = solve_forward_volterra(&Coefficient::Constant(1.0), &g, VolterraOptions::default()).unwrap();
        for i in 0..g.n_x() {
            for j in 0..g.n_t() {
                let (x, t) = (g.x(i), g.t(j));
                if t >= x.abs() {
                    assert!(sol.field.get(i, j) >= 0.5, "({x}, {t})");
                } else {
                    assert_eq!(sol.field.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn volterra_rejects_bad_tolerance() {
        let opts = VolterraOptions { tol: 0.0, max_terms: 10 };
        assert!(solve_forward_volterra(&Coefficient::Zero, &small_grid(), opts).is_err());
    }

    #[test]
    fn volterra_reports_truncation() {
        let opts = VolterraOptions { tol: 1e-30, max_terms: 3 };
        let r = solve_forward_volterra(&Coefficient::Test(TestCase::Two), &small_grid(), opts);
        assert!(matches!(r, Err(Error::VolterraNonConvergence { .. })));
    }

    #[test]
    fn traces_need_origin_column() {
        let g = UniformGrid::new(0.0, 2.0, 0.0, 1.0, 50, 50).unwrap();
        assert!(matches!(extract_traces(&ScalarField::zeros(g)), Err(Error::NoOriginColumn)));
    }

    #[test]
    fn traces_on_grid_with_origin_node() {
        let g = UniformGrid::new(-2.0, 2.0, 0.0, 1.0, 41, 11).unwrap();
        let u = ScalarField::from_fn(g, |x, t| 1.0 + 3.0 * x + t);
        let tr = extract_traces(&u).unwrap();
        for (j, (f0, f1)) in tr.f0.values().iter().zip(tr.f1.values()).enumerate() {
            assert!((f0 - (1.0 + g.t(j))).abs() < 1e-12);
            assert!((f1 - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_csv_round_trip() {
        let t = vec![0.0, 0.5, 1.0];
        let tr = TraceData::new(
            TimeSeries::new(t.clone(), vec![0.5, 0.51, 0.523456789012345]).unwrap(),
            TimeSeries::new(t, vec![0.0, -0.1, 1e-17]).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = TraceData::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }
}
