//! Cubic smoothing splines with knots at the data abscissae.
//!
//! The fit minimizes `p * sum (y_k - s(t_k))^2 + (1 - p) * int s''^2`. Its
//! minimizer is a natural cubic spline (`s'' = 0` at both ends), found here by
//! the Reinsch construction: with node values `g` and interior second
//! derivatives `gamma`, `Q^T g = R gamma`, and the optimality condition reduces
//! to the pentadiagonal system `(R + (1-p)/p Q^T E Q) gamma = Q^T y`. A
//! prescribed value at the first knot is imposed exactly by removing that node
//! from the data term (`E_00 = 0`) and substituting the value into `y`.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Boundary requirements on top of the natural condition `s''(t_end) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndConditions {
    /// Exact value of the spline at the first knot.
    pub start_value: Option<f64>,
}

impl EndConditions {
    pub fn start_value(value: f64) -> Self {
        Self { start_value: Some(value) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    p: f64,
}

/// `L D L^T` factor of a symmetric positive definite pentadiagonal matrix
/// given by `d0[k] = M[k][k]`, `d1[k] = M[k][k+1]`, `d2[k] = M[k][k+2]`.
/// After factoring, `d0` holds `D` and `d1`, `d2` the two subdiagonals of
/// the unit lower factor.
struct Pentadiagonal {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Pentadiagonal {
    fn factor(mut d0: Vec<f64>, mut d1: Vec<f64>, mut d2: Vec<f64>) -> Result<Self> {
        let m = d0.len();
        for k in 0..m {
            if k >= 1 {
                let l1 = d1[k - 1];
                d0[k] -= l1 * l1 * d0[k - 1];
                if k + 1 < m {
                    d1[k] -= l1 * d2[k - 1] * d0[k - 1];
                }
            }
            if k >= 2 {
                let l2 = d2[k - 2];
                d0[k] -= l2 * l2 * d0[k - 2];
            }
            if !(d0[k] > 0.0) || !d0[k].is_finite() {
                return Err(Error::Spline(format!("singular normal system at row {k}")));
            }
            if k + 1 < m {
                d1[k] /= d0[k];
            }
            if k + 2 < m {
                d2[k] /= d0[k];
            }
        }
        Ok(Self { d0, d1, d2 })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.d0.len();
        let mut z = rhs.to_vec();
        for k in 0..m {
            if k >= 1 {
                z[k] -= self.d1[k - 1] * z[k - 1];
            }
            if k >= 2 {
                z[k] -= self.d2[k - 2] * z[k - 2];
            }
        }
        for k in 0..m {
            z[k] /= self.d0[k];
        }
        for k in (0..m).rev() {
            if k + 1 < m {
                z[k] -= self.d1[k] * z[k + 1];
            }
            if k + 2 < m {
                z[k] -= self.d2[k] * z[k + 2];
            }
        }
        z
    }

    /// Main and first super-diagonal of the inverse, by the backward
    /// recursion `L^T S = D^{-1} L^{-1}` on the band.
    fn inverse_band(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.d0.len();
        let mut s0 = vec![0.0; m];
        let mut s1 = vec![0.0; m];
        for k in (0..m).rev() {
            let (l1, l2) = (
                if k + 1 < m { self.d1[k] } else { 0.0 },
                if k + 2 < m { self.d2[k] } else { 0.0 },
            );
            let at0 = |i: usize| if i < m { s0[i] } else { 0.0 };
            let at1 = |i: usize| if i < m { s1[i] } else { 0.0 };
            // S[k][k+1], S[k][k+2] from the rows below, then S[k][k]
            let up1 = -l1 * at0(k + 1) - l2 * at1(k + 1);
            let up2 = -l1 * at1(k + 1) - l2 * at0(k + 2);
            s0[k] = 1.0 / self.d0[k] - l1 * up1 - l2 * up2;
            s1[k] = up1;
        }
        (s0, s1)
    }
}

impl SmoothingSpline {
    pub fn fit(series: &TimeSeries, ends: EndConditions, p: f64) -> Result<Self> {
        Self::fit_with_dof(series, ends, p).map(|(s, _)| s)
    }

    /// The fit together with `tr(I - A)` over the free data nodes, `A` being
    /// the linear map from data to fitted values.
    fn fit_with_dof(series: &TimeSeries, ends: EndConditions, p: f64) -> Result<(Self, f64)> {
        if series.len() < 4 {
            return Err(Error::Spline(format!("need at least 4 samples, got {}", series.len())));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Spline(format!("smoothing parameter {p} outside (0, 1]")));
        }
        let t = series.t();
        let mut y = series.values().to_vec();
        let mut e = vec![1.0; y.len()];
        if let Some(v) = ends.start_value {
            y[0] = v;
            e[0] = 0.0;
        }
        let n = t.len() - 1;
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 1;
        let lam = (1.0 - p) / p;

        // Q column k (interior knot k = 1..n-1, stored at k-1) has entries
        // rows k-1, k, k+1.
        let qcol = |k: usize| -> [(usize, f64); 3] {
            [
                (k - 1, 1.0 / h[k - 1]),
                (k, -1.0 / h[k - 1] - 1.0 / h[k]),
                (k + 1, 1.0 / h[k]),
            ]
        };
        let mut d0 = vec![0.0; m];
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        for k in 1..n {
            d0[k - 1] += (h[k - 1] + h[k]) / 3.0;
            if k < n - 1 {
                d1[k - 1] += h[k] / 6.0;
            }
        }
        if lam > 0.0 {
            // row r of Q touches columns r-1, r, r+1
            for r in 0..=n {
                let cols: Vec<(usize, f64)> = (r.saturating_sub(1)..=(r + 1).min(n - 1))
                    .filter(|&k| k >= 1)
                    .filter_map(|k| qcol(k).iter().find(|(row, _)| *row == r).map(|&(_, v)| (k, v)))
                    .collect();
                for &(ka, va) in &cols {
                    for &(kb, vb) in &cols {
                        if kb < ka {
                            continue;
                        }
                        let add = lam * e[r] * va * vb;
                        match kb - ka {
                            0 => d0[ka - 1] += add,
                            1 => d1[ka - 1] += add,
                            2 => d2[ka - 1] += add,
                            _ => unreachable!(),
                        }
                    }
                }
            }
        }
        let r_band: Vec<(f64, f64)> = (1..n).map(|k| ((h[k - 1] + h[k]) / 3.0, h[k] / 6.0)).collect();
        let rhs: Vec<f64> = (1..n).map(|k| qcol(k).iter().map(|&(r, v)| v * y[r]).sum()).collect();
        let system = Pentadiagonal::factor(d0, d1, d2)?;
        let gamma_inner = system.solve(&rhs);
        // I - A = lam E Q B^{-1} Q^T, whose trace is m - tr(B^{-1} R)
        let residual_dof = if lam > 0.0 {
            let (s0, s1) = system.inverse_band();
            let tr: f64 = (0..m).map(|k| r_band[k].0 * s0[k] + if k + 1 < m { 2.0 * r_band[k].1 * s1[k] } else { 0.0 }).sum();
            m as f64 - tr
        } else {
            0.0
        };

        let mut second = vec![0.0; n + 1];
        second[1..n].copy_from_slice(&gamma_inner);
        let mut values = y.clone();
        if lam > 0.0 {
            for r in 0..=n {
                if e[r] == 0.0 {
                    continue;
                }
                let mut qg = 0.0;
                for k in r.saturating_sub(1)..=(r + 1).min(n - 1) {
                    if k >= 1 {
                        if let Some(&(_, v)) = qcol(k).iter().find(|(row, _)| *row == r) {
                            qg += v * second[k];
                        }
                    }
                }
                values[r] = y[r] - lam * qg;
            }
        }
        Ok((Self { knots: t.to_vec(), values, second, p }, residual_dof))
    }

    /// Fits with `p` minimizing the generalized cross-validation score
    /// `n RSS / tr(I - A)^2`: a scan over `log10((1 - p) / p)` in `[-8, 8]`
    /// followed by golden-section refinement around the best grid point.
    pub fn fit_gcv(series: &TimeSeries, ends: EndConditions) -> Result<Self> {
        let skip = usize::from(ends.start_value.is_some());
        let n = (series.len() - skip) as f64;
        let p_of = |log_lam: f64| 1.0 / (1.0 + 10f64.powf(log_lam));
        let score = |log_lam: f64| -> Result<f64> {
            let (s, dof) = Self::fit_with_dof(series, ends, p_of(log_lam))?;
            let rss: f64 = s.values.iter().zip(series.values()).skip(skip).map(|(g, y)| (g - y).powi(2)).sum();
            Ok(n * rss / (dof * dof))
        };
        let step = 0.25;
        let grid: Vec<f64> = (0..=64).map(|k| -8.0 + step * k as f64).collect();
        let scores = grid.iter().map(|&l| score(l)).collect::<Result<Vec<f64>>>()?;
        let best = (0..grid.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
        let (mut a, mut b) = (grid[best] - step, grid[best] + step);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - ratio * (b - a), a + ratio * (b - a));
        let (mut fc, mut fd) = (score(c)?, score(d)?);
        for _ in 0..40 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = score(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = score(d)?;
            }
        }
        Self::fit(series, ends, p_of(0.5 * (a + b)))
    }

    /// Fits with the smoothing parameter chosen by the discrepancy principle:
    /// the largest `p` whose residual RMS still reaches `noise_rms`.
    pub fn fit_discrepancy(series: &TimeSeries, ends: EndConditions, noise_rms: f64) -> Result<Self> {
        if !(noise_rms > 0.0) {
            return Self::fit(series, ends, 1.0);
        }
        let residual = |s: &Self| -> f64 {
            let sum: f64 = s
                .values
                .iter()
                .zip(series.values())
                .skip(usize::from(ends.start_value.is_some()))
                .map(|(g, y)| (g - y).powi(2))
                .sum();
            (sum / series.len() as f64).sqrt()
        };
        // residual RMS decreases with p; bisect on log10 of (1 - p) / p
        let p_of = |log_lam: f64| 1.0 / (1.0 + 10f64.powf(log_lam));
        let (mut lo, mut hi) = (-16.0_f64, 16.0_f64);
        let smoothest = Self::fit(series, ends, p_of(hi))?;
        if residual(&smoothest) < noise_rms {
            return Ok(smoothest);
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let s = Self::fit(series, ends, p_of(mid))?;
            if residual(&s) >= noise_rms {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Self::fit(series, ends, p_of(hi))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Spline values at the knots.
    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Value (`order = 0`), slope (`1`) or curvature (`2`) at `t`; outside the
    /// knot range the end polynomial piece is extended.
    pub fn evaluate(&self, t: f64, order: u8) -> f64 {
        let n = self.knots.len() - 1;
        let k = self.knots.partition_point(|&v| v <= t).clamp(1, n) - 1;
        let h = self.knots[k + 1] - self.knots[k];
        let a = (self.knots[k + 1] - t) / h;
        let b = (t - self.knots[k]) / h;
        let (g0, g1) = (self.values[k], self.values[k + 1]);
        let (c0, c1) = (self.second[k], self.second[k + 1]);
        match order {
            0 => a * g0 + b * g1 + ((a * a * a - a) * c0 + (b * b * b - b) * c1) * h * h / 6.0,
            1 => (g1 - g0) / h - (3.0 * a * a - 1.0) / 6.0 * h * c0 + (3.0 * b * b - 1.0) / 6.0 * h * c1,
            2 => a * c0 + b * c1,
            _ => 0.0,
        }
    }
}
