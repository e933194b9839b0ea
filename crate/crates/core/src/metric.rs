//! The energy inner product of the quadratic part of the functional, used to
//! turn its nodal gradient into a descent direction.

use crate::objective::{cwf, InverseConfig, FIXED_COLUMNS};
use crate::transform::WField;

/// Symmetric band matrix stored by lower diagonals.
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    bandwidth: usize,
    /// `band[k * (bandwidth + 1) + d]` holds entry `(k, k - d)`.
    band: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, band: vec![0.0; n * (bandwidth + 1)] }
    }

    fn entry(&mut self, row: usize, col: usize) -> &mut f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        debug_assert!(r - c <= self.bandwidth);
        &mut self.band[r * (self.bandwidth + 1) + (r - c)]
    }

    fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        if r - c > self.bandwidth {
            0.0
        } else {
            self.band[r * (self.bandwidth + 1) + (r - c)]
        }
    }

    /// Adds `scale * s s^T` for a sparse vector `s`.
    fn add_outer(&mut self, scale: f64, s: &[(usize, f64)]) {
        for &(a, ca) in s {
            for &(b, cb) in s {
                if a >= b {
                    *self.entry(a, b) += scale * ca * cb;
                }
            }
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.bandwidth);
                let hi = (r + self.bandwidth).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    /// In-place `L L^T` factorization; `None` if the matrix is not positive
    /// definite.
    fn cholesky(mut self) -> Option<Self> {
        let width = self.bandwidth + 1;
        for k in 0..self.n {
            let lo = k.saturating_sub(self.bandwidth);
            for c in lo..=k {
                let mut s = self.band[k * width + (k - c)];
                for m in lo.max(c.saturating_sub(self.bandwidth))..c {
                    s -= self.band[k * width + (k - m)] * self.band[c * width + (c - m)];
                }
                if c == k {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.band[k * width] = s.sqrt();
                } else {
                    self.band[k * width + (k - c)] = s / self.band[c * width];
                }
            }
        }
        Some(self)
    }

    /// Solves with a factor produced by `cholesky`.
    fn solve(&self, rhs: &mut [f64]) {
        let width = self.bandwidth + 1;
        for k in 0..self.n {
            let lo = k.saturating_sub(self.bandwidth);
            let s: f64 = (lo..k).map(|m| self.band[k * width + (k - m)] * rhs[m]).sum();
            rhs[k] = (rhs[k] - s) / self.band[k * width];
        }
        for k in (0..self.n).rev() {
            let hi = (k + self.bandwidth).min(self.n - 1);
            let s: f64 = (k + 1..=hi).map(|m| self.band[m * width + (m - k)] * rhs[m]).sum();
            rhs[k] = (rhs[k] - s) / self.band[k * width];
        }
    }
}

/// Hessian at `w = 0` of the functional (the weighted normal operator of
/// `w_xx - 2 w_xt` plus the regularization and boundary terms), restricted to
/// the free nodes. Nodes the functional does not see get a unit diagonal.
#[derive(Debug, Clone)]
pub struct EnergyMetric {
    grid: crate::mesh::UniformGrid,
    matrix: BandMatrix,
    factor: BandMatrix,
}

impl EnergyMetric {
    pub fn new(cfg: &InverseConfig) -> Self {
        let g = &cfg.grid;
        let (nx, nt, hx, ht) = (g.n_x(), g.n_t(), g.hx(), g.ht());
        let index = |i: usize, j: usize| (i >= FIXED_COLUMNS).then(|| (i - FIXED_COLUMNS) * nt + j);
        let stencil = |nodes: &[(usize, usize, f64)]| -> Vec<(usize, f64)> {
            nodes.iter().filter_map(|&(i, j, c)| index(i, j).map(|k| (k, c))).collect()
        };
        let n = (nx - FIXED_COLUMNS) * nt;
        let mut m = BandMatrix::zeros(n, 2 * nt + 1);
        let vol = 2.0 * hx * ht;
        let (cx, cxt) = (1.0 / (hx * hx), 2.0 / (hx * ht));
        for i in 0..nx - 2 {
            for j in 0..nt - 1 {
                let s = stencil(&[
                    (i, j, cx - cxt),
                    (i + 1, j, cxt - 2.0 * cx),
                    (i + 2, j, cx),
                    (i, j + 1, cxt),
                    (i + 1, j + 1, -cxt),
                ]);
                m.add_outer(vol * cwf(g.x(i), g.t(j), cfg.carleman), &s);
            }
        }
        let b = cfg.beta * vol;
        let (ctt, cx2) = (1.0 / (ht * ht), 1.0 / (hx * hx));
        for i in FIXED_COLUMNS..nx - 1 {
            for j in 0..nt - 1 {
                m.add_outer(b, &stencil(&[(i, j, 1.0)]));
                m.add_outer(b, &stencil(&[(i, j, -1.0 / hx), (i + 1, j, 1.0 / hx)]));
                m.add_outer(b, &stencil(&[(i, j, -1.0 / ht), (i, j + 1, 1.0 / ht)]));
                if i + 2 < nx {
                    m.add_outer(b, &stencil(&[(i, j, cx2), (i + 1, j, -2.0 * cx2), (i + 2, j, cx2)]));
                }
                if j + 2 < nt {
                    m.add_outer(b, &stencil(&[(i, j, ctt), (i, j + 1, -2.0 * ctt), (i, j + 2, ctt)]));
                }
            }
        }
        for j in 0..nt - 1 {
            m.add_outer(2.0 * cfg.mu, &stencil(&[(nx - 2, j, -1.0 / hx), (nx - 1, j, 1.0 / hx)]));
        }
        for k in 0..n {
            let d = m.entry(k, k);
            if *d == 0.0 {
                *d = 1.0;
            }
        }
        let factor = m.clone().cholesky().expect("regularization makes the metric positive definite");
        Self { grid: cfg.grid, matrix: m, factor }
    }

    fn offset(&self) -> usize {
        FIXED_COLUMNS * self.grid.n_t()
    }

    /// The field `g`, zero on the fixed columns, with `<g, v> = sum_k
    /// grad_k v_k` for every `v` vanishing on the fixed columns.
    pub fn riesz(&self, grad: &WField) -> WField {
        assert_eq!(grad.grid(), &self.grid, "gradient lives on a different grid");
        let offset = self.offset();
        let mut out = grad.clone();
        let values = out.field.values_mut();
        values[..offset].iter_mut().for_each(|v| *v = 0.0);
        self.factor.solve(&mut values[offset..]);
        out
    }

    /// `<u, v>` over the free nodes.
    pub fn inner(&self, u: &WField, v: &WField) -> f64 {
        let offset = self.offset();
        let mu = self.matrix.mul(&u.field.values()[offset..]);
        mu.iter().zip(&v.field.values()[offset..]).map(|(a, b)| a * b).sum()
    }
}
