//! Symmetry-reduced discretizations shared by the flow and continuity solvers.
//!
//! * [`RadialReference`]: `U(1)`-invariant metrics on `CP^1` in the moment
//!   coordinate `x ∈ [0, s]` of a reference metric. A metric `ω` is stored as
//!   the ratio `R̄ = ω/ω_ref` on cells, and `−Ric(ω)/ω_ref = ∂_x(a' + a ∂_x log R̄)`
//!   with `a(x) = Φ_ρρ` the reference profile in the log-radius `ρ`.
//! * [`TorusGrid`]: periodic grids on a rectangular torus with fourth-order
//!   stencils for the complex Hessian `∂_i ∂̄_j`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{KahlerError, Result};
use crate::metric::{RadialProfile, C64};

/// Reference metric on `CP^1` discretized by finite volumes in its moment coordinate.
///
/// Faces follow `x = s(1 − cos θ)/2` on a uniform `θ` grid, which keeps
/// `a/width²` nearly constant across cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialReference {
    pub profile: RadialProfile,
    /// Moment interval length; the class is `2π s H`.
    pub s: f64,
    pub cells: usize,
    /// Face positions, `cells + 1` of them.
    pub faces: Vec<f64>,
    pub widths: Vec<f64>,
    pub centers: Vec<f64>,
    /// Distance between neighbouring centers across each face (zero at the poles).
    pub gaps: Vec<f64>,
    /// `a` at the faces, zero at the poles.
    pub a_face: Vec<f64>,
    /// `a'` at the faces, `±1` at the poles.
    pub ap_face: Vec<f64>,
    /// Log-radius of each cell center.
    pub rho_center: Vec<f64>,
    coupling: Vec<f64>,
    inv_widths: Vec<f64>,
}

impl RadialReference {
    pub fn new(profile: &RadialProfile, cells: usize) -> Result<Self> {
        if cells < 4 {
            return Err(KahlerError::invalid("radial grid needs at least 4 cells"));
        }
        if !(profile.s > 0.0) {
            return Err(KahlerError::NotKahler {
                coeffs: vec![profile.s],
            });
        }
        let s = profile.s;
        let faces: Vec<f64> = (0..=cells)
            .map(|f| match f {
                0 => 0.0,
                f if f == cells => s,
                f => 0.5 * s * (1.0 - (std::f64::consts::PI * f as f64 / cells as f64).cos()),
            })
            .collect();
        let widths: Vec<f64> = faces.windows(2).map(|w| w[1] - w[0]).collect();
        let centers: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut gaps = vec![0.0; cells + 1];
        for f in 1..cells {
            gaps[f] = centers[f] - centers[f - 1];
        }
        let mut a_face = vec![0.0; cells + 1];
        let mut ap_face = vec![0.0; cells + 1];
        ap_face[0] = 1.0;
        ap_face[cells] = -1.0;
        for f in 1..cells {
            let rho = invert_moment(profile, faces[f])?;
            let (_, a, a_rho) = moment_data(profile, rho);
            if !(a > 0.0) {
                return Err(KahlerError::DegenerateMetric {
                    point: vec![rho],
                    min_eigenvalue: a,
                });
            }
            a_face[f] = a;
            ap_face[f] = a_rho / a;
        }
        let rho_center = centers
            .iter()
            .map(|x| invert_moment(profile, *x))
            .collect::<Result<Vec<_>>>()?;
        let coupling = (0..=cells)
            .map(|f| {
                if gaps[f] > 0.0 {
                    a_face[f] / gaps[f]
                } else {
                    0.0
                }
            })
            .collect();
        let inv_widths = widths.iter().map(|w| 1.0 / w).collect();
        Ok(Self {
            profile: profile.clone(),
            s,
            cells,
            faces,
            widths,
            centers,
            gaps,
            a_face,
            ap_face,
            rho_center,
            coupling,
            inv_widths,
        })
    }

    /// Cell averages of `−Ric(ω)/ω_ref` for `ω = R̄ ω_ref`, given `R̄ > 0`.
    pub fn neg_ricci_ratio(&self, ratio: &[f64], out: &mut [f64]) {
        let n = self.cells;
        let mut left = self.ap_face[0];
        for j in 0..n {
            let right = if j + 1 < n {
                self.ap_face[j + 1] + self.coupling[j + 1] * log_quotient(ratio[j + 1], ratio[j])
            } else {
                self.ap_face[n]
            };
            out[j] = (right - left) * self.inv_widths[j];
            left = right;
        }
    }

    /// Discrete `a''` per cell, i.e. `−Ric(ω_ref)/ω_ref`.
    pub fn reference_neg_ricci(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cells];
        self.neg_ricci_ratio(&vec![1.0; self.cells], &mut out);
        out
    }

    /// Tridiagonal coefficients `(lower, diag, upper)` of `u ↦ ∂_x(a ∂_x u)`.
    pub fn laplacian_bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.cells;
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for j in 0..n {
            let al = if j > 0 {
                self.a_face[j] / (self.gaps[j] * self.widths[j])
            } else {
                0.0
            };
            let ar = if j + 1 < n {
                self.a_face[j + 1] / (self.gaps[j + 1] * self.widths[j])
            } else {
                0.0
            };
            lo[j] = al;
            up[j] = ar;
            di[j] = -al - ar;
        }
        (lo, di, up)
    }

    /// `∫ f ω_ref` with `f` given per cell.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        2.0 * std::f64::consts::PI * (0..self.cells).map(|j| f(j) * self.widths[j]).sum::<f64>()
    }
}

/// `log(b/a)` for positive `a, b`, by the `artanh` series when they are close.
#[inline]
pub(crate) fn log_quotient(b: f64, a: f64) -> f64 {
    let u = (b - a) / (b + a);
    if u.abs() < 1e-3 {
        let u2 = u * u;
        2.0 * u * (1.0 + u2 * (1.0 / 3.0 + u2 * (0.2 + u2 / 7.0)))
    } else {
        (b / a).ln()
    }
}

/// `(x, a, ∂_ρ a)` at log-radius `ρ`.
fn moment_data(profile: &RadialProfile, rho: f64) -> (f64, f64, f64) {
    let r = rho.exp();
    let [_, f1, f2, f3, _] = profile.derivatives(r);
    let x = r * f1;
    let a = r * f1 + r * r * f2;
    let a_rho = r * f1 + 3.0 * r * r * f2 + r.powi(3) * f3;
    (x, a, a_rho)
}

/// Log-radius where the moment coordinate equals `x`.
fn invert_moment(profile: &RadialProfile, x: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-200.0f64, 200.0f64);
    if !(moment_data(profile, lo).0 < x && moment_data(profile, hi).0 > x) {
        return Err(KahlerError::invalid(format!(
            "moment value {x} outside the profile range"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moment_data(profile, mid).0 < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Periodic grid with sparse fourth-order complex Hessian stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    pub periods: Vec<[f64; 2]>,
    /// Node counts per real axis; a single node marks an inactive axis.
    pub nodes: Vec<usize>,
    pub n: usize,
    pub len: usize,
    /// Lebesgue measure represented by one node.
    pub cell_volume: f64,
    ops: Vec<Vec<(usize, C64)>>,
}

const D1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

impl TorusGrid {
    pub fn new(periods: Vec<[f64; 2]>, nodes: Vec<usize>) -> Result<Self> {
        let n = periods.len();
        if n == 0 || nodes.len() != 2 * n {
            return Err(KahlerError::invalid(
                "torus grid needs one node count per real axis",
            ));
        }
        if nodes.iter().any(|m| *m != 1 && *m < 5) {
            return Err(KahlerError::invalid(
                "active grid axes need at least 5 nodes",
            ));
        }
        if periods.iter().flatten().any(|p| !(*p > 0.0)) {
            return Err(KahlerError::invalid("periods must be positive"));
        }
        let len: usize = nodes.iter().product();
        let steps: Vec<f64> = (0..2 * n)
            .map(|a| periods[a / 2][a % 2] / nodes[a] as f64)
            .collect();
        let cell_volume = steps.iter().product();
        let mut grid = Self {
            periods,
            nodes,
            n,
            len,
            cell_volume,
            ops: Vec::new(),
        };
        let mut ops = Vec::with_capacity(len * n * n);
        for node in 0..len {
            let base = grid.unravel(node);
            for i in 0..n {
                for j in 0..n {
                    let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                    let mut add = |a: usize, b: usize, c: C64| {
                        grid.real_second(&base, &steps, a, b, c, &mut acc)
                    };
                    add(2 * i, 2 * j, C64::new(0.25, 0.0));
                    add(2 * i + 1, 2 * j + 1, C64::new(0.25, 0.0));
                    add(2 * i, 2 * j + 1, C64::new(0.0, 0.25));
                    add(2 * i + 1, 2 * j, C64::new(0.0, -0.25));
                    ops.push(acc.into_iter().filter(|(_, w)| w.norm() > 0.0).collect());
                }
            }
        }
        grid.ops = ops;
        Ok(grid)
    }

    fn real_second(
        &self,
        base: &[usize],
        steps: &[f64],
        a: usize,
        b: usize,
        c: C64,
        acc: &mut BTreeMap<usize, C64>,
    ) {
        if self.nodes[a] == 1 || self.nodes[b] == 1 {
            return;
        }
        if a == b {
            for (k, w) in D2.iter().enumerate() {
                let mut off = vec![0i64; base.len()];
                off[a] = k as i64 - 2;
                *acc.entry(self.shifted(base, &off)).or_default() +=
                    c * (w / (steps[a] * steps[a]));
            }
        } else {
            for (k, wa) in D1.iter().enumerate() {
                for (l, wb) in D1.iter().enumerate() {
                    if *wa == 0.0 || *wb == 0.0 {
                        continue;
                    }
                    let mut off = vec![0i64; base.len()];
                    off[a] = k as i64 - 2;
                    off[b] = l as i64 - 2;
                    *acc.entry(self.shifted(base, &off)).or_default() +=
                        c * (wa * wb / (steps[a] * steps[b]));
                }
            }
        }
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for a in (0..self.nodes.len()).rev() {
            out[a] = idx % self.nodes[a];
            idx /= self.nodes[a];
        }
        out
    }

    fn shifted(&self, base: &[usize], off: &[i64]) -> usize {
        let mut idx = 0usize;
        for a in 0..self.nodes.len() {
            let m = self.nodes[a] as i64;
            idx = idx * self.nodes[a] + (base[a] as i64 + off[a]).rem_euclid(m) as usize;
        }
        idx
    }

    /// Real coordinates of a node.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .enumerate()
            .map(|(a, i)| *i as f64 * self.periods[a / 2][a % 2] / self.nodes[a] as f64)
            .collect()
    }

    /// Sparse stencil of the `(i, j)` Hessian entry at `node`.
    pub fn entry_ops(&self, node: usize, i: usize, j: usize) -> &[(usize, C64)] {
        &self.ops[(node * self.n + i) * self.n + j]
    }

    /// `∂_i ∂̄_j f` at every node, stored node-major as `n × n` row-major blocks.
    /// Stencil weights sum to zero, so values are taken relative to the node
    /// to keep large offsets out of the cancellation.
    pub fn hessian(&self, values: &[f64], out: &mut [C64]) {
        let nn = self.n * self.n;
        for (idx, (slot, op)) in out.iter_mut().zip(&self.ops).enumerate() {
            let c = values[idx / nn];
            *slot = op.iter().map(|(k, w)| w * (values[*k] - c)).sum();
        }
    }
}

/// Log-determinant and inverse of a Hermitian positive matrix in row-major storage.
/// Returns `None` when the matrix is not positive definite.
pub(crate) fn herm_logdet_inv(n: usize, a: &[C64], inv: &mut [C64]) -> Option<f64> {
    match n {
        1 => {
            let g = a[0].re;
            if !(g > 0.0) {
                return None;
            }
            inv[0] = C64::new(1.0 / g, 0.0);
            Some(g.ln())
        }
        2 => {
            let (p, q, b) = (a[0].re, a[3].re, a[1]);
            let det = p * q - b.norm_sqr();
            if !(p > 0.0 && det > 0.0) {
                return None;
            }
            inv[0] = C64::new(q / det, 0.0);
            inv[1] = -b / det;
            inv[2] = -a[2] / det;
            inv[3] = C64::new(p / det, 0.0);
            Some(det.ln())
        }
        _ => {
            let m = DMatrix::from_row_slice(n, n, a);
            let ch = m.cholesky()?;
            let logdet = 2.0
                * ch.l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.re.ln())
                    .sum::<f64>();
            let i = ch.inverse();
            for r in 0..n {
                for c in 0..n {
                    inv[r * n + c] = i[(r, c)];
                }
            }
            Some(logdet)
        }
    }
}

/// Smallest eigenvalue of a Hermitian matrix in row-major storage.
pub(crate) fn herm_min_eig(n: usize, a: &[C64]) -> f64 {
    match n {
        1 => a[0].re,
        2 => {
            let (p, q) = (a[0].re, a[3].re);
            0.5 * (p + q) - (0.25 * (p - q) * (p - q) + a[1].norm_sqr()).sqrt()
        }
        _ => crate::metric::min_eigenvalue(&DMatrix::from_row_slice(n, n, a)),
    }
}

/// Solves a tridiagonal system in place by the Thomas algorithm.
pub(crate) fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut b = di[0];
    if b == 0.0 {
        return Err(KahlerError::invalid("singular tridiagonal system"));
    }
    rhs[0] /= b;
    for i in 1..n {
        c[i - 1] = up[i - 1] / b;
        b = di[i] - lo[i] * c[i - 1];
        if b == 0.0 {
            return Err(KahlerError::invalid("singular tridiagonal system"));
        }
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}
