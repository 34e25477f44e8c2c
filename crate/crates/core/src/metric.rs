//! Kähler metrics on chart domains and their derivative jets.
//!
//! A metric is given by `g_{ij̄} = ∂_i ∂_j̄ φ` for a potential `φ`, possibly on
//! top of a flat background. [`Jets`] carries `g`, its holomorphic first
//! derivatives `∂_k g_{ij̄}` and the mixed second derivatives
//! `∂_k ∂_l̄ g_{ij̄}`, which is all the curvature engine needs.
//!
//! Real coordinates are ordered `(x_1, y_1, …, x_n, y_n)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KahlerError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

/// Default positivity floor on the smallest metric eigenvalue.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Jets {
    pub n: usize,
    /// `g[(i, j)] = g_{ij̄}`.
    pub g: CMat,
    /// `dg[k][(i, j)] = ∂_k g_{ij̄}`.
    pub dg: Vec<CMat>,
    /// `ddg[k][l][(i, j)] = ∂_k ∂_l̄ g_{ij̄}`.
    pub ddg: Vec<Vec<CMat>>,
}

impl Jets {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            g: CMat::zeros(n, n),
            dg: vec![CMat::zeros(n, n); n],
            ddg: vec![vec![CMat::zeros(n, n); n]; n],
        }
    }

    fn scale(mut self, c: f64) -> Self {
        let c = C64::new(c, 0.0);
        self.g *= c;
        for m in &mut self.dg {
            *m *= c;
        }
        for row in &mut self.ddg {
            for m in row {
                *m *= c;
            }
        }
        self
    }

    fn block_diag(parts: &[Jets]) -> Self {
        let n = parts.iter().map(|p| p.n).sum();
        let mut out = Jets::zeros(n);
        let mut off = 0;
        for p in parts {
            let m = p.n;
            out.g.view_mut((off, off), (m, m)).copy_from(&p.g);
            for k in 0..m {
                out.dg[off + k]
                    .view_mut((off, off), (m, m))
                    .copy_from(&p.dg[k]);
                for l in 0..m {
                    out.ddg[off + k][off + l]
                        .view_mut((off, off), (m, m))
                        .copy_from(&p.ddg[k][l]);
                }
            }
            off += m;
        }
        out
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(g: &CMat) -> f64 {
    g.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Radial profile `f(r) = s log(1 + r) + Σ_m c_m u^m`, `r = |z|^2`, `u = r/(1+r)`.
///
/// Every profile extends smoothly over the hyperplane at infinity and lies in
/// the class `2π s H`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub s: f64,
    pub coeffs: Vec<f64>,
}

impl RadialProfile {
    pub fn fubini_study(s: f64) -> Self {
        Self {
            s,
            coeffs: Vec::new(),
        }
    }

    fn poly_derivs(&self, u: f64) -> [f64; 5] {
        let mut d = [0.0; 5];
        for (idx, c) in self.coeffs.iter().enumerate() {
            let m = idx as i32 + 1;
            let mut fall = 1.0;
            for (order, slot) in d.iter_mut().enumerate() {
                let p = m - order as i32;
                if p < 0 {
                    break;
                }
                *slot += c * fall * u.powi(p);
                fall *= p as f64;
            }
        }
        d
    }

    /// `[f, f', f'', f''', f'''']` with respect to `r`.
    pub fn derivatives(&self, r: f64) -> [f64; 5] {
        let q = 1.0 / (1.0 + r);
        let l = [(1.0 + r).ln(), q, -q * q, 2.0 * q.powi(3), -6.0 * q.powi(4)];
        let u = r * q;
        let (u1, u2, u3, u4) = (q * q, -2.0 * q.powi(3), 6.0 * q.powi(4), -24.0 * q.powi(5));
        let p = self.poly_derivs(u);
        let f1 = p[1] * u1;
        let f2 = p[2] * u1 * u1 + p[1] * u2;
        let f3 = p[3] * u1.powi(3) + 3.0 * p[2] * u1 * u2 + p[1] * u3;
        let f4 = p[4] * u1.powi(4)
            + 6.0 * p[3] * u1 * u1 * u2
            + p[2] * (3.0 * u2 * u2 + 4.0 * u1 * u3)
            + p[1] * u4;
        [
            self.s * l[0] + p[0],
            self.s * l[1] + f1,
            self.s * l[2] + f2,
            self.s * l[3] + f3,
            self.s * l[4] + f4,
        ]
    }
}

/// Single Fourier mode `a cos(κ·X + β)` of a torus potential, with integer
/// wave numbers per real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub amplitude: f64,
    pub wave: Vec<i32>,
    pub phase: f64,
}

/// Potential values on a uniform periodic grid of a rectangular torus.
///
/// Axes with a single node are inactive: the potential is constant along
/// them and their derivatives vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPotential {
    pub periods: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
    /// Flat background `diag(h)` added to the complex Hessian.
    pub background: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridPotential {
    pub fn new(
        periods: Vec<[f64; 2]>,
        nodes: Vec<usize>,
        background: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = periods.len();
        if nodes.len() != 2 * n || background.len() != n {
            return Err(KahlerError::invalid(
                "grid potential needs two node counts and one background entry per complex axis",
            ));
        }
        let total: usize = nodes.iter().product();
        if total != values.len() || nodes.contains(&0) {
            return Err(KahlerError::invalid(format!(
                "grid has {total} nodes but {} values",
                values.len()
            )));
        }
        Ok(Self {
            periods,
            nodes,
            background,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.periods.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|a| self.periods[a / 2][a % 2] / self.nodes[a] as f64)
            .collect()
    }

    /// Multi-index of a flat node index, last axis fastest.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for a in (0..self.nodes.len()).rev() {
            out[a] = idx % self.nodes[a];
            idx /= self.nodes[a];
        }
        out
    }

    pub fn ravel(&self, multi: &[i64]) -> usize {
        let mut idx = 0usize;
        for (a, m) in multi.iter().enumerate() {
            let na = self.nodes[a] as i64;
            idx = idx * self.nodes[a] + m.rem_euclid(na) as usize;
        }
        idx
    }

    /// Real coordinates of a node.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let steps = self.steps();
        self.unravel(idx)
            .iter()
            .zip(&steps)
            .map(|(i, h)| *i as f64 * h)
            .collect()
    }

    /// Node index at real coordinates, if they fall on the grid.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let steps = self.steps();
        let mut multi = Vec::with_capacity(x.len());
        for (a, xa) in x.iter().enumerate() {
            let q = xa / steps[a];
            let r = q.round();
            if (q - r).abs() > 1e-6 {
                return None;
            }
            multi.push(r as i64);
        }
        Some(self.ravel(&multi))
    }

    pub fn jets_at_node(&self, idx: usize) -> Jets {
        let base = self.unravel(idx);
        let steps = self.steps();
        let active: Vec<bool> = self.nodes.iter().map(|m| *m > 1).collect();
        let eval = |off: &[i64]| {
            let multi: Vec<i64> = base.iter().zip(off).map(|(b, o)| *b as i64 + o).collect();
            self.values[self.ravel(&multi)]
        };
        let mut jets = fd_jets(self.n(), &steps, &active, eval);
        for (k, h) in self.background.iter().enumerate() {
            jets.g[(k, k)] += C64::new(*h, 0.0);
        }
        jets
    }
}

/// Closed-form or grid Kähler metric on a chart.
#[derive(Debug, Clone)]
pub enum MetricField {
    /// `g = diag(h)`, potential `Σ h_k |z_k|^2`.
    Flat { diag: Vec<f64> },
    /// `U(n)`-invariant metric on the affine chart of `CP^n`.
    Radial { n: usize, profile: RadialProfile },
    /// Flat background plus a trigonometric potential on a rectangular torus.
    TorusFourier {
        periods: Vec<[f64; 2]>,
        diag: Vec<f64>,
        modes: Vec<FourierMode>,
    },
    /// Block-diagonal product metric.
    Product(Vec<MetricField>),
    /// `c · g`.
    Scaled(f64, Box<MetricField>),
    /// Same metric with jets taken by fourth-order finite differences of its potential.
    FiniteDifference { inner: Box<MetricField>, step: f64 },
    /// Potential sampled on a periodic grid; evaluable at grid nodes only.
    Grid(Arc<GridPotential>),
}

impl MetricField {
    pub fn flat(n: usize) -> Self {
        MetricField::Flat { diag: vec![1.0; n] }
    }

    pub fn fubini_study(n: usize) -> Self {
        MetricField::Radial {
            n,
            profile: RadialProfile::fubini_study(1.0),
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        MetricField::Scaled(c, Box::new(self))
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricField::Flat { diag } => diag.len(),
            MetricField::Radial { n, .. } => *n,
            MetricField::TorusFourier { diag, .. } => diag.len(),
            MetricField::Product(parts) => parts.iter().map(MetricField::dim).sum(),
            MetricField::Scaled(_, inner) | MetricField::FiniteDifference { inner, .. } => {
                inner.dim()
            }
            MetricField::Grid(grid) => grid.n(),
        }
    }

    /// Kähler potential where a closed form exists.
    pub fn potential(&self, x: &[f64]) -> Option<f64> {
        match self {
            MetricField::Flat { diag } => {
                Some(diag.iter().enumerate().map(|(k, h)| h * abs2(x, k)).sum())
            }
            MetricField::Radial { n, profile } => {
                let r: f64 = (0..*n).map(|k| abs2(x, k)).sum();
                Some(profile.derivatives(r)[0])
            }
            MetricField::TorusFourier {
                periods,
                diag,
                modes,
            } => {
                let flat: f64 = diag.iter().enumerate().map(|(k, h)| h * abs2(x, k)).sum();
                let wave: f64 = modes
                    .iter()
                    .map(|m| {
                        let kx = wave_vector(periods, &m.wave);
                        m.amplitude * (dot(&kx, x) + m.phase).cos()
                    })
                    .sum();
                Some(flat + wave)
            }
            MetricField::Product(parts) => {
                let mut off = 0;
                let mut acc = 0.0;
                for p in parts {
                    let m = 2 * p.dim();
                    acc += p.potential(&x[off..off + m])?;
                    off += m;
                }
                Some(acc)
            }
            MetricField::Scaled(c, inner) => inner.potential(x).map(|v| c * v),
            MetricField::FiniteDifference { inner, .. } => inner.potential(x),
            MetricField::Grid(_) => None,
        }
    }

    /// Derivative jets at real coordinates `x`, without a positivity check.
    pub fn jets(&self, x: &[f64]) -> Result<Jets> {
        if x.len() != 2 * self.dim() {
            return Err(KahlerError::DimensionMismatch {
                expected: 2 * self.dim(),
                found: x.len(),
            });
        }
        match self {
            MetricField::Flat { diag } => {
                let mut j = Jets::zeros(diag.len());
                for (k, h) in diag.iter().enumerate() {
                    j.g[(k, k)] = C64::new(*h, 0.0);
                }
                Ok(j)
            }
            MetricField::Radial { n, profile } => Ok(radial_jets(*n, profile, x)),
            MetricField::TorusFourier {
                periods,
                diag,
                modes,
            } => Ok(fourier_jets(periods, diag, modes, x)),
            MetricField::Product(parts) => {
                let mut off = 0;
                let mut js = Vec::with_capacity(parts.len());
                for p in parts {
                    let m = 2 * p.dim();
                    js.push(p.jets(&x[off..off + m])?);
                    off += m;
                }
                Ok(Jets::block_diag(&js))
            }
            MetricField::Scaled(c, inner) => Ok(inner.jets(x)?.scale(*c)),
            MetricField::FiniteDifference { inner, step } => {
                if inner.potential(x).is_none() {
                    return Err(KahlerError::invalid(
                        "finite differences need a metric with a closed-form potential",
                    ));
                }
                let d = 2 * inner.dim();
                let steps = vec![*step; d];
                let active = vec![true; d];
                let eval = |off: &[i64]| {
                    let y: Vec<f64> = x
                        .iter()
                        .zip(off)
                        .map(|(xi, o)| xi + *o as f64 * step)
                        .collect();
                    inner.potential(&y).unwrap_or(f64::NAN)
                };
                Ok(fd_jets(inner.dim(), &steps, &active, eval))
            }
            MetricField::Grid(grid) => {
                let idx = grid
                    .node_at(x)
                    .ok_or_else(|| KahlerError::StencilOutOfDomain { point: x.to_vec() })?;
                Ok(grid.jets_at_node(idx))
            }
        }
    }

    /// Metric matrix at `x`, checked against the positivity floor.
    pub fn metric(&self, x: &[f64]) -> Result<CMat> {
        let j = self.jets(x)?;
        check_positive(&j.g, x)?;
        Ok(j.g)
    }
}

pub(crate) fn check_positive(g: &CMat, x: &[f64]) -> Result<()> {
    let lam = min_eigenvalue(g);
    if !(lam > EIGEN_FLOOR) {
        return Err(KahlerError::DegenerateMetric {
            point: x.to_vec(),
            min_eigenvalue: lam,
        });
    }
    Ok(())
}

fn abs2(x: &[f64], k: usize) -> f64 {
    x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real wave vector of integer wave numbers on a rectangular torus.
pub fn wave_vector(periods: &[[f64; 2]], wave: &[i32]) -> Vec<f64> {
    wave.iter()
        .enumerate()
        .map(|(a, m)| 2.0 * PI * *m as f64 / periods[a / 2][a % 2])
        .collect()
}

fn zc(x: &[f64], k: usize) -> C64 {
    C64::new(x[2 * k], x[2 * k + 1])
}

fn radial_jets(n: usize, profile: &RadialProfile, x: &[f64]) -> Jets {
    let z: Vec<C64> = (0..n).map(|k| zc(x, k)).collect();
    let zb: Vec<C64> = z.iter().map(|c| c.conj()).collect();
    let r: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let [_, f1, f2, f3, f4] = profile.derivatives(r);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut j = Jets::zeros(n);
    for i in 0..n {
        for jj in 0..n {
            j.g[(i, jj)] = f1 * d(i, jj) + f2 * zb[i] * z[jj];
            for k in 0..n {
                j.dg[k][(i, jj)] =
                    f3 * zb[k] * zb[i] * z[jj] + f2 * (zb[i] * d(jj, k) + zb[k] * d(i, jj));
                for l in 0..n {
                    j.ddg[k][l][(i, jj)] = f4 * z[l] * zb[k] * zb[i] * z[jj]
                        + f3 * (d(k, l) * zb[i] * z[jj]
                            + d(i, l) * zb[k] * z[jj]
                            + d(jj, k) * z[l] * zb[i]
                            + d(i, jj) * z[l] * zb[k])
                        + f2 * (d(i, l) * d(jj, k) + d(k, l) * d(i, jj));
                }
            }
        }
    }
    j
}

/// Truncated Taylor series in two variables `(p, q)` up to total degree 4.
#[derive(Clone, Copy)]
struct BiSeries([[f64; 5]; 5]);

impl BiSeries {
    fn constant(c: f64) -> Self {
        let mut s = [[0.0; 5]; 5];
        s[0][0] = c;
        Self(s)
    }

    fn add(self, o: Self) -> Self {
        let mut s = self.0;
        for (a, row) in s.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate().take(5 - a) {
                *v += o.0[a][b];
            }
        }
        Self(s)
    }

    fn scale(self, c: f64) -> Self {
        let mut s = self.0;
        s.iter_mut().flatten().for_each(|v| *v *= c);
        Self(s)
    }

    fn mul(self, o: Self) -> Self {
        let mut s = [[0.0; 5]; 5];
        for a in 0..5 {
            for b in 0..5 - a {
                for c in 0..5 - a - b {
                    for d in 0..5 - a - b - c {
                        s[a + c][b + d] += self.0[a][b] * o.0[c][d];
                    }
                }
            }
        }
        Self(s)
    }

    /// `Σ coeffs[k] x^k` for a series `x`.
    fn poly(self, coeffs: &[f64]) -> Self {
        coeffs.iter().rev().fold(Self::constant(0.0), |acc, c| {
            acc.mul(self).add(Self::constant(*c))
        })
    }

    /// `∂_p^a ∂_q^b` at the expansion point.
    fn partial(&self, a: usize, b: usize) -> f64 {
        const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
        self.0[a][b] * FACT[a] * FACT[b]
    }
}

/// Jets of a radial metric in the affine chart centred on coordinate `m`,
/// `w_m = 1/z_m` and `w_k = z_k/z_m`.
///
/// There the potential is `s log(1 + |w|^2) + P(1 - v)` with
/// `v = |w_m|^2/(1 + |w|^2)`, a function of `p = |w_m|^2` and
/// `q = Σ_{k≠m} |w_k|^2`, whose derivatives stay free of cancellation
/// where `|z|` is large.
pub(crate) fn radial_far_jets(profile: &RadialProfile, w: &[C64], m: usize) -> Jets {
    let n = w.len();
    let p0 = w[m].norm_sqr();
    let q0: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>() - p0;
    let x0 = 1.0 + p0 + q0;
    let mut delta = BiSeries::constant(0.0);
    delta.0[1][0] = 1.0;
    delta.0[0][1] = 1.0;
    let t = delta.scale(1.0 / x0);
    // log(x0 + δ) and 1/(x0 + δ) as series in t = δ/x0
    let log = t.poly(&[x0.ln(), 1.0, -0.5, 1.0 / 3.0, -0.25]);
    let inv = t.poly(&[1.0, -1.0, 1.0, -1.0, 1.0]).scale(1.0 / x0);
    let mut p = BiSeries::constant(p0);
    p.0[1][0] = 1.0;
    let one_minus_v = BiSeries::constant(1.0).add(p.mul(inv).scale(-1.0));
    let mut coeffs = vec![0.0];
    coeffs.extend_from_slice(&profile.coeffs);
    let f = log.scale(profile.s).add(one_minus_v.poly(&coeffs));

    let class = |i: usize| usize::from(i != m);
    let fd = |idx: &[usize]| {
        let b = idx.iter().filter(|i| class(**i) == 1).count();
        C64::new(f.partial(idx.len() - b, b), 0.0)
    };
    let wb: Vec<C64> = w.iter().map(|c| c.conj()).collect();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut j = Jets::zeros(n);
    for i in 0..n {
        for jj in 0..n {
            j.g[(i, jj)] = fd(&[i]) * d(i, jj) + fd(&[i, jj]) * wb[i] * w[jj];
            for k in 0..n {
                j.dg[k][(i, jj)] = fd(&[i, k]) * wb[k] * d(i, jj)
                    + fd(&[i, jj, k]) * wb[k] * wb[i] * w[jj]
                    + fd(&[i, jj]) * wb[i] * d(jj, k);
                for l in 0..n {
                    j.ddg[k][l][(i, jj)] = fd(&[i, k, l]) * w[l] * wb[k] * d(i, jj)
                        + fd(&[i, k]) * d(k, l) * d(i, jj)
                        + fd(&[i, jj, k, l]) * w[l] * wb[k] * wb[i] * w[jj]
                        + fd(&[i, jj, k]) * (d(k, l) * wb[i] * w[jj] + d(i, l) * wb[k] * w[jj])
                        + fd(&[i, jj, l]) * w[l] * wb[i] * d(jj, k)
                        + fd(&[i, jj]) * d(i, l) * d(jj, k);
                }
            }
        }
    }
    j
}

fn fourier_jets(periods: &[[f64; 2]], diag: &[f64], modes: &[FourierMode], x: &[f64]) -> Jets {
    let n = diag.len();
    let mut j = Jets::zeros(n);
    for (k, h) in diag.iter().enumerate() {
        j.g[(k, k)] = C64::new(*h, 0.0);
    }
    for m in modes {
        let kx = wave_vector(periods, &m.wave);
        let theta = dot(&kx, x) + m.phase;
        let (s, c) = theta.sin_cos();
        let kc: Vec<C64> = (0..n)
            .map(|i| C64::new(0.5 * kx[2 * i], -0.5 * kx[2 * i + 1]))
            .collect();
        let a = m.amplitude;
        for i in 0..n {
            for jj in 0..n {
                let kk = kc[i] * kc[jj].conj();
                j.g[(i, jj)] -= a * c * kk;
                for k in 0..n {
                    j.dg[k][(i, jj)] += a * s * kk * kc[k];
                    for l in 0..n {
                        j.ddg[k][l][(i, jj)] += a * c * kk * kc[k] * kc[l].conj();
                    }
                }
            }
        }
    }
    j
}

/// Central stencils of fourth order: `(first offset, weights)` for derivative orders 1–4.
fn stencil(order: usize) -> (i64, &'static [f64]) {
    const D1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    const D2: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    const D3: [f64; 7] = [
        1.0 / 8.0,
        -1.0,
        13.0 / 8.0,
        0.0,
        -13.0 / 8.0,
        1.0,
        -1.0 / 8.0,
    ];
    const D4: [f64; 7] = [
        -1.0 / 6.0,
        2.0,
        -13.0 / 2.0,
        28.0 / 3.0,
        -13.0 / 2.0,
        2.0,
        -1.0 / 6.0,
    ];
    match order {
        1 => (-2, &D1),
        2 => (-2, &D2),
        3 => (-3, &D3),
        4 => (-3, &D4),
        _ => (0, &[1.0]),
    }
}

/// Real partial derivatives of a sampled function by tensor-product stencils.
struct RealDerivatives<'a, F: Fn(&[i64]) -> f64> {
    eval: F,
    steps: &'a [f64],
    active: &'a [bool],
    samples: HashMap<Vec<i64>, f64>,
    derivs: HashMap<Vec<usize>, f64>,
}

impl<'a, F: Fn(&[i64]) -> f64> RealDerivatives<'a, F> {
    fn sample(&mut self, off: &[i64]) -> f64 {
        if let Some(v) = self.samples.get(off) {
            return *v;
        }
        let v = (self.eval)(off);
        self.samples.insert(off.to_vec(), v);
        v
    }

    /// Derivative along the sorted list of real axes `axes`.
    fn get(&mut self, axes: &[usize]) -> f64 {
        let mut key = axes.to_vec();
        key.sort_unstable();
        if let Some(v) = self.derivs.get(&key) {
            return *v;
        }
        let d = self.steps.len();
        let mut counts = vec![0usize; d];
        for a in &key {
            counts[*a] += 1;
        }
        let value = if counts
            .iter()
            .enumerate()
            .any(|(a, c)| *c > 0 && !self.active[a])
        {
            0.0
        } else {
            let mut terms: Vec<(Vec<i64>, f64)> = vec![(vec![0; d], 1.0)];
            for (a, c) in counts.iter().enumerate() {
                if *c == 0 {
                    continue;
                }
                let (start, w) = stencil(*c);
                let scale = self.steps[a].powi(*c as i32);
                let mut next = Vec::with_capacity(terms.len() * w.len());
                for (off, coef) in &terms {
                    for (i, wi) in w.iter().enumerate() {
                        if *wi == 0.0 {
                            continue;
                        }
                        let mut o = off.clone();
                        o[a] = start + i as i64;
                        next.push((o, coef * wi / scale));
                    }
                }
                terms = next;
            }
            terms.iter().map(|(o, c)| c * self.sample(o)).sum()
        };
        self.derivs.insert(key, value);
        value
    }
}

/// Complex jets from real finite differences of a potential.
///
/// `∂_k = ½(∂_{x_k} − i∂_{y_k})`, so every complex derivative is a short sum
/// of real partials over the two axes of each index.
pub(crate) fn fd_jets<F: Fn(&[i64]) -> f64>(
    n: usize,
    steps: &[f64],
    active: &[bool],
    eval: F,
) -> Jets {
    let mut rd = RealDerivatives {
        eval,
        steps,
        active,
        samples: HashMap::new(),
        derivs: HashMap::new(),
    };
    let hol = |k: usize| {
        [
            (2 * k, C64::new(0.5, 0.0)),
            (2 * k + 1, C64::new(0.0, -0.5)),
        ]
    };
    let anti = |k: usize| [(2 * k, C64::new(0.5, 0.0)), (2 * k + 1, C64::new(0.0, 0.5))];
    let mut j = Jets::zeros(n);
    for i in 0..n {
        for jj in 0..n {
            let mut g = C64::new(0.0, 0.0);
            for (a, va) in hol(i) {
                for (b, vb) in anti(jj) {
                    g += va * vb * rd.get(&[a, b]);
                }
            }
            j.g[(i, jj)] = g;
            for k in 0..n {
                let mut d1 = C64::new(0.0, 0.0);
                for (a, va) in hol(i) {
                    for (b, vb) in anti(jj) {
                        for (c, vc) in hol(k) {
                            d1 += va * vb * vc * rd.get(&[a, b, c]);
                        }
                    }
                }
                j.dg[k][(i, jj)] = d1;
                for l in 0..n {
                    let mut d2 = C64::new(0.0, 0.0);
                    for (a, va) in hol(i) {
                        for (b, vb) in anti(jj) {
                            for (c, vc) in hol(k) {
                                for (e, ve) in anti(l) {
                                    d2 += va * vb * vc * ve * rd.get(&[a, b, c, e]);
                                }
                            }
                        }
                    }
                    j.ddg[k][l][(i, jj)] = d2;
                }
            }
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn flat_metric_is_identity() {
        let m = MetricField::flat(2);
        let g = m.metric(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert_eq!(g, CMat::identity(2, 2));
    }

    #[test]
    fn fubini_study_values() {
        let m = MetricField::fubini_study(1);
        assert!((m.metric(&[0.0, 0.0]).unwrap()[(0, 0)].re - 1.0).abs() < 1e-15);
        let g = m.metric(&[0.6, 0.8]).unwrap();
        assert!((g[(0, 0)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn radial_profile_derivatives_match_differences() {
        let p = RadialProfile {
            s: 1.3,
            coeffs: vec![0.2, -0.1, 0.05],
        };
        let r = 0.7;
        let h = 1e-3;
        let d = p.derivatives(r);
        for order in 1..5 {
            let lo = p.derivatives(r - h)[order - 1];
            let hi = p.derivatives(r + h)[order - 1];
            let fd = (hi - lo) / (2.0 * h);
            assert!(
                (fd - d[order]).abs() < 1e-5 * (1.0 + d[order].abs()),
                "order {order}"
            );
        }
    }

    #[test]
    fn finite_differences_match_closed_forms() {
        let fields = vec![
            MetricField::Radial {
                n: 2,
                profile: RadialProfile {
                    s: 1.0,
                    coeffs: vec![0.1, 0.05],
                },
            },
            MetricField::TorusFourier {
                periods: vec![[1.0, 1.0], [1.0, 1.0]],
                diag: vec![1.0, 1.0],
                modes: vec![FourierMode {
                    amplitude: 0.01,
                    wave: vec![1, 0, 0, 1],
                    phase: 0.3,
                }],
            },
        ];
        let x = [0.21, -0.13, 0.08, 0.17];
        for f in fields {
            let exact = f.jets(&x).unwrap();
            let fd = MetricField::FiniteDifference {
                inner: Box::new(f.clone()),
                step: 1e-2,
            }
            .jets(&x)
            .unwrap();
            assert!(max_diff(&exact.g, &fd.g) < 1e-7);
            for k in 0..2 {
                assert!(max_diff(&exact.dg[k], &fd.dg[k]) < 1e-5);
                for l in 0..2 {
                    assert!(max_diff(&exact.ddg[k][l], &fd.ddg[k][l]) < 1e-4);
                }
            }
        }
    }

    #[test]
    fn grid_potential_reproduces_fourier_mode() {
        let periods = vec![[1.0, 1.0]];
        let nodes = vec![32, 1];
        let mode = FourierMode {
            amplitude: 0.02,
            wave: vec![1, 0],
            phase: 0.0,
        };
        let closed = MetricField::TorusFourier {
            periods: periods.clone(),
            diag: vec![1.0],
            modes: vec![mode.clone()],
        };
        let mut values = Vec::new();
        for i in 0..32 {
            let x = i as f64 / 32.0;
            values.push(0.02 * (2.0 * PI * x).cos());
        }
        let grid = GridPotential::new(periods, nodes, vec![1.0], values).unwrap();
        let gm = MetricField::Grid(Arc::new(grid));
        let x = [5.0 / 32.0, 0.0];
        let a = closed.jets(&x).unwrap();
        let b = gm.jets(&x).unwrap();
        assert!(max_diff(&a.g, &b.g) < 1e-5);
        assert!(max_diff(&a.ddg[0][0], &b.ddg[0][0]) < 1e-3);
        assert!(matches!(
            gm.jets(&[0.01, 0.0]),
            Err(KahlerError::StencilOutOfDomain { .. })
        ));
    }

    #[test]
    fn degenerate_metric_reports_point() {
        let m = MetricField::TorusFourier {
            periods: vec![[1.0, 1.0]],
            diag: vec![1.0],
            modes: vec![FourierMode {
                amplitude: 1.0,
                wave: vec![1, 0],
                phase: 0.0,
            }],
        };
        match m.metric(&[0.0, 0.0]) {
            Err(KahlerError::DegenerateMetric {
                point,
                min_eigenvalue,
            }) => {
                assert_eq!(point, vec![0.0, 0.0]);
                assert!(min_eigenvalue < 0.0);
            }
            other => panic!("expected degenerate metric, got {other:?}"),
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let m = MetricField::Radial {
            n: 3,
            profile: RadialProfile {
                s: 2.0,
                coeffs: vec![0.3],
            },
        };
        let g = m.metric(&[0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).unwrap();
        assert!(max_diff(&g, &g.adjoint()) < 1e-12);
    }
}
