//! Quadrature atlases on the chart domains of the model manifolds.
//!
//! Points are real chart coordinates `(x_1, y_1, …, x_n, y_n)` with
//! `z_k = x_k + i y_k`; weights carry Lebesgue measure in those coordinates.
//! With `ω = i g dz∧dz̄` the top power integrates as
//! `∫ω^n = n! 2^n ∫ det g dLeb`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::classes::{Factor, ManifoldSpec};
use crate::error::{KahlerError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ChartKind {
    /// Fundamental domain of a rectangular torus.
    PeriodicBox { periods: Vec<[f64; 2]> },
    /// Affine chart of projective space, polar tangent substitution per coordinate.
    Affine,
    /// Tensor product of factor charts.
    Product,
}

/// Node counts used when building an atlas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    /// Nodes per real torus axis, cycled over the axes of every elliptic factor.
    pub torus_axes: Vec<usize>,
    /// Gauss–Legendre nodes in the radial angle `s`, `|z| = tan s`.
    pub radial: usize,
    /// Uniform nodes in the phase of each affine coordinate.
    pub angular: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            torus_axes: vec![32],
            radial: 32,
            angular: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureAtlas {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub chart: ChartKind,
    /// Relative error of the unscaled affine rule on `∫ω_FS^n`, zero for boxes.
    pub raw_volume_error: f64,
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = mid - half * z;
        x[m - 1 - i] = mid + half * z;
        w[i] = 2.0 * half / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl QuadratureAtlas {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform periodic grid on a rectangular torus.
    pub fn torus(periods: &[[f64; 2]], axes: &[usize]) -> Result<Self> {
        if axes.is_empty() || axes.contains(&0) {
            return Err(KahlerError::invalid(
                "torus resolution needs positive node counts",
            ));
        }
        let mut coords: Vec<Vec<(f64, f64)>> = Vec::new();
        for (k, p) in periods.iter().enumerate() {
            for a in 0..2 {
                let m = axes[(2 * k + a) % axes.len()];
                let h = p[a] / m as f64;
                coords.push((0..m).map(|i| (i as f64 * h, h)).collect());
            }
        }
        let (points, weights) = tensor(&coords);
        Ok(Self {
            dim: periods.len(),
            points,
            weights,
            chart: ChartKind::PeriodicBox {
                periods: periods.to_vec(),
            },
            raw_volume_error: 0.0,
        })
    }

    /// Affine chart of `CP^n`, rescaled so `∫ω_FS^n = (2π)^n` exactly.
    pub fn projective(n: usize, radial: usize, angular: usize) -> Result<Self> {
        if n == 0 || radial == 0 || angular == 0 {
            return Err(KahlerError::invalid(
                "projective atlas needs positive dimension and node counts",
            ));
        }
        let (s, ws) = gauss_legendre(radial, 0.0, 0.5 * PI);
        let dth = 2.0 * PI / angular as f64;
        let mut per_coord: Vec<(f64, f64, f64)> = Vec::with_capacity(radial * angular);
        for (si, wi) in s.iter().zip(&ws) {
            let r = si.tan();
            let jac = wi * r / (si.cos() * si.cos()) * dth;
            for j in 0..angular {
                let th = (j as f64 + 0.5) * dth;
                per_coord.push((r * th.cos(), r * th.sin(), jac));
            }
        }
        let mut points = vec![Vec::with_capacity(2 * n)];
        let mut weights = vec![1.0];
        for _ in 0..n {
            let mut np = Vec::with_capacity(points.len() * per_coord.len());
            let mut nw = Vec::with_capacity(points.len() * per_coord.len());
            for (p, w) in points.iter().zip(&weights) {
                for (x, y, wj) in &per_coord {
                    let mut q = p.clone();
                    q.push(*x);
                    q.push(*y);
                    np.push(q);
                    nw.push(w * wj);
                }
            }
            points = np;
            weights = nw;
        }
        let scale = factorial(n) * 2f64.powi(n as i32);
        let raw: f64 = points
            .iter()
            .zip(&weights)
            .map(|(p, w)| {
                let r: f64 = p.iter().map(|c| c * c).sum();
                w * scale * (1.0 + r).powi(-(n as i32 + 1))
            })
            .sum();
        let exact = (2.0 * PI).powi(n as i32);
        let fix = exact / raw;
        for w in &mut weights {
            *w *= fix;
        }
        Ok(Self {
            dim: n,
            points,
            weights,
            chart: ChartKind::Affine,
            raw_volume_error: (raw - exact).abs() / exact,
        })
    }

    /// Tensor product of atlases; coordinates are concatenated in order.
    pub fn product(parts: &[QuadratureAtlas]) -> Self {
        let mut points = vec![Vec::new()];
        let mut weights = vec![1.0];
        let mut raw = 0.0_f64;
        for part in parts {
            let mut np = Vec::with_capacity(points.len() * part.len());
            let mut nw = Vec::with_capacity(points.len() * part.len());
            for (p, w) in points.iter().zip(&weights) {
                for (q, v) in part.points.iter().zip(&part.weights) {
                    let mut c = p.clone();
                    c.extend_from_slice(q);
                    np.push(c);
                    nw.push(w * v);
                }
            }
            points = np;
            weights = nw;
            raw = raw.max(part.raw_volume_error);
        }
        if parts.len() == 1 {
            return parts[0].clone();
        }
        Self {
            dim: parts.iter().map(|p| p.dim).sum(),
            points,
            weights,
            chart: ChartKind::Product,
            raw_volume_error: raw,
        }
    }

    /// Atlas for a model with computable metrics on every factor.
    pub fn for_spec(spec: &ManifoldSpec, res: &Resolution) -> Result<Self> {
        let mut parts = Vec::new();
        let mut pending: Vec<[f64; 2]> = Vec::new();
        let mut axis = 0usize;
        let flush = |pending: &mut Vec<[f64; 2]>,
                     parts: &mut Vec<QuadratureAtlas>,
                     axis: &mut usize|
         -> Result<()> {
            if pending.is_empty() {
                return Ok(());
            }
            let axes: Vec<usize> = (0..2 * pending.len())
                .map(|i| res.torus_axes[(*axis + i) % res.torus_axes.len()])
                .collect();
            *axis += axes.len();
            parts.push(QuadratureAtlas::torus(pending, &axes)?);
            pending.clear();
            Ok(())
        };
        for f in spec.factors() {
            match f {
                Factor::Elliptic { periods } => pending.push(*periods),
                Factor::Projective { n } => {
                    flush(&mut pending, &mut parts, &mut axis)?;
                    parts.push(QuadratureAtlas::projective(*n, res.radial, res.angular)?);
                }
                other => {
                    return Err(KahlerError::invalid(format!(
                        "factor {other:?} has class data only and no atlas"
                    )))
                }
            }
        }
        flush(&mut pending, &mut parts, &mut axis)?;
        Ok(Self::product(&parts))
    }

    /// Weighted sum of a pointwise integrand.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// `n! 2^n`, turning `det g dLeb` into `ω^n`.
    pub fn top_form_factor(&self) -> f64 {
        factorial(self.dim) * 2f64.powi(self.dim as i32)
    }
}

fn tensor(coords: &[Vec<(f64, f64)>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points = vec![Vec::with_capacity(coords.len())];
    let mut weights = vec![1.0];
    for axis in coords {
        let mut np = Vec::with_capacity(points.len() * axis.len());
        let mut nw = Vec::with_capacity(points.len() * axis.len());
        for (p, w) in points.iter().zip(&weights) {
            for (x, h) in axis {
                let mut q = p.clone();
                q.push(*x);
                np.push(q);
                nw.push(w * h);
            }
        }
        points = np;
        weights = nw;
    }
    (points, weights)
}
