//! Curvature of Kähler metrics and holomorphic sectional curvature.
//!
//! Conventions:
//! `R_{ij̄kl̄} = −∂_k∂_l̄ g_{ij̄} + g^{q̄p} ∂_k g_{iq̄} ∂_l̄ g_{pj̄}`,
//! `Ric_{kl̄} = −∂_k∂_l̄ log det g`, `S = g^{l̄k} Ric_{kl̄}` and
//! `H(ξ) = R(ξ, ξ̄, ξ, ξ̄)/|ξ|⁴`. The flat torus has `H ≡ 0` and the
//! Fubini–Study metric of potential `log(1 + |z|²)` has `H ≡ 2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KahlerError, Result};
use crate::metric::{check_positive, radial_far_jets, CMat, Jets, MetricField, RadialProfile, C64};
use crate::quadrature::QuadratureAtlas;

/// Full curvature data at one point.
#[derive(Debug, Clone)]
pub struct CurvaturePoint {
    pub n: usize,
    pub g: CMat,
    /// `ginv[(q, p)] = g^{q̄p}`.
    pub ginv: CMat,
    r: Vec<C64>,
    pub ric: CMat,
    pub scalar: f64,
    /// Unitary frame and frame tensor, when a better-conditioned chart supplied them.
    frame: Option<(CMat, Vec<C64>)>,
}

fn idx4(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

impl CurvaturePoint {
    pub fn from_jets(j: &Jets, x: &[f64]) -> Result<Self> {
        let n = j.n;
        check_positive(&j.g, x)?;
        let p =
            j.g.clone()
                .try_inverse()
                .ok_or_else(|| KahlerError::DegenerateMetric {
                    point: x.to_vec(),
                    min_eigenvalue: 0.0,
                })?;
        let mut r = vec![C64::new(0.0, 0.0); n * n * n * n];
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = -j.ddg[k][l][(i, jj)];
                        for q in 0..n {
                            for pp in 0..n {
                                v += p[(q, pp)] * j.dg[k][(i, q)] * j.dg[l][(jj, pp)].conj();
                            }
                        }
                        r[idx4(n, i, jj, k, l)] = v;
                    }
                }
            }
        }
        // Ric_{kl̄} = −tr(P ∂_k∂_l̄ G) + tr(P ∂_k G P ∂_l̄ G), with ∂_l̄ G = (∂_l G)^*.
        let mut ric = CMat::zeros(n, n);
        for k in 0..n {
            let pk = &p * &j.dg[k];
            for l in 0..n {
                let pl = &p * j.dg[l].adjoint();
                ric[(k, l)] = -(&p * &j.ddg[k][l]).trace() + (&pk * &pl).trace();
            }
        }
        let scalar = (&p * &ric).trace().re;
        Ok(Self {
            n,
            g: j.g.clone(),
            ginv: p,
            r,
            ric,
            scalar,
            frame: None,
        })
    }

    pub fn at(metric: &MetricField, x: &[f64]) -> Result<Self> {
        match metric {
            MetricField::Radial { n, profile } => {
                let r: f64 = x.iter().map(|v| v * v).sum();
                if r > 1.0 && x.len() == 2 * n {
                    return Self::at_far(profile, x);
                }
            }
            MetricField::Scaled(c, inner) if *c > 0.0 => return Ok(Self::at(inner, x)?.scaled(*c)),
            MetricField::Product(parts) if x.len() == 2 * metric.dim() => {
                let mut off = 0;
                let mut blocks = Vec::with_capacity(parts.len());
                for p in parts {
                    let m = 2 * p.dim();
                    blocks.push(Self::at(p, &x[off..off + m])?);
                    off += m;
                }
                return Ok(Self::block_diag(&blocks));
            }
            _ => {}
        }
        Self::from_jets(&metric.jets(x)?, x)
    }

    /// Radial metrics evaluated in the affine chart centred on the largest
    /// coordinate, where the jets stay free of cancellation, then pulled back
    /// through the chart change.
    fn at_far(profile: &RadialProfile, x: &[f64]) -> Result<Self> {
        let n = x.len() / 2;
        let z: Vec<C64> = (0..n).map(|k| C64::new(x[2 * k], x[2 * k + 1])).collect();
        let m = (0..n)
            .max_by(|a, b| z[*a].norm_sqr().total_cmp(&z[*b].norm_sqr()))
            .unwrap_or(0);
        let w: Vec<C64> = (0..n)
            .map(|k| if k == m { z[m].inv() } else { z[k] / z[m] })
            .collect();
        let wx: Vec<f64> = w.iter().flat_map(|c| [c.re, c.im]).collect();
        let cw = Self::from_jets(&radial_far_jets(profile, &w, m), &wx)?;
        // jac[(a, i)] = ∂w_a/∂z_i and back[(i, a)] = ∂z_i/∂w_a
        let mut jac = CMat::zeros(n, n);
        let mut back = CMat::zeros(n, n);
        for k in 0..n {
            if k == m {
                jac[(m, m)] = -(z[m] * z[m]).inv();
                back[(m, m)] = -(w[m] * w[m]).inv();
            } else {
                jac[(k, k)] = z[m].inv();
                jac[(k, m)] = -z[k] / (z[m] * z[m]);
                back[(k, k)] = w[m].inv();
                back[(k, m)] = -w[k] / (w[m] * w[m]);
            }
        }
        let jbar = jac.conjugate();
        let pull = |t: &CMat| jac.transpose() * t * &jbar;
        let mut r = vec![C64::new(0.0, 0.0); n * n * n * n];
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..n {
                            for b in 0..n {
                                let ab = jac[(a, i)] * jbar[(b, jj)];
                                for c in 0..n {
                                    let abc = ab * jac[(c, k)];
                                    for d in 0..n {
                                        acc += abc * jbar[(d, l)] * cw.r(a, b, c, d);
                                    }
                                }
                            }
                        }
                        r[idx4(n, i, jj, k, l)] = acc;
                    }
                }
            }
        }
        let frame = Some((&back * cw.unitary_frame(), cw.frame_tensor()));
        Ok(Self {
            n,
            g: pull(&cw.g),
            ginv: back.conjugate() * &cw.ginv * back.transpose(),
            r,
            ric: pull(&cw.ric),
            scalar: cw.scalar,
            frame,
        })
    }

    fn scaled(mut self, c: f64) -> Self {
        self.g *= C64::new(c, 0.0);
        self.ginv /= C64::new(c, 0.0);
        for v in &mut self.r {
            *v *= c;
        }
        self.scalar /= c;
        if let Some((m, rf)) = &mut self.frame {
            *m /= C64::new(c.sqrt(), 0.0);
            rf.iter_mut().for_each(|v| *v /= c);
        }
        self
    }

    fn block_diag(blocks: &[Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut out = Self {
            n,
            g: CMat::zeros(n, n),
            ginv: CMat::zeros(n, n),
            r: vec![C64::new(0.0, 0.0); n * n * n * n],
            ric: CMat::zeros(n, n),
            scalar: 0.0,
            frame: None,
        };
        let cached = blocks.iter().any(|b| b.frame.is_some());
        let mut fm = CMat::zeros(n, n);
        let mut rf = vec![C64::new(0.0, 0.0); n * n * n * n];
        let mut off = 0;
        for b in blocks {
            let m = b.n;
            out.g.view_mut((off, off), (m, m)).copy_from(&b.g);
            out.ginv.view_mut((off, off), (m, m)).copy_from(&b.ginv);
            out.ric.view_mut((off, off), (m, m)).copy_from(&b.ric);
            out.scalar += b.scalar;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            out.r[idx4(n, off + i, off + j, off + k, off + l)] = b.r(i, j, k, l);
                        }
                    }
                }
            }
            if cached {
                fm.view_mut((off, off), (m, m))
                    .copy_from(&b.unitary_frame());
                let bf = b.frame_tensor();
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            for l in 0..m {
                                rf[idx4(n, off + i, off + j, off + k, off + l)] =
                                    bf[idx4(m, i, j, k, l)];
                            }
                        }
                    }
                }
            }
            off += m;
        }
        if cached {
            out.frame = Some((fm, rf));
        }
        out
    }

    /// `R_{ij̄kl̄}`.
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.r[idx4(self.n, i, j, k, l)]
    }

    /// `R(ξ, η̄, ζ, θ̄) = Σ R_{ij̄kl̄} ξ_i η̄_j ζ_k θ̄_l`.
    pub fn eval(&self, xi: &[C64], eta: &[C64], zeta: &[C64], theta: &[C64]) -> C64 {
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let a = xi[i] * eta[j].conj();
                for k in 0..n {
                    let b = a * zeta[k];
                    for l in 0..n {
                        acc += self.r(i, j, k, l) * b * theta[l].conj();
                    }
                }
            }
        }
        acc
    }

    pub fn quartic(&self, xi: &[C64]) -> f64 {
        self.eval(xi, xi, xi, xi).re
    }

    /// `|ξ|²_g`.
    pub fn norm2(&self, xi: &[C64]) -> f64 {
        norm2_with(&self.g, xi)
    }

    pub fn hsc(&self, xi: &[C64]) -> Result<f64> {
        let nn = self.norm2(xi);
        if !(nn > 0.0) {
            return Err(KahlerError::ZeroDirection);
        }
        Ok(self.quartic(xi) / (nn * nn))
    }

    /// `g^{j̄i} R_{ij̄kl̄}`.
    pub fn ricci_contraction(&self) -> CMat {
        let n = self.n;
        CMat::from_fn(n, n, |k, l| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    acc += self.ginv[(j, i)] * self.r(i, j, k, l);
                }
            }
            acc
        })
    }

    /// Matrix `M` with `M^T G M̄ = I`; its columns form a unitary frame.
    pub fn unitary_frame(&self) -> CMat {
        match &self.frame {
            Some((m, _)) => m.clone(),
            None => unitary_frame(&self.g),
        }
    }

    /// Curvature tensor in a `g`-unitary frame.
    pub fn frame_tensor(&self) -> Vec<C64> {
        match &self.frame {
            Some((_, rf)) => rf.clone(),
            None => transform_tensor(self.n, &self.r, &self.unitary_frame()),
        }
    }

    /// `|Rm|`: Frobenius norm of the tensor in a unitary frame.
    pub fn rm_norm(&self) -> f64 {
        self.frame_tensor()
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `|η|²_g = tr(g⁻¹η g⁻¹η)` for a Hermitian `(1,1)`-form, so `|ω|²_ω = n`.
    pub fn form_norm2(&self, eta: &CMat) -> f64 {
        let a = eta * &self.ginv;
        (&a * &a).trace().re
    }
}

pub(crate) fn norm2_with(g: &CMat, xi: &[C64]) -> f64 {
    let n = xi.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * xi[i] * xi[j].conj();
        }
    }
    acc.re
}

pub(crate) fn unitary_frame(g: &CMat) -> CMat {
    let chol = g
        .clone()
        .cholesky()
        .expect("positive metric has a Cholesky factor");
    let l = chol.l();
    l.transpose()
        .try_inverse()
        .expect("triangular factor is invertible")
}

pub(crate) fn transform_tensor(n: usize, r: &[C64], m: &CMat) -> Vec<C64> {
    // contract one slot at a time: holomorphic slots with M, antiholomorphic with M̄
    let mut cur = r.to_vec();
    for slot in 0..4 {
        let mut next = vec![C64::new(0.0, 0.0); cur.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut idx = [i, j, k, l];
                        let target = idx[slot];
                        let mut acc = C64::new(0.0, 0.0);
                        for s in 0..n {
                            idx[slot] = s;
                            let w = if slot % 2 == 0 {
                                m[(s, target)]
                            } else {
                                m[(s, target)].conj()
                            };
                            acc += cur[idx4(n, idx[0], idx[1], idx[2], idx[3])] * w;
                        }
                        next[idx4(n, i, j, k, l)] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Options for the direction search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Extra start direction in chart coordinates, e.g. the previous argmax.
    pub warm_start: Option<Vec<C64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            max_iter: 400,
            tol: 1e-13,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupHsc {
    pub value: f64,
    pub point_index: usize,
    pub point: Vec<f64>,
    /// Maximizing direction, unit length in the metric.
    pub direction: Vec<C64>,
    pub per_point: Vec<f64>,
    pub n_points: usize,
    pub restarts: usize,
}

fn quartic_frame(n: usize, r: &[C64], eta: &[C64]) -> (f64, Vec<C64>) {
    let mut q = C64::new(0.0, 0.0);
    let mut w = vec![C64::new(0.0, 0.0); n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let ac = eta[a] * eta[c];
                for d in 0..n {
                    let t = r[idx4(n, a, b, c, d)] * ac * eta[d].conj();
                    w[b] += t;
                    q += t * eta[b].conj();
                }
            }
        }
    }
    (q.re, w.into_iter().map(|v| 2.0 * v).collect())
}

fn normalize(v: &mut [C64]) -> f64 {
    let nn = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if nn > 0.0 {
        for c in v.iter_mut() {
            *c /= nn;
        }
    }
    nn
}

/// Projected gradient ascent with Armijo backtracking on the unit sphere.
fn ascend(n: usize, r: &[C64], start: &[C64], max_iter: usize, tol: f64) -> (f64, Vec<C64>) {
    let mut eta = start.to_vec();
    normalize(&mut eta);
    let (mut q, mut w) = quartic_frame(n, r, &eta);
    let scale = r.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let mut tau = 0.5 / scale;
    for _ in 0..max_iter {
        let radial: f64 = eta.iter().zip(&w).map(|(e, wi)| (e.conj() * wi).re).sum();
        let wt: Vec<C64> = w.iter().zip(&eta).map(|(wi, e)| wi - e * radial).collect();
        let gnorm2: f64 = wt.iter().map(|c| c.norm_sqr()).sum();
        if gnorm2.sqrt() <= tol * scale {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial: Vec<C64> = eta.iter().zip(&wt).map(|(e, g)| e + g * tau).collect();
            normalize(&mut trial);
            let (qt, wt_new) = quartic_frame(n, r, &trial);
            if qt >= q + 1e-4 * tau * gnorm2 {
                eta = trial;
                q = qt;
                w = wt_new;
                accepted = true;
                tau *= 2.0;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (q, eta)
}

fn deterministic_starts(n: usize) -> Vec<Vec<C64>> {
    let e = |a: usize| {
        (0..n)
            .map(|i| C64::new(if i == a { 1.0 } else { 0.0 }, 0.0))
            .collect::<Vec<_>>()
    };
    let mut starts: Vec<Vec<C64>> = (0..n).map(e).collect();
    for a in 0..n {
        for b in a + 1..n {
            let mut s1 = e(a);
            s1[b] = C64::new(1.0, 0.0);
            let mut s2 = e(a);
            s2[b] = C64::new(0.0, 1.0);
            starts.push(s1);
            starts.push(s2);
        }
    }
    starts
}

/// Random unit direction for a (point, restart) pair; independent of the
/// total number of restarts so estimates never decrease when it grows.
pub(crate) fn seeded_direction(n: usize, seed: u64, point: usize, restart: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 24) ^ restart as u64);
    let mut v: Vec<C64> = (0..n)
        .map(|_| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    normalize(&mut v);
    v
}

/// Maximum of `H` over directions at one point, with the unit maximizer.
pub fn max_hsc_at(
    curv: &CurvaturePoint,
    point_index: usize,
    cfg: &SearchConfig,
) -> (f64, Vec<C64>) {
    let n = curv.n;
    let m = curv.unitary_frame();
    let to_chart = |eta: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|i| (0..n).map(|a| m[(i, a)] * eta[a]).sum())
            .collect()
    };
    if n == 1 {
        let xi = to_chart(&[C64::new(1.0, 0.0)]);
        return (curv.quartic(&xi), xi);
    }
    let rf = curv.frame_tensor();
    let mut starts = deterministic_starts(n);
    for k in 0..cfg.restarts {
        starts.push(seeded_direction(n, cfg.seed, point_index, k));
    }
    if let Some(w) = &cfg.warm_start {
        if w.len() == n {
            // chart direction to frame coordinates: η = M^{-1} ξ
            if let Some(minv) = m.clone().try_inverse() {
                starts.push(
                    (0..n)
                        .map(|a| (0..n).map(|i| minv[(a, i)] * w[i]).sum())
                        .collect(),
                );
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, starts[0].clone());
    for s in &starts {
        let (q, eta) = ascend(n, &rf, s, cfg.max_iter, cfg.tol);
        if q > best.0 {
            best = (q, eta);
        }
    }
    (best.0, to_chart(&best.1))
}

/// Estimate of `sup_X H` over atlas points and directions.
pub fn sup_hsc(
    metric: &MetricField,
    atlas: &QuadratureAtlas,
    cfg: &SearchConfig,
) -> Result<SupHsc> {
    sup_hsc_points(metric, &atlas.points, cfg)
}

pub fn sup_hsc_points(
    metric: &MetricField,
    points: &[Vec<f64>],
    cfg: &SearchConfig,
) -> Result<SupHsc> {
    if points.is_empty() {
        return Err(KahlerError::invalid("no sample points"));
    }
    let results: Vec<Result<(f64, Vec<C64>)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let c = CurvaturePoint::at(metric, x)?;
            Ok(max_hsc_at(&c, i, cfg))
        })
        .collect();
    let mut per_point = Vec::with_capacity(points.len());
    let mut best: Option<(f64, usize, Vec<C64>)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let (v, d) = r?;
        per_point.push(v);
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, i, d));
        }
    }
    let (value, point_index, direction) = best.expect("nonempty");
    Ok(SupHsc {
        value,
        point_index,
        point: points[point_index].clone(),
        direction,
        per_point,
        n_points: points.len(),
        restarts: cfg.restarts,
    })
}

/// Curvature at every atlas point, in atlas order.
pub fn curvature_field(metric: &MetricField, points: &[Vec<f64>]) -> Result<Vec<CurvaturePoint>> {
    points
        .par_iter()
        .map(|x| CurvaturePoint::at(metric, x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FourierMode;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn perturbed_torus() -> MetricField {
        MetricField::TorusFourier {
            periods: vec![[1.0, 1.0], [1.0, 1.0]],
            diag: vec![1.0, 1.3],
            modes: vec![
                FourierMode {
                    amplitude: 0.01,
                    wave: vec![1, 0, 1, 0],
                    phase: 0.2,
                },
                FourierMode {
                    amplitude: 0.006,
                    wave: vec![0, 1, 0, 2],
                    phase: 1.1,
                },
            ],
        }
    }

    #[test]
    fn flat_torus_has_zero_curvature() {
        let cp = CurvaturePoint::at(&MetricField::flat(2), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(cp.r.iter().all(|v| v.norm() == 0.0));
        assert_eq!(cp.scalar, 0.0);
    }

    #[test]
    fn fubini_study_line_constants() {
        let cp = CurvaturePoint::at(&MetricField::fubini_study(1), &[0.0, 0.0]).unwrap();
        assert!((cp.r(0, 0, 0, 0).re - 2.0).abs() < 1e-14);
        assert!((cp.ric[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((cp.scalar - 2.0).abs() < 1e-14);
        let cp = CurvaturePoint::at(&MetricField::fubini_study(1), &[1.7, -0.4]).unwrap();
        assert!((cp.hsc(&[c(0.3, 2.0)]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fubini_study_plane_at_origin() {
        let cp = CurvaturePoint::at(&MetricField::fubini_study(2), &[0.0; 4]).unwrap();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let want = d(i, j) * d(k, l) + d(i, l) * d(k, j);
                        assert!((cp.r(i, j, k, l) - c(want, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
        assert!((cp.ric[(0, 0)].re - 3.0).abs() < 1e-14);
        assert!((cp.scalar - 6.0).abs() < 1e-13);
    }

    #[test]
    fn kahler_symmetries_and_contraction() {
        let metrics = vec![
            MetricField::Radial {
                n: 2,
                profile: RadialProfile {
                    s: 1.0,
                    coeffs: vec![0.2, -0.1],
                },
            },
            perturbed_torus(),
        ];
        for m in metrics {
            let cp = CurvaturePoint::at(&m, &[0.3, -0.2, 0.15, 0.4]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            let v = cp.r(i, j, k, l);
                            assert!((v - cp.r(k, j, i, l)).norm() < 1e-8);
                            assert!((v - cp.r(i, l, k, j)).norm() < 1e-8);
                            assert!((v - cp.r(j, i, l, k).conj()).norm() < 1e-8);
                        }
                    }
                }
            }
            let diff = (cp.ricci_contraction() - &cp.ric)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-8);
        }
    }

    #[test]
    fn hsc_rejects_zero_direction() {
        let cp = CurvaturePoint::at(&MetricField::fubini_study(2), &[0.0; 4]).unwrap();
        assert_eq!(
            cp.hsc(&[c(0.0, 0.0), c(0.0, 0.0)]),
            Err(KahlerError::ZeroDirection)
        );
    }

    #[test]
    fn sup_hsc_on_standard_models() {
        let cfg = SearchConfig::default();
        let atlas = QuadratureAtlas::projective(1, 8, 4).unwrap();
        let s = sup_hsc(&MetricField::fubini_study(1), &atlas, &cfg).unwrap();
        assert!((s.value - 2.0).abs() < 1e-6);
        let s = sup_hsc(&MetricField::fubini_study(1).scaled(2.0), &atlas, &cfg).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
        let atlas = QuadratureAtlas::projective(2, 4, 2).unwrap();
        let s = sup_hsc(&MetricField::fubini_study(2), &atlas, &cfg).unwrap();
        assert!((s.value - 2.0).abs() < 1e-9);
        let atlas = QuadratureAtlas::torus(&[[1.0, 1.0], [1.0, 1.0]], &[4, 1, 4, 1]).unwrap();
        let s = sup_hsc(&MetricField::flat(2), &atlas, &cfg).unwrap();
        assert!(s.value.abs() < 1e-10);
    }

    #[test]
    fn sup_hsc_dominates_sampled_directions() {
        let m = perturbed_torus();
        let atlas = QuadratureAtlas::torus(&[[1.0, 1.0], [1.0, 1.0]], &[3, 3, 3, 3]).unwrap();
        let s = sup_hsc(&m, &atlas, &SearchConfig::default()).unwrap();
        for (i, x) in atlas.points.iter().enumerate().step_by(7) {
            let cp = CurvaturePoint::at(&m, x).unwrap();
            for k in 0..50 {
                let xi = seeded_direction(2, 99, i, k);
                assert!(cp.hsc(&xi).unwrap() <= s.per_point[i] + 1e-12);
            }
        }
    }

    #[test]
    fn sup_hsc_scales_inversely() {
        let m = perturbed_torus();
        let atlas = QuadratureAtlas::torus(&[[1.0, 1.0], [1.0, 1.0]], &[3, 2, 3, 2]).unwrap();
        let cfg = SearchConfig::default();
        let a = sup_hsc(&m, &atlas, &cfg).unwrap();
        let b = sup_hsc(&m.clone().scaled(3.0), &atlas, &cfg).unwrap();
        assert!((b.value - a.value / 3.0).abs() < 1e-8);
    }

    #[test]
    fn far_chart_matches_direct_evaluation() {
        let profile = RadialProfile {
            s: 1.0,
            coeffs: vec![0.1, -0.05, 0.02],
        };
        let points: [&[f64]; 3] = [
            &[1.3, -0.4],
            &[0.9, -0.4, 1.1, 0.2],
            &[0.3, 0.5, -1.2, 0.1, 0.4, 0.6],
        ];
        for x in points {
            let n = x.len() / 2;
            let metric = MetricField::Radial {
                n,
                profile: profile.clone(),
            };
            let direct = CurvaturePoint::from_jets(&metric.jets(x).unwrap(), x).unwrap();
            let far = CurvaturePoint::at_far(&profile, x).unwrap();
            assert!((&direct.g - &far.g).norm() < 1e-12);
            assert!((&direct.ginv - &far.ginv).norm() < 1e-10);
            assert!((&direct.ric - &far.ric).norm() < 1e-10);
            assert!(direct
                .r
                .iter()
                .zip(&far.r)
                .all(|(a, b)| (a - b).norm() < 1e-10));
            assert!((direct.scalar - far.scalar).abs() < 1e-10);
            let m = far.unitary_frame();
            assert!((m.transpose() * &far.g * m.conjugate() - CMat::identity(n, n)).norm() < 1e-10);
            assert!((direct.rm_norm() - far.rm_norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn fubini_study_curve_is_exact_far_out() {
        let metric = MetricField::Radial {
            n: 1,
            profile: RadialProfile::fubini_study(1.0),
        };
        for x in [[456.4, 90.8], [3.0e4, -1.0e4]] {
            let c = CurvaturePoint::at(&metric, &x).unwrap();
            let g = c.g[(0, 0)].re;
            let h = c.r(0, 0, 0, 0).re / (g * g);
            assert!((h - 2.0).abs() < 1e-9, "{h}");
        }
    }

    #[test]
    fn fubini_study_plane_is_exact_far_out() {
        let c = CurvaturePoint::at(&MetricField::fubini_study(2), &[412.0, -150.0, 37.0, 290.0])
            .unwrap();
        let (h, _) = max_hsc_at(&c, 0, &SearchConfig::default());
        assert!((h - 2.0).abs() < 1e-8, "{h}");
        assert!((c.scalar - 6.0).abs() < 1e-8, "{}", c.scalar);
    }
}
