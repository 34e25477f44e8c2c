//! Pointwise curvature inequalities and identities, and bounds on `μ_α`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::classes::{Factor, KahlerClassVector, ManifoldSpec};
use crate::curvature::{norm2_with, sup_hsc, CurvaturePoint, SearchConfig};
use crate::error::{KahlerError, Result};
use crate::metric::{min_eigenvalue, CMat, FourierMode, MetricField, RadialProfile, C64};
use crate::quadrature::QuadratureAtlas;

/// Tolerance used when comparing a supplied bound with a measured supremum.
pub const SUP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoydenReport {
    pub a: f64,
    pub measured_sup: f64,
    pub worst_slack: f64,
    pub worst_point: Vec<f64>,
    pub n_points: usize,
}

/// Ensures a caller-supplied curvature bound dominates the measured supremum.
pub fn require_bound(a: f64, measured: f64, what: &str) -> Result<()> {
    if a + SUP_TOLERANCE * (1.0 + measured.abs()) < measured {
        return Err(KahlerError::Precondition(format!(
            "{what}: bound {a} is below the measured sup H = {measured}"
        )));
    }
    Ok(())
}

/// `A (tr_ĝ ω)² − ĝ^{j̄i} ĝ^{q̄p} R_{ij̄pq̄}` at one point.
pub fn royden_slack(curv: &CurvaturePoint, ghat: &CMat, a: f64) -> f64 {
    let n = curv.n;
    let p = ghat
        .clone()
        .try_inverse()
        .expect("reference metric is invertible");
    let tr = (&p * &curv.g).trace().re;
    let mut term = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for pp in 0..n {
                for q in 0..n {
                    term += p[(j, i)] * p[(q, pp)] * curv.r(i, j, pp, q);
                }
            }
        }
    }
    a * tr * tr - term.re
}

/// Worst quadratic-form slack `A (tr_ĝ ω)² − ĝĝR^ω` over sample points.
pub fn royden_bound_check(
    omega: &MetricField,
    ghat: &MetricField,
    a: f64,
    measured_sup: f64,
    points: &[Vec<f64>],
) -> Result<RoydenReport> {
    require_bound(a, measured_sup, "quadratic-form bound")?;
    let mut worst = (f64::INFINITY, Vec::new());
    for x in points {
        let c = CurvaturePoint::at(omega, x)?;
        let gh = ghat.metric(x)?;
        let s = royden_slack(&c, &gh, a);
        if s < worst.0 {
            worst = (s, x.clone());
        }
    }
    Ok(RoydenReport {
        a,
        measured_sup,
        worst_slack: worst.0,
        worst_point: worst.1,
        n_points: points.len(),
    })
}

/// `½A((Σ|ξ_α|²)² + Σ|ξ_α|⁴) − Σ R(ξ_α, ξ̄_α, ξ_β, ξ̄_β)` for a frame that is
/// orthonormal for `ĝ` and orthogonal for `ω`.
pub fn royden_refined_slack(
    curv: &CurvaturePoint,
    ghat: &CMat,
    frame: &[Vec<C64>],
    a: f64,
) -> Result<f64> {
    let n = curv.n;
    if frame.len() != n || frame.iter().any(|v| v.len() != n) {
        return Err(KahlerError::DimensionMismatch {
            expected: n,
            found: frame.len(),
        });
    }
    let scale = curv.g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (al, u) in frame.iter().enumerate() {
        for (be, v) in frame.iter().enumerate() {
            let h = hermitian_pair(ghat, u, v);
            let want = if al == be { 1.0 } else { 0.0 };
            if (h - C64::new(want, 0.0)).norm() > 1e-10 {
                return Err(KahlerError::Precondition(format!(
                    "frame is not orthonormal for the reference metric ({al},{be})"
                )));
            }
            if al != be && hermitian_pair(&curv.g, u, v).norm() > 1e-10 * (1.0 + scale) {
                return Err(KahlerError::Precondition(format!(
                    "frame is not orthogonal for ω ({al},{be})"
                )));
            }
        }
    }
    let norms: Vec<f64> = frame.iter().map(|v| norm2_with(&curv.g, v)).collect();
    let s1: f64 = norms.iter().sum();
    let s2: f64 = norms.iter().map(|x| x * x).sum();
    let mut r = 0.0;
    for u in frame {
        for v in frame {
            r += curv.eval(u, u, v, v).re;
        }
    }
    Ok(0.5 * a * (s1 * s1 + s2) - r)
}

fn hermitian_pair(g: &CMat, u: &[C64], v: &[C64]) -> C64 {
    let n = u.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * u[i] * v[j].conj();
        }
    }
    acc
}

fn random_unitary(k: usize, rng: &mut ChaCha8Rng) -> CMat {
    let z = DMatrix::from_fn(k, k, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    z.qr().q()
}

/// Random Hermitian positive matrix `B B* + δ I`.
pub fn random_positive(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let b = DMatrix::from_fn(n, n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    &b * b.adjoint() + CMat::identity(n, n) * C64::new(0.1, 0.0)
}

/// Random frame orthonormal for `ĝ` and orthogonal for `ω`: the relative
/// eigenframe with random phases, random order, and random unitary mixing
/// inside each degenerate eigenspace.
pub fn random_adapted_frame(g: &CMat, ghat: &CMat, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    let n = g.nrows();
    let m = crate::curvature::unitary_frame(ghat);
    let w = m.transpose() * g * m.map(|c| c.conj());
    let eig = w.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        eig.eigenvalues[*a]
            .partial_cmp(&eig.eigenvalues[*b])
            .unwrap()
    });
    let mut u = CMat::zeros(n, n);
    for (col, src) in order.iter().enumerate() {
        u.set_column(col, &eig.eigenvectors.column(*src));
    }
    let lam: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let scale = lam.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (lam[end] - lam[start]).abs() <= 1e-9 * scale {
            end += 1;
        }
        let k = end - start;
        if k > 1 {
            let q = random_unitary(k, rng);
            let block = u.columns(start, k) * q;
            u.columns_mut(start, k).copy_from(&block);
        }
        start = end;
    }
    let mut cols: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        cols.swap(i, j);
    }
    cols.iter()
        .map(|c| {
            let phase = C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
            (0..n)
                .map(|i| (0..n).map(|a| m[(i, a)] * u[(a, *c)].conj()).sum::<C64>() * phase)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BergerReport {
    pub raw_integral: f64,
    pub mass: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
    pub directions: usize,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Nodes and weights (summing to one) for the uniform measure on
/// `CP^{n-1}`, as points `η` of the unit sphere modulo phase.
pub fn projective_directions(n: usize, radial: usize, angular: usize) -> Vec<(Vec<C64>, f64)> {
    // |η_a|² uniform on the simplex through the collapsed coordinates
    // t_1 = u_1, t_2 = (1 − u_1) u_2, …, with midpoint nodes in each u.
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for level in 0..n.saturating_sub(1) {
        let power = (n - 2 - level) as i32;
        let mut next = Vec::new();
        for (ts, w) in &simplex {
            let rest = 1.0 - ts.iter().sum::<f64>();
            for i in 0..radial {
                let u = (i as f64 + 0.5) / radial as f64;
                let mut t = ts.clone();
                t.push(rest * u);
                next.push((t, w * (1.0 - u).powi(power)));
            }
        }
        simplex = next;
    }
    let total: f64 = simplex.iter().map(|(_, w)| w).sum();
    let mut out = Vec::new();
    let phases = n.saturating_sub(1);
    let n_phase = angular.pow(phases as u32);
    for (ts, w) in &simplex {
        let mut t = ts.clone();
        t.push((1.0 - ts.iter().sum::<f64>()).max(0.0));
        for code in 0..n_phase {
            let mut c = code;
            let mut eta = vec![C64::new(t[0].sqrt(), 0.0)];
            for a in 1..n {
                let j = c % angular;
                c /= angular;
                let psi = 2.0 * PI * (j as f64 + 0.5) / angular as f64;
                eta.push(C64::from_polar(t[a].sqrt(), psi));
            }
            out.push((eta, w / total / n_phase as f64));
        }
    }
    out
}

/// Average of `H` over directions against `(2/(n(n+1))) S`.
pub fn berger_identity_check(
    curv: &CurvaturePoint,
    radial: usize,
    angular: usize,
) -> Result<BergerReport> {
    let n = curv.n;
    if n < 2 {
        return Err(KahlerError::invalid(
            "the direction average identity needs n ≥ 2",
        ));
    }
    let m = curv.unitary_frame();
    let dirs = projective_directions(n, radial, angular);
    let mut mean = 0.0;
    for (eta, w) in &dirs {
        let xi: Vec<C64> = (0..n)
            .map(|i| (0..n).map(|a| m[(i, a)] * eta[a]).sum())
            .collect();
        mean += w * curv.hsc(&xi)?;
    }
    let mass = PI.powi(n as i32 - 1) / factorial(n - 1);
    let rhs = 2.0 * curv.scalar / (n * (n + 1)) as f64;
    Ok(BergerReport {
        raw_integral: mean * mass,
        mass,
        lhs: mean,
        rhs,
        relative_error: (mean - rhs).abs() / (1.0 + rhs.abs()),
        directions: dirs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductReport {
    pub a1: f64,
    pub a2: f64,
    pub sup_x: f64,
    pub sup_y: f64,
    pub sup_product: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Product metric `ω ⊕ η` has `sup H ≤ A1 + A2` when each factor is bounded.
pub fn product_hsc_check(
    x: (&MetricField, &QuadratureAtlas),
    y: (&MetricField, &QuadratureAtlas),
    a1: f64,
    a2: f64,
    cfg: &SearchConfig,
    tol: f64,
) -> Result<ProductReport> {
    let sx = sup_hsc(x.0, x.1, cfg)?.value;
    let sy = sup_hsc(y.0, y.1, cfg)?.value;
    require_bound(a1, sx, "first factor")?;
    require_bound(a2, sy, "second factor")?;
    let prod = MetricField::Product(vec![x.0.clone(), y.0.clone()]);
    let atlas = QuadratureAtlas::product(&[x.1.clone(), y.1.clone()]);
    let sp = sup_hsc(&prod, &atlas, cfg)?.value;
    let slack = a1 + a2 - sp;
    Ok(ProductReport {
        a1,
        a2,
        sup_x: sx,
        sup_y: sy,
        sup_product: sp,
        slack,
        pass: slack >= -tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalCurveReport {
    pub area: f64,
    pub bound: f64,
    pub sup_h: f64,
    pub pass: bool,
}

/// Area of the first coordinate line of the first projective factor.
pub fn coordinate_line_area(
    spec: &ManifoldSpec,
    metric: &MetricField,
    radial: usize,
) -> Result<f64> {
    let mut offset = 0;
    let mut found = None;
    for f in spec.factors() {
        if let Factor::Projective { .. } = f {
            found = Some(offset);
            break;
        }
        offset += f.dimension();
    }
    let k = found.ok_or_else(|| KahlerError::invalid("model contains no rational curve"))?;
    if !spec.has_metric() {
        return Err(KahlerError::invalid(
            "model has class-data factors without a metric",
        ));
    }
    let line = QuadratureAtlas::projective(1, radial, 8)?;
    let base = vec![0.0; 2 * spec.dimension()];
    let mut area = 0.0;
    for (p, w) in line.points.iter().zip(&line.weights) {
        let mut x = base.clone();
        x[2 * k] = p[0];
        x[2 * k + 1] = p[1];
        let g = metric.metric(&x)?;
        area += w * 2.0 * g[(k, k)].re;
    }
    Ok(area)
}

/// `sup H ≥ π/(32 ∫_C ω)` on an embedded rational curve.
pub fn rational_curve_bound_check(area: f64, sup: f64) -> RationalCurveReport {
    let bound = PI / (32.0 * area);
    RationalCurveReport {
        area,
        bound,
        sup_h: sup,
        pass: sup >= bound,
    }
}

/// `C_n · 2π (c_1 · α^{n−1}) / α^n`, `C_n = 2(n−1)!/((n+1)π^{n−1})`.
pub fn mu_lower_bound(spec: &ManifoldSpec, alpha: &KahlerClassVector) -> Result<f64> {
    spec.require_kahler(alpha)?;
    let n = spec.dimension();
    let c1 = spec.c1();
    let mut slots = vec![&c1];
    slots.extend(std::iter::repeat_n(alpha, n - 1));
    let num = spec.pairing(&slots)?;
    let den = spec.volume(alpha)?;
    let cn = 2.0 * factorial(n - 1) / ((n + 1) as f64 * PI.powi(n as i32 - 1));
    Ok(cn * 2.0 * PI * num / den)
}

/// Parametric metric family in a fixed class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Family {
    /// `s log(1+r) + Σ c_m u^m` on `CP^n` with `m = 1..=degree`.
    Radial { n: usize, s: f64, degree: usize },
    /// Flat torus plus amplitudes of the listed modes.
    Fourier {
        periods: Vec<[f64; 2]>,
        diag: Vec<f64>,
        modes: Vec<FourierMode>,
    },
}

impl Family {
    /// Family whose members lie in class `α` of a single-factor model.
    pub fn for_class(
        spec: &ManifoldSpec,
        alpha: &KahlerClassVector,
        degree: usize,
        waves: &[Vec<i32>],
    ) -> Result<Self> {
        spec.require_kahler(alpha)?;
        if let [Factor::Projective { n }] = spec.factors() {
            return Ok(Family::Radial {
                n: *n,
                s: alpha.coeffs[0] / (2.0 * PI),
                degree,
            });
        }
        if spec.is_torus() {
            let periods: Vec<[f64; 2]> = spec
                .factors()
                .iter()
                .map(|f| match f {
                    Factor::Elliptic { periods } => *periods,
                    _ => unreachable!(),
                })
                .collect();
            let diag = periods
                .iter()
                .zip(&alpha.coeffs)
                .map(|(p, a)| a / (2.0 * p[0] * p[1]))
                .collect();
            let modes = waves
                .iter()
                .map(|w| FourierMode {
                    amplitude: 0.0,
                    wave: w.clone(),
                    phase: 0.0,
                })
                .collect();
            return Ok(Family::Fourier {
                periods,
                diag,
                modes,
            });
        }
        Err(KahlerError::invalid(
            "metric families exist for a single projective space or a torus",
        ))
    }

    pub fn params(&self) -> usize {
        match self {
            Family::Radial { degree, .. } => *degree,
            Family::Fourier { modes, .. } => modes.len(),
        }
    }

    pub fn member(&self, p: &[f64]) -> MetricField {
        match self {
            Family::Radial { n, s, .. } => MetricField::Radial {
                n: *n,
                profile: RadialProfile {
                    s: *s,
                    coeffs: p.to_vec(),
                },
            },
            Family::Fourier {
                periods,
                diag,
                modes,
            } => MetricField::TorusFourier {
                periods: periods.clone(),
                diag: diag.clone(),
                modes: modes
                    .iter()
                    .zip(p)
                    .map(|(m, a)| FourierMode {
                        amplitude: *a,
                        ..m.clone()
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuUpperReport {
    pub value: f64,
    pub witness: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub base_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSearchConfig {
    pub budget: usize,
    pub restarts: usize,
    pub initial_step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for MuSearchConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            restarts: 2,
            initial_step: 0.05,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// `sup H` of a family member, or `+∞` if the member is not positive.
pub fn family_objective(
    family: &Family,
    p: &[f64],
    atlas: &QuadratureAtlas,
    cfg: &SearchConfig,
) -> f64 {
    let m = family.member(p);
    let base = family.member(&vec![0.0; p.len()]);
    // positivity relative to the base member, so chart scaling near infinity does not matter
    for x in &atlas.points {
        let (Ok(g), Ok(g0)) = (m.jets(x).map(|j| j.g), base.metric(x)) else {
            return f64::INFINITY;
        };
        if !(relative_min_eigenvalue(&g, &g0) > 1e-8) {
            return f64::INFINITY;
        }
    }
    sup_hsc(&m, atlas, cfg)
        .map(|s| s.value)
        .unwrap_or(f64::INFINITY)
}

/// Smallest eigenvalue of `g` relative to the positive matrix `g0`.
fn relative_min_eigenvalue(g: &CMat, g0: &CMat) -> f64 {
    let Some(ch) = g0.clone().cholesky() else {
        return f64::NAN;
    };
    let l_inv = ch.l().try_inverse().expect("cholesky factor is invertible");
    let m = &l_inv * g * l_inv.adjoint();
    min_eigenvalue(&((&m + m.adjoint()) * C64::new(0.5, 0.0)))
}

/// Nelder–Mead minimization from `x0`; returns `(best, f(best), evaluations, converged)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    budget: usize,
    tol: f64,
) -> (Vec<f64>, f64, usize, bool) {
    let d = x0.len();
    let mut evals = 0usize;
    let mut call = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    if d == 0 {
        let v = call(x0, &mut evals);
        return (Vec::new(), v, evals, true);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), call(x0, &mut evals)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = call(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[d].1 - simplex[0].1;
        let size = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| dist(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= tol) && size <= tol.sqrt() {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = call(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = call(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = if fr < simplex[d].1 {
                along(0.5)
            } else {
                along(-0.5)
            };
            let fc = call(&xc, &mut evals);
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&item.0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    let v = call(&x, &mut evals);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals, converged)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Upper bound for `μ_α` by minimizing `sup H` over a metric family.
pub fn mu_upper_search(
    family: &Family,
    atlas: &QuadratureAtlas,
    search: &SearchConfig,
    cfg: &MuSearchConfig,
) -> MuUpperReport {
    let d = family.params();
    let base = vec![0.0; d];
    let base_value = family_objective(family, &base, atlas, search);
    let mut best = (base.clone(), base_value);
    let mut evaluations = 1;
    let mut converged = true;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for r in 0..=cfg.restarts {
        let x0: Vec<f64> = if r == 0 {
            base.clone()
        } else {
            (0..d)
                .map(|_| rng.gen_range(-cfg.initial_step..cfg.initial_step))
                .collect()
        };
        let remaining = cfg.budget.saturating_sub(evaluations);
        if remaining == 0 {
            converged = false;
            break;
        }
        let (x, v, e, c) = nelder_mead(
            |p| family_objective(family, p, atlas, search),
            &x0,
            cfg.initial_step,
            remaining,
            cfg.tol,
        );
        evaluations += e;
        converged &= c;
        if v < best.1 {
            best = (x, v);
        }
    }
    MuUpperReport {
        value: best.1,
        witness: best.0,
        evaluations,
        converged,
        base_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn royden_examples() {
        let flat = MetricField::flat(2);
        let pts = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let r = royden_bound_check(&flat, &flat, 1.0, 0.0, &pts).unwrap();
        assert!((r.worst_slack - 4.0).abs() < 1e-14);

        let fs = MetricField::fubini_study(1);
        let r = royden_bound_check(&fs, &fs, 2.0, 2.0, &[vec![0.4, -0.2]]).unwrap();
        assert!(r.worst_slack.abs() < 1e-12);
        assert!(matches!(
            royden_bound_check(&fs, &fs, 1.5, 2.0, &[vec![0.0, 0.0]]),
            Err(KahlerError::Precondition(_))
        ));
    }

    #[test]
    fn refined_slack_on_fubini_study_plane() {
        let cp = CurvaturePoint::at(&MetricField::fubini_study(2), &[0.0; 4]).unwrap();
        let e = vec![
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        ];
        let s = royden_refined_slack(&cp, &cp.g, &e, 2.0).unwrap();
        assert!(s.abs() < 1e-13);
        let skew = vec![
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        ];
        assert!(matches!(
            royden_refined_slack(&cp, &cp.g, &skew, 2.0),
            Err(KahlerError::Precondition(_))
        ));
    }

    #[test]
    fn adapted_frames_satisfy_preconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..4 {
            for _ in 0..20 {
                let g = random_positive(n, &mut rng);
                let gh = if n == 2 {
                    CMat::identity(n, n) * C64::new(2.0, 0.0)
                } else {
                    random_positive(n, &mut rng)
                };
                let frame = random_adapted_frame(&g, &gh, &mut rng);
                for (a, u) in frame.iter().enumerate() {
                    for (b, v) in frame.iter().enumerate() {
                        let want = if a == b { 1.0 } else { 0.0 };
                        assert!((hermitian_pair(&gh, u, v) - C64::new(want, 0.0)).norm() < 1e-10);
                        if a != b {
                            assert!(hermitian_pair(&g, u, v).norm() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn direction_weights_sum_to_one() {
        for n in 2..4 {
            let d = projective_directions(n, 6, 3);
            let total: f64 = d.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d
                .iter()
                .all(|(e, _)| (e.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn berger_on_fubini_study() {
        for n in 2..4 {
            let cp = CurvaturePoint::at(&MetricField::fubini_study(n), &vec![0.1; 2 * n]).unwrap();
            let r = berger_identity_check(&cp, 8, 4).unwrap();
            assert!((r.lhs - 2.0).abs() < 1e-10);
            assert!((r.rhs - 2.0).abs() < 1e-10);
            assert!((r.raw_integral - 2.0 * r.mass).abs() < 1e-10);
        }
        let cp = CurvaturePoint::at(&MetricField::fubini_study(1), &[0.0, 0.0]).unwrap();
        assert!(berger_identity_check(&cp, 4, 4).is_err());
    }

    #[test]
    fn mu_lower_bounds() {
        let p1 = ManifoldSpec::projective(1);
        assert_eq!(
            mu_lower_bound(&p1, &KahlerClassVector::new(vec![2.0 * PI])).unwrap(),
            2.0
        );
        let t = ManifoldSpec::torus_square(2, 1.0);
        assert_eq!(mu_lower_bound(&t, &t.unit_class()).unwrap(), 0.0);
        for n in 1..4 {
            let p = ManifoldSpec::projective(n);
            let a = p.c1().scale(2.0 * PI);
            let cn = 2.0 * factorial(n - 1) / ((n + 1) as f64 * PI.powi(n as i32 - 1));
            assert!((mu_lower_bound(&p, &a).unwrap() - cn).abs() < 1e-12);
        }
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let (x, v, _, c) = nelder_mead(
            |p| (p[0] - 1.0).powi(2) + 3.0 * (p[1] + 0.5).powi(2),
            &[0.0, 0.0],
            0.3,
            2000,
            1e-14,
        );
        assert!(c);
        assert!(v < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn rational_curve_on_projective_line() {
        let spec = ManifoldSpec::projective(2);
        let area = coordinate_line_area(&spec, &MetricField::fubini_study(2), 24).unwrap();
        assert!((area - 2.0 * PI).abs() < 1e-6);
        let r = rational_curve_bound_check(area, 2.0);
        assert!((r.bound - 1.0 / 64.0).abs() < 1e-8);
        assert!(r.pass);
        assert!(coordinate_line_area(
            &ManifoldSpec::torus_square(1, 1.0),
            &MetricField::flat(1),
            8
        )
        .is_err());
    }
}
