//! Chern–Weil forms, Chern numbers, and Miyaoka–Yau type defects.
//!
//! A real `(1,1)`-form is stored as the matrix `A` of `i A_{kl̄} dz^k∧dz̄^l`.
//! The wedge of `n` such forms is `D(A_1, …, A_n) · Π i dz^k∧dz̄^k`, where
//! `D` is the mixed discriminant `Σ_S (−1)^{n−|S|} det(Σ_{k∈S} A_k)`, and
//! `Π i dz^k∧dz̄^k = 2^n dLeb`.
//!
//! `c_1 = Ric/2π` and `c_2 = (tr Θ ∧ tr Θ − tr(Θ∧Θ))/8π²` with the curvature
//! endomorphism `Θ^p_q = g^{j̄p} R_{qj̄kl̄}`.

use std::f64::consts::PI;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassPoly, Factor, KahlerClassVector, ManifoldSpec};
use crate::curvature::CurvaturePoint;
use crate::error::{KahlerError, Result};
use crate::exact::{binomial, Exact, Rational};
use crate::metric::{CMat, MetricField, C64};
use crate::quadrature::QuadratureAtlas;

/// Mixed discriminant of `n` complex `n × n` matrices.
pub fn mixed_discriminant(mats: &[&CMat]) -> C64 {
    let n = mats.len();
    let mut acc = C64::new(0.0, 0.0);
    for mask in 1u32..(1 << n) {
        let mut s = CMat::zeros(n, n);
        for (k, m) in mats.iter().enumerate() {
            if mask & (1 << k) != 0 {
                s += *m;
            }
        }
        let sign = if (n as u32 - mask.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += s.determinant() * sign;
    }
    acc
}

/// Chern form data at one point.
#[derive(Debug, Clone)]
pub struct ChernPoint {
    pub g: CMat,
    /// `c_1` as the matrix of `i A dz∧dz̄`.
    pub c1: CMat,
    /// `Θ^p_q` coefficient matrices, indexed `[p][q]`.
    pub theta: Vec<Vec<CMat>>,
}

impl ChernPoint {
    pub fn from_curvature(cp: &CurvaturePoint) -> Self {
        let n = cp.n;
        let theta = (0..n)
            .map(|p| {
                (0..n)
                    .map(|q| {
                        CMat::from_fn(n, n, |k, l| {
                            (0..n).map(|j| cp.ginv[(j, p)] * cp.r(q, j, k, l)).sum()
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            g: cp.g.clone(),
            c1: &cp.ric / C64::new(2.0 * PI, 0.0),
            theta,
        }
    }

    fn with_omega<'a>(&'a self, forms: &[&'a CMat]) -> Vec<&'a CMat> {
        let n = self.g.nrows();
        let mut v: Vec<&CMat> = forms.to_vec();
        while v.len() < n {
            v.push(&self.g);
        }
        v
    }

    /// Density of `c_2 ∧ ω^{n−2}` against `Π i dz∧dz̄`.
    pub fn c2_omega(&self) -> f64 {
        let n = self.g.nrows();
        if n < 2 {
            return 0.0;
        }
        let tr: CMat = (0..n).fold(CMat::zeros(n, n), |acc, p| acc + &self.theta[p][p]);
        let mut v = mixed_discriminant(&self.with_omega(&[&tr, &tr]));
        for p in 0..n {
            for q in 0..n {
                v -= mixed_discriminant(&self.with_omega(&[&self.theta[p][q], &self.theta[q][p]]));
            }
        }
        v.re / (8.0 * PI * PI)
    }

    /// Density of `c_1^k ∧ ω^{n−k}` against `Π i dz∧dz̄`.
    pub fn c1_power_omega(&self, k: usize) -> f64 {
        let n = self.g.nrows();
        if k > n {
            return 0.0;
        }
        let forms = vec![&self.c1; k];
        mixed_discriminant(&self.with_omega(&forms)).re
    }
}

/// Integrated Chern–Weil and curvature quantities of a metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernNumbers {
    pub n: usize,
    pub volume: f64,
    /// `∫ c_1 ∧ ω^{n−1}`.
    pub c1_omega: f64,
    /// `∫ c_1^n`.
    pub c1_top: f64,
    /// `∫ c_1² ∧ ω^{n−2}`.
    pub c1sq_omega: f64,
    /// `∫ c_2 ∧ ω^{n−2}`.
    pub c2_omega: f64,
    /// `∫ S ω^n`.
    pub scalar_integral: f64,
    /// `∫ |Ric + ω|² ω^n`.
    pub ric_plus_omega_sq: f64,
    pub points: usize,
}

/// Chern–Weil integrals over an atlas.
pub fn chern_numbers(metric: &MetricField, atlas: &QuadratureAtlas) -> Result<ChernNumbers> {
    let n = metric.dim();
    let vol0 = 2f64.powi(n as i32);
    let rows: Vec<Result<[f64; 7]>> = atlas
        .points
        .par_iter()
        .zip(atlas.weights.par_iter())
        .map(|(x, w)| {
            let cp = CurvaturePoint::at(metric, x)?;
            let ch = ChernPoint::from_curvature(&cp);
            let top = mixed_discriminant(&ch.with_omega(&[])).re;
            let rpo = &cp.ric + &cp.g;
            let wt = w * vol0;
            Ok([
                wt * top,
                wt * ch.c1_power_omega(1),
                wt * ch.c1_power_omega(n),
                if n >= 2 {
                    wt * ch.c1_power_omega(2)
                } else {
                    0.0
                },
                wt * ch.c2_omega(),
                wt * cp.scalar * top,
                wt * cp.form_norm2(&rpo) * top,
            ])
        })
        .collect();
    let mut acc = [0.0; 7];
    for r in rows {
        let r = r?;
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    Ok(ChernNumbers {
        n,
        volume: acc[0],
        c1_omega: acc[1],
        c1_top: acc[2],
        c1sq_omega: acc[3],
        c2_omega: acc[4],
        scalar_integral: acc[5],
        ric_plus_omega_sq: acc[6],
        points: atlas.len(),
    })
}

/// Cohomology class of a built-in metric whose blocks follow the factors of `spec`.
pub fn class_of(metric: &MetricField, spec: &ManifoldSpec) -> Result<KahlerClassVector> {
    let mut blocks = Vec::new();
    flatten(metric, 1.0, &mut blocks)?;
    let mut coeffs = Vec::new();
    let mut bi = 0;
    let mut taken = 0; // complex dimensions already used in the current block
    for f in spec.factors() {
        let block = blocks
            .get(bi)
            .ok_or_else(|| KahlerError::invalid("metric has fewer blocks than the model"))?;
        match (f, block) {
            (Factor::Projective { n }, Block::Projective { n: m, s }) if n == m && taken == 0 => {
                coeffs.push(2.0 * PI * s);
                bi += 1;
            }
            (Factor::Elliptic { periods }, Block::Flat { diag }) => {
                coeffs.push(2.0 * diag[taken] * periods[0] * periods[1]);
                taken += 1;
                if taken == diag.len() {
                    bi += 1;
                    taken = 0;
                }
            }
            _ => {
                return Err(KahlerError::invalid(format!(
                    "metric blocks do not match factor {f:?}"
                )))
            }
        }
    }
    if bi != blocks.len() {
        return Err(KahlerError::invalid(
            "metric has more blocks than the model",
        ));
    }
    Ok(KahlerClassVector::new(coeffs))
}

enum Block {
    Projective { n: usize, s: f64 },
    Flat { diag: Vec<f64> },
}

fn flatten(metric: &MetricField, c: f64, out: &mut Vec<Block>) -> Result<()> {
    match metric {
        MetricField::Flat { diag } | MetricField::TorusFourier { diag, .. } => {
            out.push(Block::Flat {
                diag: diag.iter().map(|h| c * h).collect(),
            })
        }
        MetricField::Radial { n, profile } => out.push(Block::Projective {
            n: *n,
            s: c * profile.s,
        }),
        MetricField::Product(parts) => {
            for p in parts {
                flatten(p, c, out)?;
            }
        }
        MetricField::Scaled(k, inner) => flatten(inner, c * k, out)?,
        MetricField::FiniteDifference { inner, .. } => flatten(inner, c, out)?,
        MetricField::Grid(grid) => out.push(Block::Flat {
            diag: grid.background.iter().map(|h| c * h).collect(),
        }),
    }
    Ok(())
}

/// `(2(n+1)/n) c_2 − c_1²` as an exact ring element.
pub fn defect_class(spec: &ManifoldSpec) -> ClassPoly<Exact> {
    let n = spec.dimension() as i128;
    let (c1, c2) = spec.chern_classes::<Exact>();
    c2.scale(&Exact::rational(Rational::new(2 * (n + 1), n)))
        .add(&c1.mul(&c1).scale(&-Exact::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub n: usize,
    pub value: f64,
    pub exact: String,
    pub hypotheses_hold: bool,
    /// Present only when the hypotheses hold.
    pub pass: Option<bool>,
}

fn rational_report(n: usize, v: &Exact, hyp: bool) -> DefectReport {
    let value = v.to_f64();
    DefectReport {
        n,
        value,
        exact: v.to_string(),
        hypotheses_hold: hyp,
        pass: hyp.then_some(value >= -1e-12),
    }
}

/// `((2(n+1)/n) c_2 − c_1²) · (−c_1)^{n−2}`.
pub fn my_defect_my1(spec: &ManifoldSpec) -> Result<DefectReport> {
    let n = spec.dimension();
    if n < 2 {
        return Err(KahlerError::invalid("the defect needs n ≥ 2"));
    }
    let (c1, _) = spec.chern_classes::<Exact>();
    let k = c1.scale(&-Exact::one());
    let v = defect_class(spec).mul(&k.pow(n as u32 - 2)).integrate();
    Ok(rational_report(n, &v, spec.is_nef(&spec.c1_canonical())))
}

/// `((2(n+1)/n) c_2 − c_1²) · (−c_1)^ν · α^{n−ν−2}`.
pub fn my_defect_weighted(
    spec: &ManifoldSpec,
    nu: usize,
    alpha: &KahlerClassVector,
) -> Result<DefectReport> {
    let n = spec.dimension();
    if n < 3 || nu + 2 > n {
        return Err(KahlerError::Rejected(format!(
            "weighted defect needs n ≥ 3 and ν ≤ n − 2 (n = {n}, ν = {nu})"
        )));
    }
    if !spec.is_nef(alpha) {
        return Err(KahlerError::invalid("α must be nef"));
    }
    let (c1, _) = spec.chern_classes::<Exact>();
    let k = c1.scale(&-Exact::one());
    let a = spec.poly_exact(alpha)?;
    let v = defect_class(spec)
        .mul(&k.pow(nu as u32))
        .mul(&a.pow((n - nu - 2) as u32))
        .integrate();
    Ok(rational_report(n, &v, spec.is_nef(&spec.c1_canonical())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CwAuditReport {
    pub n: usize,
    pub lhs_class: f64,
    pub lhs_quadrature: f64,
    pub ric_plus_omega_sq: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub norm_convention: String,
    pub points: usize,
}

/// Compares `((2(n+1)/n)c_2 − c_1²)·[ω]^{n−2}` with
/// `−(n+2)/(4π²n²(n−1)) ∫|Ric+ω|² ω^n`.
pub fn cw_inequality_audit(
    spec: &ManifoldSpec,
    metric: &MetricField,
    atlas: &QuadratureAtlas,
    tol: f64,
) -> Result<CwAuditReport> {
    let n = spec.dimension();
    if n < 2 {
        return Err(KahlerError::invalid("the audit needs n ≥ 2"));
    }
    let omega = class_of(metric, spec)?;
    let w = spec.poly_f64(&omega);
    let (c1, c2) = spec.chern_classes::<f64>();
    let nf = n as f64;
    let d = c2
        .scale(&(2.0 * (nf + 1.0) / nf))
        .add(&c1.mul(&c1).scale(&-1.0));
    let lhs_class = d.mul(&w.pow(n as u32 - 2)).integrate();
    let ch = chern_numbers(metric, atlas)?;
    let lhs_quadrature = 2.0 * (nf + 1.0) / nf * ch.c2_omega - ch.c1sq_omega;
    let rhs = -(nf + 2.0) / (4.0 * PI * PI * nf * nf * (nf - 1.0)) * ch.ric_plus_omega_sq;
    let slack = lhs_class - rhs;
    Ok(CwAuditReport {
        n,
        lhs_class,
        lhs_quadrature,
        ric_plus_omega_sq: ch.ric_plus_omega_sq,
        rhs,
        slack,
        pass: slack >= -tol,
        norm_convention: "|eta|^2 = tr(g^-1 eta g^-1 eta), so |omega|^2 = n".to_string(),
        points: ch.points,
    })
}

/// Which class family an expansion follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionVariant {
    /// `[ω̃] = 2πK + 2nεα`, parameter `ε`.
    Continuity,
    /// `[ω̃] = 2πK + 3nμα`, parameter `μ`.
    ContinuityMu,
    /// `[ω(t)] = 2π(1 − e^{−t})K + e^{−t}α`, parameter `t`.
    NormalizedFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionPoint {
    pub parameter: f64,
    pub value: f64,
    pub error: f64,
    /// Volume-side bound divided by the square of the small parameter.
    pub volume_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub variant: ExpansionVariant,
    pub n: usize,
    pub nu: usize,
    pub limit: f64,
    pub limit_exact: String,
    pub symbolic_limit_exact: String,
    pub exact_match: bool,
    /// No negative powers of the small parameter survive the rescaling.
    pub valuation_ok: bool,
    /// The rescaled volume bound vanishes to second order.
    pub volume_decay_ok: bool,
    /// Binomial finite sum of the volume equals the direct expansion.
    pub volume_sum_match: bool,
    pub schedule: Vec<ExpansionPoint>,
    pub observed_rate: Option<f64>,
    pub converges: bool,
    pub pass: bool,
}

/// Rescaled defect pairing along a class family, against its closed-form limit.
pub fn asymptotic_expansion_check(
    spec: &ManifoldSpec,
    alpha: &KahlerClassVector,
    nu: usize,
    schedule: &[f64],
    variant: ExpansionVariant,
) -> Result<ExpansionReport> {
    let n = spec.dimension();
    if n < 3 || nu + 2 > n {
        return Err(KahlerError::Rejected(format!(
            "expansion needs n ≥ 3 and ν ≤ n − 2 (n = {n}, ν = {nu})"
        )));
    }
    if !spec.is_nef(alpha) {
        return Err(KahlerError::invalid("α must be nef"));
    }
    let m = (n - nu - 2) as u32;
    let (c1, _) = spec.chern_classes::<Exact>();
    let k = c1.scale(&-Exact::one());
    let a = spec.poly_exact(alpha)?;
    let d = defect_class(spec);
    let two_pi = Exact::integer(2) * Exact::pi();
    let eps = Exact::eps();
    let (base, coef) = match variant {
        ExpansionVariant::Continuity => (
            k.scale(&two_pi)
                .add(&a.scale(&(Exact::integer(2 * n as i128) * eps.clone()))),
            Exact::integer(2 * n as i128).pow(m),
        ),
        ExpansionVariant::ContinuityMu => (
            k.scale(&two_pi)
                .add(&a.scale(&(Exact::integer(3 * n as i128) * eps.clone()))),
            Exact::integer(3 * n as i128).pow(m),
        ),
        ExpansionVariant::NormalizedFlow => (
            k.scale(&(two_pi.clone() * (Exact::one() - eps.clone())))
                .add(&a.scale(&eps)),
            Exact::one(),
        ),
    };
    let direct = d.mul(&base.pow(n as u32 - 2)).integrate();
    let valuation_ok = direct.eps_valuation().is_none_or(|v| v >= m);
    let symbolic = direct.eps_coefficient(m);
    let closed = Exact::rational(binomial(n as u32 - 2, nu as u32))
        * two_pi.pow(nu as u32)
        * coef
        * d.mul(&k.pow(nu as u32)).mul(&a.pow(m)).integrate();
    let exact_match = symbolic == closed;
    let limit = closed.to_f64();

    // volume side: [ω̃]^n / small^{m} must vanish like small²
    let volume = base.pow(n as u32).integrate();
    let volume_decay_ok = volume.eps_valuation().is_none_or(|v| v >= m + 2);
    let volume_sum_match = match variant {
        ExpansionVariant::NormalizedFlow => true,
        _ => {
            let factor = if variant == ExpansionVariant::Continuity {
                2 * n
            } else {
                3 * n
            } as i128;
            let mut sum = Exact::zero();
            for j in 0..=nu as u32 {
                let term = k.pow(j).mul(&a.pow(n as u32 - j)).integrate();
                sum = sum
                    + Exact::rational(binomial(n as u32, j))
                        * two_pi.pow(j)
                        * Exact::integer(factor).pow(n as u32 - j)
                        * eps.pow(n as u32 - j)
                        * term;
            }
            sum == volume
        }
    };
    let bound_const = match variant {
        ExpansionVariant::Continuity => 4.0,
        ExpansionVariant::ContinuityMu => 9.0,
        ExpansionVariant::NormalizedFlow => 1.0,
    } * (n as f64).powi(3);

    let mut points = Vec::with_capacity(schedule.len());
    for p in schedule {
        let small = match variant {
            ExpansionVariant::NormalizedFlow => (-p).exp(),
            _ => *p,
        };
        if !(small > 0.0) {
            return Err(KahlerError::invalid(format!(
                "schedule parameter {p} leaves the admissible regime"
            )));
        }
        let value = direct.to_f64_at(small) / small.powi(m as i32);
        let volume_ratio = bound_const * volume.to_f64_at(small) / small.powi(m as i32 + 2);
        points.push(ExpansionPoint {
            parameter: *p,
            value,
            error: (value - limit).abs(),
            volume_ratio,
        });
    }
    let observed_rate = rate(&points, variant);
    let tail = points.last().map(|p| p.error).unwrap_or(0.0);
    let head = points.first().map(|p| p.error).unwrap_or(0.0);
    let converges = tail <= 1e-12 * (1.0 + limit.abs()) || tail < head;
    Ok(ExpansionReport {
        variant,
        n,
        nu,
        limit,
        limit_exact: closed.to_string(),
        symbolic_limit_exact: symbolic.to_string(),
        exact_match,
        valuation_ok,
        volume_decay_ok,
        volume_sum_match,
        schedule: points,
        observed_rate,
        converges,
        pass: exact_match && valuation_ok && volume_decay_ok && volume_sum_match && converges,
    })
}

fn rate(points: &[ExpansionPoint], variant: ExpansionVariant) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.error > 1e-13)
        .map(|p| {
            let small = match variant {
                ExpansionVariant::NormalizedFlow => (-p.parameter).exp(),
                _ => p.parameter,
            };
            (small.ln(), p.error.ln())
        })
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let (x0, y0) = usable[usable.len() - 2];
    let (x1, y1) = usable[usable.len() - 1];
    Some((y1 - y0) / (x1 - x0))
}
