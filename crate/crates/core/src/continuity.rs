//! Wu–Yau continuity equation `Ric(ω(t)) = −ω(t) + t ω_ref` and the metric
//! families built from it.
//!
//! With `ω_t = t ω_ref − Ric(ω_ref)` and `ω(t) = ω_t + √−1∂∂̄u`, the equation
//! is the Monge–Ampère problem `(ω_t + √−1∂∂̄u)^n = e^u ω_ref^n`. The Ricci
//! form of `ω_ref` is taken directly from its log-determinant, so no Poisson
//! solve is needed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ansatz::{herm_logdet_inv, thomas};
use crate::classes::KahlerClassVector;
use crate::curvature::SearchConfig;
use crate::error::{KahlerError, Result};
use crate::flow::{AnsatzReduction, FlowKind, TorusAnsatz};
use crate::metric::C64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub min_damping: f64,
    /// Residual accepted as converged when the line search stalls at roundoff.
    pub floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 60,
            min_damping: 1e-6,
            floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuitySolution {
    pub t: f64,
    pub n: usize,
    #[serde(skip)]
    pub u: Vec<f64>,
    /// `ω(t)/ω_ref` per cell on the radial ansatz; empty on tori.
    #[serde(skip)]
    pub ratio: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub damping_history: Vec<f64>,
    /// Estimated order from the last residual triple, when measurable.
    pub observed_order: Option<f64>,
    /// `sup |Ric(ω) + ω − t ω_ref|` relative to `|t ω_ref|`.
    pub equation_residual: f64,
    /// `max tr_ω ω_ref`.
    pub trace_max: f64,
    /// `max |ω_ref|²_ω`.
    pub ref_norm_max: f64,
    pub sup_h_ref: f64,
    /// Extreme eigenvalues of `ω(t)` relative to `ω_ref`.
    pub min_eig_ratio: f64,
    pub max_eig_ratio: f64,
    pub class: KahlerClassVector,
    pub class_volume: f64,
    pub volume: f64,
    /// `∫ |Ric(ω) + ω|² ω^n`.
    pub ric_plus_omega_sq_int: f64,
}

/// Solves the continuity equation at one parameter from the given start.
pub fn wu_yau_solve(
    ansatz: &AnsatzReduction,
    t: f64,
    cfg: &NewtonConfig,
) -> Result<ContinuitySolution> {
    solve_from(ansatz, t, cfg, None)
}

/// Solves at every parameter, from the largest downward, warm-starting each solve.
pub fn wu_yau_continuation(
    ansatz: &AnsatzReduction,
    ts: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<ContinuitySolution>> {
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|a, b| ts[*b].total_cmp(&ts[*a]));
    let mut out: Vec<Option<ContinuitySolution>> = vec![None; ts.len()];
    let mut prev: Option<Vec<f64>> = None;
    for i in order {
        let sol = solve_from(ansatz, ts[i], cfg, prev.as_deref())?;
        prev = Some(sol.u.clone());
        out[i] = Some(sol);
    }
    Ok(out.into_iter().flatten().collect())
}

fn class_at(ansatz: &AnsatzReduction, t: f64) -> Result<KahlerClassVector> {
    let spec = ansatz.spec();
    let alpha = ansatz.initial_class();
    let class = alpha
        .scale(t)
        .add(&spec.c1_canonical().scale(2.0 * std::f64::consts::PI));
    if !spec.is_kahler(&class) {
        return Err(KahlerError::Rejected(format!(
            "class t[ω_ref] + 2πc1(K) = {:?} is not Kähler at t = {t}",
            class.coeffs
        )));
    }
    Ok(class)
}

fn solve_from(
    ansatz: &AnsatzReduction,
    t: f64,
    cfg: &NewtonConfig,
    start: Option<&[f64]>,
) -> Result<ContinuitySolution> {
    let class = class_at(ansatz, t)?;
    let spec = ansatz.spec();
    let class_volume = spec.volume(&class)?;
    let sup_h_ref = ansatz
        .diagnostics(
            FlowKind::Krf,
            0.0,
            &ansatz.initial_state(),
            &SearchConfig::default(),
        )?
        .sup_h;
    let problem: Box<dyn Problem + '_> = match ansatz {
        AnsatzReduction::Radial(r) => Box::new(RadialProblem::new(&r.reference, t)),
        AnsatzReduction::Torus(tr) => Box::new(TorusProblem::new(tr, t)),
    };
    let mut u = match start {
        Some(s) if s.len() == problem.len() => s.to_vec(),
        _ => problem.initial_guess(),
    };
    let mut residual_history = Vec::new();
    let mut damping_history = Vec::new();
    let mut f = problem.residual(&u).ok_or_else(|| {
        KahlerError::Rejected(format!(
            "initial guess gives a degenerate metric at t = {t}"
        ))
    })?;
    let mut norm = sup(&f);
    residual_history.push(norm);
    let mut iterations = 0;
    while norm > cfg.tol {
        if iterations >= cfg.max_iter {
            return Err(KahlerError::NonConvergence {
                iterations,
                residual: norm,
                damping: damping_history,
            });
        }
        iterations += 1;
        let delta = problem.newton_step(&u, &f)?;
        let mut lambda = 1.0;
        let mut stalled = false;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if let Some(ft) = problem.residual(&trial) {
                let nt = sup(&ft);
                if nt < (1.0 - 0.25 * lambda) * norm || nt <= cfg.tol {
                    u = trial;
                    f = ft;
                    norm = nt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < cfg.min_damping && norm <= cfg.floor {
                stalled = true;
                break;
            }
            if lambda < cfg.min_damping {
                damping_history.push(lambda);
                return Err(KahlerError::NonConvergence {
                    iterations,
                    residual: norm,
                    damping: damping_history,
                });
            }
        }
        if stalled {
            break;
        }
        damping_history.push(lambda);
        residual_history.push(norm);
    }
    // the Ricci residual is the complex Hessian of this one, so polish past the tolerance
    for _ in 0..2 {
        let Ok(delta) = problem.newton_step(&u, &f) else {
            break;
        };
        let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
        match problem.residual(&trial) {
            Some(ft) if sup(&ft) < norm => {
                u = trial;
                f = ft;
                norm = sup(&f);
            }
            _ => break,
        }
    }
    let observed_order = order_estimate(&residual_history);
    let d = problem.diagnostics(&u)?;
    Ok(ContinuitySolution {
        t,
        n: ansatz.n(),
        ratio: d.ratio,
        u,
        iterations,
        residual_history,
        damping_history,
        observed_order,
        equation_residual: d.equation_residual,
        trace_max: d.trace_max,
        ref_norm_max: d.ref_norm_max,
        sup_h_ref,
        min_eig_ratio: d.min_eig_ratio,
        max_eig_ratio: d.max_eig_ratio,
        class,
        class_volume,
        volume: d.volume,
        ric_plus_omega_sq_int: d.ric_plus_omega_sq_int,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `log(r_{k+1}/r_k) / log(r_k/r_{k−1})` over the last usable triple.
fn order_estimate(h: &[f64]) -> Option<f64> {
    // Iterates after the first one at roundoff level carry no rate information.
    let end = h
        .iter()
        .position(|r| *r <= 1e-10)
        .map_or(h.len(), |k| k + 1);
    let usable = &h[..end];
    if usable.len() < 3 {
        return None;
    }
    let m = usable.len();
    let (a, b, c) = (usable[m - 3], usable[m - 2], usable[m - 1]);
    if !(b < a && c < b) {
        return None;
    }
    Some((c / b).ln() / (b / a).ln())
}

struct SolveDiagnostics {
    ratio: Vec<f64>,
    equation_residual: f64,
    trace_max: f64,
    ref_norm_max: f64,
    min_eig_ratio: f64,
    max_eig_ratio: f64,
    volume: f64,
    ric_plus_omega_sq_int: f64,
}

trait Problem {
    fn len(&self) -> usize;
    fn initial_guess(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }
    /// Residual, or `None` when the trial metric is not positive.
    fn residual(&self, u: &[f64]) -> Option<Vec<f64>>;
    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>>;
    fn diagnostics(&self, u: &[f64]) -> Result<SolveDiagnostics>;
}

struct RadialProblem<'a> {
    reference: &'a crate::ansatz::RadialReference,
    t: f64,
    /// `t + a''` per cell.
    base: Vec<f64>,
    bands: (Vec<f64>, Vec<f64>, Vec<f64>),
}

impl<'a> RadialProblem<'a> {
    fn new(reference: &'a crate::ansatz::RadialReference, t: f64) -> Self {
        let base = reference
            .reference_neg_ricci()
            .iter()
            .map(|v| t + v)
            .collect();
        Self {
            reference,
            t,
            base,
            bands: reference.laplacian_bands(),
        }
    }

    /// `ω/ω_ref = t + a'' + ∂_x(a ∂_x u)`.
    fn ratio(&self, u: &[f64]) -> Vec<f64> {
        let (lo, di, up) = &self.bands;
        let m = u.len();
        (0..m)
            .map(|j| {
                let mut v = self.base[j] + di[j] * u[j];
                if j > 0 {
                    v += lo[j] * u[j - 1];
                }
                if j + 1 < m {
                    v += up[j] * u[j + 1];
                }
                v
            })
            .collect()
    }
}

impl Problem for RadialProblem<'_> {
    fn len(&self) -> usize {
        self.reference.cells
    }

    fn residual(&self, u: &[f64]) -> Option<Vec<f64>> {
        let r = self.ratio(u);
        if r.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        Some(r.iter().zip(u).map(|(v, uj)| v.ln() - uj).collect())
    }

    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        // d/du [log R − u] = R⁻¹ L − I
        let r = self.ratio(u);
        let (lo, di, up) = &self.bands;
        let lo2: Vec<f64> = lo.iter().zip(&r).map(|(a, v)| a / v).collect();
        let up2: Vec<f64> = up.iter().zip(&r).map(|(a, v)| a / v).collect();
        let di2: Vec<f64> = di.iter().zip(&r).map(|(a, v)| a / v - 1.0).collect();
        let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        thomas(&lo2, &di2, &up2, &mut rhs)?;
        Ok(rhs)
    }

    fn diagnostics(&self, u: &[f64]) -> Result<SolveDiagnostics> {
        let ratio = self.ratio(u);
        let mut neg = vec![0.0; ratio.len()];
        self.reference.neg_ricci_ratio(&ratio, &mut neg);
        let mut worst = 0.0f64;
        let mut rpo = 0.0;
        for j in 0..ratio.len() {
            // (Ric + ω − t ω_ref)/ω_ref
            worst = worst.max((-neg[j] + ratio[j] - self.t).abs());
        }
        let rpo_density: Vec<f64> = (0..ratio.len())
            .map(|j| (-neg[j] / ratio[j] + 1.0).powi(2) * ratio[j])
            .collect();
        rpo += self.reference.integrate(|j| rpo_density[j]);
        Ok(SolveDiagnostics {
            equation_residual: worst / self.t,
            trace_max: ratio.iter().map(|v| 1.0 / v).fold(0.0, f64::max),
            ref_norm_max: ratio.iter().map(|v| 1.0 / (v * v)).fold(0.0, f64::max),
            min_eig_ratio: ratio.iter().cloned().fold(f64::INFINITY, f64::min),
            max_eig_ratio: ratio.iter().cloned().fold(0.0, f64::max),
            volume: self.reference.integrate(|j| ratio[j]),
            ric_plus_omega_sq_int: rpo,
            ratio,
        })
    }
}

struct TorusProblem<'a> {
    ans: &'a TorusAnsatz,
    t: f64,
    /// `t Φ_0 + log det ĝ`, the potential of `ω_t` over `t h`.
    base: Vec<f64>,
    ref_logdet: Vec<f64>,
}

impl<'a> TorusProblem<'a> {
    fn new(ans: &'a TorusAnsatz, t: f64) -> Self {
        let n = ans.grid.n;
        let mut inv = vec![C64::new(0.0, 0.0); n * n];
        let ref_logdet: Vec<f64> = (0..ans.grid.len)
            .map(|k| {
                herm_logdet_inv(n, ans.initial_metric(k), &mut inv)
                    .expect("reference metric is positive")
            })
            .collect();
        let base = ans
            .initial
            .iter()
            .zip(&ref_logdet)
            .map(|(p, l)| t * p + l)
            .collect();
        Self {
            ans,
            t,
            base,
            ref_logdet,
        }
    }

    fn metric(&self, u: &[f64]) -> Vec<C64> {
        let n = self.ans.grid.n;
        let pot: Vec<f64> = self.base.iter().zip(u).map(|(b, v)| b + v).collect();
        let mut g = vec![C64::new(0.0, 0.0); self.ans.grid.len * n * n];
        self.ans.grid.hessian(&pot, &mut g);
        for blk in g.chunks_mut(n * n) {
            for (k, h) in self.ans.background.iter().enumerate() {
                blk[k * n + k] += self.t * h;
            }
        }
        g
    }

    fn factor(&self, u: &[f64]) -> Option<(Vec<C64>, Vec<C64>, Vec<f64>)> {
        let n = self.ans.grid.n;
        let g = self.metric(u);
        let mut inv = vec![C64::new(0.0, 0.0); g.len()];
        let mut logdet = vec![0.0; self.ans.grid.len];
        for k in 0..self.ans.grid.len {
            let r = k * n * n..(k + 1) * n * n;
            logdet[k] = herm_logdet_inv(n, &g[r.clone()], &mut inv[r])?;
        }
        Some((g, inv, logdet))
    }
}

impl Problem for TorusProblem<'_> {
    fn len(&self) -> usize {
        self.ans.grid.len
    }

    /// Starts from `ω = t ω_ref`, which is positive for every `t > 0`.
    fn initial_guess(&self) -> Vec<f64> {
        self.ref_logdet.iter().map(|v| -v).collect()
    }

    fn residual(&self, u: &[f64]) -> Option<Vec<f64>> {
        let (_, _, logdet) = self.factor(u)?;
        Some(
            (0..u.len())
                .map(|k| logdet[k] - self.ref_logdet[k] - u[k])
                .collect(),
        )
    }

    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let n = self.ans.grid.n;
        let m = u.len();
        let (_, inv, _) = self
            .factor(u)
            .ok_or_else(|| KahlerError::DegenerateMetric {
                point: vec![],
                min_eigenvalue: 0.0,
            })?;
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            jac[(k, k)] -= 1.0;
            for i in 0..n {
                for j in 0..n {
                    // d log det g = Σ P_{ji} dg_{ij}
                    let p = inv[k * n * n + j * n + i];
                    for (col, w) in self.ans.grid.entry_ops(k, i, j) {
                        jac[(k, *col)] += (p * w).re;
                    }
                }
            }
        }
        let rhs = DVector::from_iterator(m, f.iter().map(|v| -v));
        let sol = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| KahlerError::invalid("singular Newton matrix"))?;
        Ok(sol.iter().cloned().collect())
    }

    fn diagnostics(&self, u: &[f64]) -> Result<SolveDiagnostics> {
        let n = self.ans.grid.n;
        let nn = n * n;
        let (g, inv, logdet) = self
            .factor(u)
            .ok_or_else(|| KahlerError::DegenerateMetric {
                point: vec![],
                min_eigenvalue: 0.0,
            })?;
        let mut ric = vec![C64::new(0.0, 0.0); g.len()];
        self.ans.grid.hessian(&logdet, &mut ric);
        let top = (1..=n).map(|k| k as f64).product::<f64>()
            * 2f64.powi(n as i32)
            * self.ans.grid.cell_volume;
        let (mut worst, mut scale, mut trace_max, mut norm_max, mut vol, mut rpo) =
            (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..self.ans.grid.len {
            let r = k * nn..(k + 1) * nn;
            let (gb, pb, gh) = (&g[r.clone()], &inv[r.clone()], self.ans.initial_metric(k));
            let mut eta = vec![C64::new(0.0, 0.0); nn];
            for e in 0..nn {
                // Ric = −∂∂̄ log det g
                let res = -ric[k * nn + e] + gb[e] - self.t * gh[e];
                worst = worst.max(res.norm());
                scale = scale.max((self.t * gh[e]).norm());
                eta[e] = -ric[k * nn + e] + gb[e];
            }
            let pg = mat_mul(n, pb, gh);
            let tr = trace(n, &pg).re;
            trace_max = trace_max.max(tr);
            norm_max = norm_max.max(trace(n, &mat_mul(n, &pg, &pg)).re);
            let pe = mat_mul(n, pb, &eta);
            let dens = logdet[k].exp() * top;
            vol += dens;
            rpo += trace(n, &mat_mul(n, &pe, &pe)).re * dens;
            let (emin, emax) = relative_eigen_range(n, gh, gb);
            lo = lo.min(emin);
            hi = hi.max(emax);
        }
        Ok(SolveDiagnostics {
            ratio: Vec::new(),
            equation_residual: worst / scale.max(1e-300),
            trace_max,
            ref_norm_max: norm_max,
            min_eig_ratio: lo,
            max_eig_ratio: hi,
            volume: vol,
            ric_plus_omega_sq_int: rpo,
        })
    }
}

fn mat_mul(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
        }
    }
    out
}

fn trace(n: usize, a: &[C64]) -> C64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Extreme eigenvalues of `b` relative to the positive matrix `a`.
fn relative_eigen_range(n: usize, a: &[C64], b: &[C64]) -> (f64, f64) {
    let a = DMatrix::from_row_slice(n, n, a);
    let b = DMatrix::from_row_slice(n, n, b);
    let Some(ch) = a.cholesky() else {
        return (f64::NAN, f64::NAN);
    };
    let l = ch.l();
    let Some(x) = l.solve_lower_triangular(&b) else {
        return (f64::NAN, f64::NAN);
    };
    let Some(m) = l.solve_lower_triangular(&x.adjoint()) else {
        return (f64::NAN, f64::NAN);
    };
    let ev = m.symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEstimateReport {
    pub t: f64,
    pub mu: f64,
    pub eps: f64,
    pub trace_max: f64,
    pub trace_bound: f64,
    pub norm_max: f64,
    pub norm_bound: f64,
    pub pass: bool,
}

/// `tr_ω ω_ref ≤ 1/ε` and `|ω_ref|²_ω ≤ n/ε²` at `t = nμ + 2nε`.
pub fn trace_estimate_check(
    sol: &ContinuitySolution,
    mu: f64,
    eps: f64,
) -> Result<TraceEstimateReport> {
    let n = sol.n as f64;
    if !(eps > 0.0 && mu >= 0.0) {
        return Err(KahlerError::Precondition(format!(
            "need ε > 0 and μ ≥ 0, got ε = {eps}, μ = {mu}"
        )));
    }
    let expected = n * mu + 2.0 * n * eps;
    if (sol.t - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(KahlerError::Precondition(format!(
            "solution parameter {} differs from nμ + 2nε = {expected}",
            sol.t
        )));
    }
    crate::checks::require_bound(mu + eps, sol.sup_h_ref, "trace estimate")?;
    let trace_bound = 1.0 / eps;
    let norm_bound = n / (eps * eps);
    let tol = 1e-9;
    Ok(TraceEstimateReport {
        t: sol.t,
        mu,
        eps,
        trace_max: sol.trace_max,
        trace_bound,
        norm_max: sol.ref_norm_max,
        norm_bound,
        pass: sol.trace_max <= trace_bound * (1.0 + tol)
            && sol.ref_norm_max <= norm_bound * (1.0 + tol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCertificate {
    pub mu: f64,
    pub eps: f64,
    pub t: f64,
    pub class: KahlerClassVector,
    pub class_volume: f64,
    pub volume: f64,
    pub class_ok: bool,
    pub equation_residual: f64,
    /// `∫ |Ric(ω̃) + ω̃|² ω̃^n`.
    pub ric_plus_omega_sq_int: f64,
    /// `n³ (μ/ε + 2)² ∫ ω̃^n`.
    pub bound: f64,
    /// The curvature hypothesis `sup H(ω_ref) ≤ μ + ε` holds.
    pub bound_applicable: bool,
    pub bound_pass: Option<bool>,
    pub sup_h_ref: f64,
    pub flagged: bool,
}

/// Builds `ω̃` at `t = nμ + 2nε` with its class, residual and energy certificate.
///
/// `μ = 0` gives `Ric(ω̃) + ω̃ = 2nε ω_ref` with bound `4n³∫ω̃^n`;
/// `μ = ε` gives `t = 3nμ` with bound `9n³∫ω̃^n`.
pub fn my_family_construct(
    ansatz: &AnsatzReduction,
    mu: f64,
    eps: f64,
    cfg: &NewtonConfig,
) -> Result<(ContinuitySolution, FamilyCertificate)> {
    if !(eps > 0.0 && mu >= 0.0) {
        return Err(KahlerError::invalid(format!(
            "need ε > 0 and μ ≥ 0, got ε = {eps}, μ = {mu}"
        )));
    }
    let n = ansatz.n() as f64;
    let t = n * mu + 2.0 * n * eps;
    let sol = match wu_yau_solve(ansatz, t, cfg) {
        Err(KahlerError::Rejected(msg)) => {
            return Err(KahlerError::Rejected(format!(
                "family inapplicable at μ = {mu}, ε = {eps}: {msg}; the curvature bound would need sup H ≤ μ + ε"
            )))
        }
        other => other?,
    };
    let bound = n.powi(3) * (mu / eps + 2.0).powi(2) * sol.volume;
    let bound_applicable = sol.sup_h_ref <= mu + eps + crate::checks::SUP_TOLERANCE;
    let bound_pass = bound_applicable.then_some(sol.ric_plus_omega_sq_int <= bound * (1.0 + 1e-9));
    let class_ok = ((sol.volume - sol.class_volume) / sol.class_volume).abs() < 1e-4;
    let cert = FamilyCertificate {
        mu,
        eps,
        t,
        class: sol.class.clone(),
        class_volume: sol.class_volume,
        volume: sol.volume,
        class_ok,
        equation_residual: sol.equation_residual,
        ric_plus_omega_sq_int: sol.ric_plus_omega_sq_int,
        bound,
        bound_applicable,
        bound_pass,
        sup_h_ref: sol.sup_h_ref,
        flagged: !class_ok || bound_pass == Some(false),
    };
    Ok((sol, cert))
}
