//! Task runners: one per scenario task kind.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use kahler_core::checks::{
    berger_identity_check, coordinate_line_area, mu_lower_bound, mu_upper_search,
    random_adapted_frame, random_positive, rational_curve_bound_check, royden_refined_slack,
    royden_slack, Family, MuSearchConfig,
};
use kahler_core::chern::{
    asymptotic_expansion_check, chern_numbers, class_of, cw_inequality_audit, my_defect_my1,
    my_defect_weighted, DefectReport,
};
use kahler_core::continuity::{
    my_family_construct, trace_estimate_check, wu_yau_solve, NewtonConfig,
};
use kahler_core::curvature::{curvature_field, max_hsc_at, sup_hsc, CurvaturePoint, SearchConfig};
use kahler_core::flow::{
    blowup_rate_check, existence_bound_check, flow_functional_monitor, run_flow,
    trace_bound_monitor, trace_evolution_check, FlowConfig, FlowKind, FlowTrajectory, Snapshot,
    Trigger,
};
use kahler_core::metric::C64;
use kahler_core::KahlerError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::CliError;
use crate::report::CheckReport;
use crate::scenario::{
    AuditTask, ChernTask, ContinuityTask, CurvatureTask, ExpansionTask, FlowTask, HscSupTask,
    MuTask, ReplayDef, Scenario,
};

/// Checks and free-standing values produced by one task.
#[derive(Default)]
pub struct TaskOutput {
    pub checks: Vec<CheckReport>,
    pub values: BTreeMap<String, serde_json::Value>,
    /// CSV rows for the trajectory artifact.
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

impl TaskOutput {
    fn value(&mut self, key: &str, v: impl serde::Serialize) {
        self.values.insert(
            key.into(),
            serde_json::to_value(v).unwrap_or(serde_json::Value::Null),
        );
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    #[serde(rename = "sup_H")]
    pub sup_h: f64,
    #[serde(rename = "M_t")]
    pub m_t: f64,
    pub min_eig: f64,
    pub vol: f64,
    #[serde(rename = "S_int")]
    pub s_int: f64,
    pub ric_plus_omega_sq_int: f64,
    pub residual: f64,
}

/// Tolerances scaled by the global `--tolerance-scale`.
#[derive(Clone, Copy)]
pub struct Tol(pub f64);

impl Tol {
    fn of(&self, given: Option<f64>, default: f64) -> f64 {
        given.unwrap_or(default) * self.0
    }
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn curvature(sc: &Scenario, task: &CurvatureTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let metric = sc.metric()?;
    let n = metric.dim();
    let atlas = sc.atlas()?;
    let points = task.points.clone().unwrap_or_else(|| atlas.points.clone());
    for (i, p) in points.iter().enumerate() {
        if p.len() != 2 * n {
            return Err(CliError::config(format!(
                "task.points[{i}]: expected {} coordinates",
                2 * n
            )));
        }
    }
    let cps = curvature_field(&metric, &points)?;
    let mut out = TaskOutput::default();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let search = SearchConfig {
        seed: sc.seed,
        ..SearchConfig::default()
    };
    let max_rm = cps.iter().map(|c| c.rm_norm()).fold(0.0, f64::max);
    let s_min = cps.iter().map(|c| c.scalar).fold(f64::INFINITY, f64::min);
    let s_max = cps
        .iter()
        .map(|c| c.scalar)
        .fold(f64::NEG_INFINITY, f64::max);
    out.value("points", points.len());
    out.value("max_rm_norm", max_rm);
    out.value("scalar_min", s_min);
    out.value("scalar_max", s_max);

    // H at the maximizing direction and at random directions of every point
    let mut h_lo = f64::INFINITY;
    let mut h_hi = f64::NEG_INFINITY;
    for (i, c) in cps.iter().enumerate() {
        h_hi = h_hi.max(max_hsc_at(c, i, &search).0);
        for _ in 0..8 {
            let h = c.hsc(&random_direction(n, &mut rng))?;
            h_lo = h_lo.min(h);
            h_hi = h_hi.max(h);
        }
    }
    out.value("hsc_min_sampled", h_lo);
    out.value("hsc_max", h_hi);

    if task.expect_flat {
        let t = tol.of(task.tol, 1e-10);
        let max_r = cps
            .iter()
            .flat_map(|c| {
                let n = c.n;
                (0..n * n * n * n).map(move |k| {
                    c.r(k / (n * n * n), (k / (n * n)) % n, (k / n) % n, k % n)
                        .norm()
                })
            })
            .fold(0.0, f64::max);
        let max_ric = cps
            .iter()
            .map(|c| c.ric.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let max_s = s_min.abs().max(s_max.abs());
        let max_h = h_lo.abs().max(h_hi.abs());
        let worst = max_r.max(max_ric).max(max_s).max(max_h);
        out.checks.push(
            CheckReport::new(
                "flat-zero",
                "R = 0, Ric = 0, S = 0 and H = 0 for a flat metric",
                "exact: flat metric",
            )
            .measured("max_abs_r", max_r)
            .measured("max_abs_ric", max_ric)
            .measured("max_abs_s", max_s)
            .measured("max_abs_h", max_h)
            .bound("zero", 0.0)
            .with_slack(-worst, t),
        );
    }
    if let Some(c) = task.expect_hsc {
        let t = tol.of(task.tol, 1e-6);
        let err = (h_lo - c).abs().max((h_hi - c).abs());
        out.checks.push(
            CheckReport::new(
                "constant-hsc",
                "H is constant in every direction",
                "closed form",
            )
            .measured("hsc_min_sampled", h_lo)
            .measured("hsc_max", h_hi)
            .bound("hsc", c)
            .with_slack(-err, t),
        );
    }
    if let Some(lam) = task.expect_einstein {
        let t = tol.of(task.tol, 1e-6);
        let err = cps
            .iter()
            .map(|c| {
                (&c.ric - &c.g * C64::new(lam, 0.0))
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        out.checks.push(
            CheckReport::new("einstein", "Ric = lambda g", "closed form")
                .measured("max_abs_ric_minus_lambda_g", err)
                .bound("lambda", lam)
                .with_slack(-err, t),
        );
    }
    if let Some(v) = task.expect_volume {
        let t = tol.of(task.tol, 1e-6);
        let vol = atlas.top_form_factor()
            * atlas.integrate(|x| {
                metric
                    .metric(x)
                    .map(|g| g.determinant().re)
                    .unwrap_or(f64::NAN)
            });
        out.checks.push(
            CheckReport::new(
                "volume",
                "int omega^n equals the class volume",
                "class arithmetic",
            )
            .close("volume", vol, v, t),
        );
    }
    if let Some([radial, angular]) = task.berger {
        let t = tol.of(task.tol, 1e-3);
        let mut worst = 0.0f64;
        for c in &cps {
            worst = worst.max(berger_identity_check(c, radial, angular)?.relative_error);
        }
        out.checks.push(
            CheckReport::new(
                "direction-average",
                "average of H over unit directions = 2 S/(n(n+1))",
                "direction quadrature",
            )
            .measured("max_relative_error", worst)
            .bound("relative_error", 0.0)
            .with_slack(-worst, t),
        );
    }
    Ok(out)
}

pub fn hsc_sup(sc: &Scenario, task: &HscSupTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let metric = sc.metric()?;
    let spec = sc.spec();
    let atlas = sc.atlas()?;
    let search = SearchConfig {
        seed: sc.seed,
        restarts: task.restarts.unwrap_or(16),
        ..SearchConfig::default()
    };
    let sup = sup_hsc(&metric, &atlas, &search)?;
    let mut out = TaskOutput::default();
    out.value("sup_h", sup.value);
    out.value("argmax_point", &sup.point);
    out.value("points", sup.n_points);
    if let Some(e) = task.expect {
        let t = tol.of(task.tol, 1e-6);
        out.checks.push(
            CheckReport::new("sup-hsc", "sup H over the atlas", "closed form")
                .close("sup_h", sup.value, e, t),
        );
    }
    if spec.has_rational_curve() {
        let area = coordinate_line_area(&spec, &metric, sc.resolution().radial)?;
        let r = rational_curve_bound_check(area, sup.value);
        out.checks.push(
            CheckReport::new(
                "rational-curve",
                "sup H >= pi/(32 area of a rational curve)",
                "line quadrature",
            )
            .measured("sup_h", r.sup_h)
            .measured("area", r.area)
            .bound("pi_over_32_area", r.bound)
            .with_slack(r.sup_h - r.bound, 0.0),
        );
    }
    if let Some(draws) = task.royden_draws {
        let a = task.royden_bound.unwrap_or(sup.value + 1e-6);
        let t = tol.of(task.tol, 1e-8);
        let quad = CheckReport::new(
            "royden-quadratic",
            "A (tr_ghat omega)^2 - ghat ghat R >= 0 when H <= A",
            "random (point, reference metric) draws",
        );
        let refined = CheckReport::new(
            "royden-refined",
            "A/2 ((sum |xi|^2)^2 + sum |xi|^4) >= sum R(xi_a, xi_a, xi_b, xi_b) on adapted frames",
            "random (point, reference metric, frame) draws",
        );
        if let Err(e) = kahler_core::checks::require_bound(a, sup.value, "royden") {
            let msg = e.to_string();
            out.checks.push(
                quad.measured("sup_h", sup.value)
                    .bound("a", a)
                    .failed(msg.clone()),
            );
            out.checks.push(
                refined
                    .measured("sup_h", sup.value)
                    .bound("a", a)
                    .failed(msg),
            );
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            let (mut wq, mut wr) = (f64::INFINITY, f64::INFINITY);
            for _ in 0..draws {
                let x = &atlas.points[rng.gen_range(0..atlas.len())];
                let c = CurvaturePoint::at(&metric, x)?;
                let ghat = random_positive(c.n, &mut rng);
                wq = wq.min(royden_slack(&c, &ghat, a));
                let frame = random_adapted_frame(&c.g, &ghat, &mut rng);
                wr = wr.min(royden_refined_slack(&c, &ghat, &frame, a)?);
            }
            out.checks.push(
                quad.measured("worst_slack", wq)
                    .bound("a", a)
                    .with_slack(wq, t),
            );
            out.checks.push(
                refined
                    .measured("worst_slack", wr)
                    .bound("a", a)
                    .with_slack(wr, t),
            );
        }
    }
    Ok(out)
}

fn replay_trajectory(r: &ReplayDef) -> FlowTrajectory {
    let snapshots = r
        .sup_h
        .iter()
        .map(|[t, h]| Snapshot {
            t: *t,
            sup_h: *h,
            sup_rm: f64::NAN,
            m_t: f64::NAN,
            min_eig: f64::NAN,
            vol: f64::NAN,
            class_vol: f64::NAN,
            s_int: f64::NAN,
            s_poly_int: f64::NAN,
            ric_plus_omega_sq_int: f64::NAN,
            sup_abs_s: f64::NAN,
            residual: f64::NAN,
            state: Vec::new(),
        })
        .collect();
    FlowTrajectory {
        kind: FlowKind::Krf,
        n: r.n,
        ansatz: "replay".into(),
        initial_class: kahler_core::classes::KahlerClassVector::new(Vec::new()),
        snapshots,
        t_num: r.t_num,
        singular: true,
        trigger: Trigger::EigenvalueFloor,
        confidence: "recorded".into(),
        final_min_eig: 0.0,
        steps: 0,
        rejected: 0,
        class_max_rel_error: 0.0,
    }
}

fn blowup_check(traj: &FlowTrajectory) -> CheckReport {
    let base = CheckReport::new("blowup-rate", "(T - t) sup H(t) >= 1/n", "flow snapshots");
    match blowup_rate_check(traj) {
        Ok(b) => base
            .measured("min_product", b.min_product)
            .measured("min_at", b.min_at)
            .measured("t_num", b.t_num)
            .bound("one_over_n", 1.0 / traj.n as f64)
            .with_slack(b.min_product - b.threshold, 0.0)
            .note(format!(
                "threshold {} allows 2% discretization error",
                b.threshold
            )),
        Err(e) => base.failed(e.to_string()),
    }
}

pub fn flow(
    sc: &Scenario,
    task: &FlowTask,
    kind: FlowKind,
    tol: Tol,
) -> Result<TaskOutput, CliError> {
    let mut out = TaskOutput::default();
    if let Some(r) = &task.replay {
        let traj = replay_trajectory(r);
        out.checks.push(blowup_check(&traj));
        return Ok(out);
    }
    let ansatz = sc.ansatz(task.cells, &task.grid)?;
    let d = FlowConfig::default();
    let cfg = FlowConfig {
        kind,
        horizon: task.horizon.unwrap_or(d.horizon),
        snapshot_dt: task.snapshot_dt.unwrap_or(d.snapshot_dt),
        max_dt: task.max_dt.unwrap_or(d.max_dt),
        search: SearchConfig {
            seed: sc.seed,
            ..d.search.clone()
        },
        ..d
    };
    let traj = run_flow(&ansatz, &cfg)?;
    out.value("ansatz", &traj.ansatz);
    out.value("t_num", traj.t_num);
    out.value("singular", traj.singular);
    out.value("trigger", traj.trigger);
    out.value("confidence", &traj.confidence);
    out.value("steps", traj.steps);
    out.value("rejected_steps", traj.rejected);
    out.trajectory = Some(
        traj.snapshots
            .iter()
            .map(|s| TrajectoryRow {
                t: s.t,
                sup_h: s.sup_h,
                m_t: s.m_t,
                min_eig: s.min_eig,
                vol: s.vol,
                s_int: s.s_int,
                ric_plus_omega_sq_int: s.ric_plus_omega_sq_int,
                residual: s.residual,
            })
            .collect(),
    );
    let a = traj.snapshots.first().map(|s| s.sup_h).unwrap_or(0.0);
    out.value("sup_h_initial", a);
    let class_tol = tol.0 * 1e-6;
    out.checks.push(
        CheckReport::new(
            "class-evolution",
            "volume of omega(t) equals the volume of its evolved class",
            "class arithmetic",
        )
        .measured("max_relative_error", traj.class_max_rel_error)
        .with_slack(-traj.class_max_rel_error, class_tol),
    );
    if let Some(e) = task.expect_t {
        let t = tol.0 * 1e-2 * e;
        out.checks.push(
            CheckReport::new("singular-time", "maximal existence time", "closed form")
                .close("t_num", traj.t_num, e, t),
        );
    }
    match kind {
        FlowKind::Krf => {
            if a > 0.0 {
                let e = existence_bound_check(&traj, a)?;
                out.checks.push(
                    CheckReport::new(
                        "existence-time",
                        "existence time >= 1/(n sup H)",
                        "flow run",
                    )
                    .measured("t_num", e.t_num)
                    .measured("ratio_t_num_n_a", e.ratio)
                    .bound("one_over_n_a", e.bound)
                    .with_slack(if e.pass { 0.0 } else { -1.0 }, 0.0)
                    .note(format!("nonsingular on [0, 1/(nA) - {:.3e})", e.delta)),
                );
            }
            let tr = trace_bound_monitor(&traj, a, tol.0 * 1e-3);
            out.checks.push(
                CheckReport::new(
                    "trace-bound",
                    "tr_omega(t) omega_0 <= n/(1 - n A t)",
                    "flow snapshots",
                )
                .measured("worst_relative_violation", tr.worst_relative_violation)
                .measured("worst_t", tr.worst_t)
                .with_slack(-tr.worst_relative_violation, tr.tolerance),
            );
            let ev = trace_evolution_check(&ansatz, &traj, a, tol.0 * 1e-2)?;
            out.checks.push(
                CheckReport::new(
                    "trace-evolution",
                    "(d/dt - Laplacian) tr_omega omega_0 <= A (tr_omega omega_0)^2",
                    "discrete evolution of stored states",
                )
                .measured("worst_excess", ev.worst_excess)
                .measured("worst_t", ev.worst_t)
                .with_slack(-ev.worst_excess, ev.tolerance),
            );
            if traj.singular {
                out.checks.push(blowup_check(&traj));
            }
        }
        FlowKind::Normalized => {
            let f = flow_functional_monitor(&traj, task.nu)?;
            out.checks.push(
                CheckReport::new(
                    "functional-identity",
                    "int |Ric + omega|^2 omega^n = d/dt int S omega^n + int (S + 1)(S + n) omega^n",
                    "flow snapshots",
                )
                .measured("max_relative_error", f.max_relative_error)
                .measured("sup_abs_s", f.sup_abs_s)
                .with_slack(-f.max_relative_error, tol.0 * 1e-2),
            );
            if let Some(dr) = &f.decay {
                let c = CheckReport::new(
                    "functional-decay",
                    "L(t) = e^{(n-nu-2)t} int S omega^n stays bounded",
                    "flow snapshots",
                )
                .measured("nu", dr.nu as f64);
                let c = match dr.exponent {
                    Some(x) => c.measured("exponent", x),
                    None => c.note("L vanishes identically"),
                };
                out.checks
                    .push(c.with_slack(if dr.pass { 0.0 } else { -1.0 }, 0.0));
            }
            if let Some(reason) = &f.decay_skipped {
                out.value("decay_skipped", reason);
            }
        }
    }
    Ok(out)
}

pub fn continuity(sc: &Scenario, task: &ContinuityTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let ansatz = sc.ansatz(task.cells, &task.grid)?;
    let n = ansatz.n() as f64;
    let cfg = NewtonConfig::default();
    let mut out = TaskOutput::default();
    let mut ts = task.ts.clone();
    ts.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for &t in &ts {
        let label = format!("t={t}");
        let sol = match wu_yau_solve(&ansatz, t, &cfg) {
            Ok(s) => s,
            Err(e @ (KahlerError::Rejected(_) | KahlerError::NonConvergence { .. })) => {
                out.checks.push(
                    CheckReport::new(
                        &format!("solve[{label}]"),
                        "Ric(omega) = -omega + t omega_ref",
                        "Newton",
                    )
                    .failed(e.to_string()),
                );
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(json!({
            "t": t, "iterations": sol.iterations, "residual_history": sol.residual_history,
            "damping": sol.damping_history, "observed_order": sol.observed_order,
            "trace_max": sol.trace_max, "ref_norm_max": sol.ref_norm_max,
        }));
        out.checks.push(
            CheckReport::new(
                &format!("equation[{label}]"),
                "Ric(omega) = -omega + t omega_ref",
                "discrete Ricci form",
            )
            .measured("relative_residual", sol.equation_residual)
            .with_slack(-sol.equation_residual, tol.0 * 1e-6),
        );
        let rel = (sol.volume - sol.class_volume).abs() / sol.class_volume;
        out.checks.push(
            CheckReport::new(
                &format!("class[{label}]"),
                "[omega(t)] = t[omega_ref] + 2 pi c1(K)",
                "class arithmetic",
            )
            .measured("volume", sol.volume)
            .bound("class_volume", sol.class_volume)
            .with_slack(-rel, tol.0 * 1e-4),
        );
        let order_ok = sol.observed_order.is_none_or(|p| p > 1.5);
        out.checks.push(
            CheckReport::new(
                &format!("newton-order[{label}]"),
                "quadratic convergence of Newton's method",
                "residual ratios",
            )
            .measured("observed_order", sol.observed_order.unwrap_or(f64::NAN))
            .with_slack(if order_ok { 0.0 } else { -1.0 }, 0.0),
        );
        if let Some(lam) = task.expect_einstein {
            let c = t - lam;
            let err = (sol.min_eig_ratio - c)
                .abs()
                .max((sol.max_eig_ratio - c).abs())
                / c;
            out.checks.push(
                CheckReport::new(
                    &format!("closed-form[{label}]"),
                    "omega(t) = (t - lambda) omega_ref",
                    "Einstein reference",
                )
                .measured("min_ratio", sol.min_eig_ratio)
                .measured("max_ratio", sol.max_eig_ratio)
                .bound("t_minus_lambda", c)
                .with_slack(-err, tol.0 * 1e-6),
            );
        }
    }
    out.value("solutions", rows);
    for [mu, eps] in &task.trace_estimate {
        let t = n * mu + 2.0 * n * eps;
        let base = CheckReport::new(
            &format!("trace-estimate[mu={mu},eps={eps}]"),
            "tr_omega(t) omega_ref <= 1/eps and |omega_ref|^2 <= n/eps^2 at t = n mu + 2 n eps",
            "continuity solution",
        );
        let sol = match wu_yau_solve(&ansatz, t, &cfg) {
            Ok(s) => s,
            Err(e) => {
                out.checks.push(base.failed(e.to_string()));
                continue;
            }
        };
        match trace_estimate_check(&sol, *mu, *eps) {
            Ok(r) => {
                let slack = (r.trace_bound - r.trace_max).min(r.norm_bound - r.norm_max)
                    / r.trace_bound.max(1.0);
                out.checks.push(
                    base.measured("trace_max", r.trace_max)
                        .measured("norm_max", r.norm_max)
                        .bound("one_over_eps", r.trace_bound)
                        .bound("n_over_eps_sq", r.norm_bound)
                        .with_slack(slack, 1e-9),
                );
            }
            Err(e) => out.checks.push(base.failed(e.to_string())),
        }
    }
    for f in &task.family {
        let (mu, eps) = (f.mu, f.eps);
        let base = CheckReport::new(
            &format!("family[mu={mu},eps={eps}]"),
            "int |Ric + omega|^2 omega^n <= n^3 (mu/eps + 2)^2 int omega^n",
            "continuity solution",
        );
        match my_family_construct(&ansatz, mu, eps, &cfg) {
            Ok((_, cert)) => {
                if f.expect_inapplicable {
                    out.checks
                        .push(base.failed("expected the construction to be inapplicable"));
                    continue;
                }
                let mut c = base
                    .measured("energy", cert.ric_plus_omega_sq_int)
                    .measured("residual", cert.equation_residual)
                    .measured("sup_h_ref", cert.sup_h_ref)
                    .bound("bound", cert.bound);
                let slack = match cert.bound_pass {
                    Some(_) => (cert.bound - cert.ric_plus_omega_sq_int) / cert.bound.max(1e-300),
                    None => {
                        c = c.note(
                            "curvature hypothesis sup H <= mu + eps fails; bound not asserted",
                        );
                        0.0
                    }
                };
                let slack = if cert.class_ok { slack } else { -1.0 };
                out.checks.push(c.with_slack(slack, 1e-9));
            }
            Err(KahlerError::Rejected(msg)) if f.expect_inapplicable => {
                out.checks.push(
                    base.with_slack(0.0, 0.0)
                        .note(format!("inapplicable as expected: {msg}")),
                );
            }
            Err(e) => out.checks.push(base.failed(e.to_string())),
        }
    }
    Ok(out)
}

pub fn chern(sc: &Scenario, task: &ChernTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let metric = sc.metric()?;
    let spec = sc.spec();
    let n = spec.dimension();
    let atlas = sc.atlas()?;
    let ch = chern_numbers(&metric, &atlas)?;
    let omega = class_of(&metric, &spec)?;
    let w = spec.poly_f64(&omega);
    let (c1, c2) = spec.chern_classes::<f64>();
    let pw = |k: usize| if k == 0 { w.pow(0) } else { w.pow(k as u32) };
    let class_vals = [
        ("volume", pw(n).integrate(), ch.volume),
        ("c1_omega", c1.mul(&pw(n - 1)).integrate(), ch.c1_omega),
        ("c1_top", c1.pow(n as u32).integrate(), ch.c1_top),
        (
            "c1_sq_omega",
            if n >= 2 {
                c1.mul(&c1).mul(&pw(n - 2)).integrate()
            } else {
                0.0
            },
            ch.c1sq_omega,
        ),
        (
            "c2_omega",
            if n >= 2 {
                c2.mul(&pw(n - 2)).integrate()
            } else {
                0.0
            },
            ch.c2_omega,
        ),
    ];
    let t = tol.of(task.tol, 1e-2);
    let mut out = TaskOutput::default();
    out.value("class", &omega.coeffs);
    out.value("points", ch.points);
    out.value("scalar_integral", ch.scalar_integral);
    out.value("ric_plus_omega_sq", ch.ric_plus_omega_sq);
    for (name, class, quad) in class_vals {
        let scale = class.abs().max(1.0);
        out.checks.push(
            CheckReport::new(
                &format!("chern-weil[{name}]"),
                "Chern-Weil integral equals the class pairing",
                "class arithmetic",
            )
            .measured(name, quad)
            .bound(name, class)
            .with_slack(-(quad - class).abs() / scale, t),
        );
    }
    let expects = [
        ("c1_top", task.expect_c1_top, ch.c1_top),
        ("c1_sq_omega", task.expect_c1_sq, ch.c1sq_omega),
        ("c2_omega", task.expect_c2, ch.c2_omega),
    ];
    for (name, e, v) in expects {
        if let Some(e) = e {
            out.checks.push(
                CheckReport::new(&format!("expected[{name}]"), "Chern number", "closed form")
                    .close(name, v, e, t),
            );
        }
    }
    out.value(
        "scalar_integral_over_2pi_n",
        ch.scalar_integral / (2.0 * PI * n as f64),
    );
    Ok(out)
}

fn defect_check(
    name: &str,
    anchor: &str,
    r: &DefectReport,
    expect: Option<f64>,
) -> Vec<CheckReport> {
    let mut v = Vec::new();
    let base = CheckReport::new(name, anchor, "exact class arithmetic")
        .measured("defect", r.value)
        .note(format!("exact value {}", r.exact));
    match r.pass {
        Some(_) => v.push(base.clone().bound("zero", 0.0).with_slack(r.value, 1e-12)),
        None => v.push(base.clone().with_slack(0.0, 0.0).note(format!(
            "exact value {}; K not nef, inequality not asserted",
            r.exact
        ))),
    }
    if let Some(e) = expect {
        v.push(
            CheckReport::new(&format!("{name}-value"), anchor, "exact class arithmetic")
                .close("defect", r.value, e, 1e-12),
        );
    }
    v
}

pub fn audit(sc: &Scenario, task: &AuditTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let spec = sc.spec();
    let mut out = TaskOutput::default();
    match task.nu {
        None => {
            let r = my_defect_my1(&spec)?;
            out.value("defect_exact", &r.exact);
            out.checks.extend(defect_check(
                "defect",
                "(2(n+1)/n) c2 - c1^2 paired with K^{n-2} >= 0 when K is nef",
                &r,
                task.expect_defect,
            ));
        }
        Some(nu) => {
            let alpha = sc.class_or_unit(&task.alpha)?;
            match my_defect_weighted(&spec, nu, &alpha) {
                Ok(r) => {
                    out.value("defect_exact", &r.exact);
                    out.checks.extend(defect_check(
                        "weighted-defect",
                        "(2(n+1)/n) c2 - c1^2 paired with K^nu alpha^{n-nu-2} >= 0 when K is nef",
                        &r,
                        task.expect_defect,
                    ));
                }
                Err(KahlerError::Rejected(msg)) => out.checks.push(
                    CheckReport::new(
                        "weighted-defect",
                        "weighted defect applicability",
                        "exact class arithmetic",
                    )
                    .failed(msg),
                ),
                Err(e) => return Err(e.into()),
            }
        }
    }
    if task.quadrature {
        let metric = sc.metric()?;
        let atlas = sc.atlas()?;
        let t = tol.of(task.tol, 1e-2);
        let r = cw_inequality_audit(&spec, &metric, &atlas, t)?;
        out.value("norm_convention", &r.norm_convention);
        let scale = r.lhs_class.abs().max(1.0);
        out.checks.push(
            CheckReport::new(
                "defect-quadrature",
                "Chern-Weil defect integral equals the class pairing",
                "class arithmetic",
            )
            .measured("quadrature", r.lhs_quadrature)
            .bound("class", r.lhs_class)
            .with_slack(-(r.lhs_quadrature - r.lhs_class).abs() / scale, t),
        );
        out.checks.push(
            CheckReport::new(
                "defect-energy",
                "defect paired with omega^{n-2} >= -(n+2)/(4 pi^2 n^2 (n-1)) int |Ric + omega|^2 omega^n",
                "Chern-Weil quadrature",
            )
            .measured("lhs", r.lhs_class)
            .measured("energy", r.ric_plus_omega_sq)
            .bound("rhs", r.rhs)
            .with_slack(r.slack, t),
        );
    }
    Ok(out)
}

pub fn mu_bounds(sc: &Scenario, task: &MuTask, tol: Tol) -> Result<TaskOutput, CliError> {
    let spec = sc.spec();
    let alpha = match (&task.alpha, &sc.metric) {
        (Some(_), _) | (None, None) => sc.class_or_unit(&task.alpha)?,
        (None, Some(_)) => class_of(&sc.metric()?, &spec)?,
    };
    let n = spec.dimension() as f64;
    let lower = mu_lower_bound(&spec, &alpha)?;
    let family = Family::for_class(&spec, &alpha, task.degree.unwrap_or(2), &task.waves)?;
    let atlas = sc.atlas()?;
    let search = SearchConfig {
        seed: sc.seed,
        restarts: 4,
        ..SearchConfig::default()
    };
    let cfg = MuSearchConfig {
        budget: task.budget.unwrap_or(200),
        seed: sc.seed,
        ..MuSearchConfig::default()
    };
    let upper = mu_upper_search(&family, &atlas, &search, &cfg);
    let t = tol.of(task.tol, 1e-3);
    let mut out = TaskOutput::default();
    out.value("alpha", &alpha.coeffs);
    out.value("witness", &upper.witness);
    out.value("evaluations", upper.evaluations);
    out.value("search_converged", upper.converged);
    out.checks.push(
        CheckReport::new(
            "mu-sandwich",
            "class lower bound for mu <= sup H of every metric in the class",
            "class arithmetic and family search",
        )
        .measured("lower", lower)
        .measured("upper", upper.value)
        .with_slack(upper.value - lower, t),
    );
    if let Some(e) = task.expect {
        out.checks.push(
            CheckReport::new("mu-lower", "class lower bound for mu", "closed form")
                .close("lower", lower, e, 1e-12),
        );
        out.checks.push(
            CheckReport::new(
                "mu-upper",
                "family search reaches the expected mu",
                "closed form",
            )
            .measured("upper", upper.value)
            .bound("expected", e)
            .with_slack(e - upper.value, t),
        );
    }
    let lambda = spec.nef_threshold(&alpha)?;
    let bound = 1.0 / (n * upper.value);
    out.checks.push(
        CheckReport::new(
            "nef-threshold",
            "nef threshold of alpha >= 1/(n mu)",
            "class arithmetic",
        )
        .measured("lambda", lambda)
        .bound("one_over_n_mu", bound)
        .with_slack(lambda - bound, t),
    );
    Ok(out)
}

pub fn expansion(sc: &Scenario, task: &ExpansionTask) -> Result<TaskOutput, CliError> {
    let spec = sc.spec();
    let alpha = sc.class_or_unit(&task.alpha)?;
    let schedule = task
        .schedule
        .clone()
        .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]);
    let mut out = TaskOutput::default();
    let base = CheckReport::new(
        "expansion-limit",
        "rescaled defect pairing converges to its binomial leading term",
        "exact symbolic expansion",
    );
    match asymptotic_expansion_check(&spec, &alpha, task.nu, &schedule, task.variant) {
        Ok(r) => {
            out.value("limit_exact", &r.limit_exact);
            out.value("symbolic_limit_exact", &r.symbolic_limit_exact);
            out.value("schedule", &r.schedule);
            out.value("observed_rate", r.observed_rate);
            let flags = [
                ("exact_match", r.exact_match),
                ("valuation_ok", r.valuation_ok),
                ("volume_decay_ok", r.volume_decay_ok),
                ("volume_sum_match", r.volume_sum_match),
                ("converges", r.converges),
            ];
            let mut c = base.measured("limit", r.limit);
            for (k, v) in flags {
                c = c.measured(k, if v { 1.0 } else { 0.0 });
            }
            out.checks
                .push(c.with_slack(if r.pass { 0.0 } else { -1.0 }, 0.0));
        }
        Err(KahlerError::Rejected(msg)) => out.checks.push(base.failed(msg)),
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}
