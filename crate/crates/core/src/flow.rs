//! Kähler–Ricci flow on symmetry-reduced ansätze, singular-time detection,
//! and monitors for the existence time, trace, blow-up rate and the
//! integrated scalar-curvature functionals.
//!
//! * Radial `CP^1`: the state is the ratio `R̄ = ω(t)/ω̂` on moment cells and
//!   `∂_t R̄ = −Ric(ω)/ω̂ (− R̄)`.
//! * Torus: the state is a potential `Φ` on a periodic grid with
//!   `ω(t) = A(t) h + √−1∂∂̄Φ` and `∂_t Φ = log(ω^n/h^n) (− Φ)`, where
//!   `A = 1` for the flow and `A = e^{−t}` for the normalized flow.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{herm_logdet_inv, herm_min_eig, RadialReference, TorusGrid};
use crate::classes::{KahlerClassVector, ManifoldSpec};
use crate::curvature::{max_hsc_at, CurvaturePoint, SearchConfig};
use crate::error::{KahlerError, Result};
use crate::integrator::{Attempt, Dp54, StepControl};
use crate::metric::{FourierMode, GridPotential, MetricField, RadialProfile, C64};

/// Unnormalized `∂_t ω = −Ric` or normalized `∂_t ω = −Ric − ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    Krf,
    Normalized,
}

/// `U(1)`-invariant metrics on `CP^1`, initial metric as reference.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialAnsatz {
    pub reference: RadialReference,
}

/// Potential on a periodic grid over a flat background.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusAnsatz {
    pub grid: TorusGrid,
    pub background: Vec<f64>,
    pub initial: Vec<f64>,
    /// Initial metric per node, `n × n` row-major blocks.
    ghat: Vec<C64>,
    lambda0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnsatzReduction {
    Radial(RadialAnsatz),
    Torus(TorusAnsatz),
}

/// Pointwise diagnostics of one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub sup_h: f64,
    pub sup_rm: f64,
    pub m_t: f64,
    pub min_eig: f64,
    pub vol: f64,
    pub s_int: f64,
    pub s_poly_int: f64,
    pub ric_plus_omega_sq_int: f64,
    pub sup_abs_s: f64,
    #[serde(skip)]
    pub argmax_direction: Option<Vec<C64>>,
}

impl AnsatzReduction {
    pub fn radial(profile: &RadialProfile, cells: usize) -> Result<Self> {
        Ok(AnsatzReduction::Radial(RadialAnsatz {
            reference: RadialReference::new(profile, cells)?,
        }))
    }

    /// Torus ansatz with potential `Σ a cos(κ·X + β)` sampled on the grid.
    pub fn torus(
        periods: Vec<[f64; 2]>,
        nodes: Vec<usize>,
        background: Vec<f64>,
        modes: &[FourierMode],
    ) -> Result<Self> {
        let grid = TorusGrid::new(periods, nodes)?;
        let values = (0..grid.len)
            .map(|k| {
                let x = grid.coords(k);
                modes
                    .iter()
                    .map(|m| {
                        let kv = crate::metric::wave_vector(&grid.periods, &m.wave);
                        let th: f64 = kv.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + m.phase;
                        m.amplitude * th.cos()
                    })
                    .sum()
            })
            .collect();
        Self::torus_from_values(grid, background, values)
    }

    pub fn torus_from_values(
        grid: TorusGrid,
        background: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.n;
        if background.len() != n || values.len() != grid.len {
            return Err(KahlerError::invalid(
                "torus ansatz needs one background entry per complex axis and one value per node",
            ));
        }
        if background.iter().any(|h| !(*h > 0.0)) {
            return Err(KahlerError::NotKahler {
                coeffs: background.clone(),
            });
        }
        let mut ghat = vec![C64::new(0.0, 0.0); grid.len * n * n];
        grid.hessian(&values, &mut ghat);
        let mut lambda0 = f64::INFINITY;
        for node in 0..grid.len {
            let blk = &mut ghat[node * n * n..(node + 1) * n * n];
            for (k, h) in background.iter().enumerate() {
                blk[k * n + k] += h;
            }
            let lam = herm_min_eig(n, blk);
            if !(lam > 0.0) {
                return Err(KahlerError::DegenerateMetric {
                    point: grid.coords(node),
                    min_eigenvalue: lam,
                });
            }
            lambda0 = lambda0.min(lam);
        }
        Ok(AnsatzReduction::Torus(TorusAnsatz {
            grid,
            background,
            initial: values,
            ghat,
            lambda0,
        }))
    }

    pub fn n(&self) -> usize {
        match self {
            AnsatzReduction::Radial(_) => 1,
            AnsatzReduction::Torus(t) => t.grid.n,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AnsatzReduction::Radial(r) => format!("projective-radial(cells={})", r.reference.cells),
            AnsatzReduction::Torus(t) => format!("torus-periodic(nodes={:?})", t.grid.nodes),
        }
    }

    pub fn spec(&self) -> ManifoldSpec {
        match self {
            AnsatzReduction::Radial(_) => ManifoldSpec::projective(1),
            AnsatzReduction::Torus(t) => ManifoldSpec::torus(&t.grid.periods),
        }
    }

    /// Class of the initial metric in the model basis.
    pub fn initial_class(&self) -> KahlerClassVector {
        match self {
            AnsatzReduction::Radial(r) => {
                KahlerClassVector::new(vec![2.0 * std::f64::consts::PI * r.reference.s])
            }
            AnsatzReduction::Torus(t) => KahlerClassVector::new(
                t.background
                    .iter()
                    .zip(&t.grid.periods)
                    .map(|(h, p)| 2.0 * h * p[0] * p[1])
                    .collect(),
            ),
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            AnsatzReduction::Radial(r) => vec![1.0; r.reference.cells],
            AnsatzReduction::Torus(t) => t.initial.clone(),
        }
    }

    /// Time derivative of the state.
    pub fn rhs(&self, kind: FlowKind, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            AnsatzReduction::Radial(r) => {
                require_positive(y)?;
                r.reference.neg_ricci_ratio(y, out);
                if kind == FlowKind::Normalized {
                    for (o, v) in out.iter_mut().zip(y) {
                        *o -= v;
                    }
                }
                Ok(())
            }
            AnsatzReduction::Torus(tr) => {
                let n = tr.grid.n;
                let g = tr.metric_blocks(kind, t, y);
                let mut inv = vec![C64::new(0.0, 0.0); n * n];
                let log_h: f64 = tr.background.iter().map(|h| h.ln()).sum();
                for node in 0..tr.grid.len {
                    let ld = herm_logdet_inv(n, &g[node * n * n..(node + 1) * n * n], &mut inv)
                        .ok_or_else(|| KahlerError::DegenerateMetric {
                            point: tr.grid.coords(node),
                            min_eigenvalue: 0.0,
                        })?;
                    out[node] = ld - log_h;
                    if kind == FlowKind::Normalized {
                        out[node] -= y[node];
                    }
                }
                Ok(())
            }
        }
    }

    /// Smallest metric eigenvalue relative to the initial scale.
    pub fn min_eig_rel(&self, kind: FlowKind, t: f64, y: &[f64]) -> f64 {
        match self {
            AnsatzReduction::Radial(_) => y.iter().cloned().fold(f64::INFINITY, f64::min),
            AnsatzReduction::Torus(tr) => {
                let n = tr.grid.n;
                let g = tr.metric_blocks(kind, t, y);
                g.chunks(n * n)
                    .map(|b| herm_min_eig(n, b))
                    .fold(f64::INFINITY, f64::min)
                    / tr.lambda0
            }
        }
    }

    pub fn diagnostics(
        &self,
        kind: FlowKind,
        t: f64,
        y: &[f64],
        search: &SearchConfig,
    ) -> Result<Diagnostics> {
        match self {
            AnsatzReduction::Radial(r) => {
                let rf = &r.reference;
                require_positive(y)?;
                let mut neg = vec![0.0; rf.cells];
                rf.neg_ricci_ratio(y, &mut neg);
                let s: Vec<f64> = neg.iter().zip(y).map(|(d, v)| -d / v).collect();
                let sup_h = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(Diagnostics {
                    sup_h,
                    sup_rm: s.iter().map(|v| v.abs()).fold(0.0, f64::max),
                    m_t: y.iter().map(|v| 1.0 / v).fold(0.0, f64::max),
                    min_eig: y.iter().cloned().fold(f64::INFINITY, f64::min),
                    vol: rf.integrate(|j| y[j]),
                    s_int: rf.integrate(|j| s[j] * y[j]),
                    s_poly_int: rf.integrate(|j| (s[j] + 1.0) * (s[j] + 1.0) * y[j]),
                    ric_plus_omega_sq_int: rf.integrate(|j| (s[j] + 1.0).powi(2) * y[j]),
                    sup_abs_s: s.iter().map(|v| v.abs()).fold(0.0, f64::max),
                    argmax_direction: None,
                })
            }
            AnsatzReduction::Torus(tr) => tr.diagnostics(kind, t, y, search),
        }
    }
}

fn require_positive(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !(*v > 0.0)) {
        Some(j) => Err(KahlerError::DegenerateMetric {
            point: vec![j as f64],
            min_eigenvalue: y[j],
        }),
        None => Ok(()),
    }
}

fn background_scale(kind: FlowKind, t: f64) -> f64 {
    match kind {
        FlowKind::Krf => 1.0,
        FlowKind::Normalized => (-t).exp(),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl TorusAnsatz {
    fn metric_blocks(&self, kind: FlowKind, t: f64, y: &[f64]) -> Vec<C64> {
        let n = self.grid.n;
        let c = background_scale(kind, t);
        let mut g = vec![C64::new(0.0, 0.0); self.grid.len * n * n];
        self.grid.hessian(y, &mut g);
        for blk in g.chunks_mut(n * n) {
            for (k, h) in self.background.iter().enumerate() {
                blk[k * n + k] += c * h;
            }
        }
        g
    }

    /// Initial metric block at a node.
    pub fn initial_metric(&self, node: usize) -> &[C64] {
        let n = self.grid.n;
        &self.ghat[node * n * n..(node + 1) * n * n]
    }

    /// Metric blocks and log-determinants, failing at non-positive nodes.
    fn metric_data(
        &self,
        kind: FlowKind,
        t: f64,
        y: &[f64],
    ) -> Result<(Vec<C64>, Vec<C64>, Vec<f64>)> {
        let n = self.grid.n;
        let g = self.metric_blocks(kind, t, y);
        let mut inv = vec![C64::new(0.0, 0.0); g.len()];
        let mut logdet = vec![0.0; self.grid.len];
        for node in 0..self.grid.len {
            let r = node * n * n..(node + 1) * n * n;
            logdet[node] = herm_logdet_inv(n, &g[r.clone()], &mut inv[r]).ok_or_else(|| {
                KahlerError::DegenerateMetric {
                    point: self.grid.coords(node),
                    min_eigenvalue: 0.0,
                }
            })?;
        }
        Ok((g, inv, logdet))
    }

    fn diagnostics(
        &self,
        kind: FlowKind,
        t: f64,
        y: &[f64],
        search: &SearchConfig,
    ) -> Result<Diagnostics> {
        let n = self.grid.n;
        let nn = n * n;
        let (g, inv, logdet) = self.metric_data(kind, t, y)?;
        let mut ric = vec![C64::new(0.0, 0.0); g.len()];
        self.grid.hessian(&logdet, &mut ric);
        for v in ric.iter_mut() {
            *v = -*v;
        }
        let top = factorial(n) * 2f64.powi(n as i32) * self.grid.cell_volume;
        let (
            mut vol,
            mut s_int,
            mut s_poly,
            mut rpo,
            mut m_t,
            mut min_eig,
            mut sup_s,
            mut sup_abs_s,
        ) = (
            0.0,
            0.0,
            0.0,
            0.0,
            0.0f64,
            f64::INFINITY,
            f64::NEG_INFINITY,
            0.0f64,
        );
        let nf = n as f64;
        for node in 0..self.grid.len {
            let r = node * nn..(node + 1) * nn;
            let (gb, ib, rb) = (&g[r.clone()], &inv[r.clone()], &ric[r]);
            let dens = logdet[node].exp() * top;
            let s = trace_prod(n, ib, rb).re;
            let eta: Vec<C64> = rb.iter().zip(gb).map(|(a, b)| a + b).collect();
            let norm = trace_prod4(n, ib, &eta).re;
            vol += dens;
            s_int += s * dens;
            s_poly += (s + 1.0) * (s + nf) * dens;
            rpo += norm * dens;
            m_t = m_t.max(trace_prod(n, ib, self.initial_metric(node)).re);
            min_eig = min_eig.min(herm_min_eig(n, gb));
            sup_s = sup_s.max(s);
            sup_abs_s = sup_abs_s.max(s.abs());
        }
        let (sup_h, sup_rm, argmax_direction) = if n == 1 {
            (sup_s, sup_abs_s, None)
        } else {
            self.sup_hsc_on_grid(kind, t, y, search)?
        };
        Ok(Diagnostics {
            sup_h,
            sup_rm,
            m_t,
            min_eig: min_eig / self.lambda0,
            vol,
            s_int,
            s_poly_int: s_poly,
            ric_plus_omega_sq_int: rpo,
            sup_abs_s,
            argmax_direction,
        })
    }

    /// Grid metric `A(t) h + √−1∂∂̄Φ` for curvature evaluation at nodes.
    pub fn grid_metric(&self, kind: FlowKind, t: f64, y: &[f64]) -> Result<MetricField> {
        let c = background_scale(kind, t);
        let gp = GridPotential::new(
            self.grid.periods.clone(),
            self.grid.nodes.clone(),
            self.background.iter().map(|h| c * h).collect(),
            y.to_vec(),
        )?;
        Ok(MetricField::Grid(Arc::new(gp)))
    }

    fn sup_hsc_on_grid(
        &self,
        kind: FlowKind,
        t: f64,
        y: &[f64],
        search: &SearchConfig,
    ) -> Result<(f64, f64, Option<Vec<C64>>)> {
        let metric = self.grid_metric(kind, t, y)?;
        let rows: Vec<Result<(f64, f64, Vec<C64>)>> = (0..self.grid.len)
            .into_par_iter()
            .map(|node| {
                let curv = CurvaturePoint::at(&metric, &self.grid.coords(node))?;
                let (v, dir) = max_hsc_at(&curv, node, search);
                Ok((v, curv.rm_norm(), dir))
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0.0f64, None);
        for r in rows {
            let (v, rm, dir) = r?;
            best.1 = best.1.max(rm);
            if v > best.0 {
                best.0 = v;
                best.2 = Some(dir);
            }
        }
        Ok(best)
    }
}

/// `tr(A B)` for row-major `n × n` blocks.
fn trace_prod(n: usize, a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[i * n + k] * b[k * n + i];
        }
    }
    acc
}

/// `tr(P η P η)` for row-major `n × n` blocks.
fn trace_prod4(n: usize, p: &[C64], eta: &[C64]) -> C64 {
    let mut pe = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            pe[i * n + j] = (0..n).map(|k| p[i * n + k] * eta[k * n + j]).sum();
        }
    }
    trace_prod(n, &pe, &pe)
}

/// Time stepping and singularity thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowConfig {
    pub kind: FlowKind,
    pub horizon: f64,
    pub snapshot_dt: f64,
    pub max_dt: f64,
    pub initial_dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Minimum eigenvalue floor relative to the initial scale.
    pub floor: f64,
    /// Step sizes below `min_dt · max(1, t)` count as underflow.
    pub min_dt: f64,
    #[serde(skip)]
    pub search: SearchConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            kind: FlowKind::Krf,
            horizon: 1.0,
            snapshot_dt: 0.01,
            max_dt: 1e-2,
            initial_dt: 1e-6,
            rtol: 1e-8,
            atol: 1e-10,
            floor: 1e-6,
            min_dt: 1e-13,
            search: SearchConfig {
                restarts: 4,
                ..SearchConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub sup_h: f64,
    pub sup_rm: f64,
    pub m_t: f64,
    pub min_eig: f64,
    pub vol: f64,
    /// Volume predicted by the class law.
    pub class_vol: f64,
    pub s_int: f64,
    /// `∫ (S + 1)(S + n) ω^n`.
    pub s_poly_int: f64,
    pub ric_plus_omega_sq_int: f64,
    pub sup_abs_s: f64,
    /// Scaled error estimate of the last accepted step.
    pub residual: f64,
    #[serde(skip)]
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    EigenvalueFloor,
    DtUnderflow,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrajectory {
    pub kind: FlowKind,
    pub n: usize,
    pub ansatz: String,
    pub initial_class: KahlerClassVector,
    pub snapshots: Vec<Snapshot>,
    /// Detected singular time, or the horizon.
    pub t_num: f64,
    pub singular: bool,
    pub trigger: Trigger,
    /// `high` for the eigenvalue floor, `low` for step-size underflow.
    pub confidence: String,
    pub final_min_eig: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Worst relative mismatch between quadrature and class volumes.
    pub class_max_rel_error: f64,
}

pub fn run_krf(ansatz: &AnsatzReduction, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    run_flow(
        ansatz,
        &FlowConfig {
            kind: FlowKind::Krf,
            ..cfg.clone()
        },
    )
}

pub fn run_normalized_krf(ansatz: &AnsatzReduction, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    run_flow(
        ansatz,
        &FlowConfig {
            kind: FlowKind::Normalized,
            ..cfg.clone()
        },
    )
}

/// Integrates the flow until the horizon or the first singularity trigger.
pub fn run_flow(ansatz: &AnsatzReduction, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    if !(cfg.horizon > 0.0 && cfg.snapshot_dt > 0.0 && cfg.max_dt > 0.0 && cfg.initial_dt > 0.0) {
        return Err(KahlerError::invalid(
            "horizon, snapshot spacing and step sizes must be positive",
        ));
    }
    let kind = cfg.kind;
    let spec = ansatz.spec();
    let alpha = ansatz.initial_class();
    let class_vol = |t: f64| -> Result<f64> {
        let c = match kind {
            FlowKind::Krf => spec.flow_class(&alpha, t),
            FlowKind::Normalized => spec.normalized_flow_class(&alpha, t),
        };
        spec.volume(&c)
    };
    let mut y = ansatz.initial_state();
    let lam0 = ansatz.min_eig_rel(kind, 0.0, &y);
    if !(lam0 > cfg.floor) {
        return Err(KahlerError::DegenerateMetric {
            point: vec![],
            min_eigenvalue: lam0,
        });
    }
    let control = StepControl {
        rtol: cfg.rtol,
        atol: cfg.atol,
        max_dt: cfg.max_dt,
        min_dt: cfg.min_dt,
    };
    let mut ig = Dp54::new(control, y.len());
    let mut f = |t: f64, y: &[f64], out: &mut [f64]| ansatz.rhs(kind, t, y, out);

    let mut search = cfg.search.clone();
    let mut snapshots = Vec::new();
    let record =
        |t: f64, y: &[f64], residual: f64, search: &mut SearchConfig| -> Result<Snapshot> {
            let d = ansatz.diagnostics(kind, t, y, search)?;
            if d.argmax_direction.is_some() {
                search.warm_start = d.argmax_direction.clone();
            }
            Ok(Snapshot {
                t,
                sup_h: d.sup_h,
                sup_rm: d.sup_rm,
                m_t: d.m_t,
                min_eig: d.min_eig,
                vol: d.vol,
                class_vol: class_vol(t)?,
                s_int: d.s_int,
                s_poly_int: d.s_poly_int,
                ric_plus_omega_sq_int: d.ric_plus_omega_sq_int,
                sup_abs_s: d.sup_abs_s,
                residual,
                state: y.to_vec(),
            })
        };
    snapshots.push(record(0.0, &y, 0.0, &mut search)?);

    let (mut t, mut dt, mut steps, mut rejected) = (0.0f64, cfg.initial_dt, 0usize, 0usize);
    let mut k_next = 1usize;
    let mut trigger = Trigger::Horizon;
    let mut final_min = lam0;
    let eps_t = 1e-12 * cfg.horizon;
    while t < cfg.horizon - eps_t {
        let target = (k_next as f64 * cfg.snapshot_dt).min(cfg.horizon);
        let h = dt.min(target - t).min(cfg.max_dt);
        if h < cfg.min_dt * t.max(1.0) {
            trigger = Trigger::DtUnderflow;
            break;
        }
        match ig.attempt(&mut f, t, &y, h) {
            Attempt::Accepted { y: ny, err } => {
                let lam = ansatz.min_eig_rel(kind, t + h, &ny);
                t += h;
                y = ny;
                steps += 1;
                final_min = lam;
                if lam < cfg.floor {
                    trigger = Trigger::EigenvalueFloor;
                    break;
                }
                let grown = ig.grow(h, err);
                if (t - target).abs() <= eps_t {
                    snapshots.push(record(t, &y, err, &mut search)?);
                    k_next += 1;
                    // a clipped step says nothing about the attainable size
                    dt = grown.max(dt);
                } else {
                    dt = grown;
                }
            }
            Attempt::Rejected { err } => {
                rejected += 1;
                dt = ig.shrink(h, err);
            }
            Attempt::StageFailed => {
                rejected += 1;
                dt = h * 0.25;
            }
        }
    }
    let singular = trigger != Trigger::Horizon;
    let class_max_rel_error = snapshots
        .iter()
        .filter(|s| s.class_vol > 0.0)
        .map(|s| ((s.vol - s.class_vol) / s.class_vol).abs())
        .fold(0.0, f64::max);
    Ok(FlowTrajectory {
        kind,
        n: ansatz.n(),
        ansatz: ansatz.label(),
        initial_class: alpha.clone(),
        snapshots,
        t_num: if singular { t } else { cfg.horizon },
        singular,
        trigger,
        confidence: match trigger {
            Trigger::EigenvalueFloor => "high",
            Trigger::DtUnderflow => "low",
            Trigger::Horizon => "no singularity before horizon",
        }
        .to_string(),
        final_min_eig: final_min,
        steps,
        rejected,
        class_max_rel_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub a: f64,
    /// `1/(nA)`.
    pub bound: f64,
    pub delta: f64,
    pub t_num: f64,
    pub singular: bool,
    /// `T_num · nA`.
    pub ratio: f64,
    /// The run reached `1/(nA) − δ` without a singularity.
    pub covers_bound: bool,
    pub pass: bool,
}

/// Nonsingularity on `[0, 1/(nA) − δ)` with `δ` two percent of the bound.
pub fn existence_bound_check(traj: &FlowTrajectory, a: f64) -> Result<ExistenceReport> {
    if !(a > 0.0) {
        return Err(KahlerError::Precondition(format!(
            "existence bound needs A > 0, got {a}"
        )));
    }
    let bound = 1.0 / (traj.n as f64 * a);
    let delta = 0.02 * bound;
    let pass = !traj.singular || traj.t_num >= bound - delta;
    Ok(ExistenceReport {
        a,
        bound,
        delta,
        t_num: traj.t_num,
        singular: traj.singular,
        ratio: traj.t_num * traj.n as f64 * a,
        covers_bound: traj.t_num >= bound - delta,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub a: f64,
    pub worst_relative_violation: f64,
    pub worst_t: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// `M(t) ≤ n/(1 − nAt)` on snapshots with `t < min(T_num, 1/(nA))`.
pub fn trace_bound_monitor(traj: &FlowTrajectory, a: f64, tol: f64) -> TraceReport {
    let n = traj.n as f64;
    let limit = if a > 0.0 {
        (1.0 / (n * a)).min(traj.t_num)
    } else {
        traj.t_num
    };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    let mut samples = 0;
    for s in traj.snapshots.iter().filter(|s| s.t < limit) {
        let bound = n / (1.0 - n * a * s.t);
        let v = (s.m_t - bound) / bound;
        samples += 1;
        if v > worst {
            worst = v;
            worst_t = s.t;
        }
    }
    TraceReport {
        a,
        worst_relative_violation: worst,
        worst_t,
        samples,
        tolerance: tol,
        pass: worst <= tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub t_num: f64,
    pub min_product: f64,
    pub min_at: f64,
    pub threshold: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Minimum of `(T_num − t) sup H(t)` over snapshots with `t ≤ 0.9 T_num`.
pub fn blowup_rate_check(traj: &FlowTrajectory) -> Result<BlowupReport> {
    if !traj.singular {
        return Err(KahlerError::Rejected(
            "no finite-time singularity before the horizon".into(),
        ));
    }
    let mut min_product = f64::INFINITY;
    let mut min_at = 0.0;
    let mut samples = 0;
    for s in traj.snapshots.iter().filter(|s| s.t <= 0.9 * traj.t_num) {
        let p = (traj.t_num - s.t) * s.sup_h;
        samples += 1;
        if p < min_product {
            min_product = p;
            min_at = s.t;
        }
    }
    if samples == 0 {
        return Err(KahlerError::invalid("no snapshots before 0.9 T_num"));
    }
    let threshold = (1.0 / traj.n as f64) * 0.98;
    Ok(BlowupReport {
        t_num: traj.t_num,
        min_product,
        min_at,
        threshold,
        samples,
        pass: min_product >= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub nu: usize,
    pub l_values: Vec<(f64, f64)>,
    /// Fitted exponent of `|L(t)|`, absent when `L` vanishes identically.
    pub exponent: Option<f64>,
    pub identically_zero: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub identity: Vec<IdentityRow>,
    pub max_relative_error: f64,
    pub identity_pass: bool,
    pub decay: Option<DecayReport>,
    pub decay_skipped: Option<String>,
    pub sup_abs_s: f64,
    pub pass: bool,
}

/// Checks `∫|Ric+ω|²ω^n = d/dt ∫Sω^n + ∫(S+1)(S+n)ω^n` at interior snapshots
/// and the decay of `L(t) = e^{(n−ν−2)t} ∫ S ω^n`.
pub fn flow_functional_monitor(
    traj: &FlowTrajectory,
    nu: Option<usize>,
) -> Result<FunctionalReport> {
    let s = &traj.snapshots;
    if s.len() < 3 {
        return Err(KahlerError::invalid(format!(
            "functional monitor needs at least 3 snapshots, got {}",
            s.len()
        )));
    }
    let mut identity = Vec::new();
    for k in 1..s.len() - 1 {
        let deriv = (s[k + 1].s_int - s[k - 1].s_int) / (s[k + 1].t - s[k - 1].t);
        let lhs = s[k].ric_plus_omega_sq_int;
        let rhs = deriv + s[k].s_poly_int;
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        identity.push(IdentityRow {
            t: s[k].t,
            lhs,
            rhs,
            relative_error: (lhs - rhs).abs() / scale,
        });
    }
    let max_relative_error = identity
        .iter()
        .map(|r| r.relative_error)
        .fold(0.0, f64::max);
    let identity_pass = max_relative_error < 1e-2;
    let n = traj.n;
    let (decay, decay_skipped) = match nu {
        None => (
            None,
            Some("canonical class not nef: numerical Kodaira dimension undefined".to_string()),
        ),
        Some(nu) if nu + 2 > n + 2 => (None, Some(format!("ν = {nu} exceeds the dimension"))),
        Some(nu) => {
            let c = n as f64 - nu as f64 - 2.0;
            let l_values: Vec<(f64, f64)> =
                s.iter().map(|x| (x.t, (c * x.t).exp() * x.s_int)).collect();
            let identically_zero = l_values.iter().all(|(_, l)| l.abs() <= 1e-10);
            let pts: Vec<(f64, f64)> = l_values
                .iter()
                .filter(|(_, l)| l.abs() > 1e-12)
                .map(|(t, l)| (*t, l.abs().ln()))
                .collect();
            let exponent = if identically_zero || pts.len() < 2 {
                None
            } else {
                Some(slope(&pts))
            };
            let pass = identically_zero || exponent.is_some_and(|e| e <= -2.0 + 0.05);
            (
                Some(DecayReport {
                    nu,
                    l_values,
                    exponent,
                    identically_zero,
                    pass,
                }),
                None,
            )
        }
    };
    let sup_abs_s = s.iter().map(|x| x.sup_abs_s).fold(0.0, f64::max);
    let pass = identity_pass && decay.as_ref().is_none_or(|d| d.pass);
    Ok(FunctionalReport {
        identity,
        max_relative_error,
        identity_pass,
        decay,
        decay_skipped,
        sup_abs_s,
        pass,
    })
}

/// Least-squares slope.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvolutionReport {
    pub a: f64,
    /// Largest `(∂_t − Δ) tr_ω ω̂ − A (tr_ω ω̂)²` over interior nodes and snapshots.
    pub worst_excess: f64,
    pub worst_t: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Discrete check of `(∂_t − Δ_ω) tr_ω ω̂ ≤ A (tr_ω ω̂)²` along an unnormalized run.
pub fn trace_evolution_check(
    ansatz: &AnsatzReduction,
    traj: &FlowTrajectory,
    a: f64,
    tol: f64,
) -> Result<TraceEvolutionReport> {
    if traj.kind != FlowKind::Krf {
        return Err(KahlerError::invalid(
            "trace evolution is checked on the unnormalized flow",
        ));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    for snap in traj.snapshots.iter().filter(|s| !s.state.is_empty()) {
        let y = &snap.state;
        let excess = match ansatz {
            AnsatzReduction::Radial(r) => {
                let rf = &r.reference;
                let mut dy = vec![0.0; y.len()];
                ansatz.rhs(FlowKind::Krf, snap.t, y, &mut dy)?;
                let tau: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
                let (lo, di, up) = rf.laplacian_bands();
                let m = y.len();
                (1..m - 1)
                    .map(|j| {
                        let dt_tau = -dy[j] / (y[j] * y[j]);
                        let lap = (lo[j] * tau[j - 1] + di[j] * tau[j] + up[j] * tau[j + 1]) / y[j];
                        (dt_tau - lap - a * tau[j] * tau[j]) / (a * tau[j] * tau[j]).max(1.0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            AnsatzReduction::Torus(tr) => {
                let n = tr.grid.n;
                let nn = n * n;
                let (_, inv, _) = tr.metric_data(FlowKind::Krf, snap.t, y)?;
                let mut dphi = vec![0.0; y.len()];
                ansatz.rhs(FlowKind::Krf, snap.t, y, &mut dphi)?;
                let mut dg = vec![C64::new(0.0, 0.0); inv.len()];
                tr.grid.hessian(&dphi, &mut dg);
                let tau: Vec<f64> = (0..tr.grid.len)
                    .map(|k| trace_prod(n, &inv[k * nn..(k + 1) * nn], tr.initial_metric(k)).re)
                    .collect();
                let mut htau = vec![C64::new(0.0, 0.0); inv.len()];
                tr.grid.hessian(&tau, &mut htau);
                (0..tr.grid.len)
                    .map(|k| {
                        let r = k * nn..(k + 1) * nn;
                        let p = &inv[r.clone()];
                        // ∂_t tr(P ĝ) = −tr(P ∂_t g P ĝ)
                        let mut pdg = vec![C64::new(0.0, 0.0); nn];
                        for i in 0..n {
                            for j in 0..n {
                                pdg[i * n + j] =
                                    (0..n).map(|l| p[i * n + l] * dg[r.start + l * n + j]).sum();
                            }
                        }
                        let mut pdgp = vec![C64::new(0.0, 0.0); nn];
                        for i in 0..n {
                            for j in 0..n {
                                pdgp[i * n + j] =
                                    (0..n).map(|l| pdg[i * n + l] * p[l * n + j]).sum();
                            }
                        }
                        let dt_tau = -trace_prod(n, &pdgp, tr.initial_metric(k)).re;
                        let lap = trace_prod(n, p, &htau[r]).re;
                        (dt_tau - lap - a * tau[k] * tau[k]) / (a * tau[k] * tau[k]).max(1.0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        };
        if excess > worst {
            worst = excess;
            worst_t = snap.t;
        }
    }
    Ok(TraceEvolutionReport {
        a,
        worst_excess: worst,
        worst_t,
        tolerance: tol,
        pass: worst <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs_run(s: f64, cells: usize, max_dt: f64) -> FlowTrajectory {
        let ans = AnsatzReduction::radial(&RadialProfile::fubini_study(s), cells).unwrap();
        let cfg = FlowConfig {
            horizon: s,
            snapshot_dt: s / 50.0,
            max_dt,
            ..FlowConfig::default()
        };
        run_krf(&ans, &cfg).unwrap()
    }

    #[test]
    fn fubini_study_shrinks_self_similarly() {
        let tr = fs_run(1.0, 64, 1e-2);
        assert!(tr.singular);
        assert!((tr.t_num - 0.5).abs() < 5e-3, "{}", tr.t_num);
        for s in &tr.snapshots {
            for v in &s.state {
                assert!((v - (1.0 - 2.0 * s.t)).abs() < 1e-6);
            }
            assert!(
                (s.sup_h * (1.0 - 2.0 * s.t) - 2.0).abs() < 1e-4,
                "{} {}",
                s.t,
                s.sup_h * (1.0 - 2.0 * s.t)
            );
        }
        assert!(tr.class_max_rel_error < 1e-6);
        let b = blowup_rate_check(&tr).unwrap();
        assert!((b.min_product - 1.0).abs() < 0.02, "{b:?}");
        let e = existence_bound_check(&tr, 2.0).unwrap();
        assert!(e.pass && (e.ratio - 1.0).abs() < 0.02);
        assert!(trace_bound_monitor(&tr, 2.0, 1e-3).pass);
    }

    #[test]
    fn scaled_sphere_doubles_singular_time() {
        let tr = fs_run(2.0, 64, 1e-2);
        assert!((tr.t_num - 1.0).abs() < 1e-2);
        assert!((blowup_rate_check(&tr).unwrap().min_product - 1.0).abs() < 0.02);
    }

    #[test]
    fn flat_torus_is_stationary_and_normalized_decays() {
        let ans = AnsatzReduction::torus(vec![[1.0, 1.0]], vec![16, 1], vec![1.0], &[]).unwrap();
        let cfg = FlowConfig {
            horizon: 1.0,
            snapshot_dt: 0.25,
            max_dt: 0.1,
            ..FlowConfig::default()
        };
        let tr = run_krf(&ans, &cfg).unwrap();
        assert!(!tr.singular);
        assert!(tr
            .snapshots
            .iter()
            .all(|s| s.state.iter().all(|v| v.abs() < 1e-12)));
        let nt = run_normalized_krf(&ans, &cfg).unwrap();
        for s in &nt.snapshots {
            assert!((s.vol - 2.0 * (-s.t).exp()).abs() < 1e-6 * s.vol.max(1e-3));
        }
        assert!(blowup_rate_check(&tr).is_err());
    }

    #[test]
    fn normalized_sphere_hits_class_root() {
        let ans = AnsatzReduction::radial(&RadialProfile::fubini_study(1.0), 32).unwrap();
        let cfg = FlowConfig {
            horizon: 1.0,
            snapshot_dt: 0.02,
            ..FlowConfig::default()
        };
        let tr = run_normalized_krf(&ans, &cfg).unwrap();
        let spec = ManifoldSpec::projective(1);
        let lam = spec.nef_threshold(&ans.initial_class()).unwrap();
        let root = (1.0 + lam).ln();
        assert!(
            (tr.t_num - root).abs() < 1e-3 * root,
            "{} vs {root}",
            tr.t_num
        );
        let f = flow_functional_monitor(&tr, None).unwrap();
        assert!(f.identity_pass && f.decay.is_none() && f.decay_skipped.is_some());
    }

    #[test]
    fn perturbed_torus_flow_is_global() {
        let modes = [FourierMode {
            amplitude: 0.02,
            wave: vec![1, 0],
            phase: 0.3,
        }];
        let ans = AnsatzReduction::torus(vec![[1.0, 1.0]], vec![64, 1], vec![1.0], &modes).unwrap();
        let cfg = FlowConfig {
            horizon: 0.5,
            snapshot_dt: 0.05,
            ..FlowConfig::default()
        };
        let tr = run_krf(&ans, &cfg).unwrap();
        assert!(!tr.singular);
        let first = tr.snapshots[0].sup_h;
        let last = tr.snapshots.last().unwrap().sup_h;
        assert!(first > 0.0 && last < 0.5 * first, "{first} {last}");
        assert!(tr.class_max_rel_error < 1e-10);
        let a = first;
        assert!(existence_bound_check(&tr, a).unwrap().pass);
        let tb = trace_bound_monitor(&tr, a, 1e-3);
        assert!(tb.pass && tb.worst_relative_violation <= 0.0, "{tb:?}");
        let te = trace_evolution_check(&ans, &tr, a, 1e-3).unwrap();
        assert!(te.pass, "{te:?}");
    }
}
