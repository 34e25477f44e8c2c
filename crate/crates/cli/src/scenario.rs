//! Scenario files: manifold, metric, atlas resolution, task and seed.

use std::path::{Path, PathBuf};

use kahler_core::chern::ExpansionVariant;
use kahler_core::classes::{Factor, KahlerClassVector, ManifoldSpec};
use kahler_core::flow::AnsatzReduction;
use kahler_core::metric::{FourierMode, MetricField, RadialProfile};
use kahler_core::quadrature::{QuadratureAtlas, Resolution};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub manifold: ManifoldDef,
    #[serde(default)]
    pub metric: Option<MetricDef>,
    #[serde(default)]
    pub resolution: Option<ResolutionDef>,
    #[serde(default)]
    pub seed: u64,
    pub task: Task,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldDef {
    Projective {
        n: usize,
    },
    /// One `[Lx, Ly]` pair per complex direction.
    Torus {
        periods: Vec<[f64; 2]>,
    },
    Curve {
        genus: u32,
    },
    K3,
    Product {
        factors: Vec<ManifoldDef>,
    },
}

impl ManifoldDef {
    pub fn spec(&self) -> ManifoldSpec {
        match self {
            ManifoldDef::Projective { n } => ManifoldSpec::projective(*n),
            ManifoldDef::Torus { periods } => ManifoldSpec::torus(periods),
            ManifoldDef::Curve { genus } => ManifoldSpec::curve(*genus),
            ManifoldDef::K3 => ManifoldSpec::k3(),
            ManifoldDef::Product { factors } => {
                ManifoldSpec::product(&factors.iter().map(|f| f.spec()).collect::<Vec<_>>())
            }
        }
    }

    fn dimension(&self) -> usize {
        self.spec().dimension()
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricDef {
    /// Potential `scale · log(1 + |z|²)` on projective space.
    FubiniStudy {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `s log(1+r) + Σ c_m (r/(1+r))^m` on projective space.
    Radial { s: f64, coeffs: Vec<f64> },
    /// Constant diagonal metric on a torus, unit by default.
    Flat {
        #[serde(default)]
        diag: Option<Vec<f64>>,
    },
    /// Flat background plus a trigonometric potential on a torus.
    TorusFourier {
        #[serde(default)]
        diag: Option<Vec<f64>>,
        modes: Vec<FourierMode>,
    },
    /// One metric per manifold factor.
    Product { factors: Vec<MetricDef> },
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionDef {
    #[serde(default)]
    pub torus_axes: Option<Vec<usize>>,
    #[serde(default)]
    pub radial: Option<usize>,
    #[serde(default)]
    pub angular: Option<usize>,
}

fn torus_periods(spec: &ManifoldSpec) -> Option<Vec<[f64; 2]>> {
    spec.factors()
        .iter()
        .map(|f| match f {
            Factor::Elliptic { periods } => Some(*periods),
            _ => None,
        })
        .collect()
}

/// Builds the metric field of `def` on `manifold`.
pub fn build_metric(manifold: &ManifoldDef, def: &MetricDef) -> Result<MetricField, CliError> {
    let spec = manifold.spec();
    let n = spec.dimension();
    match (manifold, def) {
        (ManifoldDef::Product { factors }, MetricDef::Product { factors: metrics }) => {
            if factors.len() != metrics.len() {
                return Err(CliError::config(format!(
                    "metric.factors: {} metrics for {} manifold factors",
                    metrics.len(),
                    factors.len()
                )));
            }
            let parts = factors
                .iter()
                .zip(metrics)
                .map(|(m, d)| build_metric(m, d))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MetricField::Product(parts))
        }
        (ManifoldDef::Projective { n }, MetricDef::FubiniStudy { scale }) => {
            Ok(MetricField::Radial {
                n: *n,
                profile: RadialProfile::fubini_study(*scale),
            })
        }
        (ManifoldDef::Projective { n }, MetricDef::Radial { s, coeffs }) => {
            Ok(MetricField::Radial {
                n: *n,
                profile: RadialProfile {
                    s: *s,
                    coeffs: coeffs.clone(),
                },
            })
        }
        (_, MetricDef::Flat { diag }) | (_, MetricDef::TorusFourier { diag, .. }) => {
            let periods = torus_periods(&spec)
                .ok_or_else(|| CliError::config("metric: flat and Fourier metrics need a torus"))?;
            let diag = diag.clone().unwrap_or_else(|| vec![1.0; n]);
            if diag.len() != n {
                return Err(CliError::config(format!(
                    "metric.diag: expected {n} entries, found {}",
                    diag.len()
                )));
            }
            let modes = match def {
                MetricDef::TorusFourier { modes, .. } => modes.clone(),
                _ => Vec::new(),
            };
            for (i, m) in modes.iter().enumerate() {
                if m.wave.len() != 2 * n {
                    return Err(CliError::config(format!(
                        "metric.modes[{i}].wave: expected {} entries",
                        2 * n
                    )));
                }
            }
            if modes.is_empty() {
                Ok(MetricField::Flat { diag })
            } else {
                Ok(MetricField::TorusFourier {
                    periods,
                    diag,
                    modes,
                })
            }
        }
        _ => Err(CliError::config(format!(
            "metric: {} does not fit manifold of dimension {}",
            metric_kind(def),
            manifold.dimension()
        ))),
    }
}

fn metric_kind(def: &MetricDef) -> &'static str {
    match def {
        MetricDef::FubiniStudy { .. } => "fubini-study",
        MetricDef::Radial { .. } => "radial",
        MetricDef::Flat { .. } => "flat",
        MetricDef::TorusFourier { .. } => "torus-fourier",
        MetricDef::Product { .. } => "product",
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses a scenario; errors name the offending path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::config(format!("schema error: {inner}"))
            } else {
                CliError::config(format!("schema error at {path}: {inner}"))
            }
        })
    }

    pub fn spec(&self) -> ManifoldSpec {
        self.manifold.spec()
    }

    pub fn metric(&self) -> Result<MetricField, CliError> {
        let def = self
            .metric
            .as_ref()
            .ok_or_else(|| CliError::config("metric: this task needs a metric"))?;
        build_metric(&self.manifold, def)
    }

    pub fn resolution(&self) -> Resolution {
        let r = self.resolution.clone().unwrap_or_default();
        let d = Resolution::default();
        Resolution {
            torus_axes: r.torus_axes.unwrap_or(d.torus_axes),
            radial: r.radial.unwrap_or(d.radial),
            angular: r.angular.unwrap_or(d.angular),
        }
    }

    pub fn atlas(&self) -> Result<QuadratureAtlas, CliError> {
        Ok(QuadratureAtlas::for_spec(&self.spec(), &self.resolution())?)
    }

    /// Symmetry-reduced ansatz for the flow and continuity solvers.
    pub fn ansatz(&self, cells: usize, grid: &GridDef) -> Result<AnsatzReduction, CliError> {
        let metric = self
            .metric
            .as_ref()
            .ok_or_else(|| CliError::config("metric: this task needs a metric"))?;
        match (&self.manifold, metric) {
            (ManifoldDef::Projective { n: 1 }, MetricDef::FubiniStudy { scale }) => Ok(
                AnsatzReduction::radial(&RadialProfile::fubini_study(*scale), cells)?,
            ),
            (ManifoldDef::Projective { n: 1 }, MetricDef::Radial { s, coeffs }) => {
                Ok(AnsatzReduction::radial(
                    &RadialProfile {
                        s: *s,
                        coeffs: coeffs.clone(),
                    },
                    cells,
                )?)
            }
            (
                ManifoldDef::Torus { periods },
                MetricDef::Flat { diag } | MetricDef::TorusFourier { diag, .. },
            ) => {
                let n = periods.len();
                let diag = diag.clone().unwrap_or_else(|| vec![1.0; n]);
                let modes = match metric {
                    MetricDef::TorusFourier { modes, .. } => modes.clone(),
                    _ => Vec::new(),
                };
                let nodes = grid
                    .nodes
                    .clone()
                    .unwrap_or_else(|| (0..n).flat_map(|_| [grid.size, 1]).collect());
                Ok(AnsatzReduction::torus(
                    periods.clone(),
                    nodes,
                    diag,
                    &modes,
                )?)
            }
            _ => Err(CliError::config(
                "manifold: flows and continuity solves run on CP^1 radial metrics or on tori",
            )),
        }
    }

    pub fn class_or_unit(&self, alpha: &Option<Vec<f64>>) -> Result<KahlerClassVector, CliError> {
        let spec = self.spec();
        match alpha {
            Some(c) if c.len() == spec.basis_len() => Ok(KahlerClassVector::new(c.clone())),
            Some(c) => Err(CliError::config(format!(
                "task.alpha: expected {} coefficients, found {}",
                spec.basis_len(),
                c.len()
            ))),
            None => Ok(spec.unit_class()),
        }
    }
}

fn default_grid() -> usize {
    64
}

/// Torus grid: `size` nodes along the real part of each complex direction,
/// or explicit per-axis `nodes` (a single node makes an axis inactive).
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    #[serde(default = "default_grid")]
    pub size: usize,
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
}

impl Default for GridDef {
    fn default() -> Self {
        Self {
            size: default_grid(),
            nodes: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Curvature(CurvatureTask),
    HscSup(HscSupTask),
    Flow(FlowTask),
    NormalizedFlow(FlowTask),
    Continuity(ContinuityTask),
    Chern(ChernTask),
    MyAudit(AuditTask),
    MuBounds(MuTask),
    Expansion(ExpansionTask),
    /// Runs every scenario in a directory, relative to the scenario file.
    Suite {
        dir: PathBuf,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Curvature(_) => "curvature",
            Task::HscSup(_) => "hsc-sup",
            Task::Flow(_) => "flow",
            Task::NormalizedFlow(_) => "normalized-flow",
            Task::Continuity(_) => "continuity",
            Task::Chern(_) => "chern",
            Task::MyAudit(_) => "my-audit",
            Task::MuBounds(_) => "mu-bounds",
            Task::Expansion(_) => "expansion",
            Task::Suite { .. } => "suite",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureTask {
    /// Chart points; the atlas nodes when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Expected constant holomorphic sectional curvature.
    #[serde(default)]
    pub expect_hsc: Option<f64>,
    /// Expected Einstein constant `λ` in `Ric = λ g`.
    #[serde(default)]
    pub expect_einstein: Option<f64>,
    /// Expected volume `∫ω^n`.
    #[serde(default)]
    pub expect_volume: Option<f64>,
    /// All curvature components vanish.
    #[serde(default)]
    pub expect_flat: bool,
    /// Direction quadrature `[radial, angular]` for the averaged identity.
    #[serde(default)]
    pub berger: Option<[usize; 2]>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HscSupTask {
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub expect: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Bound `A` for the quadratic-form and refined-frame checks; the
    /// measured supremum plus `1e-6` when absent.
    #[serde(default)]
    pub royden_bound: Option<f64>,
    /// Random (point, frame) draws for the refined-frame check.
    #[serde(default)]
    pub royden_draws: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayDef {
    pub n: usize,
    pub t_num: f64,
    /// `[t, sup H(t)]` rows.
    pub sup_h: Vec<[f64; 2]>,
}

fn default_cells() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FlowTask {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub grid: GridDef,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
    #[serde(default)]
    pub max_dt: Option<f64>,
    /// Expected singular time.
    #[serde(default)]
    pub expect_t: Option<f64>,
    #[serde(default)]
    pub nu: Option<usize>,
    /// Checks a recorded trajectory instead of running a flow.
    #[serde(default)]
    pub replay: Option<ReplayDef>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityTask {
    pub ts: Vec<f64>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub grid: GridDef,
    /// Expect `ω(t) = (t − λ) ω_ref` with this `λ`.
    #[serde(default)]
    pub expect_einstein: Option<f64>,
    /// `(μ, ε)` pairs for the trace estimate at `t = nμ + 2nε`.
    #[serde(default)]
    pub trace_estimate: Vec<[f64; 2]>,
    #[serde(default)]
    pub family: Vec<FamilyDef>,
}

/// Metric family at `t = nμ + 2nε`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDef {
    pub mu: f64,
    pub eps: f64,
    /// The class at `t` is expected not to be Kähler.
    #[serde(default)]
    pub expect_inapplicable: bool,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChernTask {
    #[serde(default)]
    pub expect_c1_top: Option<f64>,
    #[serde(default)]
    pub expect_c1_sq: Option<f64>,
    #[serde(default)]
    pub expect_c2: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AuditTask {
    #[serde(default)]
    pub nu: Option<usize>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub expect_defect: Option<f64>,
    /// Also integrate the defect of the metric by Chern–Weil quadrature.
    #[serde(default)]
    pub quadrature: bool,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MuTask {
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub waves: Vec<Vec<i32>>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub expect: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionTask {
    pub nu: usize,
    pub variant: ExpansionVariant,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
}
