//! The example families as parameter sweeps: graph-limit, thin-domain,
//! boundary-layer, dynamic-bc, plus the mosco-check and prox-bench suites.
//!
//! A sweep is prepared once ([`Plan::new`], which computes the limit
//! references) and then evaluated point by point ([`Plan::run_point`]), so a
//! caller may run the points concurrently and collect them in list order.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::connect::{
    self, boundary_layer_connector, graph_p1_connector, lstar_defect, operator_norm_estimate,
    recovery_errors, sample_torus, tau_projection_connector, vertical_average_connector,
    DeltaSchedule, LimitPoint, LinearConnector, RecoveryErrors, TauMode,
};
use crate::energies::{self, Energy, EnergySpec, ThinSlab};
use crate::error::{invalid, Error, Result};
use crate::flow::{flow_distance, minimizing_movements, AnalyticFlow, FlowRunSpec, Trajectory};
use crate::profiles::{Profile, SplitMix64};
use crate::prox::{prox, ProxOptions};
use crate::simplex::TorusGrid;
use crate::space::{StateVector, WeightedSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    GraphLimit,
    ThinDomain,
    BoundaryLayer,
    DynamicBc,
    MoscoCheck,
    ProxBench,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::GraphLimit => "graph-limit",
            ExperimentKind::ThinDomain => "thin-domain",
            ExperimentKind::BoundaryLayer => "boundary-layer",
            ExperimentKind::DynamicBc => "dynamic-bc",
            ExperimentKind::MoscoCheck => "mosco-check",
            ExperimentKind::ProxBench => "prox-bench",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "graph-limit" => ExperimentKind::GraphLimit,
            "thin-domain" => ExperimentKind::ThinDomain,
            "boundary-layer" => ExperimentKind::BoundaryLayer,
            "dynamic-bc" => ExperimentKind::DynamicBc,
            "mosco-check" => ExperimentKind::MoscoCheck,
            "prox-bench" => ExperimentKind::ProxBench,
            other => return Err(invalid(format!("unknown experiment `{other}`"))),
        })
    }
}

/// Example family probed by `mosco-check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Graph,
    Thin,
    BoundaryLayer,
    DynamicBc,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "graph" | "graph-limit" => Family::Graph,
            "thin" | "thin-domain" => Family::Thin,
            "boundary-layer" => Family::BoundaryLayer,
            "dynamic-bc" => Family::DynamicBc,
            other => return Err(invalid(format!("unknown family `{other}`"))),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Graph => "graph",
            Family::Thin => "thin",
            Family::BoundaryLayer => "boundary-layer",
            Family::DynamicBc => "dynamic-bc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: Family,
    pub p: f64,
    pub n: usize,
    pub eps_list: Vec<f64>,
    pub tau_list: Vec<f64>,
    pub tau_mode: TauMode,
    pub horizon: f64,
    pub steps: usize,
    /// Initial regularization `u0 ↦ J_λ(u0)`.
    pub lambda: Option<f64>,
    /// Step of the resolvent diagnostics.
    pub resolvent_lambda: f64,
    pub prox: ProxOptions,
    pub initial_data: Profile,
    pub seed: u64,
    pub delta: DeltaSchedule,
    /// Sampling resolution is `resolution_factor · lcm(m)`.
    pub resolution_factor: usize,
    /// Grid cells of the 1D families.
    pub cells: usize,
    /// Vertical layers of the thin slab.
    pub layers: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            family: Family::Graph,
            p: 2.0,
            n: 1,
            eps_list: Vec::new(),
            tau_list: Vec::new(),
            tau_mode: TauMode::ToNeumann,
            horizon: 0.1,
            steps: 100,
            lambda: None,
            resolvent_lambda: 0.1,
            prox: ProxOptions::default(),
            initial_data: Profile::Cosine,
            seed: 0,
            delta: match experiment {
                ExperimentKind::MoscoCheck => DeltaSchedule::default(),
                _ => DeltaSchedule::None,
            },
            resolution_factor: 4,
            cells: match experiment {
                ExperimentKind::BoundaryLayer => 256,
                ExperimentKind::ThinDomain => 32,
                _ => 64,
            },
            layers: 8,
        }
    }

    /// Which list is swept and under which name.
    pub fn sweep(&self) -> (&'static str, &[f64]) {
        let uses_tau = match self.experiment {
            ExperimentKind::DynamicBc => true,
            ExperimentKind::MoscoCheck => self.family == Family::DynamicBc,
            _ => false,
        };
        if uses_tau {
            ("tau", &self.tau_list)
        } else {
            ("eps", &self.eps_list)
        }
    }

    fn uses_graph(&self) -> bool {
        match self.experiment {
            ExperimentKind::GraphLimit | ExperimentKind::ProxBench => true,
            ExperimentKind::MoscoCheck => self.family == Family::Graph,
            _ => false,
        }
    }

    /// Grid sizes `m = 1/eps` for the graph families.
    pub fn graph_sizes(&self) -> Result<Vec<usize>> {
        self.eps_list
            .iter()
            .map(|&e| {
                let m = (1.0 / e).round();
                if !(e > 0.0) || ((1.0 / e) - m).abs() > 1e-9 * m || m < 3.0 {
                    Err(invalid(format!(
                        "eps_list entry {e} is not of the form 1/m with integer m >= 3"
                    )))
                } else {
                    Ok(m as usize)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (name, list) = self.sweep();
        if list.is_empty() {
            return Err(invalid(format!("{name}_list must not be empty")));
        }
        if list.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(invalid(format!("{name}_list entries must be positive")));
        }
        if name == "eps" && list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("eps_list must be strictly decreasing"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("T must be positive"));
        }
        if self.steps == 0 {
            return Err(invalid("N must be >= 1"));
        }
        if !(self.resolvent_lambda > 0.0) {
            return Err(invalid("resolvent_lambda must be positive"));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(invalid("lambda must be positive"));
            }
        }
        if self.resolution_factor == 0 || self.layers == 0 || self.cells < 2 {
            return Err(invalid(
                "resolution_factor, layers must be >= 1 and cells >= 2",
            ));
        }
        self.prox.validate()?;
        if self.uses_graph() {
            if !(1..=4).contains(&self.n) {
                return Err(invalid(format!("n must be in 1..=4, got {}", self.n)));
            }
            self.graph_sizes()?;
        }
        match (self.experiment, self.family) {
            (ExperimentKind::ThinDomain, _) | (ExperimentKind::MoscoCheck, Family::Thin)
                if self.p <= 1.0 =>
            {
                return Err(invalid("thin-domain needs p > 1"))
            }
            (ExperimentKind::BoundaryLayer, _)
            | (ExperimentKind::MoscoCheck, Family::BoundaryLayer) => {
                for &e in &self.eps_list {
                    energies::layer_cells(self.cells, e)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepRow {
    pub param: f64,
    pub sup_state_error: Option<f64>,
    pub sup_norm_error: Option<f64>,
    pub op_norm: Option<f64>,
    pub h4: Option<RecoveryErrors>,
    pub resolvent: Option<RecoveryErrors>,
    pub lstar_defect: Option<f64>,
    pub mm_steps: Option<usize>,
    pub prox_iters: Option<usize>,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "param_name",
    "param",
    "sup_state_error",
    "sup_norm_error",
    "op_norm",
    "h1_margin",
    "h4_state_error",
    "h4_norm_error",
    "h4_energy_error",
    "res_state_error",
    "res_norm_error",
    "res_energy_error",
    "lstar_defect",
    "mm_steps",
    "prox_iters",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn csv_fields(&self, experiment: &str, param_name: &str) -> Vec<String> {
        vec![
            experiment.to_string(),
            param_name.to_string(),
            self.param.to_string(),
            opt(self.sup_state_error),
            opt(self.sup_norm_error),
            opt(self.op_norm),
            opt(self.op_norm.map(|n| n - 1.0)),
            opt(self.h4.map(|e| e.state)),
            opt(self.h4.map(|e| e.norm)),
            opt(self.h4.map(|e| e.energy)),
            opt(self.resolvent.map(|e| e.state)),
            opt(self.resolvent.map(|e| e.norm)),
            opt(self.resolvent.map(|e| e.energy)),
            opt(self.lstar_defect),
            opt(self.mm_steps),
            opt(self.prox_iters),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct PointOutput {
    pub row: SweepRow,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub experiment: ExperimentKind,
    pub param_name: &'static str,
    pub rows: Vec<SweepRow>,
    /// `(param, trajectory)` in sweep order.
    pub trajectories: Vec<(f64, Trajectory)>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = CSV_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(
                &r.csv_fields(self.experiment.name(), self.param_name)
                    .join(","),
            );
            s.push('\n');
        }
        s
    }

    fn column(&self, f: impl Fn(&SweepRow) -> Option<f64>) -> Option<Vec<f64>> {
        let v: Vec<f64> = self.rows.iter().filter_map(&f).collect();
        (v.len() == self.rows.len() && !v.is_empty()).then_some(v)
    }

    /// Monotonicity flags over the sweep, in list order. Computed, never enforced.
    pub fn flags(&self) -> Vec<(&'static str, bool)> {
        let mut out = Vec::new();
        let sd = connect::strictly_decreasing;
        let mut push = |name, col: Option<Vec<f64>>, f: fn(&[f64]) -> bool| {
            if let Some(c) = col {
                out.push((name, f(&c)));
            }
        };
        push(
            "sup_state_error_decreasing",
            self.column(|r| r.sup_state_error),
            sd,
        );
        push(
            "sup_norm_error_decreasing",
            self.column(|r| r.sup_norm_error),
            sd,
        );
        push(
            "h4_state_decreasing",
            self.column(|r| r.h4.map(|e| e.state)),
            sd,
        );
        push(
            "h4_norm_decreasing",
            self.column(|r| r.h4.map(|e| e.norm)),
            sd,
        );
        push(
            "h4_energy_decreasing",
            self.column(|r| r.h4.map(|e| e.energy)),
            sd,
        );
        push(
            "res_state_decreasing",
            self.column(|r| r.resolvent.map(|e| e.state)),
            sd,
        );
        push(
            "res_norm_decreasing",
            self.column(|r| r.resolvent.map(|e| e.norm)),
            sd,
        );
        push(
            "res_energy_decreasing",
            self.column(|r| r.resolvent.map(|e| e.energy)),
            sd,
        );
        push(
            "lstar_defect_decreasing",
            self.column(|r| r.lstar_defect),
            sd,
        );
        push(
            "op_norm_contractive",
            self.column(|r| r.op_norm),
            |c: &[f64]| c.iter().all(|n| *n <= 1.0 + 1e-10),
        );
        out
    }
}

/// Parses `report.csv` back into rows (used to check schema stability).
pub fn parse_csv(text: &str) -> Result<(String, String, Vec<SweepRow>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid("empty csv"))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(invalid("unexpected csv header"));
    }
    let mut experiment = String::new();
    let mut param_name = String::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(invalid(format!(
                "csv line {}: expected {} fields",
                i + 2,
                CSV_COLUMNS.len()
            )));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| invalid(format!("csv line {}: {e}", i + 2)))
            }
        };
        let int = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| invalid(format!("csv line {}: {e}", i + 2)))
            }
        };
        let triple = |a: &str, b: &str, c: &str| -> Result<Option<RecoveryErrors>> {
            Ok(match (num(a)?, num(b)?, num(c)?) {
                (Some(state), Some(norm), Some(energy)) => Some(RecoveryErrors {
                    state,
                    norm,
                    energy,
                }),
                _ => None,
            })
        };
        experiment = f[0].to_string();
        param_name = f[1].to_string();
        rows.push(SweepRow {
            param: num(f[2])?.ok_or_else(|| invalid("missing param"))?,
            sup_state_error: num(f[3])?,
            sup_norm_error: num(f[4])?,
            op_norm: num(f[5])?,
            h4: triple(f[7], f[8], f[9])?,
            resolvent: triple(f[10], f[11], f[12])?,
            lstar_defect: num(f[13])?,
            mm_steps: int(f[14])?,
            prox_iters: int(f[15])?,
        });
    }
    Ok((experiment, param_name, rows))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

const NORM_ITERS: usize = 200;

/// Thin slab profiles used by the thin-domain family.
pub fn thin_slab(cfg: &ExperimentConfig, eps: f64) -> Result<ThinSlab> {
    ThinSlab::from_profiles(
        cfg.cells,
        cfg.layers,
        eps,
        cfg.p,
        |x| 0.25 * (2.0 * PI * x).sin(),
        |x| 1.0 + 0.3 * x,
    )
}

fn interval_nodes(cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| i as f64 / cells as f64).collect()
}

/// Nodal samples; with `envelope` the profile is multiplied by `sin(πx)` and
/// vanishes exactly at both ends.
fn interval_samples(profile: &Profile, cells: usize, envelope: bool) -> Vec<f64> {
    let mut v: Vec<f64> = interval_nodes(cells)
        .into_iter()
        .map(|x| profile.interval_value(x))
        .collect();
    if envelope {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi *= (PI * i as f64 / cells as f64).sin();
        }
        v[0] = 0.0;
        v[cells] = 0.0;
    }
    v
}

fn run_flow(
    energy: Energy,
    u0: StateVector,
    cfg: &ExperimentConfig,
) -> Result<(Trajectory, usize)> {
    let run = FlowRunSpec {
        energy,
        u0,
        horizon: cfg.horizon,
        steps: cfg.steps,
        prox: cfg.prox,
        init_lambda: cfg.lambda,
    };
    let out = minimizing_movements(&run)?;
    Ok((out.trajectory, out.prox_iterations))
}

/// Re-labels a fine graph trajectory as a path in the sampling space of the same grid.
fn into_sampling(traj: &Trajectory, n: usize, resolution: usize) -> Result<Trajectory> {
    let space = Arc::new(connect::sampling_space(n, resolution)?);
    Trajectory::new(
        space,
        traj.times().to_vec(),
        (0..=traj.steps())
            .map(|k| traj.values(k).to_vec())
            .collect(),
    )
}

enum Reference {
    /// `e^{-4π² t} a cos(2πx_1)` on the sampling grid.
    CosineDecay {
        space: Arc<WeightedSpace>,
        amplitude: f64,
        samples: Vec<f64>,
    },
    Path(Trajectory),
    Limit(LimitPoint),
    None,
}

pub struct Plan {
    cfg: ExperimentConfig,
    params: Vec<f64>,
    resolution: usize,
    reference: Reference,
    /// Limit-side resolvent for `mosco-check`.
    limit_resolvent: Option<LimitPoint>,
}

fn graph_limit_is_analytic(cfg: &ExperimentConfig) -> bool {
    cfg.p == 2.0 && cfg.initial_data == Profile::Cosine
}

impl Plan {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.sweep().1.to_vec();
        let resolution = if cfg.uses_graph() {
            cfg.resolution_factor * cfg.graph_sizes()?.into_iter().fold(1, lcm)
        } else {
            0
        };
        let mut plan = Self {
            cfg: cfg.clone(),
            params,
            resolution,
            reference: Reference::None,
            limit_resolvent: None,
        };
        plan.reference = plan.build_reference()?;
        plan.limit_resolvent = plan.build_limit_resolvent()?;
        Ok(plan)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_name(&self) -> &'static str {
        self.cfg.sweep().0
    }

    fn graph_u0_fine(&self) -> Result<StateVector> {
        let cfg = &self.cfg;
        let profile = cfg.initial_data;
        sample_torus(cfg.n, self.resolution, |x| profile.torus_value(x))
    }

    fn build_reference(&self) -> Result<Reference> {
        let cfg = &self.cfg;
        match cfg.experiment {
            ExperimentKind::GraphLimit => {
                if graph_limit_is_analytic(cfg) {
                    let u = self.graph_u0_fine()?;
                    let amplitude = cfg.lambda.map_or(1.0, |l| 1.0 / (1.0 + 4.0 * PI * PI * l));
                    Ok(Reference::CosineDecay {
                        space: Arc::clone(u.space()),
                        amplitude,
                        samples: u.into_values(),
                    })
                } else {
                    let grid = TorusGrid::new(cfg.n, self.resolution)?;
                    let energy = EnergySpec::GraphPDirichlet { grid, p: cfg.p }.build()?;
                    let u0 = energy.space().vector(self.graph_u0_fine()?.into_values())?;
                    let (traj, _) = run_flow(energy, u0, cfg)?;
                    Ok(Reference::Path(into_sampling(
                        &traj,
                        cfg.n,
                        self.resolution,
                    )?))
                }
            }
            ExperimentKind::ThinDomain => {
                let slab = thin_slab(cfg, self.params[0])?;
                let energy = slab.limit_spec().build()?;
                let u0 =
                    energy
                        .space()
                        .vector(interval_samples(&cfg.initial_data, cfg.cells, false))?;
                Ok(Reference::Path(run_flow(energy, u0, cfg)?.0))
            }
            ExperimentKind::BoundaryLayer => {
                let energy = EnergySpec::DynamicBC1D {
                    cells: cfg.cells,
                    p: cfg.p,
                    tau: 1.0,
                }
                .build()?;
                let u = interval_samples(&cfg.initial_data, cfg.cells, false);
                let u0 = connect::dynamic_bc_trace_lift(cfg.cells, 1.0, &u)?;
                Ok(Reference::Path(run_flow(energy, u0, cfg)?.0))
            }
            ExperimentKind::DynamicBc => {
                let energy =
                    connect::interval_limit_spec(cfg.cells, cfg.p, cfg.tau_mode).build()?;
                let u = self.dynamic_bc_profile();
                Ok(Reference::Path(
                    run_flow(energy.clone(), energy.space().vector(u)?, cfg)?.0,
                ))
            }
            ExperimentKind::MoscoCheck => Ok(Reference::Limit(self.limit_point()?)),
            ExperimentKind::ProxBench => Ok(Reference::None),
        }
    }

    fn dynamic_bc_profile(&self) -> Vec<f64> {
        let envelope = self.cfg.tau_mode == TauMode::ToDirichlet;
        interval_samples(&self.cfg.initial_data, self.cfg.cells, envelope)
    }

    /// The limit datum `w` of the mosco-check family.
    fn limit_point(&self) -> Result<LimitPoint> {
        let cfg = &self.cfg;
        match cfg.family {
            Family::Graph => {
                let values = self.graph_u0_fine()?;
                let energy = cfg.initial_data.torus_energy(cfg.n, cfg.p)?;
                Ok(LimitPoint::discrete(values, energy))
            }
            Family::Thin => {
                let slab = thin_slab(cfg, self.params[0])?;
                let e = slab.limit_spec().build()?;
                let w = e
                    .space()
                    .vector(interval_samples(&cfg.initial_data, cfg.cells, false))?;
                let energy = e.eval(&w)?.expect_finite("thin limit");
                Ok(LimitPoint::discrete(w, energy))
            }
            Family::BoundaryLayer => {
                let e = EnergySpec::DynamicBC1D {
                    cells: cfg.cells,
                    p: cfg.p,
                    tau: 1.0,
                }
                .build()?;
                let u = interval_samples(&cfg.initial_data, cfg.cells, false);
                let w = connect::dynamic_bc_trace_lift(cfg.cells, 1.0, &u)?;
                let energy = e.eval(&w)?.expect_finite("layer limit");
                Ok(LimitPoint::discrete(w, energy))
            }
            Family::DynamicBc => {
                let e = connect::interval_limit_spec(cfg.cells, cfg.p, cfg.tau_mode).build()?;
                let w = e.space().vector(self.dynamic_bc_profile())?;
                let energy = e.eval(&w)?.expect_finite("interval limit");
                Ok(LimitPoint::discrete(w, energy))
            }
        }
    }

    fn build_limit_resolvent(&self) -> Result<Option<LimitPoint>> {
        let cfg = &self.cfg;
        if cfg.experiment != ExperimentKind::MoscoCheck {
            return Ok(None);
        }
        let lambda = cfg.resolvent_lambda;
        let limit = match &self.reference {
            Reference::Limit(l) => l,
            _ => unreachable!("mosco-check always has a limit point"),
        };
        let point = match cfg.family {
            Family::Graph if graph_limit_is_analytic(cfg) => {
                let a = 1.0 / (1.0 + 4.0 * PI * PI * lambda);
                let values = limit.values.scale(a);
                LimitPoint::discrete(values, a * a * PI * PI)
            }
            Family::Graph => {
                let grid = TorusGrid::new(cfg.n, self.resolution)?;
                let e = EnergySpec::GraphPDirichlet { grid, p: cfg.p }.build()?;
                let w = e.space().vector(limit.values.values().to_vec())?;
                let (j, _) = prox(&e, &w, lambda, &cfg.prox)?;
                let energy = e.eval(&j)?.expect_finite("graph resolvent");
                let values = Arc::clone(limit.values.space()).vector(j.into_values())?;
                LimitPoint::discrete(values, energy)
            }
            Family::Thin => {
                let e = thin_slab(cfg, self.params[0])?.limit_spec().build()?;
                self.discrete_resolvent(&e, &limit.values, lambda)?
            }
            Family::BoundaryLayer => {
                let e = EnergySpec::DynamicBC1D {
                    cells: cfg.cells,
                    p: cfg.p,
                    tau: 1.0,
                }
                .build()?;
                self.discrete_resolvent(&e, &limit.values, lambda)?
            }
            Family::DynamicBc => {
                let e = connect::interval_limit_spec(cfg.cells, cfg.p, cfg.tau_mode).build()?;
                self.discrete_resolvent(&e, &limit.values, lambda)?
            }
        };
        Ok(Some(point))
    }

    fn discrete_resolvent(&self, e: &Energy, w: &StateVector, lambda: f64) -> Result<LimitPoint> {
        let (j, _) = prox(e, w, lambda, &self.cfg.prox)?;
        let energy = e.eval(&j)?.expect_finite("limit resolvent");
        Ok(LimitPoint::discrete(j, energy))
    }

    /// Evaluates sweep point `index` (independent of every other point).
    pub fn run_point(&self, index: usize) -> Result<PointOutput> {
        let param = self.params[index];
        let cfg = &self.cfg;
        match cfg.experiment {
            ExperimentKind::GraphLimit => self.graph_limit_point(param),
            ExperimentKind::ThinDomain => {
                let slab = thin_slab(cfg, param)?;
                let energy = EnergySpec::ThinSlab2D(slab.clone()).build()?;
                let limit_space = Arc::new(slab.limit_spec().space()?);
                let w =
                    limit_space.vector(interval_samples(&cfg.initial_data, cfg.cells, false))?;
                let u0 = connect::thin_recovery(&slab, &w)?;
                let connector = vertical_average_connector(&slab)?;
                self.flow_point(param, energy, u0, &connector)
            }
            ExperimentKind::BoundaryLayer => {
                let energy = EnergySpec::BoundaryLayer1D {
                    cells: cfg.cells,
                    eps: param,
                    p: cfg.p,
                }
                .build()?;
                let u = interval_samples(&cfg.initial_data, cfg.cells, false);
                let u0 = energy.space().vector(u)?;
                let connector = boundary_layer_connector(cfg.cells, param)?;
                self.flow_point(param, energy, u0, &connector)
            }
            ExperimentKind::DynamicBc => {
                let energy = EnergySpec::DynamicBC1D {
                    cells: cfg.cells,
                    p: cfg.p,
                    tau: param,
                }
                .build()?;
                let u = self.dynamic_bc_profile();
                let u0 = match cfg.tau_mode {
                    TauMode::ToNeumann => connect::dynamic_bc_trace_lift(cfg.cells, param, &u)?,
                    TauMode::ToDirichlet => connect::dynamic_bc_zero_lift(cfg.cells, param, &u)?,
                };
                let connector = tau_projection_connector(cfg.cells, param, cfg.tau_mode)?;
                self.flow_point(param, energy, u0, &connector)
            }
            ExperimentKind::MoscoCheck => self.mosco_point(param),
            ExperimentKind::ProxBench => self.prox_bench_point(param),
        }
    }

    fn flow_point(
        &self,
        param: f64,
        energy: Energy,
        u0: StateVector,
        connector: &LinearConnector,
    ) -> Result<PointOutput> {
        let (traj, iters) = run_flow(energy, u0, &self.cfg)?;
        let reference = match &self.reference {
            Reference::Path(t) => t,
            _ => unreachable!("flow families carry a reference path"),
        };
        let dist = flow_distance(connector, &traj, reference, 4 * self.cfg.steps)?;
        let op = operator_norm_estimate(connector, NORM_ITERS)?;
        Ok(PointOutput {
            row: SweepRow {
                param,
                sup_state_error: Some(dist.sup_state_error),
                sup_norm_error: Some(dist.sup_norm_error),
                op_norm: Some(op.norm),
                mm_steps: Some(traj.steps()),
                prox_iters: Some(iters),
                ..SweepRow::default()
            },
            trajectory: Some(traj),
        })
    }

    fn graph_limit_point(&self, eps: f64) -> Result<PointOutput> {
        let cfg = &self.cfg;
        let m = (1.0 / eps).round() as usize;
        let grid = TorusGrid::new(cfg.n, m)?;
        let energy = EnergySpec::GraphPDirichlet { grid, p: cfg.p }.build()?;
        let u0 = connect::recovery_sequence(
            &connect::RecoveryKind::Graph {
                grid,
                schedule: cfg.delta,
            },
            connect::RecoveryTarget::Profile(&cfg.initial_data),
        )?;
        let connector = graph_p1_connector(&grid, self.resolution)?;
        match &self.reference {
            Reference::CosineDecay {
                space,
                amplitude,
                samples,
            } => {
                let (traj, iters) = run_flow(energy, u0, cfg)?;
                let reference = AnalyticFlow::new(Arc::clone(space), cfg.horizon, |t| {
                    let f = amplitude * (-4.0 * PI * PI * t).exp();
                    samples.iter().map(|s| f * s).collect()
                });
                let dist = flow_distance(&connector, &traj, &reference, 4 * cfg.steps)?;
                let op = operator_norm_estimate(&connector, NORM_ITERS)?;
                Ok(PointOutput {
                    row: SweepRow {
                        param: eps,
                        sup_state_error: Some(dist.sup_state_error),
                        sup_norm_error: Some(dist.sup_norm_error),
                        op_norm: Some(op.norm),
                        mm_steps: Some(traj.steps()),
                        prox_iters: Some(iters),
                        ..SweepRow::default()
                    },
                    trajectory: Some(traj),
                })
            }
            _ => self.flow_point(eps, energy, u0, &connector),
        }
    }

    fn mosco_point(&self, param: f64) -> Result<PointOutput> {
        let cfg = &self.cfg;
        let limit = match &self.reference {
            Reference::Limit(l) => l,
            _ => unreachable!(),
        };
        let (energy, w_eps, connector) = match cfg.family {
            Family::Graph => {
                let m = (1.0 / param).round() as usize;
                let grid = TorusGrid::new(cfg.n, m)?;
                let e = EnergySpec::GraphPDirichlet { grid, p: cfg.p }.build()?;
                let w = connect::graph_recovery(&grid, &cfg.initial_data, cfg.delta)?;
                (e, w, graph_p1_connector(&grid, self.resolution)?)
            }
            Family::Thin => {
                let slab = thin_slab(cfg, param)?;
                let e = EnergySpec::ThinSlab2D(slab.clone()).build()?;
                let w = connect::thin_recovery(&slab, &limit.values)?;
                (e, w, vertical_average_connector(&slab)?)
            }
            Family::BoundaryLayer => {
                let e = EnergySpec::BoundaryLayer1D {
                    cells: cfg.cells,
                    eps: param,
                    p: cfg.p,
                }
                .build()?;
                let w = connect::boundary_layer_energy_recovery(
                    cfg.cells,
                    param,
                    &limit.values.values()[..=cfg.cells],
                )?;
                (e, w, boundary_layer_connector(cfg.cells, param)?)
            }
            Family::DynamicBc => {
                let e = EnergySpec::DynamicBC1D {
                    cells: cfg.cells,
                    p: cfg.p,
                    tau: param,
                }
                .build()?;
                let w = match cfg.tau_mode {
                    TauMode::ToNeumann => {
                        connect::dynamic_bc_trace_lift(cfg.cells, param, limit.values.values())?
                    }
                    TauMode::ToDirichlet => {
                        connect::dynamic_bc_zero_lift(cfg.cells, param, limit.values.values())?
                    }
                };
                (
                    e,
                    w,
                    tau_projection_connector(cfg.cells, param, cfg.tau_mode)?,
                )
            }
        };
        let e_w = energy
            .eval(&w_eps)?
            .finite()
            .ok_or_else(|| invalid("recovery sequence outside the energy domain"))?;
        let h4 = recovery_errors(&connector, &w_eps, e_w, limit)?;
        let (j, cert) = prox(&energy, &w_eps, cfg.resolvent_lambda, &cfg.prox)?;
        let e_j = energy.eval(&j)?.expect_finite("resolvent");
        let res = recovery_errors(
            &connector,
            &j,
            e_j,
            self.limit_resolvent.as_ref().expect("resolvent"),
        )?;
        let op = operator_norm_estimate(&connector, NORM_ITERS)?;
        let defect = lstar_defect(&connector, &w_eps)?;
        Ok(PointOutput {
            row: SweepRow {
                param,
                op_norm: Some(op.norm),
                h4: Some(h4),
                resolvent: Some(res),
                lstar_defect: Some(defect),
                prox_iters: Some(cert.iterations),
                ..SweepRow::default()
            },
            trajectory: None,
        })
    }

    fn prox_bench_point(&self, eps: f64) -> Result<PointOutput> {
        let cfg = &self.cfg;
        let m = (1.0 / eps).round() as usize;
        let grid = TorusGrid::new(cfg.n, m)?;
        let energy = EnergySpec::GraphPDirichlet { grid, p: cfg.p }.build()?;
        let mut rng = SplitMix64::new(cfg.seed ^ (m as u64));
        let w = energy.space().vector(rng.signed_vec(grid.node_count()))?;
        let (_, cert) = prox(&energy, &w, cfg.resolvent_lambda, &cfg.prox)?;
        Ok(PointOutput {
            row: SweepRow {
                param: eps,
                prox_iters: Some(cert.iterations),
                ..SweepRow::default()
            },
            trajectory: None,
        })
    }

    pub fn finish(&self, outputs: Vec<PointOutput>) -> SweepReport {
        let mut rows = Vec::with_capacity(outputs.len());
        let mut trajectories = Vec::new();
        for o in outputs {
            if let Some(t) = o.trajectory {
                trajectories.push((o.row.param, t));
            }
            rows.push(o.row);
        }
        SweepReport {
            experiment: self.cfg.experiment,
            param_name: self.param_name(),
            rows,
            trajectories,
        }
    }
}

/// Runs every point in order on the calling thread.
pub fn run_sequential(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let plan = Plan::new(cfg)?;
    let outputs = (0..plan.params().len())
        .map(|i| plan.run_point(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(plan.finish(outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.eps_list = vec![1.0 / 4.0, 1.0 / 8.0];
        c.tau_list = vec![1.0, 0.1];
        c.horizon = 0.02;
        c.steps = 10;
        c.cells = 16;
        c.layers = 3;
        c
    }

    #[test]
    fn every_family_runs() {
        for kind in [
            ExperimentKind::GraphLimit,
            ExperimentKind::ThinDomain,
            ExperimentKind::BoundaryLayer,
            ExperimentKind::DynamicBc,
            ExperimentKind::MoscoCheck,
            ExperimentKind::ProxBench,
        ] {
            let r = run_sequential(&small(kind)).unwrap();
            assert_eq!(r.rows.len(), 2, "{kind}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = run_sequential(&small(ExperimentKind::MoscoCheck)).unwrap();
        let csv = r.to_csv();
        let (exp, name, rows) = parse_csv(&csv).unwrap();
        let again = SweepReport {
            experiment: exp.parse().unwrap(),
            param_name: if name == "eps" { "eps" } else { "tau" },
            rows,
            trajectories: Vec::new(),
        };
        assert_eq!(again.to_csv(), csv);
    }

    #[test]
    fn validation() {
        let mut c = small(ExperimentKind::GraphLimit);
        c.eps_list.clear();
        assert!(Plan::new(&c).is_err());
        c.eps_list = vec![0.3];
        assert!(Plan::new(&c).is_err());
        c.eps_list = vec![0.125, 0.25];
        assert!(Plan::new(&c).is_err());
        let mut b = small(ExperimentKind::BoundaryLayer);
        b.eps_list = vec![0.1];
        assert!(Plan::new(&b).is_err());
    }
}
