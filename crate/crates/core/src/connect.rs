//! Connecting operators `L: X_ε → X_0`, their adjoints, recovery sequences and
//! the Mosco diagnostics built on them.

use std::sync::Arc;

use crate::energies::{self, layer_cells, Boundary, EnergySpec, ThinSlab};
use crate::error::{invalid, Result};
use crate::numerics::{power_iteration, weighted_norm};
use crate::profiles::{signed_unit_at, Profile};
use crate::simplex::{self, TorusGrid};
use crate::space::{check_space, StateVector, WeightedSpace};

/// Sparse linear map between weighted spaces. The adjoint is `W_s⁻¹ Aᵀ W_t`.
#[derive(Debug, Clone)]
pub struct LinearConnector {
    source: Arc<WeightedSpace>,
    target: Arc<WeightedSpace>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    label: String,
}

impl LinearConnector {
    pub fn from_rows(
        label: impl Into<String>,
        source: Arc<WeightedSpace>,
        target: Arc<WeightedSpace>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if rows.len() != target.dim() {
            return Err(invalid("connector needs one row per target coordinate"));
        }
        let mut cols = vec![Vec::new(); source.dim()];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                if j >= source.dim() || !a.is_finite() {
                    return Err(invalid(format!("bad connector entry ({i}, {j}, {a})")));
                }
                cols[j].push((i, a));
            }
        }
        Ok(Self {
            source,
            target,
            rows,
            cols,
            label: label.into(),
        })
    }

    pub fn identity(space: Arc<WeightedSpace>) -> Self {
        let rows = (0..space.dim()).map(|i| vec![(i, 1.0)]).collect();
        Self::from_rows("identity", Arc::clone(&space), space, rows).expect("valid")
    }

    pub fn zero(source: Arc<WeightedSpace>, target: Arc<WeightedSpace>) -> Self {
        let rows = vec![Vec::new(); target.dim()];
        Self::from_rows("zero", source, target, rows).expect("valid")
    }

    pub fn source(&self) -> &Arc<WeightedSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<WeightedSpace> {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn adjoint_values(&self, y: &[f64]) -> Vec<f64> {
        let wt = self.target.weights();
        let ws = self.source.weights();
        self.cols
            .iter()
            .zip(ws)
            .map(|(col, w)| col.iter().map(|&(i, a)| a * wt[i] * y[i]).sum::<f64>() / w)
            .collect()
    }

    pub fn apply(&self, u: &StateVector) -> Result<StateVector> {
        check_space(&self.source, u.space())?;
        StateVector::new(Arc::clone(&self.target), self.apply_values(u.values()))
    }

    pub fn adjoint_apply(&self, v: &StateVector) -> Result<StateVector> {
        check_space(&self.target, v.space())?;
        StateVector::new(Arc::clone(&self.source), self.adjoint_values(v.values()))
    }
}

/// Evaluation of the piecewise-affine interpolant at the nodes of a uniform
/// `resolution^n` grid, with lumped target weights `resolution^{-n}`.
pub fn graph_p1_connector(grid: &TorusGrid, resolution: usize) -> Result<LinearConnector> {
    if resolution % grid.m() != 0 {
        return Err(invalid(format!(
            "resolution {resolution} is not a multiple of m = {}",
            grid.m()
        )));
    }
    let fine = TorusGrid::new(grid.dim(), resolution)?;
    let target = Arc::new(sampling_space(grid.dim(), resolution)?);
    let rows = (0..fine.node_count())
        .map(|i| {
            let x = fine.node_position(i);
            let (s, bary) = simplex::locate(grid, &x);
            let verts = simplex::simplex_vertices(grid, &s);
            verts
                .into_iter()
                .zip(bary.lambdas)
                .filter(|(_, l)| *l != 0.0)
                .collect()
        })
        .collect();
    LinearConnector::from_rows(
        format!("graph-p1(m={},R={resolution})", grid.m()),
        Arc::new(energies::graph_space(grid)),
        target,
        rows,
    )
}

/// Lumped sampling space on the uniform `resolution^n` torus grid.
pub fn sampling_space(n: usize, resolution: usize) -> Result<WeightedSpace> {
    WeightedSpace::uniform(
        format!("sample(n={n},R={resolution})"),
        resolution.pow(n as u32),
        (resolution as f64).powi(-(n as i32)),
    )
}

/// Samples a torus function at the nodes of [`sampling_space`].
pub fn sample_torus(n: usize, resolution: usize, f: impl Fn(&[f64]) -> f64) -> Result<StateVector> {
    let space = Arc::new(sampling_space(n, resolution)?);
    let grid = TorusGrid::new(n, resolution)?;
    let vals = (0..grid.node_count())
        .map(|i| f(&grid.node_position(i)))
        .collect();
    space.vector(vals)
}

/// Equal-weight mean over the vertical layers of each column.
pub fn vertical_average_connector(slab: &ThinSlab) -> Result<LinearConnector> {
    let source = Arc::new(EnergySpec::ThinSlab2D(slab.clone()).space()?);
    let target = Arc::new(slab.limit_spec().space()?);
    let c = 1.0 / slab.layers as f64;
    let rows = (0..=slab.cells_x)
        .map(|i| (0..slab.layers).map(|j| (slab.node(i, j), c)).collect())
        .collect();
    LinearConnector::from_rows("vertical-average", source, target, rows)
}

/// `w ↦ (w, m_ε^- w, m_ε^+ w)` into the dynamic boundary space with `τ = 1`;
/// the layer means use the trapezoid rule on the P1 function.
pub fn boundary_layer_connector(cells: usize, eps: f64) -> Result<LinearConnector> {
    let k = layer_cells(cells, eps)?;
    let source = Arc::new(EnergySpec::BoundaryLayer1D { cells, eps, p: 2.0 }.space()?);
    let target = Arc::new(energies::dynamic_bc_space(cells, 1.0)?);
    let h = 1.0 / cells as f64;
    let mut rows: Vec<Vec<(usize, f64)>> = (0..=cells).map(|i| vec![(i, 1.0)]).collect();
    let layer = |nodes: Vec<usize>| -> Vec<(usize, f64)> {
        let last = nodes.len() - 1;
        nodes
            .into_iter()
            .enumerate()
            .map(|(r, i)| {
                (
                    i,
                    if r == 0 || r == last {
                        0.5 * h / eps
                    } else {
                        h / eps
                    },
                )
            })
            .collect()
    };
    rows.push(layer((0..=k).collect()));
    rows.push(layer((cells - k..=cells).collect()));
    LinearConnector::from_rows(format!("layer-mean(eps={eps})"), source, target, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMode {
    ToNeumann,
    ToDirichlet,
}

/// `(u, v) ↦ u` from the dynamic boundary space into `L²(0,1)`.
pub fn tau_projection_connector(cells: usize, tau: f64, _mode: TauMode) -> Result<LinearConnector> {
    let source = Arc::new(energies::dynamic_bc_space(cells, tau)?);
    let target = Arc::new(energies::interval_space(cells)?);
    let rows = (0..=cells).map(|i| vec![(i, 1.0)]).collect();
    LinearConnector::from_rows(format!("tau-projection(tau={tau})"), source, target, rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Lower bound on `‖L‖`, nondecreasing in the iteration count.
    pub norm: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on `L*L` in the source inner product.
pub fn operator_norm_estimate(c: &LinearConnector, iters: usize) -> Result<NormEstimate> {
    if iters == 0 {
        return Err(invalid("iters must be >= 1"));
    }
    let dim = c.source().dim();
    let start: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * signed_unit_at(0x5EED, i as u64))
        .collect();
    let est = power_iteration(
        |v, out| {
            let a = c.adjoint_values(&c.apply_values(v));
            out.copy_from_slice(&a);
        },
        c.source().weights(),
        &start,
        iters,
    );
    Ok(NormEstimate {
        norm: est.eigenvalue.max(0.0).sqrt(),
        residual: est.residual,
        iterations: est.iterations,
    })
}

/// `‖L*L w - w‖` in the source space.
pub fn lstar_defect(c: &LinearConnector, w: &StateVector) -> Result<f64> {
    check_space(c.source(), w.space())?;
    let back = c.adjoint_values(&c.apply_values(w.values()));
    let d: Vec<f64> = back.iter().zip(w.values()).map(|(a, b)| a - b).collect();
    Ok(weighted_norm(c.source().weights(), &d))
}

/// Mollification width schedule `δ(ε)` for graph recovery sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSchedule {
    /// `δ = c·ε^a`.
    Power { coef: f64, exponent: f64 },
    /// No mollification: sample the profile directly.
    None,
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        DeltaSchedule::Power {
            coef: 1.0,
            exponent: 0.5,
        }
    }
}

impl DeltaSchedule {
    pub fn delta(&self, eps: f64) -> Option<f64> {
        match *self {
            DeltaSchedule::Power { coef, exponent } => Some(coef * eps.powf(exponent)),
            DeltaSchedule::None => None,
        }
    }
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Product-bump mollification `ρ_δ * f` at `x`; the kernel is normalized by the
/// same midpoint rule that integrates it.
pub fn mollify_torus(f: &dyn Fn(&[f64]) -> f64, x: &[f64], delta: f64) -> f64 {
    let n = x.len();
    let q: usize = match n {
        1 => 64,
        2 => 16,
        _ => 6,
    };
    let nodes: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let t = -1.0 + (2.0 * i as f64 + 1.0) / q as f64;
            (t * delta, bump(t))
        })
        .collect();
    let norm1: f64 = nodes.iter().map(|n| n.1).sum();
    let total = q.pow(n as u32);
    let mut acc = 0.0;
    let mut y = vec![0.0; n];
    for idx in 0..total {
        let mut r = idx;
        let mut wgt = 1.0;
        for k in (0..n).rev() {
            let (off, w) = nodes[r % q];
            y[k] = x[k] - off;
            wgt *= w / norm1;
            r /= q;
        }
        acc += wgt * f(&y);
    }
    acc
}

/// Graph recovery sequence: `ρ_δ * w` sampled at the graph nodes.
pub fn graph_recovery(
    grid: &TorusGrid,
    profile: &Profile,
    schedule: DeltaSchedule,
) -> Result<StateVector> {
    let space = Arc::new(energies::graph_space(grid));
    let f = |x: &[f64]| profile.torus_value(x);
    let vals = (0..grid.node_count())
        .map(|i| {
            let x = grid.node_position(i);
            match schedule.delta(grid.eps()) {
                Some(d) => mollify_torus(&f, &x, d),
                None => f(&x),
            }
        })
        .collect();
    space.vector(vals)
}

/// Constant vertical extension of a horizontal profile.
pub fn thin_recovery(slab: &ThinSlab, w: &StateVector) -> Result<StateVector> {
    let target = slab.limit_spec().space()?;
    check_space(&target, w.space())?;
    let space = Arc::new(EnergySpec::ThinSlab2D(slab.clone()).space()?);
    let vals = w
        .values()
        .iter()
        .flat_map(|&v| std::iter::repeat(v).take(slab.layers))
        .collect();
    space.vector(vals)
}

/// Space recovery for the layer: `u` inside, the boundary values `v_∓` on the collars.
pub fn boundary_layer_space_recovery(
    cells: usize,
    eps: f64,
    target: &StateVector,
) -> Result<StateVector> {
    let k = layer_cells(cells, eps)?;
    let space = Arc::new(EnergySpec::BoundaryLayer1D { cells, eps, p: 2.0 }.space()?);
    let x = target.values();
    if x.len() != cells + 3 {
        return Err(invalid("target must live in the dynamic boundary space"));
    }
    let vals = (0..=cells)
        .map(|i| {
            if i < k {
                x[cells + 1]
            } else if i > cells - k {
                x[cells + 2]
            } else {
                x[i]
            }
        })
        .collect();
    space.vector(vals)
}

/// Energy recovery for the layer: the same nodal function `u`.
pub fn boundary_layer_energy_recovery(cells: usize, eps: f64, u: &[f64]) -> Result<StateVector> {
    let space = Arc::new(EnergySpec::BoundaryLayer1D { cells, eps, p: 2.0 }.space()?);
    space.vector(u.to_vec())
}

/// `(u, γu)` in the space with boundary weight `τ`.
pub fn dynamic_bc_trace_lift(cells: usize, tau: f64, u: &[f64]) -> Result<StateVector> {
    let space = Arc::new(energies::dynamic_bc_space(cells, tau)?);
    let mut v = u.to_vec();
    v.push(u[0]);
    v.push(u[cells]);
    space.vector(v)
}

/// `(u, 0)` in the space with boundary weight `τ`.
pub fn dynamic_bc_zero_lift(cells: usize, tau: f64, u: &[f64]) -> Result<StateVector> {
    let space = Arc::new(energies::dynamic_bc_space(cells, tau)?);
    let mut v = u.to_vec();
    v.extend([0.0, 0.0]);
    space.vector(v)
}

/// Which recovery construction to use.
#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryKind {
    Graph {
        grid: TorusGrid,
        schedule: DeltaSchedule,
    },
    Thin(ThinSlab),
    BoundaryLayerSpace {
        cells: usize,
        eps: f64,
    },
    BoundaryLayerEnergy {
        cells: usize,
        eps: f64,
    },
    TauToNeumann {
        cells: usize,
        tau: f64,
    },
    TauToDirichlet {
        cells: usize,
        tau: f64,
    },
}

/// Limit data for [`recovery_sequence`]: the profile for the graph family, a state otherwise.
pub enum RecoveryTarget<'a> {
    Profile(&'a Profile),
    State(&'a StateVector),
}

pub fn recovery_sequence(kind: &RecoveryKind, target: RecoveryTarget<'_>) -> Result<StateVector> {
    match (kind, target) {
        (RecoveryKind::Graph { grid, schedule }, RecoveryTarget::Profile(p)) => {
            graph_recovery(grid, p, *schedule)
        }
        (RecoveryKind::Thin(slab), RecoveryTarget::State(w)) => thin_recovery(slab, w),
        (RecoveryKind::BoundaryLayerSpace { cells, eps }, RecoveryTarget::State(w)) => {
            boundary_layer_space_recovery(*cells, *eps, w)
        }
        (RecoveryKind::BoundaryLayerEnergy { cells, eps }, RecoveryTarget::State(w)) => {
            boundary_layer_energy_recovery(*cells, *eps, &w.values()[..=*cells])
        }
        (RecoveryKind::TauToNeumann { cells, tau }, RecoveryTarget::State(w)) => {
            dynamic_bc_trace_lift(*cells, *tau, w.values())
        }
        (RecoveryKind::TauToDirichlet { cells, tau }, RecoveryTarget::State(w)) => {
            dynamic_bc_zero_lift(*cells, *tau, w.values())
        }
        _ => Err(invalid("recovery target does not fit the recovery kind")),
    }
}

/// `(‖L w^ε - w‖, |‖w^ε‖ - ‖w‖|, |E_ε(w^ε) - E_0(w)|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryErrors {
    pub state: f64,
    pub norm: f64,
    pub energy: f64,
}

/// Limit-side data of a recovery or resolvent comparison.
#[derive(Debug, Clone)]
pub struct LimitPoint {
    /// `w` as represented in the target space of the connector.
    pub values: StateVector,
    /// `‖w‖_{X_0}`.
    pub norm: f64,
    /// `E_0(w)`.
    pub energy: f64,
}

impl LimitPoint {
    /// Norm and energy taken from the discrete representation itself.
    pub fn discrete(values: StateVector, energy: f64) -> Self {
        let norm = values.norm();
        Self {
            values,
            norm,
            energy,
        }
    }
}

pub fn recovery_errors(
    connector: &LinearConnector,
    w_eps: &StateVector,
    energy_eps: f64,
    limit: &LimitPoint,
) -> Result<RecoveryErrors> {
    let lw = connector.apply(w_eps)?;
    Ok(RecoveryErrors {
        state: lw.distance(&limit.values)?,
        norm: (w_eps.norm() - limit.norm).abs(),
        energy: (energy_eps - limit.energy).abs(),
    })
}

/// One row of the Mosco diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MoscoRow {
    pub param: f64,
    pub op_norm: Option<f64>,
    pub h4: Option<RecoveryErrors>,
    pub resolvent: Option<RecoveryErrors>,
    pub lstar_defect: Option<f64>,
}

impl MoscoRow {
    /// `‖L‖ - 1`.
    pub fn h1_margin(&self) -> Option<f64> {
        self.op_norm.map(|n| n - 1.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MoscoReport {
    pub rows: Vec<MoscoRow>,
}

/// Strict decrease, where a series that is identically zero (to 1e-14) counts
/// as exact recovery and passes.
pub fn strictly_decreasing(xs: &[f64]) -> bool {
    if xs.iter().all(|x| x.abs() <= 1e-14) {
        return true;
    }
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

impl MoscoReport {
    fn series(&self, f: impl Fn(&MoscoRow) -> Option<f64>) -> Option<Vec<f64>> {
        self.rows.iter().map(f).collect()
    }

    pub fn h4_decreasing(&self) -> Option<bool> {
        let s = self.series(|r| r.h4.map(|e| e.state))?;
        let n = self.series(|r| r.h4.map(|e| e.norm))?;
        let e = self.series(|r| r.h4.map(|e| e.energy))?;
        Some(strictly_decreasing(&s) && strictly_decreasing(&n) && strictly_decreasing(&e))
    }

    pub fn resolvent_decreasing(&self) -> Option<bool> {
        let s = self.series(|r| r.resolvent.map(|e| e.state))?;
        let n = self.series(|r| r.resolvent.map(|e| e.norm))?;
        let e = self.series(|r| r.resolvent.map(|e| e.energy))?;
        Some(strictly_decreasing(&s) && strictly_decreasing(&n) && strictly_decreasing(&e))
    }

    pub fn lstar_decreasing(&self) -> Option<bool> {
        Some(strictly_decreasing(&self.series(|r| r.lstar_defect)?))
    }

    pub fn max_op_norm(&self) -> Option<f64> {
        self.series(|r| r.op_norm)
            .map(|v| v.into_iter().fold(0.0, f64::max))
    }
}

/// One level of a resolvent comparison.
pub struct ResolventCase<'a> {
    pub param: f64,
    pub energy: &'a energies::Energy,
    pub connector: &'a LinearConnector,
    pub input: StateVector,
}

/// `J_λ^ε(w_ε)` against the limit resolvent `J_λ^0(w)` for each case, in order.
pub fn resolvent_convergence_check(
    cases: &[ResolventCase<'_>],
    lambda: f64,
    limit: &LimitPoint,
    opts: &crate::prox::ProxOptions,
) -> Result<Vec<(f64, RecoveryErrors)>> {
    cases
        .iter()
        .map(|c| {
            let (j, _) = crate::prox::prox(c.energy, &c.input, lambda, opts)?;
            let e = c
                .energy
                .eval(&j)?
                .finite()
                .ok_or_else(|| invalid("resolvent left the energy domain"))?;
            Ok((c.param, recovery_errors(c.connector, &j, e, limit)?))
        })
        .collect()
}

/// The `(1/p)∫|u'|^p` energy of the dynamic-BC family's limits.
pub fn interval_limit_spec(cells: usize, p: f64, mode: TauMode) -> EnergySpec {
    EnergySpec::Interval1D {
        cells,
        p,
        boundary: match mode {
            TauMode::ToNeumann => Boundary::Neumann,
            TauMode::ToDirichlet => Boundary::Dirichlet,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::weighted_dot;
    use crate::profiles::SplitMix64;

    fn adjoint_ok(c: &LinearConnector, seed: u64) {
        let mut g = SplitMix64::new(seed);
        for _ in 0..20 {
            let w = g.signed_vec(c.source().dim());
            let v = g.signed_vec(c.target().dim());
            let lhs = weighted_dot(c.target().weights(), &c.apply_values(&w), &v);
            let rhs = weighted_dot(c.source().weights(), &w, &c.adjoint_values(&v));
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()),
                "{}",
                c.label()
            );
        }
    }

    #[test]
    fn graph_connector_reproduces_constants_and_is_contractive() {
        let grid = TorusGrid::new(2, 4).unwrap();
        let c = graph_p1_connector(&grid, 12).unwrap();
        let ones = Arc::new(energies::graph_space(&grid)).constant(2.0);
        assert!(c
            .apply(&ones)
            .unwrap()
            .values()
            .iter()
            .all(|v| (v - 2.0).abs() < 1e-14));
        adjoint_ok(&c, 1);
        let est = operator_norm_estimate(&c, 200).unwrap();
        assert!(est.norm <= 1.0 + 1e-10 && est.norm > 0.99, "{est:?}");
        assert!(graph_p1_connector(&grid, 10).is_err());
    }

    #[test]
    fn identity_and_zero() {
        let s = Arc::new(WeightedSpace::new("s", vec![0.5, 2.0, 1.0]).unwrap());
        let id = LinearConnector::identity(Arc::clone(&s));
        assert!((operator_norm_estimate(&id, 5).unwrap().norm - 1.0).abs() < 1e-10);
        let z = LinearConnector::zero(Arc::clone(&s), Arc::clone(&s));
        assert_eq!(operator_norm_estimate(&z, 5).unwrap().norm, 0.0);
        let w = s.vector(vec![1.0, 0.0, 0.0]).unwrap().scale(2f64.sqrt());
        assert!((lstar_defect(&z, &w).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lstar_defect(&id, &w).unwrap(), 0.0);
    }

    #[test]
    fn layer_connector_means() {
        let c = boundary_layer_connector(16, 0.25).unwrap();
        adjoint_ok(&c, 2);
        let src = Arc::clone(c.source());
        let out = c.apply(&src.constant(3.0)).unwrap();
        assert!(out.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
        assert!(operator_norm_estimate(&c, 300).unwrap().norm <= 1.0 + 1e-10);
        assert!(boundary_layer_connector(16, 0.3).is_err());
    }

    #[test]
    fn tau_projection_drops_boundary() {
        let c = tau_projection_connector(4, 0.1, TauMode::ToNeumann).unwrap();
        adjoint_ok(&c, 3);
        let x = c
            .source()
            .vector(vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0, -9.0])
            .unwrap();
        assert_eq!(c.apply(&x).unwrap().values(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let back = c.adjoint_apply(&c.apply(&x).unwrap()).unwrap();
        assert_eq!(&back.values()[5..], &[0.0, 0.0]);
    }

    #[test]
    fn thin_average_of_extension_is_identity() {
        let slab = ThinSlab::from_profiles(8, 3, 0.1, 2.0, |x| 0.1 * x, |x| 1.0 + x * x).unwrap();
        let c = vertical_average_connector(&slab).unwrap();
        adjoint_ok(&c, 4);
        let w = Arc::clone(c.target())
            .vector((0..9).map(|i| (i as f64).sqrt()).collect())
            .unwrap();
        let ext = thin_recovery(&slab, &w).unwrap();
        let back = c.apply(&ext).unwrap();
        for (a, b) in back.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mollified_cosine_is_scaled_cosine() {
        let f = |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).cos();
        let a = mollify_torus(&f, &[0.0], 0.2);
        let b = mollify_torus(&f, &[0.125], 0.2);
        assert!(a < 1.0 && a > 0.5);
        assert!((b - a * (std::f64::consts::PI / 4.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn decreasing_helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
        assert!(strictly_decreasing(&[0.0, 0.0, 0.0]));
    }
}
