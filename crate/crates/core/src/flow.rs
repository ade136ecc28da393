//! Minimizing movements `u_k = J_{T/N}(u_{k-1})`, trajectories and trajectory metrics.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::connect::LinearConnector;
use crate::energies::{Energy, EnergyValue};
use crate::error::{invalid, Error, Result};
use crate::numerics::weighted_norm;
use crate::prox::{ProxOptions, ProxSolver, WarmStart};
use crate::space::{check_space, StateVector, WeightedSpace};

/// Piecewise-affine path `t ↦ u(t)` through the states at `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    space: Arc<WeightedSpace>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(space: Arc<WeightedSpace>, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(invalid("trajectory needs one state per time, at least one"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] != 0.0 {
            return Err(invalid(
                "trajectory times must start at 0 and increase strictly",
            ));
        }
        for s in &states {
            if s.len() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: s.len(),
                });
            }
        }
        Ok(Self {
            space,
            times,
            states,
        })
    }

    /// Trajectory sitting at `u` on `[0, horizon]`.
    pub fn constant(u: &StateVector, horizon: f64) -> Result<Self> {
        Self::new(
            Arc::clone(u.space()),
            vec![0.0, horizon],
            vec![u.values().to_vec(), u.values().to_vec()],
        )
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `N` (states minus one).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn values(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn state(&self, k: usize) -> StateVector {
        StateVector::new(Arc::clone(&self.space), self.states[k].clone())
            .expect("stored states are valid")
    }

    pub fn last(&self) -> StateVector {
        self.state(self.steps())
    }

    /// Affine interpolation; times outside `[0, T]` are clamped.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.states[0].clone();
        }
        if k >= self.times.len() {
            return self.states[self.times.len() - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        self.states[k - 1]
            .iter()
            .zip(&self.states[k])
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect()
    }

    pub fn state_at(&self, t: f64) -> StateVector {
        StateVector::new(Arc::clone(&self.space), self.values_at(t))
            .expect("interpolated states are finite")
    }

    /// Columnar text: a header with space label, `N` and `T`, then rows `k t_k values...`.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# space={} dim={} N={} T={}",
            self.space.label(),
            self.space.dim(),
            self.steps(),
            self.horizon()
        )?;
        let mut line = String::new();
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            line.clear();
            line.push_str(&format!("{k} {t}"));
            for v in s {
                line.push(' ');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parses [`Trajectory::write_text`] output. The space must match the header label.
    pub fn read_text<R: BufRead>(input: R, space: Arc<WeightedSpace>) -> Result<Self> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| invalid(format!("read error: {e}")))?;
            if let Some(header) = line.strip_prefix('#') {
                let label = header
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("space="))
                    .ok_or_else(|| invalid("trajectory header lacks space="))?;
                if label != space.label() {
                    return Err(Error::SpaceMismatch {
                        expected: space.label().to_string(),
                        found: label.to_string(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| invalid(format!("line {}: missing field", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("line {}: {e}", lineno + 1)))
            };
            let _k = parse(fields.next())?;
            times.push(parse(fields.next())?);
            states.push(fields.map(|f| parse(Some(f))).collect::<Result<Vec<_>>>()?);
        }
        Self::new(space, times, states)
    }
}

/// Anything that can be sampled in time in a fixed space.
pub trait TimeSeries {
    fn space(&self) -> &Arc<WeightedSpace>;
    fn horizon(&self) -> f64;
    /// Times at which the path may have kinks.
    fn breakpoints(&self) -> &[f64];
    fn values_at(&self, t: f64) -> Vec<f64>;
}

impl TimeSeries for Trajectory {
    fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    fn horizon(&self) -> f64 {
        Trajectory::horizon(self)
    }

    fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    fn values_at(&self, t: f64) -> Vec<f64> {
        Trajectory::values_at(self, t)
    }
}

/// Closed-form reference path.
pub struct AnalyticFlow<F> {
    space: Arc<WeightedSpace>,
    horizon: f64,
    f: F,
}

impl<F: Fn(f64) -> Vec<f64>> AnalyticFlow<F> {
    pub fn new(space: Arc<WeightedSpace>, horizon: f64, f: F) -> Self {
        Self { space, horizon, f }
    }
}

impl<F: Fn(f64) -> Vec<f64>> TimeSeries for AnalyticFlow<F> {
    fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    fn values_at(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }
}

#[derive(Debug, Clone)]
pub struct FlowRunSpec {
    pub energy: Energy,
    pub u0: StateVector,
    pub horizon: f64,
    pub steps: usize,
    pub prox: ProxOptions,
    /// Replace `u0` by `J_λ(u0)` before stepping.
    pub init_lambda: Option<f64>,
}

impl FlowRunSpec {
    pub fn new(energy: Energy, u0: StateVector, horizon: f64, steps: usize) -> Self {
        Self {
            energy,
            u0,
            horizon,
            steps,
            prox: ProxOptions::default(),
            init_lambda: None,
        }
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.steps == 0 {
            return Err(invalid("step count must be >= 1"));
        }
        if let Some(l) = self.init_lambda {
            if !(l > 0.0) {
                return Err(invalid(format!(
                    "initial regularization must be positive, got {l}"
                )));
            }
        }
        self.prox.validate()?;
        self.energy.check(&self.u0)
    }

    fn start(&self, solver: &ProxSolver) -> Result<StateVector> {
        match self.init_lambda {
            Some(l) => Ok(solver.solve(&self.u0, l, &self.prox, None)?.0),
            None => Ok(self.u0.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutput {
    pub trajectory: Trajectory,
    /// `E(u_k)` for `k = 0..=N`.
    pub energies: Vec<EnergyValue>,
    pub prox_iterations: usize,
    pub max_residual: f64,
}

/// A failed run: the states computed before the failing step, and the cause.
#[derive(Debug, Clone)]
pub struct FlowFailure {
    pub partial: Option<Trajectory>,
    pub error: Error,
}

impl fmt::Display for FlowFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for FlowFailure {}

impl From<FlowFailure> for Error {
    fn from(f: FlowFailure) -> Self {
        f.error
    }
}

impl From<Error> for FlowFailure {
    fn from(error: Error) -> Self {
        Self {
            partial: None,
            error,
        }
    }
}

/// `u_k = (J_{T/N})^k u_0` with warm starts, for `k = 0..=N`.
pub fn minimizing_movements(run: &FlowRunSpec) -> std::result::Result<FlowOutput, FlowFailure> {
    run.validate()?;
    let solver = ProxSolver::new(&run.energy, run.u0.space())?;
    let lambda = run.horizon / run.steps as f64;
    let u0 = run.start(&solver)?;
    let mut times = Vec::with_capacity(run.steps + 1);
    let mut states = Vec::with_capacity(run.steps + 1);
    let mut energies = Vec::with_capacity(run.steps + 1);
    times.push(0.0);
    energies.push(run.energy.eval(&u0)?);
    states.push(u0.values().to_vec());
    let mut current = u0;
    let mut warm = WarmStart::default();
    let mut iterations = 0;
    let mut max_residual: f64 = 0.0;
    for k in 1..=run.steps {
        warm.primal = Some(current.clone());
        match solver.solve(&current, lambda, &run.prox, Some(&warm)) {
            Ok((next, cert)) => {
                iterations += cert.iterations;
                max_residual = max_residual.max(cert.residual);
                warm = WarmStart::from_solution(&next, &cert);
                times.push(k as f64 * lambda);
                energies.push(run.energy.eval(&next)?);
                states.push(next.values().to_vec());
                current = next;
            }
            Err(e) => {
                let partial = Trajectory::new(Arc::clone(run.u0.space()), times, states).ok();
                return Err(FlowFailure {
                    partial,
                    error: Error::FlowAborted {
                        step: k,
                        source: Box::new(e),
                    },
                });
            }
        }
    }
    // the last time is set exactly to T
    *times.last_mut().unwrap() = run.horizon;
    Ok(FlowOutput {
        trajectory: Trajectory::new(Arc::clone(run.u0.space()), times, states)?,
        energies,
        prox_iterations: iterations,
        max_residual,
    })
}

/// `(J_{t/N})^N u_0`.
pub fn implicit_euler_chain(run: &FlowRunSpec, t: f64) -> Result<StateVector> {
    run.validate()?;
    if !(0.0..=run.horizon).contains(&t) {
        return Err(invalid(format!("time {t} outside [0, {}]", run.horizon)));
    }
    let solver = ProxSolver::new(&run.energy, run.u0.space())?;
    let mut u = run.start(&solver)?;
    if t == 0.0 {
        return Ok(u);
    }
    let lambda = t / run.steps as f64;
    let mut warm = WarmStart::default();
    for k in 1..=run.steps {
        warm.primal = Some(u.clone());
        let (next, cert) = solver
            .solve(&u, lambda, &run.prox, Some(&warm))
            .map_err(|e| Error::FlowAborted {
                step: k,
                source: Box::new(e),
            })?;
        warm = WarmStart::from_solution(&next, &cert);
        u = next;
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsvReport {
    pub steps: usize,
    pub reference_steps: usize,
    /// `max_t ‖u_ref(t) - u^N(t)‖²`.
    pub sup_error_sq: f64,
    /// `E(u_0)/N`.
    pub bound: f64,
    /// Budget for the reference's own error, `2 E(u_0)/N_ref`.
    pub reference_budget: f64,
    pub holds: bool,
}

/// Squared sup distance between two trajectories in the same space. Exact for
/// piecewise-affine paths: the squared norm of their difference is convex on each
/// interval between consecutive breakpoints of either path.
pub fn sup_distance_sq(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_space(a.space(), b.space())?;
    let times = merge_times(&[a.times(), b.times()], &[]);
    let w = a.space().weights();
    Ok(times
        .iter()
        .map(|&t| {
            let d: Vec<f64> = a
                .values_at(t)
                .iter()
                .zip(b.values_at(t))
                .map(|(x, y)| x - y)
                .collect();
            weighted_norm(w, &d).powi(2)
        })
        .fold(0.0, f64::max))
}

/// Checks `max_t ‖u(t) - u^N(t)‖² ≤ E(u_0)/N` against a refined reference.
pub fn nsv_bound_check(run: &FlowRunSpec, reference: &Trajectory) -> Result<NsvReport> {
    let approx = minimizing_movements(run)?.trajectory;
    nsv_compare(run, &approx, reference)
}

/// As [`nsv_bound_check`] with a precomputed `u^N`.
pub fn nsv_compare(
    run: &FlowRunSpec,
    approx: &Trajectory,
    reference: &Trajectory,
) -> Result<NsvReport> {
    let solver = ProxSolver::new(&run.energy, run.u0.space())?;
    let u0 = run.start(&solver)?;
    let e0 = run
        .energy
        .eval(&u0)?
        .finite()
        .ok_or_else(|| invalid("the error bound needs u0 in the energy domain"))?;
    let sup_error_sq = sup_distance_sq(approx, reference)?;
    let bound = e0 / approx.steps() as f64;
    let reference_budget = 2.0 * e0 / reference.steps() as f64;
    Ok(NsvReport {
        steps: approx.steps(),
        reference_steps: reference.steps(),
        sup_error_sq,
        bound,
        reference_budget,
        holds: sup_error_sq <= bound + reference_budget,
    })
}

/// `2 t N^{-1/2} ‖∂⁰E(u_0)‖` for smooth energies, where `∂⁰E = ∇E`.
pub fn crandall_liggett_bound(
    energy: &Energy,
    u0: &StateVector,
    t: f64,
    steps: usize,
) -> Result<f64> {
    let g = energy.gradient(u0)?;
    Ok(2.0 * t * g.norm() / (steps as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDistance {
    /// `sup_t ‖L u^ε(t) - u(t)‖_{X_0}`.
    pub sup_state_error: f64,
    /// `sup_t |‖u^ε(t)‖_{X_ε} - ‖u(t)‖_{X_0}|`.
    pub sup_norm_error: f64,
    pub samples: usize,
}

fn merge_times(lists: &[&[f64]], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = lists
        .iter()
        .flat_map(|l| l.iter().copied())
        .chain(extra.iter().copied())
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Compares `traj_eps`, mapped by `connector`, with a reference path in the target space.
/// Samples every breakpoint of both paths plus at least `4·max(N)` uniform times.
pub fn flow_distance(
    connector: &LinearConnector,
    traj_eps: &Trajectory,
    reference: &dyn TimeSeries,
    min_samples: usize,
) -> Result<FlowDistance> {
    check_space(connector.source(), traj_eps.space())?;
    check_space(connector.target(), reference.space())?;
    let horizon = traj_eps.horizon().min(reference.horizon());
    let uniform_count = min_samples.max(
        4 * traj_eps
            .steps()
            .max(reference.breakpoints().len().saturating_sub(1)),
    );
    let uniform: Vec<f64> = (0..=uniform_count)
        .map(|i| horizon * i as f64 / uniform_count as f64)
        .collect();
    let times: Vec<f64> = merge_times(&[traj_eps.times(), reference.breakpoints()], &uniform)
        .into_iter()
        .filter(|&t| t <= horizon)
        .collect();
    let ws = traj_eps.space().weights();
    let wt = reference.space().weights();
    let mut state: f64 = 0.0;
    let mut normerr: f64 = 0.0;
    for &t in &times {
        let u = traj_eps.values_at(t);
        let r = reference.values_at(t);
        let lu = connector.apply_values(&u);
        let d: Vec<f64> = lu.iter().zip(&r).map(|(a, b)| a - b).collect();
        state = state.max(weighted_norm(wt, &d));
        normerr = normerr.max((weighted_norm(ws, &u) - weighted_norm(wt, &r)).abs());
    }
    Ok(FlowDistance {
        sup_state_error: state,
        sup_norm_error: normerr,
        samples: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::EnergySpec;
    use crate::simplex::TorusGrid;

    fn unit_space(dim: usize) -> Arc<WeightedSpace> {
        Arc::new(WeightedSpace::uniform("unit", dim, 1.0).unwrap())
    }

    #[test]
    fn zero_energy_gives_constant_trajectory() {
        let s = unit_space(3);
        let u0 = s.vector(vec![1.0, 2.0, 3.0]).unwrap();
        let e = EnergySpec::Zero { dim: 3 }.build().unwrap();
        let out = minimizing_movements(&FlowRunSpec::new(e, u0.clone(), 1.0, 5)).unwrap();
        for k in 0..=5 {
            assert_eq!(out.trajectory.values(k), u0.values());
        }
    }

    #[test]
    fn quadratic_scalar_recursion() {
        let s = unit_space(2);
        let u0 = s.vector(vec![1.0, -2.0]).unwrap();
        let e = EnergySpec::HalfSquaredNorm { dim: 2 }.build().unwrap();
        let run = FlowRunSpec::new(e, u0.clone(), 1.0, 10);
        let out = minimizing_movements(&run).unwrap();
        for k in 0..=10 {
            let f = (1.1f64).powi(-(k as i32));
            assert!((out.trajectory.values(k)[1] + 2.0 * f).abs() < 1e-14);
        }
        let chain = implicit_euler_chain(&run, 0.5).unwrap();
        assert!((chain.values()[0] - (1.05f64).powi(-10)).abs() < 1e-14);
        assert_eq!(implicit_euler_chain(&run, 0.0).unwrap(), u0);
    }

    #[test]
    fn affine_interpolation_between_steps() {
        let s = unit_space(1);
        let t = Trajectory::new(
            s,
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0], vec![1.0], vec![3.0]],
        )
        .unwrap();
        assert_eq!(t.values_at(0.25), vec![0.5]);
        assert_eq!(t.values_at(0.75), vec![2.0]);
        assert_eq!(t.values_at(1.0), vec![3.0]);
        assert_eq!(t.values_at(2.0), vec![3.0]);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let s = Arc::new(WeightedSpace::uniform("rt", 2, 0.5).unwrap());
        let t = Trajectory::new(
            Arc::clone(&s),
            vec![0.0, 0.1, 0.30000000000000004],
            vec![
                vec![1.0 / 3.0, -2e-310],
                vec![std::f64::consts::PI, 1e300],
                vec![0.0, -0.0],
            ],
        )
        .unwrap();
        let back = Trajectory::read_text(t.to_text().as_bytes(), s).unwrap();
        assert_eq!(back.times(), t.times());
        for k in 0..3 {
            for (a, b) in back.values(k).iter().zip(t.values(k)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn energy_decreases_and_mass_is_conserved() {
        let grid = TorusGrid::new(1, 16).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let e = EnergySpec::GraphPDirichlet { grid, p }.build().unwrap();
            let u0 = e
                .space()
                .vector((0..16).map(|i| ((i * 5) % 7) as f64 / 7.0).collect())
                .unwrap();
            let out = minimizing_movements(&FlowRunSpec::new(e, u0.clone(), 0.05, 10)).unwrap();
            let vals: Vec<f64> = out.energies.iter().map(|v| v.finite().unwrap()).collect();
            // inexact prox: E(u_k+1) <= E(u_k) + gap / λ
            let slack = 1e-10 / (0.05 / 10.0);
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + slack), "p = {p}");
            let m = out.trajectory.last().weighted_mean();
            assert!((m - u0.weighted_mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn nsv_trivial_for_stationary_data() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 2.0 }
            .build()
            .unwrap();
        let u0 = e.space().constant(1.0);
        let run = FlowRunSpec::new(e, u0, 1.0, 4);
        let reference = minimizing_movements(&run.with_steps(256))
            .unwrap()
            .trajectory;
        let r = nsv_bound_check(&run, &reference).unwrap();
        assert_eq!(r.sup_error_sq, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let s = unit_space(1);
        let e = EnergySpec::Zero { dim: 1 }.build().unwrap();
        let run = FlowRunSpec::new(e, s.zeros(), 0.0, 3);
        assert!(minimizing_movements(&run).is_err());
        assert!(Trajectory::new(s, vec![0.0, 0.0], vec![vec![0.0], vec![0.0]]).is_err());
    }
}
