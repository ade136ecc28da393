//! Resolvents `J_λ(w) = argmin_v λE(v) + ½‖w - v‖²` with optimality certificates.
//!
//! All solvers work on the reduced coordinates of the compiled functional, where
//! the quadratic term becomes `½ Σ_r W_r (y_r - t_r)²` with `W_r` the summed
//! weights of the merged coordinates and `t` the weighted projection of `w`.

use std::cell::OnceCell;
use std::fmt;
use std::sync::Arc;

use crate::energies::{Energy, EnergySpec, Functional};
use crate::error::{invalid, Error, Result};
use crate::numerics::{dual_norm, pcg, power_iteration, CompensatedSum};
use crate::space::{check_space, StateVector, WeightedSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxMethod {
    Auto,
    Linear,
    Newton,
    DualProjectedGradient,
    /// Closed form (zero energy, quadratic shrink).
    Exact,
}

impl fmt::Display for ProxMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProxMethod::Auto => "auto",
            ProxMethod::Linear => "linear",
            ProxMethod::Newton => "newton",
            ProxMethod::DualProjectedGradient => "dual_projected_gradient",
            ProxMethod::Exact => "exact",
        })
    }
}

impl std::str::FromStr for ProxMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ProxMethod::Auto),
            "linear" => Ok(ProxMethod::Linear),
            "newton" => Ok(ProxMethod::Newton),
            "dual_projected_gradient" | "dual" => Ok(ProxMethod::DualProjectedGradient),
            other => Err(invalid(format!("unknown prox method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: ProxMethod,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            method: ProxMethod::Auto,
        }
    }
}

impl ProxOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxCertificate {
    /// `p > 1`: `‖λ∇E(v*) + v* - w‖` on the constraint set. `p = 1`: duality gap.
    pub residual: f64,
    pub iterations: usize,
    /// Inner linear-solver iterations (Newton / linear methods).
    pub inner_iterations: usize,
    pub method_used: ProxMethod,
    /// Edge dual variables `z`, `|z_e| ≤ 1`, for `p = 1`.
    pub dual: Option<Vec<f64>>,
}

/// Initial iterates for a prox solve.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub primal: Option<StateVector>,
    pub dual: Option<Vec<f64>>,
}

impl WarmStart {
    pub fn from_solution(v: &StateVector, cert: &ProxCertificate) -> Self {
        Self {
            primal: Some(v.clone()),
            dual: cert.dual.clone(),
        }
    }
}

/// Resolvent solver bound to an energy and a concrete state space. Caches the
/// reduced weights and the dual Lipschitz constant across calls.
pub struct ProxSolver<'a> {
    energy: &'a Energy,
    space: Arc<WeightedSpace>,
    reduced_weights: Vec<f64>,
    dual_lipschitz: OnceCell<f64>,
}

impl<'a> ProxSolver<'a> {
    pub fn new(energy: &'a Energy, space: &Arc<WeightedSpace>) -> Result<Self> {
        energy.check(&space.zeros())?;
        let reduced_weights = energy.functional().reduce_weights(space.weights());
        Ok(Self {
            energy,
            space: Arc::clone(space),
            reduced_weights,
            dual_lipschitz: OnceCell::new(),
        })
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    fn f(&self) -> &Functional {
        self.energy.functional()
    }

    pub fn solve(
        &self,
        w: &StateVector,
        lambda: f64,
        opts: &ProxOptions,
        warm: Option<&WarmStart>,
    ) -> Result<(StateVector, ProxCertificate)> {
        check_space(&self.space, w.space())?;
        opts.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "prox step lambda must be positive, got {lambda}"
            )));
        }
        let f = self.f();
        match self.energy.spec() {
            EnergySpec::Zero { .. } => {
                return Ok((w.clone(), exact_certificate()));
            }
            EnergySpec::HalfSquaredNorm { .. } => {
                return Ok((w.scale(1.0 / (1.0 + lambda)), exact_certificate()));
            }
            _ => {}
        }
        let method = match (opts.method, f.p) {
            (ProxMethod::Auto, p) if p == 1.0 => ProxMethod::DualProjectedGradient,
            (ProxMethod::Auto, p) if p == 2.0 => ProxMethod::Linear,
            (ProxMethod::Auto, _) => ProxMethod::Newton,
            (ProxMethod::Linear, p) if p != 2.0 => {
                return Err(Error::Unsupported(format!(
                    "linear prox needs p = 2, got p = {p}"
                )))
            }
            (ProxMethod::Newton, p) | (ProxMethod::Linear, p) if p <= 1.0 => {
                return Err(Error::Unsupported("Newton prox needs p > 1".into()))
            }
            (ProxMethod::DualProjectedGradient, p) if p != 1.0 => {
                return Err(Error::Unsupported(format!(
                    "dual prox needs p = 1, got p = {p}"
                )))
            }
            (ProxMethod::DualProjectedGradient, _) if !f.grads.is_empty() => {
                return Err(Error::Unsupported(
                    "dual prox on gradient-stencil energies".into(),
                ))
            }
            (m, _) => m,
        };
        let t = f.project(self.space.weights(), &self.reduced_weights, w.values());
        let result = match method {
            ProxMethod::DualProjectedGradient => {
                let z0 = warm.and_then(|ws| ws.dual.clone());
                self.solve_dual(&t, lambda, opts, z0)
            }
            _ => {
                let y0 = warm
                    .and_then(|ws| ws.primal.as_ref())
                    .map(|v| f.project(self.space.weights(), &self.reduced_weights, v.values()))
                    .unwrap_or_else(|| t.clone());
                if self.energy.is_translation_invariant() {
                    // solve around the mean of t so that tiny differences stay representable
                    let c = self.weighted_mean(&t);
                    let ts: Vec<f64> = t.iter().map(|x| x - c).collect();
                    let ys: Vec<f64> = y0.iter().map(|x| x - c).collect();
                    self.solve_newton(&ts, lambda, opts, ys, method)
                        .map(|(y, cert)| (y.into_iter().map(|x| x + c).collect(), cert))
                        .map_err(|e| match e {
                            Error::NonConvergence {
                                iterations,
                                residual,
                                tol,
                                best,
                            } => Error::NonConvergence {
                                iterations,
                                residual,
                                tol,
                                best: best.into_iter().map(|x| x + c).collect(),
                            },
                            other => other,
                        })
                } else {
                    self.solve_newton(&t, lambda, opts, y0, method)
                }
            }
        };
        match result {
            Ok((y, cert)) => Ok((
                StateVector::new(Arc::clone(&self.space), f.expand(&y))?,
                cert,
            )),
            Err(Error::NonConvergence {
                iterations,
                residual,
                tol,
                best,
            }) => Err(Error::NonConvergence {
                iterations,
                residual,
                tol,
                best: f.expand(&best),
            }),
            Err(e) => Err(e),
        }
    }

    fn objective(&self, y: &[f64], t: &[f64], lambda: f64) -> f64 {
        let w = &self.reduced_weights;
        let mut acc = CompensatedSum::new();
        acc.add(lambda * self.f().value(y, w));
        for i in 0..y.len() {
            let d = y[i] - t[i];
            acc.add(0.5 * w[i] * d * d);
        }
        acc.value()
    }

    fn objective_gradient(&self, y: &[f64], t: &[f64], lambda: f64) -> Vec<f64> {
        let w = &self.reduced_weights;
        let mut g = vec![0.0; y.len()];
        self.f().add_grad(y, w, &mut g);
        for i in 0..y.len() {
            g[i] = lambda * g[i] + w[i] * (y[i] - t[i]);
        }
        g
    }

    fn weighted_mean(&self, y: &[f64]) -> f64 {
        let w = &self.reduced_weights;
        let mut num = CompensatedSum::new();
        let mut den = CompensatedSum::new();
        for i in 0..y.len() {
            num.add(w[i] * y[i]);
            den.add(w[i]);
        }
        num.value() / den.value()
    }

    /// Shifts `y` by a constant so that `Σ W (y - t) = 0`; the exact minimizer
    /// of a translation-invariant energy satisfies this.
    fn restore_mean(&self, y: &mut [f64], t: &[f64]) {
        let w = &self.reduced_weights;
        let mut num = CompensatedSum::new();
        let mut den = CompensatedSum::new();
        for i in 0..y.len() {
            num.add(w[i] * (y[i] - t[i]));
            den.add(w[i]);
        }
        let c = num.value() / den.value();
        y.iter_mut().for_each(|v| *v -= c);
    }

    fn solve_newton(
        &self,
        t: &[f64],
        lambda: f64,
        opts: &ProxOptions,
        mut y: Vec<f64>,
        method: ProxMethod,
    ) -> Result<(Vec<f64>, ProxCertificate)> {
        let f = self.f();
        let w = &self.reduced_weights;
        let n = y.len();
        let shift: Vec<f64> = w.iter().map(|wi| wi * (1.0 + lambda * f.mass)).collect();
        let cg_cap = (20 * n).max(2000);
        let mut inner = 0;
        let mut g = self.objective_gradient(&y, t, lambda);
        let mut res = dual_norm(w, &g);
        let mut best_seen = res;
        let mut since_progress = 0;
        for it in 0..opts.max_iter {
            if res < 0.5 * best_seen {
                best_seen = res;
                since_progress = 0;
            } else {
                since_progress += 1;
            }
            if since_progress > 200 && res > opts.tol {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: res,
                    tol: opts.tol,
                    best: y,
                });
            }
            if res <= opts.tol {
                return Ok((
                    y,
                    ProxCertificate {
                        residual: res,
                        iterations: it,
                        inner_iterations: inner,
                        method_used: method,
                        dual: None,
                    },
                ));
            }
            let cache = f.hessian_at(&y);
            let mut diag = shift.clone();
            f.hessian_diag(&cache, &mut diag);
            for (d, s) in diag.iter_mut().zip(&shift) {
                *d = s + lambda * (*d - s);
            }
            let apply = |v: &[f64], out: &mut [f64]| {
                out.iter_mut().for_each(|o| *o = 0.0);
                f.hessian_apply(&cache, v, out);
                for i in 0..v.len() {
                    out[i] = lambda * out[i] + shift[i] * v[i];
                }
            };
            let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            let forcing = if f.p == 2.0 {
                0.25 * opts.tol
            } else {
                (res.sqrt().min(0.1) * res).max(0.25 * opts.tol)
            };
            let mut d = vec![0.0; n];
            let out = pcg(apply, &diag, &rhs, &mut d, w, forcing, cg_cap);
            inner += out.iterations;
            let mut slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                d = g.iter().zip(&diag).map(|(gi, di)| -gi / di).collect();
                slope = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            }
            let phi0 = self.objective(&y, t, lambda);
            let step =
                |a: f64| -> Vec<f64> { y.iter().zip(&d).map(|(yi, di)| yi + a * di).collect() };
            let mut alpha = 1.0;
            let mut accepted: Option<(Vec<f64>, f64)> = None;
            for _ in 0..60 {
                let trial = step(alpha);
                let phi1 = self.objective(&trial, t, lambda);
                if phi1 <= phi0 + 1e-4 * alpha * slope {
                    accepted = Some((trial, phi1));
                    break;
                }
                // below rounding of the objective, fall back to the residual
                if (phi1 - phi0).abs() <= 64.0 * f64::EPSILON * phi0.abs() {
                    let g1 = self.objective_gradient(&trial, t, lambda);
                    if dual_norm(w, &g1) < res {
                        accepted = Some((trial, phi1));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            // The Newton model misjudges the curvature of |d|^p away from p = 2
            // (overshoot for p < 2 near d = 0, undershoot when |d| grows), so
            // keep halving or doubling while the objective still improves.
            if let Some((_, mut best_phi)) = accepted.as_ref().map(|(v, p)| (v.clone(), *p)) {
                let mut improved = false;
                for factor in [0.5, 2.0] {
                    if improved || (factor > 1.0 && alpha < 1.0) {
                        continue;
                    }
                    let mut a = alpha;
                    for _ in 0..8 {
                        a *= factor;
                        let trial = step(a);
                        let phi1 = self.objective(&trial, t, lambda);
                        if phi1 < best_phi {
                            best_phi = phi1;
                            alpha = a;
                            accepted = Some((trial, phi1));
                            improved = true;
                        } else {
                            break;
                        }
                    }
                }
            }
            let accepted = accepted.map(|(v, _)| v);
            match accepted {
                Some(next) => {
                    y = next;
                    if self.energy.is_translation_invariant() {
                        self.restore_mean(&mut y, t);
                    }
                }
                None => {
                    return Err(Error::NonConvergence {
                        iterations: it + 1,
                        residual: res,
                        tol: opts.tol,
                        best: y,
                    })
                }
            }
            g = self.objective_gradient(&y, t, lambda);
            res = dual_norm(w, &g);
        }
        if res <= opts.tol {
            return Ok((
                y,
                ProxCertificate {
                    residual: res,
                    iterations: opts.max_iter,
                    inner_iterations: inner,
                    method_used: method,
                    dual: None,
                },
            ));
        }
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            residual: res,
            tol: opts.tol,
            best: y,
        })
    }

    /// Largest eigenvalue of `C B W⁻¹ Bᵀ C` on edge space, an upper bound
    /// used for the dual step `1/L`.
    fn dual_lipschitz(&self) -> f64 {
        *self.dual_lipschitz.get_or_init(|| {
            let f = self.f();
            let w = &self.reduced_weights;
            let ne = f.edges.len();
            if ne == 0 {
                return 0.0;
            }
            let n = w.len();
            // Gershgorin cap
            let mut s = vec![0.0; n];
            for e in &f.edges {
                s[e.a] += e.coef;
                if let Some(b) = e.b {
                    s[b] += e.coef;
                }
            }
            let gersh = f
                .edges
                .iter()
                .map(|e| {
                    let mut r = s[e.a] / w[e.a];
                    if let Some(b) = e.b {
                        r += s[b] / w[b];
                    }
                    e.coef * r
                })
                .fold(0.0, f64::max);
            let apply = |v: &[f64], out: &mut [f64]| {
                let mut q = vec![0.0; n];
                for (e, ve) in f.edges.iter().zip(v) {
                    let x = e.coef * ve;
                    q[e.a] += x;
                    if let Some(b) = e.b {
                        q[b] -= x;
                    }
                }
                for i in 0..n {
                    q[i] /= w[i];
                }
                for (e, o) in f.edges.iter().zip(out.iter_mut()) {
                    let d = match e.b {
                        Some(b) => q[e.a] - q[b],
                        None => q[e.a],
                    };
                    *o = e.coef * d;
                }
            };
            let start: Vec<f64> = (0..ne)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + 1e-3 * ((i * 7919) % 101) as f64)
                .collect();
            let est = power_iteration(apply, &vec![1.0; ne], &start, 300);
            if est.residual <= 1e-6 * est.eigenvalue {
                (1.02 * est.eigenvalue).min(gersh).max(est.eigenvalue)
            } else {
                gersh
            }
        })
    }

    fn solve_dual(
        &self,
        t: &[f64],
        lambda: f64,
        opts: &ProxOptions,
        z0: Option<Vec<f64>>,
    ) -> Result<(Vec<f64>, ProxCertificate)> {
        let f = self.f();
        let w = &self.reduced_weights;
        let n = w.len();
        let ne = f.edges.len();
        let mut z = match z0 {
            Some(z) if z.len() == ne => z.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect(),
            _ => vec![0.0; ne],
        };
        let primal_of = |z: &[f64]| -> Vec<f64> {
            let mut q = vec![0.0; n];
            for (e, ze) in f.edges.iter().zip(z) {
                let x = e.coef * ze;
                q[e.a] += x;
                if let Some(b) = e.b {
                    q[b] -= x;
                }
            }
            (0..n).map(|i| t[i] - lambda * q[i] / w[i]).collect()
        };
        let gap_of = |z: &[f64], y: &[f64]| -> f64 {
            // P(y) - D(z), with D(z) = λ Σ c z (Kt) - ½ Σ W (t - y(z))²
            let mut acc = CompensatedSum::new();
            for (e, ze) in f.edges.iter().zip(z) {
                acc.add(lambda * e.coef * (e.diff(y).abs() - ze * e.diff(t)));
            }
            for i in 0..n {
                let d = y[i] - t[i];
                acc.add(w[i] * d * d);
            }
            acc.value()
        };
        let lip = lambda * lambda * self.dual_lipschitz();
        let finish = |z: Vec<f64>, gap: f64, it: usize| {
            let y = primal_of(&z);
            (
                y,
                ProxCertificate {
                    residual: gap.max(0.0),
                    iterations: it,
                    inner_iterations: 0,
                    method_used: ProxMethod::DualProjectedGradient,
                    dual: Some(z),
                },
            )
        };
        if lip == 0.0 {
            return Ok(finish(z, 0.0, 0));
        }
        let mut x = z.clone();
        let mut theta = 1.0f64;
        let mut gap = f64::INFINITY;
        let mut best = (f64::INFINITY, z.clone());
        for it in 0..opts.max_iter {
            if it % 10 == 0 {
                let y = primal_of(&z);
                gap = gap_of(&z, &y);
                if gap < best.0 {
                    best = (gap, z.clone());
                }
                if gap <= opts.tol {
                    return Ok(finish(z, gap, it));
                }
            }
            let y = primal_of(&x);
            let mut z_new = vec![0.0; ne];
            let mut restart = 0.0;
            for (k, e) in f.edges.iter().enumerate() {
                let grad = -lambda * e.coef * e.diff(&y);
                z_new[k] = (x[k] - grad / lip).clamp(-1.0, 1.0);
                restart += grad * (z_new[k] - z[k]);
            }
            let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            if restart > 0.0 {
                theta = 1.0;
                x.clone_from(&z_new);
            } else {
                let beta = (theta - 1.0) / theta_new;
                for k in 0..ne {
                    x[k] = z_new[k] + beta * (z_new[k] - z[k]);
                }
                theta = theta_new;
            }
            z = z_new;
        }
        let y = primal_of(&z);
        gap = gap.min(gap_of(&z, &y));
        if gap <= opts.tol {
            return Ok(finish(z, gap, opts.max_iter));
        }
        let (best_gap, best_z) = best;
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            residual: best_gap.min(gap),
            tol: opts.tol,
            best: primal_of(&best_z),
        })
    }
}

fn exact_certificate() -> ProxCertificate {
    ProxCertificate {
        residual: 0.0,
        iterations: 0,
        inner_iterations: 0,
        method_used: ProxMethod::Exact,
        dual: None,
    }
}

/// `J_λ(w)` for `energy` in the space of `w`.
pub fn prox(
    energy: &Energy,
    w: &StateVector,
    lambda: f64,
    opts: &ProxOptions,
) -> Result<(StateVector, ProxCertificate)> {
    ProxSolver::new(energy, w.space())?.solve(w, lambda, opts, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonexpansiveReport {
    pub input_distance: f64,
    pub output_distance: f64,
    pub holds: bool,
}

/// Checks `‖J_λ(w1) - J_λ(w2)‖ ≤ ‖w1 - w2‖ (1 + 10 tol)`.
pub fn prox_nonexpansive_check(
    energy: &Energy,
    w1: &StateVector,
    w2: &StateVector,
    lambda: f64,
    opts: &ProxOptions,
) -> Result<NonexpansiveReport> {
    let solver = ProxSolver::new(energy, w1.space())?;
    let (v1, _) = solver.solve(w1, lambda, opts, None)?;
    let (v2, _) = solver.solve(w2, lambda, opts, None)?;
    let input_distance = w1.distance(w2)?;
    let output_distance = v1.distance(&v2)?;
    // p = 1 certificates bound the primal error by sqrt(2 gap)
    let slack = if energy.p() == 1.0 {
        2.0 * (2.0 * opts.tol).sqrt()
    } else {
        2.0 * opts.tol
    };
    Ok(NonexpansiveReport {
        input_distance,
        output_distance,
        holds: output_distance <= input_distance * (1.0 + 10.0 * opts.tol) + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::TorusGrid;

    fn graph(n: usize, m: usize, p: f64) -> Energy {
        EnergySpec::GraphPDirichlet {
            grid: TorusGrid::new(n, m).unwrap(),
            p,
        }
        .build()
        .unwrap()
    }

    fn sample(e: &Energy, f: impl Fn(usize) -> f64) -> StateVector {
        let d = e.space().dim();
        e.space().vector((0..d).map(f).collect()).unwrap()
    }

    #[test]
    fn quadratic_shrink() {
        let e = EnergySpec::HalfSquaredNorm { dim: 3 }.build().unwrap();
        let s = Arc::new(WeightedSpace::new("q", vec![0.5, 1.0, 2.0]).unwrap());
        let w = s.vector(vec![1.0, -2.0, 3.0]).unwrap();
        let (v, _) = prox(&e, &w, 0.5, &ProxOptions::default()).unwrap();
        for (a, b) in v.values().iter().zip(w.values()) {
            assert!((a - b / 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_certificate_and_mean() {
        let e = graph(2, 6, 2.0);
        let w = sample(&e, |i| ((i * 13) % 7) as f64 - 3.0);
        let (v, cert) = prox(&e, &w, 0.3, &ProxOptions::default()).unwrap();
        assert!(cert.residual <= 1e-10);
        assert_eq!(cert.method_used, ProxMethod::Linear);
        assert!((v.weighted_mean() - w.weighted_mean()).abs() < 1e-12);
    }

    #[test]
    fn newton_handles_p_between_one_and_two_and_above_two() {
        for p in [1.5, 3.0] {
            let e = graph(1, 16, p);
            let w = sample(&e, |i| (i as f64 * 0.9).sin());
            let (v, cert) = prox(&e, &w, 0.05, &ProxOptions::default()).unwrap();
            assert!(cert.residual <= 1e-10, "p = {p}: {cert:?}");
            assert!((v.weighted_mean() - w.weighted_mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn p1_dual_certificate() {
        let e = graph(1, 8, 1.0);
        let w = sample(&e, |i| if i < 4 { 1.0 } else { 0.0 });
        let (v, cert) = prox(&e, &w, 0.01, &ProxOptions::default()).unwrap();
        assert!(cert.residual <= 1e-10);
        let z = cert.dual.unwrap();
        assert!(z.iter().all(|x| x.abs() <= 1.0));
        assert!((v.weighted_mean() - w.weighted_mean()).abs() < 1e-12);
    }

    #[test]
    fn constants_are_fixed_points() {
        for p in [1.0, 1.5, 2.0] {
            let e = graph(1, 8, p);
            let c = e.space().constant(0.7);
            let (v, _) = prox(&e, &c, 1.0, &ProxOptions::default()).unwrap();
            assert!(v.distance(&c).unwrap() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn constrained_prox_stays_feasible() {
        let e = EnergySpec::DynamicBC1D {
            cells: 8,
            p: 2.0,
            tau: 0.5,
        }
        .build()
        .unwrap();
        let w = sample(&e, |i| i as f64 * 0.1);
        let (v, cert) = prox(&e, &w, 0.1, &ProxOptions::default()).unwrap();
        assert!(cert.residual <= 1e-10);
        assert!(e.eval(&v).unwrap().finite().is_some());
    }

    #[test]
    fn bad_lambda_and_method() {
        let e = graph(1, 4, 2.0);
        let w = e.space().zeros();
        assert!(prox(&e, &w, 0.0, &ProxOptions::default()).is_err());
        let opts = ProxOptions {
            method: ProxMethod::DualProjectedGradient,
            ..ProxOptions::default()
        };
        assert!(matches!(
            prox(&e, &w, 1.0, &opts),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let e = graph(1, 16, 1.0);
        let w = sample(&e, |i| (i as f64).cos());
        let opts = ProxOptions {
            tol: 1e-14,
            max_iter: 3,
            method: ProxMethod::Auto,
        };
        match prox(&e, &w, 0.5, &opts) {
            Err(Error::NonConvergence { best, .. }) => assert_eq!(best.len(), 16),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn nonexpansive_on_a_pair() {
        let e = graph(1, 16, 2.0);
        let a = sample(&e, |i| (i as f64).sin());
        let b = sample(&e, |i| (i as f64 * 0.3).cos());
        let r = prox_nonexpansive_check(&e, &a, &b, 0.2, &ProxOptions::default()).unwrap();
        assert!(r.holds);
        let r = prox_nonexpansive_check(&e, &a, &a, 0.2, &ProxOptions::default()).unwrap();
        assert_eq!(r.output_distance, 0.0);
    }
}
