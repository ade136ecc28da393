//! `mosco-flow selftest`: the exact and combinatorial suites.

use std::sync::Arc;
use std::time::Instant;

use mosco_core::energies::{eval_orthotropic_with_quadrature, EnergySpec};
use mosco_core::profiles::SplitMix64;
use mosco_core::prox::{prox, ProxOptions};
use mosco_core::simplex::{self, factorial, TorusGrid};
use mosco_core::space::WeightedSpace;
use nalgebra::{DMatrix, DVector};

/// Deliberate corruptions used to check that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Scales the simplex measure used by the P1 energy route by `1 + 1e-3`.
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest `error / tolerance` over the cases; at most 1 when the suite passes.
    pub worst_ratio: f64,
    pub seconds: f64,
    pub failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    worst_ratio: f64,
    failure: Option<String>,
}

impl Tally {
    fn record(&mut self, error: f64, tolerance: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        let ratio = match (error, tolerance) {
            (e, _) if e == 0.0 => 0.0,
            (e, t) if t > 0.0 => e / t,
            _ => f64::INFINITY,
        };
        self.worst_ratio = self
            .worst_ratio
            .max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        if !(ratio <= 1.0) && self.failure.is_none() {
            self.failure = Some(format!(
                "{} (error {error:e}, tolerance {tolerance:e})",
                case()
            ));
        }
    }

    fn finish(self, name: &'static str, started: Instant) -> SuiteResult {
        SuiteResult {
            name,
            cases: self.cases,
            worst_ratio: self.worst_ratio,
            seconds: started.elapsed().as_secs_f64(),
            failure: self.failure,
        }
    }
}

fn counting() -> SuiteResult {
    let started = Instant::now();
    let mut t = Tally::default();
    for n in 1..=4 {
        for m in [3, 4] {
            let grid = TorusGrid::new(n, m).unwrap();
            let counts = simplex::incidence_counts(&grid);
            for (z, &c) in counts.per_node.iter().enumerate() {
                t.record(c.abs_diff(factorial(n + 1)) as f64, 0.0, || {
                    format!("node {z}, n={n}, m={m}: {c}")
                });
            }
            for (e, &c) in counts.per_edge.iter().enumerate() {
                t.record(c.abs_diff(factorial(n)) as f64, 0.0, || {
                    format!("edge {e}, n={n}, m={m}: {c}")
                });
            }
            // second route: per-node and per-edge brute force on a few entries
            for z in [0, grid.node_count() / 2] {
                let c = simplex::incident_simplex_count_node(&grid, z);
                t.record(c.abs_diff(factorial(n + 1)) as f64, 0.0, || {
                    format!("brute node {z}, n={n}, m={m}")
                });
            }
            let picked = grid.edges().nth(grid.edge_count() / 3);
            if let Some(e) = picked {
                let c = simplex::incident_simplex_count_edge(&grid, e);
                t.record(c.abs_diff(factorial(n)) as f64, 0.0, || {
                    format!("brute edge {e:?}, n={n}, m={m}")
                });
            }
        }
    }
    t.finish("counting", started)
}

fn energy_identity(mutation: Mutation) -> SuiteResult {
    let started = Instant::now();
    let mut t = Tally::default();
    let mut rng = SplitMix64::new(0x5e1f);
    for n in 1..=3 {
        for m in [3, 4] {
            let grid = TorusGrid::new(n, m).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0] {
                let e = EnergySpec::GraphPDirichlet { grid, p }.build().unwrap();
                for k in 0..100 {
                    let w = rng.signed_vec(grid.node_count());
                    let graph = e
                        .eval(&e.space().vector(w.clone()).unwrap())
                        .unwrap()
                        .finite()
                        .unwrap();
                    let p1 = eval_orthotropic_with_quadrature(&grid, p, &w, |g| {
                        let measure: f64 = (0..=g.dim()).map(|j| simplex::quad_lambda(g, j)).sum();
                        match mutation {
                            Mutation::None => measure,
                            Mutation::Quadrature => measure * (1.0 + 1e-3),
                        }
                    });
                    let rel = (graph - p1).abs() / p1.abs().max(f64::MIN_POSITIVE);
                    t.record(rel, 1e-12, || format!("n={n} m={m} p={p} sample {k}"));
                }
            }
        }
    }
    t.finish("energy identity", started)
}

fn quadrature() -> SuiteResult {
    let started = Instant::now();
    let mut t = Tally::default();
    // n = 1 by hand: h/3 on the diagonal, h/6 off it
    let g1 = TorusGrid::new(1, 4).unwrap();
    let h = 0.25;
    t.record(
        (simplex::quad_lambda_pair(&g1, 0, 0) - h / 3.0).abs(),
        1e-15,
        || "1D diagonal".into(),
    );
    t.record(
        (simplex::quad_lambda_pair(&g1, 0, 1) - h / 6.0).abs(),
        1e-15,
        || "1D off-diagonal".into(),
    );
    t.record(
        (simplex::p1_l2_norm_squared(&g1, &[1.0, 0.0, 1.0, 0.0]) - 4.0 * h / 3.0).abs(),
        1e-15,
        || "1D hat data".into(),
    );
    // Σ_ij ∫ λ_i λ_j = vol and Σ_j ∫ λ_j = vol in every dimension
    for n in 1..=4 {
        let g = TorusGrid::new(n, 3).unwrap();
        let vol = g.simplex_volume();
        let pairs: f64 = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .map(|(i, j)| simplex::quad_lambda_pair(&g, i, j))
            .sum();
        let singles: f64 = (0..=n).map(|j| simplex::quad_lambda(&g, j)).sum();
        t.record((pairs - vol).abs() / vol, 1e-14, || {
            format!("pair sum n={n}")
        });
        t.record((singles - vol).abs() / vol, 1e-14, || {
            format!("single sum n={n}")
        });
    }
    // constant data: ‖L c‖² = c² on the unit torus
    for n in 1..=3 {
        let g = TorusGrid::new(n, 3).unwrap();
        let v = vec![1.5; g.node_count()];
        t.record(
            (simplex::p1_l2_norm_squared(&g, &v) - 2.25).abs() / 2.25,
            1e-13,
            || format!("constant n={n}"),
        );
    }
    t.finish("quadrature", started)
}

fn prox_closed_forms() -> SuiteResult {
    let started = Instant::now();
    let mut t = Tally::default();
    let opts = ProxOptions::default();
    // quadratic shrink
    let space = Arc::new(WeightedSpace::new("shrink", vec![0.5, 1.0, 2.0]).unwrap());
    let quad = EnergySpec::HalfSquaredNorm { dim: 3 }.build().unwrap();
    let w = space.vector(vec![1.0, -0.5, 0.25]).unwrap();
    for lambda in [0.1, 1.0, 10.0] {
        let (v, _) = prox(&quad, &w, lambda, &opts).unwrap();
        let err = v
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| (a - b / (1.0 + lambda)).abs())
            .fold(0.0, f64::max);
        t.record(err, 1e-12, || format!("shrink lambda={lambda}"));
    }
    // p = 2 graph against a dense solve of (ε^n I + λ ε^{n-2} K) v = ε^n w
    let mut rng = SplitMix64::new(0xd1);
    for (n, m) in [(1, 8), (2, 4), (2, 8)] {
        let grid = TorusGrid::new(n, m).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 2.0 }
            .build()
            .unwrap();
        let d = grid.node_count();
        let lambda = 0.05;
        let eps = grid.eps();
        let mass = eps.powi(n as i32);
        let coef = lambda * eps.powi(n as i32 - 2);
        let mut a = DMatrix::identity(d, d) * mass;
        for edge in grid.edges() {
            let (i, j) = grid.edge_endpoints(edge);
            a[(i, i)] += coef;
            a[(j, j)] += coef;
            a[(i, j)] -= coef;
            a[(j, i)] -= coef;
        }
        let w = rng.signed_vec(d);
        let dense = a
            .lu()
            .solve(&(DVector::from_vec(w.clone()) * mass))
            .unwrap();
        let (v, _) = prox(&e, &e.space().vector(w).unwrap(), lambda, &opts).unwrap();
        let err = v
            .values()
            .iter()
            .zip(dense.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        t.record(err, 1e-10, || format!("dense p=2 n={n} m={m}"));
    }
    // p = 1 two-node soft threshold
    let pair = Arc::new(WeightedSpace::uniform("pair", 2, 1.0).unwrap());
    let tv = EnergySpec::CustomGraph {
        dim: 2,
        edges: vec![(0, 1, 1.0)],
        p: 1.0,
    }
    .build()
    .unwrap();
    for (a, b, lambda) in [(1.0, 0.0, 0.1), (1.0, 0.0, 0.75), (-0.2, 0.9, 0.3)] {
        let (v, cert) = prox(
            &tv,
            &pair.vector(vec![a, b]).unwrap(),
            lambda,
            &ProxOptions::with_tol(1e-14),
        )
        .unwrap();
        let gap: f64 = a - b;
        let mean = 0.5 * (a + b);
        let half = 0.5 * (gap.abs() - 2.0 * lambda).max(0.0) * gap.signum();
        let err = (v.values()[0] - (mean + half))
            .abs()
            .max((v.values()[1] - (mean - half)).abs());
        // a certified gap g bounds the distance to the minimizer by sqrt(2g)
        t.record(err, 1e-7, || {
            format!("soft threshold ({a}, {b}) lambda={lambda}")
        });
        t.record(cert.residual, 1e-12, || {
            format!("soft threshold gap ({a}, {b}) lambda={lambda}")
        });
    }
    t.finish("prox closed forms", started)
}

pub fn run_all(mutation: Mutation) -> Vec<SuiteResult> {
    vec![
        counting(),
        energy_identity(mutation),
        quadrature(),
        prox_closed_forms(),
    ]
}

pub fn render(results: &[SuiteResult]) -> String {
    let mut s = format!(
        "{:<20} {:>7} {:>12} {:>8}  {}\n",
        "suite", "cases", "worst ratio", "seconds", "status"
    );
    for r in results {
        s.push_str(&format!(
            "{:<20} {:>7} {:>12.3e} {:>8.2}  {}\n",
            r.name,
            r.cases,
            r.worst_ratio,
            r.seconds,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
        if let Some(f) = &r.failure {
            s.push_str(&format!("    first failing case: {f}\n"));
        }
    }
    s
}
