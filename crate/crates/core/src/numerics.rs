//! Small numerical kernels shared by the solvers: compensated summation,
//! a matrix-free preconditioned conjugate gradient and power iteration.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Weighted inner product `sum_i w_i a_i b_i` with compensated accumulation.
pub fn weighted_dot(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(
        weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y),
    )
}

pub fn weighted_norm(weights: &[f64], a: &[f64]) -> f64 {
    weighted_dot(weights, a, a).max(0.0).sqrt()
}

/// Norm of the Riesz representative of a dual vector `r` in the space with
/// diagonal weights: `sqrt(sum r_i^2 / w_i)`.
pub fn dual_norm(weights: &[f64], r: &[f64]) -> f64 {
    compensated_sum(weights.iter().zip(r).map(|(w, x)| x * x / w))
        .max(0.0)
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradient for an SPD operator given as a
/// closure. Solves `A x = b`, starting from the incoming `x`. Stops once the
/// residual satisfies `sqrt(sum r_i^2 / scale_i) <= tol`.
pub fn pcg<A>(
    apply: A,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    scale: &[f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if dual_norm(scale, &r) <= tol {
        return CgOutcome {
            iterations: 0,
            converged: true,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return CgOutcome {
                iterations: it,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Recompute the true residual periodically to avoid drift.
        if it % 50 == 0 {
            apply(x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        if dual_norm(scale, &r) <= tol {
            return CgOutcome {
                iterations: it,
                converged: true,
            };
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        iterations: max_iter,
        converged: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Largest eigenvalue estimate (Rayleigh quotient) of the self-adjoint operator.
    pub eigenvalue: f64,
    /// Norm of `A v - eigenvalue v` for the final unit iterate.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration for a positive semi-definite operator, self-adjoint with
/// respect to the diagonal inner product given by `weights`. The Rayleigh
/// quotients are nondecreasing for such operators.
pub fn power_iteration<A>(apply: A, weights: &[f64], start: &[f64], iters: usize) -> PowerEstimate
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = weights.len();
    let mut v = start.to_vec();
    let nv = weighted_norm(weights, &v);
    if nv == 0.0 {
        return PowerEstimate {
            eigenvalue: 0.0,
            residual: 0.0,
            iterations: 0,
        };
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; n];
    let mut eig = 0.0;
    let mut residual = 0.0;
    for it in 1..=iters.max(1) {
        apply(&v, &mut av);
        let rq = weighted_dot(weights, &v, &av);
        eig = if rq > eig { rq } else { eig.max(rq) };
        let r: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - rq * x).collect();
        residual = weighted_norm(weights, &r);
        let na = weighted_norm(weights, &av);
        if na == 0.0 {
            return PowerEstimate {
                eigenvalue: 0.0,
                residual: 0.0,
                iterations: it,
            };
        }
        for i in 0..n {
            v[i] = av[i] / na;
        }
    }
    PowerEstimate {
        eigenvalue: eig,
        residual,
        iterations: iters.max(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn pcg_solves_small_spd_system() {
        // [[4,1],[1,3]] x = [1,2] -> x = [1/11, 7/11]
        let a = |x: &[f64], y: &mut [f64]| {
            y[0] = 4.0 * x[0] + x[1];
            y[1] = x[0] + 3.0 * x[1];
        };
        let mut x = [0.0, 0.0];
        let out = pcg(a, &[4.0, 3.0], &[1.0, 2.0], &mut x, &[1.0, 1.0], 1e-14, 10);
        assert!(out.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = |x: &[f64], y: &mut [f64]| {
            y[0] = 2.0 * x[0];
            y[1] = 0.5 * x[1];
        };
        let est = power_iteration(a, &[1.0, 1.0], &[1.0, 1.0], 60);
        assert!((est.eigenvalue - 2.0).abs() < 1e-12);
    }
}
