//! Kuhn (Freudenthal) triangulation of the discrete torus `(eps Z / Z)^n`.
//!
//! The unit cube splits into the `n!` simplices
//! `Σ_σ = { 0 <= x_σ(1) <= ... <= x_σ(n) <= 1 }`. Walking from the cell corner
//! to the opposite corner, the vertices of `Σ_σ` are reached by stepping along
//! the axes in the order `σ(n), σ(n-1), ..., σ(1)` (largest coordinate first).

use itertools::Itertools;

use crate::error::{invalid, Result};

pub const MAX_DIM: usize = 4;

/// Uniform grid on the flat torus `T^n` with `m` nodes per axis (`eps = 1/m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    n: usize,
    m: usize,
}

impl TorusGrid {
    /// Requires `1 <= n <= 4` and `m >= 3`: for `m = 2` two nodes are
    /// neighbours along the same axis in both directions and the edge set
    /// stops having `n m^n` elements.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(invalid(format!(
                "torus dimension must be in 1..=4, got {n}"
            )));
        }
        if m < 3 {
            return Err(invalid(format!("torus grid needs m >= 3, got {m}")));
        }
        Ok(Self { n, m })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn node_count(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.node_count()
    }

    pub fn simplex_count(&self) -> usize {
        self.node_count() * factorial(self.n)
    }

    /// Volume of each simplex, `eps^n / n!`.
    pub fn simplex_volume(&self) -> f64 {
        self.eps().powi(self.n as i32) / factorial(self.n) as f64
    }

    /// Lexicographic node index, first axis most significant.
    pub fn node_index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.m + c % self.m)
    }

    pub fn node_coords(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.n];
        for c in coords.iter_mut().rev() {
            *c = index % self.m;
            index /= self.m;
        }
        coords
    }

    /// Position of a node in `[0,1)^n`.
    pub fn node_position(&self, index: usize) -> Vec<f64> {
        self.node_coords(index)
            .into_iter()
            .map(|c| c as f64 * self.eps())
            .collect()
    }

    /// Node reached from `index` by one grid step along `axis` (periodic).
    pub fn step(&self, index: usize, axis: usize) -> usize {
        let stride = self.m.pow((self.n - 1 - axis) as u32);
        let c = (index / stride) % self.m;
        if c + 1 == self.m {
            index - c * stride
        } else {
            index + stride
        }
    }

    /// Edges as `(z, axis)` pairs, joining `z` and `z + eps e_axis`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.node_count())
            .flat_map(move |z| (0..self.n).map(move |axis| Edge { node: z, axis }))
    }

    pub fn edge_endpoints(&self, e: Edge) -> (usize, usize) {
        (e.node, self.step(e.node, e.axis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub node: usize,
    pub axis: usize,
}

/// The simplex `z + eps Σ_σ`. `perm[k]` is the 0-based axis `σ(k+1) - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimplexRef {
    pub base: usize,
    pub perm: Vec<usize>,
}

impl SimplexRef {
    /// Axes in the order they are stepped along from the base vertex.
    pub fn step_axes(&self) -> impl Iterator<Item = usize> + '_ {
        self.perm.iter().rev().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricCoords {
    pub lambdas: Vec<f64>,
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All `m^n n!` simplices, ordered by base node and then by the
/// lexicographic order of the permutation.
pub fn enumerate_simplices(grid: &TorusGrid) -> Vec<SimplexRef> {
    let perms: Vec<Vec<usize>> = (0..grid.dim()).permutations(grid.dim()).collect();
    (0..grid.node_count())
        .flat_map(|base| {
            perms.iter().map(move |p| SimplexRef {
                base,
                perm: p.clone(),
            })
        })
        .collect()
}

/// Node indices of the `n+1` vertices, vertex `k` reached after `k` steps.
pub fn simplex_vertices(grid: &TorusGrid, s: &SimplexRef) -> Vec<usize> {
    let mut out = Vec::with_capacity(grid.dim() + 1);
    let mut z = s.base;
    out.push(z);
    for axis in s.step_axes() {
        z = grid.step(z, axis);
        out.push(z);
    }
    out
}

/// Unwrapped vertex positions in `R^n` (not reduced mod 1).
pub fn simplex_vertex_positions(grid: &TorusGrid, s: &SimplexRef) -> Vec<Vec<f64>> {
    let eps = grid.eps();
    let mut x: Vec<f64> = grid
        .node_coords(s.base)
        .into_iter()
        .map(|c| c as f64 * eps)
        .collect();
    let mut out = vec![x.clone()];
    for axis in s.step_axes() {
        x[axis] += eps;
        out.push(x.clone());
    }
    out
}

/// Finds the simplex containing `x` (coordinates taken mod 1) and its
/// barycentric coordinates. Points on shared faces resolve deterministically:
/// fractional parts are sorted in descending order, ties by axis index.
pub fn locate(grid: &TorusGrid, x: &[f64]) -> (SimplexRef, BarycentricCoords) {
    assert_eq!(x.len(), grid.dim(), "point dimension must match the grid");
    let m = grid.m() as f64;
    let mut cell = Vec::with_capacity(grid.dim());
    let mut frac = Vec::with_capacity(grid.dim());
    for &xi in x {
        let scaled = xi.rem_euclid(1.0) * m;
        let mut c = scaled.floor();
        let mut f = scaled - c;
        if c >= m {
            // rem_euclid can round up to exactly 1.0
            c = 0.0;
            f = 0.0;
        }
        cell.push(c as usize);
        frac.push(f);
    }
    let mut order: Vec<usize> = (0..grid.dim()).collect();
    // stable sort keeps lower axis first on ties
    order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).expect("finite coordinates"));
    let mut lambdas = Vec::with_capacity(grid.dim() + 1);
    lambdas.push(1.0 - frac[order[0]]);
    for k in 1..order.len() {
        lambdas.push(frac[order[k - 1]] - frac[order[k]]);
    }
    lambdas.push(frac[order[order.len() - 1]]);
    let perm: Vec<usize> = order.into_iter().rev().collect();
    (
        SimplexRef {
            base: grid.node_index(&cell),
            perm,
        },
        BarycentricCoords { lambdas },
    )
}

/// Number of simplices having `z` as a vertex, by brute-force enumeration.
pub fn incident_simplex_count_node(grid: &TorusGrid, z: usize) -> usize {
    enumerate_simplices(grid)
        .iter()
        .filter(|s| simplex_vertices(grid, s).contains(&z))
        .count()
}

/// Number of simplices containing both endpoints of `e`, by brute-force enumeration.
pub fn incident_simplex_count_edge(grid: &TorusGrid, e: Edge) -> usize {
    let (a, b) = grid.edge_endpoints(e);
    enumerate_simplices(grid)
        .iter()
        .filter(|s| {
            let v = simplex_vertices(grid, s);
            v.contains(&a) && v.contains(&b)
        })
        .count()
}

/// Incidence counts for every node and every edge in one pass over the
/// triangulation. Edge `(z, axis)` is stored at `z * n + axis`.
#[derive(Debug, Clone)]
pub struct IncidenceCounts {
    pub per_node: Vec<usize>,
    pub per_edge: Vec<usize>,
}

pub fn incidence_counts(grid: &TorusGrid) -> IncidenceCounts {
    let n = grid.dim();
    let mut per_node = vec![0; grid.node_count()];
    let mut per_edge = vec![0; grid.edge_count()];
    for s in enumerate_simplices(grid) {
        let verts = simplex_vertices(grid, &s);
        for &v in &verts {
            per_node[v] += 1;
        }
        // every vertex pair that is a grid edge, not just consecutive ones
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                for axis in 0..n {
                    if grid.step(a, axis) == b {
                        per_edge[a * n + axis] += 1;
                    } else if grid.step(b, axis) == a {
                        per_edge[b * n + axis] += 1;
                    }
                }
            }
        }
    }
    IncidenceCounts { per_node, per_edge }
}

/// `∫_△ λ_j dx = vol(△) / (n+1) = eps^n / (n+1)!`, independent of `j`.
pub fn quad_lambda(grid: &TorusGrid, j: usize) -> f64 {
    assert!(j <= grid.dim(), "vertex index out of range");
    grid.simplex_volume() / (grid.dim() + 1) as f64
}

/// `∫_△ λ_i λ_j dx = vol(△) (1 + δ_ij) / ((n+1)(n+2))`.
pub fn quad_lambda_pair(grid: &TorusGrid, i: usize, j: usize) -> f64 {
    assert!(
        i <= grid.dim() && j <= grid.dim(),
        "vertex index out of range"
    );
    let n = grid.dim() as f64;
    let diag = if i == j { 2.0 } else { 1.0 };
    grid.simplex_volume() * diag / ((n + 1.0) * (n + 2.0))
}

/// Value at `x` of the piecewise-affine interpolant of nodal values.
pub fn interpolate(grid: &TorusGrid, values: &[f64], x: &[f64]) -> f64 {
    let (s, bary) = locate(grid, x);
    simplex_vertices(grid, &s)
        .into_iter()
        .zip(&bary.lambdas)
        .map(|(v, l)| l * values[v])
        .sum()
}

/// Exact `‖L w‖²_{L²(T^n)}` of the piecewise-affine interpolant, assembled
/// from the P1 mass entries.
pub fn p1_l2_norm_squared(grid: &TorusGrid, values: &[f64]) -> f64 {
    let mut acc = crate::numerics::CompensatedSum::new();
    for s in enumerate_simplices(grid) {
        let v = simplex_vertices(grid, &s);
        for (i, &a) in v.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                acc.add(values[a] * values[b] * quad_lambda_pair(grid, i, j));
            }
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_small_m_and_large_n() {
        assert!(TorusGrid::new(1, 2).is_err());
        assert!(TorusGrid::new(5, 3).is_err());
        assert!(TorusGrid::new(0, 3).is_err());
    }

    #[test]
    fn counts_by_hand() {
        assert_eq!(enumerate_simplices(&TorusGrid::new(1, 4).unwrap()).len(), 4);
        assert_eq!(
            enumerate_simplices(&TorusGrid::new(2, 3).unwrap()).len(),
            18
        );
        assert_eq!(
            enumerate_simplices(&TorusGrid::new(3, 3).unwrap()).len(),
            162
        );
        let g = TorusGrid::new(3, 4).unwrap();
        assert_eq!(g.edges().count(), 3 * 64);
    }

    #[test]
    fn vertices_by_hand() {
        let g1 = TorusGrid::new(1, 4).unwrap();
        let s = SimplexRef {
            base: 0,
            perm: vec![0],
        };
        assert_eq!(simplex_vertices(&g1, &s), vec![0, 1]);
        let wrap = SimplexRef {
            base: 3,
            perm: vec![0],
        };
        assert_eq!(simplex_vertices(&g1, &wrap), vec![3, 0]);

        let g2 = TorusGrid::new(2, 4).unwrap();
        let id = SimplexRef {
            base: 0,
            perm: vec![0, 1],
        };
        let v = simplex_vertices(&g2, &id);
        let pos: Vec<Vec<f64>> = v.iter().map(|&i| g2.node_position(i)).collect();
        assert_eq!(pos, vec![vec![0.0, 0.0], vec![0.0, 0.25], vec![0.25, 0.25]]);
    }

    #[test]
    fn locate_sorts_fractional_parts() {
        let g = TorusGrid::new(2, 4).unwrap();
        // fractional parts (0.4, 0.2): x_2 <= x_1, so σ = (2, 1)
        let (s, b) = locate(&g, &[0.1, 0.05]);
        assert_eq!(s.base, 0);
        assert_eq!(s.perm, vec![1, 0]);
        // x_1 <= x_2 gives the identity
        let (s, b2) = locate(&g, &[0.025, 0.075]);
        assert_eq!(s.perm, vec![0, 1]);
        for bary in [b, b2] {
            assert!((bary.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(bary.lambdas.iter().all(|&l| (0.0..=1.0).contains(&l)));
        }
    }

    #[test]
    fn locate_vertex_and_barycenter() {
        let g = TorusGrid::new(3, 3).unwrap();
        let (s, b) = locate(&g, &[1.0 / 3.0, 2.0 / 3.0, 0.0]);
        assert_eq!(g.node_coords(s.base), vec![1, 2, 0]);
        assert!((b.lambdas[0] - 1.0).abs() < 1e-12);

        let s = SimplexRef {
            base: 5,
            perm: vec![2, 0, 1],
        };
        let pos = simplex_vertex_positions(&g, &s);
        let centre: Vec<f64> = (0..3)
            .map(|d| pos.iter().map(|p| p[d]).sum::<f64>() / 4.0)
            .collect();
        let (found, b) = locate(&g, &centre);
        assert_eq!(found, s);
        for l in b.lambdas {
            assert!((l - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn incidence_counts_small_cases() {
        let expected_node = [2, 6, 24];
        let expected_edge = [1, 2, 6];
        for n in 1..=3 {
            let g = TorusGrid::new(n, 3).unwrap();
            assert_eq!(incident_simplex_count_node(&g, 0), expected_node[n - 1]);
            let e = Edge {
                node: 4 % g.node_count(),
                axis: n - 1,
            };
            assert_eq!(incident_simplex_count_edge(&g, e), expected_edge[n - 1]);
        }
    }

    #[test]
    fn counting_matches_vertex_by_vertex_sum() {
        // Σ_k C(n,k) (n-k)! k! = (n+1)! and Σ_k C(n-1,k) (n-k-1)! k! = n!
        let binom = |n: usize, k: usize| factorial(n) / (factorial(k) * factorial(n - k));
        for n in 1..=4 {
            let node: usize = (0..=n)
                .map(|k| binom(n, k) * factorial(n - k) * factorial(k))
                .sum();
            let edge: usize = (0..n)
                .map(|k| binom(n - 1, k) * factorial(n - k - 1) * factorial(k))
                .sum();
            assert_eq!(node, factorial(n + 1));
            assert_eq!(edge, factorial(n));
        }
    }

    #[test]
    fn quadrature_constants() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert!((quad_lambda(&g, 0) - 1.0 / 8.0).abs() < 1e-16);
        let g = TorusGrid::new(2, 3).unwrap();
        let total: f64 = (0..=2).map(|j| quad_lambda(&g, j)).sum();
        assert!((total - g.simplex_volume()).abs() < 1e-16);
        let pairs: f64 = (0..=2)
            .flat_map(|i| (0..=2).map(move |j| (i, j)))
            .map(|(i, j)| quad_lambda_pair(&g, i, j))
            .sum();
        assert!((pairs - g.simplex_volume()).abs() < 1e-16);
    }

    #[test]
    fn interpolation_of_constants_is_exact() {
        let g = TorusGrid::new(2, 5).unwrap();
        let vals = vec![3.5; g.node_count()];
        assert!((interpolate(&g, &vals, &[0.33, 0.71]) - 3.5).abs() < 1e-14);
    }
}
