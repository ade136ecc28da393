//! Convex energies on the laboratory's weighted spaces.
//!
//! Every energy is compiled into a [`Functional`]: a sum of
//! `coef/p |u_a - u_b|^p` edge terms, `coef/p |G u|^p` terms with a 2x3
//! gradient stencil (the thin slab), and an optional `½ Σ w_i u_i²` mass
//! term, all acting on a reduced coordinate vector. The reduction encodes
//! affine constraints: coordinates may be pinned to a value (Dirichlet) or
//! merged with another coordinate (the trace constraint `γu = v`).

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::numerics::CompensatedSum;
use crate::simplex::{self, TorusGrid};
use crate::space::{check_space, StateVector, WeightedSpace};

/// Extended real energy value. `+∞` never enters floating-point arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyValue {
    Finite(f64),
    Infinite,
}

impl EnergyValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            EnergyValue::Finite(v) => Some(v),
            EnergyValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, EnergyValue::Infinite)
    }

    /// Finite value or panic; for call sites where the state is known to be feasible.
    pub fn expect_finite(self, what: &str) -> f64 {
        self.finite()
            .unwrap_or_else(|| panic!("{what}: energy is +infinity"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Neumann,
    /// Homogeneous Dirichlet; for `p = 1` the relaxed form `|Du| + |γu|` is used.
    Dirichlet,
}

/// Discretized thin slab `{ eps g_-(x) < y < eps g_+(x) }` over `ω = [0,1]`,
/// stored on the reference rectangle `ω × (0,1)`. Unknowns sit at the
/// `cells_x + 1` horizontal nodes and the centres of `layers` vertical layers;
/// node `(i, j)` has index `i * layers + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSlab {
    pub cells_x: usize,
    pub layers: usize,
    pub eps: f64,
    pub p: f64,
    pub g_minus: Vec<f64>,
    pub g_plus: Vec<f64>,
}

impl ThinSlab {
    pub fn new(
        cells_x: usize,
        layers: usize,
        eps: f64,
        p: f64,
        g_minus: Vec<f64>,
        g_plus: Vec<f64>,
    ) -> Result<Self> {
        let slab = Self {
            cells_x,
            layers,
            eps,
            p,
            g_minus,
            g_plus,
        };
        slab.validate()?;
        Ok(slab)
    }

    /// Samples `g_-` and `g_+` at the horizontal nodes.
    pub fn from_profiles(
        cells_x: usize,
        layers: usize,
        eps: f64,
        p: f64,
        g_minus: impl Fn(f64) -> f64,
        g_plus: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let h = 1.0 / cells_x as f64;
        let xs: Vec<f64> = (0..=cells_x).map(|i| i as f64 * h).collect();
        Self::new(
            cells_x,
            layers,
            eps,
            p,
            xs.iter().map(|&x| g_minus(x)).collect(),
            xs.iter().map(|&x| g_plus(x)).collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.cells_x < 1 || self.layers < 1 {
            return Err(invalid("thin slab needs at least one cell and one layer"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!(
                "thin slab eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.p > 1.0) {
            return Err(invalid("thin slab energy is only available for p > 1"));
        }
        if self.g_minus.len() != self.cells_x + 1 || self.g_plus.len() != self.cells_x + 1 {
            return Err(invalid(
                "thin slab profiles must be sampled at cells_x + 1 nodes",
            ));
        }
        if self
            .g_minus
            .iter()
            .zip(&self.g_plus)
            .any(|(a, b)| !(b - a > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(invalid("thin slab needs g_- < g_+ at every node"));
        }
        Ok(())
    }

    pub fn thickness(&self) -> Vec<f64> {
        self.g_plus
            .iter()
            .zip(&self.g_minus)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.layers + j
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_x as f64
    }

    /// Limit energy `(1/p) ∫_ω g |v'|^p` on the same horizontal grid.
    pub fn limit_spec(&self) -> EnergySpec {
        EnergySpec::Weighted1DLimit {
            g: self.thickness(),
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnergySpec {
    /// `E ≡ 0` on any space of the given dimension.
    Zero {
        dim: usize,
    },
    /// `E(v) = ½ ‖v‖²` in whichever space the state lives in.
    HalfSquaredNorm {
        dim: usize,
    },
    /// `(1/p) Σ c_e |v_a - v_b|^p` over an explicit edge list, any space of dimension `dim`.
    CustomGraph {
        dim: usize,
        edges: Vec<(usize, usize, f64)>,
        p: f64,
    },
    /// `(1/p) Σ_{edges} eps^n (|v(z) - v(z')| / eps)^p` on the torus graph.
    GraphPDirichlet {
        grid: TorusGrid,
        p: f64,
    },
    /// `(1/p) ∫ |∇w|_{ℓp}^p` on piecewise-affine functions of the Kuhn triangulation.
    OrthotropicP1 {
        grid: TorusGrid,
        p: f64,
    },
    ThinSlab2D(ThinSlab),
    /// `(1/p) ∫_0^1 g |v'|^p` with `g` sampled at the `cells + 1` nodes.
    Weighted1DLimit {
        g: Vec<f64>,
        p: f64,
    },
    /// `(1/p) ∫_0^1 |u'|^p` on P1 functions of `[0,1]`.
    Interval1D {
        cells: usize,
        p: f64,
        boundary: Boundary,
    },
    /// Neumann p-Dirichlet energy in the space weighted by `b_eps = 1 + eps^{-1} 1_{layer}`.
    BoundaryLayer1D {
        cells: usize,
        eps: f64,
        p: f64,
    },
    /// State `(u_0..u_M, v_-, v_+)`. For `p > 1`: `(1/p)∫|u'|^p` if `γu = v`, else `+∞`.
    /// For `p = 1`: `|Du| + |u_0 - v_-| + |u_M - v_+|`.
    DynamicBC1D {
        cells: usize,
        p: f64,
        tau: f64,
    },
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("p must be >= 1, got {p}")))
    }
}

/// Lumped P1 mass on `[0,1]` with `cells` uniform cells.
pub fn lumped_interval_weights(cells: usize) -> Vec<f64> {
    let h = 1.0 / cells as f64;
    let mut w = vec![h; cells + 1];
    w[0] = h / 2.0;
    w[cells] = h / 2.0;
    w
}

pub fn interval_space(cells: usize) -> Result<WeightedSpace> {
    WeightedSpace::new(
        format!("interval(M={cells})"),
        lumped_interval_weights(cells),
    )
}

pub fn graph_space(grid: &TorusGrid) -> WeightedSpace {
    let w = grid.eps().powi(grid.dim() as i32);
    WeightedSpace::uniform(
        format!("torus(n={},m={})", grid.dim(), grid.m()),
        grid.node_count(),
        w,
    )
    .expect("positive weights")
}

/// Number of grid cells in a layer of width `eps`; `eps` must be a multiple of `1/cells`.
pub fn layer_cells(cells: usize, eps: f64) -> Result<usize> {
    let k = eps * cells as f64;
    let kr = k.round();
    if !(eps > 0.0) || (k - kr).abs() > 1e-9 * k.max(1.0) || kr < 1.0 {
        return Err(invalid(format!(
            "layer width {eps} is not a positive multiple of the grid step 1/{cells}"
        )));
    }
    let k = kr as usize;
    if 2 * k > cells {
        return Err(invalid(format!(
            "layer width {eps} exceeds half the interval"
        )));
    }
    Ok(k)
}

/// Lumped mass of `b_eps` on the P1 grid: each cell adds `h/2 · b_cell` to both endpoints.
pub fn boundary_layer_weights(cells: usize, eps: f64) -> Result<Vec<f64>> {
    let k = layer_cells(cells, eps)?;
    let h = 1.0 / cells as f64;
    let mut w = vec![0.0; cells + 1];
    for c in 0..cells {
        let b = if c < k || c >= cells - k {
            1.0 + 1.0 / eps
        } else {
            1.0
        };
        w[c] += 0.5 * h * b;
        w[c + 1] += 0.5 * h * b;
    }
    Ok(w)
}

impl EnergySpec {
    pub fn p(&self) -> f64 {
        match self {
            EnergySpec::Zero { .. } | EnergySpec::HalfSquaredNorm { .. } => 2.0,
            EnergySpec::CustomGraph { p, .. }
            | EnergySpec::GraphPDirichlet { p, .. }
            | EnergySpec::OrthotropicP1 { p, .. }
            | EnergySpec::Weighted1DLimit { p, .. }
            | EnergySpec::Interval1D { p, .. }
            | EnergySpec::BoundaryLayer1D { p, .. }
            | EnergySpec::DynamicBC1D { p, .. } => *p,
            EnergySpec::ThinSlab2D(s) => s.p,
        }
    }

    /// `E(u + c·1) = E(u)` for every constant `c`.
    pub fn is_translation_invariant(&self) -> bool {
        match self {
            EnergySpec::Zero { .. }
            | EnergySpec::CustomGraph { .. }
            | EnergySpec::GraphPDirichlet { .. }
            | EnergySpec::OrthotropicP1 { .. }
            | EnergySpec::ThinSlab2D(_)
            | EnergySpec::Weighted1DLimit { .. }
            | EnergySpec::BoundaryLayer1D { .. }
            | EnergySpec::DynamicBC1D { .. } => true,
            EnergySpec::Interval1D { boundary, .. } => *boundary == Boundary::Neumann,
            EnergySpec::HalfSquaredNorm { .. } => false,
        }
    }

    /// Variants that accept any space of the right dimension.
    fn is_generic(&self) -> bool {
        matches!(
            self,
            EnergySpec::Zero { .. }
                | EnergySpec::HalfSquaredNorm { .. }
                | EnergySpec::CustomGraph { .. }
        )
    }

    /// The space this energy is posed on. Generic variants report a unit-weight space.
    pub fn space(&self) -> Result<WeightedSpace> {
        match self {
            EnergySpec::Zero { dim }
            | EnergySpec::HalfSquaredNorm { dim }
            | EnergySpec::CustomGraph { dim, .. } => WeightedSpace::uniform("generic", *dim, 1.0),
            EnergySpec::GraphPDirichlet { grid, .. } | EnergySpec::OrthotropicP1 { grid, .. } => {
                Ok(graph_space(grid))
            }
            EnergySpec::ThinSlab2D(s) => {
                let lumped = lumped_interval_weights(s.cells_x);
                let g = s.thickness();
                let mut w = Vec::with_capacity((s.cells_x + 1) * s.layers);
                for i in 0..=s.cells_x {
                    for _ in 0..s.layers {
                        w.push(g[i] * lumped[i] / s.layers as f64);
                    }
                }
                WeightedSpace::new(
                    format!("thin(Mx={},My={},eps={})", s.cells_x, s.layers, s.eps),
                    w,
                )
            }
            EnergySpec::Weighted1DLimit { g, .. } => {
                let cells = g.len().saturating_sub(1);
                let lumped = lumped_interval_weights(cells.max(1));
                WeightedSpace::new(
                    format!("thin-limit(M={cells})"),
                    g.iter().zip(lumped).map(|(g, w)| g * w).collect(),
                )
            }
            EnergySpec::Interval1D { cells, .. } => interval_space(*cells),
            EnergySpec::BoundaryLayer1D { cells, eps, .. } => WeightedSpace::new(
                format!("layer(M={cells},eps={eps})"),
                boundary_layer_weights(*cells, *eps)?,
            ),
            EnergySpec::DynamicBC1D { cells, tau, .. } => Ok(dynamic_bc_space(*cells, *tau)?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p())?;
        match self {
            EnergySpec::Zero { dim } | EnergySpec::HalfSquaredNorm { dim } => {
                if *dim == 0 {
                    return Err(invalid("dimension must be positive"));
                }
            }
            EnergySpec::CustomGraph { dim, edges, .. } => {
                for &(a, b, c) in edges {
                    if a >= *dim || b >= *dim || a == b || !(c >= 0.0 && c.is_finite()) {
                        return Err(invalid(format!("bad edge ({a}, {b}, {c})")));
                    }
                }
            }
            EnergySpec::ThinSlab2D(s) => s.validate()?,
            EnergySpec::Weighted1DLimit { g, .. } => {
                if g.len() < 2 || g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(invalid("weight profile needs >= 2 positive samples"));
                }
            }
            EnergySpec::Interval1D { cells, .. } => {
                if *cells < 2 {
                    return Err(invalid("interval needs at least 2 cells"));
                }
            }
            EnergySpec::BoundaryLayer1D { cells, eps, .. } => {
                layer_cells(*cells, *eps)?;
            }
            EnergySpec::DynamicBC1D { cells, tau, .. } => {
                if *cells < 2 {
                    return Err(invalid("interval needs at least 2 cells"));
                }
                if !(*tau > 0.0 && tau.is_finite()) {
                    return Err(invalid(format!("tau must be positive, got {tau}")));
                }
            }
            EnergySpec::GraphPDirichlet { .. } | EnergySpec::OrthotropicP1 { .. } => {}
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Energy> {
        Energy::new(self.clone())
    }
}

/// `L²(0,1) ⊕ L²({0,1})` with lumped interior mass and boundary weights `tau`.
pub fn dynamic_bc_space(cells: usize, tau: f64) -> Result<WeightedSpace> {
    let interior = interval_space(cells)?;
    let boundary = WeightedSpace::new(format!("boundary(tau={tau})"), vec![tau, tau])?;
    Ok(WeightedSpace::direct_sum(&interior, &boundary))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EdgeTerm {
    pub a: usize,
    /// Second endpoint, or `None` for a difference against `anchor`.
    pub b: Option<usize>,
    pub anchor: f64,
    pub coef: f64,
}

impl EdgeTerm {
    #[inline]
    pub fn diff(&self, y: &[f64]) -> f64 {
        match self.b {
            Some(b) => y[self.a] - y[b],
            None => y[self.a] - self.anchor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GradTerm {
    pub nodes: [usize; 3],
    pub gx: [f64; 3],
    pub gy: [f64; 3],
    pub coef: f64,
}

impl GradTerm {
    #[inline]
    pub fn apply(&self, y: &[f64]) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 0..3 {
            a += self.gx[k] * y[self.nodes[k]];
            b += self.gy[k] * y[self.nodes[k]];
        }
        (a, b)
    }
}

/// Hessian regularization `(d² + δ²)^{(p-2)/2}` for `1 < p < 2`.
pub(crate) const HESSIAN_DELTA: f64 = 1e-15;

#[derive(Debug, Clone)]
pub(crate) struct Functional {
    pub p: f64,
    pub slots: Vec<Slot>,
    pub reduced_dim: usize,
    pub edges: Vec<EdgeTerm>,
    pub grads: Vec<GradTerm>,
    /// Coefficient of `½ Σ W_r y_r²`.
    pub mass: f64,
}

impl Functional {
    fn unconstrained(dim: usize, p: f64) -> Self {
        Self {
            p,
            slots: (0..dim).map(Slot::Free).collect(),
            reduced_dim: dim,
            edges: Vec::new(),
            grads: Vec::new(),
            mass: 0.0,
        }
    }

    fn edge(&mut self, a: usize, b: usize, coef: f64) {
        self.edges.push(EdgeTerm {
            a,
            b: Some(b),
            anchor: 0.0,
            coef,
        });
    }

    pub fn full_dim(&self) -> usize {
        self.slots.len()
    }

    pub fn reduce_weights(&self, full: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.reduced_dim];
        for (slot, wi) in self.slots.iter().zip(full) {
            if let Slot::Free(r) = slot {
                w[*r] += wi;
            }
        }
        w
    }

    /// Weighted projection of a full vector onto the feasible set, in reduced coordinates.
    pub fn project(&self, full_weights: &[f64], reduced_weights: &[f64], x: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.reduced_dim];
        for ((slot, wi), xi) in self.slots.iter().zip(full_weights).zip(x) {
            if let Slot::Free(r) = slot {
                t[*r] += wi * xi;
            }
        }
        t.iter_mut()
            .zip(reduced_weights)
            .for_each(|(ti, w)| *ti /= w);
        t
    }

    /// Reduced coordinates of `x`, or `None` if `x` violates a constraint.
    pub fn restrict(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut y = vec![f64::NAN; self.reduced_dim];
        for (slot, &xi) in self.slots.iter().zip(x) {
            match *slot {
                Slot::Fixed(v) => {
                    if xi != v {
                        return None;
                    }
                }
                Slot::Free(r) => {
                    if y[r].is_nan() {
                        y[r] = xi;
                    } else if y[r] != xi {
                        return None;
                    }
                }
            }
        }
        Some(y)
    }

    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Free(r) => y[r],
                Slot::Fixed(v) => v,
            })
            .collect()
    }

    pub fn value(&self, y: &[f64], w: &[f64]) -> f64 {
        let p = self.p;
        let mut acc = CompensatedSum::new();
        for e in &self.edges {
            acc.add(e.coef / p * e.diff(y).abs().powf(p));
        }
        for g in &self.grads {
            let (a, b) = g.apply(y);
            acc.add(g.coef / p * (a * a + b * b).powf(0.5 * p));
        }
        if self.mass != 0.0 {
            for (yi, wi) in y.iter().zip(w) {
                acc.add(0.5 * self.mass * wi * yi * yi);
            }
        }
        acc.value()
    }

    /// Adds the Euclidean gradient `∂E/∂y` to `out`. Requires `p > 1` for non-smooth-free evaluation;
    /// at `p = 1` the subgradient with `sign(0) = 0` is returned.
    pub fn add_grad(&self, y: &[f64], w: &[f64], out: &mut [f64]) {
        let p = self.p;
        for e in &self.edges {
            let d = e.diff(y);
            let s = e.coef * signed_pow(d, p - 1.0);
            out[e.a] += s;
            if let Some(b) = e.b {
                out[b] -= s;
            }
        }
        for g in &self.grads {
            let (a, b) = g.apply(y);
            let r2 = a * a + b * b;
            if r2 == 0.0 {
                continue;
            }
            let f = g.coef * r2.powf(0.5 * (p - 2.0));
            for k in 0..3 {
                out[g.nodes[k]] += f * (a * g.gx[k] + b * g.gy[k]);
            }
        }
        if self.mass != 0.0 {
            for ((o, yi), wi) in out.iter_mut().zip(y).zip(w) {
                *o += self.mass * wi * yi;
            }
        }
    }

    /// Curvature data for Hessian-vector products at `y`.
    pub fn hessian_at(&self, y: &[f64]) -> HessianCache {
        let p = self.p;
        let reg = |r2: f64| {
            if p < 2.0 {
                (r2 + HESSIAN_DELTA * HESSIAN_DELTA).powf(0.5 * (p - 2.0))
            } else if p == 2.0 {
                1.0
            } else {
                r2.powf(0.5 * (p - 2.0))
            }
        };
        let edge_w = self
            .edges
            .iter()
            .map(|e| {
                let d = e.diff(y);
                e.coef * (p - 1.0) * reg(d * d)
            })
            .collect();
        let grad_m = self
            .grads
            .iter()
            .map(|g| {
                let (a, b) = g.apply(y);
                let r2 = a * a + b * b;
                let f = g.coef * reg(r2);
                // f (I + (p-2) n n^T), n = (a,b)/|(a,b)|
                let t = if r2 > 0.0 { (p - 2.0) / r2 } else { 0.0 };
                [f * (1.0 + t * a * a), f * t * a * b, f * (1.0 + t * b * b)]
            })
            .collect();
        HessianCache { edge_w, grad_m }
    }

    pub fn hessian_apply(&self, cache: &HessianCache, v: &[f64], out: &mut [f64]) {
        for (e, &h) in self.edges.iter().zip(&cache.edge_w) {
            let d = match e.b {
                Some(b) => v[e.a] - v[b],
                None => v[e.a],
            };
            out[e.a] += h * d;
            if let Some(b) = e.b {
                out[b] -= h * d;
            }
        }
        for (g, m) in self.grads.iter().zip(&cache.grad_m) {
            let (a, b) = g.apply(v);
            let ma = m[0] * a + m[1] * b;
            let mb = m[1] * a + m[2] * b;
            for k in 0..3 {
                out[g.nodes[k]] += ma * g.gx[k] + mb * g.gy[k];
            }
        }
    }

    pub fn hessian_diag(&self, cache: &HessianCache, out: &mut [f64]) {
        for (e, &h) in self.edges.iter().zip(&cache.edge_w) {
            out[e.a] += h;
            if let Some(b) = e.b {
                out[b] += h;
            }
        }
        for (g, m) in self.grads.iter().zip(&cache.grad_m) {
            for k in 0..3 {
                let (x, y) = (g.gx[k], g.gy[k]);
                out[g.nodes[k]] += m[0] * x * x + 2.0 * m[1] * x * y + m[2] * y * y;
            }
        }
    }
}

pub(crate) struct HessianCache {
    edge_w: Vec<f64>,
    grad_m: Vec<[f64; 3]>,
}

#[inline]
fn signed_pow(d: f64, q: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else if q == 1.0 {
        d
    } else if q == 0.0 {
        d.signum()
    } else {
        d.signum() * d.abs().powf(q)
    }
}

/// A compiled energy together with the space it lives on.
#[derive(Debug, Clone)]
pub struct Energy {
    spec: EnergySpec,
    space: Arc<WeightedSpace>,
    functional: Functional,
}

impl Energy {
    pub fn new(spec: EnergySpec) -> Result<Self> {
        spec.validate()?;
        let space = Arc::new(spec.space()?);
        let functional = compile(&spec)?;
        debug_assert_eq!(functional.full_dim(), space.dim());
        Ok(Self {
            spec,
            space,
            functional,
        })
    }

    pub fn spec(&self) -> &EnergySpec {
        &self.spec
    }

    pub fn p(&self) -> f64 {
        self.functional.p
    }

    /// Canonical space. Generic variants accept any space of this dimension.
    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub(crate) fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.spec.is_translation_invariant()
    }

    pub fn check(&self, u: &StateVector) -> Result<()> {
        if self.spec.is_generic() {
            if u.dim() != self.space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.space.dim(),
                    found: u.dim(),
                });
            }
            Ok(())
        } else {
            check_space(&self.space, u.space())
        }
    }

    pub fn eval(&self, u: &StateVector) -> Result<EnergyValue> {
        self.check(u)?;
        Ok(self.eval_raw(u.space().weights(), u.values()))
    }

    pub(crate) fn eval_raw(&self, weights: &[f64], x: &[f64]) -> EnergyValue {
        match self.functional.restrict(x) {
            None => EnergyValue::Infinite,
            Some(y) => {
                let w = self.functional.reduce_weights(weights);
                EnergyValue::Finite(self.functional.value(&y, &w))
            }
        }
    }

    /// Riesz representative of `DE(u)` in the owning space. For constrained
    /// energies this is the representative along the constraint manifold.
    pub fn gradient(&self, u: &StateVector) -> Result<StateVector> {
        self.check(u)?;
        if self.p() <= 1.0 && !matches!(self.spec, EnergySpec::Zero { .. }) {
            return Err(Error::Unsupported(
                "gradient of a p = 1 energy; use the dual certificate from prox".into(),
            ));
        }
        let f = &self.functional;
        let y = f
            .restrict(u.values())
            .ok_or_else(|| invalid("gradient requested outside the energy domain"))?;
        let w = f.reduce_weights(u.space().weights());
        let mut g = vec![0.0; f.reduced_dim];
        f.add_grad(&y, &w, &mut g);
        g.iter_mut().zip(&w).for_each(|(gi, wi)| *gi /= wi);
        let mut full: Vec<f64> = f
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Free(r) => g[r],
                Slot::Fixed(_) => 0.0,
            })
            .collect();
        if full.iter().any(|v| !v.is_finite()) {
            full.iter_mut().for_each(|v| {
                if !v.is_finite() {
                    *v = 0.0
                }
            });
        }
        StateVector::new(Arc::clone(u.space()), full)
    }
}

fn compile(spec: &EnergySpec) -> Result<Functional> {
    let p = spec.p();
    let f = match spec {
        EnergySpec::Zero { dim } => Functional::unconstrained(*dim, 2.0),
        EnergySpec::HalfSquaredNorm { dim } => {
            let mut f = Functional::unconstrained(*dim, 2.0);
            f.mass = 1.0;
            f
        }
        EnergySpec::CustomGraph { dim, edges, p } => {
            let mut f = Functional::unconstrained(*dim, *p);
            for &(a, b, c) in edges {
                f.edge(a, b, c);
            }
            f
        }
        EnergySpec::GraphPDirichlet { grid, p } => {
            let mut f = Functional::unconstrained(grid.node_count(), *p);
            let coef = grid.eps().powf(grid.dim() as f64 - p);
            for e in grid.edges() {
                let (a, b) = grid.edge_endpoints(e);
                f.edge(a, b, coef);
            }
            f
        }
        EnergySpec::OrthotropicP1 { grid, p } => {
            // one term per simplex and axis: vol · |Δ_k / eps|^p / p
            let mut f = Functional::unconstrained(grid.node_count(), *p);
            let coef = grid.simplex_volume() * grid.eps().powf(-p);
            for s in simplex::enumerate_simplices(grid) {
                let v = simplex::simplex_vertices(grid, &s);
                for k in 1..v.len() {
                    f.edge(v[k], v[k - 1], coef);
                }
            }
            f
        }
        EnergySpec::ThinSlab2D(s) => compile_thin(s),
        EnergySpec::Weighted1DLimit { g, p } => {
            let cells = g.len() - 1;
            let h = 1.0 / cells as f64;
            let mut f = Functional::unconstrained(cells + 1, *p);
            for i in 0..cells {
                f.edge(i + 1, i, 0.5 * (g[i] + g[i + 1]) * h.powf(1.0 - p));
            }
            f
        }
        EnergySpec::Interval1D { cells, p, boundary } => {
            let h = 1.0 / *cells as f64;
            let coef = h.powf(1.0 - p);
            let mut f = Functional::unconstrained(cells + 1, *p);
            match boundary {
                Boundary::Neumann => {
                    for i in 0..*cells {
                        f.edge(i + 1, i, coef);
                    }
                }
                Boundary::Dirichlet if *p > 1.0 => {
                    // interior unknowns 1..M-1 become reduced 0..M-2
                    f.slots = (0..=*cells)
                        .map(|i| {
                            if i == 0 || i == *cells {
                                Slot::Fixed(0.0)
                            } else {
                                Slot::Free(i - 1)
                            }
                        })
                        .collect();
                    f.reduced_dim = cells - 1;
                    for i in 0..*cells {
                        let term = match (i, i + 1) {
                            (0, b) => EdgeTerm {
                                a: b - 1,
                                b: None,
                                anchor: 0.0,
                                coef,
                            },
                            (a, b) if b == *cells => EdgeTerm {
                                a: a - 1,
                                b: None,
                                anchor: 0.0,
                                coef,
                            },
                            (a, b) => EdgeTerm {
                                a: b - 1,
                                b: Some(a - 1),
                                anchor: 0.0,
                                coef,
                            },
                        };
                        f.edges.push(term);
                    }
                }
                Boundary::Dirichlet => {
                    for i in 0..*cells {
                        f.edge(i + 1, i, coef);
                    }
                    for b in [0, *cells] {
                        f.edges.push(EdgeTerm {
                            a: b,
                            b: None,
                            anchor: 0.0,
                            coef: 1.0,
                        });
                    }
                }
            }
            f
        }
        EnergySpec::BoundaryLayer1D { cells, p, .. } => {
            let h = 1.0 / *cells as f64;
            let mut f = Functional::unconstrained(cells + 1, *p);
            for i in 0..*cells {
                f.edge(i + 1, i, h.powf(1.0 - p));
            }
            f
        }
        EnergySpec::DynamicBC1D { cells, p, .. } => {
            let h = 1.0 / *cells as f64;
            let m = *cells;
            if *p > 1.0 {
                let mut f = Functional::unconstrained(m + 3, *p);
                f.slots[m + 1] = Slot::Free(0);
                f.slots[m + 2] = Slot::Free(m);
                f.reduced_dim = m + 1;
                for i in 0..m {
                    f.edge(i + 1, i, h.powf(1.0 - p));
                }
                f
            } else {
                let mut f = Functional::unconstrained(m + 3, 1.0);
                for i in 0..m {
                    f.edge(i + 1, i, 1.0);
                }
                f.edge(0, m + 1, 1.0);
                f.edge(m, m + 2, 1.0);
                f
            }
        }
    };
    debug_assert_eq!(
        f.p,
        if matches!(
            spec,
            EnergySpec::Zero { .. } | EnergySpec::HalfSquaredNorm { .. }
        ) {
            2.0
        } else {
            p
        }
    );
    Ok(f)
}

fn compile_thin(s: &ThinSlab) -> Functional {
    let ny = s.layers;
    let mut f = Functional::unconstrained((s.cells_x + 1) * ny, s.p);
    let hx = s.h();
    let dz = 1.0 / ny as f64;
    let g = s.thickness();
    for i in 0..s.cells_x {
        let g_mid = 0.5 * (g[i] + g[i + 1]);
        let dg = (g[i + 1] - g[i]) / hx;
        let dgm = (s.g_minus[i + 1] - s.g_minus[i]) / hx;
        // constant extension into the two half layers next to z = 0 and z = 1
        let strip = g_mid * hx * 0.5 * dz * hx.powf(-s.p);
        f.edge(s.node(i + 1, 0), s.node(i, 0), strip);
        f.edge(s.node(i + 1, ny - 1), s.node(i, ny - 1), strip);
        for j in 0..ny.saturating_sub(1) {
            let z0 = (j as f64 + 0.5) * dz;
            // (local x offset, local z offset, nodes, reference gradient rows)
            let tris = [
                (
                    2.0 / 3.0,
                    1.0 / 3.0,
                    [s.node(i, j), s.node(i + 1, j), s.node(i + 1, j + 1)],
                    [-1.0 / hx, 1.0 / hx, 0.0],
                    [0.0, -1.0 / dz, 1.0 / dz],
                ),
                (
                    1.0 / 3.0,
                    2.0 / 3.0,
                    [s.node(i, j), s.node(i + 1, j + 1), s.node(i, j + 1)],
                    [0.0, 1.0 / hx, -1.0 / hx],
                    [-1.0 / dz, 0.0, 1.0 / dz],
                ),
            ];
            for (ox, oz, nodes, ax, az) in tris {
                let gc = g[i] + ox * (g[i + 1] - g[i]);
                let zc = z0 + oz * dz;
                let shear = (zc * dg + dgm) / gc;
                let mut gx = [0.0; 3];
                let mut gy = [0.0; 3];
                for k in 0..3 {
                    gx[k] = ax[k] - shear * az[k];
                    gy[k] = az[k] / (s.eps * gc);
                }
                f.grads.push(GradTerm {
                    nodes,
                    gx,
                    gy,
                    coef: gc * hx * dz * 0.5,
                });
            }
        }
    }
    f
}

/// Evaluates `energy` at `u` (convenience wrapper that compiles the spec).
pub fn eval(spec: &EnergySpec, u: &StateVector) -> Result<EnergyValue> {
    spec.build()?.eval(u)
}

pub fn gradient(spec: &EnergySpec, u: &StateVector) -> Result<StateVector> {
    spec.build()?.gradient(u)
}

/// `E_0` of the piecewise-affine interpolant of nodal values, integrated simplex
/// by simplex from the constant per-simplex gradient.
pub fn eval_orthotropic_on_p1(grid: &TorusGrid, p: f64, values: &[f64]) -> f64 {
    eval_orthotropic_with_quadrature(grid, p, values, |g| {
        (0..=g.dim()).map(|j| simplex::quad_lambda(g, j)).sum()
    })
}

/// As [`eval_orthotropic_on_p1`], with the simplex measure supplied by a
/// quadrature rule (`∫_△ 1 = Σ_j ∫_△ λ_j`).
pub fn eval_orthotropic_with_quadrature(
    grid: &TorusGrid,
    p: f64,
    values: &[f64],
    simplex_measure: impl Fn(&TorusGrid) -> f64,
) -> f64 {
    assert_eq!(values.len(), grid.node_count());
    let vol = simplex_measure(grid);
    let eps = grid.eps();
    let mut acc = CompensatedSum::new();
    for s in simplex::enumerate_simplices(grid) {
        let v = simplex::simplex_vertices(grid, &s);
        let mut local = 0.0;
        for k in 1..v.len() {
            let d = (values[v[k]] - values[v[k - 1]]) / eps;
            local += d.abs().powf(p);
        }
        acc.add(vol * local / p);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(e: &Energy, v: Vec<f64>) -> StateVector {
        e.space().vector(v).unwrap()
    }

    #[test]
    fn graph_energy_by_hand() {
        let grid = TorusGrid::new(1, 4).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 2.0 }
            .build()
            .unwrap();
        let u = state(&e, vec![1.0, 0.0, 0.0, 0.0]);
        assert!((e.eval(&u).unwrap().finite().unwrap() - 4.0).abs() < 1e-14);
        let c = state(&e, vec![2.5; 4]);
        assert_eq!(e.eval(&c).unwrap(), EnergyValue::Finite(0.0));
        assert!((eval_orthotropic_on_p1(&grid, 2.0, u.values()) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn graph_gradient_is_discrete_laplacian() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 2.0 }
            .build()
            .unwrap();
        let vals: Vec<f64> = (0..8).map(|i| ((i * i) % 5) as f64 * 0.3).collect();
        let g = e.gradient(&state(&e, vals.clone())).unwrap();
        let eps = 1.0 / 8.0;
        for z in 0..8 {
            let lap = (2.0 * vals[z] - vals[(z + 7) % 8] - vals[(z + 1) % 8]) / (eps * eps);
            assert!((g.values()[z] - lap).abs() < 1e-10 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn p1_gradient_is_unsupported() {
        let grid = TorusGrid::new(1, 4).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 1.0 }
            .build()
            .unwrap();
        assert!(matches!(
            e.gradient(&e.space().zeros()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn dynamic_bc_constraint_gives_infinity() {
        let e = EnergySpec::DynamicBC1D {
            cells: 4,
            p: 2.0,
            tau: 1.0,
        }
        .build()
        .unwrap();
        let ok = state(&e, vec![1.0, 0.5, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert!(e.eval(&ok).unwrap().finite().is_some());
        let bad = state(&e, vec![1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 1.0]);
        assert_eq!(e.eval(&bad).unwrap(), EnergyValue::Infinite);
    }

    #[test]
    fn dynamic_bc_relaxed_penalizes_trace_mismatch() {
        let e = EnergySpec::DynamicBC1D {
            cells: 4,
            p: 1.0,
            tau: 1.0,
        }
        .build()
        .unwrap();
        let u = state(&e, vec![1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 1.0]);
        // TV = 2, |u_0 - v_-| = 1, |u_M - v_+| = 0
        assert!((e.eval(&u).unwrap().finite().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_interval_pins_endpoints() {
        let e = EnergySpec::Interval1D {
            cells: 4,
            p: 2.0,
            boundary: Boundary::Dirichlet,
        }
        .build()
        .unwrap();
        let bad = state(&e, vec![0.1, 0.0, 0.0, 0.0, 0.0]);
        assert!(e.eval(&bad).unwrap().is_infinite());
        let good = state(&e, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        // two cells with slope ±4: ½ · h · 16 · 2 = 4
        assert!((e.eval(&good).unwrap().finite().unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_layer_weights_carry_the_layer_mass() {
        let w = boundary_layer_weights(8, 0.25).unwrap();
        let total: f64 = w.iter().sum();
        // |Ω| + 2 · (1/eps) · eps = 3
        assert!((total - 3.0).abs() < 1e-14);
        assert!(boundary_layer_weights(8, 0.3).is_err());
    }

    #[test]
    fn thin_slab_constant_extension_matches_limit_energy() {
        let slab = ThinSlab::from_profiles(
            6,
            4,
            0.1,
            1.5,
            |x| 0.2 * (x - 0.4).powi(2),
            |x| 1.0 + 0.5 * x,
        )
        .unwrap();
        let thin = EnergySpec::ThinSlab2D(slab.clone()).build().unwrap();
        let limit = slab.limit_spec().build().unwrap();
        let w: Vec<f64> = (0..=6).map(|i| (i as f64 * 0.7).sin()).collect();
        let ext: Vec<f64> = w
            .iter()
            .flat_map(|&x| std::iter::repeat(x).take(4))
            .collect();
        let e_thin = thin.eval(&state(&thin, ext)).unwrap().finite().unwrap();
        let e_lim = limit.eval(&state(&limit, w)).unwrap().finite().unwrap();
        assert!((e_thin - e_lim).abs() < 1e-13 * e_lim);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let grid = TorusGrid::new(1, 4).unwrap();
        assert!(EnergySpec::GraphPDirichlet { grid, p: 0.5 }
            .build()
            .is_err());
        assert!(EnergySpec::DynamicBC1D {
            cells: 4,
            p: 2.0,
            tau: 0.0
        }
        .build()
        .is_err());
        assert!(ThinSlab::new(4, 2, 0.1, 1.0, vec![0.0; 5], vec![1.0; 5]).is_err());
        assert!(ThinSlab::new(4, 2, 0.1, 2.0, vec![0.0; 5], vec![0.0; 5]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let grid = TorusGrid::new(1, 4).unwrap();
        let e = EnergySpec::GraphPDirichlet { grid, p: 2.0 }
            .build()
            .unwrap();
        let other = Arc::new(WeightedSpace::uniform("x", 4, 0.25).unwrap());
        assert!(e.eval(&other.zeros()).is_err());
    }
}
