//! Browser bindings: a graph flow, a single prox step and connector norms.

use std::f64::consts::PI;

use mosco_core::connect::{
    boundary_layer_connector, graph_p1_connector, operator_norm_estimate, tau_projection_connector,
    TauMode,
};
use mosco_core::energies::EnergySpec;
use mosco_core::flow::{minimizing_movements, FlowRunSpec};
use mosco_core::prox::{prox, ProxOptions};
use mosco_core::simplex::TorusGrid;
use wasm_bindgen::prelude::*;

fn graph_energy(m: usize, p: f64) -> Result<mosco_core::Energy, String> {
    let grid = TorusGrid::new(1, m).map_err(|e| e.to_string())?;
    EnergySpec::GraphPDirichlet { grid, p }
        .build()
        .map_err(|e| e.to_string())
}

/// Minimizing movements for the p-Dirichlet energy on the cycle of `m` nodes,
/// started from `cos(2πx) + 0.5 sin(4πx)`. Returns `steps + 1` rows of `m` values.
pub fn graph_flow_rows(m: usize, p: f64, horizon: f64, steps: usize) -> Result<Vec<f64>, String> {
    let e = graph_energy(m, p)?;
    let u0: Vec<f64> = (0..m)
        .map(|i| {
            let x = i as f64 / m as f64;
            (2.0 * PI * x).cos() + 0.5 * (4.0 * PI * x).sin()
        })
        .collect();
    let u0 = e.space().vector(u0).map_err(|e| e.to_string())?;
    let out = minimizing_movements(&FlowRunSpec::new(e, u0, horizon, steps))
        .map_err(|e| e.to_string())?;
    Ok((0..=steps)
        .flat_map(|k| out.trajectory.values(k).to_vec())
        .collect())
}

/// `J_λ(w)` for the p-Dirichlet energy on the cycle of `w.len()` nodes.
pub fn prox_values(w: Vec<f64>, p: f64, lambda: f64) -> Result<Vec<f64>, String> {
    let e = graph_energy(w.len(), p)?;
    let w = e.space().vector(w).map_err(|e| e.to_string())?;
    let (v, _) = prox(&e, &w, lambda, &ProxOptions::default()).map_err(|e| e.to_string())?;
    Ok(v.values().to_vec())
}

/// Power-iteration estimate of a connector norm. `kind` is `graph`, `layer` or `tau`;
/// `param` is `1/eps` for `graph`, `eps` for `layer` and `tau` for `tau`.
pub fn connector_norm_value(kind: &str, param: f64) -> Result<f64, String> {
    let c = match kind {
        "graph" => {
            let grid = TorusGrid::new(1, param.round() as usize).map_err(|e| e.to_string())?;
            graph_p1_connector(&grid, 256)
        }
        "layer" => boundary_layer_connector(256, param),
        "tau" => tau_projection_connector(64, param, TauMode::ToNeumann),
        other => return Err(format!("unknown connector `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    operator_norm_estimate(&c, 200)
        .map(|n| n.norm)
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn graph_flow(m: usize, p: f64, horizon: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    graph_flow_rows(m, p, horizon, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn prox_step(w: Vec<f64>, p: f64, lambda: f64) -> Result<Vec<f64>, JsError> {
    prox_values(w, p, lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn connector_norm(kind: &str, param: f64) -> Result<f64, JsError> {
    connector_norm_value(kind, param).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_rows_have_the_expected_shape_and_decay() {
        let rows = graph_flow_rows(16, 2.0, 0.05, 5).unwrap();
        assert_eq!(rows.len(), 6 * 16);
        let sup = |k: usize| {
            rows[k * 16..(k + 1) * 16]
                .iter()
                .fold(0.0f64, |a, x| a.max(x.abs()))
        };
        assert!(sup(5) < sup(0));
    }

    #[test]
    fn prox_of_a_constant_is_the_constant() {
        let v = prox_values(vec![0.7; 8], 1.5, 0.3).unwrap();
        assert!(v.iter().all(|x| (x - 0.7).abs() < 1e-10));
    }

    #[test]
    fn connector_norms_are_contractive() {
        for (kind, param) in [("graph", 8.0), ("layer", 0.125), ("tau", 0.1)] {
            let n = connector_norm_value(kind, param).unwrap();
            assert!(n <= 1.0 + 1e-10 && n > 0.5, "{kind}: {n}");
        }
        assert!(connector_norm_value("spline", 1.0).is_err());
    }
}
