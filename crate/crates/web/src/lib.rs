//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use nqricci::connection::ricci_closed_form;
use nqricci::exactcase::{fixtures, MASTER_TOL};
use nqricci::flow::{run_flow, tilted_double, FlowDirection};
use nqricci::model::{to_json, ModelFile};
use nqricci::scalar::ScalarField;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct RicciOut {
    engine: Vec<Vec<f64>>,
    closed_form: Option<Vec<Vec<f64>>>,
    max_deviation: Option<f64>,
    torsion_invariant: bool,
}

pub fn ricci_json(model: &str) -> Result<String, String> {
    let inner = || -> nqricci::Result<RicciOut> {
        let m = ModelFile::from_json(model)?;
        let s = m.structure(None)?;
        let res = s.check_master_equation(MASTER_TOL)?;
        if !res.is_valid() {
            return Err(nqricci::Error::MasterEquationFailure(res.max_abs()));
        }
        let q = m
            .connection(s)?
            .ok_or_else(|| nqricci::Error::Schema("model has no psi or invariant_torsion block".into()))?;
        let engine = q.ricci_engine(MASTER_TOL)?;
        let invariant = q.check_torsion_invariance(MASTER_TOL)?.is_invariant();
        let closed = if invariant {
            let lambda: Vec<ScalarField> = q.lambda()?.into_iter().map(ScalarField::Taylor).collect();
            Some(ricci_closed_form(q.structure(), &lambda)?)
        } else {
            None
        };
        Ok(RicciOut {
            max_deviation: closed.as_ref().map(|c| engine.max_diff(c)),
            engine: engine.ric,
            closed_form: closed.map(|c| c.ric),
            torsion_invariant: invariant,
        })
    };
    let out = inner().map_err(|e| e.to_string())?;
    to_json(&out, false).map_err(|e| e.to_string())
}

pub fn sphere3_json(k: f64, x1: f64, x2: f64, x3: f64) -> Result<String, String> {
    let m = fixtures::round_s3(k, vec![x1, x2, x3], 3).map_err(|e| e.to_string())?;
    let c = m.compare().map_err(|e| e.to_string())?;
    to_json(&c, false).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FlowPoint {
    t: f64,
    ric_norm: f64,
}

#[derive(Serialize)]
struct FlowOut {
    points: Vec<FlowPoint>,
    rejected: Option<String>,
}

pub fn flow_json(k_plus: f64, k_minus: f64, tilt: f64, dt: f64, steps: usize, forward: bool) -> Result<String, String> {
    let st = tilted_double(k_plus, k_minus, tilt, vec![0.0; 3]).map_err(|e| e.to_string())?;
    let dir = if forward { FlowDirection::Forward } else { FlowDirection::Backward };
    let traj = run_flow(&st, steps, dt, dir).map_err(|e| e.to_string())?;
    let out = FlowOut {
        points: traj
            .records
            .iter()
            .map(|r| FlowPoint {
                t: r.t,
                ric_norm: r.ric_norm,
            })
            .collect(),
        rejected: traj.rejected.map(|e| e.to_string()),
    };
    to_json(&out, false).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Engine and closed-form Ricci of a point-base model file.
#[wasm_bindgen]
pub fn ricci(model: &str) -> Result<String, JsError> {
    js(ricci_json(model))
}

/// Graded and classical Ricci of the round 3-sphere with torsion `k·vol`.
#[wasm_bindgen]
pub fn sphere3(k: f64, x1: f64, x2: f64, x3: f64) -> Result<String, JsError> {
    js(sphere3_json(k, x1, x2, x3))
}

/// Ricci norm along the flow of a tilted double.
#[wasm_bindgen]
pub fn flow(k_plus: f64, k_minus: f64, tilt: f64, dt: f64, steps: usize, forward: bool) -> Result<String, JsError> {
    js(flow_json(k_plus, k_minus, tilt, dt, steps, forward))
}
