//! Report builders. Each returns the JSON value and whether the validation
//! verdict failed.

use std::path::Path;

use nqricci::connection::{ricci_closed_form, Connection, RicciTensor};
use nqricci::exactcase::{ExactModel, MASTER_TOL};
use nqricci::flow::{run_flow, FlowDirection, FlowState};
use nqricci::model::{ExactModelFile, FlowScenario, ModelFile};
use nqricci::nq::{MasterResidual, NqStructure, ResidualGroup, ResidualShape};
use nqricci::scalar::ScalarField;
use nqricci::{Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::{PointArgs, RicciPathArg};

/// Tolerance for the master-equation gate in front of connection reports.
const GATE_TOL: f64 = MASTER_TOL;

type Report = (Value, bool);

fn value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Schema(e.to_string()))
}

fn collect(reports: Vec<Report>, single: bool) -> Report {
    let failed = reports.iter().any(|r| r.1);
    if single {
        (reports.into_iter().next().map(|r| r.0).unwrap_or(Value::Null), failed)
    } else {
        (Value::Array(reports.into_iter().map(|r| r.0).collect()), failed)
    }
}

fn points(args: &PointArgs) -> Vec<Option<&[f64]>> {
    if args.points.is_empty() {
        vec![None]
    } else {
        args.points.iter().map(|p| Some(p.as_slice())).collect()
    }
}

pub fn per_point(
    args: &PointArgs,
    f: impl Fn(&ModelFile, Option<&[f64]>, Option<f64>) -> Result<Report>,
) -> Result<Report> {
    let m = ModelFile::load(&args.input)?;
    let reports = points(args)
        .into_iter()
        .map(|p| f(&m, p, args.tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(reports, args.points.len() <= 1))
}

pub fn per_exact_point(
    args: &PointArgs,
    f: impl Fn(&ExactModel, Option<f64>) -> Result<Report>,
) -> Result<Report> {
    let m = ExactModelFile::load(&args.input)?;
    let reports = points(args)
        .into_iter()
        .map(|p| f(&m.model(p)?, args.tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(reports, args.points.len() <= 1))
}

#[derive(Serialize)]
struct MasterReport {
    base_point: Vec<f64>,
    valid: bool,
    tol: f64,
    max_residual: f64,
    groups: Vec<ResidualGroup>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pp_matrix: Option<Vec<Vec<f64>>>,
    residual: String,
}

fn master_report(s: &NqStructure, res: &MasterResidual) -> MasterReport {
    let has_pp = res.groups.iter().any(|g| g.shape == ResidualShape::PP);
    MasterReport {
        base_point: s.chart().base_point().to_vec(),
        valid: res.is_valid(),
        tol: res.tol,
        max_residual: res.max_abs(),
        groups: res.groups.clone(),
        pp_matrix: has_pp.then(|| res.pp_matrix()),
        residual: res.residual.render(),
    }
}

pub fn validate(m: &ModelFile, point: Option<&[f64]>, tol: Option<f64>) -> Result<Report> {
    let s = m.structure(point)?;
    let res = s.check_master_equation(tol.unwrap_or(1e-10))?;
    Ok((value(&master_report(&s, &res))?, !res.is_valid()))
}

/// Structure and connection, or the failing master report.
fn gated(m: &ModelFile, point: Option<&[f64]>) -> Result<std::result::Result<Connection, Report>> {
    let s = m.structure(point)?;
    let res = s.check_master_equation(GATE_TOL)?;
    if !res.is_valid() {
        #[derive(Serialize)]
        struct Rejected {
            error: &'static str,
            master: MasterReport,
        }
        let r = Rejected {
            error: "master equation fails",
            master: master_report(&s, &res),
        };
        return Ok(Err((value(&r)?, true)));
    }
    let q = m
        .connection(s)?
        .ok_or_else(|| Error::Schema("model has no psi or invariant_torsion block".into()))?;
    Ok(Ok(q))
}

#[derive(Serialize)]
struct RicciReport {
    base_point: Vec<f64>,
    torsion_invariant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    engine: Option<RicciTensor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<RicciTensor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agree: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'static str>,
}

pub fn ricci(m: &ModelFile, point: Option<&[f64]>, tol: Option<f64>, path: RicciPathArg) -> Result<Report> {
    let q = match gated(m, point)? {
        Ok(q) => q,
        Err(r) => return Ok(r),
    };
    let tol = tol.unwrap_or(1e-9);
    let invariant = q.check_torsion_invariance(GATE_TOL)?.is_invariant();
    let want_engine = path != RicciPathArg::Closed;
    let want_closed = path != RicciPathArg::Engine;
    let engine = if want_engine { Some(q.ricci_engine(GATE_TOL)?) } else { None };
    let mut report = RicciReport {
        base_point: q.chart().base_point().to_vec(),
        torsion_invariant: invariant,
        engine,
        closed_form: None,
        max_deviation: None,
        agree: None,
        error: None,
    };
    if want_closed {
        if !invariant {
            report.error = Some("closed form needs invariant torsion");
            return Ok((value(&report)?, true));
        }
        let lambda: Vec<ScalarField> = q.lambda()?.into_iter().map(ScalarField::Taylor).collect();
        report.closed_form = Some(ricci_closed_form(q.structure(), &lambda)?);
    }
    let mut failed = false;
    if let (Some(e), Some(c)) = (&report.engine, &report.closed_form) {
        let d = e.max_diff(c);
        report.max_deviation = Some(d);
        report.agree = Some(d <= tol);
        failed = d > tol;
    }
    Ok((value(&report)?, failed))
}

#[derive(Serialize)]
struct Deviation {
    a: usize,
    b: usize,
    dotted: usize,
    deviation: f64,
}

#[derive(Serialize)]
struct TorsionReport {
    base_point: Vec<f64>,
    torsion: String,
    invariant: bool,
    by_involution: bool,
    by_components: bool,
    residual_max: f64,
    /// 1-based, `dotted` counts within the dotted block
    deviations: Vec<Deviation>,
}

pub fn torsion(m: &ModelFile, point: Option<&[f64]>, tol: Option<f64>) -> Result<Report> {
    let q = match gated(m, point)? {
        Ok(q) => q,
        Err(r) => return Ok(r),
    };
    let inv = q.check_torsion_invariance(tol.unwrap_or(1e-9))?;
    let r = TorsionReport {
        base_point: q.chart().base_point().to_vec(),
        torsion: q.torsion()?.render(),
        invariant: inv.is_invariant(),
        by_involution: inv.by_involution,
        by_components: inv.by_components,
        residual_max: inv.residual_max,
        deviations: inv
            .deviations
            .iter()
            .map(|d| Deviation {
                a: d.a + 1,
                b: d.b + 1,
                dotted: d.dotted + 1,
                deviation: d.deviation,
            })
            .collect(),
    };
    Ok((value(&r)?, !inv.is_invariant()))
}

#[derive(Serialize)]
struct Image {
    generator: String,
    image: String,
}

#[derive(Serialize)]
struct CurvatureReport {
    base_point: Vec<f64>,
    curvature: Vec<Image>,
    antiselfdual: Vec<Image>,
    ricci: Vec<Vec<f64>>,
}

pub fn curvature(m: &ModelFile, point: Option<&[f64]>, tol: Option<f64>) -> Result<Report> {
    let q = match gated(m, point)? {
        Ok(q) => q,
        Err(r) => return Ok(r),
    };
    let d = q.curvature(tol.unwrap_or(GATE_TOL))?;
    let p = d.project_antiselfdual();
    let images = |e: &nqricci::connection::End2Element| -> Vec<Image> {
        e.images()
            .iter()
            .enumerate()
            .map(|(a, img)| Image {
                generator: format!("xi{}", a + 1),
                image: img.render(),
            })
            .collect()
    };
    let ricci = d
        .contract()?
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    let r = CurvatureReport {
        base_point: q.chart().base_point().to_vec(),
        curvature: images(&d),
        antiselfdual: images(&p),
        ricci,
    };
    Ok((value(&r)?, false))
}

pub fn exact_compare(m: &ExactModel, tol: Option<f64>) -> Result<Report> {
    let tol = tol.unwrap_or(1e-6);
    let closed = m.check_closed(1e-12)?;
    if !closed.closed {
        #[derive(Serialize)]
        struct NotClosed {
            error: &'static str,
            closed: nqricci::exactcase::ClosedCheck,
        }
        let r = NotClosed {
            error: "eta is not closed",
            closed,
        };
        return Ok((value(&r)?, true));
    }
    let c = m.compare()?;
    let failed = c.max_deviation > tol;
    let mut v = value(&c)?;
    if let Value::Object(map) = &mut v {
        map.insert("tol".into(), value(&tol)?);
        map.insert("agree".into(), Value::Bool(!failed));
    }
    Ok((v, failed))
}

pub fn exact_export(m: &ExactModel, _tol: Option<f64>) -> Result<Report> {
    let frame = m.build_frame()?;
    let nq = m.build_nq(&frame)?;
    let q = m.levi_civita_connection(&frame, nq.clone())?;
    Ok((value(&ModelFile::from_structure(&nq, Some(&q)))?, false))
}

pub fn flow(input: &Path, direction: Option<FlowDirection>) -> Result<(Vec<Value>, Option<Error>)> {
    let sc = FlowScenario::load(input)?;
    let s = sc.model_file()?.structure(None)?;
    let st = FlowState::from_structure(&s, sc.lambda.clone())?;
    let traj = run_flow(&st, sc.steps, sc.dt, direction.unwrap_or(sc.direction))?;
    let records = traj.records.iter().map(value).collect::<Result<_>>()?;
    Ok((records, traj.rejected))
}
