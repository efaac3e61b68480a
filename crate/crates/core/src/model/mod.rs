//! JSON file formats: NQ model files (with an optional connection block),
//! exact model files and flow scenarios, plus the deterministic JSON writer
//! used for all reports.
//!
//! Coefficients are expression strings, plain numbers, or jet-valued
//! entries `{"taylor": [{"monomial": [..], "coefficient": v}, ..],
//! "valid_order": k}` holding Taylor coefficients `∂^m f / m!` about the
//! file's base point. Indices in `c` and `eta` are 1-based.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::connection::Connection;
use crate::error::{Error, Result};
use crate::exactcase::ExactModel;
use crate::flow::FlowDirection;
use crate::nq::NqStructure;
use crate::scalar::{Jet, JetSpace, ScalarField};
use crate::superalgebra::{GradedChart, MetricSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorTerm {
    pub monomial: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorSpec {
    pub taylor: Vec<TaylorTerm>,
    pub valid_order: u32,
}

/// One coefficient field as written in a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Expr(String),
    Taylor(TaylorSpec),
}

impl FieldSpec {
    pub fn to_field(&self, space: &Arc<JetSpace>, what: &str) -> Result<ScalarField> {
        match self {
            FieldSpec::Number(v) => Ok(ScalarField::constant(*v)),
            FieldSpec::Expr(s) => ScalarField::parse(s, space.dim())
                .map_err(|e| Error::Schema(format!("{what}: {e}"))),
            FieldSpec::Taylor(t) => {
                let mut coeffs = vec![0.0; space.len()];
                for term in &t.taylor {
                    if term.monomial.len() != space.dim() {
                        return Err(Error::Schema(format!(
                            "{what}: monomial {:?} needs {} exponents",
                            term.monomial,
                            space.dim()
                        )));
                    }
                    let idx = space.index_of(&term.monomial).ok_or_else(|| {
                        Error::Schema(format!("{what}: monomial {:?} exceeds jet_order", term.monomial))
                    })?;
                    coeffs[idx] += term.coefficient;
                }
                Ok(ScalarField::Taylor(Jet::from_taylor(space, coeffs, t.valid_order)?))
            }
        }
    }

    pub fn from_field(f: &ScalarField) -> FieldSpec {
        match f {
            ScalarField::Expr(e) => FieldSpec::Expr(e.to_string()),
            ScalarField::Taylor(j) => {
                let sp = j.space();
                let taylor = sp
                    .monomials()
                    .iter()
                    .zip(j.taylor())
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(m, &c)| TaylorTerm {
                        monomial: m.clone(),
                        coefficient: c,
                    })
                    .collect();
                FieldSpec::Taylor(TaylorSpec {
                    taylor,
                    valid_order: j.budget(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexedField {
    pub indices: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor: Option<Vec<TaylorTerm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_order: Option<u32>,
}

impl IndexedField {
    fn spec(&self) -> Result<FieldSpec> {
        match (&self.expr, &self.taylor) {
            (Some(e), None) if self.valid_order.is_none() => Ok(FieldSpec::Expr(e.clone())),
            (None, Some(t)) => Ok(FieldSpec::Taylor(TaylorSpec {
                taylor: t.clone(),
                valid_order: self.valid_order.ok_or_else(|| {
                    Error::Schema(format!("entry {:?}: taylor needs valid_order", self.indices))
                })?,
            })),
            _ => Err(Error::Schema(format!(
                "entry {:?}: give exactly one of expr or taylor",
                self.indices
            ))),
        }
    }

    fn zero_based(&self, dim: usize, what: &str) -> Result<[usize; 3]> {
        let mut out = [0; 3];
        for (o, &i) in out.iter_mut().zip(&self.indices) {
            if i == 0 || i > dim {
                return Err(Error::Schema(format!("{what} index {i} outside 1..={dim}")));
            }
            *o = i - 1;
        }
        Ok(out)
    }

    fn from_field(indices: [usize; 3], f: &ScalarField) -> IndexedField {
        match FieldSpec::from_field(f) {
            FieldSpec::Taylor(t) => IndexedField {
                indices,
                expr: None,
                taylor: Some(t.taylor),
                valid_order: Some(t.valid_order),
            },
            FieldSpec::Expr(e) => IndexedField {
                indices,
                expr: Some(e),
                taylor: None,
                valid_order: None,
            },
            FieldSpec::Number(v) => IndexedField {
                indices,
                expr: Some(v.to_string()),
                taylor: None,
                valid_order: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantTorsionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_plus: Option<Vec<Vec<Vec<FieldSpec>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<FieldSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub base_dim: usize,
    pub rank_plus: usize,
    pub rank_minus: usize,
    pub signature_plus: Vec<i8>,
    pub signature_minus: Vec<i8>,
    pub base_point: Vec<f64>,
    pub jet_order: u32,
    pub rho: Vec<Vec<FieldSpec>>,
    pub c: Vec<IndexedField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<Vec<FieldSpec>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_torsion: Option<InvariantTorsionSpec>,
}

fn schema<T>(r: std::result::Result<T, serde_json::Error>) -> Result<T> {
    r.map_err(|e| Error::Schema(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

impl ModelFile {
    pub fn from_json(src: &str) -> Result<ModelFile> {
        schema(serde_json::from_str(src))
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        ModelFile::from_json(&read(path)?)
    }

    fn has_taylor(&self) -> bool {
        let grid = |g: &Option<Vec<Vec<Vec<FieldSpec>>>>| {
            g.iter().flatten().flatten().flatten().any(|f| matches!(f, FieldSpec::Taylor(_)))
        };
        self.rho.iter().flatten().any(|f| matches!(f, FieldSpec::Taylor(_)))
            || self.c.iter().any(|e| e.taylor.is_some())
            || grid(&self.psi)
            || self.invariant_torsion.as_ref().is_some_and(|it| {
                grid(&it.psi_plus)
                    || it.lambda.iter().flatten().any(|f| matches!(f, FieldSpec::Taylor(_)))
            })
    }

    fn space(&self, point: Option<&[f64]>) -> Result<Arc<GradedChart>> {
        let p = point.unwrap_or(&self.base_point).to_vec();
        if p != self.base_point && self.has_taylor() {
            return Err(Error::ChartMismatch);
        }
        if p.len() != self.base_dim {
            return Err(Error::Schema(format!(
                "base point has {} entries, base_dim is {}",
                p.len(),
                self.base_dim
            )));
        }
        GradedChart::new(self.rank_plus, self.rank_minus, p, self.jet_order)
    }

    /// Build the structure at the file's base point, or at `point`.
    /// Jet-valued entries are tied to the file's base point.
    pub fn structure(&self, point: Option<&[f64]>) -> Result<NqStructure> {
        if self.signature_plus.len() != self.rank_plus || self.signature_minus.len() != self.rank_minus {
            return Err(Error::Schema("signature lengths must match rank_plus and rank_minus".into()));
        }
        let rank = self.rank_plus + self.rank_minus;
        if self.rho.len() != self.base_dim || self.rho.iter().any(|row| row.len() != rank) {
            return Err(Error::Schema(format!("rho must be {} x {rank}", self.base_dim)));
        }
        let chart = self.space(point)?;
        let sp = chart.jets().clone();
        let rho = self
            .rho
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, f)| f.to_field(&sp, &format!("rho[{}][{}]", i + 1, a + 1)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let c = self
            .c
            .iter()
            .map(|e| {
                let what = format!("c{:?}", e.indices);
                Ok((e.zero_based(rank, "c")?, e.spec()?.to_field(&sp, &what)?))
            })
            .collect::<Result<_>>()?;
        let metric = MetricSplit::new(self.signature_plus.clone(), self.signature_minus.clone())
            .map_err(|e| Error::Schema(e.to_string()))?;
        NqStructure::new(chart, metric, rho, c)
    }

    /// The connection block, if any.
    pub fn connection(&self, s: NqStructure) -> Result<Option<Connection>> {
        let sp = s.chart().jets().clone();
        let grid = |g: &[Vec<Vec<FieldSpec>>], what: &str| -> Result<Vec<Vec<Vec<ScalarField>>>> {
            g.iter()
                .map(|m| {
                    m.iter()
                        .map(|row| row.iter().map(|f| f.to_field(&sp, what)).collect())
                        .collect()
                })
                .collect()
        };
        match (&self.psi, &self.invariant_torsion) {
            (None, None) => Ok(None),
            (Some(p), None) => Ok(Some(Connection::new(s, grid(p, "psi")?)?)),
            (None, Some(it)) => match (&it.psi_plus, &it.lambda) {
                (Some(p), None) => Ok(Some(Connection::make_invariant_torsion(s, grid(p, "psi_plus")?)?)),
                (None, Some(l)) => {
                    let l = l.iter().map(|f| f.to_field(&sp, "lambda")).collect::<Result<_>>()?;
                    Ok(Some(Connection::pure_trace(s, l)?))
                }
                _ => Err(Error::Schema("invariant_torsion needs exactly one of psi_plus or lambda".into())),
            },
            (Some(_), Some(_)) => Err(Error::Schema("give psi or invariant_torsion, not both".into())),
        }
    }

    /// Serialize a structure (and optionally its connection).
    pub fn from_structure(s: &NqStructure, q: Option<&Connection>) -> ModelFile {
        let chart = s.chart();
        ModelFile {
            base_dim: chart.n(),
            rank_plus: chart.r(),
            rank_minus: chart.s(),
            signature_plus: s.metric().plus().to_vec(),
            signature_minus: s.metric().minus().to_vec(),
            base_point: chart.base_point().to_vec(),
            jet_order: chart.jet_order(),
            rho: s
                .rho_fields()
                .iter()
                .map(|row| row.iter().map(FieldSpec::from_field).collect())
                .collect(),
            c: s
                .c_fields()
                .iter()
                .map(|(k, f)| IndexedField::from_field([k[0] + 1, k[1] + 1, k[2] + 1], f))
                .collect(),
            psi: q.map(|q| {
                q.psi_fields()
                    .iter()
                    .map(|m| m.iter().map(|row| row.iter().map(FieldSpec::from_field).collect()).collect())
                    .collect()
            }),
            invariant_torsion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaEntry {
    pub indices: [usize; 3],
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactModelFile {
    pub dim: usize,
    pub metric: Vec<Vec<FieldSpec>>,
    #[serde(default)]
    pub eta: Vec<EtaEntry>,
    pub base_point: Vec<f64>,
    pub jet_order: u32,
}

impl ExactModelFile {
    pub fn from_json(src: &str) -> Result<ExactModelFile> {
        schema(serde_json::from_str(src))
    }

    pub fn load(path: &Path) -> Result<ExactModelFile> {
        ExactModelFile::from_json(&read(path)?)
    }

    pub fn model(&self, point: Option<&[f64]>) -> Result<ExactModel> {
        let m = self.dim;
        let p = point.unwrap_or(&self.base_point).to_vec();
        if p.len() != m {
            return Err(Error::Schema(format!("base point has {} entries, dim is {m}", p.len())));
        }
        if self.metric.len() != m || self.metric.iter().any(|row| row.len() != m) {
            return Err(Error::Schema(format!("metric must be {m} x {m}")));
        }
        // expression entries only, so any space of the right dimension parses them
        let sp = JetSpace::new(p.clone(), 0);
        let metric = self
            .metric
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| match f {
                        FieldSpec::Taylor(_) => Err(Error::Schema("metric entries must be expressions".into())),
                        f => f.to_field(&sp, "metric"),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let eta = self
            .eta
            .iter()
            .map(|e| {
                let idx = IndexedField {
                    indices: e.indices,
                    expr: None,
                    taylor: None,
                    valid_order: None,
                }
                .zero_based(m, "eta")?;
                let f = ScalarField::parse(&e.expr, m).map_err(|err| Error::Schema(format!("eta{:?}: {err}", e.indices)))?;
                Ok((idx, f))
            })
            .collect::<Result<_>>()?;
        ExactModel::new(metric, eta, p, self.jet_order)
    }
}

/// Model given inline or by path (relative paths resolve against the
/// scenario file's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(Box<ModelFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowScenario {
    pub model: ModelSource,
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub direction: FlowDirection,
    pub lambda: Vec<f64>,
}

impl FlowScenario {
    pub fn from_json(src: &str) -> Result<FlowScenario> {
        schema(serde_json::from_str(src))
    }

    pub fn load(path: &Path) -> Result<FlowScenario> {
        let mut sc = FlowScenario::from_json(&read(path)?)?;
        if let ModelSource::Path(p) = &sc.model {
            let full = match path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.clone(),
            };
            sc.model = ModelSource::Inline(Box::new(ModelFile::load(&full)?));
        }
        Ok(sc)
    }

    pub fn model_file(&self) -> Result<&ModelFile> {
        match &self.model {
            ModelSource::Inline(m) => Ok(m),
            ModelSource::Path(p) => Err(Error::Schema(format!("model path {} was not resolved", p.display()))),
        }
    }
}

/// JSON with object keys in insertion order and every non-integer number
/// printed with 17 significant digits.
pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let v = schema(serde_json::to_value(value))?;
    let mut out = String::new();
    write_value(&v, pretty, 0, &mut out);
    Ok(out)
}

fn write_number(n: &serde_json::Number, out: &mut String) {
    if n.is_i64() || n.is_u64() {
        out.push_str(&n.to_string());
        return;
    }
    let x = n.as_f64().unwrap_or(f64::NAN);
    out.push_str(&format!("{x:.16e}"));
}

fn write_value(v: &Value, pretty: bool, depth: usize, out: &mut String) {
    let indent = |d: usize, out: &mut String| {
        if pretty {
            out.push('\n');
            out.push_str(&"  ".repeat(d));
        }
    };
    match v {
        Value::Number(n) => write_number(n, out),
        Value::Array(items) => {
            // numeric rows stay on one line
            let flat = items.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if pretty && flat {
                        out.push(' ');
                    }
                }
                if !flat {
                    indent(depth + 1, out);
                }
                write_value(x, pretty, depth + 1, out);
            }
            if !flat && !items.is_empty() {
                indent(depth, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, x)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(depth + 1, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(x, pretty, depth + 1, out);
            }
            if !map.is_empty() {
                indent(depth, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}
