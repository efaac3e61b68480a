//! Infinitesimal generalized Ricci flow for point-base models.
//!
//! The ambient space is `R^d` with a constant diagonal pairing `G` and fixed
//! structure constants `c0`. The state is a `G`-orthonormal frame `F` whose
//! first `r` columns span `V₊`. Each step reads `Ric` off the current frame,
//! turns it into a deformation `A: V₊ → V₋` and moves the frame by an
//! explicit Euler step followed by Gram–Schmidt against `G`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::connection::{ricci_closed_form, RicciTensor};
use crate::error::{Error, Result};
use crate::nq::{sort3, NqStructure};
use crate::scalar::ScalarField;
use crate::superalgebra::{GradedChart, MetricSplit};

/// Which way to flow. `Forward` decreases the Ricci norm near the
/// direct-sum fixed point of a tilted double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    #[default]
    Forward,
    Backward,
}

impl FlowDirection {
    fn sign(self) -> f64 {
        match self {
            FlowDirection::Forward => FORWARD_SIGN,
            FlowDirection::Backward => -FORWARD_SIGN,
        }
    }
}

// A = FORWARD_SIGN · (−g^{ȧȧ} R_{aȧ}) for the forward flow.
const FORWARD_SIGN: f64 = 1.0;

const ORTHO_TOL: f64 = 1e-9;

/// `A_{aȧ} = ± (−g^{ȧȧ} R_{aȧ})`, an `r × s` matrix.
pub fn deformation_from_ric(ric: &RicciTensor, metric: &MetricSplit, direction: FlowDirection) -> Vec<Vec<f64>> {
    let r = metric.plus().len();
    let k = direction.sign();
    ric.ric
        .iter()
        .take(r)
        .map(|row| {
            row.iter()
                .zip(metric.minus())
                .map(|(&v, &g)| {
                    let a = -k * g as f64 * v;
                    // keep an exact zero for a zero tensor
                    if a == 0.0 { 0.0 } else { a }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub ric_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    g: Vec<i8>,
    r: usize,
    c0: BTreeMap<[usize; 3], f64>,
    /// `frame[i][α]`: ambient component `i` of the adapted vector `α`
    frame: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    t: f64,
    step_log: Vec<StepRecord>,
}

impl FlowState {
    /// `g` is the ambient diagonal pairing, plus block first. The frame must
    /// satisfy `FᵀGF = diag(g)` and `c0` must satisfy the master equation.
    pub fn new(
        g: Vec<i8>,
        r: usize,
        c0: Vec<([usize; 3], f64)>,
        frame: Vec<Vec<f64>>,
        lambda: Vec<f64>,
    ) -> Result<FlowState> {
        let d = g.len();
        if r > d {
            return Err(Error::Shape(format!("rank_plus {r} exceeds dimension {d}")));
        }
        if lambda.len() != r {
            return Err(Error::Shape(format!("lambda must have {r} entries")));
        }
        if frame.len() != d || frame.iter().any(|row| row.len() != d) {
            return Err(Error::Shape(format!("frame must be {d} x {d}")));
        }
        let mut map = BTreeMap::new();
        for (idx, v) in c0 {
            if idx.iter().any(|&i| i >= d) {
                return Err(Error::Shape(format!("structure index {idx:?} out of range")));
            }
            let (k, s) = sort3(idx).ok_or_else(|| Error::Shape(format!("repeated index {idx:?}")))?;
            if map.insert(k, s * v).is_some() {
                return Err(Error::Shape(format!("duplicate structure constant {k:?}")));
            }
        }
        let st = FlowState {
            g,
            r,
            c0: map,
            frame,
            lambda,
            t: 0.0,
            step_log: Vec::new(),
        };
        let dev = st.orthonormality_defect();
        if dev > ORTHO_TOL {
            return Err(Error::Shape(format!("frame is not G-orthonormal (defect {dev:e})")));
        }
        let res = st.structure()?.check_master_equation(1e-9)?;
        if !res.is_valid() {
            return Err(Error::MasterEquationFailure(res.max_abs()));
        }
        Ok(st)
    }

    /// Start from a point-base structure in its own frame.
    pub fn from_structure(s: &NqStructure, lambda: Vec<f64>) -> Result<FlowState> {
        let chart = s.chart();
        if chart.n() != 0 {
            return Err(Error::Shape("flow needs a point-base model (base_dim 0)".into()));
        }
        let d = chart.rank();
        let mut g = s.metric().plus().to_vec();
        g.extend_from_slice(s.metric().minus());
        let c0 = s.c_components().map(|(k, c)| (*k, c.value())).collect();
        FlowState::new(g, chart.r(), c0, identity(d), lambda)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn rank_plus(&self) -> usize {
        self.r
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn step_log(&self) -> &[StepRecord] {
        &self.step_log
    }

    pub fn pairing(&self) -> &[i8] {
        &self.g
    }

    pub fn metric_split(&self) -> Result<MetricSplit> {
        MetricSplit::new(self.g[..self.r].to_vec(), self.g[self.r..].to_vec())
    }

    /// `c(Fe_α, Fe_β, Fe_γ)` for `α<β<γ`.
    pub fn structure_constants(&self) -> Vec<([usize; 3], f64)> {
        let d = self.dim();
        let f = &self.frame;
        let mut out = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                for c in b + 1..d {
                    let mut v = 0.0;
                    for (&[i, j, k], &x) in &self.c0 {
                        // sum over the six orderings of the stored triple
                        for (p, q, s, sign) in [
                            (i, j, k, 1.0),
                            (j, k, i, 1.0),
                            (k, i, j, 1.0),
                            (j, i, k, -1.0),
                            (i, k, j, -1.0),
                            (k, j, i, -1.0),
                        ] {
                            v += sign * x * f[p][a] * f[q][b] * f[s][c];
                        }
                    }
                    if v != 0.0 {
                        out.push(([a, b, c], v));
                    }
                }
            }
        }
        out
    }

    /// The point-base NQ structure in the current frame.
    pub fn structure(&self) -> Result<NqStructure> {
        let chart = GradedChart::new(self.r, self.dim() - self.r, vec![], 0)?;
        let c = self
            .structure_constants()
            .into_iter()
            .map(|(k, v)| (k, ScalarField::constant(v)))
            .collect();
        NqStructure::new(chart, self.metric_split()?, vec![], c)
    }

    /// Ricci tensor of the current frame with the constant trace `λ`.
    pub fn ricci(&self) -> Result<RicciTensor> {
        let lambda: Vec<ScalarField> = self.lambda.iter().map(|&l| ScalarField::constant(l)).collect();
        ricci_closed_form(&self.structure()?, &lambda)
    }

    /// `max |FᵀGF − diag(g)|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.dim();
        let mut max = 0.0f64;
        for a in 0..d {
            for b in a..d {
                let want = if a == b { self.g[a] as f64 } else { 0.0 };
                max = max.max((self.pair(a, b) - want).abs());
            }
        }
        max
    }

    fn pair(&self, a: usize, b: usize) -> f64 {
        pair_columns(&self.g, &self.frame, a, b)
    }

    /// `F_a += dt Σ A_{aȧ} F_ȧ`, `F_ȧ += dt Σ B_{ȧa} F_a` with
    /// `B_{ȧa} = −g_{aa} A_{aȧ} g_{ȧȧ}`, then Gram–Schmidt against `G`.
    pub fn euler_step(&self, dt: f64, direction: FlowDirection) -> Result<FlowState> {
        let ric = self.ricci()?;
        let metric = self.metric_split()?;
        let a = deformation_from_ric(&ric, &metric, direction);
        let d = self.dim();
        let r = self.r;
        let mut next = self.frame.clone();
        for (ai, row) in a.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let ad = r + k;
                let b = -(self.g[ai] as f64) * v * self.g[ad] as f64;
                for i in 0..d {
                    next[i][ai] += dt * v * self.frame[i][ad];
                    next[i][ad] += dt * b * self.frame[i][ai];
                }
            }
        }
        let frame = gram_schmidt(&self.g, next)?;
        let mut st = FlowState {
            frame,
            t: self.t + dt,
            ..self.clone()
        };
        let norm = frobenius(&st.ricci()?);
        st.step_log.push(StepRecord { t: st.t, ric_norm: norm });
        Ok(st)
    }

    /// One trajectory record for the current state.
    pub fn record(&self) -> Result<TrajectoryRecord> {
        Ok(TrajectoryRecord {
            t: self.t,
            ric_norm: frobenius(&self.ricci()?),
            frame: self.frame.clone(),
        })
    }

    /// Largest absolute frame entry difference.
    pub fn frame_distance(&self, other: &FlowState) -> f64 {
        self.frame
            .iter()
            .flatten()
            .zip(other.frame.iter().flatten())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

pub fn frobenius(ric: &RicciTensor) -> f64 {
    ric.ric.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub ric_norm: f64,
    pub frame: Vec<Vec<f64>>,
}

/// Records for the initial state and after every step. On `StepRejected`
/// the records so far are kept and the error is reported alongside.
#[derive(Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: FlowState,
    pub rejected: Option<Error>,
}

pub fn run_flow(st: &FlowState, steps: usize, dt: f64, direction: FlowDirection) -> Result<Trajectory> {
    let mut records = vec![st.record()?];
    let mut cur = st.clone();
    for _ in 0..steps {
        match cur.euler_step(dt, direction) {
            Ok(next) => {
                cur = next;
                records.push(cur.record()?);
            }
            Err(e @ Error::StepRejected(_)) => {
                return Ok(Trajectory {
                    records,
                    final_state: cur,
                    rejected: Some(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        records,
        final_state: cur,
        rejected: None,
    })
}

/// The so(3) ⊕ so(3) double with pairing `diag(+,+,+,−,−,−)`, structure
/// constants `c_{123} = k_plus`, `c_{456} = k_minus`, and `V₊` tilted by the
/// boost `F_a = cosh t ê_a + sinh t ê_{a+3}`, `F_ȧ = sinh t ê_a + cosh t ê_{a+3}`.
pub fn tilted_double(k_plus: f64, k_minus: f64, t: f64, lambda: Vec<f64>) -> Result<FlowState> {
    let mut frame = vec![vec![0.0; 6]; 6];
    let (ch, sh) = (t.cosh(), t.sinh());
    for a in 0..3 {
        frame[a][a] = ch;
        frame[a + 3][a] = sh;
        frame[a][a + 3] = sh;
        frame[a + 3][a + 3] = ch;
    }
    FlowState::new(
        vec![1, 1, 1, -1, -1, -1],
        3,
        vec![([0, 1, 2], k_plus), ([3, 4, 5], k_minus)],
        frame,
        lambda,
    )
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn pair_columns(g: &[i8], f: &[Vec<f64>], a: usize, b: usize) -> f64 {
    g.iter().enumerate().map(|(i, &gi)| gi as f64 * f[i][a] * f[i][b]).sum()
}

/// Column-wise Gram–Schmidt against `G`, keeping column `k`'s norm sign equal to `g[k]`.
fn gram_schmidt(g: &[i8], mut f: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let d = g.len();
    for k in 0..d {
        for j in 0..k {
            let p = pair_columns(g, &f, k, j) * g[j] as f64;
            for row in f.iter_mut() {
                row[k] -= p * row[j];
            }
        }
        let n2 = pair_columns(g, &f, k, k);
        if !(n2 * g[k] as f64 > 1e-12) {
            return Err(Error::StepRejected(format!(
                "column {} lost its norm sign during re-orthonormalization ({n2:e})",
                k + 1
            )));
        }
        let s = (n2 * g[k] as f64).sqrt();
        for row in f.iter_mut() {
            row[k] /= s;
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests;
