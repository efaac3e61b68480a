//! The exact Courant algebroid `T ⊕ T*` twisted by a closed 3-form `η`,
//! with generalized metric given by a metric `g` on the base.
//!
//! Conventions: pairing `⟨X+ξ, Y+ζ⟩ = ½(ξ(Y) + ζ(X))`, Dorfman bracket
//! `[X+ξ, Y+ζ] = [X,Y] + L_X ζ − i_Y dξ + i_X i_Y η` with
//! `(i_X i_Y η)_k = η(Y, X, ∂_k)`, adapted sections `s_a = E_a + F_a`,
//! `s_ȧ = E_a − F_a` with `F_a = g(E_a, ·)`. Then `⟨s_a, s_b⟩ = ε_a δ_ab`,
//! `⟨s_ȧ, s_ḃ⟩ = −ε_a δ_ab` and the anchor is `E` on both sectors.

pub mod fixtures;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::connection::{ricci_closed_form, Connection};
use crate::error::{Error, Result};
use crate::nq::{sort3, NqStructure};
use crate::scalar::{Jet, JetSpace, ScalarField};
use crate::superalgebra::{GradedChart, MetricSplit};

/// Default master-equation tolerance for jet-valued structures.
pub const MASTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ExactModel {
    metric: Vec<Vec<ScalarField>>,
    eta: BTreeMap<[usize; 3], ScalarField>,
    space: Arc<JetSpace>,
    g: Vec<Vec<Jet>>,
    eta_jets: BTreeMap<[usize; 3], Jet>,
}

impl ExactModel {
    /// `eta` components may come in any index order. Requires jet order ≥ 2.
    pub fn new(
        metric: Vec<Vec<ScalarField>>,
        eta: Vec<([usize; 3], ScalarField)>,
        base_point: Vec<f64>,
        jet_order: u32,
    ) -> Result<ExactModel> {
        let m = base_point.len();
        if m == 0 {
            return Err(Error::Shape("exact model needs dim ≥ 1".into()));
        }
        if metric.len() != m || metric.iter().any(|row| row.len() != m) {
            return Err(Error::Shape(format!("metric must be {m} x {m}")));
        }
        if jet_order < 2 {
            return Err(Error::Shape("exact models need jet_order ≥ 2".into()));
        }
        let mut emap = BTreeMap::new();
        for (idx, f) in eta {
            if idx.iter().any(|&i| i >= m) {
                return Err(Error::Shape(format!("eta index {idx:?} out of range {m}")));
            }
            let (k, sign) = sort3(idx)
                .ok_or_else(|| Error::Shape(format!("eta index {idx:?} repeats an index")))?;
            if emap.insert(k, f.scale(sign)).is_some() {
                return Err(Error::Shape(format!("duplicate eta component {k:?}")));
            }
        }
        let mut model = ExactModel {
            metric,
            eta: emap,
            space: JetSpace::new(base_point, jet_order),
            g: Vec::new(),
            eta_jets: BTreeMap::new(),
        };
        model.evaluate()?;
        Ok(model)
    }

    fn evaluate(&mut self) -> Result<()> {
        let sp = self.space.clone();
        self.g = self
            .metric
            .iter()
            .map(|row| row.iter().map(|f| f.jet(&sp)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let m = self.dim();
        for i in 0..m {
            for j in i + 1..m {
                if self.g[i][j].max_diff(&self.g[j][i])? > 1e-12 {
                    return Err(Error::Shape(format!("metric not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        self.eta_jets = self
            .eta
            .iter()
            .map(|(k, f)| Ok((*k, f.jet(&sp)?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn at_point(&self, base_point: Vec<f64>) -> Result<ExactModel> {
        if base_point.len() != self.dim() {
            return Err(Error::Shape("point dimension mismatch".into()));
        }
        let mut model = self.clone();
        model.space = JetSpace::new(base_point, self.space.order());
        model.evaluate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn jets(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn base_point(&self) -> &[f64] {
        self.space.base_point()
    }

    pub fn jet_order(&self) -> u32 {
        self.space.order()
    }

    pub fn metric(&self, i: usize, j: usize) -> &Jet {
        &self.g[i][j]
    }

    /// `η_{ijk}` for any index order.
    pub fn eta(&self, i: usize, j: usize, k: usize) -> Jet {
        match sort3([i, j, k]) {
            Some((key, sign)) => self
                .eta_jets
                .get(&key)
                .map(|e| e.scale(sign))
                .unwrap_or_else(|| Jet::zero(&self.space)),
            None => Jet::zero(&self.space),
        }
    }

    /// `(dη)_{ijkl} = ∂_i η_{jkl} − ∂_j η_{ikl} + ∂_k η_{ijl} − ∂_l η_{ijk}`
    /// at the base point, over `i<j<k<l`.
    pub fn check_closed(&self, tol: f64) -> Result<ClosedCheck> {
        let m = self.dim();
        let mut components = Vec::new();
        let mut max = 0.0f64;
        let d = |j: Jet, i: usize| -> Result<f64> {
            if j.is_zero() {
                Ok(0.0)
            } else {
                Ok(j.partial_derivative(i)?.value())
            }
        };
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    for l in k + 1..m {
                        let v = d(self.eta(j, k, l), i)? - d(self.eta(i, k, l), j)?
                            + d(self.eta(i, j, l), k)?
                            - d(self.eta(i, j, k), l)?;
                        max = max.max(v.abs());
                        if v != 0.0 {
                            components.push(DEtaComponent {
                                indices: [i + 1, j + 1, k + 1, l + 1],
                                value: v,
                            });
                        }
                    }
                }
            }
        }
        Ok(ClosedCheck {
            closed: max <= tol,
            max_residual: max,
            components,
        })
    }

    /// Gram–Schmidt of the coordinate frame against `g`, in coordinate
    /// order, over jets.
    pub fn build_frame(&self) -> Result<AdaptedFrame> {
        let m = self.dim();
        let sp = &self.space;
        let mut frame: Vec<Vec<Jet>> = Vec::with_capacity(m);
        let mut signs: Vec<i8> = Vec::with_capacity(m);
        for k in 0..m {
            let mut u: Vec<Jet> = (0..m)
                .map(|i| Jet::constant(sp, if i == k { 1.0 } else { 0.0 }))
                .collect();
            for (e, &sign) in frame.iter().zip(&signs) {
                let proj = self.inner(&u, e)?.scale(sign as f64);
                for i in 0..m {
                    u[i] = u[i].sub(&proj.mul(&e[i])?)?;
                }
            }
            let norm2 = self.inner(&u, &u)?;
            let v = norm2.value();
            if !(v.abs() > 1e-12) {
                return Err(Error::FrameDegenerate { index: k + 1 });
            }
            let sign: i8 = if v > 0.0 { 1 } else { -1 };
            let inv = norm2.scale(sign as f64).sqrt()?.recip()?;
            for x in u.iter_mut() {
                *x = x.mul(&inv)?;
            }
            frame.push(u);
            signs.push(sign);
        }
        Ok(AdaptedFrame { frame, signs })
    }

    /// `g(u, v)` for vector fields given by components.
    pub fn inner(&self, u: &[Jet], v: &[Jet]) -> Result<Jet> {
        let m = self.dim();
        let mut acc = Jet::zero(&self.space);
        for i in 0..m {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..m {
                if v[j].is_zero() || self.g[i][j].is_zero() {
                    continue;
                }
                acc = acc.add(&self.g[i][j].mul(&u[i])?.mul(&v[j])?)?;
            }
        }
        Ok(acc)
    }

    /// `F_a = g(E_a, ·)` as covector components.
    fn lower(&self, e: &[Jet]) -> Result<Vec<Jet>> {
        let m = self.dim();
        (0..m)
            .map(|k| {
                (0..m).try_fold(Jet::zero(&self.space), |acc, i| acc.add(&self.g[k][i].mul(&e[i])?))
            })
            .collect()
    }

    fn sections(&self, frame: &AdaptedFrame) -> Result<Vec<Section>> {
        let m = self.dim();
        let mut out = Vec::with_capacity(2 * m);
        let lowered = frame
            .frame
            .iter()
            .map(|e| self.lower(e))
            .collect::<Result<Vec<_>>>()?;
        for sign in [1.0, -1.0] {
            for a in 0..m {
                out.push(Section {
                    vector: frame.frame[a].clone(),
                    form: lowered[a].iter().map(|f| f.scale(sign)).collect(),
                });
            }
        }
        Ok(out)
    }

    fn dorfman(&self, a: &Section, b: &Section) -> Result<Section> {
        let m = self.dim();
        let vector = lie_bracket(&a.vector, &b.vector)?;
        let mut form = Vec::with_capacity(m);
        for k in 0..m {
            let mut z = Jet::zero(&self.space);
            for j in 0..m {
                // L_X ζ
                z = z.add(&a.vector[j].mul(&b.form[k].partial_derivative(j)?)?)?;
                z = z.add(&b.form[j].mul(&a.vector[j].partial_derivative(k)?)?)?;
                // − i_Y dξ
                let dxi = a.form[k].partial_derivative(j)?.sub(&a.form[j].partial_derivative(k)?)?;
                z = z.sub(&b.vector[j].mul(&dxi)?)?;
                // η(Y, X, ∂_k)
                for i in 0..m {
                    let eta = self.eta(i, j, k);
                    if eta.is_zero() {
                        continue;
                    }
                    z = z.add(&b.vector[i].mul(&a.vector[j])?.mul(&eta)?)?;
                }
            }
            form.push(z);
        }
        Ok(Section { vector, form })
    }

    fn pairing(&self, a: &Section, b: &Section) -> Result<Jet> {
        let mut acc = Jet::zero(&self.space);
        for k in 0..self.dim() {
            acc = acc.add(&a.form[k].mul(&b.vector[k])?)?;
            acc = acc.add(&b.form[k].mul(&a.vector[k])?)?;
        }
        Ok(acc.scale(0.5))
    }

    /// `c_{αβγ} = ⟨[s_α, s_β], s_γ⟩` for any indices in `0..2m`.
    pub fn bracket_constant(&self, frame: &AdaptedFrame, a: usize, b: usize, g: usize) -> Result<Jet> {
        let s = self.sections(frame)?;
        self.pairing(&self.dorfman(&s[a], &s[b])?, &s[g])
    }

    /// The NQ structure of the exact algebroid in the adapted frame, with
    /// jet-valued coefficients. Fails with `MasterEquationFailure` if the
    /// result does not satisfy `{H,H} = 0` at `MASTER_TOL`.
    pub fn build_nq(&self, frame: &AdaptedFrame) -> Result<NqStructure> {
        let m = self.dim();
        let s = self.sections(frame)?;
        let plus = frame.signs.clone();
        let minus: Vec<i8> = frame.signs.iter().map(|v| -v).collect();
        let chart = GradedChart::new(m, m, self.base_point().to_vec(), self.jet_order())?;
        let rho = (0..m)
            .map(|i| {
                (0..2 * m)
                    .map(|al| ScalarField::Taylor(frame.frame[al % m][i].clone()))
                    .collect()
            })
            .collect();
        let mut c = Vec::new();
        for a in 0..2 * m {
            for b in a + 1..2 * m {
                let ab = self.dorfman(&s[a], &s[b])?;
                for g in b + 1..2 * m {
                    let v = self.pairing(&ab, &s[g])?;
                    if !v.is_zero() {
                        c.push(([a, b, g], ScalarField::Taylor(v)));
                    }
                }
            }
        }
        let nq = NqStructure::new(chart, MetricSplit::new(plus, minus)?, rho, c)?;
        let res = nq.check_master_equation(MASTER_TOL)?;
        if !res.is_valid() {
            return Err(Error::MasterEquationFailure(res.max_abs()));
        }
        Ok(nq)
    }

    /// Levi-Civita connection carried to `V₊` by `E_a ↦ s_a`:
    /// `ψ^a_{bc} = −θ^a(∇_{E_c} E_b)` with `θ^a = ε_a F_a`, from the Koszul
    /// formula on the orthonormal frame; the dotted block from invariant
    /// torsion.
    pub fn levi_civita_connection(&self, frame: &AdaptedFrame, nq: NqStructure) -> Result<Connection> {
        let m = self.dim();
        let e = &frame.frame;
        let lowered = e.iter().map(|v| self.lower(v)).collect::<Result<Vec<_>>>()?;
        let mut brackets = vec![vec![Vec::new(); m]; m];
        for x in 0..m {
            for y in 0..m {
                brackets[x][y] = lie_bracket(&e[x], &e[y])?;
            }
        }
        // g([E_x, E_y], E_z)
        let gb = |x: usize, y: usize, z: usize| -> Result<Jet> {
            dot(&lowered[z], &brackets[x][y], &self.space)
        };
        let mut psi_plus = vec![vec![vec![ScalarField::constant(0.0); m]; m]; m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    // 2 g(∇_{E_c} E_b, E_a)
                    let two = gb(c, b, a)?.sub(&gb(c, a, b)?)?.sub(&gb(b, a, c)?)?;
                    let v = two.scale(-0.5 * frame.signs[a] as f64);
                    psi_plus[a][b][c] = ScalarField::Taylor(v);
                }
            }
        }
        Connection::make_invariant_torsion(nq, psi_plus)
    }

    /// Christoffel symbols `Γ^k_{ij}` of the Levi-Civita connection.
    pub fn christoffel(&self, frame: &AdaptedFrame) -> Result<Vec<Vec<Vec<Jet>>>> {
        let m = self.dim();
        let ginv = frame.inverse_metric()?;
        let dg = |a: usize, b: usize, i: usize| self.g[a][b].partial_derivative(i);
        let mut out = vec![vec![vec![Jet::zero(&self.space); m]; m]; m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc = Jet::zero(&self.space);
                    for l in 0..m {
                        if ginv[k][l].is_zero() {
                            continue;
                        }
                        let t = dg(l, j, i)?.add(&dg(l, i, j)?)?.sub(&dg(i, j, l)?)?;
                        acc = acc.add(&ginv[k][l].mul(&t)?)?;
                    }
                    out[k][i][j] = acc.scale(0.5);
                }
            }
        }
        Ok(out)
    }

    /// Ricci tensor `Ric(E_a, E_b)` of the metric connection with torsion
    /// `T^k_{ij} = g^{kl} η_{lij}`, i.e. `Γ̃^k_{ij} = Γ^k_{ij} + ½ g^{kl} η_{lij}`
    /// with `∇_{∂_i} ∂_j = Γ̃^k_{ij} ∂_k`, and `Ric(Y, Z) = tr(X ↦ R(X,Y)Z)`.
    pub fn classical_ricci_with_torsion(&self, frame: &AdaptedFrame) -> Result<Vec<Vec<f64>>> {
        let ric = self.classical_ricci_coordinates(frame)?;
        let m = self.dim();
        let e = &frame.frame;
        let mut out = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                let mut v = 0.0;
                for j in 0..m {
                    for k in 0..m {
                        v += ric[j][k] * e[a][j].value() * e[b][k].value();
                    }
                }
                out[a][b] = v;
            }
        }
        Ok(out)
    }

    /// `Ric_{jk} = ∂_i Γ̃^i_{jk} − ∂_j Γ̃^i_{ik} + Γ̃^i_{im} Γ̃^m_{jk} − Γ̃^i_{jm} Γ̃^m_{ik}`
    /// in coordinates, at the base point.
    pub fn classical_ricci_coordinates(&self, frame: &AdaptedFrame) -> Result<Vec<Vec<f64>>> {
        let m = self.dim();
        let ginv = frame.inverse_metric()?;
        let mut gam = self.christoffel(frame)?;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut t = Jet::zero(&self.space);
                    for l in 0..m {
                        let eta = self.eta(l, i, j);
                        if eta.is_zero() {
                            continue;
                        }
                        t = t.add(&ginv[k][l].mul(&eta)?)?;
                    }
                    gam[k][i][j] = gam[k][i][j].add(&t.scale(0.5))?;
                }
            }
        }
        let d = |j: &Jet, i: usize| -> Result<f64> { Ok(j.partial_derivative(i)?.value()) };
        let mut ric = vec![vec![0.0; m]; m];
        for j in 0..m {
            for k in 0..m {
                let mut v = 0.0;
                for i in 0..m {
                    v += d(&gam[i][j][k], i)? - d(&gam[i][i][k], j)?;
                    for mm in 0..m {
                        v += gam[i][i][mm].value() * gam[mm][j][k].value();
                        v -= gam[i][j][mm].value() * gam[mm][i][k].value();
                    }
                }
                ric[j][k] = v;
            }
        }
        Ok(ric)
    }

    /// Graded Ricci (engine and closed form) against the classical
    /// torsionful Ricci in the same frame.
    pub fn compare(&self) -> Result<ExactComparison> {
        let frame = self.build_frame()?;
        let nq = self.build_nq(&frame)?;
        let q = self.levi_civita_connection(&frame, nq.clone())?;
        let engine = q.ricci_engine(MASTER_TOL)?;
        let lambda: Vec<ScalarField> = q.lambda()?.into_iter().map(ScalarField::Taylor).collect();
        let closed = ricci_closed_form(&nq, &lambda)?;
        let classical = self.classical_ricci_with_torsion(&frame)?;
        let dev = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        let max_deviation = dev(&engine.ric, &closed.ric)
            .max(dev(&engine.ric, &classical))
            .max(dev(&closed.ric, &classical));
        Ok(ExactComparison {
            base_point: self.base_point().to_vec(),
            graded_engine: engine.ric,
            graded_closed_form: closed.ric,
            classical,
            lambda: engine.lambda,
            max_deviation,
        })
    }
}

/// Orthonormal frame `E_a = E_a^i ∂_i` with `⟨E_a, E_a⟩ = signs[a]`.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    /// `frame[a][i] = E_a^i`
    pub frame: Vec<Vec<Jet>>,
    pub signs: Vec<i8>,
}

impl AdaptedFrame {
    /// `g^{kl} = Σ_a ε_a E_a^k E_a^l`.
    pub fn inverse_metric(&self) -> Result<Vec<Vec<Jet>>> {
        let m = self.frame.len();
        let sp = self.frame[0][0].space().clone();
        let mut out = vec![vec![Jet::zero(&sp); m]; m];
        for k in 0..m {
            for l in 0..m {
                let mut acc = Jet::zero(&sp);
                for (e, &s) in self.frame.iter().zip(&self.signs) {
                    acc = acc.add(&e[k].mul(&e[l])?.scale(s as f64))?;
                }
                out[k][l] = acc;
            }
        }
        Ok(out)
    }

    /// Frame matrix values at the base point, `[a][i]`.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.frame
            .iter()
            .map(|e| e.iter().map(Jet::value).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Section {
    vector: Vec<Jet>,
    form: Vec<Jet>,
}

fn lie_bracket(x: &[Jet], y: &[Jet]) -> Result<Vec<Jet>> {
    let m = x.len();
    let sp = x[0].space().clone();
    (0..m)
        .map(|i| {
            let mut acc = Jet::zero(&sp);
            for j in 0..m {
                acc = acc.add(&x[j].mul(&y[i].partial_derivative(j)?)?)?;
                acc = acc.sub(&y[j].mul(&x[i].partial_derivative(j)?)?)?;
            }
            Ok(acc)
        })
        .collect()
}

fn dot(form: &[Jet], v: &[Jet], sp: &Arc<JetSpace>) -> Result<Jet> {
    form.iter()
        .zip(v)
        .try_fold(Jet::zero(sp), |acc, (f, x)| acc.add(&f.mul(x)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct DEtaComponent {
    /// 1-based
    pub indices: [usize; 4],
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedCheck {
    pub closed: bool,
    pub max_residual: f64,
    pub components: Vec<DEtaComponent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactComparison {
    pub base_point: Vec<f64>,
    pub graded_engine: Vec<Vec<f64>>,
    pub graded_closed_form: Vec<Vec<f64>>,
    pub classical: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub max_deviation: f64,
}
