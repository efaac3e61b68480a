//! Connections `Q = Q_E + ψ^a_{bα} e^α ξ^b ∂_{ξ^a}` on the auxiliary bundle,
//! their torsion `Qτ`, curvature `Q²`, and the generalized Ricci tensor.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nq::{tautological_section, NqStructure};
use crate::scalar::{Jet, ScalarField};
use crate::superalgebra::{Derivation, GradedChart, GradedElement, Generator};

/// `psi[a][b][α]` is `ψ^a_{bα}`; `a, b` undotted, `α` over all `r + s`.
#[derive(Debug, Clone)]
pub struct Connection {
    structure: NqStructure,
    psi: Vec<Vec<Vec<ScalarField>>>,
    psi_jets: Vec<Vec<Vec<Jet>>>,
}

impl Connection {
    pub fn new(structure: NqStructure, psi: Vec<Vec<Vec<ScalarField>>>) -> Result<Connection> {
        let chart = structure.chart();
        let (r, rank) = (chart.r(), chart.rank());
        if psi.len() != r
            || psi
                .iter()
                .any(|row| row.len() != r || row.iter().any(|v| v.len() != rank))
        {
            return Err(Error::Shape(format!("psi must be {r} x {r} x {rank}")));
        }
        let mut q = Connection {
            structure,
            psi,
            psi_jets: Vec::new(),
        };
        q.evaluate()?;
        Ok(q)
    }

    pub fn zero(structure: NqStructure) -> Result<Connection> {
        let (r, rank) = (structure.chart().r(), structure.chart().rank());
        let psi = vec![vec![vec![ScalarField::constant(0.0); rank]; r]; r];
        Connection::new(structure, psi)
    }

    /// Fix the undotted block freely and the dotted block by
    /// `ψ^a_{bȧ} = g^{aa} c_{abȧ}`.
    pub fn make_invariant_torsion(
        structure: NqStructure,
        psi_plus: Vec<Vec<Vec<ScalarField>>>,
    ) -> Result<Connection> {
        let chart = structure.chart();
        let (r, s) = (chart.r(), chart.s());
        if psi_plus.len() != r
            || psi_plus
                .iter()
                .any(|row| row.len() != r || row.iter().any(|v| v.len() != r))
        {
            return Err(Error::Shape(format!("psi_plus must be {r} x {r} x {r}")));
        }
        let g = structure.metric().clone();
        let psi = psi_plus
            .into_iter()
            .enumerate()
            .map(|(a, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(b, mut v)| {
                        v.extend((r..r + s).map(|ad| {
                            structure
                                .c_field(a, b, ad)
                                .map(|f| f.scale(g.g(a)))
                                .unwrap_or(ScalarField::constant(0.0))
                        }));
                        v
                    })
                    .collect()
            })
            .collect();
        Connection::new(structure, psi)
    }

    /// Invariant torsion with the pure-trace completion
    /// `ψ^a_{bc} = δ^a_c λ_b / r`.
    pub fn pure_trace(structure: NqStructure, lambda: Vec<ScalarField>) -> Result<Connection> {
        let r = structure.chart().r();
        if lambda.len() != r {
            return Err(Error::Shape(format!("lambda must have {r} entries")));
        }
        let zero = ScalarField::constant(0.0);
        let psi_plus = (0..r)
            .map(|a| {
                (0..r)
                    .map(|b| {
                        (0..r)
                            .map(|c| {
                                if a == c {
                                    lambda[b].scale(1.0 / r as f64)
                                } else {
                                    zero.clone()
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Connection::make_invariant_torsion(structure, psi_plus)
    }

    fn evaluate(&mut self) -> Result<()> {
        let sp = self.structure.chart().jets().clone();
        self.psi_jets = self
            .psi
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v.iter().map(|f| f.jet(&sp)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn at_point(&self, base_point: Vec<f64>) -> Result<Connection> {
        let mut q = self.clone();
        q.structure = self.structure.at_point(base_point)?;
        q.evaluate()?;
        Ok(q)
    }

    pub fn structure(&self) -> &NqStructure {
        &self.structure
    }

    pub fn chart(&self) -> &Arc<GradedChart> {
        self.structure.chart()
    }

    pub fn psi_fields(&self) -> &[Vec<Vec<ScalarField>>] {
        &self.psi
    }

    pub fn psi(&self, a: usize, b: usize, alpha: usize) -> &Jet {
        &self.psi_jets[a][b][alpha]
    }

    /// `λ_b = ψ^a_{ba}`.
    pub fn lambda(&self) -> Result<Vec<Jet>> {
        let chart = self.chart();
        (0..chart.r())
            .map(|b| {
                (0..chart.r()).try_fold(Jet::zero(chart.jets()), |acc, a| acc.add(self.psi(a, b, a)))
            })
            .collect()
    }

    /// `div(e_a) = −λ_a`.
    pub fn divergence(&self) -> Result<Vec<Jet>> {
        Ok(self.lambda()?.iter().map(Jet::neg).collect())
    }

    /// `Q_E` on `x, e, p` and `ξ^a ↦ ψ^a_{bα} e^α ξ^b`.
    pub fn connection_derivation(&self) -> Result<Derivation> {
        let chart = self.chart();
        let mut d = self.structure.q_e_derivation()?;
        for a in 0..chart.r() {
            let mut img = GradedElement::zero(chart);
            for b in 0..chart.r() {
                for alpha in 0..chart.rank() {
                    let psi = self.psi(a, b, alpha);
                    if psi.is_zero() {
                        continue;
                    }
                    let t = GradedElement::term(
                        chart,
                        psi.clone(),
                        &[],
                        &[Generator::E(alpha), Generator::Xi(b)],
                    )?;
                    img = img.add(&t)?;
                }
            }
            d.set(Generator::Xi(a), img)?;
        }
        Ok(d)
    }

    /// `Qτ`.
    pub fn torsion(&self) -> Result<GradedElement> {
        let tau = tautological_section(self.chart(), self.structure.metric())?;
        self.connection_derivation()?.apply(&tau)
    }

    /// Both characterizations of invariant torsion: `ι(Qτ) = Qτ`, and
    /// `ψ^a_{bȧ} = g^{aa} c_{abȧ}` at the base point.
    pub fn check_torsion_invariance(&self, tol: f64) -> Result<TorsionInvariance> {
        let t = self.torsion()?;
        let residual = t.involution().sub(&t)?;
        let residual_max = residual.max_abs_value();
        let chart = self.chart();
        let g = self.structure.metric();
        let mut deviations = Vec::new();
        for a in 0..chart.r() {
            for b in 0..chart.r() {
                for ad in chart.r()..chart.rank() {
                    let dev = self.psi(a, b, ad).value() - g.g(a) * self.structure.c(a, b, ad).value();
                    if dev.abs() > tol {
                        deviations.push(ComponentDeviation { a, b, dotted: ad - chart.r(), deviation: dev });
                    }
                }
            }
        }
        Ok(TorsionInvariance {
            by_involution: residual_max <= tol,
            by_components: deviations.is_empty(),
            residual,
            residual_max,
            deviations,
        })
    }

    /// `Q²` restricted to the `ξ^a`, after checking that it fixes `x, e, p`
    /// to within `tol`.
    pub fn curvature(&self, tol: f64) -> Result<End2Element> {
        let chart = self.chart().clone();
        let q = self.connection_derivation()?;
        for y in chart.generators() {
            if matches!(y, Generator::Xi(_)) {
                continue;
            }
            let qq = match q.apply(&q.image(y)) {
                Ok(v) => v.max_abs_value(),
                // Q_E² = ½{{H,H},·}, so the master residual bounds what
                // the truncated jets cannot reach
                Err(Error::JetOrderExhausted) if matches!(y, Generator::P(_)) => {
                    self.structure.check_master_equation(tol)?.max_abs()
                }
                Err(e) => return Err(e),
            };
            if qq > tol {
                return Err(Error::End2Violation {
                    residual: qq,
                    location: chart.generator_name(y),
                });
            }
        }
        let images = (0..chart.r())
            .map(|a| q.apply(&q.image(Generator::Xi(a))))
            .collect::<Result<Vec<_>>>()?;
        End2Element::new(&chart, images)
    }

    /// `Ric = C Q²` reported against `ξ^b e^ȧ`.
    pub fn ricci_engine(&self, tol: f64) -> Result<RicciTensor> {
        let ric = self.curvature(tol)?.contract()?;
        Ok(RicciTensor {
            ric: values(&ric),
            lambda: self.lambda()?.iter().map(Jet::value).collect(),
            path: RicciPath::Engine,
            base_point: self.chart().base_point().to_vec(),
        })
    }

    /// Coefficients of the induced Courant-algebroid connection at the base
    /// point.
    pub fn export_generalized_connection(&self, tol: f64) -> Result<GeneralizedConnection> {
        let chart = self.chart();
        let (r, rank) = (chart.r(), chart.rank());
        let dual: Vec<Vec<Vec<f64>>> = (0..r)
            .map(|c| {
                (0..rank)
                    .map(|alpha| (0..r).map(|b| self.psi(c, b, alpha).value()).collect())
                    .collect()
            })
            .collect();
        let primal = dual
            .iter()
            .map(|m| m.iter().map(|v| v.iter().map(|x| -x).collect()).collect())
            .collect();
        let invariant = self.check_torsion_invariance(tol)?.by_components;
        let restricted = invariant.then(|| {
            dual.iter()
                .map(|m| m[..r].to_vec())
                .collect::<Vec<Vec<Vec<f64>>>>()
        });
        Ok(GeneralizedConnection {
            base_point: chart.base_point().to_vec(),
            leibniz: "nabla(f u) = f nabla(u) + (Q_E f) (x) u",
            dual,
            primal,
            invariant_torsion: invariant,
            restricted,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentDeviation {
    pub a: usize,
    pub b: usize,
    pub dotted: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct TorsionInvariance {
    pub by_involution: bool,
    pub by_components: bool,
    /// `ι(Qτ) − Qτ`
    pub residual: GradedElement,
    pub residual_max: f64,
    pub deviations: Vec<ComponentDeviation>,
}

impl TorsionInvariance {
    pub fn is_invariant(&self) -> bool {
        self.by_involution && self.by_components
    }
}

/// A degree-2 derivation fixing `x, e, p`, stored by its values on the
/// `ξ^a`; each value is `ξ`-linear of degree 3.
#[derive(Debug, Clone)]
pub struct End2Element {
    chart: Arc<GradedChart>,
    images: Vec<GradedElement>,
}

impl End2Element {
    pub fn new(chart: &Arc<GradedChart>, images: Vec<GradedElement>) -> Result<End2Element> {
        if images.len() != chart.r() {
            return Err(Error::Shape(format!("End2 element needs {} images", chart.r())));
        }
        for (a, img) in images.iter().enumerate() {
            if **img.chart() != **chart {
                return Err(Error::ChartMismatch);
            }
            for (m, c) in img.terms() {
                let xi = (m.odd & chart.xi_mask()).count_ones();
                if xi != 1 || m.degree() != 3 {
                    return Err(Error::End2Violation {
                        residual: c.value().abs(),
                        location: format!("xi{}", a + 1),
                    });
                }
            }
        }
        Ok(End2Element {
            chart: chart.clone(),
            images,
        })
    }

    pub fn chart(&self) -> &Arc<GradedChart> {
        &self.chart
    }

    /// `D(ξ^a)`.
    pub fn image(&self, a: usize) -> &GradedElement {
        &self.images[a]
    }

    pub fn images(&self) -> &[GradedElement] {
        &self.images
    }

    /// `πD = ½(D − ι∘D∘ι)`; since `ι` fixes every `ξ^a` this is
    /// `½(D(ξ^a) − ι D(ξ^a))`.
    pub fn project_antiselfdual(&self) -> End2Element {
        let images = self
            .images
            .iter()
            .map(|d| d.sub(&d.involution()).expect("same chart").scale(0.5))
            .collect();
        End2Element {
            chart: self.chart.clone(),
            images,
        }
    }

    /// `C D = Σ_a ∂⃗_{e^a}(πD)(ξ^a)` as the `r × s` matrix of coefficients of
    /// `ξ^b e^ȧ` (minus the coefficients of the stored `e^ȧ ξ^b`).
    pub fn contract(&self) -> Result<Vec<Vec<Jet>>> {
        let chart = &self.chart;
        let (r, s) = (chart.r(), chart.s());
        let mut out = vec![vec![Jet::zero(chart.jets()); s]; r];
        let pd = self.project_antiselfdual();
        for a in 0..r {
            let y = pd.images[a].left_derivative(Generator::E(a))?;
            for (m, c) in y.terms() {
                let mut bits = m.odd_bits();
                let (Some(e), Some(x), None) = (bits.next(), bits.next(), bits.next()) else {
                    continue;
                };
                let (Generator::E(ad), Generator::Xi(b)) = (chart.odd_generator(e), chart.odd_generator(x)) else {
                    continue;
                };
                if ad < r || m.p_degree() != 0 {
                    continue;
                }
                let cell = &mut out[b][ad - r];
                *cell = cell.sub(c)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RicciPath {
    Engine,
    ClosedForm,
}

/// `Ric = R_{bȧ} ξ^b e^ȧ` at a point.
#[derive(Debug, Clone, Serialize)]
pub struct RicciTensor {
    pub ric: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub path: RicciPath,
    pub base_point: Vec<f64>,
}

impl RicciTensor {
    pub fn max_diff(&self, other: &RicciTensor) -> f64 {
        self.ric
            .iter()
            .flatten()
            .zip(other.ric.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.ric.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn values(m: &[Vec<Jet>]) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(Jet::value).collect()).collect()
}

/// `R_{bȧ} = c^c_{bȧ}λ_c − ρ^i_a c^a_{bȧ,i} + ρ^i_ȧ λ_{b,i} + c_{ċaȧ} c^{aċ}_b`
/// with `c^c_{bȧ} = g^{cc} c_{cbȧ}` and `c^{aċ}_b = g^{aa} g^{ċċ} c_{abċ}`.
pub fn ricci_closed_form(s: &NqStructure, lambda: &[ScalarField]) -> Result<RicciTensor> {
    let chart = s.chart();
    let sp = chart.jets();
    let (n, r, rank) = (chart.n(), chart.r(), chart.rank());
    if lambda.len() != r {
        return Err(Error::Shape(format!("lambda must have {r} entries")));
    }
    let g = s.metric();
    let lam = lambda.iter().map(|f| f.jet(sp)).collect::<Result<Vec<_>>>()?;
    let mut ric = vec![vec![0.0; chart.s()]; r];
    for b in 0..r {
        for ad in r..rank {
            let mut v = 0.0;
            for c in 0..r {
                v += g.g(c) * s.c(c, b, ad).value() * lam[c].value();
            }
            for i in 0..n {
                for a in 0..r {
                    let rho = s.rho(i, a).value();
                    if rho != 0.0 {
                        v -= rho * g.g(a) * s.c(a, b, ad).partial_derivative(i)?.value();
                    }
                }
                let rho = s.rho(i, ad).value();
                if rho != 0.0 {
                    v += rho * lam[b].partial_derivative(i)?.value();
                }
            }
            for cd in r..rank {
                for a in 0..r {
                    v += s.c(cd, a, ad).value() * g.g(a) * g.g(cd) * s.c(a, b, cd).value();
                }
            }
            ric[b][ad - r] = v;
        }
    }
    Ok(RicciTensor {
        ric,
        lambda: lam.iter().map(Jet::value).collect(),
        path: RicciPath::ClosedForm,
        base_point: chart.base_point().to_vec(),
    })
}

/// The induced connection: `dual[c][α][b] = Γ^c_{αb} = ψ^c_{bα}` acts on the
/// dual frame `ξ^b` of `V₊*`; `primal` is the same block negated, acting on
/// the frame `e_b` of `V₊`. `restricted` is the undotted-direction block,
/// present only for invariant torsion, where it determines the rest.
#[derive(Debug, Clone, Serialize)]
pub struct GeneralizedConnection {
    pub base_point: Vec<f64>,
    pub leibniz: &'static str,
    pub dual: Vec<Vec<Vec<f64>>>,
    pub primal: Vec<Vec<Vec<f64>>>,
    pub invariant_torsion: bool,
    pub restricted: Option<Vec<Vec<Vec<f64>>>>,
}
