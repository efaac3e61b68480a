//! The NQ structure `(ρ, c, g)`: Hamiltonian, homological vector field,
//! master equation and the tautological section.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Jet, ScalarField};
use crate::superalgebra::{
    hamiltonian_derivation, poisson_bracket, Derivation, GradedChart, GradedElement, Generator,
    MetricSplit, Monomial,
};

/// Structure functions of a degree-2 NQ manifold in adapted coordinates.
///
/// `rho[i][α]` is the anchor `ρ^i_α`; `c` holds the totally antisymmetric
/// `c_{αβγ}` for `α < β < γ` only.
#[derive(Debug, Clone)]
pub struct NqStructure {
    chart: Arc<GradedChart>,
    metric: MetricSplit,
    rho: Vec<Vec<ScalarField>>,
    c: BTreeMap<[usize; 3], ScalarField>,
    rho_jets: Vec<Vec<Jet>>,
    c_jets: BTreeMap<[usize; 3], Jet>,
}

/// Sort three distinct indices, returning the permutation sign.
pub(crate) fn sort3(mut idx: [usize; 3]) -> Option<([usize; 3], f64)> {
    if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
        return None;
    }
    let mut sign = 1.0;
    for i in 0..3 {
        for j in 0..2 - i {
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    Some((idx, sign))
}

impl NqStructure {
    /// `c` entries may use any index order; they are stored sorted with the
    /// permutation sign applied.
    pub fn new(
        chart: Arc<GradedChart>,
        metric: MetricSplit,
        rho: Vec<Vec<ScalarField>>,
        c: Vec<([usize; 3], ScalarField)>,
    ) -> Result<NqStructure> {
        metric.check_chart(&chart)?;
        let rank = chart.rank();
        if rho.len() != chart.n() || rho.iter().any(|row| row.len() != rank) {
            return Err(Error::Shape(format!(
                "rho must be {} x {}",
                chart.n(),
                rank
            )));
        }
        let mut cmap = BTreeMap::new();
        for (idx, f) in c {
            if idx.iter().any(|&a| a >= rank) {
                return Err(Error::Shape(format!("c index {idx:?} out of range {rank}")));
            }
            let (sorted, sign) = sort3(idx)
                .ok_or_else(|| Error::Shape(format!("c index {idx:?} repeats an index")))?;
            let f = if sign < 0.0 { f.scale(-1.0) } else { f };
            if cmap.insert(sorted, f).is_some() {
                return Err(Error::Shape(format!("duplicate c component {sorted:?}")));
            }
        }
        let mut s = NqStructure {
            chart,
            metric,
            rho,
            c: cmap,
            rho_jets: Vec::new(),
            c_jets: BTreeMap::new(),
        };
        s.evaluate()?;
        Ok(s)
    }

    /// All-zero structure on the chart.
    pub fn zero(chart: Arc<GradedChart>, metric: MetricSplit) -> Result<NqStructure> {
        let rho = vec![vec![ScalarField::constant(0.0); chart.rank()]; chart.n()];
        NqStructure::new(chart, metric, rho, Vec::new())
    }

    fn evaluate(&mut self) -> Result<()> {
        let sp = self.chart.jets().clone();
        self.rho_jets = self
            .rho
            .iter()
            .map(|row| row.iter().map(|f| f.jet(&sp)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        self.c_jets = self
            .c
            .iter()
            .map(|(k, f)| Ok((*k, f.jet(&sp)?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Same structure functions re-expanded at another base point. Only
    /// valid for expression-backed fields.
    pub fn at_point(&self, base_point: Vec<f64>) -> Result<NqStructure> {
        let mut s = self.clone();
        s.chart = self.chart.at_point(base_point)?;
        s.evaluate()?;
        Ok(s)
    }

    pub fn chart(&self) -> &Arc<GradedChart> {
        &self.chart
    }

    pub fn metric(&self) -> &MetricSplit {
        &self.metric
    }

    pub fn rho_fields(&self) -> &[Vec<ScalarField>] {
        &self.rho
    }

    pub fn c_fields(&self) -> &BTreeMap<[usize; 3], ScalarField> {
        &self.c
    }

    pub fn rho(&self, i: usize, alpha: usize) -> &Jet {
        &self.rho_jets[i][alpha]
    }

    /// `c_{αβγ}` for any index order (zero on repeated indices).
    pub fn c(&self, a: usize, b: usize, g: usize) -> Jet {
        match sort3([a, b, g]) {
            Some((k, sign)) => match self.c_jets.get(&k) {
                Some(j) => j.scale(sign),
                None => Jet::zero(self.chart.jets()),
            },
            None => Jet::zero(self.chart.jets()),
        }
    }

    /// `c_{αβγ}` as a field for any index order, `None` when structurally zero.
    pub fn c_field(&self, a: usize, b: usize, g: usize) -> Option<ScalarField> {
        let (k, sign) = sort3([a, b, g])?;
        self.c.get(&k).map(|f| f.scale(sign))
    }

    /// Stored components `(α<β<γ, c_{αβγ})`.
    pub fn c_components(&self) -> impl Iterator<Item = (&[usize; 3], &Jet)> {
        self.c_jets.iter()
    }

    /// `H = ρ^i_α p_i e^α − (1/6) c_{αβγ} e^α e^β e^γ`.
    pub fn build_hamiltonian(&self) -> Result<GradedElement> {
        let chart = &self.chart;
        let mut h = GradedElement::zero(chart);
        for i in 0..chart.n() {
            for a in 0..chart.rank() {
                let rho = &self.rho_jets[i][a];
                if rho.is_zero() {
                    continue;
                }
                let t = GradedElement::term(chart, rho.clone(), &[i], &[Generator::E(a)])?;
                h = h.add(&t)?;
            }
        }
        // the six orderings of each sorted triple collapse the 1/6
        for (&[a, b, g], c) in &self.c_jets {
            let t = GradedElement::term(
                chart,
                c.neg(),
                &[],
                &[Generator::E(a), Generator::E(b), Generator::E(g)],
            )?;
            h = h.add(&t)?;
        }
        Ok(h)
    }

    /// `Q_E = {H, ·}` as a generator table.
    pub fn q_e_derivation(&self) -> Result<Derivation> {
        let h = self.build_hamiltonian()?;
        if h.is_zero() {
            return Ok(Derivation::zero(&self.chart, 1));
        }
        hamiltonian_derivation(&h, &self.metric)
    }

    /// `{H, H}` with its per-shape report. Valid iff every coefficient value
    /// at the base point is within `tol`.
    pub fn check_master_equation(&self, tol: f64) -> Result<MasterResidual> {
        let h = self.build_hamiltonian()?;
        let residual = poisson_bracket(&h, &h, &self.metric)?;
        Ok(MasterResidual::new(residual, tol))
    }

    /// Anchor, bracket structure functions and pairing at the base point.
    pub fn export_courant_data(&self) -> CourantData {
        CourantData {
            base_point: self.chart.base_point().to_vec(),
            anchor: self
                .rho_jets
                .iter()
                .map(|row| row.iter().map(Jet::value).collect())
                .collect(),
            bracket: self
                .c_jets
                .iter()
                .filter(|(_, j)| j.value() != 0.0)
                .map(|(k, j)| BracketConstant {
                    indices: [k[0] + 1, k[1] + 1, k[2] + 1],
                    value: j.value(),
                })
                .collect(),
            pairing_plus: self.metric.plus().to_vec(),
            pairing_minus: self.metric.minus().to_vec(),
        }
    }
}

/// `τ = e_a ξ^a = Σ_a g_aa e^a ξ^a` over the undotted block.
pub fn tautological_section(chart: &Arc<GradedChart>, metric: &MetricSplit) -> Result<GradedElement> {
    metric.check_chart(chart)?;
    let mut tau = GradedElement::zero(chart);
    for a in 0..chart.r() {
        let t = GradedElement::term(
            chart,
            Jet::constant(chart.jets(), metric.g(a)),
            &[],
            &[Generator::E(a), Generator::Xi(a)],
        )?;
        tau = tau.add(&t)?;
    }
    Ok(tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualShape {
    /// `p p`: anchor isotropy `ρ g⁻¹ ρᵀ = 0`
    PP,
    /// `p e e`: anchor is a bracket morphism
    PEE,
    /// `e e e e`: Jacobi-type identity
    E4,
    Other,
}

impl ResidualShape {
    fn of(m: &Monomial) -> ResidualShape {
        match (m.p_degree(), m.odd_degree()) {
            (2, 0) => ResidualShape::PP,
            (1, 2) => ResidualShape::PEE,
            (0, 4) => ResidualShape::E4,
            _ => ResidualShape::Other,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualGroup {
    pub shape: ResidualShape,
    pub terms: usize,
    pub max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct MasterResidual {
    pub residual: GradedElement,
    pub groups: Vec<ResidualGroup>,
    pub tol: f64,
}

impl MasterResidual {
    fn new(residual: GradedElement, tol: f64) -> MasterResidual {
        let mut groups: BTreeMap<ResidualShape, ResidualGroup> = BTreeMap::new();
        for (m, c) in residual.terms() {
            let shape = ResidualShape::of(m);
            let g = groups.entry(shape).or_insert(ResidualGroup {
                shape,
                terms: 0,
                max_abs: 0.0,
            });
            g.terms += 1;
            g.max_abs = g.max_abs.max(c.value().abs());
        }
        MasterResidual {
            residual,
            groups: groups.into_values().collect(),
            tol,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.groups.iter().fold(0.0, |m, g| m.max(g.max_abs))
    }

    pub fn is_valid(&self) -> bool {
        self.max_abs() <= self.tol
    }

    pub fn group(&self, shape: ResidualShape) -> Option<&ResidualGroup> {
        self.groups.iter().find(|g| g.shape == shape)
    }

    /// The `p·p` block as a symmetric matrix: `p_i p_j` carries `2 M_ij`
    /// for `i ≠ j` and `M_ii` on the diagonal.
    pub fn pp_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.residual.chart().n();
        let mut m = vec![vec![0.0; n]; n];
        for (mono, c) in self.residual.terms() {
            if mono.p_degree() != 2 || mono.odd_degree() != 0 {
                continue;
            }
            let idx: Vec<usize> = mono
                .p
                .iter()
                .enumerate()
                .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
                .collect();
            let (i, j) = (idx[0], idx[1]);
            if i == j {
                m[i][i] = c.value();
            } else {
                m[i][j] = c.value() / 2.0;
                m[j][i] = c.value() / 2.0;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketConstant {
    /// 1-based, dotted indices written `r+1 … r+s`.
    pub indices: [usize; 3],
    pub value: f64,
}

/// Courant-algebroid dictionary at a point: anchor `ρ`, bracket structure
/// functions `c_{αβγ} = ⟨[s_α, s_β], s_γ⟩` and the diagonal pairing.
#[derive(Debug, Clone, Serialize)]
pub struct CourantData {
    pub base_point: Vec<f64>,
    pub anchor: Vec<Vec<f64>>,
    pub bracket: Vec<BracketConstant>,
    pub pairing_plus: Vec<i8>,
    pub pairing_minus: Vec<i8>,
}

#[cfg(test)]
mod tests;
