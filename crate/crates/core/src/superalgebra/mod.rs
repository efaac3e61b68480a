//! Graded-commutative functions on the extended chart `(x^i, e^α, p_i, ξ^a)`,
//! the degree −2 Poisson bracket, the involution and graded derivations.
//!
//! Degrees: `x` 0, `e^α` 1, `ξ^a` 1, `p` 2. The odd generators are totally
//! ordered `e^1 < … < e^r < e^{1̇} < … < e^{ṡ} < ξ^1 < … < ξ^r` and every
//! stored odd monomial is strictly increasing in that order, the permutation
//! sign being absorbed into the coefficient.
//!
//! Bracket conventions (the only ones used anywhere downstream):
//!
//! ```text
//! {p_i, x^j} = δ_i^j      {x^j, p_i} = −δ_i^j      {e^α, e^β} = g^{αβ}
//! ```
//!
//! with `{u, v} = (u ∂⃖_y) {y, z} (∂⃗_z v)` summed over generator pairs, and the
//! `ξ^a` central. With these choices `{H, ·}` reproduces the coordinate
//! formula for `Q_E` term by term.

mod derivation;
mod element;

use std::sync::Arc;

pub use derivation::Derivation;
pub use element::{GradedElement, Monomial};

use crate::error::{Error, Result};
use crate::scalar::JetSpace;

/// Local chart: `n` base coordinates, `r` undotted and `s` dotted odd fibre
/// coordinates, `r` extra odd `ξ` and `n` momenta.
#[derive(Debug)]
pub struct GradedChart {
    n: usize,
    r: usize,
    s: usize,
    jets: Arc<JetSpace>,
}

impl PartialEq for GradedChart {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.r == other.r && self.s == other.s && *self.jets == *other.jets
    }
}

impl GradedChart {
    pub fn new(r: usize, s: usize, base_point: Vec<f64>, jet_order: u32) -> Result<Arc<GradedChart>> {
        if r + s == 0 {
            return Err(Error::Shape("chart needs r + s ≥ 1".into()));
        }
        if 2 * r + s > 64 {
            return Err(Error::Shape("at most 64 odd generators supported".into()));
        }
        Ok(Arc::new(GradedChart {
            n: base_point.len(),
            r,
            s,
            jets: JetSpace::new(base_point, jet_order),
        }))
    }

    /// Same ranks, new base point.
    pub fn at_point(&self, base_point: Vec<f64>) -> Result<Arc<GradedChart>> {
        if base_point.len() != self.n {
            return Err(Error::Shape(format!(
                "point has {} coordinates, chart has {}",
                base_point.len(),
                self.n
            )));
        }
        GradedChart::new(self.r, self.s, base_point, self.jets.order())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Total fibre rank `r + s`.
    pub fn rank(&self) -> usize {
        self.r + self.s
    }

    pub fn jets(&self) -> &Arc<JetSpace> {
        &self.jets
    }

    pub fn base_point(&self) -> &[f64] {
        self.jets.base_point()
    }

    pub fn jet_order(&self) -> u32 {
        self.jets.order()
    }

    pub(crate) fn odd_bit(&self, g: Generator) -> Option<u32> {
        match g {
            Generator::E(a) => Some(a as u32),
            Generator::Xi(a) => Some((self.r + self.s + a) as u32),
            _ => None,
        }
    }

    pub(crate) fn odd_generator(&self, bit: u32) -> Generator {
        let b = bit as usize;
        if b < self.r + self.s {
            Generator::E(b)
        } else {
            Generator::Xi(b - self.r - self.s)
        }
    }

    /// Bits of the dotted `e^{ȧ}`.
    pub(crate) fn dotted_mask(&self) -> u64 {
        ((1u64 << self.s) - 1) << self.r
    }

    #[cfg(test)]
    pub(crate) fn undotted_e_mask(&self) -> u64 {
        (1u64 << self.r) - 1
    }

    pub(crate) fn xi_mask(&self) -> u64 {
        ((1u64 << self.r) - 1) << (self.r + self.s)
    }

    /// Every generator of the chart, in a fixed order.
    pub fn generators(&self) -> Vec<Generator> {
        let mut v = Vec::with_capacity(2 * self.n + 2 * self.r + self.s);
        v.extend((0..self.n).map(Generator::X));
        v.extend((0..self.rank()).map(Generator::E));
        v.extend((0..self.n).map(Generator::P));
        v.extend((0..self.r).map(Generator::Xi));
        v
    }

    pub fn generator_name(&self, g: Generator) -> String {
        match g {
            Generator::X(i) => format!("x{}", i + 1),
            Generator::P(i) => format!("p{}", i + 1),
            Generator::E(a) if a < self.r => format!("e{}", a + 1),
            Generator::E(a) => format!("ed{}", a - self.r + 1),
            Generator::Xi(a) => format!("xi{}", a + 1),
        }
    }
}

/// Coordinate generators. `E(α)` runs over undotted `0..r` then dotted
/// `r..r+s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    X(usize),
    E(usize),
    P(usize),
    Xi(usize),
}

impl Generator {
    pub fn degree(self) -> i32 {
        match self {
            Generator::X(_) => 0,
            Generator::E(_) | Generator::Xi(_) => 1,
            Generator::P(_) => 2,
        }
    }

    pub fn is_odd(self) -> bool {
        self.degree() % 2 == 1
    }
}

/// Diagonal constant pairing: `g_ab` on the undotted block, `g_ȧḃ` on the
/// dotted block, mixed entries zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSplit {
    plus: Vec<i8>,
    minus: Vec<i8>,
}

impl MetricSplit {
    pub fn new(plus: Vec<i8>, minus: Vec<i8>) -> Result<MetricSplit> {
        if plus.iter().chain(&minus).any(|&v| v != 1 && v != -1) {
            return Err(Error::Shape("metric signs must be ±1".into()));
        }
        Ok(MetricSplit { plus, minus })
    }

    /// Positive on the undotted block, negative on the dotted block.
    pub fn standard(r: usize, s: usize) -> MetricSplit {
        MetricSplit {
            plus: vec![1; r],
            minus: vec![-1; s],
        }
    }

    pub fn plus(&self) -> &[i8] {
        &self.plus
    }

    pub fn minus(&self) -> &[i8] {
        &self.minus
    }

    pub fn r(&self) -> usize {
        self.plus.len()
    }

    pub fn s(&self) -> usize {
        self.minus.len()
    }

    /// `g_αα = g^αα` over the combined index.
    pub fn g(&self, alpha: usize) -> f64 {
        let v = if alpha < self.plus.len() {
            self.plus[alpha]
        } else {
            self.minus[alpha - self.plus.len()]
        };
        v as f64
    }

    pub(crate) fn check_chart(&self, chart: &GradedChart) -> Result<()> {
        if self.plus.len() != chart.r || self.minus.len() != chart.s {
            return Err(Error::Shape(format!(
                "metric split ({}, {}) does not match chart ranks ({}, {})",
                self.plus.len(),
                self.minus.len(),
                chart.r,
                chart.s
            )));
        }
        Ok(())
    }
}

/// `{u, v}` for the symplectic form with momenta paired to base coordinates
/// and the fibre pairing `g`.
pub fn poisson_bracket(u: &GradedElement, v: &GradedElement, g: &MetricSplit) -> Result<GradedElement> {
    let chart = u.chart().clone();
    if **v.chart() != *chart {
        return Err(Error::ChartMismatch);
    }
    g.check_chart(&chart)?;
    let mut out = GradedElement::zero(&chart);
    if u.is_zero() || v.is_zero() {
        return Ok(out);
    }
    let mut pair = |y: Generator, z: Generator, w: f64| -> Result<()> {
        let du = u.right_derivative(y)?;
        if du.is_zero() {
            return Ok(());
        }
        let dv = v.left_derivative(z)?;
        if dv.is_zero() {
            return Ok(());
        }
        out = out.add(&du.multiply(&dv)?.scale(w))?;
        Ok(())
    };
    for i in 0..chart.n() {
        pair(Generator::X(i), Generator::P(i), -1.0)?;
        pair(Generator::P(i), Generator::X(i), 1.0)?;
    }
    for a in 0..chart.rank() {
        pair(Generator::E(a), Generator::E(a), g.g(a))?;
    }
    Ok(out)
}

/// The involution: `e^{ȧ} ↦ −e^{ȧ}`, every other generator fixed.
pub fn apply_involution(u: &GradedElement) -> GradedElement {
    u.involution()
}

/// The Hamiltonian vector field `{h, ·}` as a derivation.
pub fn hamiltonian_derivation(h: &GradedElement, g: &MetricSplit) -> Result<Derivation> {
    let chart = h.chart().clone();
    let degree = h
        .degree()
        .ok_or_else(|| Error::Shape("hamiltonian must be homogeneous".into()))?;
    let mut d = Derivation::zero(&chart, degree - 2);
    for gen in chart.generators() {
        if matches!(gen, Generator::Xi(_)) {
            continue;
        }
        let y = GradedElement::generator(&chart, gen)?;
        d.set(gen, poisson_bracket(h, &y, g)?)?;
    }
    Ok(d)
}
