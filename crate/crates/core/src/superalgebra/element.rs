use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{GradedChart, Generator};
use crate::error::{Error, Result};
use crate::scalar::Jet;

/// A monomial `p^m · θ_{i1} ⋯ θ_{ik}` with the odd part as a bitset in the
/// chart's generator order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub p: Vec<u8>,
    pub odd: u64,
}

impl Monomial {
    pub fn unit(n: usize) -> Monomial {
        Monomial {
            p: vec![0; n],
            odd: 0,
        }
    }

    pub fn p_degree(&self) -> u32 {
        self.p.iter().map(|&k| k as u32).sum()
    }

    pub fn odd_degree(&self) -> u32 {
        self.odd.count_ones()
    }

    pub fn degree(&self) -> i32 {
        (2 * self.p_degree() + self.odd_degree()) as i32
    }

    pub fn odd_bits(&self) -> impl Iterator<Item = u32> + '_ {
        let mut m = self.odd;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let b = m.trailing_zeros();
                m &= m - 1;
                Some(b)
            }
        })
    }
}

/// Sign of reordering `a · b` (both sorted) into a sorted monomial, or `None`
/// if they share a generator.
fn merge_sign(a: u64, b: u64) -> Option<f64> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let bit = rest.trailing_zeros();
        rest &= rest - 1;
        let above = if bit >= 63 { 0 } else { a >> (bit + 1) };
        swaps += above.count_ones();
    }
    Some(if swaps % 2 == 0 { 1.0 } else { -1.0 })
}

/// Canonical-form element of the graded algebra.
#[derive(Clone)]
pub struct GradedElement {
    chart: Arc<GradedChart>,
    terms: BTreeMap<Monomial, Jet>,
}

impl fmt::Debug for GradedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GradedElement({self})")
    }
}

impl GradedElement {
    pub fn zero(chart: &Arc<GradedChart>) -> GradedElement {
        GradedElement {
            chart: chart.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: &Arc<GradedChart>, coeff: Jet) -> Result<GradedElement> {
        GradedElement::term(chart, coeff, &[], &[])
    }

    /// `coeff · Π p_{momenta} · odd[0] ⋯ odd[k]`, with the odd factors given in
    /// any order; the reordering sign is applied.
    pub fn term(
        chart: &Arc<GradedChart>,
        coeff: Jet,
        momenta: &[usize],
        odd: &[Generator],
    ) -> Result<GradedElement> {
        if **coeff.space() != **chart.jets() {
            return Err(Error::ChartMismatch);
        }
        let mut out = GradedElement::zero(chart);
        let mut mono = Monomial::unit(chart.n());
        for &i in momenta {
            if i >= chart.n() {
                return Err(Error::Shape(format!("momentum p{} out of range", i + 1)));
            }
            mono.p[i] += 1;
        }
        let mut sign = 1.0;
        for &g in odd {
            let bit = chart
                .odd_bit(g)
                .ok_or_else(|| Error::Shape(format!("{g:?} is not an odd generator")))?;
            check_generator(chart, g)?;
            match merge_sign(mono.odd, 1u64 << bit) {
                Some(s) => {
                    sign *= s;
                    mono.odd |= 1u64 << bit;
                }
                None => return Ok(out),
            }
        }
        out.insert(mono, coeff.scale(sign))?;
        Ok(out)
    }

    /// A single coordinate generator as a function.
    pub fn generator(chart: &Arc<GradedChart>, g: Generator) -> Result<GradedElement> {
        check_generator(chart, g)?;
        let one = Jet::constant(chart.jets(), 1.0);
        match g {
            Generator::X(i) => GradedElement::scalar(chart, Jet::variable(chart.jets(), i)?),
            Generator::P(i) => GradedElement::term(chart, one, &[i], &[]),
            _ => GradedElement::term(chart, one, &[], &[g]),
        }
    }

    pub fn chart(&self) -> &Arc<GradedChart> {
        &self.chart
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Jet)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&Jet> {
        self.terms.get(m)
    }

    /// Common degree of all terms; `None` if inhomogeneous. Zero has every
    /// degree and reports `Some(0)`.
    pub fn degree(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(Monomial::degree);
        match it.next() {
            None => Some(0),
            Some(d) => it.all(|e| e == d).then_some(d),
        }
    }

    fn insert(&mut self, m: Monomial, c: Jet) -> Result<()> {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&c)?;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
        Ok(())
    }

    fn same_chart(&self, other: &GradedElement) -> Result<()> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }

    pub fn add(&self, other: &GradedElement) -> Result<GradedElement> {
        self.same_chart(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &GradedElement) -> Result<GradedElement> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> GradedElement {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> GradedElement {
        let mut out = GradedElement::zero(&self.chart);
        if k == 0.0 {
            return out;
        }
        out.terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c.scale(k)))
            .collect();
        out
    }

    /// Multiply every coefficient by a degree-0 function.
    pub fn mul_jet(&self, f: &Jet) -> Result<GradedElement> {
        let mut out = GradedElement::zero(&self.chart);
        for (m, c) in &self.terms {
            out.insert(m.clone(), c.mul(f)?)?;
        }
        Ok(out)
    }

    /// Graded-commutative product.
    pub fn multiply(&self, other: &GradedElement) -> Result<GradedElement> {
        self.same_chart(other)?;
        let mut out = GradedElement::zero(&self.chart);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let Some(sign) = merge_sign(ma.odd, mb.odd) else {
                    continue;
                };
                let m = Monomial {
                    p: ma.p.iter().zip(&mb.p).map(|(a, b)| a + b).collect(),
                    odd: ma.odd | mb.odd,
                };
                let c = ca.mul(cb)?;
                out.insert(m, if sign < 0.0 { c.neg() } else { c })?;
            }
        }
        Ok(out)
    }

    /// Scale every term by (−1)^(number of dotted generators).
    pub fn involution(&self) -> GradedElement {
        let dotted = self.chart.dotted_mask();
        let mut out = self.clone();
        for (m, c) in out.terms.iter_mut() {
            if (m.odd & dotted).count_ones() % 2 == 1 {
                *c = c.neg();
            }
        }
        out
    }

    /// Keep only the terms for which `keep` holds.
    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> GradedElement {
        GradedElement {
            chart: self.chart.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    fn derivative(&self, g: Generator, from_left: bool) -> Result<GradedElement> {
        check_generator(&self.chart, g)?;
        let mut out = GradedElement::zero(&self.chart);
        match g {
            Generator::X(i) => {
                for (m, c) in &self.terms {
                    out.insert(m.clone(), c.partial_derivative(i)?)?;
                }
            }
            Generator::P(i) => {
                for (m, c) in &self.terms {
                    let k = m.p[i];
                    if k == 0 {
                        continue;
                    }
                    let mut m2 = m.clone();
                    m2.p[i] -= 1;
                    out.insert(m2, c.scale(k as f64))?;
                }
            }
            _ => {
                let bit = self.chart.odd_bit(g).unwrap();
                let b = 1u64 << bit;
                for (m, c) in &self.terms {
                    if m.odd & b == 0 {
                        continue;
                    }
                    let passed = if from_left {
                        (m.odd & (b - 1)).count_ones()
                    } else {
                        (m.odd & !(b | (b - 1))).count_ones()
                    };
                    let mut m2 = m.clone();
                    m2.odd &= !b;
                    out.insert(m2, if passed % 2 == 1 { c.neg() } else { c.clone() })?;
                }
            }
        }
        Ok(out)
    }

    /// `∂⃗/∂y`: the generator is moved to the front before removal.
    pub fn left_derivative(&self, g: Generator) -> Result<GradedElement> {
        self.derivative(g, true)
    }

    /// `∂⃖/∂y`: the generator is moved to the back before removal.
    pub fn right_derivative(&self, g: Generator) -> Result<GradedElement> {
        self.derivative(g, false)
    }

    /// Largest absolute coefficient value over all terms and valid orders.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    /// Largest absolute value of the coefficients at the base point.
    pub fn max_abs_value(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.value().abs()))
    }

    /// Canonical text form: terms sorted by (p-monomial, odd sequence), each
    /// coefficient printed as its value at the base point.
    pub fn render(&self) -> String {
        self.to_string()
    }

    fn odd_sequence(&self, m: &Monomial) -> Vec<Generator> {
        m.odd_bits().map(|b| self.chart.odd_generator(b)).collect()
    }
}

fn check_generator(chart: &GradedChart, g: Generator) -> Result<()> {
    let ok = match g {
        Generator::X(i) | Generator::P(i) => i < chart.n(),
        Generator::E(a) => a < chart.rank(),
        Generator::Xi(a) => a < chart.r(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!("generator {g:?} not in chart")))
    }
}

impl fmt::Display for GradedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut rows: Vec<(Vec<u8>, Vec<Generator>, f64)> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let p: Vec<u8> = m.p.clone();
                (p, self.odd_sequence(m), c.value())
            })
            .collect();
        rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        for (k, (p, odd, v)) in rows.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({v})")?;
            for (i, &e) in p.iter().enumerate() {
                for _ in 0..e {
                    write!(f, "*p{}", i + 1)?;
                }
            }
            for &g in odd {
                write!(f, "*{}", self.chart.generator_name(g))?;
            }
        }
        Ok(())
    }
}

impl PartialEq for GradedElement {
    /// Exact equality of canonical forms.
    fn eq(&self, other: &Self) -> bool {
        self.same_chart(other).is_ok() && self.terms == other.terms
    }
}
