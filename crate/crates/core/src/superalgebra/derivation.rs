use std::collections::BTreeMap;
use std::sync::Arc;

use super::{GradedChart, GradedElement, Generator};
use crate::error::{Error, Result};

/// A graded derivation given by its values on the coordinate generators.
/// Generators missing from the table map to zero.
#[derive(Debug, Clone)]
pub struct Derivation {
    chart: Arc<GradedChart>,
    degree: i32,
    table: BTreeMap<Generator, GradedElement>,
}

impl Derivation {
    pub fn zero(chart: &Arc<GradedChart>, degree: i32) -> Derivation {
        Derivation {
            chart: chart.clone(),
            degree,
            table: BTreeMap::new(),
        }
    }

    pub fn chart(&self) -> &Arc<GradedChart> {
        &self.chart
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn parity(&self) -> u8 {
        self.degree.rem_euclid(2) as u8
    }

    /// Set the image of a generator. Nonzero images must have degree
    /// `deg(generator) + deg(D)`.
    pub fn set(&mut self, g: Generator, image: GradedElement) -> Result<()> {
        if **image.chart() != *self.chart {
            return Err(Error::ChartMismatch);
        }
        if image.is_zero() {
            self.table.remove(&g);
            return Ok(());
        }
        let want = g.degree() + self.degree;
        match image.degree() {
            Some(d) if d == want => {}
            other => {
                return Err(Error::Shape(format!(
                    "image of {g:?} has degree {other:?}, expected {want}"
                )))
            }
        }
        self.table.insert(g, image);
        Ok(())
    }

    pub fn image(&self, g: Generator) -> GradedElement {
        self.table
            .get(&g)
            .cloned()
            .unwrap_or_else(|| GradedElement::zero(&self.chart))
    }

    pub fn images(&self) -> impl Iterator<Item = (&Generator, &GradedElement)> {
        self.table.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_empty()
    }

    /// Extend the table by the graded Leibniz rule:
    /// `D(u) = Σ_y D(y) · ∂⃗u/∂y`.
    pub fn apply(&self, u: &GradedElement) -> Result<GradedElement> {
        if **u.chart() != *self.chart {
            return Err(Error::ChartMismatch);
        }
        let mut out = GradedElement::zero(&self.chart);
        for (&g, img) in &self.table {
            let du = u.left_derivative(g)?;
            if du.is_zero() {
                continue;
            }
            out = out.add(&img.multiply(&du)?)?;
        }
        Ok(out)
    }

    /// Pointwise sum of tables (same degree).
    pub fn add(&self, other: &Derivation) -> Result<Derivation> {
        if self.degree != other.degree || *self.chart != *other.chart {
            return Err(Error::ChartMismatch);
        }
        let mut out = self.clone();
        for (&g, img) in &other.table {
            let sum = out.image(g).add(img)?;
            out.set(g, sum)?;
        }
        Ok(out)
    }
}
