//! Truncated multivariate Taylor expansions ("jets") at a base point.
//!
//! A jet of order `K` in `n` variables stores the monomial Taylor
//! coefficients `∂^m f(x0) / m!` for every multi-index `|m| ≤ K`, so ring
//! multiplication is truncated polynomial convolution. Monomials are ordered
//! by total degree, then lexicographically with higher powers of earlier
//! variables first (`1, x1, x2, x1², x1x2, x2², …`).
//!
//! Each jet also carries a differentiation budget: the highest order to which
//! its coefficients are trustworthy. Taking a partial derivative lowers the
//! budget by one; coefficients above the budget are kept at zero.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared layout for all jets with the same dimension, order and base point.
#[derive(Debug)]
pub struct JetSpace {
    dim: usize,
    order: u32,
    base_point: Vec<f64>,
    monomials: Vec<Vec<u32>>,
    degree: Vec<u32>,
    index: HashMap<Vec<u32>, usize>,
    /// (i, j, k): coefficient i times coefficient j lands on k.
    mul_table: Vec<(usize, usize, usize)>,
    /// For each direction: (source, target, factor) of the partial derivative.
    deriv_table: Vec<Vec<(usize, usize, f64)>>,
}

impl PartialEq for JetSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.order == other.order && self.base_point == other.base_point
    }
}

fn monomials_of_degree(dim: usize, d: u32, out: &mut Vec<Vec<u32>>) {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
        cur[pos] = 0;
    }
    if dim == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0; dim];
    rec(0, d, &mut cur, out);
}

impl JetSpace {
    pub fn new(base_point: Vec<f64>, order: u32) -> Arc<JetSpace> {
        let dim = base_point.len();
        let mut monomials = Vec::new();
        for d in 0..=order {
            monomials_of_degree(dim, d, &mut monomials);
        }
        let degree: Vec<u32> = monomials.iter().map(|m| m.iter().sum()).collect();
        let index: HashMap<Vec<u32>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut mul_table = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push((i, j, index[&sum]));
            }
        }
        let mut deriv_table = vec![Vec::new(); dim];
        for (dir, table) in deriv_table.iter_mut().enumerate() {
            for (src, m) in monomials.iter().enumerate() {
                if m[dir] == 0 {
                    continue;
                }
                let mut t = m.clone();
                t[dir] -= 1;
                table.push((src, index[&t], m[dir] as f64));
            }
        }
        Arc::new(JetSpace {
            dim,
            order,
            base_point,
            monomials,
            degree,
            index,
            mul_table,
            deriv_table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    /// C(n + K, K)
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    pub fn index_of(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn degree_of(&self, idx: usize) -> u32 {
        self.degree[idx]
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
    budget: u32,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("coeffs", &self.coeffs)
            .field("budget", &self.budget)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.budget == other.budget && self.coeffs == other.coeffs && self.same_space(other)
    }
}

fn factorial(m: &[u32]) -> f64 {
    m.iter()
        .map(|&k| (1..=k).map(|v| v as f64).product::<f64>())
        .product()
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = v;
        Jet {
            space: space.clone(),
            coeffs,
            budget: space.order,
        }
    }

    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet::constant(space, 0.0)
    }

    /// The coordinate function `x_i` expanded at the base point.
    pub fn variable(space: &Arc<JetSpace>, i: usize) -> Result<Jet> {
        if i >= space.dim {
            return Err(Error::VariableOutOfRange {
                index: i + 1,
                dim: space.dim,
            });
        }
        let mut j = Jet::constant(space, space.base_point[i]);
        if space.order >= 1 {
            let mut m = vec![0; space.dim];
            m[i] = 1;
            j.coeffs[space.index[&m]] = 1.0;
        }
        Ok(j)
    }

    /// Build from monomial Taylor coefficients (layout of [`JetSpace::monomials`]).
    pub fn from_taylor(space: &Arc<JetSpace>, coeffs: Vec<f64>, budget: u32) -> Result<Jet> {
        if coeffs.len() != space.len() {
            return Err(Error::Shape(format!(
                "jet needs {} coefficients, got {}",
                space.len(),
                coeffs.len()
            )));
        }
        let mut j = Jet {
            space: space.clone(),
            coeffs,
            budget: budget.min(space.order),
        };
        j.truncate();
        Ok(j)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn taylor(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn same_space(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    /// Raw partial derivative `∂^m f(x0)`, a view on the stored coefficients.
    pub fn partial(&self, m: &[u32]) -> Option<f64> {
        let idx = self.space.index_of(m)?;
        if self.space.degree[idx] > self.budget {
            return None;
        }
        Some(self.coeffs[idx] * factorial(m))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Largest absolute stored coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn truncate(&mut self) {
        let b = self.budget;
        for (c, &d) in self.coeffs.iter_mut().zip(&self.space.degree) {
            if d > b {
                *c = 0.0;
            }
        }
    }

    fn check(&self, other: &Jet) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Result<Jet> {
        self.check(other)?;
        let mut out = Jet {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            budget: self.budget.min(other.budget),
        };
        out.truncate();
        Ok(out)
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            budget: self.budget,
        }
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        let budget = self.budget.min(other.budget);
        let deg = &self.space.degree;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.mul_table {
            if deg[k] > budget {
                continue;
            }
            let (a, b) = (self.coeffs[i], other.coeffs[j]);
            if a != 0.0 && b != 0.0 {
                coeffs[k] += a * b;
            }
        }
        Ok(Jet {
            space: self.space.clone(),
            coeffs,
            budget,
        })
    }

    /// ∂/∂x_i; lowers the budget by one.
    pub fn partial_derivative(&self, i: usize) -> Result<Jet> {
        if i >= self.space.dim {
            return Err(Error::VariableOutOfRange {
                index: i + 1,
                dim: self.space.dim,
            });
        }
        if self.budget == 0 {
            return Err(Error::JetOrderExhausted);
        }
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(src, dst, k) in &self.space.deriv_table[i] {
            coeffs[dst] = self.coeffs[src] * k;
        }
        let mut out = Jet {
            space: self.space.clone(),
            coeffs,
            budget: self.budget - 1,
        };
        out.truncate();
        Ok(out)
    }

    /// Compose with a univariate function given its normalized derivatives
    /// `f^(k)(a0)/k!` at the constant term `a0`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        // Horner on the nilpotent part; h^(budget+1) vanishes.
        let top = self.budget as usize;
        let mut acc = Jet::constant(&self.space, series[top]);
        acc.budget = self.budget;
        for k in (0..top).rev() {
            acc = acc.mul(&h).expect("same space");
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(Error::DivisionByZeroConstantTerm);
        }
        let n = self.budget as usize;
        let series: Vec<f64> = (0..=n)
            .map(|k| (if k % 2 == 0 { 1.0 } else { -1.0 }) * a0.powi(-(k as i32) - 1))
            .collect();
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        self.mul(&other.recip()?)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::SqrtOfNonpositive(a0));
        }
        let n = self.budget as usize;
        // binom(1/2, k) a0^(1/2 - k)
        let mut series = Vec::with_capacity(n + 1);
        let mut binom = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
            }
            series.push(binom * a0.powf(0.5 - k as f64));
        }
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> Result<Jet> {
        let e = self.value().exp();
        if !e.is_finite() {
            return Err(Error::Domain(format!("exp overflow at {}", self.value())));
        }
        let mut series = Vec::new();
        let mut fact = 1.0;
        for k in 0..=self.budget as usize {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e / fact);
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    fn trig(&self, shift: usize) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut series = Vec::new();
        let mut fact = 1.0;
        for k in 0..=self.budget as usize {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(cycle[(k + shift) % 4] / fact);
        }
        self.compose(&series)
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(&self.space, 1.0);
        result.budget = self.budget;
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Max |self − other| over coefficients valid in both.
    pub fn max_diff(&self, other: &Jet) -> Result<f64> {
        self.check(other)?;
        let b = self.budget.min(other.budget);
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(&self.space.degree)
            .filter(|(_, &d)| d <= b)
            .fold(0.0, |m, ((a, c), _)| m.max((a - c).abs())))
    }
}
