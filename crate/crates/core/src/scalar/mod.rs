//! Scalar fields on the base manifold: expressions, jet evaluation and a
//! central finite-difference oracle.

mod expr;
mod jet;

use std::sync::Arc;

pub use expr::{parse_expression, BinOp, Expr, Func};
pub use jet::{Jet, JetSpace};

use crate::error::{Error, Result};

/// Taylor expansion of `e` at the base point of `space`, exact to its order.
pub fn evaluate_jet(e: &Expr, space: &Arc<JetSpace>) -> Result<Jet> {
    Ok(match e {
        Expr::Num(v) => Jet::constant(space, *v),
        Expr::Rational(p, q) => {
            if *q == 0 {
                return Err(Error::DivisionByZeroConstantTerm);
            }
            Jet::constant(space, *p as f64 / *q as f64)
        }
        Expr::Var(i) => Jet::variable(space, *i)?,
        Expr::Neg(a) => evaluate_jet(a, space)?.neg(),
        Expr::Call(f, a) => {
            let a = evaluate_jet(a, space)?;
            match f {
                Func::Sqrt => a.sqrt()?,
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp()?,
            }
        }
        Expr::Bin(op, a, b) => {
            let (a, b) = (evaluate_jet(a, space)?, evaluate_jet(b, space)?);
            match op {
                BinOp::Add => a.add(&b)?,
                BinOp::Sub => a.sub(&b)?,
                BinOp::Mul => a.mul(&b)?,
                BinOp::Div => a.div(&b)?,
            }
        }
        Expr::Pow(a, n) => evaluate_jet(a, space)?.powi(*n)?,
    })
}

/// Default per-axis finite-difference step: `1e-4 · max(1, |x0_i|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Central-difference estimate of all partials of order `≤ order` (at most
/// 2), returned in jet layout. Truncation error is O(h²).
pub fn finite_difference_jet(e: &Expr, x0: &[f64], order: u32, h: f64) -> Result<Jet> {
    if order > 2 {
        return Err(Error::Domain(format!(
            "finite differences support order ≤ 2, got {order}"
        )));
    }
    let n = x0.len();
    let space = JetSpace::new(x0.to_vec(), order);
    let steps: Vec<f64> = x0.iter().map(|x| h * x.abs().max(1.0)).collect();
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut p = x0.to_vec();
        for &(i, d) in shifts {
            p[i] += d;
        }
        e.eval(&p)
    };
    let f0 = at(&[])?;
    let mut coeffs = vec![0.0; space.len()];
    coeffs[0] = f0;
    let mut m = vec![0u32; n];
    if order >= 1 {
        for i in 0..n {
            let hi = steps[i];
            let d1 = (at(&[(i, hi)])? - at(&[(i, -hi)])?) / (2.0 * hi);
            m[i] = 1;
            coeffs[space.index_of(&m).unwrap()] = d1;
            m[i] = 0;
        }
    }
    if order >= 2 {
        for i in 0..n {
            let hi = steps[i];
            let d2 = (at(&[(i, hi)])? - 2.0 * f0 + at(&[(i, -hi)])?) / (hi * hi);
            m[i] = 2;
            coeffs[space.index_of(&m).unwrap()] = 0.5 * d2;
            m[i] = 0;
            for j in i + 1..n {
                let hj = steps[j];
                let d = (at(&[(i, hi), (j, hj)])? - at(&[(i, hi), (j, -hj)])?
                    - at(&[(i, -hi), (j, hj)])?
                    + at(&[(i, -hi), (j, -hj)])?)
                    / (4.0 * hi * hj);
                m[i] = 1;
                m[j] = 1;
                coeffs[space.index_of(&m).unwrap()] = d;
                m[i] = 0;
                m[j] = 0;
            }
        }
    }
    Jet::from_taylor(&space, coeffs, order)
}

/// A coefficient field: either a symbolic expression (re-evaluable at any
/// point) or a Taylor expansion tied to one base point.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Expr(Expr),
    Taylor(Jet),
}

impl ScalarField {
    pub fn constant(v: f64) -> ScalarField {
        ScalarField::Expr(Expr::Num(v))
    }

    pub fn parse(src: &str, dim: usize) -> Result<ScalarField> {
        Ok(ScalarField::Expr(parse_expression(src, dim)?))
    }

    /// `k · self`, keeping the representation.
    pub fn scale(&self, k: f64) -> ScalarField {
        match self {
            ScalarField::Expr(e) if k == 1.0 => ScalarField::Expr(e.clone()),
            ScalarField::Expr(e) if k == -1.0 => ScalarField::Expr(Expr::neg(e.clone())),
            ScalarField::Expr(e) => ScalarField::Expr(Expr::mul(Expr::num(k), e.clone())),
            ScalarField::Taylor(j) => ScalarField::Taylor(j.scale(k)),
        }
    }

    /// Sum of two fields. Mixed representations are evaluated on `space`.
    pub fn add(&self, other: &ScalarField, space: &Arc<JetSpace>) -> Result<ScalarField> {
        match (self, other) {
            (ScalarField::Expr(a), ScalarField::Expr(b)) => {
                Ok(ScalarField::Expr(Expr::add(a.clone(), b.clone())))
            }
            _ => Ok(ScalarField::Taylor(self.jet(space)?.add(&other.jet(space)?)?)),
        }
    }

    pub fn jet(&self, space: &Arc<JetSpace>) -> Result<Jet> {
        match self {
            ScalarField::Expr(e) => evaluate_jet(e, space),
            ScalarField::Taylor(j) => {
                if **j.space() == **space {
                    Ok(j.clone())
                } else {
                    Err(Error::ChartMismatch)
                }
            }
        }
    }
}

impl From<Expr> for ScalarField {
    fn from(e: Expr) -> Self {
        ScalarField::Expr(e)
    }
}

impl From<Jet> for ScalarField {
    fn from(j: Jet) -> Self {
        ScalarField::Taylor(j)
    }
}
