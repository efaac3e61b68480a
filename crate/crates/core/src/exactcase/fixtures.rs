//! Standard exact models: flat space, round spheres, and the round
//! three-sphere with `η = k · vol`.

use super::ExactModel;
use crate::error::Result;
use crate::scalar::{Expr, ScalarField};

fn parse(src: &str, dim: usize) -> Result<ScalarField> {
    ScalarField::parse(src, dim)
}

fn diagonal(entries: &[&str]) -> Result<Vec<Vec<ScalarField>>> {
    let m = entries.len();
    let mut g = vec![vec![ScalarField::constant(0.0); m]; m];
    for (i, e) in entries.iter().enumerate() {
        g[i][i] = parse(e, m)?;
    }
    Ok(g)
}

/// Euclidean `R^m` with the given constant 3-form components.
pub fn flat(m: usize, eta: Vec<([usize; 3], ScalarField)>, base_point: Vec<f64>, order: u32) -> Result<ExactModel> {
    let ones = vec!["1"; m];
    ExactModel::new(diagonal(&ones)?, eta, base_point, order)
}

/// Unit 2-sphere, `g = dx1² + sin²(x1) dx2²`.
pub fn round_s2(base_point: Vec<f64>, order: u32) -> Result<ExactModel> {
    ExactModel::new(diagonal(&["1", "sin(x1)^2"])?, vec![], base_point, order)
}

/// Unit 3-sphere in hyperspherical coordinates with `η = k sin²(x1) sin(x2) dx¹²³`.
pub fn round_s3(k: f64, base_point: Vec<f64>, order: u32) -> Result<ExactModel> {
    let g = diagonal(&["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2"])?;
    let eta = if k == 0.0 {
        vec![]
    } else {
        let vol = crate::scalar::parse_expression("sin(x1)^2*sin(x2)", 3)?;
        vec![([0, 1, 2], ScalarField::Expr(Expr::mul(Expr::num(k), vol)))]
    };
    ExactModel::new(g, eta, base_point, order)
}

/// Golden-section search for the `k` minimizing `f(k)` on `[lo, hi]`.
pub fn scan_minimum(lo: f64, hi: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let k = (a + b) / 2.0;
    Ok((k, f(k)?))
}
