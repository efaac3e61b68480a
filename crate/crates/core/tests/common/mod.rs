//! Random model generators and independent oracles shared by the
//! integration tests. Nothing here goes through `Q²`, `π` or `C`.

#![allow(dead_code)]

use std::sync::Arc;

use nqricci::connection::Connection;
use nqricci::nq::NqStructure;
use nqricci::scalar::{Expr, Func, Jet, ScalarField};
use nqricci::superalgebra::{GradedChart, GradedElement, Generator, MetricSplit};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer-coefficient polynomial of degree ≤ `deg` in `n` variables.
pub fn random_poly(rng: &mut Rng8, n: usize, deg: u32) -> Expr {
    let mut e = Expr::num(rng.gen_range(-3..=3) as f64);
    for _ in 0..rng.gen_range(0..=3) {
        if n == 0 {
            break;
        }
        let mut mono = Expr::num(rng.gen_range(-2..=2) as f64);
        for _ in 0..rng.gen_range(1..=deg.max(1)) {
            mono = Expr::mul(mono, Expr::var(rng.gen_range(0..n)));
        }
        e = Expr::add(e, mono);
    }
    e
}

fn field(e: Expr) -> ScalarField {
    ScalarField::Expr(e)
}

pub fn random_metric(rng: &mut Rng8, r: usize, s: usize) -> MetricSplit {
    let mut sig = |k| (0..k).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    let plus = sig(r);
    let minus = sig(s);
    MetricSplit::new(plus, minus).unwrap()
}

/// Unconstrained polynomial `(ρ, c)`; generally fails the master equation.
pub fn general_structure(rng: &mut Rng8, n: usize, r: usize, s: usize, order: u32) -> NqStructure {
    let pt = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let chart = GradedChart::new(r, s, pt, order).unwrap();
    let metric = random_metric(rng, r, s);
    let rank = r + s;
    let rho = (0..n)
        .map(|_| (0..rank).map(|_| field(random_poly(rng, n, 2))).collect())
        .collect();
    let mut c = Vec::new();
    for a in 0..rank {
        for b in a + 1..rank {
            for g in b + 1..rank {
                if rng.gen_bool(0.8) {
                    c.push(([a, b, g], field(random_poly(rng, n, 2))));
                }
            }
        }
    }
    NqStructure::new(chart, metric, rho, c).unwrap()
}

/// Random `n ≤ 3`, `r + s ≤ 4` chart dimensions with `r + s ≥ 1`.
pub fn random_dims(rng: &mut Rng8) -> (usize, usize, usize) {
    let n = rng.gen_range(0..=3);
    let rank = rng.gen_range(1..=4);
    let r = rng.gen_range(0..=rank);
    (n, r, rank - r)
}

/// `exp(K G)` for a random antisymmetric `K`: preserves the diagonal form `G`.
pub fn random_isometry(rng: &mut Rng8, g: &[f64], scale: f64) -> Vec<Vec<f64>> {
    let d = g.len();
    let mut k = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let v = rng.gen_range(-scale..scale);
            k[i][j] = v;
            k[j][i] = -v;
        }
    }
    let a: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| k[i][j] * g[j]).collect())
        .collect();
    let mut out = identity(d);
    let mut term = identity(d);
    for m in 1..40 {
        term = matmul(&term, &a);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= m as f64;
            }
        }
        for i in 0..d {
            for j in 0..d {
                out[i][j] += term[i][j];
            }
        }
    }
    out
}

pub fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// A structure described in a frame with signs `sig` (one per index), then
/// rewritten in the frame `e = M e'` for an isometry `M`; the target chart
/// puts plus-signed indices first.
pub struct FrameModel {
    pub n: usize,
    pub sig: Vec<i8>,
    /// `rho[i][α]`
    pub rho: Vec<Vec<Expr>>,
    /// `(α, β, γ, coefficient expression)` with the stated index order
    pub c: Vec<([usize; 3], Expr)>,
}

impl FrameModel {
    pub fn build(&self, rng: &mut Rng8, base_point: Vec<f64>, order: u32, mix: f64) -> NqStructure {
        let d = self.sig.len();
        // permutation: plus indices first
        let mut perm: Vec<usize> = (0..d).filter(|&i| self.sig[i] > 0).collect();
        let r = perm.len();
        perm.extend((0..d).filter(|&i| self.sig[i] < 0));
        let g: Vec<f64> = (0..d).map(|i| if i < r { 1.0 } else { -1.0 }).collect();
        let m = if mix > 0.0 { random_isometry(rng, &g, mix) } else { identity(d) };
        // old index `perm[β]` becomes new index β before mixing
        let rho = (0..self.n)
            .map(|i| {
                (0..d)
                    .map(|al| {
                        let mut e = Expr::num(0.0);
                        for be in 0..d {
                            if m[be][al] != 0.0 {
                                e = Expr::add(e, Expr::mul(Expr::num(m[be][al]), self.rho[i][perm[be]].clone()));
                            }
                        }
                        field(e)
                    })
                    .collect()
            })
            .collect();
        let inv: Vec<usize> = {
            let mut v = vec![0; d];
            for (new, &old) in perm.iter().enumerate() {
                v[old] = new;
            }
            v
        };
        let mut c = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                for gg in b + 1..d {
                    let mut e = Expr::num(0.0);
                    let mut any = false;
                    for (idx, coeff) in &self.c {
                        let [x, y, z] = idx.map(|o| inv[o]);
                        // antisymmetrize over the six orderings
                        for (p, sign) in [
                            ([x, y, z], 1.0),
                            ([y, z, x], 1.0),
                            ([z, x, y], 1.0),
                            ([y, x, z], -1.0),
                            ([x, z, y], -1.0),
                            ([z, y, x], -1.0),
                        ] {
                            let w = sign * m[p[0]][a] * m[p[1]][b] * m[p[2]][gg];
                            if w != 0.0 {
                                e = Expr::add(e, Expr::mul(Expr::num(w), coeff.clone()));
                                any = true;
                            }
                        }
                    }
                    if any {
                        c.push(([a, b, gg], field(e)));
                    }
                }
            }
        }
        let chart = GradedChart::new(r, d - r, base_point, order).unwrap();
        let metric = MetricSplit::standard(r, d - r);
        NqStructure::new(chart, metric, rho, c).unwrap()
    }
}

/// Point-base quadratic Lie algebra: 3D blocks `c_{123} = k` of random
/// signature plus an abelian block.
pub fn lie_frame(rng: &mut Rng8, blocks: usize, abelian: usize) -> FrameModel {
    let mut sig = Vec::new();
    let mut c = Vec::new();
    for _ in 0..blocks {
        let o = sig.len();
        for _ in 0..3 {
            sig.push(if rng.gen_bool(0.5) { 1 } else { -1 });
        }
        c.push(([o, o + 1, o + 2], Expr::num(rng.gen_range(-2.0..2.0))));
    }
    for _ in 0..abelian {
        sig.push(if rng.gen_bool(0.5) { 1 } else { -1 });
    }
    if !sig.iter().any(|&v| v > 0) {
        sig[0] = 1;
    }
    FrameModel { n: 0, sig, rho: Vec::new(), c }
}

pub fn point_lie_model(rng: &mut Rng8, order: u32) -> NqStructure {
    let blocks = rng.gen_range(1..=2);
    let abelian = rng.gen_range(0..=1);
    let f = lie_frame(rng, blocks, abelian);
    f.build(rng, vec![], order, 0.6)
}

/// `n = 2` polynomial model: one 3D Lie block scaled by `F(x1)` with zero
/// anchor, plus an abelian block anchored along `∂_2` by `f_α(x1)` with
/// `Σ g_α f_α² = 0`, then mixed by a constant isometry.
pub fn n2_poly_frame(rng: &mut Rng8) -> FrameModel {
    let mut sig = Vec::new();
    for _ in 0..3 {
        sig.push(if rng.gen_bool(0.5) { 1 } else { -1 });
    }
    let x1 = || Expr::var(0);
    let poly1 = |rng: &mut Rng8| {
        Expr::add(
            Expr::num(rng.gen_range(-2..=2) as f64),
            Expr::add(
                Expr::mul(Expr::num(rng.gen_range(-2..=2) as f64), x1()),
                Expr::mul(Expr::num(rng.gen_range(-1..=1) as f64), Expr::pow(x1(), 2)),
            ),
        )
    };
    let big_f = Expr::add(Expr::num(1.0), Expr::mul(Expr::num(rng.gen_range(-1..=1) as f64), x1()));
    let c = vec![([0, 1, 2], Expr::mul(Expr::num(rng.gen_range(1..=2) as f64), big_f))];
    // abelian pair (+, −) with equal anchors, or a rotated pair of pairs
    let pairs = rng.gen_range(1..=2);
    let mut anchors = Vec::new();
    let ps: Vec<Expr> = (0..pairs).map(|_| poly1(rng)).collect();
    for p in &ps {
        sig.push(1);
        anchors.push(p.clone());
    }
    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    if pairs == 1 {
        sig.push(-1);
        anchors.push(ps[0].clone());
    } else {
        let (co, si) = (th.cos(), th.sin());
        sig.push(-1);
        anchors.push(Expr::add(Expr::mul(Expr::num(co), ps[0].clone()), Expr::mul(Expr::num(-si), ps[1].clone())));
        sig.push(-1);
        anchors.push(Expr::add(Expr::mul(Expr::num(si), ps[0].clone()), Expr::mul(Expr::num(co), ps[1].clone())));
    }
    let d = sig.len();
    let mut rho = vec![vec![Expr::num(0.0); d]; 2];
    for (k, a) in anchors.into_iter().enumerate() {
        rho[1][3 + k] = a;
    }
    FrameModel { n: 2, sig, rho, c }
}

pub fn n2_poly_model(rng: &mut Rng8, order: u32) -> NqStructure {
    let f = n2_poly_frame(rng);
    let pt = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let mix = if rng.gen_bool(0.7) { 0.5 } else { 0.0 };
    f.build(rng, pt, order, mix)
}

/// Flat exact model on `R³` with `η = h dx¹²³`: frame `s_a = ∂_a + dx^a`,
/// `s_ȧ = ∂_a − dx^a`, anchor the identity on both sectors and
/// `c_{αβγ} = ⟨ i_{X_α} i_{X_β} η, s_γ⟩ = ½ η(X_β, X_α, X_γ)` with `X` the vector part.
pub fn flat_exact_frame(h: Expr) -> FrameModel {
    let sig = vec![1, 1, 1, -1, -1, -1];
    let mut rho = vec![vec![Expr::num(0.0); 6]; 3];
    for i in 0..3 {
        rho[i][i] = Expr::num(1.0);
        rho[i][i + 3] = Expr::num(1.0);
    }
    // X_α = ∂_{α mod 3}; η(∂_j, ∂_i, ∂_k) = h ε_{jik}
    let mut c = Vec::new();
    for a in 0..6 {
        for b in a + 1..6 {
            for g in b + 1..6 {
                let (i, j, k) = (a % 3, b % 3, g % 3);
                if i == j || j == k || i == k {
                    continue;
                }
                let eps = levi_civita(j, i, k);
                c.push(([a, b, g], Expr::mul(Expr::num(0.5 * eps), h.clone())));
            }
        }
    }
    FrameModel { n: 3, sig, rho, c }
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn n3_exact_model(rng: &mut Rng8, order: u32) -> NqStructure {
    let h = random_poly(rng, 3, 2);
    let f = flat_exact_frame(h);
    let pt = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    f.build(rng, pt, order, 0.0)
}

/// `r × r × (r + s)` random ψ, polynomial in the base coordinates.
pub fn random_psi(rng: &mut Rng8, s: &NqStructure) -> Vec<Vec<Vec<ScalarField>>> {
    let chart = s.chart();
    let (n, r, rank) = (chart.n(), chart.r(), chart.rank());
    (0..r)
        .map(|_| {
            (0..r)
                .map(|_| {
                    (0..rank)
                        .map(|_| {
                            let mut e = random_poly(rng, n, 2);
                            if n == 0 || rng.gen_bool(0.3) {
                                e = Expr::add(e, Expr::num(rng.gen_range(-1.0..1.0)));
                            }
                            field(e)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn random_psi_plus(rng: &mut Rng8, s: &NqStructure) -> Vec<Vec<Vec<ScalarField>>> {
    let r = s.chart().r();
    random_psi(rng, s)
        .into_iter()
        .map(|row| row.into_iter().map(|v| v[..r].to_vec()).collect())
        .collect()
}

pub fn jet(chart: &Arc<GradedChart>, v: f64) -> Jet {
    Jet::constant(chart.jets(), v)
}

fn term(chart: &Arc<GradedChart>, c: Jet, p: &[usize], odd: &[Generator]) -> GradedElement {
    GradedElement::term(chart, c, p, odd).unwrap()
}

/// Coordinate form of `Q_E` on one generator:
///
/// ```text
/// x^i ↦ ρ^i_α e^α
/// e^β ↦ g^{ββ}(ρ^i_β p_i − ½ c_{βγδ} e^γ e^δ)
/// p_i ↦ (1/6) c_{αβγ,i} e^α e^β e^γ − ρ^j_{α,i} e^α p_j
/// ```
pub fn q_e_coordinates(s: &NqStructure, y: Generator) -> GradedElement {
    let chart = s.chart();
    let (n, rank) = (chart.n(), chart.rank());
    let mut out = GradedElement::zero(chart);
    let mut push = |t: GradedElement| out = out.add(&t).unwrap();
    match y {
        Generator::X(i) => {
            for a in 0..rank {
                push(term(chart, s.rho(i, a).clone(), &[], &[Generator::E(a)]));
            }
        }
        Generator::E(b) => {
            let gb = s.metric().g(b);
            for i in 0..n {
                push(term(chart, s.rho(i, b).scale(gb), &[i], &[]));
            }
            for g in 0..rank {
                for d in 0..rank {
                    push(term(chart, s.c(b, g, d).scale(-0.5 * gb), &[], &[Generator::E(g), Generator::E(d)]));
                }
            }
        }
        Generator::P(i) => {
            // the six orderings of each sorted triple carry the same sign
            // times c/6; summing them first keeps the comparison exact
            for a in 0..rank {
                for b in a + 1..rank {
                    for g in b + 1..rank {
                        let c = s.c(a, b, g);
                        if c.is_zero() {
                            continue;
                        }
                        let dc = c.partial_derivative(i).unwrap();
                        push(term(chart, dc, &[], &[Generator::E(a), Generator::E(b), Generator::E(g)]));
                    }
                }
            }
            for a in 0..rank {
                for j in 0..n {
                    let dr = s.rho(j, a).partial_derivative(i).unwrap().neg();
                    push(term(chart, dr, &[j], &[Generator::E(a)]));
                }
            }
        }
        Generator::Xi(_) => {}
    }
    out
}

/// `Qτ = ρ^i_a p_i ξ^a − ½ c_{aβγ} e^β e^γ ξ^a − ψ^a_{bα} e^α ξ^b e_a`.
pub fn torsion_components(q: &Connection) -> GradedElement {
    let s = q.structure();
    let chart = s.chart();
    let (n, r, rank) = (chart.n(), chart.r(), chart.rank());
    let g = s.metric();
    let mut out = GradedElement::zero(chart);
    let mut push = |t: GradedElement| out = out.add(&t).unwrap();
    for a in 0..r {
        for i in 0..n {
            push(term(chart, s.rho(i, a).clone(), &[i], &[Generator::Xi(a)]));
        }
        for b in 0..rank {
            for c in 0..rank {
                push(term(
                    chart,
                    s.c(a, b, c).scale(-0.5),
                    &[],
                    &[Generator::E(b), Generator::E(c), Generator::Xi(a)],
                ));
            }
        }
        for b in 0..r {
            for al in 0..rank {
                push(term(
                    chart,
                    q.psi(a, b, al).scale(-g.g(a)),
                    &[],
                    &[Generator::E(al), Generator::Xi(b), Generator::E(a)],
                ));
            }
        }
    }
    out
}

/// General component formula for the contraction, coefficient of `e^ȧ ξ^b`:
///
/// ```text
/// ρ^i_a ψ^a_{bȧ,i} − ρ^i_ȧ ψ^a_{ba,i} − c_{αaȧ} ψ^{aα}_b
///   + ψ^c_{ba} ψ^a_{cȧ} − ψ^c_{bȧ} ψ^a_{ca}
/// ```
///
/// with `ψ^{aα}_b = g^{αα} ψ^a_{bα}`. The returned matrix is already
/// converted to the `ξ^b e^ȧ` convention (one Koszul sign).
pub fn component_formula_ricci(q: &Connection) -> Vec<Vec<f64>> {
    let s = q.structure();
    let chart = s.chart();
    let (n, r, rank) = (chart.n(), chart.r(), chart.rank());
    let g = s.metric();
    let d = |j: &Jet, i: usize| j.partial_derivative(i).unwrap().value();
    let psi = |a: usize, b: usize, al: usize| q.psi(a, b, al).value();
    let mut out = vec![vec![0.0; chart.s()]; r];
    for b in 0..r {
        for ad in r..rank {
            let mut x = 0.0;
            for a in 0..r {
                for i in 0..n {
                    x += s.rho(i, a).value() * d(q.psi(a, b, ad), i);
                    x -= s.rho(i, ad).value() * d(q.psi(a, b, a), i);
                }
                for al in 0..rank {
                    x -= s.c(al, a, ad).value() * g.g(al) * psi(a, b, al);
                }
                for c in 0..r {
                    x += psi(c, b, a) * psi(a, c, ad);
                    x -= psi(c, b, ad) * psi(a, c, a);
                }
            }
            out[b][ad - r] = -x;
        }
    }
    out
}

pub fn max_matrix_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Random expression over `x1..x_dim` built from the full grammar, kept in
/// the domain of `sqrt` and division near `point`.
pub fn random_expression(rng: &mut Rng8, dim: usize, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            Expr::var(rng.gen_range(0..dim))
        } else {
            Expr::num(rng.gen_range(-2..=3) as f64 * 0.5)
        };
    }
    let sub = |rng: &mut Rng8| random_expression(rng, dim, depth - 1);
    match rng.gen_range(0..9) {
        0 => Expr::add(sub(rng), sub(rng)),
        1 => Expr::sub(sub(rng), sub(rng)),
        2 | 3 => Expr::mul(sub(rng), sub(rng)),
        4 => {
            // denominator bounded away from zero
            let d = Expr::add(Expr::num(2.0), Expr::call(Func::Sin, sub(rng)));
            Expr::div(sub(rng), d)
        }
        5 => Expr::call(Func::Sin, sub(rng)),
        6 => Expr::call(Func::Cos, sub(rng)),
        7 => {
            let inner = sub(rng);
            Expr::call(Func::Sqrt, Expr::add(Expr::num(1.5), Expr::mul(inner.clone(), inner)))
        }
        _ => {
            let inner = sub(rng);
            Expr::call(Func::Exp, Expr::mul(Expr::num(0.3), Expr::call(Func::Sin, inner)))
        }
    }
}
