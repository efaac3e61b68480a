use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scalar::Expr;
use crate::superalgebra::apply_involution;

fn f(s: &str) -> ScalarField {
    ScalarField::parse(s, 8).unwrap()
}

fn so3(k: f64) -> NqStructure {
    let chart = GradedChart::new(3, 0, vec![], 2).unwrap();
    NqStructure::new(
        chart,
        MetricSplit::standard(3, 0),
        vec![],
        vec![([0, 1, 2], ScalarField::constant(k))],
    )
    .unwrap()
}

fn jet(chart: &Arc<GradedChart>, v: f64) -> Jet {
    Jet::constant(chart.jets(), v)
}

fn gen(chart: &Arc<GradedChart>, g: Generator) -> GradedElement {
    GradedElement::generator(chart, g).unwrap()
}

fn close(a: &GradedElement, b: &GradedElement, tol: f64) -> bool {
    a.sub(b).unwrap().max_abs() <= tol
}

/// Random polynomial structure on a small chart.
fn random_structure(seed: u64) -> NqStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(0..=2);
    let r = rng.gen_range(0..=2);
    let s = rng.gen_range(if r == 0 { 1 } else { 0 }..=2);
    let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let chart = GradedChart::new(r, s, pt, 3).unwrap();
    let sig = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1 } else { -1 };
    let metric = MetricSplit::new(
        (0..r).map(|_| sig(&mut rng)).collect(),
        (0..s).map(|_| sig(&mut rng)).collect(),
    )
    .unwrap();
    let poly = |rng: &mut ChaCha8Rng| -> ScalarField {
        let mut e = Expr::num(rng.gen_range(-3..=3) as f64);
        for i in 0..n {
            let k = rng.gen_range(-2..=2) as f64;
            e = Expr::add(e, Expr::mul(Expr::num(k), Expr::pow(Expr::var(i), rng.gen_range(1..=2))));
        }
        if n == 2 {
            let k = rng.gen_range(-2..=2) as f64;
            e = Expr::add(e, Expr::mul(Expr::num(k), Expr::mul(Expr::var(0), Expr::var(1))));
        }
        ScalarField::Expr(e)
    };
    let rank = r + s;
    let rho = (0..n)
        .map(|_| (0..rank).map(|_| poly(&mut rng)).collect())
        .collect();
    let mut c = Vec::new();
    for a in 0..rank {
        for b in a + 1..rank {
            for g in b + 1..rank {
                if rng.gen_bool(0.7) {
                    c.push(([a, b, g], poly(&mut rng)));
                }
            }
        }
    }
    NqStructure::new(chart, metric, rho, c).unwrap()
}

#[test]
fn permutation_sign_and_repeated_indices() {
    let chart = GradedChart::new(3, 1, vec![], 1).unwrap();
    let s = NqStructure::new(
        chart,
        MetricSplit::standard(3, 1),
        vec![],
        vec![([2, 0, 3], f("5"))],
    )
    .unwrap();
    assert_eq!(s.c(0, 2, 3).value(), -5.0);
    assert_eq!(s.c(2, 0, 3).value(), 5.0);
    assert_eq!(s.c(3, 2, 0).value(), 5.0);
    assert_eq!(s.c(0, 0, 3).value(), 0.0);
    assert_eq!(s.c_fields().len(), 1);
    assert!(s.c_fields().contains_key(&[0, 2, 3]));
}

#[test]
fn rejects_bad_shapes() {
    let chart = GradedChart::new(1, 1, vec![0.0], 1).unwrap();
    let g = MetricSplit::standard(1, 1);
    assert!(NqStructure::new(chart.clone(), g.clone(), vec![vec![f("1")]], vec![]).is_err());
    let rho = vec![vec![f("1"), f("0")]];
    assert!(NqStructure::new(chart.clone(), g.clone(), rho.clone(), vec![([0, 1, 2], f("1"))]).is_err());
    assert!(NqStructure::new(chart.clone(), g.clone(), rho.clone(), vec![([0, 1, 1], f("1"))]).is_err());
    assert!(NqStructure::new(chart, MetricSplit::standard(2, 0), rho, vec![]).is_err());
}

#[test]
fn zero_structure() {
    let chart = GradedChart::new(2, 1, vec![0.3, 0.1], 2).unwrap();
    let s = NqStructure::zero(chart, MetricSplit::standard(2, 1)).unwrap();
    assert!(s.build_hamiltonian().unwrap().is_zero());
    let q = s.q_e_derivation().unwrap();
    assert!(q.is_zero());
    assert_eq!(q.degree(), 1);
    let res = s.check_master_equation(1e-10).unwrap();
    assert!(res.groups.is_empty());
    assert!(res.is_valid());
    let cd = s.export_courant_data();
    assert!(cd.anchor.iter().flatten().all(|&v| v == 0.0));
    assert!(cd.bracket.is_empty());
    assert_eq!(cd.pairing_plus, vec![1, 1]);
    assert_eq!(cd.pairing_minus, vec![-1]);
}

#[test]
fn single_term_hamiltonian() {
    let chart = GradedChart::new(1, 0, vec![0.0], 2).unwrap();
    let s = NqStructure::new(chart.clone(), MetricSplit::standard(1, 0), vec![vec![f("1")]], vec![])
        .unwrap();
    let want = GradedElement::term(&chart, jet(&chart, 1.0), &[0], &[Generator::E(0)]).unwrap();
    assert_eq!(s.build_hamiltonian().unwrap(), want);
    assert_eq!(want.render(), "(1)*p1*e1");
}

#[test]
fn hamiltonian_degree_and_involution_split() {
    for seed in 0..20 {
        let s = random_structure(seed);
        let h = s.build_hamiltonian().unwrap();
        if h.is_zero() {
            continue;
        }
        assert_eq!(h.degree(), Some(3));
        let chart = s.chart();
        // ι-even part: ρ on undotted e, c with 0 or 2 dotted indices
        let mut even = GradedElement::zero(chart);
        let mut odd = GradedElement::zero(chart);
        for i in 0..chart.n() {
            for a in 0..chart.rank() {
                let t = GradedElement::term(chart, s.rho(i, a).clone(), &[i], &[Generator::E(a)]).unwrap();
                if a < chart.r() {
                    even = even.add(&t).unwrap();
                } else {
                    odd = odd.add(&t).unwrap();
                }
            }
        }
        for (k, c) in s.c_components() {
            let t = GradedElement::term(chart, c.neg(), &[], &k.map(Generator::E)).unwrap();
            let dotted = k.iter().filter(|&&a| a >= chart.r()).count();
            if dotted % 2 == 0 {
                even = even.add(&t).unwrap();
            } else {
                odd = odd.add(&t).unwrap();
            }
        }
        assert!(close(&h, &even.add(&odd).unwrap(), 0.0));
        let ih = apply_involution(&h);
        assert!(close(&ih, &even.sub(&odd).unwrap(), 0.0));
    }
}

#[test]
fn q_e_on_base_coordinates() {
    for seed in 0..20 {
        let s = random_structure(seed);
        let chart = s.chart();
        let q = s.q_e_derivation().unwrap();
        for i in 0..chart.n() {
            let mut want = GradedElement::zero(chart);
            for a in 0..chart.rank() {
                let t = GradedElement::term(chart, s.rho(i, a).clone(), &[], &[Generator::E(a)]).unwrap();
                want = want.add(&t).unwrap();
            }
            assert!(close(&q.image(Generator::X(i)), &want, 0.0), "seed {seed}");
        }
    }
}

/// `Q_E e^β = g^{ββ}(ρ^i_β p_i − ½ c_{βγδ} e^γ e^δ)`, summed over all
/// ordered pairs `γ ≠ δ`.
#[test]
fn q_e_on_odd_coordinates() {
    for seed in 0..20 {
        let s = random_structure(seed);
        let chart = s.chart();
        let q = s.q_e_derivation().unwrap();
        for b in 0..chart.rank() {
            let gb = s.metric().g(b);
            let mut want = GradedElement::zero(chart);
            for i in 0..chart.n() {
                let t = GradedElement::term(chart, s.rho(i, b).scale(gb), &[i], &[]).unwrap();
                want = want.add(&t).unwrap();
            }
            for g in 0..chart.rank() {
                for d in 0..chart.rank() {
                    let c = s.c(b, g, d);
                    if c.is_zero() {
                        continue;
                    }
                    let t = GradedElement::term(
                        chart,
                        c.scale(-0.5 * gb),
                        &[],
                        &[Generator::E(g), Generator::E(d)],
                    )
                    .unwrap();
                    want = want.add(&t).unwrap();
                }
            }
            assert!(close(&q.image(Generator::E(b)), &want, 1e-14), "seed {seed} b {b}");
        }
    }
}

#[test]
fn q_e_constant_anchor_without_bracket() {
    let chart = GradedChart::new(1, 1, vec![0.2, 0.7], 2).unwrap();
    let rho = vec![vec![f("2"), f("3")], vec![f("-1"), f("0")]];
    let s = NqStructure::new(chart.clone(), MetricSplit::standard(1, 1), rho, vec![]).unwrap();
    let q = s.q_e_derivation().unwrap();
    // e_1 = e^1, e_{1̇} = −e^{1̇}
    let want1 = GradedElement::term(&chart, jet(&chart, 2.0), &[0], &[])
        .unwrap()
        .add(&GradedElement::term(&chart, jet(&chart, -1.0), &[1], &[]).unwrap())
        .unwrap();
    assert!(close(&q.image(Generator::E(0)), &want1, 0.0));
    let want2 = GradedElement::term(&chart, jet(&chart, -3.0), &[0], &[]).unwrap();
    assert!(close(&q.image(Generator::E(1)), &want2, 0.0));
    assert!(q.image(Generator::P(0)).is_zero());
}

#[test]
fn q_e_needs_a_derivative() {
    let chart = GradedChart::new(1, 0, vec![1.0], 0).unwrap();
    let s = NqStructure::new(chart, MetricSplit::standard(1, 0), vec![vec![f("x1")]], vec![]).unwrap();
    assert!(matches!(s.q_e_derivation(), Err(Error::JetOrderExhausted)));
}

#[test]
fn so3_satisfies_master_equation() {
    let s = so3(1.0);
    let res = s.check_master_equation(1e-12).unwrap();
    assert!(res.residual.is_zero());
    assert!(res.groups.is_empty());
    let cd = s.export_courant_data();
    assert_eq!(cd.bracket.len(), 1);
    assert_eq!(cd.bracket[0].indices, [1, 2, 3]);
    assert_eq!(cd.bracket[0].value, 1.0);
    assert!(cd.anchor.is_empty());
}

#[test]
fn single_mixed_component_is_valid() {
    let chart = GradedChart::new(2, 1, vec![], 2).unwrap();
    let s = NqStructure::new(chart, MetricSplit::standard(2, 1), vec![], vec![([0, 1, 2], f("7/3"))])
        .unwrap();
    assert!(s.check_master_equation(0.0).unwrap().residual.is_zero());
}

#[test]
fn anchor_isotropy_violation() {
    for sign in [1i8, -1] {
        let chart = GradedChart::new(1, 1, vec![0.5], 2).unwrap();
        let g = MetricSplit::new(vec![sign], vec![-1]).unwrap();
        let s = NqStructure::new(chart, g, vec![vec![f("1"), f("0")]], vec![]).unwrap();
        let res = s.check_master_equation(1e-10).unwrap();
        assert!(!res.is_valid());
        assert_eq!(res.groups.len(), 1);
        let pp = res.group(ResidualShape::PP).unwrap();
        assert_eq!(pp.max_abs, 1.0);
        assert_eq!(res.pp_matrix(), vec![vec![sign as f64]]);
    }
}

#[test]
fn tautological_section_examples() {
    let chart = GradedChart::new(1, 0, vec![], 1).unwrap();
    let tau = tautological_section(&chart, &MetricSplit::standard(1, 0)).unwrap();
    assert_eq!(tau.render(), "(1)*e1*xi1");
    assert_eq!(apply_involution(&tau), tau);

    let chart = GradedChart::new(2, 2, vec![0.1], 1).unwrap();
    let g = MetricSplit::new(vec![1, -1], vec![-1, 1]).unwrap();
    let tau = tautological_section(&chart, &g).unwrap();
    assert_eq!(tau.degree(), Some(2));
    assert_eq!(apply_involution(&tau), tau);
    assert_eq!(tau.render(), "(1)*e1*xi1 + (-1)*e2*xi2");

    let chart = GradedChart::new(0, 2, vec![], 1).unwrap();
    assert!(tautological_section(&chart, &MetricSplit::standard(0, 2)).unwrap().is_zero());
}

#[test]
fn at_point_moves_base() {
    let chart = GradedChart::new(1, 0, vec![0.0], 1).unwrap();
    let s = NqStructure::new(chart, MetricSplit::standard(1, 0), vec![vec![f("1 + x1^2")]], vec![])
        .unwrap();
    let t = s.at_point(vec![2.0]).unwrap();
    assert_eq!(t.rho(0, 0).value(), 5.0);
    assert_eq!(t.chart().base_point(), &[2.0]);
    assert!(s.at_point(vec![1.0, 2.0]).is_err());
}

fn pp_oracle(s: &NqStructure) -> Vec<Vec<f64>> {
    let n = s.chart().n();
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            for a in 0..s.chart().rank() {
                *v += s.rho(i, a).value() * s.metric().g(a) * s.rho(j, a).value();
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_linear(seed in any::<u64>()) {
        let s1 = random_structure(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
        let chart = s1.chart().clone();
        let (n, rank) = (chart.n(), chart.rank());
        let rho2: Vec<Vec<ScalarField>> = (0..n)
            .map(|_| (0..rank).map(|_| ScalarField::constant(rng.gen_range(-2..=2) as f64)).collect())
            .collect();
        let mut c2 = Vec::new();
        for a in 0..rank {
            for b in a + 1..rank {
                for g in b + 1..rank {
                    c2.push(([a, b, g], ScalarField::constant(rng.gen_range(-2..=2) as f64)));
                }
            }
        }
        let s2 = NqStructure::new(chart.clone(), s1.metric().clone(), rho2.clone(), c2.clone()).unwrap();
        let sum_field = |a: &ScalarField, b: &ScalarField| match (a, b) {
            (ScalarField::Expr(x), ScalarField::Expr(y)) => ScalarField::Expr(Expr::add(x.clone(), y.clone())),
            _ => unreachable!(),
        };
        let rho3 = s1.rho_fields().iter().zip(&rho2)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| sum_field(a, b)).collect())
            .collect();
        let c3 = c2.iter().map(|(k, v)| {
            let v = match s1.c_fields().get(k) {
                Some(w) => sum_field(w, v),
                None => v.clone(),
            };
            (*k, v)
        }).collect();
        let s3 = NqStructure::new(chart, s1.metric().clone(), rho3, c3).unwrap();
        let lhs = s3.build_hamiltonian().unwrap();
        let rhs = s1.build_hamiltonian().unwrap().add(&s2.build_hamiltonian().unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn pp_group_is_anchor_gram(seed in any::<u64>()) {
        let s = random_structure(seed);
        let res = s.check_master_equation(1e-10).unwrap();
        if let Some(d) = res.residual.degree() {
            prop_assert!(res.residual.is_zero() || d == 4);
        } else {
            prop_assert!(false, "inhomogeneous residual");
        }
        let got = res.pp_matrix();
        let want = pp_oracle(&s);
        for (gr, wr) in got.iter().zip(&want) {
            for (g, w) in gr.iter().zip(wr) {
                prop_assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()));
            }
        }
    }

    /// `Q_E² = ½ {{H,H}, ·}` on every generator, for any structure.
    #[test]
    fn q_squared_is_half_the_residual(seed in any::<u64>()) {
        let s = random_structure(seed);
        let chart = s.chart().clone();
        let q = s.q_e_derivation().unwrap();
        let res = s.check_master_equation(1e-10).unwrap();
        for y in chart.generators() {
            if matches!(y, Generator::Xi(_)) {
                continue;
            }
            let qq = q.apply(&q.image(y)).unwrap();
            let want = poisson_bracket(&res.residual, &gen(&chart, y), s.metric()).unwrap().scale(0.5);
            prop_assert!(close(&qq, &want, 1e-9), "generator {:?}", y);
        }
    }

    #[test]
    fn valid_structures_have_nilpotent_q(k in -3.0f64..3.0, l in -3.0f64..3.0) {
        // so(3) ⊕ a one-component mixed block on separate generators
        let chart = GradedChart::new(3, 2, vec![], 2).unwrap();
        let s = NqStructure::new(
            chart.clone(),
            MetricSplit::standard(3, 2),
            vec![],
            vec![([0, 1, 2], ScalarField::constant(k)), ([0, 3, 4], ScalarField::constant(l))],
        )
        .unwrap();
        let res = s.check_master_equation(1e-10).unwrap();
        if res.is_valid() {
            let q = s.q_e_derivation().unwrap();
            for y in chart.generators() {
                prop_assert!(q.apply(&q.image(y)).unwrap().max_abs() <= 1e-10);
            }
        } else {
            prop_assert!(k.abs() > 0.0 && l.abs() > 0.0);
        }
    }
}

#[test]
fn so3_scaled_q_is_nilpotent() {
    let s = so3(2.5);
    let q = s.q_e_derivation().unwrap();
    for y in s.chart().generators() {
        assert!(q.apply(&q.image(y)).unwrap().is_zero());
    }
}
