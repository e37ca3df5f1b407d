use super::*;
use crate::generators::random_smooth_expression;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f(src: &str) -> Field {
    Field::parse(src).unwrap()
}

#[test]
fn parses_into_the_left_associated_tree() {
    use Expression as E;
    let pow = |v| E::pow(E::var(v), 2);
    let expected = E::binary(
        BinOp::Sub,
        E::binary(BinOp::Sub, pow(Var::Y1), pow(Var::X1)),
        pow(Var::X2),
    );
    assert_eq!(parse("y1^2 - x1^2 - x2^2").unwrap(), expected);
    assert_eq!(
        parse("cutoff(y1^2+y2^2+y3^2)").unwrap(),
        E::call(
            Builtin::Cutoff,
            E::binary(BinOp::Add, E::binary(BinOp::Add, pow(Var::Y1), pow(Var::Y2)), pow(Var::Y3))
        )
    );
}

#[test]
fn syntax_errors_are_positioned() {
    match parse("x1 +") {
        Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 5)),
        other => panic!("{other:?}"),
    }
    match parse("x1 *\n  (y2") {
        Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("z1 + 1"), Err(ParseError::UnknownIdentifier { column: 1, .. })));
    assert!(matches!(parse("x1^2.5"), Err(ParseError::NonIntegerExponent { .. })));
    assert!(matches!(parse("foo(x1)"), Err(ParseError::UnknownIdentifier { .. })));
}

#[test]
fn polynomial_jet_example() {
    let j = f("y1^2 - x1^2 - x2^2").evaluate(&Point::new(1.0, 1.0, 1.0, 0.0, 0.0), 1).unwrap();
    assert_eq!(j.value, -1.0);
    assert_eq!(j.grad[Var::Y1.index()], 2.0);
    assert_eq!(j.grad[Var::X1.index()], -2.0);
}

#[test]
fn sin_times_y2_second_order() {
    let j = f("sin(x1)*y2").evaluate(&Point::new(0.0, 0.0, 0.0, 1.0, 0.0), 2).unwrap();
    assert_eq!(j.value, 0.0);
    assert_eq!(j.grad[0], 1.0);
    assert_eq!(j.hess[0][3], 1.0);
    assert_eq!(j.hess[0][0], 0.0);
    let h = 1e-4;
    let g = |x1: f64, y2: f64| x1.sin() * y2;
    let fd = (g(h, 1.0 + h) - g(h, 1.0 - h) - g(-h, 1.0 + h) + g(-h, 1.0 - h)) / (4.0 * h * h);
    assert!((fd - j.hess[0][3]).abs() < 1e-6);
}

#[test]
fn cutoff_outside_support_vanishes_with_all_partials() {
    let j = f("cutoff(y1^2 + y2^2 + y3^2)").evaluate(&Point::new(0.0, 0.0, 2.0, 0.0, 0.0), 2).unwrap();
    assert_eq!(j.value, 0.0);
    assert!(j.grad.iter().all(|v| *v == 0.0));
    assert!(j.hess.iter().flatten().all(|v| *v == 0.0));
    assert_eq!(f("cutoff(0)").value(&Point::new(0.0, 0.0, 0.0, 0.0, 0.0)).unwrap(), 1.0);
}

#[test]
fn cutoff_is_continuous_at_the_branch_point() {
    for t in [1.0 - 1e-6, 1.0 + 1e-6] {
        let (v, d1, _) = cutoff_derivatives(t);
        assert!(v.abs() <= 1e-12 && d1.abs() <= 1e-12, "{t}: {v} {d1}");
    }
    let (v, d1, d2) = cutoff_derivatives(0.5);
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    assert!((d1 + 4.0 * v).abs() < 1e-14);
    // c'' = (s⁴ − 2s³)c with s = 1/(1−t); at t = 1/2 that is 0, at t = 3/4 it is 128c.
    assert!(d2.abs() < 1e-14);
    let (v, _, d2) = cutoff_derivatives(0.75);
    assert!((d2 - 128.0 * v).abs() < 1e-12 * (1.0 + d2.abs()));
}

#[test]
fn domain_errors_name_the_subexpression() {
    let p = Point::new(-1.0, 0.0, 0.0, 0.0, 0.0);
    for src in ["ln(x1)", "sqrt(x1)", "1/x2"] {
        match f(src).value(&p) {
            Err(EvalError::Domain { expr, .. }) => assert!(!expr.is_empty()),
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn derivative_extraction_consumes_budget() {
    let g = f("x1^3 * y2");
    let d1 = g.partial(Var::X1).unwrap();
    assert_eq!(d1.budget(), 1);
    let p = Point::new(2.0, 0.0, 0.0, 3.0, 0.0);
    let j = d1.evaluate(&p, 1).unwrap();
    assert_eq!(j.value, 36.0);
    assert_eq!(j.grad[Var::Y2.index()], 12.0);
    assert!(matches!(d1.evaluate(&p, 2), Err(EvalError::OrderBudgetExceeded { requested: 2, budget: 1 })));
    let d2 = d1.partial(Var::Y2).unwrap();
    assert_eq!(d2.value(&p).unwrap(), 12.0);
    assert!(d2.partial(Var::X1).is_err());
    assert!(finite_difference_check(&d1, &p).unwrap() <= 1e-6);
}

#[test]
fn exp_x1_y1_finite_difference() {
    let r = finite_difference_check(&f("exp(x1*y1)"), &Point::new(0.3, 0.0, 0.7, 0.0, 0.0)).unwrap();
    assert!(r <= 1e-6, "{r}");
}

fn random_point(rng: &mut impl Rng) -> Point {
    Point::from_array(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

#[test]
fn finite_differences_agree_on_random_smooth_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let e = random_smooth_expression(&mut rng, 4);
        let p = random_point(&mut rng);
        let r = finite_difference_check(&Field::from_expr(e.clone()), &p).unwrap();
        assert!(r <= 1e-5, "{e} at {p:?}: {r}");
        worst = worst.max(r);
    }
    assert!(worst > 0.0);
}

#[test]
fn hessians_are_exactly_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let e = random_smooth_expression(&mut rng, 4);
        let j = Field::from_expr(e).evaluate(&random_point(&mut rng), 2).unwrap();
        for a in 0..DIM {
            for b in 0..DIM {
                assert_eq!(j.hess[a][b].to_bits(), j.hess[b][a].to_bits());
            }
        }
    }
}

fn expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        (0.0f64..1000.0).prop_map(Expression::num),
        (0usize..5).prop_map(|i| Expression::var(Var::ALL[i])),
        prop_oneof![Just(Constant::Pi), Just(Constant::E)].prop_map(Expression::Const),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expression::neg),
            (inner.clone(), 0u32..6).prop_map(|(e, n)| Expression::pow(e, n)),
            (inner.clone(), 0usize..8).prop_map(|(e, k)| {
                let b = [
                    Builtin::Sin,
                    Builtin::Cos,
                    Builtin::Tan,
                    Builtin::Exp,
                    Builtin::Ln,
                    Builtin::Sqrt,
                    Builtin::Tanh,
                    Builtin::Cutoff,
                ][k];
                Expression::call(b, e)
            }),
            (inner.clone(), inner, 0usize..4).prop_map(|(a, b, k)| {
                Expression::binary([BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k], a, b)
            }),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(e in expression()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e, "{}", printed);
        prop_assert_eq!(parse(&back.to_string()).unwrap(), back);
    }

    #[test]
    fn evaluation_is_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_smooth_expression(&mut rng, 3);
        let p = random_point(&mut rng);
        let field = Field::from_expr(e);
        let a = field.evaluate(&p, 2).unwrap();
        let b = field.evaluate(&p, 2).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert!(a.grad.iter().zip(b.grad.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
