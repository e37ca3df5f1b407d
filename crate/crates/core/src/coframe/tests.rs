use super::*;
use crate::exprlang::{Field, Jet, Point};

fn form(idx: &[usize], c: f64) -> Graded<f64> {
    Graded::form(Frame::Moving, idx, c)
}

fn mv(idx: &[usize], c: f64) -> Graded<f64> {
    Graded::multivector(Frame::Moving, idx, c)
}

/// Interior product by brute force: `i_{X1∧…∧Xk} α = α(X_k, …, X_1, ·)` for basis monomials,
/// computed by evaluating the form on permuted argument lists.
fn brute_interior_sign(a: &[usize], b: &[usize]) -> f64 {
    // α = e^{b}, arguments X = e_{a_k}, …, e_{a_1}, then the remaining ones in order.
    let rest: Vec<usize> = b.iter().copied().filter(|k| !a.contains(k)).collect();
    let mut args: Vec<usize> = a.iter().rev().copied().collect();
    args.extend(rest);
    // Sign of the permutation taking `b` (sorted) to `args`.
    let mut perm: Vec<usize> = args
        .iter()
        .map(|k| b.iter().position(|x| x == k).unwrap())
        .collect();
    let mut sign = 1.0;
    for i in 0..perm.len() {
        while perm[i] != i {
            let j = perm[i];
            perm.swap(i, j);
            sign = -sign;
        }
    }
    sign
}

#[test]
fn dx1_wedge_dx2_is_the_horizontal_area_monomial() {
    let w = form(&[X1], 1.0).wedge(&form(&[X2], 1.0)).unwrap();
    assert_eq!(*w.coeff(MASK_OMEGA_H), 1.0);
    assert_eq!(w.nonzero_masks().count(), 1);
}

#[test]
fn eta_wedge_itself_vanishes() {
    let e = form(&[Y1], 1.0);
    assert!(e.wedge(&e).unwrap().is_zero());
}

#[test]
fn wedge_sign_rule_on_mixed_bidegree() {
    let (b1, t1) = (2.0, 3.0);
    let w = form(&[Y1], b1).wedge(&form(&[X1], t1)).unwrap();
    assert_eq!(w.component(&[X1, Y1]), -b1 * t1);
    assert_eq!(bidegree(1 | (1 << Y1)), (1, 1));
}

#[test]
fn wedge_overflow_is_reported() {
    let a = form(&[X1, X2, Y1], 1.0);
    let b = form(&[Y2, Y3, Y1], 1.0);
    assert!(matches!(a.wedge(&b), Err(AlgebraError::DegreeOverflow(3, 3))));
}

#[test]
fn normalized_volume_pairings_equal_one() {
    let one = interior(&q_v::<f64>(), &omega_v()).unwrap();
    assert_eq!(*one.coeff(0), 1.0);
    let one = interior(&q_h::<f64>(), &omega_h()).unwrap();
    assert_eq!(*one.coeff(0), 1.0);
    let m = interior(&psi::<f64>(), &omega::<f64>()).unwrap();
    assert_eq!(*m.coeff(0), -1.0);
}

#[test]
fn interior_of_vertical_bivector_into_vertical_volume() {
    let r = interior(&mv(&[Y2, Y3], 1.0), &omega_v()).unwrap();
    assert_eq!(r, form(&[Y1], -1.0));
}

#[test]
fn interior_of_one_form_into_vertical_trivector_monomial() {
    let beta = Graded::from_components(Kind::Form, Frame::Moving, [0.0, 0.0, 2.0, 3.0, 5.0]);
    let r = interior(&beta, &mv(&[Y1, Y2, Y3], 1.0)).unwrap();
    let expected = mv(&[Y2, Y3], 2.0) + mv(&[Y1, Y3], -3.0) + mv(&[Y1, Y2], 5.0);
    assert_eq!(r, expected);
}

#[test]
fn interior_signs_match_permutation_enumeration() {
    for a in 0..MONOMIALS {
        for b in 0..MONOMIALS {
            if a & b != a {
                assert_eq!(interior_sign(a, b), 0.0);
                continue;
            }
            assert_eq!(
                interior_sign(a, b),
                brute_interior_sign(&indices(a), &indices(b)),
                "masks {a:05b} {b:05b}"
            );
        }
    }
}

#[test]
fn interior_degree_underflow() {
    let r = interior(&mv(&[X1, Y1], 1.0), &form(&[Y2], 1.0));
    assert!(matches!(r, Err(AlgebraError::DegreeUnderflow(2, 1))));
}

#[test]
fn projections_partition_an_element() {
    let mut a = Graded::zero(Kind::Form, Frame::Moving);
    for m in 0..MONOMIALS {
        a.set(m, (m as f64) * 0.5 - 3.0);
    }
    let mut sum = Graded::zero(Kind::Form, Frame::Moving);
    for p in 0..=2 {
        for q in 0..=3 {
            sum = sum + a.project(p, q);
        }
    }
    assert_eq!(sum, a);
    let vol = omega_h::<f64>().wedge(&omega_v()).unwrap();
    assert_eq!(vol.project(2, 3), vol);
    assert!(form(&[X1, Y1], 1.0).project(2, 0).is_zero());
}

#[test]
fn frame_conversion_roundtrips() {
    let gamma = [[0.3, -1.2, 0.7], [2.0, 0.1, -0.4]];
    let mut a = Graded::zero(Kind::Multivector, Frame::Moving);
    let mut f = Graded::zero(Kind::Form, Frame::Moving);
    for m in 0..MONOMIALS {
        a.set(m, (m as f64).sin());
        f.set(m, (m as f64).cos());
    }
    let back = a.convert(Frame::Coordinate, &gamma).convert(Frame::Moving, &gamma);
    let fb = f.convert(Frame::Coordinate, &gamma).convert(Frame::Moving, &gamma);
    for m in 0..MONOMIALS {
        assert!((back.coeff(m) - a.coeff(m)).abs() < 1e-12);
        assert!((fb.coeff(m) - f.coeff(m)).abs() < 1e-12);
    }
    // Pairings are frame independent.
    let x = Graded::from_components(Kind::Multivector, Frame::Moving, [1.0, -2.0, 0.5, 3.0, 1.5]);
    let al = Graded::from_components(Kind::Form, Frame::Moving, [0.2, 0.4, -1.0, 2.0, 0.3]);
    let p1 = *interior(&x, &al).unwrap().coeff(0);
    let p2 = *interior(&x.convert(Frame::Coordinate, &gamma), &al.convert(Frame::Coordinate, &gamma))
        .unwrap()
        .coeff(0);
    assert!((p1 - p2).abs() < 1e-12);
}

#[test]
fn horizontal_lift_in_coordinates() {
    let gamma = [[0.0, -1.0, -1.0], [0.0, -1.0, -1.0]];
    let h1 = mv(&[X1], 1.0).convert(Frame::Coordinate, &gamma);
    assert_eq!(h1.components(), [1.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn forms_evaluated_on_frame_vectors_return_coefficients() {
    let mut f = Graded::zero(Kind::Form, Frame::Moving);
    for m in 0..MONOMIALS {
        f.set(m, 1.0 + m as f64);
    }
    for m in 1..MONOMIALS {
        let args: Vec<Graded<f64>> = indices(m).iter().map(|&k| mv(&[k], 1.0)).collect();
        let v = evaluate_on(&f.homogeneous_degree(degree(m)), &args).unwrap();
        assert_eq!(v, *f.coeff(m));
    }
}

fn poly_gamma() -> [[Field; 3]; 2] {
    let src = [
        ["x2*y1 + y2^2", "0.5*y3*y1 - x1", "y1*y2*y3"],
        ["x1*y3 - y2", "x2^2*y1 + 0.3*y3", "y1^2 - x1*x2*y2"],
    ];
    std::array::from_fn(|i| std::array::from_fn(|a| Field::parse(src[i][a]).unwrap()))
}

#[test]
fn d_of_function_with_flat_connection_is_classical() {
    let f = Field::parse("x1^2*y2 + sin(y3)").unwrap();
    let p = Point::new(0.4, -1.0, 0.3, 2.0, 0.7);
    let gamma: [[Field; 3]; 2] = Default::default();
    let form = Graded::form(Frame::Moving, &[], f.clone());
    let d = exterior_d(&form, &gamma, &p).unwrap().values();
    let j = f.evaluate(&p, 1).unwrap();
    assert_eq!(d.components(), j.grad);
}

#[test]
fn d_eta_vanishes_for_constant_connections() {
    let gamma: [[Field; 3]; 2] = std::array::from_fn(|_| {
        [Field::zero(), Field::constant(-1.0), Field::constant(-1.0)]
    });
    let p = Point::new(1.0, 2.0, 0.0, 0.5, -0.3);
    for a in 0..3 {
        let eta = Graded::form(Frame::Moving, &[Y1 + a], Field::one());
        assert!(exterior_d(&eta, &gamma, &p).unwrap().values().is_zero());
    }
}

#[test]
fn cochain_identities_hold_for_polynomial_connection() {
    let gamma = poly_gamma();
    let mut test = Graded::form(Frame::Moving, &[X1], Field::parse("x2*y1*y3 + y2").unwrap());
    test = test + Graded::form(Frame::Moving, &[Y2], Field::parse("x1^2*y3 - y1*y2").unwrap());
    test = test + Graded::form(Frame::Moving, &[X2, Y3], Field::parse("y1^3 + x1*y2").unwrap());
    for k in 0..20 {
        let t = k as f64 * 0.37;
        let p = Point::new(t.sin(), t.cos(), (2.0 * t).sin(), 0.5 - t * 0.1, (3.0 * t).cos());
        for r in cochain_residuals(&gamma, &test, &p).unwrap() {
            assert!(r <= 1e-9, "{r}");
        }
        for r in cochain_residuals(&gamma, &omega_v(), &p).unwrap() {
            assert!(r <= 1e-9, "{r}");
        }
    }
}

#[test]
fn d_raises_bidegree_by_the_three_allowed_shifts() {
    let gamma = poly_gamma();
    let p = Point::new(0.3, -0.2, 0.9, 0.4, -0.6);
    let f = Graded::form(Frame::Moving, &[X1, Y2], Field::parse("x2*y1 + y3^2").unwrap());
    let d = exterior_d(&f, &gamma, &p).unwrap();
    for m in d.nonzero_masks() {
        assert!(matches!(bidegree(m), (2, 1) | (1, 2) | (3, 0)), "{m:05b}");
    }
}

fn lie_poisson() -> Graded<Field> {
    let mut pb = Graded::zero(Kind::Multivector, Frame::Coordinate);
    pb.set((1 << Y1) | (1 << Y2), Field::parse("y3").unwrap());
    pb.set((1 << Y2) | (1 << Y3), Field::parse("y1").unwrap());
    pb = pb + Graded::multivector(Frame::Coordinate, &[Y3, Y1], Field::parse("y2").unwrap());
    pb
}

#[test]
fn schouten_vanishes_for_lie_poisson_and_constants() {
    let pb = lie_poisson();
    let p = Point::new(0.1, 0.2, 0.3, -0.7, 1.1);
    assert!(schouten_bivectors(&pb, &pb, &p).unwrap().iter().all(|v| v.abs() < 1e-14));
    let c = Graded::multivector(Frame::Coordinate, &[X1, Y2], Field::constant(2.5));
    assert!(schouten_bivectors(&c, &c, &p).unwrap().iter().all(|v| *v == 0.0));
}

/// Jacobiator `{x^μ,{x^ν,x^λ}} + cyclic` built from field-level derivative extraction.
fn nested_bracket_jacobiator(pb: &Graded<Field>, p: &Point) -> [f64; 10] {
    let m = bivector_matrix(pb);
    let mut out = [0.0; 10];
    for (k, (a, b, c)) in trivector_indices().into_iter().enumerate() {
        let mut total = 0.0;
        for (u, v, w) in [(a, b, c), (b, c, a), (c, a, b)] {
            // {x^u, {x^v, x^w}} = Σ_ρ Π^{uρ} ∂_ρ Π^{vw}
            for r in 0..5 {
                let inner = m[v][w].partial(crate::exprlang::Var::from_index(r)).unwrap();
                total += m[u][r].value(p).unwrap() * inner.value(p).unwrap();
            }
        }
        out[k] = total;
    }
    out
}

#[test]
fn schouten_of_single_entry_tensor_matches_nested_brackets() {
    let mut pb = Graded::zero(Kind::Multivector, Frame::Coordinate);
    pb.set((1 << Y1) | (1 << Y2), Field::parse("y1").unwrap());
    pb.set((1 << X1) | (1 << Y1), Field::parse("y2*x2").unwrap());
    let p = Point::new(0.5, -1.5, 0.8, 1.3, 0.2);
    let s = schouten_bivectors(&pb, &pb, &p).unwrap();
    let j = nested_bracket_jacobiator(&pb, &p);
    assert!(s.iter().any(|v| v.abs() > 0.1));
    for k in 0..10 {
        assert!((s[k] - 2.0 * j[k]).abs() < 1e-12);
    }
}

#[test]
fn lie_derivative_examples() {
    let p = Point::new(0.5, -1.5, 0.8, 1.3, 0.2);
    let c = Graded::multivector(Frame::Coordinate, &[Y2, X1], Field::constant(3.0));
    let dx1 = Graded::multivector(Frame::Coordinate, &[X1], Field::one());
    assert!(lie_derivative_bivector(&dx1, &c, &p).unwrap().is_zero());
    let dy1 = Graded::multivector(Frame::Coordinate, &[Y1], Field::one());
    let l = lie_derivative_bivector(&dy1, &lie_poisson(), &p).unwrap();
    let mut expected = Graded::zero(Kind::Multivector, Frame::Coordinate);
    expected.set((1 << Y2) | (1 << Y3), 1.0);
    assert_eq!(l, expected);
}

#[test]
fn jet_coefficients_commute_with_wedge_and_projection() {
    let a = Graded::form(Frame::Moving, &[X1], Field::parse("x1*y2").unwrap())
        + Graded::form(Frame::Moving, &[Y3], Field::parse("sin(y1)").unwrap());
    let b = Graded::form(Frame::Moving, &[Y1, X2], Field::parse("x2 + y3^2").unwrap());
    let p = Point::new(0.2, 0.4, 0.6, 0.8, 1.0);
    let lhs = a.wedge(&b).unwrap().evaluate(&p, 2).unwrap();
    let rhs = a.evaluate(&p, 2).unwrap().wedge(&b.evaluate(&p, 2).unwrap()).unwrap();
    for m in 0..MONOMIALS {
        let (x, y): (&Jet, &Jet) = (lhs.coeff(m), rhs.coeff(m));
        assert!((x.value - y.value).abs() < 1e-14);
        assert!(x.grad.iter().zip(y.grad).all(|(u, v)| (u - v).abs() < 1e-13));
    }
    let pl = a.project(1, 0).evaluate(&p, 1).unwrap();
    let pr = a.evaluate(&p, 1).unwrap().project(1, 0);
    assert_eq!(pl, pr);
}
