use super::*;
use crate::generators::{flat_casimir_triple, BetaShape, Poly, ALL_VARS, BASE_VARS};
use crate::strata::{label_for, Label};
use crate::triple::equivalence_at;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn br3() -> PoissonTriple {
    PoissonTriple::parse([["0"; 3]; 2], "cutoff(y1^2 + y2^2 + y3^2)", ["y1", "y2", "y3"]).unwrap()
}

fn sec5() -> PoissonTriple {
    PoissonTriple::parse([["0", "-1", "-1"], ["0", "-1", "-1"]], "y1^2 - x1^2 - x2^2", ["y1^2", "0", "0"]).unwrap()
}

fn points(seed: u64, n: usize, r: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point::from_array(std::array::from_fn(|_| rng.gen_range(-r..r)))).collect()
}

fn mu(a: &str, b: &str) -> [Field; 2] {
    [Field::parse(a).unwrap(), Field::parse(b).unwrap()]
}

#[test]
fn varkappa_examples_and_routes() {
    let t = br3();
    let p = Point::new(0.2, -0.3, 0.4, 0.1, -0.5);
    assert_eq!(varkappa(&t, &mu("0", "0"), 0.3, &p).unwrap(), 0.0);
    assert_eq!(varkappa(&t, &mu("0", "x1"), 0.3, &p).unwrap(), 1.0);
    let m = mu("y3", "y1 * x2");
    for eps in [0.0, 0.05, 1.0] {
        let a = varkappa(&t, &m, eps, &p).unwrap();
        let b = varkappa_intrinsic(&t, &m, eps, &p).unwrap();
        let c = varkappa_field(&t, &m, eps).unwrap().value(&p).unwrap();
        assert!((a - b).abs() <= 1e-10 && (a - c).abs() <= 1e-10, "{a} {b} {c}");
    }
    // ∇μ₁ × ∇μ₂ = e₃ × (x2 e₁) = x2 e₂, paired with β = y.
    let bilinear = varkappa(&t, &m, 1.0, &p).unwrap() - varkappa(&t, &m, 0.0, &p).unwrap();
    assert!((bilinear - p.x(1) * p.y(1)).abs() < 1e-14);
    let s = sec5();
    for q in points(50, 20, 1.5) {
        let m = mu("y2 * x1 + y3^2", "x2 * y1 - y2");
        let a = varkappa(&s, &m, 0.4, &q).unwrap();
        let b = varkappa_intrinsic(&s, &m, 0.4, &q).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn zero_gauge_and_zero_epsilon_are_identities() {
    let t = sec5();
    let g = GaugeData::new(mu("0", "0"), Field::zero(), 0.7);
    let out = family_triple(&t, &g).unwrap();
    let g0 = GaugeData::new(mu("y3", "x1"), Field::var(Var::X2), 0.0);
    let same = family_triple(&t, &g0).unwrap();
    for p in points(51, 20, 1.5) {
        let (a, b, c) = (t.jets(&p, 0).unwrap(), out.jets(&p, 0).unwrap(), same.jets(&p, 0).unwrap());
        assert_eq!(a.pi_values(), b.pi_values());
        assert_eq!(a.pi_values(), c.pi_values());
        assert_eq!(domain_indicator(&t, &g, &p).unwrap(), 1.0);
    }
}

#[test]
fn br3_family_reproduces_connection_formula() {
    let t = br3();
    for eps in [0.01, 0.05] {
        let g = GaugeData::new(mu("y3", "0"), Field::zero(), eps);
        let out = family_triple(&t, &g).unwrap();
        for p in points(52, 20, 1.5) {
            let gj = out.gamma.jets(&p, 0).unwrap();
            let want = [-eps * p.y(1), eps * p.y(0), 0.0];
            for a in 0..3 {
                assert!((gj[0][a].value - want[a]).abs() < 1e-15);
                assert_eq!(gj[1][a].value, 0.0);
            }
            assert_eq!(out.kappa.value(&p).unwrap(), t.kappa.value(&p).unwrap());
        }
    }
}

#[test]
fn gauge_closure_on_constructed_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let samples = points(54, 30, 1.0);
    for k in 0..20 {
        let t = flat_casimir_triple(&mut rng, BetaShape::Conformal, k % 2 == 0);
        let m = [Poly::random(&mut rng, ALL_VARS, 2, 3).to_field(), Poly::random(&mut rng, ALL_VARS, 2, 3).to_field()];
        let c = Poly::random(&mut rng, BASE_VARS, 2, 2).to_field();
        let g = GaugeData::new(m, c, rng.gen_range(-0.1..0.1));
        g.check_casimir(&t, &samples, 1e-9).unwrap();
        let out = family(&t, &g, &samples, 1e-6).unwrap();
        for (p, inside) in samples.iter().zip(&out.domain) {
            if !inside {
                continue;
            }
            let e = equivalence_at(&out.triple, p).unwrap();
            assert!(e.ic_ok(1e-9) && e.jacobi_ok(1e-9), "{e:?}");
            let (a, b) = (t.jets(p, 0).unwrap(), out.triple.jets(p, 0).unwrap());
            for i in 0..3 {
                assert_eq!(a.beta[i].value, b.beta[i].value);
            }
            let za = label_for(a.kappa.value, 1.0, 1e-9, 0.0) == Label::Rank2Vertical;
            let zb = label_for(b.kappa.value, 1.0, 1e-9, 0.0) == Label::Rank2Vertical;
            assert_eq!(za, zb);
            assert!(characteristic_compare(&a.pi_values(), &b.pi_values()).equal());
        }
    }
}

#[test]
fn scaling_symmetry() {
    let t = sec5();
    let p = Point::new(0.4, -0.6, 1.2, 0.3, -0.9);
    assert_eq!(scale(&t, 1.0).jets(&p, 0).unwrap().pi_values(), t.jets(&p, 0).unwrap().pi_values());
    assert!(scale(&t, 0.0).jets(&p, 0).unwrap().pi_values().iter().flatten().all(|v| *v == 0.0));
    assert!(scale(&t, -2.0).ic_residuals(&p).unwrap().max() <= 1e-12);
}

#[test]
fn domain_indicator_detects_crossing_and_empty_domain() {
    let flat = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
    let g = GaugeData::new(mu("0", "0"), Field::var(Var::X1), 1.0);
    let path: Vec<f64> = (0..=20)
        .map(|k| domain_indicator(&flat, &g, &Point::new(-2.0 + 0.1 * k as f64, 0.0, 0.0, 0.0, 0.0)).unwrap())
        .collect();
    assert!(path.first().unwrap() < &0.0 && path.last().unwrap() > &0.0);
    let dead = GaugeData::new(mu("0", "0"), Field::constant(-1.0), 1.0);
    assert!(matches!(family(&flat, &dead, &points(55, 10, 1.0), 1e-9), Err(GaugeError::EmptyDomain)));
    let small = GaugeData::new(mu("y1 * x2", "x1^2"), Field::zero(), 1e-4);
    for p in points(56, 20, 1.0) {
        assert!((domain_indicator(&br3(), &small, &p).unwrap() - 1.0).abs() < 1e-3);
    }
}

#[test]
fn characteristic_ranks() {
    let t = br3();
    let g = GaugeData::new(mu("y3", "0"), Field::zero(), 0.05);
    let out = family_triple(&t, &g).unwrap();
    for p in points(57, 20, 0.5) {
        let r = characteristic_compare_at(&t, &g, &out, &p, 1e-9).unwrap();
        assert!(r.equal());
    }
    let other = PoissonTriple::parse([["0"; 3]; 2], "0", ["0", "0", "1"]).unwrap();
    let so3 = PoissonTriple::parse([["0"; 3]; 2], "0", ["y1", "0", "0"]).unwrap();
    let p = Point::new(0.0, 0.0, 1.0, 0.0, 0.0);
    let r = characteristic_compare(&other.jets(&p, 0).unwrap().pi_values(), &so3.jets(&p, 0).unwrap().pi_values());
    assert!(!r.equal());
}

#[test]
fn upsilon_closedness_examples() {
    let p = Point::new(0.3, 0.2, -0.1, 0.5, 0.7);
    let m = mu("y3 * x2^2", "sin(x1 * y1)");
    let (r, v) = upsilon_closedness(&GaugeData::new(m.clone(), Field::zero(), 1.0), &p).unwrap();
    assert!(r < 1e-14 && v == 0.0);
    let (r, v) = upsilon_closedness(&GaugeData::new(m.clone(), Field::var(Var::X1), 1.0), &p).unwrap();
    assert!(r < 1e-14 && v == 0.0);
    let (r, v) = upsilon_closedness(&GaugeData::new(m, Field::var(Var::Y1), 1.0), &p).unwrap();
    assert!(r > 0.5 && v > 0.5);
}

#[test]
fn non_casimir_c_is_rejected() {
    let t = br3();
    let g = GaugeData::new(mu("0", "0"), Field::var(Var::Y1), 0.1);
    assert!(matches!(
        g.check_casimir(&t, &points(58, 10, 1.0), 1e-9),
        Err(GaugeError::NotCasimir { .. })
    ));
    let ok = GaugeData::new(mu("0", "0"), Field::parse("y1^2 + y2^2 + y3^2").unwrap(), 0.1);
    ok.check_casimir(&t, &points(58, 10, 1.0), 1e-9).unwrap();
}
