use super::*;
use crate::generators::{flat_casimir_triple, perturb, random_connection, BetaShape, Perturbation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sec5() -> PoissonTriple {
    PoissonTriple::parse(
        [["0", "-1", "-1"], ["0", "-1", "-1"]],
        "y1^2 - x1^2 - x2^2",
        ["y1^2", "0", "0"],
    )
    .unwrap()
}

fn so3(kappa: &str) -> PoissonTriple {
    PoissonTriple::parse([["0"; 3]; 2], kappa, ["y1", "y2", "y3"]).unwrap()
}

fn random_point(rng: &mut impl Rng, r: f64) -> Point {
    Point::from_array(std::array::from_fn(|_| rng.gen_range(-r..r)))
}

fn displayed_sec5(p: &Point) -> [[f64; 5]; 5] {
    let k = p.y(0).powi(2) - p.x(0).powi(2) - p.x(1).powi(2);
    let mut m = [[0.0; 5]; 5];
    let mut set = |i: usize, j: usize, v: f64| {
        m[i][j] = v;
        m[j][i] = -v;
    };
    set(0, 1, k);
    set(0, 3, k);
    set(0, 4, k);
    set(1, 3, -k);
    set(1, 4, -k);
    set(3, 4, p.y(0).powi(2));
    m
}

#[test]
fn vertical_poisson_examples() {
    let p = vertical_poisson(&VerticalOneForm::parse(["y1", "y2", "y3"]).unwrap());
    let pt = Point::new(0.0, 0.0, 1.5, -2.0, 0.25);
    let v = p.evaluate(&pt, 0).unwrap().values();
    assert_eq!(v.component(&[Y1, Y1 + 1]), 0.25);
    assert_eq!(v.component(&[Y1 + 1, Y1 + 2]), 1.5);
    assert_eq!(v.component(&[Y1 + 2, Y1]), -2.0);
    let q = vertical_poisson(&VerticalOneForm::parse(["y1^2", "0", "0"]).unwrap());
    assert_eq!(q.evaluate(&pt, 0).unwrap().values().component(&[Y1 + 1, Y1 + 2]), 2.25);
    assert!(vertical_poisson(&VerticalOneForm::default()).is_zero());
}

#[test]
fn sec5_bivector_is_reproduced_exactly() {
    let t = sec5();
    let pi = bivector_matrix(&t.assemble_pi());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let p = random_point(&mut rng, 2.0);
        let want = displayed_sec5(&p);
        let jets = t.jets(&p, 0).unwrap().pi_values();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(pi[i][j].value(&p).unwrap(), want[i][j]);
                assert_eq!(jets[i][j], want[i][j]);
            }
        }
    }
}

#[test]
fn trivial_triple_assembles_to_psi() {
    let t = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
    let m = bivector_matrix(&t.assemble_pi());
    assert_eq!(m[0][1].as_constant(), Some(1.0));
    assert!(m.iter().flatten().filter(|f| !f.is_zero()).count() == 2);
}

#[test]
fn sec5_is_poisson_and_satisfies_conditions() {
    let t = sec5();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let p = random_point(&mut rng, 2.0);
        assert!(trivector_max(&t.jacobiator(&p).unwrap()) <= 1e-12);
        assert!(t.ic_residuals(&p).unwrap().max() <= 1e-12);
        let th = t.gamma.theta_at(&p).unwrap();
        assert_eq!(th, [0.0, 0.0]);
    }
}

#[test]
fn non_casimir_kappa_breaks_ic3_and_jacobi() {
    let t = so3("y1");
    let p = Point::new(0.3, 0.1, 0.7, 0.9, -0.4);
    let r = t.ic_residuals(&p).unwrap();
    assert!(r.ic3.iter().any(|v| v.abs() > 0.1));
    assert!(trivector_max(&t.jacobiator(&p).unwrap()) > 0.1);
    // With κ = y1: IC3 for (a, b) = (1, 2) is ∂κ/∂y¹ β₂ = y2.
    assert!((r.ic3[0] - 0.9).abs() < 1e-12);
}

#[test]
fn flat_kappa_of_x_with_zero_beta_is_poisson() {
    let t = PoissonTriple::parse([["0"; 3]; 2], "sin(x1) + x2^2", ["0"; 3]).unwrap();
    let p = Point::new(0.3, 0.1, 0.7, 0.9, -0.4);
    assert_eq!(t.ic_residuals(&p).unwrap().max(), 0.0);
}

#[test]
fn recovery_roundtrip_on_sec5() {
    let t = sec5();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let p = random_point(&mut rng, 2.0);
        let j = t.jets(&p, 0).unwrap();
        let (k, b) = j.recover(&j.pi_values(), 1e-12).unwrap();
        assert!((k - j.kappa.value).abs() <= 1e-12);
        for a in 0..3 {
            assert!((b[a] - j.beta[a].value).abs() <= 1e-12);
        }
    }
    let samples: Vec<Point> = (0..10).map(|_| random_point(&mut rng, 2.0)).collect();
    let (k, b) = recover_triple(&t.assemble_pi(), &t.gamma, &samples, 1e-12).unwrap();
    for p in &samples {
        assert!((k.value(p).unwrap() - t.kappa.value(p).unwrap()).abs() <= 1e-12);
        assert!((b.beta[0].value(p).unwrap() - p.y(0).powi(2)).abs() <= 1e-12);
        assert!(b.beta[1].value(p).unwrap().abs() <= 1e-12);
    }
}

#[test]
fn recovery_of_psi_and_rejection_of_mixed_terms() {
    let mut m = [[0.0; 5]; 5];
    m[0][1] = 1.0;
    m[1][0] = -1.0;
    let p = Point::new(0.0, 0.0, 0.0, 0.0, 0.0);
    let flat = [[0.0; 3]; 2];
    assert_eq!(recover_at(&m, &flat, 1e-12, &p).unwrap(), (1.0, [0.0; 3]));
    m[0][2] = 0.5;
    m[2][0] = -0.5;
    assert!(matches!(
        recover_at(&m, &flat, 1e-12, &p),
        Err(TripleError::NotAlmostCoupling { .. })
    ));
}

#[test]
fn bracket_routes_agree() {
    let t = so3("1");
    let y1 = Field::var(Var::Y1);
    let y2 = Field::var(Var::Y2);
    let p = Point::new(0.2, 0.4, 1.0, 2.0, 3.0);
    assert!((t.poisson_bracket(&y1, &y2, &p).unwrap() - 3.0).abs() < 1e-14);
    assert!((t.bracket_via_pi(&y1, &y2, &p).unwrap() - 3.0).abs() < 1e-14);
    let flat = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
    let x1 = Field::var(Var::X1);
    let x2 = Field::var(Var::X2);
    assert_eq!(flat.poisson_bracket(&x1, &x2, &p).unwrap(), 1.0);
    let s = sec5();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let q = random_point(&mut rng, 2.0);
        assert!(s.bracket_via_pi(&x1, &y1, &q).unwrap().abs() < 1e-14);
        let f = crate::generators::random_cubic(&mut rng);
        let g = crate::generators::random_cubic(&mut rng);
        let a = s.poisson_bracket(&f, &g, &q).unwrap();
        let b = s.bracket_via_pi(&f, &g, &q).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn hamiltonian_field_routes_agree() {
    let flat = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
    let x = flat.hamiltonian_field(&Field::var(Var::X1)).unwrap();
    let p = Point::new(0.1, 0.2, 0.3, 0.4, 0.5);
    assert_eq!(x.evaluate(&p, 0).unwrap().values().components(), [0.0, 1.0, 0.0, 0.0, 0.0]);

    let t = so3("1");
    let r = t.hamiltonian_at(&Field::var(Var::Y3), &p).unwrap();
    // X_{y3} = y2∂y1 − y1∂y2 under X^ν = ∂_μF Π^{μν}.
    assert_eq!(r, [0.0, 0.0, 0.4, -0.3, 0.0]);

    let casimir = Field::parse("y1^2 + y2^2 + y3^2").unwrap();
    assert!(t.hamiltonian_at(&casimir, &p).unwrap().iter().all(|v| v.abs() < 1e-15));

    let s = sec5();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let q = random_point(&mut rng, 2.0);
        let f = crate::generators::random_cubic(&mut rng);
        let a = s.hamiltonian_at(&f, &q).unwrap();
        let b = s.hamiltonian_bigraded_at(&f, &q).unwrap();
        let c = s.hamiltonian_field(&f).unwrap().evaluate(&q, 0).unwrap().values().components();
        for k in 0..5 {
            assert!((a[k] - b[k]).abs() <= 1e-10 * (1.0 + a[k].abs()));
            assert!((a[k] - c[k]).abs() <= 1e-10 * (1.0 + a[k].abs()));
        }
    }
}

#[test]
fn casimir_residual_examples() {
    let t = so3("1");
    let p = Point::new(0.1, 0.2, 0.3, 0.4, 0.5);
    let c = Field::parse("y1^2 + y2^2 + y3^2").unwrap();
    assert_eq!(t.casimir_residual(&c, &p).unwrap(), [0.0, 0.0]);
    let base = Field::parse("x1 * x2").unwrap();
    assert_eq!(t.casimir_residual(&base, &p).unwrap()[1], 0.0);
    assert!(t.casimir_residual(&Field::var(Var::Y1), &p).unwrap()[1] > 0.1);
}

#[test]
fn coupling_domain_identities_hold_for_sec5() {
    let t = sec5();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let p = random_point(&mut rng, 2.0);
        if t.kappa.value(&p).unwrap().abs() < 1e-3 {
            continue;
        }
        assert!(t.poisson_connection_residual(&p, 1e-9).unwrap() <= 1e-9);
        assert!(t.cocycle_residual(&p, 1e-9).unwrap() <= 1e-9);
        assert!(t.curvature_identity_residual(&p, 1e-9).unwrap() <= 1e-9);
        assert!(t.coupling_form_residual(&p, 1e-9).unwrap() <= 1e-10);
        let j = t.jets(&p, 2).unwrap();
        assert!(j.c2_residual().unwrap() <= 1e-9);
        assert!(j.c3_residual().unwrap() <= 1e-9);
    }
    let off = Point::new(1.0, 0.0, 1.0, 0.0, 0.0);
    assert!(matches!(
        t.cocycle_residual(&off, 1e-9),
        Err(TripleError::OutsideCouplingDomain { .. })
    ));
    assert!(t.jets(&off, 1).unwrap().c5_residual().unwrap() <= 1e-12);
}

#[test]
fn coupling_form_at_unit_kappa_is_omega_h() {
    let t = sec5();
    let p = Point::new(0.0, 0.0, 1.0, 0.0, 0.0);
    assert_eq!(t.coupling_form(&p, 1e-9).unwrap(), omega_h::<f64>());
}

#[test]
fn broken_triples_fail_coupling_identities() {
    let t = PoissonTriple::parse([["y2", "0", "0"], ["0", "x1", "0"]], "1 + y1^2", ["y1", "y2", "y3"]).unwrap();
    let p = Point::new(0.3, -0.2, 0.5, 0.7, 0.1);
    assert!(t.poisson_connection_residual(&p, 1e-9).unwrap() > 1e-3);
    assert!(t.cocycle_residual(&p, 1e-9).unwrap() > 1e-3);
    assert!(t.curvature_identity_residual(&p, 1e-9).unwrap() > 1e-3);
}

#[test]
fn equivalence_on_constructed_and_perturbed_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<Point> = (0..40).map(|_| random_point(&mut rng, 1.0)).collect();
    for k in 0..20 {
        let shape = if k % 2 == 0 { BetaShape::Closed } else { BetaShape::Conformal };
        let t = flat_casimir_triple(&mut rng, shape, k % 3 == 0);
        let r = equivalence_check(&t, &samples, 1e-9);
        assert!(r.passed(), "{r:?}");
        let kind = [Perturbation::Kappa, Perturbation::Connection, Perturbation::Beta][k % 3];
        let b = perturb(&mut rng, &t, kind);
        let r = equivalence_check(&b, &samples, 1e-9);
        assert!(r.disagreements.is_empty());
        assert_eq!(r.verdict("jacobi_identity"), Some(crate::report::Verdict::Fail));
    }
}

#[test]
fn submanifold_examples() {
    let xs: Vec<[f64; 2]> = (0..10).map(|k| [0.1 * k as f64, -0.05 * k as f64]).collect();
    let t = so3("1");
    let origin = Section::constant([0.0; 3]);
    assert!(submanifold_check(&t, &origin, &xs, 1e-12).passed());
    let off = Section::constant([1.0, 0.0, 0.0]);
    let r = submanifold_check(&t, &off, &xs, 1e-12);
    assert!(r.get("submanifold_vertical").unwrap().max_residual > 0.5);
    assert!(Section::new([Field::var(Var::Y1), Field::zero(), Field::zero()]).is_err());
    // The graph of s = (x1, 0, 0) is not tangent to the flat horizontal lift.
    let tilted = Section::new([Field::var(Var::X1), Field::zero(), Field::zero()]).unwrap();
    let flat = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
    assert!(submanifold_check(&flat, &tilted, &xs, 1e-12).get("submanifold_horizontal").unwrap().max_residual > 0.5);
}

#[test]
fn flat_triple_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples: Vec<Point> = (0..30).map(|_| random_point(&mut rng, 1.5)).collect();
    let beta = VerticalOneForm::parse(["y1", "y2", "y3"]).unwrap();
    let k0 = Field::parse("cutoff(y1^2 + y2^2 + y3^2)").unwrap();
    let t = flat_triple(Connection::flat(), k0, beta.clone(), &samples, 1e-9).unwrap();
    assert!(equivalence_check(&t, &samples, 1e-9).passed());
    assert!(matches!(
        flat_triple(Connection::flat(), Field::var(Var::Y1), beta.clone(), &samples, 1e-9),
        Err(TripleError::NotCasimir { .. })
    ));
    let curved = Connection::parse([["y2", "0", "0"], ["0", "x1", "0"]]).unwrap();
    assert!(matches!(
        flat_triple(curved, Field::one(), beta, &samples, 1e-9),
        Err(TripleError::NotFlat { .. })
    ));
}

#[test]
fn flat_pair_verdicts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let samples: Vec<Point> = (0..30).map(|_| random_point(&mut rng, 1.0)).collect();
    for k in 0..10 {
        let t = flat_casimir_triple(&mut rng, BetaShape::Closed, k % 2 == 0);
        let (bad, flat, curved) = flat_pair_check(&t, &samples, 1e-9, 1e-9);
        assert!(bad.is_empty());
        assert!(flat > 0 && curved == 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn assembled_bivector_has_no_mixed_part(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = PoissonTriple::new(
            random_connection(&mut rng, 2),
            crate::generators::random_cubic(&mut rng),
            VerticalOneForm::new(std::array::from_fn(|_| crate::generators::random_cubic(&mut rng))),
        );
        let p = random_point(&mut rng, 1.0);
        let field_level = t.assemble_pi().convert(Frame::Moving, &t.gamma.gamma).project(1, 1);
        prop_assert!(field_level.evaluate(&p, 0).unwrap().values().max_abs() <= 1e-12);
        prop_assert!(mixed_part(&t, &p).unwrap() <= 1e-10 * t.jets(&p, 0).unwrap().scale().powi(3));
    }

    #[test]
    fn recover_assemble_roundtrip(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = PoissonTriple::new(
            random_connection(&mut rng, 2),
            crate::generators::random_cubic(&mut rng),
            VerticalOneForm::new(std::array::from_fn(|_| crate::generators::random_cubic(&mut rng))),
        );
        let p = random_point(&mut rng, 1.0);
        let j = t.jets(&p, 0).unwrap();
        let scale = j.scale().powi(3);
        let (k, b) = j.recover(&j.pi_values(), 1e-10 * scale).unwrap();
        prop_assert!((k - j.kappa.value).abs() <= 1e-12 * scale);
        for a in 0..3 {
            prop_assert!((b[a] - j.beta[a].value).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn field_and_jet_assembly_agree(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = PoissonTriple::new(
            random_connection(&mut rng, 2),
            crate::generators::random_cubic(&mut rng),
            VerticalOneForm::new(std::array::from_fn(|_| crate::generators::random_cubic(&mut rng))),
        );
        let p = random_point(&mut rng, 1.0);
        let a = bivector_matrix(&t.assemble_pi());
        let b = t.jets(&p, 0).unwrap().pi_values();
        for i in 0..5 {
            for k in 0..5 {
                let v = a[i][k].value(&p).unwrap();
                prop_assert!((v - b[i][k]).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}
