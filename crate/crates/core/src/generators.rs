//! Seeded random polynomials, connections and Poisson triples for fuzz campaigns.

use rand::Rng;

use crate::connection::Connection;
use crate::exprlang::{Expression, Field, Point, Var};
use crate::triple::{equivalence_at, PoissonTriple, VerticalOneForm};

/// Sparse polynomial `Σ c·x^e` over the five chart variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: Vec<(f64, [u8; 5])>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: f64) -> Poly {
        Poly { terms: vec![(c, [0; 5])] }.normalized()
    }

    pub fn var(v: Var) -> Poly {
        let mut e = [0; 5];
        e[v.index()] = 1;
        Poly { terms: vec![(1.0, e)] }
    }

    /// `n` random terms of total degree `≤ max_degree` in the variables of `mask` (bit `k` = variable `k`),
    /// coefficients uniform in `[-1, 1]`.
    pub fn random(rng: &mut impl Rng, mask: u8, max_degree: u8, n: usize) -> Poly {
        let vars: Vec<usize> = (0..5).filter(|k| mask & (1 << k) != 0).collect();
        let mut terms = Vec::with_capacity(n);
        for _ in 0..n {
            let mut e = [0u8; 5];
            if !vars.is_empty() {
                let deg = rng.gen_range(0..=max_degree);
                for _ in 0..deg {
                    e[vars[rng.gen_range(0..vars.len())]] += 1;
                }
            }
            let c: f64 = rng.gen_range(-1.0..1.0);
            terms.push((c, e));
        }
        Poly { terms }.normalized()
    }

    /// Merges equal monomials and drops zero coefficients; terms sorted by exponent.
    pub fn normalized(mut self) -> Poly {
        self.terms.sort_by_key(|t| t.1);
        let mut out: Vec<(f64, [u8; 5])> = Vec::with_capacity(self.terms.len());
        for (c, e) in self.terms {
            match out.last_mut() {
                Some(last) if last.1 == e => last.0 += c,
                _ => out.push((c, e)),
            }
        }
        out.retain(|t| t.0 != 0.0);
        Poly { terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        Poly { terms }.normalized()
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|&(c, e)| (c * s, e)).collect(),
        }
        .normalized()
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for &(c1, e1) in &self.terms {
            for &(c2, e2) in &o.terms {
                let mut e = e1;
                for k in 0..5 {
                    e[k] += e2[k];
                }
                terms.push((c1 * c2, e));
            }
        }
        Poly { terms }.normalized()
    }

    pub fn diff(&self, v: Var) -> Poly {
        let k = v.index();
        let terms = self
            .terms
            .iter()
            .filter(|t| t.1[k] > 0)
            .map(|&(c, mut e)| {
                let n = e[k];
                e[k] -= 1;
                (c * n as f64, e)
            })
            .collect();
        Poly { terms }.normalized()
    }

    pub fn eval(&self, p: &[f64; 5]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * (0..5).map(|k| p[k].powi(e[k] as i32)).product::<f64>())
            .sum()
    }

    pub fn to_expression(&self) -> Expression {
        let mut acc: Option<Expression> = None;
        for &(c, e) in &self.terms {
            let mut factors: Vec<Expression> = Vec::new();
            for (k, &n) in e.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let v = Expression::Var(Var::from_index(k));
                factors.push(if n == 1 { v } else { Expression::Pow(Box::new(v), n as u32) });
            }
            let mono = factors
                .into_iter()
                .reduce(|a, b| Expression::Binary(crate::exprlang::BinOp::Mul, Box::new(a), Box::new(b)));
            let term = match mono {
                None => Expression::Num(c),
                Some(m) if c == 1.0 => m,
                Some(m) => Expression::Binary(crate::exprlang::BinOp::Mul, Box::new(Expression::Num(c)), Box::new(m)),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Expression::Binary(crate::exprlang::BinOp::Add, Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or(Expression::Num(0.0))
    }

    pub fn to_field(&self) -> Field {
        if self.is_zero() {
            Field::zero()
        } else {
            Field::from_expr(self.to_expression())
        }
    }
}

pub const ALL_VARS: u8 = 0b11111;
pub const BASE_VARS: u8 = 0b00011;
pub const FIBER_VARS: u8 = 0b11100;

/// Connection with independent random polynomial components of degree `≤ degree`.
pub fn random_connection(rng: &mut impl Rng, degree: u8) -> Connection {
    let mut gamma: [[Field; 3]; 2] = Default::default();
    for i in 0..2 {
        for a in 0..3 {
            gamma[i][a] = Poly::random(rng, ALL_VARS, degree, 3).to_field();
        }
    }
    Connection::new(gamma)
}

/// Which shape of `β` a flat-Casimir triple uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaShape {
    /// `β = ∇g`, a closed fiber 1-form.
    Closed,
    /// `β = f∇g`, satisfying `β·curl β = 0` but generally not closed.
    Conformal,
}

/// A Poisson triple with flat connection, `β = f∇g` (or `∇g`) and `κ = φ(g, x)`.
///
/// With `nontrivial_connection`, `f` and `g` avoid `y3` and the connection is `γᵢ³ = ∂φ₀/∂x^i` for a
/// random base polynomial `φ₀`, which is flat and preserves `P_β`.
pub fn flat_casimir_triple(rng: &mut impl Rng, shape: BetaShape, nontrivial_connection: bool) -> PoissonTriple {
    let fiber = if nontrivial_connection { 0b01100 } else { FIBER_VARS };
    let g = Poly::random(rng, fiber, 3, 4).add(&Poly::var(Var::Y1).scale(rng.gen_range(0.5..1.5)));
    let grad: [Poly; 3] = std::array::from_fn(|a| g.diff(Var::fiber(a)));
    let beta: [Poly; 3] = match shape {
        BetaShape::Closed => grad,
        BetaShape::Conformal => {
            let f = Poly::random(rng, fiber, 2, 3).add(&Poly::constant(1.0));
            std::array::from_fn(|a| f.mul(&grad[a]))
        }
    };
    let gf = g.to_field();
    let p0 = Poly::random(rng, BASE_VARS, 2, 2).add(&Poly::constant(rng.gen_range(0.5..1.5)));
    let p1 = Poly::random(rng, BASE_VARS, 1, 2);
    let p2 = Poly::constant(rng.gen_range(-0.5..0.5));
    let kappa = p0.to_field() + p1.to_field() * &gf + p2.to_field() * (&gf * &gf);
    let mut gamma: [[Field; 3]; 2] = Default::default();
    if nontrivial_connection {
        let phi = Poly::random(rng, BASE_VARS, 3, 3);
        gamma[0][2] = phi.diff(Var::X1).to_field();
        gamma[1][2] = phi.diff(Var::X2).to_field();
    }
    PoissonTriple::new(
        Connection::new(gamma),
        kappa,
        VerticalOneForm::new(std::array::from_fn(|a| beta[a].to_field())),
    )
}

/// How [`perturb`] breaks a triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// Adds a fiber-dependent, non-Casimir term to `κ`.
    Kappa,
    /// Adds a fiber-dependent term to one connection component.
    Connection,
    /// Adds a term to `β` that breaks integrability of `P_β`.
    Beta,
}

/// Breaks `t` with a random term of the given kind, redrawing until the conditions fail at
/// every probe point; a few draws (a dilation along a direction `β` ignores, say) leave it Poisson.
pub fn perturb(rng: &mut impl Rng, t: &PoissonTriple, kind: Perturbation) -> PoissonTriple {
    let probes = [
        Point::new(0.31, -0.52, 0.73, -0.17, 0.44),
        Point::new(-0.66, 0.28, -0.39, 0.81, -0.23),
        Point::new(0.12, 0.77, 0.58, 0.36, -0.71),
    ];
    let mut out = perturb_once(rng, t, kind);
    for _ in 0..32 {
        let broken = probes.iter().all(|p| equivalence_at(&out, p).is_ok_and(|e| e.ic > 1e-6 * e.scale));
        if broken {
            break;
        }
        out = perturb_once(rng, t, kind);
    }
    out
}

fn perturb_once(rng: &mut impl Rng, t: &PoissonTriple, kind: Perturbation) -> PoissonTriple {
    let mut out = t.clone();
    let size = rng.gen_range(0.2..1.0);
    match kind {
        Perturbation::Kappa => {
            let a = rng.gen_range(0..3);
            let bump = Poly::var(Var::fiber(a)).mul(&Poly::var(Var::fiber((a + 1) % 3))).scale(size);
            out.kappa = &out.kappa + bump.add(&Poly::var(Var::fiber((a + 2) % 3)).scale(size)).to_field();
        }
        Perturbation::Connection => {
            // A dilation term `s·y^a` changes IC2 by `s(β_b − y^a∂_aβ_b)`, which vanishes only on thin sets.
            let (i, a) = (rng.gen_range(0..2), rng.gen_range(0..3));
            let extra = Poly::var(Var::fiber(a)).scale(size);
            out.gamma.gamma[i][a] = &out.gamma.gamma[i][a] + extra.to_field();
        }
        Perturbation::Beta => {
            let a = rng.gen_range(0..3);
            let extra = Poly::var(Var::fiber((a + 1) % 3)).scale(size);
            out.beta.beta[a] = &out.beta.beta[a] + extra.to_field();
        }
    }
    out
}

/// Seeded cubic polynomial in all five variables, used as a test Hamiltonian.
pub fn random_cubic(rng: &mut impl Rng) -> Field {
    Poly::random(rng, ALL_VARS, 3, 6).to_field()
}

/// Random composition of every builtin, arranged so that each call stays inside its smooth
/// domain on `[-1, 1]⁵` (`ln` and `sqrt` see arguments `≥ 1`, `tan` and `cutoff` see small ones).
pub fn random_smooth_expression(rng: &mut impl Rng, depth: u32) -> Expression {
    use crate::exprlang::{BinOp, Builtin};
    let num = |v: f64| Expression::num(v);
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.75) {
            Expression::var(Var::ALL[rng.gen_range(0..5)])
        } else {
            num((rng.gen_range(0.1..2.0f64) * 100.0).round() / 100.0)
        };
    }
    let a = random_smooth_expression(rng, depth - 1);
    let small = |e: Expression| Expression::binary(BinOp::Mul, num(0.3), Expression::call(Builtin::Tanh, e));
    let one_plus_square = |e: Expression| Expression::binary(BinOp::Add, num(1.0), Expression::pow(e, 2));
    match rng.gen_range(0..12) {
        0 => Expression::call(Builtin::Sin, a),
        1 => Expression::call(Builtin::Cos, a),
        2 => Expression::call(Builtin::Tan, small(a)),
        3 => Expression::call(Builtin::Exp, small(a)),
        4 => Expression::call(Builtin::Ln, one_plus_square(a)),
        5 => Expression::call(Builtin::Sqrt, one_plus_square(a)),
        6 => Expression::call(Builtin::Tanh, a),
        7 => Expression::call(Builtin::Cutoff, Expression::pow(small(a), 2)),
        8 => Expression::neg(a),
        9 => Expression::pow(a, rng.gen_range(2..4)),
        10 => {
            let b = random_smooth_expression(rng, depth - 1);
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul][rng.gen_range(0..3)];
            Expression::binary(op, a, b)
        }
        _ => {
            let b = random_smooth_expression(rng, depth - 1);
            let denom = Expression::binary(BinOp::Add, num(2.0), Expression::call(Builtin::Sin, b));
            Expression::binary(BinOp::Div, a, denom)
        }
    }
}
