use crate::exprlang::{EvalError, Field, Jet, Point, Var};

use super::graded::{bidegree, indices, AlgebraError, Frame, Graded, Kind, Scalar, MONOMIALS};

/// Connection components `γᵢᵃ` evaluated to jets at one point.
pub type GammaJets = [[Jet; 3]; 2];

/// Antisymmetric `5×5` coordinate-frame matrix of a bivector, entries as jets.
pub type BivectorJets = [[Jet; 5]; 5];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalculusError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn budget_error(have: u8) -> EvalError {
    EvalError::OrderBudgetExceeded {
        requested: have + 1,
        budget: have,
    }
}

fn partial(j: &Jet, v: Var) -> Result<Jet, EvalError> {
    j.partial(v).ok_or_else(|| budget_error(j.order()))
}

pub fn flat_gamma() -> GammaJets {
    [[Jet::zero(); 3]; 2]
}

/// `hor_i F = ∂F/∂x^i − γᵢᵃ ∂F/∂y^a` as a jet one order lower than `F`.
pub fn hor_derivative(f: &Jet, gamma: &GammaJets, i: usize) -> Result<Jet, EvalError> {
    let mut out = partial(f, Var::base(i))?;
    for a in 0..3 {
        if !gamma[i][a].is_zero() {
            out = out - gamma[i][a] * partial(f, Var::fiber(a))?;
        }
    }
    Ok(out)
}

/// `dF = (hor_i F) dx^i + (∂F/∂y^a) η^a` in the moving coframe.
pub fn d_function(f: &Jet, gamma: &GammaJets) -> Result<Graded<Jet>, EvalError> {
    let mut out = Graded::zero(Kind::Form, Frame::Moving);
    if f.is_zero() {
        return Ok(out);
    }
    for i in 0..2 {
        out.set(1 << i, hor_derivative(f, gamma, i)?);
    }
    for a in 0..3 {
        out.set(1 << (2 + a), partial(f, Var::fiber(a))?);
    }
    Ok(out)
}

/// `dη^a = Σᵢ dγᵢᵃ ∧ dx^i`.
fn d_eta(gamma: &GammaJets, a: usize) -> Result<Graded<Jet>, CalculusError> {
    let mut out = Graded::zero(Kind::Form, Frame::Moving);
    for i in 0..2 {
        if gamma[i][a].is_zero() {
            continue;
        }
        let dg = d_function(&gamma[i][a], gamma)?;
        let dx = Graded::form(Frame::Moving, &[i], Jet::constant(1.0));
        out = out + dg.wedge(&dx)?;
    }
    Ok(out)
}

/// Full exterior derivative of a moving-coframe form with jet coefficients.
///
/// Coefficients lose one jet order; `dx^i` is closed and `dη^a = dγᵢᵃ ∧ dx^i`.
pub fn exterior_d_jets(form: &Graded<Jet>, gamma: &GammaJets) -> Result<Graded<Jet>, CalculusError> {
    if form.kind() != Kind::Form {
        return Err(AlgebraError::KindMismatch.into());
    }
    if form.frame() != Frame::Moving {
        return Err(AlgebraError::FrameMismatch.into());
    }
    let mut deta: [Option<Graded<Jet>>; 3] = [None, None, None];
    let mut out = Graded::zero(Kind::Form, Frame::Moving);
    for m in form.nonzero_masks().collect::<Vec<_>>() {
        let c = form.coeff(m);
        let basis = Graded::form(Frame::Moving, &indices(m), Jet::constant(1.0));
        let dc = d_function(c, gamma)?;
        out = out + dc.wedge_or_zero(&basis)?;
        let idx = indices(m);
        for (s, &k) in idx.iter().enumerate() {
            if k < 2 {
                continue;
            }
            let a = k - 2;
            if deta[a].is_none() {
                deta[a] = Some(d_eta(gamma, a)?);
            }
            let de = deta[a].as_ref().expect("filled above");
            if de.is_zero() {
                continue;
            }
            let before = Graded::form(Frame::Moving, &idx[..s], Jet::constant(1.0));
            let after = Graded::form(Frame::Moving, &idx[s + 1..], Jet::constant(1.0));
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let term = before.wedge_or_zero(de)?.wedge_or_zero(&after)?;
            out = out + term.times(c).scale(sign);
        }
    }
    Ok(out)
}

/// The bigraded piece `d_{t,s}` of `d`: maps each `(p,q)` part to the `(p+t, q+s)` part of its differential.
pub fn d_part(
    form: &Graded<Jet>,
    gamma: &GammaJets,
    t: isize,
    s: isize,
) -> Result<Graded<Jet>, CalculusError> {
    let mut out = Graded::zero(Kind::Form, Frame::Moving);
    for p in 0..=2usize {
        for q in 0..=3usize {
            let part = form.project(p, q);
            if part.is_zero() {
                continue;
            }
            let (pt, qs) = (p as isize + t, q as isize + s);
            if !(0..=2).contains(&pt) || !(0..=3).contains(&qs) {
                continue;
            }
            let d = exterior_d_jets(&part, gamma)?;
            out = out + d.project(pt as usize, qs as usize);
        }
    }
    Ok(out)
}

pub fn d10(form: &Graded<Jet>, gamma: &GammaJets) -> Result<Graded<Jet>, CalculusError> {
    d_part(form, gamma, 1, 0)
}

pub fn d01(form: &Graded<Jet>, gamma: &GammaJets) -> Result<Graded<Jet>, CalculusError> {
    d_part(form, gamma, 0, 1)
}

pub fn d2m1(form: &Graded<Jet>, gamma: &GammaJets) -> Result<Graded<Jet>, CalculusError> {
    d_part(form, gamma, 2, -1)
}

/// Largest order every field in the list supports, capped at 2.
pub fn common_order<'a>(fields: impl IntoIterator<Item = &'a Field>) -> u8 {
    fields
        .into_iter()
        .filter(|f| !f.is_zero())
        .map(|f| f.budget())
        .min()
        .unwrap_or(2)
        .min(2)
}

pub fn gamma_jets(gamma: &[[Field; 3]; 2], p: &Point, order: u8) -> Result<GammaJets, EvalError> {
    let mut out = flat_gamma();
    for i in 0..2 {
        for a in 0..3 {
            if !gamma[i][a].is_zero() {
                out[i][a] = gamma[i][a].evaluate(p, order)?;
            }
        }
    }
    Ok(out)
}

/// `d` of a field-coefficient form at `p`, evaluated at the highest order the
/// coefficients and connection allow (at least 1). Result coefficients are one order lower.
pub fn exterior_d(
    form: &Graded<Field>,
    gamma: &[[Field; 3]; 2],
    p: &Point,
) -> Result<Graded<Jet>, CalculusError> {
    let order = form.budget().min(common_order(gamma.iter().flatten()));
    if order == 0 {
        return Err(budget_error(0).into());
    }
    let f = form.evaluate(p, order)?;
    let g = gamma_jets(gamma, p, order)?;
    exterior_d_jets(&f, &g)
}

/// Max-norm residuals of the three cochain identities
/// `d₁₀² + d₂,₋₁d₀₁ + d₀₁d₂,₋₁`, `d₁₀d₀₁ + d₀₁d₁₀`, `d₀₁²` applied to `test`.
pub fn cochain_residuals(
    gamma: &[[Field; 3]; 2],
    test: &Graded<Field>,
    p: &Point,
) -> Result<[f64; 3], CalculusError> {
    let order = test.budget().min(common_order(gamma.iter().flatten()));
    if order < 2 {
        return Err(EvalError::OrderBudgetExceeded {
            requested: 2,
            budget: order,
        }
        .into());
    }
    let f = test.evaluate(p, 2)?;
    let g = gamma_jets(gamma, p, 2)?;
    cochain_residuals_jets(&g, &f)
}

pub fn cochain_residuals_jets(g: &GammaJets, f: &Graded<Jet>) -> Result<[f64; 3], CalculusError> {
    let a = d10(f, g)?;
    let b = d2m1(f, g)?;
    let c = d01(f, g)?;
    let r1 = d10(&a, g)? + d2m1(&c, g)? + d01(&b, g)?;
    let r2 = d10(&c, g)? + d01(&a, g)?;
    let r3 = d01(&c, g)?;
    Ok([r1.values().max_abs(), r2.values().max_abs(), r3.values().max_abs()])
}

/// Ordered index triples `μ < ν < λ` labelling trivector components.
pub fn trivector_indices() -> [(usize, usize, usize); 10] {
    let mut out = [(0, 0, 0); 10];
    let mut n = 0;
    for i in 0..5 {
        for j in i + 1..5 {
            for k in j + 1..5 {
                out[n] = (i, j, k);
                n += 1;
            }
        }
    }
    out
}

pub fn zero_bivector() -> BivectorJets {
    [[Jet::zero(); 5]; 5]
}

/// Coordinate-frame bivector matrix of a graded bivector.
pub fn bivector_matrix<T: Scalar>(b: &Graded<T>) -> [[T; 5]; 5] {
    let mut m: [[T; 5]; 5] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));
    for mu in 0..5 {
        for nu in mu + 1..5 {
            let c = b.coeff((1 << mu) | (1 << nu)).clone();
            m[nu][mu] = -c.clone();
            m[mu][nu] = c;
        }
    }
    m
}

pub fn bivector_from_matrix<T: Scalar>(m: &[[T; 5]; 5], frame: Frame) -> Graded<T> {
    let mut g = Graded::zero(Kind::Multivector, frame);
    for mu in 0..5 {
        for nu in mu + 1..5 {
            g.set((1 << mu) | (1 << nu), m[mu][nu].clone());
        }
    }
    g
}

/// Coordinate Schouten bracket of two bivectors,
/// `Σ_ρ (A^{μρ}∂_ρB^{νλ} + B^{μρ}∂_ρA^{νλ}) + cyclic(μνλ)`, for `μ < ν < λ`.
pub fn schouten_jets(a: &BivectorJets, b: &BivectorJets) -> Result<[f64; 10], EvalError> {
    let mut da = [[[0.0; 5]; 5]; 5];
    let mut db = [[[0.0; 5]; 5]; 5];
    for mu in 0..5 {
        for nu in 0..5 {
            for (r, v) in Var::ALL.iter().enumerate() {
                if !a[mu][nu].is_zero() {
                    da[r][mu][nu] = partial(&a[mu][nu], *v)?.value;
                }
                if !b[mu][nu].is_zero() {
                    db[r][mu][nu] = partial(&b[mu][nu], *v)?.value;
                }
            }
        }
    }
    let term = |m: usize, n: usize, l: usize| -> f64 {
        (0..5)
            .map(|r| a[m][r].value * db[r][n][l] + b[m][r].value * da[r][n][l])
            .sum()
    };
    let mut out = [0.0; 10];
    for (k, (m, n, l)) in trivector_indices().into_iter().enumerate() {
        out[k] = term(m, n, l) + term(n, l, m) + term(l, m, n);
    }
    Ok(out)
}

/// `(L_X P)^{μν} = X^ρ∂_ρP^{μν} − P^{ρν}∂_ρX^μ − P^{μρ}∂_ρX^ν`.
pub fn lie_derivative_jets(x: &[Jet; 5], p: &BivectorJets) -> Result<[[f64; 5]; 5], EvalError> {
    let mut dx = [[0.0; 5]; 5];
    let mut dp = [[[0.0; 5]; 5]; 5];
    for (r, v) in Var::ALL.iter().enumerate() {
        for mu in 0..5 {
            if !x[mu].is_zero() {
                dx[r][mu] = partial(&x[mu], *v)?.value;
            }
            for nu in 0..5 {
                if !p[mu][nu].is_zero() {
                    dp[r][mu][nu] = partial(&p[mu][nu], *v)?.value;
                }
            }
        }
    }
    let mut out = [[0.0; 5]; 5];
    for mu in 0..5 {
        for nu in 0..5 {
            let mut s = 0.0;
            for r in 0..5 {
                s += x[r].value * dp[r][mu][nu]
                    - p[r][nu].value * dx[r][mu]
                    - p[mu][r].value * dx[r][nu];
            }
            out[mu][nu] = s;
        }
    }
    Ok(out)
}

/// Lie bracket `[X, Y]^μ = X^ρ∂_ρY^μ − Y^ρ∂_ρX^μ` of coordinate-frame vector fields.
pub fn vector_bracket_jets(x: &[Jet; 5], y: &[Jet; 5]) -> Result<[f64; 5], EvalError> {
    let mut out = [0.0; 5];
    for mu in 0..5 {
        for (r, v) in Var::ALL.iter().enumerate() {
            if !y[mu].is_zero() && x[r].value != 0.0 {
                out[mu] += x[r].value * partial(&y[mu], *v)?.value;
            }
            if !x[mu].is_zero() && y[r].value != 0.0 {
                out[mu] -= y[r].value * partial(&x[mu], *v)?.value;
            }
        }
    }
    Ok(out)
}

fn check_coordinate_bivector<T: Scalar>(b: &Graded<T>) -> Result<(), AlgebraError> {
    if b.kind() != Kind::Multivector {
        return Err(AlgebraError::KindMismatch);
    }
    if b.frame() != Frame::Coordinate {
        return Err(AlgebraError::FrameMismatch);
    }
    Ok(())
}

/// Schouten bracket of two coordinate-frame bivector fields at `p` (10 components, `μ<ν<λ`).
pub fn schouten_bivectors(
    a: &Graded<Field>,
    b: &Graded<Field>,
    p: &Point,
) -> Result<[f64; 10], CalculusError> {
    check_coordinate_bivector(a)?;
    check_coordinate_bivector(b)?;
    let ma = bivector_matrix(&a.evaluate(p, 1)?);
    let mb = bivector_matrix(&b.evaluate(p, 1)?);
    Ok(schouten_jets(&ma, &mb)?)
}

/// `L_X P` for coordinate-frame fields, returned as a coordinate bivector.
pub fn lie_derivative_bivector(
    x: &Graded<Field>,
    pb: &Graded<Field>,
    p: &Point,
) -> Result<Graded<f64>, CalculusError> {
    check_coordinate_bivector(pb)?;
    if x.kind() != Kind::Multivector {
        return Err(AlgebraError::KindMismatch.into());
    }
    if x.frame() != Frame::Coordinate {
        return Err(AlgebraError::FrameMismatch.into());
    }
    let xv = x.evaluate(p, 1)?.components();
    let pm = bivector_matrix(&pb.evaluate(p, 1)?);
    let l = lie_derivative_jets(&xv, &pm)?;
    Ok(bivector_from_matrix(&l, Frame::Coordinate))
}

/// Every monomial mask with the given bidegree.
pub fn masks_of_bidegree(p: usize, q: usize) -> Vec<usize> {
    (0..MONOMIALS).filter(|&m| bidegree(m) == (p, q)).collect()
}
