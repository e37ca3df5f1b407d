//! Gauge transformations of Poisson triples, the scaling symmetry and the ε-family.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coframe::{
    d10, d_function, exterior_d_jets, flat_gamma, omega_h, ratio, CalculusError, Frame, Graded, Kind,
    MASK_OMEGA_H, MASK_OMEGA_V,
};
use crate::connection::ConnectionShift;
use crate::exprlang::{EvalError, Field, Jet, Point, Var};
use crate::strata::RANK_THRESHOLD;
use crate::triple::PoissonTriple;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaugeError {
    #[error("gauge denominator vanishes at every sample")]
    EmptyDomain,
    #[error("point {0:?} is outside the gauge domain")]
    OutsideDomain([f64; 5]),
    #[error("c is not a fiberwise Casimir: |d01 c ∧ β| = {residual:e} at {point:?}")]
    NotCasimir { residual: f64, point: [f64; 5] },
    #[error(transparent)]
    Triple(#[from] crate::triple::TripleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

impl From<crate::coframe::AlgebraError> for GaugeError {
    fn from(e: crate::coframe::AlgebraError) -> Self {
        GaugeError::Calculus(e.into())
    }
}

/// Horizontal 1-form `μ = μᵢdx^i`, Casimir function `c` and parameter `ε`.
#[derive(Clone, Debug)]
pub struct GaugeData {
    pub mu: [Field; 2],
    pub c: Field,
    pub epsilon: f64,
}

impl GaugeData {
    pub fn new(mu: [Field; 2], c: Field, epsilon: f64) -> GaugeData {
        GaugeData { mu, c, epsilon }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> GaugeData {
        GaugeData { epsilon, ..self.clone() }
    }

    /// Rejects `c` unless `d₀₁c ∧ β` vanishes at every sample.
    pub fn check_casimir(&self, t: &PoissonTriple, samples: &[Point], tol: f64) -> Result<(), GaugeError> {
        for p in samples {
            let [_, r] = t.casimir_residual(&self.c, p)?;
            if r > tol {
                return Err(GaugeError::NotCasimir { residual: r, point: p.coords() });
            }
        }
        Ok(())
    }
}

fn d(f: &Jet, v: Var) -> Result<Jet, EvalError> {
    f.partial(v).ok_or(EvalError::OrderBudgetExceeded { requested: f.order() + 1, budget: f.order() })
}

/// `ϰ_{μ,ε} = hor₁μ₂ − hor₂μ₁ + ε β·(∇_yμ₁ × ∇_yμ₂)` from coordinate derivatives.
pub fn varkappa(t: &PoissonTriple, mu: &[Field; 2], eps: f64, p: &Point) -> Result<f64, GaugeError> {
    let g = t.gamma.jets(p, 0)?;
    let m: Vec<Jet> = mu.iter().map(|f| f.evaluate(p, 1)).collect::<Result<_, _>>()?;
    let hor = |f: &Jet, i: usize| -> Result<f64, EvalError> {
        let mut s = d(f, Var::base(i))?.value;
        for a in 0..3 {
            s -= g[i][a].value * d(f, Var::fiber(a))?.value;
        }
        Ok(s)
    };
    let grad = |f: &Jet| -> Result<[f64; 3], EvalError> {
        Ok([d(f, Var::Y1)?.value, d(f, Var::Y2)?.value, d(f, Var::Y3)?.value])
    };
    let (u, w) = (grad(&m[0])?, grad(&m[1])?);
    let b: Vec<f64> = t.beta.beta.iter().map(|f| f.value(p)).collect::<Result<_, _>>()?;
    let cross = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    let triple: f64 = (0..3).map(|a| b[a] * cross[a]).sum();
    Ok(hor(&m[1], 0)? - hor(&m[0], 1)? + eps * triple)
}

/// `ϰ_{μ,ε} = (d₁₀μ)/Ω^H + ε (d₀₁μ₁∧d₀₁μ₂∧β)/Ω^V` through the bigraded calculus.
pub fn varkappa_intrinsic(t: &PoissonTriple, mu: &[Field; 2], eps: f64, p: &Point) -> Result<f64, GaugeError> {
    let j = t.jets(p, 1)?;
    let m: Vec<Jet> = mu.iter().map(|f| f.evaluate(p, 1)).collect::<Result<_, _>>()?;
    let form = Graded::from_components(Kind::Form, Frame::Moving, [m[0], m[1], Jet::zero(), Jet::zero(), Jet::zero()]);
    let horizontal = ratio(&d10(&form, &j.gamma)?.values(), MASK_OMEGA_H);
    let d1 = d_function(&m[0], &j.gamma)?.values().project(0, 1);
    let d2 = d_function(&m[1], &j.gamma)?.values().project(0, 1);
    let vertical = ratio(&d1.wedge(&d2)?.wedge(&j.beta_form().values())?, MASK_OMEGA_V);
    Ok(horizontal + eps * vertical)
}

/// `ϰ_{μ,ε}` as a field, built from symbolic partials (consumes one order of budget).
pub fn varkappa_field(t: &PoissonTriple, mu: &[Field; 2], eps: f64) -> Result<Field, EvalError> {
    let hor = |f: &Field, i: usize| -> Result<Field, EvalError> {
        let mut s = f.partial(Var::base(i))?;
        for a in 0..3 {
            let g = t.gamma.component(i, a);
            if !g.is_zero() {
                s = s - g * f.partial(Var::fiber(a))?;
            }
        }
        Ok(s)
    };
    let mut out = hor(&mu[1], 0)? - hor(&mu[0], 1)?;
    if eps != 0.0 {
        let u: Vec<Field> = (0..3).map(|a| mu[0].partial(Var::fiber(a))).collect::<Result<_, _>>()?;
        let w: Vec<Field> = (0..3).map(|a| mu[1].partial(Var::fiber(a))).collect::<Result<_, _>>()?;
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let cross = &u[b] * &w[c] - &u[c] * &w[b];
            if !cross.is_zero() && !t.beta.beta[a].is_zero() {
                out = out + (&t.beta.beta[a] * cross) * eps;
            }
        }
    }
    Ok(out)
}

/// `1 − εκ(ϰ_{μ,ε} − c)` at `p`.
pub fn domain_indicator(t: &PoissonTriple, g: &GaugeData, p: &Point) -> Result<f64, GaugeError> {
    let k = t.kappa.value(p)?;
    let v = varkappa(t, &g.mu, g.epsilon, p)?;
    Ok(1.0 - g.epsilon * k * (v - g.c.value(p)?))
}

/// `(γ, κ, β) ↦ (γ, εκ, εβ)`.
pub fn scale(t: &PoissonTriple, eps: f64) -> PoissonTriple {
    t.scaled(eps)
}

/// Result of the ε-family: the transformed triple and the samples where it is defined.
#[derive(Clone, Debug)]
pub struct GaugedTriple {
    pub triple: PoissonTriple,
    /// `true` at samples where `|1 − εκ(ϰ − c)| > tol`.
    pub domain: Vec<bool>,
}

/// `(γ_ε, κ_ε, β)` with `(γ_ε)ᵢᵃ = γᵢᵃ + ε ε^{abc}(∂μᵢ/∂y^b)β_c` and `κ_ε = κ/(1 − εκ(ϰ_{μ,ε} − c))`.
pub fn family_triple(t: &PoissonTriple, g: &GaugeData) -> Result<PoissonTriple, EvalError> {
    if g.epsilon == 0.0 {
        return Ok(t.clone());
    }
    let xi = ConnectionShift::gauge(&t.beta.beta, &g.mu)?;
    let scaled = ConnectionShift { xi: xi.xi.map(|row| row.map(|f| f * g.epsilon)) };
    let gamma = t.gamma.shift(&scaled);
    let vk = varkappa_field(t, &g.mu, g.epsilon)?;
    let denom = Field::one() - (&t.kappa * (vk - &g.c)) * g.epsilon;
    let kappa = &t.kappa / denom;
    Ok(PoissonTriple::new(gamma, kappa, t.beta.clone()))
}

/// The ε-family restricted to `samples`; fails when the denominator vanishes at all of them.
pub fn family(t: &PoissonTriple, g: &GaugeData, samples: &[Point], tol: f64) -> Result<GaugedTriple, GaugeError> {
    let triple = family_triple(t, g)?;
    let domain: Vec<bool> = samples
        .iter()
        .map(|p| domain_indicator(t, g, p).map(|v| v.abs() > tol).unwrap_or(false))
        .collect();
    if !samples.is_empty() && !domain.iter().any(|&b| b) {
        return Err(GaugeError::EmptyDomain);
    }
    Ok(GaugedTriple { triple, domain })
}

/// `𝒯_{μ,c}`: the family at `ε = 1`.
pub fn gauge_transform(t: &PoissonTriple, g: &GaugeData, samples: &[Point], tol: f64) -> Result<GaugedTriple, GaugeError> {
    family(t, &g.with_epsilon(1.0), samples, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicRanks {
    pub first: usize,
    pub second: usize,
    pub joint: usize,
}

impl CharacteristicRanks {
    pub fn equal(&self) -> bool {
        self.first == self.second && self.second == self.joint
    }
}

fn rank_of(m: DMatrix<f64>) -> usize {
    let s = m.singular_values();
    let max = s.iter().fold(0.0f64, |a, &b| a.max(b));
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_THRESHOLD * max).count()
}

/// Ranks of the column spaces of `Π₁`, `Π₂` and `[Π₁ | Π₂]`.
pub fn characteristic_compare(a: &[[f64; 5]; 5], b: &[[f64; 5]; 5]) -> CharacteristicRanks {
    let ma = DMatrix::from_fn(5, 5, |i, j| a[i][j]);
    let mb = DMatrix::from_fn(5, 5, |i, j| b[i][j]);
    let joint = DMatrix::from_fn(5, 10, |i, j| if j < 5 { a[i][j] } else { b[i][j - 5] });
    CharacteristicRanks { first: rank_of(ma), second: rank_of(mb), joint: rank_of(joint) }
}

/// Characteristic comparison of `T` and its gauge image at a point of the domain.
pub fn characteristic_compare_at(
    t: &PoissonTriple,
    g: &GaugeData,
    gauged: &PoissonTriple,
    p: &Point,
    tol: f64,
) -> Result<CharacteristicRanks, GaugeError> {
    if domain_indicator(t, g, p)?.abs() <= tol {
        return Err(GaugeError::OutsideDomain(p.coords()));
    }
    let a = t.jets(p, 0)?.pi_values();
    let b = gauged.jets(p, 0)?.pi_values();
    Ok(characteristic_compare(&a, &b))
}

/// `|dΥ|` for `Υ = −dμ + c·Ω^H`, together with the size of the vertical part of `dc`.
pub fn upsilon_closedness(g: &GaugeData, p: &Point) -> Result<(f64, f64), GaugeError> {
    let flat = flat_gamma();
    let m: Vec<Jet> = g.mu.iter().map(|f| f.evaluate(p, 2)).collect::<Result<_, _>>()?;
    let mu = Graded::from_components(Kind::Form, Frame::Moving, [m[0], m[1], Jet::zero(), Jet::zero(), Jet::zero()]);
    let ddmu = exterior_d_jets(&exterior_d_jets(&mu, &flat)?, &flat)?.values();
    let dc = d_function(&g.c.evaluate(p, 1)?, &flat)?.values();
    let d_upsilon = dc.wedge(&omega_h::<f64>())? - ddmu;
    Ok((d_upsilon.max_abs(), dc.project(0, 1).max_abs()))
}

#[cfg(test)]
mod tests;
