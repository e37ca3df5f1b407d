//! Modular vector fields of `Π` and unimodularity certificates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coframe::{
    d01, d10, d_function, hor_psi, interior, lie_derivative_jets, q_v, CalculusError, Frame,
    Graded, Kind, Y1,
};
use crate::connection::rho_form;
use crate::exprlang::{EvalError, Field, Jet, Point, Var};
use crate::generators::random_cubic;
use crate::report::{CheckResult, Stats, Tolerances, VerificationReport};
use crate::triple::{relative_gap, PoissonTriple};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModularError {
    #[error("volume factor vanishes (value {value:e}) at {point:?}")]
    ZeroVolumeFactor { value: f64, point: [f64; 5] },
    #[error("certificate is missing `{0}`")]
    MissingCertificate(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

impl From<crate::coframe::AlgebraError> for ModularError {
    fn from(e: crate::coframe::AlgebraError) -> Self {
        ModularError::Calculus(e.into())
    }
}

/// Candidate data for a unimodularity proof: a primitive `h` of `−θ`, a global factor `K`
/// and an optional fiberwise Casimir `κ₀` with `κ = e^h κ₀ K` on the coupling domain.
#[derive(Clone, Debug, Default)]
pub struct UnimodularityCertificate {
    pub h: Option<Field>,
    pub k: Option<Field>,
    pub kappa0: Option<Field>,
}

impl UnimodularityCertificate {
    pub fn new(h: Field, k: Option<Field>) -> UnimodularityCertificate {
        UnimodularityCertificate { h: Some(h), k, kappa0: None }
    }
}

fn density_jet(rho: &Field, p: &Point, order: u8) -> Result<Jet, ModularError> {
    let r = rho.evaluate(p, order)?;
    if r.value == 0.0 || !r.value.is_finite() {
        return Err(ModularError::ZeroVolumeFactor { value: r.value, point: p.coords() });
    }
    Ok(r)
}

/// `Z^ν = (1/ρ) Σ_λ ∂_λ(ρ Π^{νλ})`, the modular field of `Π` relative to `ρ·(chart volume)`.
pub fn modular_direct(t: &PoissonTriple, rho: &Field, p: &Point) -> Result<[f64; 5], ModularError> {
    let pi = t.jets(p, 1)?.pi();
    let r = density_jet(rho, p, 1)?;
    let mut z = [0.0; 5];
    for nu in 0..5 {
        for lam in 0..5 {
            let d = pi[nu][lam].partial(Var::from_index(lam)).ok_or(EvalError::OrderBudgetExceeded {
                requested: 2,
                budget: pi[nu][lam].order(),
            })?;
            z[nu] += d.value + r.grad[lam] / r.value * pi[nu][lam].value;
        }
    }
    Ok(z)
}

/// `Z` as order-1 jets at `p`; needs 2-jets of the triple and of `ρ`.
pub fn modular_jets(t: &PoissonTriple, rho: &Field, p: &Point) -> Result<[Jet; 5], ModularError> {
    let pi = t.jets(p, 2)?.pi();
    let r = density_jet(rho, p, 2)?;
    let log_grad: Vec<Jet> = (0..5).map(|k| r.d_index(k) / r).collect();
    let mut z = [Jet::zero().truncate(1); 5];
    for nu in 0..5 {
        for lam in 0..5 {
            z[nu] = z[nu] + pi[nu][lam].d_index(lam) + log_grad[lam] * pi[nu][lam].truncate(1);
        }
    }
    Ok(z)
}

/// `max |L_Z Π|` for the chart-volume modular field.
pub fn modular_lie_residual(t: &PoissonTriple, p: &Point) -> Result<f64, ModularError> {
    let z = modular_jets(t, &Field::one(), p)?;
    let pi = t.jets(p, 2)?.pi();
    let l = lie_derivative_jets(&z, &pi)?;
    Ok(l.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `(Z₁₀ in the hor-frame, Z₀₁ in ∂y)` from `Z₁₀ = −i_{κθ+d₁₀κ} hor^γψ`, `Z₀₁ = i_{d₀₁β+κϱ} Q_V`.
pub fn modular_bigraded(t: &PoissonTriple, p: &Point) -> Result<([f64; 2], [f64; 3]), ModularError> {
    let j = t.jets(p, 1)?;
    let theta = j.theta()?;
    let dk = d_function(&j.kappa, &j.gamma)?.values();
    let mut alpha = Graded::zero(Kind::Form, Frame::Moving);
    for i in 0..2 {
        alpha.set(1 << i, j.kappa.value * theta[i].value + dk.coeff(1 << i));
    }
    let z10 = -interior(&alpha, &hor_psi::<f64>())?;
    let dbeta = d01(&j.beta_form(), &j.gamma)?.values();
    let rho = j.rho()?;
    let rho = rho_form(&rho.map(|r| r.value));
    let z01 = interior(&(dbeta + rho.scale(j.kappa.value)), &q_v::<f64>())?;
    Ok((
        [*z10.coeff(1), *z10.coeff(2)],
        [0, 1, 2].map(|a| *z01.coeff(1 << (Y1 + a))),
    ))
}

/// The bigraded modular field converted to coordinates.
pub fn modular_bigraded_coordinate(t: &PoissonTriple, p: &Point) -> Result<[f64; 5], ModularError> {
    let (h, v) = modular_bigraded(t, p)?;
    let g = t.jets(p, 0)?.gamma_values();
    let moving = Graded::from_components(Kind::Multivector, Frame::Moving, [h[0], h[1], v[0], v[1], v[2]]);
    Ok(moving.convert(Frame::Coordinate, &g).components())
}

/// Coordinate vector re-expressed in the moving frame of `gamma`.
pub fn to_moving(z: &[f64; 5], gamma: &[[f64; 3]; 2]) -> [f64; 5] {
    Graded::from_components(Kind::Multivector, Frame::Coordinate, *z)
        .convert(Frame::Moving, gamma)
        .components()
}

/// `max |Z^{aΩ} − (Z^Ω − (1/a) i_{da}Π)|`.
pub fn renormalization_residual(t: &PoissonTriple, a: &Field, p: &Point) -> Result<f64, ModularError> {
    let za = modular_direct(t, a, p)?;
    let z1 = modular_direct(t, &Field::one(), p)?;
    let aj = density_jet(a, p, 1)?;
    let pi = t.jets(p, 0)?.pi_values();
    let mut worst = 0.0f64;
    for nu in 0..5 {
        let ida: f64 = (0..5).map(|l| aj.grad[l] * pi[l][nu]).sum();
        worst = worst.max((za[nu] - (z1[nu] - ida / aj.value)).abs());
    }
    Ok(worst)
}

/// Closedness residuals; the θ checks are `None` when `d₀₁β` fails or `p` is outside the coupling domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Closedness {
    pub d_beta: f64,
    pub theta_casimir: Option<f64>,
    pub d_theta: Option<f64>,
}

pub fn closedness_check(t: &PoissonTriple, p: &Point, tol: f64, kappa_tol: f64) -> Result<Closedness, ModularError> {
    let j1 = t.jets(p, 1)?;
    let d_beta = d01(&j1.beta_form(), &j1.gamma)?.values().max_abs();
    let mut out = Closedness { d_beta, theta_casimir: None, d_theta: None };
    if d_beta > tol || j1.kappa.value.abs() <= kappa_tol {
        return Ok(out);
    }
    let j = t.jets(p, 2)?;
    let theta = j.theta()?;
    let beta = j.beta_form().values();
    let mut cas = 0.0f64;
    for th in theta {
        let d = d01(&Graded::form(Frame::Moving, &[], th), &j.gamma)?.values();
        cas = cas.max(d.wedge(&beta).map_err(CalculusError::from)?.max_abs());
    }
    let theta_form = Graded::from_components(
        Kind::Form,
        Frame::Moving,
        [theta[0], theta[1], Jet::zero(), Jet::zero(), Jet::zero()],
    );
    out.theta_casimir = Some(cas);
    out.d_theta = Some(d10(&theta_form, &j.gamma)?.values().max_abs());
    Ok(out)
}

/// `div_ρ(X_F)` and the sum of magnitudes of the terms that make it up.
pub fn hamiltonian_divergence(t: &PoissonTriple, rho: &Field, f: &Field, p: &Point) -> Result<(f64, f64), ModularError> {
    let pi = t.jets(p, 1)?.pi();
    let r = density_jet(rho, p, 1)?;
    let fj = f.evaluate(p, 2)?;
    let df: Vec<Jet> = (0..5).map(|k| fj.d_index(k)).collect();
    let (mut div, mut mag) = (0.0, 0.0);
    for mu in 0..5 {
        for nu in 0..5 {
            let m = pi[nu][mu];
            let dm = m.partial(Var::from_index(mu)).map(|j| j.value).unwrap_or(0.0);
            let terms = [
                df[nu].grad[mu] * m.value,
                df[nu].value * dm,
                df[nu].value * m.value * r.grad[mu] / r.value,
            ];
            for v in terms {
                div += v;
                mag += v.abs();
            }
        }
    }
    Ok((div, mag))
}

/// Five coordinate functions and three seeded random cubics.
pub fn test_hamiltonians(seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Field> = Var::ALL.iter().map(|&v| Field::var(v)).collect();
    out.extend((0..3).map(|_| random_cubic(&mut rng)));
    out
}

/// Normalized divergence `|div|/(1 + Σ|terms|)`, maximized over the Hamiltonians.
fn divergence_residual(t: &PoissonTriple, rho: &Field, hs: &[Field], p: &Point) -> Result<f64, ModularError> {
    let mut worst = 0.0f64;
    for f in hs {
        let (d, mag) = hamiltonian_divergence(t, rho, f, p)?;
        worst = worst.max(d.abs() / (1.0 + mag));
    }
    Ok(worst)
}

#[derive(Default)]
struct CouplingStats {
    cl1: Stats,
    theta_exact: Stats,
    h_casimir: Stats,
    divergence: Stats,
}

/// Checks `h` against the coupling-domain criterion at the samples with `|κ| > κ_tol`.
pub fn unimod_coupling_check(
    t: &PoissonTriple,
    cert: &UnimodularityCertificate,
    samples: &[Point],
    tol: &Tolerances,
    kappa_tol: f64,
    seed: u64,
) -> Result<VerificationReport, ModularError> {
    let h = cert.h.clone().ok_or(ModularError::MissingCertificate("h"))?;
    let hs = test_hamiltonians(seed);
    let rho = h.exp() * t.kappa.recip();
    let per_point: Vec<Result<Option<[f64; 4]>, ModularError>> = samples
        .par_iter()
        .map(|p| {
            let j = t.jets(p, 1)?;
            if j.kappa.value.abs() <= kappa_tol {
                return Ok(None);
            }
            let cl1 = d01(&j.beta_form(), &j.gamma)?.values().max_abs();
            let theta = j.theta()?;
            let hj = h.evaluate(p, 1)?;
            let dh = d_function(&hj, &j.gamma)?.values();
            let a = (0..2).fold(0.0f64, |m, i| m.max((theta[i].value + dh.coeff(1 << i)).abs()));
            let b = dh.project(0, 1).wedge(&j.beta_form().values()).map_err(CalculusError::from)?.max_abs();
            let c = divergence_residual(t, &rho, &hs, p)?;
            Ok(Some([cl1, a, b, c]))
        })
        .collect();
    let mut s = CouplingStats::default();
    for (p, r) in samples.iter().zip(per_point) {
        match r {
            Ok(Some([cl1, a, b, c])) => {
                s.cl1.push(cl1, p);
                s.theta_exact.push(a, p);
                s.h_casimir.push(b, p);
                s.divergence.push(c, p);
            }
            Ok(None) => {
                s.cl1.skip();
                s.theta_exact.skip();
                s.h_casimir.skip();
                s.divergence.skip();
            }
            Err(ModularError::ZeroVolumeFactor { .. }) | Err(ModularError::Eval(EvalError::Domain { .. })) => {
                s.divergence.skip();
            }
            Err(e) => return Err(e),
        }
    }
    let mut rep = VerificationReport::new();
    let cl1 = s.cl1.finish("closed_beta", tol.identity);
    let cl1_failed = cl1.verdict == crate::report::Verdict::Fail;
    rep.push(cl1);
    if cl1_failed {
        for id in ["theta_exact", "h_casimir", "coupling_divergence"] {
            rep.push(CheckResult::skipped(id, "d01 beta does not vanish on the samples"));
        }
        return Ok(rep);
    }
    rep.push(s.theta_exact.finish("theta_exact", tol.identity));
    rep.push(s.h_casimir.finish("h_casimir", tol.identity));
    rep.push(s.divergence.finish("coupling_divergence", tol.divergence));
    Ok(rep)
}

/// Global criterion: the coupling-domain check plus `κ = e^h κ₀ K`, `K` Casimir on `Z(κ)` and
/// `div_{1/K}(X_F) = 0` at every sample.
pub fn unimod_global_check(
    t: &PoissonTriple,
    cert: &UnimodularityCertificate,
    samples: &[Point],
    tol: &Tolerances,
    kappa_tol: f64,
    seed: u64,
) -> Result<VerificationReport, ModularError> {
    let k = cert.k.clone().ok_or(ModularError::MissingCertificate("K"))?;
    let h = cert.h.clone().ok_or(ModularError::MissingCertificate("h"))?;
    for p in samples {
        density_jet(&k, p, 0)?;
    }
    let mut rep = unimod_coupling_check(t, cert, samples, tol, kappa_tol, seed)?;
    let kappa0 = cert.kappa0.clone().unwrap_or_else(Field::one);
    let factor = h.exp() * kappa0 * &k;
    let hs = test_hamiltonians(seed);
    let rho = k.recip();
    let per_point: Vec<Result<(Option<f64>, Option<f64>, f64), ModularError>> = samples
        .par_iter()
        .map(|p| {
            let j = t.jets(p, 1)?;
            let kv = j.kappa.value;
            let fact = if kv.abs() > kappa_tol {
                Some((kv - factor.value(p)?).abs() / (1.0 + kv.abs()))
            } else {
                None
            };
            let cas = if kv.abs() <= kappa_tol {
                let dk = d_function(&k.evaluate(p, 1)?, &j.gamma)?.values();
                Some(dk.project(0, 1).wedge(&j.beta_form().values()).map_err(CalculusError::from)?.max_abs())
            } else {
                None
            };
            Ok((fact, cas, divergence_residual(t, &rho, &hs, p)?))
        })
        .collect();
    let (mut fs, mut cs, mut ds) = (Stats::new(), Stats::new(), Stats::new());
    for (p, r) in samples.iter().zip(per_point) {
        let (f, c, d) = r?;
        match f {
            Some(v) => fs.push(v, p),
            None => fs.skip(),
        }
        match c {
            Some(v) => cs.push(v, p),
            None => cs.skip(),
        }
        ds.push(d, p);
    }
    rep.push(fs.finish("kappa_factorization", tol.identity));
    rep.push(cs.finish("k_casimir_on_zero_set", tol.identity));
    rep.push(ds.finish("global_divergence", tol.divergence));
    Ok(rep)
}

/// Agreement of the two modular-field routes at `p`, relative to `1 + |Z|`.
pub fn modular_route_gap(t: &PoissonTriple, p: &Point) -> Result<f64, ModularError> {
    let a = modular_direct(t, &Field::one(), p)?;
    let b = modular_bigraded_coordinate(t, p)?;
    Ok((0..5).fold(0.0f64, |m, k| m.max(relative_gap(a[k], -b[k]))))
}
