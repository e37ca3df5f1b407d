//! Poisson triples `(γ, κ, β)` and the almost-coupling bivector `Π = κ·hor₁∧hor₂ + P_β`.

use rayon::prelude::*;

use crate::coframe::{
    bivector_from_matrix, bivector_matrix, common_order, d01, d10, d_function, hor_psi, interior,
    lie_derivative_jets, omega_h, omega_v, q_v, ratio, schouten_jets, trivector_indices,
    AlgebraError, BivectorJets, CalculusError, Frame, GammaJets, Graded, Kind, MASK_OMEGA_H,
    MASK_OMEGA_V, X1, X2, Y1,
};
use crate::connection::{curvature_jets, hor_jets, levi_civita, rho_form, rho_jets, theta_jets, Connection};
use crate::exprlang::{EvalError, Field, Jet, ParseError, Point, Var};
use crate::report::{Stats, VerificationReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TripleError {
    #[error("bivector is not almost coupling: |Π₁₁| reaches {residual:e} at {point:?}")]
    NotAlmostCoupling { residual: f64, point: [f64; 5] },
    #[error("point {point:?} lies outside the coupling domain (κ = {kappa:e})")]
    OutsideCouplingDomain { kappa: f64, point: [f64; 5] },
    #[error("connection is not flat: curvature reaches {residual:e} at {point:?}")]
    NotFlat { residual: f64, point: [f64; 5] },
    #[error("β does not define a Poisson tensor: residual {residual:e} at {point:?}")]
    NotVerticalPoisson { residual: f64, point: [f64; 5] },
    #[error("connection does not preserve P_β: residual {residual:e} at {point:?}")]
    NotPoissonConnection { residual: f64, point: [f64; 5] },
    #[error("κ₀ is not a Casimir of P_β: residual {residual:e} at {point:?}")]
    NotCasimir { residual: f64, point: [f64; 5] },
    #[error("section component s{index} depends on fiber coordinates")]
    SectionNotBasic { index: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

impl From<AlgebraError> for TripleError {
    fn from(e: AlgebraError) -> Self {
        TripleError::Calculus(e.into())
    }
}

/// `β = β_a η^a`.
#[derive(Clone, Debug, Default)]
pub struct VerticalOneForm {
    pub beta: [Field; 3],
}

impl VerticalOneForm {
    pub fn new(beta: [Field; 3]) -> VerticalOneForm {
        VerticalOneForm { beta }
    }

    pub fn parse(src: [&str; 3]) -> Result<VerticalOneForm, ParseError> {
        Ok(VerticalOneForm {
            beta: [Field::parse(src[0])?, Field::parse(src[1])?, Field::parse(src[2])?],
        })
    }

    pub fn form(&self) -> Graded<Field> {
        let mut f = Graded::zero(Kind::Form, Frame::Moving);
        for a in 0..3 {
            f.set(1 << (Y1 + a), self.beta[a].clone());
        }
        f
    }

    pub fn jets(&self, p: &Point, order: u8) -> Result<[Jet; 3], EvalError> {
        let mut out = [Jet::zero(); 3];
        for a in 0..3 {
            if !self.beta[a].is_zero() {
                out[a] = self.beta[a].evaluate(p, order)?;
            }
        }
        Ok(out)
    }
}

/// Connection, scalar factor and vertical 1-form.
#[derive(Clone, Debug, Default)]
pub struct PoissonTriple {
    pub gamma: Connection,
    pub kappa: Field,
    pub beta: VerticalOneForm,
}

/// A section `y = s(x)` of the bundle.
#[derive(Clone, Debug)]
pub struct Section {
    pub s: [Field; 3],
}

impl Section {
    pub fn new(s: [Field; 3]) -> Result<Section, TripleError> {
        for (k, f) in s.iter().enumerate() {
            if (0..3).any(|a| f.depends_on(Var::fiber(a))) {
                return Err(TripleError::SectionNotBasic { index: k + 1 });
            }
        }
        Ok(Section { s })
    }

    pub fn constant(y: [f64; 3]) -> Section {
        Section {
            s: y.map(Field::constant),
        }
    }
}

/// `P_β = −i_β Q_V = β₁∂y²∧∂y³ + β₂∂y³∧∂y¹ + β₃∂y¹∧∂y²`, returned in the coordinate frame.
pub fn vertical_poisson(beta: &VerticalOneForm) -> Graded<Field> {
    let p = -interior(&beta.form(), &q_v::<Field>()).expect("1-form into trivector");
    let zero: [[Field; 3]; 2] = Default::default();
    p.convert(Frame::Coordinate, &zero)
}

/// Pointwise data of a triple: the jets of every component at one point.
#[derive(Clone, Debug)]
pub struct TripleJets {
    pub point: Point,
    pub gamma: GammaJets,
    pub kappa: Jet,
    pub beta: [Jet; 3],
}

/// Residuals of the three integrability conditions at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IcResiduals {
    pub ic1: f64,
    pub ic2: [[f64; 3]; 2],
    pub ic3: [f64; 3],
}

impl IcResiduals {
    pub fn max(&self) -> f64 {
        self.ic2
            .iter()
            .flatten()
            .chain(self.ic3.iter())
            .fold(self.ic1.abs(), |m, v| m.max(v.abs()))
    }
}

fn d(j: &Jet, v: Var) -> Result<Jet, EvalError> {
    j.partial(v).ok_or(EvalError::OrderBudgetExceeded {
        requested: j.order() + 1,
        budget: j.order(),
    })
}

/// `|a + b| / (1 + |a| + |b|)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a + b).abs() / (1.0 + a.abs() + b.abs())
}

impl PoissonTriple {
    pub fn new(gamma: Connection, kappa: Field, beta: VerticalOneForm) -> PoissonTriple {
        PoissonTriple { gamma, kappa, beta }
    }

    pub fn parse(gamma: [[&str; 3]; 2], kappa: &str, beta: [&str; 3]) -> Result<PoissonTriple, ParseError> {
        Ok(PoissonTriple {
            gamma: Connection::parse(gamma)?,
            kappa: Field::parse(kappa)?,
            beta: VerticalOneForm::parse(beta)?,
        })
    }

    /// Largest jet order every component supports.
    pub fn budget(&self) -> u8 {
        common_order(
            self.gamma
                .gamma
                .iter()
                .flatten()
                .chain(std::iter::once(&self.kappa))
                .chain(self.beta.beta.iter()),
        )
    }

    pub fn jets(&self, p: &Point, order: u8) -> Result<TripleJets, EvalError> {
        Ok(TripleJets {
            point: *p,
            gamma: self.gamma.jets(p, order)?,
            kappa: if self.kappa.is_zero() { Jet::zero() } else { self.kappa.evaluate(p, order)? },
            beta: self.beta.jets(p, order)?,
        })
    }

    pub fn vertical_poisson(&self) -> Graded<Field> {
        vertical_poisson(&self.beta)
    }

    /// `Π = κ·hor₁∧hor₂ + P_β` in the coordinate frame, built by frame conversion.
    pub fn assemble_pi(&self) -> Graded<Field> {
        let moving = hor_psi::<Field>().times(&self.kappa) + self.moving_vertical();
        moving.convert(Frame::Coordinate, &self.gamma.gamma)
    }

    fn moving_vertical(&self) -> Graded<Field> {
        -interior(&self.beta.form(), &q_v::<Field>()).expect("1-form into trivector")
    }

    pub fn jacobiator(&self, p: &Point) -> Result<[f64; 10], EvalError> {
        self.jets(p, 1)?.jacobiator()
    }

    pub fn ic_residuals(&self, p: &Point) -> Result<IcResiduals, EvalError> {
        self.jets(p, 1)?.ic_residuals()
    }

    /// `{f,g} = κ (d₁₀f∧d₁₀g)/Ω^H + (d₀₁f∧d₀₁g∧β)/Ω^V`.
    pub fn poisson_bracket(&self, f: &Field, g: &Field, p: &Point) -> Result<f64, TripleError> {
        let t = self.jets(p, 0)?;
        let gm = self.gamma.jets(p, 1)?;
        let df = d_function(&f.evaluate(p, 1)?, &gm)?.values();
        let dg = d_function(&g.evaluate(p, 1)?, &gm)?.values();
        let hor = df.project(1, 0).wedge(&dg.project(1, 0))?;
        let beta = t.beta_form().values();
        let ver = df.project(0, 1).wedge(&dg.project(0, 1))?.wedge(&beta)?;
        Ok(t.kappa.value * ratio(&hor, MASK_OMEGA_H) + ratio(&ver, MASK_OMEGA_V))
    }

    /// `Π(df, dg) = ∂_μf Π^{μν} ∂_νg` from the assembled coordinate matrix.
    pub fn bracket_via_pi(&self, f: &Field, g: &Field, p: &Point) -> Result<f64, EvalError> {
        let m = self.jets(p, 0)?.pi();
        let jf = f.evaluate(p, 1)?;
        let jg = g.evaluate(p, 1)?;
        let mut s = 0.0;
        for mu in 0..5 {
            for nu in 0..5 {
                s += jf.grad[mu] * m[mu][nu].value * jg.grad[nu];
            }
        }
        Ok(s)
    }

    /// `X_F = i_{dF}Π`, i.e. `X_F^ν = ∂_μF Π^{μν}`, as a field in the coordinate frame.
    pub fn hamiltonian_field(&self, f: &Field) -> Result<Graded<Field>, EvalError> {
        let m = bivector_matrix(&self.assemble_pi());
        let grads: Vec<Field> = Var::ALL.iter().map(|&v| f.partial(v)).collect::<Result<_, _>>()?;
        let mut comps: [Field; 5] = Default::default();
        for nu in 0..5 {
            let mut c = Field::zero();
            for mu in 0..5 {
                if !m[mu][nu].is_zero() && !grads[mu].is_zero() {
                    c = c + &grads[mu] * &m[mu][nu];
                }
            }
            comps[nu] = c;
        }
        Ok(Graded::from_components(Kind::Multivector, Frame::Coordinate, comps))
    }

    /// `X_F` at `p` from the coordinate matrix.
    pub fn hamiltonian_at(&self, f: &Field, p: &Point) -> Result<[f64; 5], EvalError> {
        let m = self.jets(p, 0)?.pi();
        let jf = f.evaluate(p, 1)?;
        Ok(hamiltonian_vector(&m, &jf.grad))
    }

    /// `X_F` at `p` from `κ i_{d₁₀F} hor^γψ − i_{d₀₁F∧β} Q_V`, converted to coordinates.
    pub fn hamiltonian_bigraded_at(&self, f: &Field, p: &Point) -> Result<[f64; 5], TripleError> {
        let t = self.jets(p, 0)?;
        let gm = self.gamma.jets(p, 1)?;
        let df = d_function(&f.evaluate(p, 1)?, &gm)?.values();
        let x10 = interior(&df.project(1, 0), &hor_psi::<f64>())?.scale(t.kappa.value);
        let x01 = -interior(&df.project(0, 1).wedge(&t.beta_form().values())?, &q_v::<f64>())?;
        let g = t.gamma_values();
        Ok((x10 + x01).convert(Frame::Coordinate, &g).components())
    }

    /// Max-norms of `κ d₁₀c` and `d₀₁c ∧ β`.
    pub fn casimir_residual(&self, c: &Field, p: &Point) -> Result<[f64; 2], TripleError> {
        let t = self.jets(p, 0)?;
        let gm = self.gamma.jets(p, 1)?;
        let dc = d_function(&c.evaluate(p, 1)?, &gm)?.values();
        let r1 = dc.project(1, 0).scale(t.kappa.value).max_abs();
        let r2 = dc.project(0, 1).wedge(&t.beta_form().values())?.max_abs();
        Ok([r1, r2])
    }

    pub fn coupling_domain_guard(&self, p: &Point, kappa_tol: f64) -> Result<f64, TripleError> {
        let k = self.kappa.value(p)?;
        if k.abs() > kappa_tol {
            Ok(k)
        } else {
            Err(TripleError::OutsideCouplingDomain { kappa: k, point: p.coords() })
        }
    }

    /// `max_u |L_{hor u}P_β|` over `u ∈ {∂x¹, ∂x²}`.
    pub fn poisson_connection_residual(&self, p: &Point, kappa_tol: f64) -> Result<f64, TripleError> {
        self.coupling_domain_guard(p, kappa_tol)?;
        Ok(self.jets(p, 1)?.poisson_connection_residual()?)
    }

    /// `|⟦Q_H, P_β⟧|`.
    pub fn cocycle_residual(&self, p: &Point, kappa_tol: f64) -> Result<f64, TripleError> {
        self.coupling_domain_guard(p, kappa_tol)?;
        Ok(self.jets(p, 1)?.cocycle_residual()?)
    }

    /// Relative gap between `Curv(∂x¹,∂x²)` and `−P_β♯ d(1/κ)`.
    pub fn curvature_identity_residual(&self, p: &Point, kappa_tol: f64) -> Result<f64, TripleError> {
        self.coupling_domain_guard(p, kappa_tol)?;
        Ok(self.jets(p, 1)?.curvature_identity_residual()?)
    }

    /// `(1/κ) Ω^H` at a coupling-domain point.
    pub fn coupling_form(&self, p: &Point, kappa_tol: f64) -> Result<Graded<f64>, TripleError> {
        let k = self.coupling_domain_guard(p, kappa_tol)?;
        Ok(omega_h::<f64>().scale(1.0 / k))
    }

    /// `max_α |i_{i_αΠ₂₀}σ + α|` over `α ∈ {dx¹, dx²}`.
    pub fn coupling_form_residual(&self, p: &Point, kappa_tol: f64) -> Result<f64, TripleError> {
        let sigma = self.coupling_form(p, kappa_tol)?;
        let t = self.jets(p, 0)?;
        let pi20 = hor_psi::<f64>().scale(t.kappa.value);
        let mut worst = 0.0f64;
        for i in 0..2 {
            let alpha = Graded::form(Frame::Moving, &[i], 1.0);
            let v = interior(&alpha, &pi20)?;
            let r = interior(&v, &sigma)? + alpha;
            worst = worst.max(r.max_abs());
        }
        Ok(worst)
    }

    /// Rescaling `(γ, κ, β) ↦ (γ, εκ, εβ)`.
    pub fn scaled(&self, eps: f64) -> PoissonTriple {
        PoissonTriple {
            gamma: self.gamma.clone(),
            kappa: &self.kappa * eps,
            beta: VerticalOneForm::new(self.beta.beta.clone().map(|b| b * eps)),
        }
    }
}

/// `X^ν = g_μ Π^{μν}` for a gradient `g`.
pub fn hamiltonian_vector(m: &BivectorJets, grad: &[f64; 5]) -> [f64; 5] {
    let mut x = [0.0; 5];
    for nu in 0..5 {
        for mu in 0..5 {
            x[nu] += grad[mu] * m[mu][nu].value;
        }
    }
    x
}

/// `P^{ab} = ε^{abc}β_c` embedded in a `5×5` coordinate matrix.
pub fn p_beta_matrix(beta: &[Jet; 3]) -> BivectorJets {
    let mut m = [[Jet::zero(); 5]; 5];
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                let c = 3 - a - b;
                m[Y1 + a][Y1 + b] = beta[c].scale(levi_civita(a, b, c));
            }
        }
    }
    m
}

/// `κ·hor₁∧hor₂` as a coordinate matrix.
pub fn horizontal_matrix(g: &GammaJets, kappa: &Jet) -> BivectorJets {
    let mut m = [[Jet::zero(); 5]; 5];
    let mut set = |i: usize, j: usize, v: Jet| {
        m[i][j] = v;
        m[j][i] = -v;
    };
    set(X1, X2, *kappa);
    for b in 0..3 {
        set(X1, Y1 + b, -(*kappa * g[1][b]));
        set(X2, Y1 + b, *kappa * g[0][b]);
    }
    for a in 0..3 {
        for b in a + 1..3 {
            set(Y1 + a, Y1 + b, *kappa * (g[0][a] * g[1][b] - g[0][b] * g[1][a]));
        }
    }
    m
}

fn add_matrices(a: &BivectorJets, b: &BivectorJets) -> BivectorJets {
    let mut m = *a;
    for i in 0..5 {
        for j in 0..5 {
            m[i][j] = a[i][j] + b[i][j];
        }
    }
    m
}

/// Sum of absolute values of the terms entering the coordinate Schouten bracket; used to normalize it.
pub fn schouten_magnitude(a: &BivectorJets, b: &BivectorJets) -> f64 {
    let mut worst = 0.0f64;
    for (m, n, l) in trivector_indices() {
        let mut s = 0.0;
        for (u, v, w) in [(m, n, l), (n, l, m), (l, m, n)] {
            for r in 0..5 {
                let dr = Var::from_index(r);
                let db = b[v][w].partial(dr).map(|j| j.value).unwrap_or(0.0);
                let da = a[v][w].partial(dr).map(|j| j.value).unwrap_or(0.0);
                s += (a[u][r].value * db).abs() + (b[u][r].value * da).abs();
            }
        }
        worst = worst.max(s);
    }
    worst
}

impl TripleJets {
    pub fn gamma_values(&self) -> [[f64; 3]; 2] {
        [0, 1].map(|i| [0, 1, 2].map(|a| self.gamma[i][a].value))
    }

    pub fn beta_form(&self) -> Graded<Jet> {
        Graded::from_components(
            Kind::Form,
            Frame::Moving,
            [Jet::zero(), Jet::zero(), self.beta[0], self.beta[1], self.beta[2]],
        )
    }

    pub fn beta_norm(&self) -> f64 {
        self.beta.iter().map(|b| b.value * b.value).sum::<f64>().sqrt()
    }

    pub fn p_beta(&self) -> BivectorJets {
        p_beta_matrix(&self.beta)
    }

    pub fn pi_horizontal(&self) -> BivectorJets {
        horizontal_matrix(&self.gamma, &self.kappa)
    }

    /// `Q_H = −hor₁∧hor₂` as a coordinate matrix.
    pub fn q_h(&self) -> BivectorJets {
        horizontal_matrix(&self.gamma, &Jet::constant(-1.0))
    }

    /// Coordinate matrix of `Π`.
    pub fn pi(&self) -> BivectorJets {
        add_matrices(&self.pi_horizontal(), &self.p_beta())
    }

    pub fn pi_values(&self) -> [[f64; 5]; 5] {
        let m = self.pi();
        m.map(|row| row.map(|j| j.value))
    }

    /// `1 + ` the largest value or first partial among the components.
    pub fn scale(&self) -> f64 {
        let m = self
            .gamma
            .iter()
            .flatten()
            .chain(std::iter::once(&self.kappa))
            .chain(self.beta.iter())
            .fold(0.0f64, |m, j| m.max(j.magnitude()));
        1.0 + m
    }

    pub fn jacobiator(&self) -> Result<[f64; 10], EvalError> {
        let m = self.pi();
        schouten_jets(&m, &m)
    }

    pub fn jacobiator_max(&self) -> Result<f64, EvalError> {
        Ok(self.jacobiator()?.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn theta(&self) -> Result<[Jet; 2], EvalError> {
        theta_jets(&self.gamma)
    }

    pub fn rho(&self) -> Result<[Jet; 3], EvalError> {
        rho_jets(&self.gamma)
    }

    pub fn ic_residuals(&self) -> Result<IcResiduals, EvalError> {
        let b = &self.beta;
        let mut db = [[0.0; 5]; 3];
        for a in 0..3 {
            for k in 0..5 {
                db[a][k] = d(&b[a], Var::from_index(k))?.value;
            }
        }
        let mut dg = [[[0.0; 3]; 3]; 2];
        for i in 0..2 {
            for a in 0..3 {
                for c in 0..3 {
                    dg[i][a][c] = d(&self.gamma[i][a], Var::fiber(c))?.value;
                }
            }
        }
        let bv = [b[0].value, b[1].value, b[2].value];
        let mut out = IcResiduals::default();
        for (a, bb, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            out.ic1 += (db[a][Y1 + bb] - db[bb][Y1 + a]) * bv[c];
        }
        let k = self.kappa.value;
        for i in 0..2 {
            let div: f64 = (0..3).map(|c| dg[i][c][c]).sum();
            for a in 0..3 {
                let mut s = db[a][i];
                for c in 0..3 {
                    s -= self.gamma[i][c].value * db[a][Y1 + c];
                    s -= bv[c] * dg[i][c][a];
                }
                s += bv[a] * div;
                out.ic2[i][a] = k * s;
            }
        }
        let rho = self.rho()?;
        for (n, (a, bb, c)) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)].into_iter().enumerate() {
            let dk = |v: usize| d(&self.kappa, Var::fiber(v)).map(|j| j.value);
            out.ic3[n] = dk(a)? * bv[bb] - dk(bb)? * bv[a] + k * k * rho[c].value;
        }
        Ok(out)
    }

    pub fn poisson_connection_residual(&self) -> Result<f64, EvalError> {
        let pb = self.p_beta();
        let mut worst = 0.0f64;
        for i in 0..2 {
            let l = lie_derivative_jets(&hor_jets(&self.gamma, i), &pb)?;
            worst = l.iter().flatten().fold(worst, |m, v| m.max(v.abs()));
        }
        Ok(worst)
    }

    pub fn cocycle_residual(&self) -> Result<f64, EvalError> {
        let s = schouten_jets(&self.q_h(), &self.p_beta())?;
        Ok(s.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// `−P_β♯ d(1/κ)`, vertical components, with `(P♯α)^ν = α_μP^{μν}`.
    pub fn curvature_from_kappa(&self) -> Result<[f64; 3], EvalError> {
        Ok(self.curvature_from_kappa_terms()?.0)
    }

    /// `−P_β♯ d(1/κ)` together with the summed magnitudes of its terms.
    fn curvature_from_kappa_terms(&self) -> Result<([f64; 3], [f64; 3]), EvalError> {
        let k = self.kappa.value;
        let pb = self.p_beta();
        let (mut out, mut mag) = ([0.0; 3], [0.0; 3]);
        for b in 0..3 {
            for a in 0..3 {
                let dinv = -d(&self.kappa, Var::fiber(a))?.value / (k * k);
                let term = dinv * pb[Y1 + a][Y1 + b].value;
                out[b] -= term;
                mag[b] += term.abs();
            }
        }
        Ok((out, mag))
    }

    /// `|Curv + P_β♯ d(1/κ)|` per component, over `1 + |Curv| + Σ|terms|`.
    pub fn curvature_identity_residual(&self) -> Result<f64, EvalError> {
        let lhs = curvature_jets(&self.gamma)?;
        let (rhs, mag) = self.curvature_from_kappa_terms()?;
        Ok((0..3).fold(0.0f64, |m, a| m.max((lhs[a] - rhs[a]).abs() / (1.0 + lhs[a].abs() + mag[a]))))
    }

    /// `|d₁₀β + β∧θ|`.
    pub fn c2_residual(&self) -> Result<f64, CalculusError> {
        let beta = self.beta_form();
        let theta = self.theta()?;
        let theta_form = Graded::from_components(
            Kind::Form,
            Frame::Moving,
            [theta[0], theta[1], Jet::zero(), Jet::zero(), Jet::zero()],
        );
        let r = d10(&beta, &self.gamma)? + beta.wedge(&theta_form)?;
        Ok(r.values().max_abs())
    }

    /// `|d₀₁(1/κ)∧β + ϱ|` per component, over `1 + |ϱ| + |d₀₁(1/κ)|·|β|`.
    pub fn c3_residual(&self) -> Result<f64, CalculusError> {
        let inv = self.kappa.truncate(1).recip();
        let dinv = d01(&Graded::form(Frame::Moving, &[], inv), &self.gamma)?.values();
        let beta = self.beta_form().values();
        let lhs = dinv.wedge(&beta)?;
        let r = rho_jets(&self.gamma)?;
        let rho = rho_form(&[r[0].value, r[1].value, r[2].value]);
        let product = dinv.max_abs() * beta.max_abs();
        let mut worst = 0.0f64;
        for m in crate::coframe::masks_of_bidegree(0, 2) {
            let (a, b) = (*lhs.coeff(m), *rho.coeff(m));
            worst = worst.max((a + b).abs() / (1.0 + b.abs() + product));
        }
        Ok(worst)
    }

    /// `|(d₀₁κ)∧β|`.
    pub fn c5_residual(&self) -> Result<f64, CalculusError> {
        let dk = d01(&Graded::form(Frame::Moving, &[], self.kappa), &self.gamma)?;
        Ok(dk.wedge(&self.beta_form())?.values().max_abs())
    }

    /// Three verdicts at a coupling-domain point: curvature zero, `⟦Π₂₀,Π₂₀⟧ = 0`, `⟦Π₂₀,Π₀₂⟧ = 0`.
    pub fn flat_pair_verdicts(&self, tol: f64) -> Result<[bool; 3], EvalError> {
        let h = self.pi_horizontal();
        let v = self.p_beta();
        let curv = curvature_jets(&self.gamma)?;
        let curv_norm = curv.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let curv_scale: f64 = 1.0
            + self
                .gamma
                .iter()
                .flatten()
                .fold(0.0f64, |m, j| m.max(j.magnitude()).max(j.magnitude().powi(2)));
        let s_hh = schouten_jets(&h, &h)?;
        let s_hv = schouten_jets(&h, &v)?;
        let norm = |s: &[f64; 10], mag: f64| s.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (1.0 + mag);
        Ok([
            curv_norm / curv_scale <= tol,
            norm(&s_hh, schouten_magnitude(&h, &h)) <= tol,
            norm(&s_hv, schouten_magnitude(&h, &v)) <= tol,
        ])
    }

    /// `(κ, β)` read back from `Π` with `κ = −i_{Π₂₀}Ω^H`, `β = −i_{Π₀₂}Ω^V`.
    pub fn recover(&self, pi: &[[f64; 5]; 5], tol: f64) -> Result<(f64, [f64; 3]), TripleError> {
        recover_at(pi, &self.gamma_values(), tol, &self.point)
    }
}

/// Pointwise triple recovery from a coordinate matrix and connection values.
pub fn recover_at(
    pi: &[[f64; 5]; 5],
    gamma: &[[f64; 3]; 2],
    tol: f64,
    p: &Point,
) -> Result<(f64, [f64; 3]), TripleError> {
    let coord = bivector_from_matrix(pi, Frame::Coordinate);
    let moving = coord.convert(Frame::Moving, gamma);
    let mixed = moving.project(1, 1).max_abs();
    if mixed > tol {
        return Err(TripleError::NotAlmostCoupling { residual: mixed, point: p.coords() });
    }
    let k = -*interior(&moving.project(2, 0), &omega_h::<f64>())?.coeff(0);
    let b = -interior(&moving.project(0, 2), &omega_v::<f64>())?;
    Ok((k, [0, 1, 2].map(|a| *b.coeff(1 << (Y1 + a)))))
}

/// Field-level recovery: `κ` and `β` as derived fields, after checking `Π₁₁ = 0` on `samples`.
pub fn recover_triple(
    pi: &Graded<Field>,
    gamma: &Connection,
    samples: &[Point],
    tol: f64,
) -> Result<(Field, VerticalOneForm), TripleError> {
    let moving = pi.convert(Frame::Moving, &gamma.gamma);
    let mixed = moving.project(1, 1);
    for p in samples {
        let r = mixed.evaluate(p, 0)?.values().max_abs();
        if r > tol {
            return Err(TripleError::NotAlmostCoupling { residual: r, point: p.coords() });
        }
    }
    let k = -interior(&moving.project(2, 0), &omega_h::<Field>())?.coeff(0).clone();
    let b = -interior(&moving.project(0, 2), &omega_v::<Field>())?;
    Ok((k, VerticalOneForm::new([0, 1, 2].map(|a| b.coeff(1 << (Y1 + a)).clone()))))
}

/// Per-point result of the Jacobiator-versus-conditions comparison.
#[derive(Clone, Copy, Debug)]
pub struct EquivalencePoint {
    pub ic: f64,
    pub jacobiator: f64,
    pub scale: f64,
}

impl EquivalencePoint {
    pub fn ic_ok(&self, tol: f64) -> bool {
        self.ic <= tol * self.scale
    }

    pub fn jacobi_ok(&self, tol: f64) -> bool {
        self.jacobiator <= tol * self.scale
    }
}

pub fn equivalence_at(t: &PoissonTriple, p: &Point) -> Result<EquivalencePoint, EvalError> {
    let j = t.jets(p, 1)?;
    Ok(EquivalencePoint {
        ic: j.ic_residuals()?.max(),
        jacobiator: j.jacobiator_max()?,
        scale: j.scale(),
    })
}

/// Compares the integrability-condition verdict with the Jacobiator verdict at every sample.
///
/// Residuals are reported divided by the point's jet scale, so the stored maxima are
/// directly comparable with `tol`.
pub fn equivalence_check(t: &PoissonTriple, samples: &[Point], tol: f64) -> VerificationReport {
    let results: Vec<Result<EquivalencePoint, EvalError>> =
        samples.par_iter().map(|p| equivalence_at(t, p)).collect();
    let mut ic = Stats::new();
    let mut jac = Stats::new();
    let mut report = VerificationReport::new();
    for (p, r) in samples.iter().zip(results) {
        match r {
            Ok(e) => {
                ic.push_checked(e.ic / e.scale, e.ic_ok(tol), p);
                jac.push_checked(e.jacobiator / e.scale, e.jacobi_ok(tol), p);
                if e.ic_ok(tol) != e.jacobi_ok(tol) {
                    report.disagreements.push(p.coords());
                }
            }
            Err(_) => {
                ic.skip();
                jac.skip();
            }
        }
    }
    report.push(ic.finish_checked("integrability_conditions", tol));
    report.push(jac.finish_checked("jacobi_identity", tol));
    report
}

/// Poisson-submanifold test for the graph of `s` over the base points `xs`.
pub fn submanifold_check(t: &PoissonTriple, s: &Section, xs: &[[f64; 2]], tol: f64) -> VerificationReport {
    let mut horizontal = Stats::new();
    let mut vertical = Stats::new();
    for x in xs {
        let base = Point::new(x[0], x[1], 0.0, 0.0, 0.0);
        let sj: Result<Vec<Jet>, EvalError> = s.s.iter().map(|f| f.evaluate(&base, 1)).collect();
        let Ok(sj) = sj else {
            horizontal.skip();
            vertical.skip();
            continue;
        };
        let p = Point::new(x[0], x[1], sj[0].value, sj[1].value, sj[2].value);
        let Ok(j) = t.jets(&p, 0) else {
            horizontal.skip();
            vertical.skip();
            continue;
        };
        let h = j.pi_horizontal();
        let mut gap = 0.0f64;
        for i in 0..2 {
            // v = Π₂₀♯(dx^i); its component off the graph's tangent plane.
            let v: [f64; 5] = std::array::from_fn(|nu| h[i][nu].value);
            for a in 0..3 {
                let along: f64 = (0..2).map(|k| v[k] * sj[a].grad[k]).sum();
                gap = gap.max((v[Y1 + a] - along).abs());
            }
        }
        horizontal.push(gap, &p);
        vertical.push(j.beta.iter().fold(0.0f64, |m, b| m.max(b.value.abs())), &p);
    }
    let mut r = VerificationReport::new();
    r.push(horizontal.finish("submanifold_horizontal", tol));
    r.push(vertical.finish("submanifold_vertical", tol));
    r
}

/// Builds `(γ, κ₀, β)` after checking on `samples` that `γ` is flat, `P_β` is Poisson,
/// `γ` preserves `P_β` and `κ₀` is a Casimir of `P_β`.
pub fn flat_triple(
    gamma: Connection,
    kappa0: Field,
    beta: VerticalOneForm,
    samples: &[Point],
    tol: f64,
) -> Result<PoissonTriple, TripleError> {
    let t = PoissonTriple::new(gamma, kappa0, beta);
    let unit = PoissonTriple::new(t.gamma.clone(), Field::one(), t.beta.clone());
    let check = |worst: &mut (f64, Option<Point>), r: f64, p: &Point| {
        if r > worst.0 {
            *worst = (r, Some(*p));
        }
    };
    let mut curv = (0.0, None);
    let mut ic1 = (0.0, None);
    let mut conn = (0.0, None);
    let mut casimir = (0.0, None);
    for p in samples {
        let j = t.jets(p, 1)?;
        let scale = j.scale();
        let c = curvature_jets(&j.gamma)?;
        check(&mut curv, c.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale, p);
        let u = unit.jets(p, 1)?.ic_residuals()?;
        check(&mut ic1, u.ic1.abs() / scale, p);
        let ic2 = u.ic2.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        check(&mut conn, ic2 / scale, p);
        check(&mut casimir, j.c5_residual()? / scale, p);
    }
    let fail = |w: (f64, Option<Point>)| w.0 > tol;
    let at = |w: (f64, Option<Point>)| w.1.map(|p| p.coords()).unwrap_or_default();
    if fail(curv) {
        return Err(TripleError::NotFlat { residual: curv.0, point: at(curv) });
    }
    if fail(ic1) {
        return Err(TripleError::NotVerticalPoisson { residual: ic1.0, point: at(ic1) });
    }
    if fail(conn) {
        return Err(TripleError::NotPoissonConnection { residual: conn.0, point: at(conn) });
    }
    if fail(casimir) {
        return Err(TripleError::NotCasimir { residual: casimir.0, point: at(casimir) });
    }
    Ok(t)
}

/// Flat-pair check over a sample set: the three verdicts must coincide at every
/// coupling-domain sample. Returns the disagreement points and the number of flat verdicts.
pub fn flat_pair_check(t: &PoissonTriple, samples: &[Point], kappa_tol: f64, tol: f64) -> (Vec<[f64; 5]>, usize, usize) {
    let mut bad = Vec::new();
    let (mut flat, mut curved) = (0, 0);
    for p in samples {
        let Ok(j) = t.jets(p, 1) else { continue };
        if j.kappa.value.abs() <= kappa_tol {
            continue;
        }
        let Ok(v) = j.flat_pair_verdicts(tol) else { continue };
        if v[0] == v[1] && v[1] == v[2] {
            if v[0] {
                flat += 1;
            } else {
                curved += 1;
            }
        } else {
            bad.push(p.coords());
        }
    }
    (bad, flat, curved)
}

/// A 5×5 antisymmetric matrix as a pretty `Graded` value, for reports and tests.
pub fn pi_graded(m: &[[f64; 5]; 5]) -> Graded<f64> {
    bivector_from_matrix(m, Frame::Coordinate)
}

/// The residual family computed by `check` at one point; `None` marks an inapplicable check.
#[derive(Clone, Debug, Default)]
pub struct PointResiduals {
    pub in_coupling_domain: bool,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c5: Option<f64>,
    pub cocycle: Option<f64>,
    pub curvature_identity: Option<f64>,
    pub poisson_connection: Option<f64>,
}

impl TripleJets {
    /// Coupling-domain identities at this point, normalized by the jet scale where absolute.
    pub fn coupling_residuals(&self, kappa_tol: f64, boundary_tol: f64) -> Result<PointResiduals, CalculusError> {
        let k = self.kappa.value.abs();
        let scale = self.scale();
        let mut r = PointResiduals { in_coupling_domain: k > kappa_tol, ..Default::default() };
        if r.in_coupling_domain {
            r.c2 = Some(self.c2_residual()? / scale.powi(2));
            r.c3 = Some(self.c3_residual()?);
            r.cocycle = Some(self.cocycle_residual()? / scale.powi(3));
            r.curvature_identity = Some(self.curvature_identity_residual()?);
            r.poisson_connection = Some(self.poisson_connection_residual()? / scale.powi(2));
        }
        if k <= boundary_tol {
            r.c5 = Some(self.c5_residual()? / scale.powi(2));
        }
        Ok(r)
    }
}

/// `i_{Q_H}`-free check that `assemble_pi` has no `(1,1)` part in its own bigrading.
pub fn mixed_part(t: &PoissonTriple, p: &Point) -> Result<f64, EvalError> {
    let j = t.jets(p, 0)?;
    let coord = bivector_from_matrix(&j.pi_values(), Frame::Coordinate);
    Ok(coord.convert(Frame::Moving, &j.gamma_values()).project(1, 1).max_abs())
}

pub fn trivector_max(s: &[f64; 10]) -> f64 {
    s.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests;
