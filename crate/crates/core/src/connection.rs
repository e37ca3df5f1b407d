//! Ehresmann connections on the trivial bundle `ℝ²ₓ × ℝ³ᵧ → ℝ²ₓ`.

use crate::coframe::{
    d10, d2m1, exterior_d_jets, gamma_jets, interior, omega_h, omega_v, q_h, q_v,
    vector_bracket_jets, CalculusError, Frame, GammaJets, Graded, Kind, X1, X2, Y1,
};
use crate::exprlang::{EvalError, Field, Jet, ParseError, Point, Var};

/// Levi-Civita symbol on `{0,1,2}`.
pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    if a == b || b == c || a == c {
        return 0.0;
    }
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        _ => -1.0,
    }
}

/// Components `γᵢᵃ` with `η^a = dy^a + γᵢᵃ dx^i` and `hor_i = ∂x_i − γᵢᵃ ∂y_a`.
#[derive(Clone, Debug, Default)]
pub struct Connection {
    pub gamma: [[Field; 3]; 2],
}

/// Vertical-valued 1-form `Ξ`, stored by `Ξ(∂x_i) = Ξᵢᵃ ∂y_a`.
#[derive(Clone, Debug, Default)]
pub struct ConnectionShift {
    pub xi: [[Field; 3]; 2],
}

impl Connection {
    pub fn new(gamma: [[Field; 3]; 2]) -> Connection {
        Connection { gamma }
    }

    pub fn flat() -> Connection {
        Connection::default()
    }

    pub fn parse(src: [[&str; 3]; 2]) -> Result<Connection, ParseError> {
        let mut gamma: [[Field; 3]; 2] = Default::default();
        for i in 0..2 {
            for a in 0..3 {
                gamma[i][a] = Field::parse(src[i][a])?;
            }
        }
        Ok(Connection { gamma })
    }

    pub fn component(&self, i: usize, a: usize) -> &Field {
        &self.gamma[i][a]
    }

    /// True when every component is the literal zero.
    pub fn is_trivial(&self) -> bool {
        self.gamma.iter().flatten().all(Field::is_zero)
    }

    pub fn budget(&self) -> u8 {
        crate::coframe::common_order(self.gamma.iter().flatten())
    }

    pub fn jets(&self, p: &Point, order: u8) -> Result<GammaJets, EvalError> {
        gamma_jets(&self.gamma, p, order)
    }

    /// `hor_i` in the coordinate frame.
    pub fn horizontal_lift(&self, i: usize) -> Graded<Field> {
        let mut v = Graded::multivector(Frame::Coordinate, &[i], Field::one());
        for a in 0..3 {
            v.set(1 << (Y1 + a), -&self.gamma[i][a]);
        }
        v
    }

    /// `θ = −(∂γᵢᵃ/∂y^a) dx^i` as a field-coefficient `(1,0)`-form.
    pub fn theta(&self) -> Result<Graded<Field>, EvalError> {
        let mut out = Graded::zero(Kind::Form, Frame::Moving);
        for i in 0..2 {
            let mut c = Field::zero();
            for a in 0..3 {
                c = c - self.gamma[i][a].partial(Var::fiber(a))?;
            }
            out.set(1 << i, c);
        }
        Ok(out)
    }

    /// The functions `ϱ^a`.
    pub fn rho_components(&self) -> Result<[Field; 3], EvalError> {
        let g = &self.gamma;
        let mut out: [Field; 3] = Default::default();
        for a in 0..3 {
            let mut r = g[0][a].partial(Var::X2)? - g[1][a].partial(Var::X1)?;
            for b in 0..3 {
                let yb = Var::fiber(b);
                r = r + &g[0][b] * g[1][a].partial(yb)? - &g[1][b] * g[0][a].partial(yb)?;
            }
            out[a] = r;
        }
        Ok(out)
    }

    /// `ϱ = −(ϱ¹η²³ + ϱ²η³¹ + ϱ³η¹²)` as a field-coefficient `(0,2)`-form.
    pub fn rho(&self) -> Result<Graded<Field>, EvalError> {
        Ok(rho_form(&self.rho_components()?))
    }

    /// `θᵢ` at `p` from the coordinate formula.
    pub fn theta_at(&self, p: &Point) -> Result<[f64; 2], EvalError> {
        let g = self.jets(p, 1)?;
        let t = theta_jets(&g)?;
        Ok([t[0].value, t[1].value])
    }

    /// `θᵢ` at `p` from `θ = −i_{Q_V} d₁₀Ω^V`.
    pub fn theta_via_volume(&self, p: &Point) -> Result<[f64; 2], CalculusError> {
        let g = self.jets(p, 1)?;
        let d = d10(&omega_v::<Jet>(), &g)?.values();
        let t = -interior(&q_v::<f64>(), &d)?;
        Ok([*t.coeff(1 << X1), *t.coeff(1 << X2)])
    }

    pub fn rho_at(&self, p: &Point) -> Result<[f64; 3], EvalError> {
        let g = self.jets(p, 1)?;
        let r = rho_jets(&g)?;
        Ok([r[0].value, r[1].value, r[2].value])
    }

    /// `ϱ` at `p` from `ϱ = i_{Q_H} d₂,₋₁Ω^V`.
    pub fn rho_via_volume(&self, p: &Point) -> Result<Graded<f64>, CalculusError> {
        let g = self.jets(p, 1)?;
        let d = d2m1(&omega_v::<Jet>(), &g)?.values();
        Ok(interior(&q_h::<f64>(), &d)?)
    }

    /// Vertical components of `Curv(∂x¹,∂x²) = [hor₁, hor₂]` (the lift of `[∂x¹,∂x²] = 0` drops out).
    pub fn curvature(&self, p: &Point) -> Result<[f64; 3], EvalError> {
        let g = self.jets(p, 1)?;
        curvature_jets(&g)
    }

    pub fn shift(&self, xi: &ConnectionShift) -> Connection {
        let mut gamma = self.gamma.clone();
        for i in 0..2 {
            for a in 0..3 {
                gamma[i][a] = &gamma[i][a] - &xi.xi[i][a];
            }
        }
        Connection { gamma }
    }
}

impl ConnectionShift {
    pub fn zero() -> ConnectionShift {
        ConnectionShift::default()
    }

    /// `Ξ = −P_β♯ ∘ (d₀₁μ)♭` for `μ = μᵢdx^i`, where `(d₀₁μ)♭(X) = i_X d₀₁μ` and `(P♯α)^ν = α_μP^{μν}`.
    pub fn gauge(beta: &[Field; 3], mu: &[Field; 2]) -> Result<ConnectionShift, EvalError> {
        // d₀₁μ = (∂μᵢ/∂y^b) η^b ∧ dx^i
        let mut d01mu = Graded::zero(Kind::Form, Frame::Moving);
        for i in 0..2 {
            for b in 0..3 {
                let c = mu[i].partial(Var::fiber(b))?;
                let m = Graded::form(Frame::Moving, &[Y1 + b, i], c);
                d01mu = d01mu + m;
            }
        }
        let mut xi: [[Field; 3]; 2] = Default::default();
        for i in 0..2 {
            let e = Graded::multivector(Frame::Moving, &[i], Field::one());
            let alpha = interior(&e, &d01mu).expect("degree 1 into degree 2");
            for a in 0..3 {
                let mut s = Field::zero();
                for b in 0..3 {
                    let pba = vertical_entry(beta, b, a);
                    if let Some(pba) = pba {
                        s = s + alpha.coeff(1 << (Y1 + b)) * pba;
                    }
                }
                xi[i][a] = -s;
            }
        }
        Ok(ConnectionShift { xi })
    }

    pub fn compose(&self, other: &ConnectionShift) -> ConnectionShift {
        let mut xi = self.xi.clone();
        for i in 0..2 {
            for a in 0..3 {
                xi[i][a] = &xi[i][a] + &other.xi[i][a];
            }
        }
        ConnectionShift { xi }
    }
}

/// `P^{ab} = ε^{abc}β_c` as a field, `None` on the diagonal.
pub fn vertical_entry(beta: &[Field; 3], a: usize, b: usize) -> Option<Field> {
    if a == b {
        return None;
    }
    let c = 3 - a - b;
    Some(&beta[c] * levi_civita(a, b, c))
}

/// `θᵢ = −Σ_a ∂γᵢᵃ/∂y^a`, one order below the input jets.
pub fn theta_jets(g: &GammaJets) -> Result<[Jet; 2], EvalError> {
    let mut out = [Jet::zero(); 2];
    for i in 0..2 {
        for a in 0..3 {
            if !g[i][a].is_zero() {
                out[i] = out[i] - d(&g[i][a], Var::fiber(a))?;
            }
        }
    }
    Ok(out)
}

/// `ϱ^a = ∂γ₁ᵃ/∂x² − ∂γ₂ᵃ/∂x¹ + γ₁ᵇ∂γ₂ᵃ/∂y^b − γ₂ᵇ∂γ₁ᵃ/∂y^b`.
pub fn rho_jets(g: &GammaJets) -> Result<[Jet; 3], EvalError> {
    let mut out = [Jet::zero(); 3];
    for a in 0..3 {
        let mut r = d(&g[0][a], Var::X2)? - d(&g[1][a], Var::X1)?;
        for b in 0..3 {
            let yb = Var::fiber(b);
            r = r + g[0][b] * d(&g[1][a], yb)? - g[1][b] * d(&g[0][a], yb)?;
        }
        out[a] = r;
    }
    Ok(out)
}

/// The `(0,2)`-form `−(r¹η²³ + r²η³¹ + r³η¹²)`.
pub fn rho_form<T: crate::coframe::Scalar>(r: &[T; 3]) -> Graded<T> {
    let mut out = Graded::zero(Kind::Form, Frame::Moving);
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        out = out + Graded::form(Frame::Moving, &[Y1 + b, Y1 + c], r[a].scale(-1.0));
    }
    out
}

/// `hor_i` as coordinate-frame vector jets.
pub fn hor_jets(g: &GammaJets, i: usize) -> [Jet; 5] {
    let mut v = [Jet::zero(); 5];
    v[i] = Jet::constant(1.0);
    for a in 0..3 {
        v[Y1 + a] = -g[i][a];
    }
    v
}

pub fn curvature_jets(g: &GammaJets) -> Result<[f64; 3], EvalError> {
    let b = vector_bracket_jets(&hor_jets(g, 0), &hor_jets(g, 1))?;
    Ok([b[2], b[3], b[4]])
}

/// Max-norms of `d₁₀Ω^V − θ∧Ω^V` and `d₂,₋₁Ω^V − Ω^H∧ϱ`.
pub fn f4_residuals(g: &GammaJets) -> Result<[f64; 2], CalculusError> {
    let vol = omega_v::<Jet>();
    let theta = theta_jets(g)?;
    let theta_form = Graded::from_components(
        Kind::Form,
        Frame::Moving,
        [theta[0], theta[1], Jet::zero(), Jet::zero(), Jet::zero()],
    );
    let r1 = d10(&vol, g)? - theta_form.wedge(&vol)?;
    let rho = rho_form(&rho_jets(g)?);
    let r2 = d2m1(&vol, g)? - omega_h::<Jet>().wedge(&rho)?;
    Ok([r1.values().max_abs(), r2.values().max_abs()])
}

/// Mismatch between `i_{Curv(∂x¹,∂x²)}Ω^V` and `−Ω^H(hor₁,hor₂)·ϱ`.
pub fn curvature_rho_residual(g: &GammaJets) -> Result<f64, CalculusError> {
    let c = curvature_jets(g)?;
    let curv = Graded::from_components(Kind::Multivector, Frame::Moving, [0.0, 0.0, c[0], c[1], c[2]]);
    let lhs = interior(&curv, &omega_v::<f64>())?;
    let r = rho_jets(g)?;
    let rho = rho_form(&[r[0].value, r[1].value, r[2].value]);
    let residual = lhs + rho;
    Ok(residual.max_abs())
}

/// `dη^a` is the full differential of the coframe; exposed for the bigrading tests.
pub fn d_eta_at(g: &GammaJets, a: usize) -> Result<Graded<f64>, CalculusError> {
    let eta = Graded::form(Frame::Moving, &[Y1 + a], Jet::constant(1.0));
    Ok(exterior_d_jets(&eta, g)?.values())
}

fn d(j: &Jet, v: Var) -> Result<Jet, EvalError> {
    j.partial(v).ok_or(EvalError::OrderBudgetExceeded {
        requested: j.order() + 1,
        budget: j.order(),
    })
}
