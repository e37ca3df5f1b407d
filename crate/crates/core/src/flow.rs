//! Fixed-step RK4 integration of Hamiltonian fields and conservation diagnostics.

use serde::{Deserialize, Serialize};

use crate::exprlang::{Field, Point};
use crate::modular::hamiltonian_divergence;
use crate::report::{CheckResult, Stats, VerificationReport};
use crate::triple::PoissonTriple;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 5]>,
    pub hamiltonian: String,
    pub dt: f64,
    pub method: String,
    /// Why integration stopped early, if it did.
    pub truncated: Option<String>,
    /// `max |x_dt(T) − x_{dt/2}(T)|` at the common final time, when both runs completed.
    pub error_estimate: Option<f64>,
}

fn field_at(t: &PoissonTriple, f: &Field, x: &[f64; 5]) -> Result<[f64; 5], String> {
    let v = t.hamiltonian_at(f, &Point::from_array(*x)).map_err(|e| e.to_string())?;
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(format!("non-finite vector field at {x:?}"))
    }
}

fn axpy(x: &[f64; 5], h: f64, k: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// One classical Runge–Kutta step.
pub fn rk4_step(t: &PoissonTriple, f: &Field, x: &[f64; 5], dt: f64) -> Result<[f64; 5], String> {
    let k1 = field_at(t, f, x)?;
    let k2 = field_at(t, f, &axpy(x, dt / 2.0, &k1))?;
    let k3 = field_at(t, f, &axpy(x, dt / 2.0, &k2))?;
    let k4 = field_at(t, f, &axpy(x, dt, &k3))?;
    Ok(std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

fn run(t: &PoissonTriple, f: &Field, p0: &Point, dt: f64, n: usize) -> (Vec<[f64; 5]>, Option<String>) {
    let mut states = Vec::with_capacity(n + 1);
    states.push(p0.coords());
    for k in 0..n {
        match rk4_step(t, f, &states[k], dt) {
            Ok(x) => states.push(x),
            Err(reason) => return (states, Some(format!("step {}: {reason}", k + 1))),
        }
    }
    (states, None)
}

/// `n` RK4 steps of `X_F` from `p0`, plus a step-halving error estimate at the final time.
pub fn integrate(t: &PoissonTriple, f: &Field, p0: &Point, dt: f64, n: usize) -> Result<Trajectory, FlowError> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(FlowError::InvalidStep(dt));
    }
    let (states, truncated) = run(t, f, p0, dt, n);
    let error_estimate = if truncated.is_none() {
        let (fine, fine_trunc) = run(t, f, p0, dt / 2.0, 2 * n);
        fine_trunc.is_none().then(|| {
            let (a, b) = (states.last().expect("non-empty"), fine.last().expect("non-empty"));
            (0..5).fold(0.0f64, |m, i| m.max((a[i] - b[i]).abs()))
        })
    } else {
        None
    };
    Ok(Trajectory {
        times: (0..states.len()).map(|k| k as f64 * dt).collect(),
        states,
        hamiltonian: f.to_string(),
        dt,
        method: "rk4".into(),
        truncated,
        error_estimate,
    })
}

/// Conservation diagnostics along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub f_drift: f64,
    pub casimir_drifts: Vec<f64>,
    /// Sign changes of `κ` between consecutive states with `|κ| > κ_tol`.
    pub kappa_sign_crossings: usize,
    /// `|∫ div_ρ(X_F) dt|` by the trapezoid rule, when a density is supplied.
    pub divergence_integral: Option<f64>,
}

fn max_drift(f: &Field, states: &[[f64; 5]]) -> f64 {
    let vals: Vec<f64> = states
        .iter()
        .map(|x| f.value(&Point::from_array(*x)).unwrap_or(f64::NAN))
        .collect();
    let v0 = vals[0];
    vals.iter().fold(0.0f64, |m, v| {
        let d = (v - v0).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    })
}

pub fn conservation_report(
    t: &PoissonTriple,
    traj: &Trajectory,
    f: &Field,
    casimirs: &[Field],
    density: Option<&Field>,
    kappa_tol: f64,
) -> ConservationReport {
    let kappas: Vec<f64> = traj
        .states
        .iter()
        .map(|x| t.kappa.value(&Point::from_array(*x)).unwrap_or(0.0))
        .collect();
    let crossings = kappas
        .windows(2)
        .filter(|w| w[0].abs() > kappa_tol && w[1].abs() > kappa_tol && w[0].signum() != w[1].signum())
        .count();
    let divergence_integral = density.map(|rho| {
        let vals: Vec<f64> = traj
            .states
            .iter()
            .map(|x| {
                hamiltonian_divergence(t, rho, f, &Point::from_array(*x))
                    .map(|(d, _)| d)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let integral: f64 = vals.windows(2).map(|w| 0.5 * (w[0] + w[1]) * traj.dt).sum();
        if integral.is_nan() {
            f64::INFINITY
        } else {
            integral.abs()
        }
    });
    ConservationReport {
        f_drift: max_drift(f, &traj.states),
        casimir_drifts: casimirs.iter().map(|c| max_drift(c, &traj.states)).collect(),
        kappa_sign_crossings: crossings,
        divergence_integral,
    }
}

impl ConservationReport {
    /// Check blocks with the conservation tolerance; `F` drift is informational.
    pub fn to_verification(&self, traj: &Trajectory, tol: f64, divergence_tol: f64) -> VerificationReport {
        let p = Point::from_array(*traj.states.last().expect("non-empty"));
        let mut r = VerificationReport::new();
        let single = |id: &str, v: f64, tol: f64| {
            let mut s = Stats::new();
            s.push(v, &p);
            s.finish(id, tol)
        };
        let mut f = single("hamiltonian_drift", self.f_drift, f64::INFINITY);
        f.note = Some("informational; RK4 drift is O(dt^4)".into());
        r.push(f);
        for (k, d) in self.casimir_drifts.iter().enumerate() {
            r.push(single(&format!("casimir_{}_drift", k + 1), *d, tol));
        }
        r.push(single("kappa_sign_crossings", self.kappa_sign_crossings as f64, 0.0));
        match self.divergence_integral {
            Some(v) => r.push(single("divergence_integral", v, divergence_tol)),
            None => r.push(CheckResult::skipped("divergence_integral", "no density supplied")),
        }
        if let Some(reason) = &traj.truncated {
            r.push(CheckResult::skipped("trajectory_complete", reason));
        }
        r
    }
}

/// CSV with columns `t,x1,x2,y1,y2,y3,F,casimir_1..k`.
pub fn trajectory_csv(traj: &Trajectory, f: &Field, casimirs: &[Field]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["t", "x1", "x2", "y1", "y2", "y3", "F"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=casimirs.len()).map(|k| format!("casimir_{k}")));
    w.write_record(&header)?;
    for (time, x) in traj.times.iter().zip(&traj.states) {
        let p = Point::from_array(*x);
        let mut row = vec![time.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        row.push(f.value(&p).map(|v| v.to_string()).unwrap_or_else(|_| "nan".into()));
        for c in casimirs {
            row.push(c.value(&p).map(|v| v.to_string()).unwrap_or_else(|_| "nan".into()));
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
