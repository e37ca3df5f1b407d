//! Verification campaigns behind the command-line subcommands.
//!
//! Each command returns a [`ReportDocument`]; the binary only handles files and exit codes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::coframe::{cochain_residuals, d01, CalculusError, Frame, Graded, X1, X2, Y1, Y2, Y3};
use crate::connection::{curvature_rho_residual, f4_residuals, rho_form};
use crate::exprlang::{EvalError, Field, Point};
use crate::flow::{conservation_report, integrate, trajectory_csv, FlowError};
use crate::gauge::{domain_indicator, GaugeError};
use crate::generators::{flat_casimir_triple, perturb, random_connection, BetaShape, Perturbation};
use crate::model::{builtin, ModelError, ModelFile, SELFTEST_MODELS};
use crate::modular::{
    modular_direct, modular_lie_residual, modular_route_gap, unimod_coupling_check,
    unimod_global_check, ModularError,
};
use crate::report::{CheckResult, ReportDocument, SampleDescription, Stats, Tolerances, VerificationReport};
use crate::strata::{kappa_tolerance, sample_box, strata_report, Generator, SampleSet};
use crate::triple::{equivalence_check, relative_gap, PointResiduals, PoissonTriple};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numeric domain error: {0}")]
    Domain(String),
}

impl CommandError {
    /// 2 for bad input, 3 for numeric domain failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Model(_) | CommandError::Input(_) => 2,
            CommandError::Domain(_) => 3,
        }
    }
}

impl From<GaugeError> for CommandError {
    fn from(e: GaugeError) -> Self {
        CommandError::Domain(e.to_string())
    }
}

impl From<ModularError> for CommandError {
    fn from(e: ModularError) -> Self {
        CommandError::Domain(e.to_string())
    }
}

fn description(s: &SampleSet) -> SampleDescription {
    let (generator, seed) = match s.generator {
        Generator::Grid { resolution } => (format!("grid({resolution})"), 0),
        Generator::Halton { seed, .. } => ("halton".to_string(), seed),
    };
    SampleDescription { generator, count: s.points.len(), seed, box_bounds: s.bounds }
}

fn document(
    name: &str,
    command: &str,
    tol: &Tolerances,
    samples: Option<&SampleSet>,
    rep: VerificationReport,
    data: serde_json::Value,
) -> ReportDocument {
    ReportDocument {
        model: name.to_string(),
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tolerances: *tol,
        samples: samples.map(description),
        checks: rep.checks,
        disagreements: rep.disagreements,
        data,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CheckOptions {
    /// Replaces the Halton sample count (or switches a grid to Halton with this count).
    pub samples: Option<usize>,
    /// Overrides the identity and oracle tolerances.
    pub tol: Option<f64>,
}

fn effective_tolerances(m: &ModelFile, tol: Option<f64>) -> Tolerances {
    let mut t = m.tolerances;
    if let Some(v) = tol {
        t.identity = v;
        t.oracle = v;
    }
    t
}

fn model_samples(m: &ModelFile, n: Option<usize>) -> Result<SampleSet, CommandError> {
    let generator = match (n, m.sampling.generator) {
        (None, g) => g,
        (Some(n), Generator::Halton { seed, .. }) => Generator::Halton { n, seed },
        (Some(n), Generator::Grid { .. }) => Generator::Halton { n, seed: 0 },
    };
    if matches!(generator, Generator::Halton { n: 0, .. }) {
        return Err(CommandError::Input("sample count must be positive".into()));
    }
    sample_box(m.sampling.bounds, generator).map_err(|e| CommandError::Input(e.to_string()))
}

/// The operative triple and the samples in its domain (all samples unless a `[gauge]` block is set).
fn operative(m: &ModelFile, samples: &SampleSet, tol: &Tolerances) -> Result<(PoissonTriple, SampleSet), CommandError> {
    let t = m.triple()?;
    let Some(g) = &m.gauge else { return Ok((t, samples.clone())) };
    let base = m.base_triple();
    let g = g.data();
    g.check_casimir(&base, &samples.points, tol.identity)?;
    let kept: Vec<Point> = samples
        .points
        .iter()
        .filter(|p| domain_indicator(&base, &g, p).map(|v| v.abs() > tol.kappa).unwrap_or(false))
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(GaugeError::EmptyDomain.into());
    }
    Ok((t, SampleSet { points: kept, ..samples.clone() }))
}

/// Fixed test forms for the cochain identities: the model's own `κ` and `β` plus a mixed 2-form.
fn cochain_test_form(t: &PoissonTriple) -> Graded<Field> {
    let mut f = Graded::form(Frame::Moving, &[], t.kappa.clone());
    for a in 0..3 {
        if !t.beta.beta[a].is_zero() {
            f = f + Graded::form(Frame::Moving, &[Y1 + a], t.beta.beta[a].clone());
        }
    }
    let p = |s: &str| Field::parse(s).expect("fixed test expression");
    f + Graded::form(Frame::Moving, &[X1], p("x2*y1*y3 + y2"))
        + Graded::form(Frame::Moving, &[X2, Y3], p("y1^3 + x1*y2"))
        + Graded::form(Frame::Moving, &[Y1, Y2], p("x1*x2 - y3^2"))
}

#[derive(Default)]
struct PointSuite {
    cochain: Option<f64>,
    f4: Option<f64>,
    theta_dual: Option<f64>,
    rho_dual: Option<f64>,
    curvature_rho: Option<f64>,
    residuals: Option<PointResiduals>,
    /// `Some(true)` when the three flat-pair verdicts coincide.
    flat_pair: Option<bool>,
}

fn optional<T>(r: Result<T, CalculusError>) -> Result<Option<T>, CalculusError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CalculusError::Eval(EvalError::OrderBudgetExceeded { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

fn point_suite(t: &PoissonTriple, test: &Graded<Field>, p: &Point, kappa_tol: f64, order2: bool) -> Result<PointSuite, CalculusError> {
    let mut s = PointSuite::default();
    if order2 {
        s.cochain = optional(cochain_residuals(&t.gamma.gamma, test, p).map(|r| r.iter().fold(0.0f64, |m, v| m.max(*v))))?;
        let g2 = t.gamma.jets(p, 2)?;
        s.f4 = optional(f4_residuals(&g2).map(|r| r[0].max(r[1])))?;
        s.curvature_rho = optional(curvature_rho_residual(&g2))?;
    }
    let a = t.gamma.theta_at(p)?;
    let b = t.gamma.theta_via_volume(p)?;
    s.theta_dual = Some(relative_gap(a[0], -b[0]).max(relative_gap(a[1], -b[1])));
    let r1 = rho_form(&t.gamma.rho_at(p)?);
    let r2 = t.gamma.rho_via_volume(p)?;
    s.rho_dual = Some((r1.clone() - r2.clone()).max_abs() / (1.0 + r1.max_abs() + r2.max_abs()));
    let order = if order2 { 2 } else { 1 };
    let j = t.jets(p, order)?;
    s.residuals = optional(j.coupling_residuals(kappa_tol, kappa_tol))?;
    if j.kappa.value.abs() > kappa_tol {
        s.flat_pair = j.flat_pair_verdicts(1e-9).ok().map(|v| v[0] == v[1] && v[1] == v[2]);
    }
    Ok(s)
}

fn suite_report(t: &PoissonTriple, points: &[Point], tol: &Tolerances, kappa_tol: f64) -> Result<VerificationReport, CommandError> {
    let order2 = t.budget() >= 2;
    let test = cochain_test_form(t);
    let per_point: Vec<Result<PointSuite, CalculusError>> =
        points.par_iter().map(|p| point_suite(t, &test, p, kappa_tol, order2)).collect();
    const IDS: [&str; 11] = [
        "cochain_identities",
        "f4_volume_identities",
        "theta_dual_formula",
        "rho_dual_formula",
        "curvature_rho_agreement",
        "c2_d10_beta",
        "c3_d01_inverse_kappa",
        "c5_zero_set",
        "cocycle",
        "curvature_identity",
        "poisson_connection",
    ];
    let mut stats: Vec<Stats> = IDS.iter().map(|_| Stats::new()).collect();
    let mut flat = Stats::new();
    let mut flat_bad = Vec::new();
    let mut evaluated = 0usize;
    let mut first_error = None;
    let put = |s: &mut Stats, v: Option<f64>, p: &Point| match v {
        Some(v) => s.push(v, p),
        None => s.skip(),
    };
    for (p, r) in points.iter().zip(per_point) {
        match r {
            Ok(s) => {
                evaluated += 1;
                let res = s.residuals.unwrap_or_default();
                let vals = [
                    s.cochain,
                    s.f4,
                    s.theta_dual,
                    s.rho_dual,
                    s.curvature_rho,
                    res.c2,
                    res.c3,
                    res.c5,
                    res.cocycle,
                    res.curvature_identity,
                    res.poisson_connection,
                ];
                for (st, v) in stats.iter_mut().zip(vals) {
                    put(st, v, p);
                }
                match s.flat_pair {
                    Some(ok) => {
                        flat.push(if ok { 0.0 } else { 1.0 }, p);
                        if !ok {
                            flat_bad.push(p.coords());
                        }
                    }
                    None => flat.skip(),
                }
            }
            Err(e) => {
                for st in stats.iter_mut() {
                    st.skip();
                }
                flat.skip();
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    if evaluated == 0 && !points.is_empty() {
        return Err(CommandError::Domain(first_error.unwrap_or_default()));
    }
    let mut rep = VerificationReport::new();
    for (k, (id, st)) in IDS.iter().zip(&stats).enumerate() {
        let tolerance = if (2..5).contains(&k) { tol.oracle } else { tol.identity };
        let mut c = st.finish(id, tolerance);
        if st.count == 0 {
            c = c.with_note(if k < 5 && !order2 && k != 2 && k != 3 {
                "needs second derivatives beyond the field budget"
            } else {
                "no applicable samples"
            });
        }
        rep.push(c);
    }
    let mut f = flat.finish("flat_pair_agreement", 0.0);
    if flat.count > 0 {
        f = f.with_note(format!("{} of {} coupling-domain samples disagree", flat_bad.len(), flat.count));
    }
    rep.push(f);
    rep.disagreements.extend(flat_bad);
    Ok(rep)
}

/// `check`: equivalence of the integrability conditions with Jacobi, plus every identity suite.
pub fn check(m: &ModelFile, opts: CheckOptions) -> Result<ReportDocument, CommandError> {
    let tol = effective_tolerances(m, opts.tol);
    let all = model_samples(m, opts.samples)?;
    let (t, samples) = operative(m, &all, &tol)?;
    let kappa_tol = kappa_tolerance(&t, &samples.points, tol.kappa);
    let mut rep = equivalence_check(&t, &samples.points, tol.identity);
    if rep.checks.iter().all(|c| c.samples == 0) {
        return Err(CommandError::Domain("the triple cannot be evaluated at any sample".into()));
    }
    rep.extend(suite_report(&t, &samples.points, &tol, kappa_tol)?);
    let data = json!({
        "kappa_tolerance": kappa_tol,
        "budget": t.budget(),
        "domain_samples": samples.points.len(),
        "box_samples": all.points.len(),
    });
    Ok(document(&m.name, "check", &tol, Some(&samples), rep, data))
}

/// `strata`: CSV point cloud and a report of label/SVD-rank agreement on a grid.
pub fn strata(m: &ModelFile, resolution: usize) -> Result<(String, ReportDocument), CommandError> {
    if resolution == 0 {
        return Err(CommandError::Input("grid resolution must be positive".into()));
    }
    let tol = m.tolerances;
    let all = sample_box(m.sampling.bounds, Generator::Grid { resolution }).map_err(|e| CommandError::Input(e.to_string()))?;
    let (t, samples) = operative(m, &all, &tol)?;
    let r = strata_report(&t, &samples, tol.kappa, tol.beta);
    let csv = r.to_csv().map_err(|e| CommandError::Input(e.to_string()))?;
    let mut rep = VerificationReport::new();
    let mut s = Stats::new();
    let disagreements = r.disagreements.len() as f64;
    if let Some(p) = samples.points.first() {
        s.push(disagreements, p);
    }
    rep.push(s.finish("strata_rank_agreement", 0.0).with_note(format!(
        "{} rows, {} skipped, {} disagreements outside tolerance bands",
        r.rows.len(),
        r.skipped,
        r.disagreements.len()
    )));
    rep.disagreements = r.disagreements.clone();
    let data = json!({ "counts": r.counts, "kappa_tolerance": r.kappa_tol, "beta_tolerance": r.beta_tol });
    Ok((csv, document(&m.name, "strata", &tol, Some(&samples), rep, data)))
}

/// `modular`: samples of the modular field and route agreement; with `certificate`, the
/// unimodularity criteria for the model's `[certificate]` block.
pub fn modular(m: &ModelFile, certificate: bool) -> Result<ReportDocument, CommandError> {
    let tol = m.tolerances;
    let all = model_samples(m, None)?;
    let (t, samples) = operative(m, &all, &tol)?;
    let kappa_tol = kappa_tolerance(&t, &samples.points, tol.kappa);
    let per_point: Vec<_> = samples
        .points
        .par_iter()
        .map(|p| -> Result<(f64, Option<f64>, [f64; 5], Option<f64>), ModularError> {
            let gap = modular_route_gap(&t, p)?;
            let lie = match modular_lie_residual(&t, p) {
                Ok(v) => Some(v),
                Err(ModularError::Eval(EvalError::OrderBudgetExceeded { .. })) => None,
                Err(e) => return Err(e),
            };
            let z = modular_direct(&t, &Field::one(), p)?;
            let j = t.jets(p, 1)?;
            let d_beta = d01(&j.beta_form(), &j.gamma).map_err(ModularError::from)?.values().max_abs();
            Ok((gap, lie, z, Some(d_beta)))
        })
        .collect();
    let (mut gap, mut lie, mut closed) = (Stats::new(), Stats::new(), Stats::new());
    let mut field_samples = Vec::new();
    for (p, r) in samples.points.iter().zip(per_point) {
        match r {
            Ok((g, l, z, c)) => {
                gap.push(g, p);
                match l {
                    Some(v) => lie.push(v, p),
                    None => lie.skip(),
                }
                if let Some(c) = c {
                    closed.push(c, p);
                }
                if field_samples.len() < 50 {
                    field_samples.push(json!({ "point": p.coords(), "modular_field": z }));
                }
            }
            Err(ModularError::Eval(EvalError::Domain { .. })) => {
                gap.skip();
                lie.skip();
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut rep = VerificationReport::new();
    rep.push(gap.finish("modular_route_agreement", tol.oracle));
    rep.push(lie.finish("modular_lie_derivative", tol.identity));
    let mut c = closed.finish("d01_beta_magnitude", f64::INFINITY);
    c.note = Some("informational; zero when the fiber 1-form is closed".into());
    rep.push(c);
    if certificate {
        let cert = m
            .unimodularity_certificate()?
            .ok_or_else(|| CommandError::Input("model has no [certificate] section".into()))?;
        let seed = m.sampling.seed();
        if cert.k.is_some() {
            rep.extend(unimod_global_check(&t, &cert, &samples.points, &tol, kappa_tol, seed)?);
        } else {
            rep.extend(unimod_coupling_check(&t, &cert, &samples.points, &tol, kappa_tol, seed)?);
        }
    }
    let data = json!({ "kappa_tolerance": kappa_tol, "modular_field_samples": field_samples });
    Ok(document(&m.name, "modular", &tol, Some(&samples), rep, data))
}

/// `gauge`: one transformed model per `ε`, each with its `check` report.
pub fn gauge(m: &ModelFile, epsilons: &[f64], opts: CheckOptions) -> Result<Vec<(ModelFile, ReportDocument)>, CommandError> {
    if m.gauge.is_none() {
        return Err(CommandError::Input("model has no [gauge] section with mu and c".into()));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !e.is_finite()) {
        return Err(CommandError::Input("epsilon values must be finite".into()));
    }
    epsilons
        .iter()
        .map(|&e| {
            let out = m.with_epsilon(e).expect("gauge section present");
            let mut doc = check(&out, opts)?;
            doc.command = "gauge".into();
            Ok((out, doc))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub hamiltonian: String,
    pub p0: [f64; 5],
    pub dt: f64,
    pub steps: usize,
    pub casimirs: Vec<String>,
}

/// `flow`: RK4 trajectory CSV plus conservation diagnostics. When the model carries a global
/// certificate, the divergence of `X_F` is accumulated against the density `1/K`.
pub fn flow(m: &ModelFile, o: &FlowOptions) -> Result<(String, ReportDocument), CommandError> {
    let tol = m.tolerances;
    let t = m.triple()?;
    let parse = |key: &str, s: &str| Field::parse(s).map_err(|e| CommandError::Input(format!("{key}: {e}")));
    let f = parse("hamiltonian", &o.hamiltonian)?;
    let casimirs: Vec<Field> = o.casimirs.iter().map(|s| parse("casimir", s)).collect::<Result<_, _>>()?;
    let traj = integrate(&t, &f, &Point::from_array(o.p0), o.dt, o.steps).map_err(|e| match e {
        FlowError::InvalidStep(_) => CommandError::Input(e.to_string()),
    })?;
    if traj.states.len() == 1 && o.steps > 0 {
        return Err(CommandError::Domain(traj.truncated.clone().unwrap_or_default()));
    }
    let density = m.unimodularity_certificate()?.and_then(|c| c.k).map(|k| k.recip());
    let kappa_tol = tol.kappa * (1.0 + t.kappa.value(&Point::from_array(o.p0)).map(f64::abs).unwrap_or(0.0));
    let cons = conservation_report(&t, &traj, &f, &casimirs, density.as_ref(), kappa_tol);
    let csv = trajectory_csv(&traj, &f, &casimirs).map_err(|e| CommandError::Input(e.to_string()))?;
    let rep = cons.to_verification(&traj, tol.conservation, tol.divergence);
    let data = json!({
        "dt": traj.dt,
        "steps": traj.states.len() - 1,
        "method": traj.method,
        "truncated": traj.truncated,
        "error_estimate": traj.error_estimate,
        "f_drift": cons.f_drift,
        "casimir_drifts": cons.casimir_drifts,
    });
    Ok((csv, document(&m.name, "flow", &tol, None, rep, data)))
}

/// One line of the self-test summary.
#[derive(Clone, Debug)]
pub struct SelftestItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn summarize(doc: &ReportDocument) -> String {
    let failed: Vec<&str> = doc.checks.iter().filter(|c| !c.passed()).map(|c| c.id.as_str()).collect();
    if failed.is_empty() && doc.disagreements.is_empty() {
        format!("{} checks", doc.checks.len())
    } else {
        format!("failed: {:?}, {} disagreements", failed, doc.disagreements.len())
    }
}

/// Small fuzz campaign: flat-Casimir triples must pass both verdicts, perturbed ones must fail
/// both, at every sample.
pub fn fuzz_equivalence(triples: usize, points: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_box([[-1.0, 1.0]; 5], Generator::Halton { n: points, seed }).expect("valid box").points;
    let kinds = [Perturbation::Kappa, Perturbation::Connection, Perturbation::Beta];
    let (mut bad_good, mut bad_perturbed) = (0, 0);
    for k in 0..triples {
        let shape = if k % 2 == 0 { BetaShape::Closed } else { BetaShape::Conformal };
        let t = flat_casimir_triple(&mut rng, shape, k % 3 == 0);
        let rep = equivalence_check(&t, &samples, 1e-9);
        if !rep.passed() {
            bad_good += 1;
        }
        let broken = perturb(&mut rng, &t, kinds[k % 3]);
        let rep = equivalence_check(&broken, &samples, 1e-9);
        if !rep.disagreements.is_empty() {
            bad_perturbed += 1;
        }
    }
    (bad_good, bad_perturbed)
}

/// Bigraded identities on random polynomial connections; returns the largest residual.
pub fn fuzz_bigraded(connections: usize, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_box([[-1.0, 1.0]; 5], Generator::Halton { n: points, seed }).expect("valid box").points;
    let mut worst = 0.0f64;
    for _ in 0..connections {
        let c = random_connection(&mut rng, 2);
        let t = PoissonTriple::new(c, Field::one(), Default::default());
        let test = cochain_test_form(&t);
        for p in &samples {
            let Ok(s) = point_suite(&t, &test, p, 1e-9, true) else {
                return f64::INFINITY;
            };
            for v in [s.cochain, s.f4, s.theta_dual, s.rho_dual, s.curvature_rho].into_iter().flatten() {
                worst = worst.max(v);
            }
        }
    }
    worst
}

/// `selftest`: every built-in example through `check`, the certificate and strata campaigns,
/// and two small fuzz campaigns.
pub fn selftest() -> Vec<SelftestItem> {
    let mut out = Vec::new();
    let mut push = |name: String, r: Result<ReportDocument, CommandError>, expect_pass: bool| {
        let (passed, detail) = match r {
            Ok(doc) => (doc.passed() == expect_pass, summarize(&doc)),
            Err(e) => (false, e.to_string()),
        };
        out.push(SelftestItem { name, passed, detail });
    };
    for name in SELFTEST_MODELS {
        let m = builtin(name);
        push(format!("check {name}"), m.map_err(CommandError::from).and_then(|m| check(&m, CheckOptions::default())), true);
    }
    push(
        "check broken_ic3 (must fail)".into(),
        builtin("broken_ic3").map_err(CommandError::from).and_then(|m| check(&m, CheckOptions::default())),
        false,
    );
    push(
        "modular --certificate br3_unimodular".into(),
        builtin("br3_unimodular").map_err(CommandError::from).and_then(|m| modular(&m, true)),
        true,
    );
    push(
        "modular --certificate sec5_example (must fail)".into(),
        builtin("sec5_example").map_err(CommandError::from).and_then(|m| modular(&m, true)),
        false,
    );
    push(
        "strata br3_unimodular".into(),
        builtin("br3_unimodular").map_err(CommandError::from).and_then(|m| strata(&m, 7).map(|(_, d)| d)),
        true,
    );
    let (good, bad) = fuzz_equivalence(20, 50, 7);
    out.push(SelftestItem {
        name: "fuzz equivalence (20 + 20 triples)".into(),
        passed: good == 0 && bad == 0,
        detail: format!("{good} valid triples rejected, {bad} perturbed triples with split verdicts"),
    });
    let worst = fuzz_bigraded(10, 10, 11);
    out.push(SelftestItem {
        name: "fuzz bigraded identities (10 connections)".into(),
        passed: worst <= 1e-9,
        detail: format!("max residual {worst:.3e}"),
    });
    out
}

/// A check result from a boolean, for campaign summaries.
pub fn boolean_check(id: &str, ok: bool, p: &Point) -> CheckResult {
    let mut s = Stats::new();
    s.push(if ok { 0.0 } else { 1.0 }, p);
    s.finish(id, 0.0)
}
