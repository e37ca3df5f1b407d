//! TOML model files and the compiled-in example registry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connection::Connection;
use crate::exprlang::{Field, ParseError};
use crate::gauge::{family_triple, varkappa_field, GaugeData};
use crate::modular::UnimodularityCertificate;
use crate::report::Tolerances;
use crate::strata::{sample_box, BoxBounds, Generator, SampleSet, StrataError};
use crate::triple::PoissonTriple;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Toml(String),
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("sampling.box interval {index} is [{lo}, {hi}]")]
    BadInterval { index: usize, lo: f64, hi: f64 },
    #[error("in `{key}`: {source}")]
    Expression { key: String, source: ParseError },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown built-in model `{0}`")]
    UnknownBuiltin(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    model: Option<RawModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    connection: Option<RawConnection>,
    kappa: Option<RawKappa>,
    beta: Option<RawBeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gauge: Option<RawGauge>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<RawCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<RawSampling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerances: Option<Tolerances>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConnection {
    gamma: [[String; 3]; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKappa {
    expr: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeta {
    components: [String; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGauge {
    mu: [String; 2],
    #[serde(default = "zero_string")]
    c: String,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    #[serde(default = "zero_string")]
    h: String,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa0: Option<String>,
    #[serde(rename = "K_from_gauge", default, skip_serializing_if = "std::ops::Not::not")]
    k_from_gauge: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    #[serde(rename = "box")]
    bounds: [[f64; 2]; 5],
    generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn zero_string() -> String {
    "0".into()
}

/// A field together with its source text, so that saving reproduces what was loaded.
#[derive(Clone, Debug)]
pub struct Expr {
    pub source: String,
    pub field: Field,
}

impl Expr {
    pub fn parse(key: &str, src: &str) -> Result<Expr, ModelError> {
        let field = Field::parse(src).map_err(|source| ModelError::Expression { key: key.into(), source })?;
        let source = field.expression().map(|e| e.to_string()).unwrap_or_else(|| src.trim().to_string());
        Ok(Expr { source, field })
    }
}

impl PartialEq for Expr {
    fn eq(&self, o: &Expr) -> bool {
        self.field.expression() == o.field.expression()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSection {
    pub mu: [Expr; 2],
    pub c: Expr,
    pub epsilon: f64,
}

impl GaugeSection {
    pub fn data(&self) -> GaugeData {
        GaugeData::new([self.mu[0].field.clone(), self.mu[1].field.clone()], self.c.field.clone(), self.epsilon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateSection {
    pub h: Expr,
    pub k: Option<Expr>,
    pub kappa0: Option<Expr>,
    /// Use `K = (1 − εκ₀(ϰ − c))⁻¹` from the `[gauge]` block, with `κ₀` the untransformed `κ`.
    pub k_from_gauge: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub bounds: BoxBounds,
    pub generator: Generator,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { bounds: [[-1.0, 1.0]; 5], generator: Generator::Halton { n: 200, seed: 0 } }
    }
}

impl Sampling {
    pub fn samples(&self) -> Result<SampleSet, StrataError> {
        sample_box(self.bounds, self.generator)
    }

    pub fn seed(&self) -> u64 {
        match self.generator {
            Generator::Halton { seed, .. } => seed,
            Generator::Grid { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub name: String,
    pub description: Option<String>,
    pub gamma: [[Expr; 3]; 2],
    pub kappa: Expr,
    pub beta: [Expr; 3],
    pub gauge: Option<GaugeSection>,
    pub certificate: Option<CertificateSection>,
    pub sampling: Sampling,
    /// Explicit `[sampling]` section present in the source.
    pub has_sampling: bool,
    pub tolerances: Tolerances,
    pub has_tolerances: bool,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<ModelFile, ModelError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| ModelError::Toml(e.to_string()))?;
        let model = raw.model.ok_or(ModelError::MissingSection("model"))?;
        let kappa = raw.kappa.ok_or(ModelError::MissingSection("kappa"))?;
        let beta = raw.beta.ok_or(ModelError::MissingSection("beta"))?;
        let gamma_src = raw
            .connection
            .map(|c| c.gamma)
            .unwrap_or_else(|| std::array::from_fn(|_| std::array::from_fn(|_| zero_string())));
        let mut gamma: Vec<[Expr; 3]> = Vec::with_capacity(2);
        for (i, row) in gamma_src.iter().enumerate() {
            let parsed: Vec<Expr> = row
                .iter()
                .enumerate()
                .map(|(a, s)| Expr::parse(&format!("connection.gamma[{i}][{a}]"), s))
                .collect::<Result<_, _>>()?;
            gamma.push(vec_to_array(parsed));
        }
        let beta_exprs: Vec<Expr> = beta
            .components
            .iter()
            .enumerate()
            .map(|(a, s)| Expr::parse(&format!("beta.components[{a}]"), s))
            .collect::<Result<_, _>>()?;
        let gauge = match raw.gauge {
            Some(g) => {
                if !g.epsilon.is_finite() {
                    return Err(ModelError::Invalid(format!("gauge.epsilon = {}", g.epsilon)));
                }
                Some(GaugeSection {
                    mu: [Expr::parse("gauge.mu[0]", &g.mu[0])?, Expr::parse("gauge.mu[1]", &g.mu[1])?],
                    c: Expr::parse("gauge.c", &g.c)?,
                    epsilon: g.epsilon,
                })
            }
            None => None,
        };
        let certificate = match raw.certificate {
            Some(c) => {
                if c.k_from_gauge && c.k.is_some() {
                    return Err(ModelError::Invalid("certificate sets both K and K_from_gauge".into()));
                }
                if c.k_from_gauge && gauge.is_none() {
                    return Err(ModelError::Invalid("certificate.K_from_gauge needs a [gauge] section".into()));
                }
                Some(CertificateSection {
                    h: Expr::parse("certificate.h", &c.h)?,
                    k: c.k.as_deref().map(|s| Expr::parse("certificate.K", s)).transpose()?,
                    kappa0: c.kappa0.as_deref().map(|s| Expr::parse("certificate.kappa0", s)).transpose()?,
                    k_from_gauge: c.k_from_gauge,
                })
            }
            None => None,
        };
        let has_sampling = raw.sampling.is_some();
        let sampling = match raw.sampling {
            Some(s) => parse_sampling(s)?,
            None => Sampling::default(),
        };
        let has_tolerances = raw.tolerances.is_some();
        Ok(ModelFile {
            name: model.name,
            description: model.description,
            gamma: [gamma[0].clone(), gamma[1].clone()],
            kappa: Expr::parse("kappa.expr", &kappa.expr)?,
            beta: vec_to_array(beta_exprs),
            gauge,
            certificate,
            sampling,
            has_sampling,
            tolerances: raw.tolerances.unwrap_or_default(),
            has_tolerances,
        })
    }

    pub fn to_toml(&self) -> String {
        let raw = RawFile {
            model: Some(RawModel { name: self.name.clone(), description: self.description.clone() }),
            connection: Some(RawConnection { gamma: self.gamma.clone().map(|row| row.map(|e| e.source)) }),
            kappa: Some(RawKappa { expr: self.kappa.source.clone() }),
            beta: Some(RawBeta { components: self.beta.clone().map(|e| e.source) }),
            gauge: self.gauge.as_ref().map(|g| RawGauge {
                mu: g.mu.clone().map(|e| e.source),
                c: g.c.source.clone(),
                epsilon: g.epsilon,
            }),
            certificate: self.certificate.as_ref().map(|c| RawCertificate {
                h: c.h.source.clone(),
                k: c.k.as_ref().map(|e| e.source.clone()),
                kappa0: c.kappa0.as_ref().map(|e| e.source.clone()),
                k_from_gauge: c.k_from_gauge,
            }),
            sampling: self.has_sampling.then(|| {
                let (generator, resolution, n, seed) = match self.sampling.generator {
                    Generator::Grid { resolution } => ("grid", Some(resolution), None, None),
                    Generator::Halton { n, seed } => ("halton", None, Some(n), Some(seed)),
                };
                RawSampling { bounds: self.sampling.bounds, generator: generator.into(), resolution, n, seed }
            }),
            tolerances: self.has_tolerances.then_some(self.tolerances),
        };
        toml::to_string(&raw).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<ModelFile, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        ModelFile::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_toml()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    /// The recorded triple, before any `[gauge]` block is applied.
    pub fn base_triple(&self) -> PoissonTriple {
        let gamma = Connection::new(self.gamma.clone().map(|row| row.map(|e| e.field)));
        PoissonTriple::new(gamma, self.kappa.field.clone(), crate::triple::VerticalOneForm::new(self.beta.clone().map(|e| e.field)))
    }

    /// The triple the commands operate on: the ε-family member when a `[gauge]` block is present.
    pub fn triple(&self) -> Result<PoissonTriple, ModelError> {
        let base = self.base_triple();
        match &self.gauge {
            Some(g) => family_triple(&base, &g.data()).map_err(|e| ModelError::Invalid(format!("gauge family: {e}"))),
            None => Ok(base),
        }
    }

    pub fn unimodularity_certificate(&self) -> Result<Option<UnimodularityCertificate>, ModelError> {
        let Some(c) = &self.certificate else { return Ok(None) };
        let mut cert = UnimodularityCertificate::new(c.h.field.clone(), c.k.as_ref().map(|e| e.field.clone()));
        cert.kappa0 = c.kappa0.as_ref().map(|e| e.field.clone());
        if c.k_from_gauge {
            let g = self.gauge.as_ref().expect("checked at load").data();
            let base = self.base_triple();
            let vk = varkappa_field(&base, &g.mu, g.epsilon).map_err(|e| ModelError::Invalid(format!("varkappa: {e}")))?;
            let denom = Field::one() - (&base.kappa * (vk - &g.c)) * g.epsilon;
            cert.k = Some(denom.recip());
            if cert.kappa0.is_none() {
                cert.kappa0 = Some(base.kappa.clone());
            }
        }
        Ok(Some(cert))
    }

    /// Same model with the `[gauge]` block set to `ε`.
    pub fn with_epsilon(&self, epsilon: f64) -> Option<ModelFile> {
        let mut m = self.clone();
        m.gauge.as_mut()?.epsilon = epsilon;
        m.name = format!("{}_eps{}", self.name, epsilon);
        Some(m)
    }
}

fn vec_to_array<const N: usize>(v: Vec<Expr>) -> [Expr; N] {
    v.try_into().unwrap_or_else(|_| unreachable!("fixed-size row"))
}

fn parse_sampling(s: RawSampling) -> Result<Sampling, ModelError> {
    for (index, [lo, hi]) in s.bounds.iter().copied().enumerate() {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(ModelError::BadInterval { index, lo, hi });
        }
    }
    let generator = match s.generator.as_str() {
        "grid" => Generator::Grid {
            resolution: s.resolution.ok_or_else(|| ModelError::Invalid("grid sampling needs `resolution`".into()))?,
        },
        "halton" => Generator::Halton { n: s.n.unwrap_or(200), seed: s.seed.unwrap_or(0) },
        other => return Err(ModelError::Invalid(format!("unknown sampling generator `{other}`"))),
    };
    if matches!(generator, Generator::Grid { resolution: 0 } | Generator::Halton { n: 0, .. }) {
        return Err(ModelError::Invalid("sampling produces no points".into()));
    }
    Ok(Sampling { bounds: s.bounds, generator })
}

pub const BUILTIN_NAMES: [&str; 5] = ["sec5_example", "br3_unimodular", "flat_so3", "flat_pair_flatness", "broken_ic3"];

/// Models run by `selftest`, in order.
pub const SELFTEST_MODELS: [&str; 4] = ["sec5_example", "br3_unimodular", "flat_so3", "flat_pair_flatness"];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "sec5_example" => include_str!("../models/sec5_example.toml"),
        "br3_unimodular" => include_str!("../models/br3_unimodular.toml"),
        "flat_so3" => include_str!("../models/flat_so3.toml"),
        "flat_pair_flatness" => include_str!("../models/flat_pair_flatness.toml"),
        "broken_ic3" => include_str!("../models/broken_ic3.toml"),
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Result<ModelFile, ModelError> {
    let src = builtin_source(name).ok_or_else(|| ModelError::UnknownBuiltin(name.into()))?;
    ModelFile::from_toml(src)
}

/// A built-in name or a path to a model file.
pub fn resolve(name_or_path: &str) -> Result<ModelFile, ModelError> {
    match builtin_source(name_or_path) {
        Some(_) => builtin(name_or_path),
        None => ModelFile::load(Path::new(name_or_path)),
    }
}
