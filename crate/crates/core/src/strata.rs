//! Sampling of chart boxes and rank stratification of `Π`.

use std::collections::BTreeMap;

use nalgebra::SMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coframe::{bivector_from_matrix, Frame, MASK_OMEGA_H};
use crate::exprlang::{EvalError, Point};
use crate::triple::PoissonTriple;

pub type BoxBounds = [[f64; 2]; 5];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrataError {
    #[error("sample box is empty: {0}")]
    EmptyBox(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    /// `resolution` points per axis, endpoints included.
    Grid { resolution: usize },
    /// Halton sequence in bases 2, 3, 5, 7, 11 starting at index `seed + 1`.
    Halton { n: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Point>,
    pub generator: Generator,
    pub bounds: BoxBounds,
}

const HALTON_BASES: [u64; 5] = [2, 3, 5, 7, 11];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

pub fn sample_box(bounds: BoxBounds, generator: Generator) -> Result<SampleSet, StrataError> {
    for (k, [a, b]) in bounds.iter().enumerate() {
        if a > b || !a.is_finite() || !b.is_finite() {
            return Err(StrataError::EmptyBox(format!("interval {k} is [{a}, {b}]")));
        }
    }
    let lerp = |k: usize, t: f64| bounds[k][0] + (bounds[k][1] - bounds[k][0]) * t;
    let points = match generator {
        Generator::Halton { n, seed } => {
            if n == 0 {
                return Err(StrataError::EmptyBox("zero sample count".into()));
            }
            (0..n as u64)
                .map(|i| {
                    let idx = seed + i + 1;
                    Point::from_array(std::array::from_fn(|k| lerp(k, radical_inverse(idx, HALTON_BASES[k]))))
                })
                .collect()
        }
        Generator::Grid { resolution } => {
            if resolution == 0 {
                return Err(StrataError::EmptyBox("zero grid resolution".into()));
            }
            let t = |i: usize| if resolution == 1 { 0.5 } else { i as f64 / (resolution - 1) as f64 };
            let total = resolution.pow(5);
            (0..total)
                .map(|mut n| {
                    let mut c = [0.0; 5];
                    for k in (0..5).rev() {
                        c[k] = lerp(k, t(n % resolution));
                        n /= resolution;
                    }
                    Point::from_array(c)
                })
                .collect()
        }
    };
    Ok(SampleSet { points, generator, bounds })
}

/// Singular values of a 5×5 matrix, descending.
pub fn singular_values(m: &[[f64; 5]; 5]) -> [f64; 5] {
    let a = SMatrix::<f64, 5, 5>::from_fn(|i, j| m[i][j]);
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    std::array::from_fn(|k| s[k])
}

/// Numerical rank with threshold `1e-9·σ_max`.
pub fn matrix_rank(m: &[[f64; 5]; 5]) -> usize {
    let s = singular_values(m);
    if s[0] == 0.0 || !s[0].is_finite() {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_THRESHOLD * s[0]).count()
}

pub const RANK_THRESHOLD: f64 = 1e-9;

/// True when some singular value lies within two decades of the rank threshold.
pub fn rank_is_ambiguous(m: &[[f64; 5]; 5]) -> bool {
    let s = singular_values(m);
    s[0] > 0.0
        && s.iter()
            .any(|&v| v > 1e-2 * RANK_THRESHOLD * s[0] && v <= 1e2 * RANK_THRESHOLD * s[0])
}

/// Rank of the `(2,0)` block of `Π` in the bigrading of `gamma`, with `|Π^{hor₁hor₂}| > tol` meaning rank 2.
pub fn horizontal_rank(pi: &[[f64; 5]; 5], gamma: &[[f64; 3]; 2], tol: f64) -> usize {
    let moving = bivector_from_matrix(pi, Frame::Coordinate).convert(Frame::Moving, gamma);
    if moving.coeff(MASK_OMEGA_H).abs() > tol {
        2
    } else {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Rank0,
    Rank2Vertical,
    Rank2Horizontal,
    Rank4,
    NearBoundary,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Rank0 => "rank0",
            Label::Rank2Vertical => "rank2_vertical",
            Label::Rank2Horizontal => "rank2_horizontal",
            Label::Rank4 => "rank4",
            Label::NearBoundary => "near_boundary",
        }
    }

    pub fn expected_rank(self) -> Option<usize> {
        match self {
            Label::Rank0 => Some(0),
            Label::Rank2Vertical | Label::Rank2Horizontal => Some(2),
            Label::Rank4 => Some(4),
            Label::NearBoundary => None,
        }
    }
}

/// Classification of one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stratum {
    /// Label from the `κ`/`β` rules; never `NearBoundary`.
    pub label: Label,
    pub near_boundary: bool,
    pub kappa: f64,
    pub beta_norm: f64,
    pub rank: usize,
    /// The point sits inside a tolerance band, where label and rank may legitimately differ.
    pub in_band: bool,
}

impl Stratum {
    /// Label shown in tables: `near_boundary` overrides the rule label.
    pub fn display_label(&self) -> Label {
        if self.near_boundary {
            Label::NearBoundary
        } else {
            self.label
        }
    }

    pub fn agrees(&self) -> bool {
        self.label.expected_rank() == Some(self.rank)
    }
}

pub fn label_for(kappa: f64, beta_norm: f64, kappa_tol: f64, beta_tol: f64) -> Label {
    match (kappa.abs() > kappa_tol, beta_norm > beta_tol) {
        (true, true) => Label::Rank4,
        (true, false) => Label::Rank2Horizontal,
        (false, true) => Label::Rank2Vertical,
        (false, false) => Label::Rank0,
    }
}

fn in_band(v: f64, tol: f64) -> bool {
    v > 0.1 * tol && v <= 10.0 * tol
}

pub fn classify_point(t: &PoissonTriple, p: &Point, kappa_tol: f64, beta_tol: f64) -> Result<Stratum, EvalError> {
    let j = t.jets(p, 0)?;
    let m = j.pi_values();
    let kappa = j.kappa.value;
    let beta_norm = j.beta_norm();
    Ok(Stratum {
        label: label_for(kappa, beta_norm, kappa_tol, beta_tol),
        near_boundary: kappa.abs() > kappa_tol && kappa.abs() <= 10.0 * kappa_tol,
        kappa,
        beta_norm,
        rank: matrix_rank(&m),
        in_band: in_band(kappa.abs(), kappa_tol) || in_band(beta_norm, beta_tol) || rank_is_ambiguous(&m),
    })
}

/// `κ_tol = base·(1 + max|κ|)` over the sample set.
pub fn kappa_tolerance(t: &PoissonTriple, points: &[Point], base: f64) -> f64 {
    let max = points
        .par_iter()
        .map(|p| t.kappa.value(p).map(f64::abs).unwrap_or(0.0))
        .reduce(|| 0.0, f64::max);
    base * (1.0 + max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrataRow {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub kappa: f64,
    pub beta_norm: f64,
    pub rank: usize,
    pub label: &'static str,
    pub ic1: f64,
    pub ic2: f64,
    pub ic3: f64,
}

#[derive(Clone, Debug, Default)]
pub struct StrataReport {
    pub rows: Vec<StrataRow>,
    pub strata: Vec<Stratum>,
    pub counts: BTreeMap<&'static str, usize>,
    /// Points outside the tolerance bands whose rule label disagrees with the SVD rank.
    pub disagreements: Vec<[f64; 5]>,
    /// Points whose components could not be evaluated.
    pub skipped: usize,
    pub kappa_tol: f64,
    pub beta_tol: f64,
}

impl StrataReport {
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn strata_report(t: &PoissonTriple, s: &SampleSet, kappa_base_tol: f64, beta_tol: f64) -> StrataReport {
    let kappa_tol = kappa_tolerance(t, &s.points, kappa_base_tol);
    let rows: Vec<Option<(StrataRow, Stratum)>> = s
        .points
        .par_iter()
        .map(|p| {
            let st = classify_point(t, p, kappa_tol, beta_tol).ok()?;
            let ic = t.ic_residuals(p).unwrap_or_default();
            let c = p.coords();
            let row = StrataRow {
                x1: c[0],
                x2: c[1],
                y1: c[2],
                y2: c[3],
                y3: c[4],
                kappa: st.kappa,
                beta_norm: st.beta_norm,
                rank: st.rank,
                label: st.display_label().as_str(),
                ic1: ic.ic1.abs(),
                ic2: ic.ic2.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())),
                ic3: ic.ic3.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            };
            Some((row, st))
        })
        .collect();
    let mut out = StrataReport { kappa_tol, beta_tol, ..Default::default() };
    for (p, r) in s.points.iter().zip(rows) {
        let Some((row, st)) = r else {
            out.skipped += 1;
            continue;
        };
        *out.counts.entry(row.label).or_default() += 1;
        if !st.in_band && !st.agrees() {
            out.disagreements.push(p.coords());
        }
        out.rows.push(row);
        out.strata.push(st);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::ConnectionShift;
    use crate::generators::random_connection;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const UNIT: BoxBounds = [[0.0, 1.0]; 5];

    fn sec5() -> PoissonTriple {
        PoissonTriple::parse([["0", "-1", "-1"], ["0", "-1", "-1"]], "y1^2 - x1^2 - x2^2", ["y1^2", "0", "0"]).unwrap()
    }

    #[test]
    fn grid_and_halton_sampling() {
        let g = sample_box(UNIT, Generator::Grid { resolution: 2 }).unwrap();
        assert_eq!(g.points.len(), 32);
        assert!(g.points.iter().all(|p| p.coords().iter().all(|&c| c == 0.0 || c == 1.0)));
        let h1 = sample_box(UNIT, Generator::Halton { n: 100, seed: 0 }).unwrap();
        let h2 = sample_box(UNIT, Generator::Halton { n: 100, seed: 0 }).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.points[0].coords(), [0.5, 1.0 / 3.0, 0.2, 1.0 / 7.0, 1.0 / 11.0]);
        let h3 = sample_box(UNIT, Generator::Halton { n: 100, seed: 7 }).unwrap();
        assert_ne!(h1.points, h3.points);
        let mut b = UNIT;
        b[2] = [0.25, 0.25];
        let d = sample_box(b, Generator::Halton { n: 10, seed: 0 }).unwrap();
        assert!(d.points.iter().all(|p| p.y(0) == 0.25));
        b[2] = [1.0, 0.0];
        assert!(matches!(sample_box(b, Generator::Grid { resolution: 3 }), Err(StrataError::EmptyBox(_))));
    }

    #[test]
    fn samples_stay_in_box() {
        let b: BoxBounds = [[-1.0, 1.0], [-2.0, 0.5], [0.0, 3.0], [-1.5, 1.5], [2.0, 2.5]];
        let s = sample_box(b, Generator::Halton { n: 500, seed: 3 }).unwrap();
        for p in &s.points {
            for k in 0..5 {
                assert!(p.coords()[k] >= b[k][0] && p.coords()[k] <= b[k][1]);
            }
        }
    }

    #[test]
    fn rank_examples() {
        let mut m = [[0.0; 5]; 5];
        assert_eq!(matrix_rank(&m), 0);
        m[0][1] = 1.0;
        m[1][0] = -1.0;
        assert_eq!(matrix_rank(&m), 2);
        let pi = sec5().jets(&Point::new(0.0, 0.0, 1.0, 0.0, 0.0), 0).unwrap().pi_values();
        assert_eq!(matrix_rank(&pi), 4);
    }

    #[test]
    fn classification_examples() {
        let t = sec5();
        let s = classify_point(&t, &Point::new(1.0, 0.0, 1.0, 0.0, 0.0), 1e-9, 1e-9).unwrap();
        assert_eq!((s.label, s.rank), (Label::Rank2Vertical, 2));
        let s = classify_point(&t, &Point::new(0.0, 0.0, 0.0, 0.0, 0.0), 1e-9, 1e-9).unwrap();
        assert_eq!((s.label, s.rank), (Label::Rank0, 0));
        let br3 = PoissonTriple::parse([["0"; 3]; 2], "cutoff(y1^2 + y2^2 + y3^2)", ["y1", "y2", "y3"]).unwrap();
        let s = classify_point(&br3, &Point::new(0.0, 0.0, 1.0, 0.5, 0.0), 1e-9, 1e-9).unwrap();
        assert_eq!((s.label, s.rank), (Label::Rank2Vertical, 2));
        let s = classify_point(&br3, &Point::new(0.0, 0.0, 0.3, 0.2, 0.1), 1e-9, 1e-9).unwrap();
        assert_eq!((s.label, s.rank), (Label::Rank4, 4));
        let s = classify_point(&br3, &Point::new(0.0, 0.0, 0.0, 0.0, 0.0), 1e-9, 1e-9).unwrap();
        assert_eq!((s.label, s.rank), (Label::Rank2Horizontal, 2));
    }

    #[test]
    fn reports_agree_with_svd() {
        let flat = PoissonTriple::parse([["0"; 3]; 2], "1", ["0"; 3]).unwrap();
        let s = sample_box(UNIT, Generator::Halton { n: 50, seed: 0 }).unwrap();
        let r = strata_report(&flat, &s, 1e-9, 1e-9);
        assert_eq!(r.counts.get("rank2_horizontal"), Some(&50));

        let b: BoxBounds = [[-2.0, 2.0]; 5];
        let g = sample_box(b, Generator::Grid { resolution: 5 }).unwrap();
        let r = strata_report(&sec5(), &g, 1e-9, 1e-9);
        assert!(r.disagreements.is_empty());
        for l in ["rank0", "rank2_vertical", "rank2_horizontal", "rank4"] {
            assert!(r.counts.get(l).copied().unwrap_or(0) > 0, "{l} missing: {:?}", r.counts);
        }
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("x1,x2,y1,y2,y3,kappa,beta_norm,rank,label,ic1,ic2,ic3\n"));
        assert_eq!(csv.lines().count(), r.rows.len() + 1);
    }

    #[test]
    fn horizontal_rank_is_invariant_under_connection_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = sec5();
        let s = sample_box([[-2.0, 2.0]; 5], Generator::Halton { n: 100, seed: 1 }).unwrap();
        for _ in 0..20 {
            let xi = ConnectionShift { xi: random_connection(&mut rng, 2).gamma };
            let other = t.gamma.shift(&xi);
            for p in &s.points {
                let j = t.jets(p, 0).unwrap();
                let pi = j.pi_values();
                let g2 = other.jets(p, 0).unwrap().map(|r| r.map(|c| c.value));
                assert_eq!(horizontal_rank(&pi, &j.gamma_values(), 0.0), horizontal_rank(&pi, &g2, 0.0));
            }
        }
    }
}
