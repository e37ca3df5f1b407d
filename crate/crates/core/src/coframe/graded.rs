use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::exprlang::{EvalError, Field, Jet, Point};

/// Coefficient ring for graded elements: reals, jets or fields.
pub trait Scalar:
    Clone + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn scale(&self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Jet {
    fn zero() -> Self {
        Jet::zero()
    }
    fn one() -> Self {
        Jet::constant(1.0)
    }
    fn is_zero(&self) -> bool {
        Jet::is_zero(self)
    }
    fn scale(&self, s: f64) -> Self {
        Jet::scale(self, s)
    }
}

impl Scalar for Field {
    fn zero() -> Self {
        Field::zero()
    }
    fn one() -> Self {
        Field::one()
    }
    fn is_zero(&self) -> bool {
        Field::is_zero(self)
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Form,
    Multivector,
}

/// Which basis the coefficients refer to.
///
/// `Moving` means `{hor₁, hor₂, ∂y¹, ∂y², ∂y³}` and dually `{dx¹, dx², η¹, η², η³}`;
/// `Coordinate` means `{∂x¹, ∂x², ∂y¹, ∂y², ∂y³}` and `{dx¹, dx², dy¹, dy², dy³}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Moving,
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("wedge product would exceed degree 5 (degrees {0} and {1})")]
    DegreeOverflow(usize, usize),
    #[error("interior product argument of degree {0} exceeds target degree {1}")]
    DegreeUnderflow(usize, usize),
    #[error("operands have incompatible kinds")]
    KindMismatch,
    #[error("operands are expressed in different frames")]
    FrameMismatch,
}

/// Bit `k` of a monomial mask selects basis element `k` (0,1 horizontal; 2,3,4 vertical).
pub type Mask = usize;

pub const MONOMIALS: usize = 32;
const HORIZONTAL_BITS: Mask = 0b00011;

pub fn degree(m: Mask) -> usize {
    m.count_ones() as usize
}

/// Bidegree `(p, q)` of a monomial.
pub fn bidegree(m: Mask) -> (usize, usize) {
    (
        (m & HORIZONTAL_BITS).count_ones() as usize,
        (m & !HORIZONTAL_BITS).count_ones() as usize,
    )
}

pub fn indices(m: Mask) -> Vec<usize> {
    (0..5).filter(|k| m & (1 << k) != 0).collect()
}

fn parity(n: u32) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sign of `e_A ∧ e_B = sign · e_{A∪B}` for disjoint `A`, `B`.
pub fn wedge_sign(a: Mask, b: Mask) -> f64 {
    let inversions: u32 = indices(a)
        .iter()
        .map(|&i| (b & ((1 << i) - 1)).count_ones())
        .sum();
    parity(inversions)
}

fn interior_table() -> &'static [[f64; MONOMIALS]; MONOMIALS] {
    static TABLE: OnceLock<[[f64; MONOMIALS]; MONOMIALS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; MONOMIALS]; MONOMIALS];
        for (a, row) in t.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                if a & b != a {
                    continue;
                }
                // i_{e_{a1}∧…∧e_{ap}} = i_{e_{a1}} ∘ … ∘ i_{e_{ap}}, so the last factor acts first.
                let mut rest = b;
                let mut sign = 1.0;
                for &k in indices(a).iter().rev() {
                    sign *= parity((rest & ((1 << k) - 1)).count_ones());
                    rest &= !(1 << k);
                }
                *entry = sign;
            }
        }
        t
    })
}

/// Sign of `i_{e_A} e^B = sign · e^{B∖A}` for `A ⊆ B`, zero otherwise.
pub fn interior_sign(a: Mask, b: Mask) -> f64 {
    interior_table()[a][b]
}

/// Sorts a list of basis indices into a mask, returning the permutation sign
/// (zero when an index repeats).
pub fn sort_indices(idx: &[usize]) -> (Mask, f64) {
    let mut mask: Mask = 0;
    let mut sign = 1.0;
    for &k in idx {
        assert!(k < 5, "basis index {k} out of range");
        if mask & (1 << k) != 0 {
            return (0, 0.0);
        }
        // Moving e_k to its sorted slot passes every already-placed larger index.
        sign *= parity((mask >> (k + 1)).count_ones());
        mask |= 1 << k;
    }
    (mask, sign)
}

/// A form or multivector at a point (or with field coefficients), stored densely
/// over the 32 basis monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Graded<T> {
    kind: Kind,
    frame: Frame,
    coeffs: Vec<T>,
}

impl<T: Scalar> Graded<T> {
    pub fn zero(kind: Kind, frame: Frame) -> Self {
        Graded {
            kind,
            frame,
            coeffs: vec![T::zero(); MONOMIALS],
        }
    }

    /// `coeff · e_{i1} ∧ … ∧ e_{ik}` for basis indices in any order.
    pub fn monomial(kind: Kind, frame: Frame, idx: &[usize], coeff: T) -> Self {
        let mut g = Graded::zero(kind, frame);
        let (mask, sign) = sort_indices(idx);
        if sign != 0.0 {
            g.coeffs[mask] = coeff.scale(sign);
        }
        g
    }

    pub fn form(frame: Frame, idx: &[usize], coeff: T) -> Self {
        Graded::monomial(Kind::Form, frame, idx, coeff)
    }

    pub fn multivector(frame: Frame, idx: &[usize], coeff: T) -> Self {
        Graded::monomial(Kind::Multivector, frame, idx, coeff)
    }

    /// Degree-one element with the given five components.
    pub fn from_components(kind: Kind, frame: Frame, comps: [T; 5]) -> Self {
        let mut g = Graded::zero(kind, frame);
        for (k, c) in comps.into_iter().enumerate() {
            g.coeffs[1 << k] = c;
        }
        g
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn coeff(&self, m: Mask) -> &T {
        &self.coeffs[m]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `e_{i1} ∧ … ∧ e_{ik}` with the indices in any order.
    pub fn component(&self, idx: &[usize]) -> T {
        let (mask, sign) = sort_indices(idx);
        if sign == 0.0 {
            T::zero()
        } else {
            self.coeffs[mask].scale(sign)
        }
    }

    pub fn set(&mut self, m: Mask, v: T) {
        self.coeffs[m] = v;
    }

    pub fn add_to(&mut self, m: Mask, v: T) {
        let cur = std::mem::replace(&mut self.coeffs[m], T::zero());
        self.coeffs[m] = cur + v;
    }

    /// Degree-one components, in basis order.
    pub fn components(&self) -> [T; 5] {
        std::array::from_fn(|k| self.coeffs[1 << k].clone())
    }

    pub fn nonzero_masks(&self) -> impl Iterator<Item = Mask> + '_ {
        (0..MONOMIALS).filter(|&m| !self.coeffs[m].is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_masks().next().is_none()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.nonzero_masks().map(degree).max()
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.nonzero_masks().map(degree).min()
    }

    fn check_compatible(&self, o: &Self) -> Result<(), AlgebraError> {
        if self.kind != o.kind {
            return Err(AlgebraError::KindMismatch);
        }
        if self.frame != o.frame {
            return Err(AlgebraError::FrameMismatch);
        }
        Ok(())
    }

    pub fn wedge(&self, o: &Self) -> Result<Self, AlgebraError> {
        self.check_compatible(o)?;
        if let (Some(da), Some(db)) = (self.max_degree(), o.max_degree()) {
            if da + db > 5 {
                return Err(AlgebraError::DegreeOverflow(da, db));
            }
        }
        let mut out = Graded::zero(self.kind, self.frame);
        let rhs: Vec<Mask> = o.nonzero_masks().collect();
        for a in self.nonzero_masks() {
            for &b in &rhs {
                if a & b != 0 {
                    continue;
                }
                let term = (self.coeffs[a].clone() * o.coeffs[b].clone()).scale(wedge_sign(a, b));
                out.add_to(a | b, term);
            }
        }
        Ok(out)
    }

    /// Wedge that treats degree overflow as the zero element.
    pub fn wedge_or_zero(&self, o: &Self) -> Result<Self, AlgebraError> {
        match self.wedge(o) {
            Err(AlgebraError::DegreeOverflow(..)) => Ok(Graded::zero(self.kind, self.frame)),
            r => r,
        }
    }

    pub fn project(&self, p: usize, q: usize) -> Self {
        let mut out = Graded::zero(self.kind, self.frame);
        for m in 0..MONOMIALS {
            if bidegree(m) == (p, q) {
                out.coeffs[m] = self.coeffs[m].clone();
            }
        }
        out
    }

    pub fn homogeneous_degree(&self, k: usize) -> Self {
        let mut out = Graded::zero(self.kind, self.frame);
        for m in 0..MONOMIALS {
            if degree(m) == k {
                out.coeffs[m] = self.coeffs[m].clone();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn times(&self, s: &T) -> Self {
        self.map(|c| c.clone() * s.clone())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Graded<U> {
        Graded {
            kind: self.kind,
            frame: self.frame,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn try_map<U: Scalar, E>(&self, f: impl Fn(&T) -> Result<U, E>) -> Result<Graded<U>, E> {
        Ok(Graded {
            kind: self.kind,
            frame: self.frame,
            coeffs: self.coeffs.iter().map(f).collect::<Result<_, _>>()?,
        })
    }

    /// Re-expresses the element in the other frame of the connection `gamma`.
    ///
    /// Uses `hor_i = ∂x_i − γᵢᵃ∂y_a` and `η^a = dy^a + γᵢᵃdx^i`.
    pub fn convert(&self, to: Frame, gamma: &[[T; 3]; 2]) -> Self {
        if to == self.frame {
            return self.clone();
        }
        // Image of each basis element of the source frame, as degree-one elements.
        let sign = match (self.kind, to) {
            (Kind::Multivector, Frame::Coordinate) => -1.0,
            (Kind::Multivector, Frame::Moving) => 1.0,
            (Kind::Form, Frame::Coordinate) => 1.0,
            (Kind::Form, Frame::Moving) => -1.0,
        };
        let mut images: Vec<Graded<T>> = (0..5)
            .map(|k| Graded::monomial(self.kind, to, &[k], T::one()))
            .collect();
        match self.kind {
            Kind::Multivector => {
                for (i, img) in images.iter_mut().take(2).enumerate() {
                    for a in 0..3 {
                        img.coeffs[1 << (2 + a)] = gamma[i][a].scale(sign);
                    }
                }
            }
            Kind::Form => {
                for a in 0..3 {
                    for i in 0..2 {
                        images[2 + a].coeffs[1 << i] = gamma[i][a].scale(sign);
                    }
                }
            }
        }
        let mut out = Graded::zero(self.kind, to);
        for m in self.nonzero_masks() {
            let mut term = Graded::monomial(self.kind, to, &[], self.coeffs[m].clone());
            for k in indices(m) {
                term = term
                    .wedge(&images[k])
                    .expect("frame images share kind and frame");
            }
            out = out + term;
        }
        out
    }
}

impl Graded<Field> {
    /// Evaluates every coefficient to a jet of the given order.
    pub fn evaluate(&self, p: &Point, order: u8) -> Result<Graded<Jet>, EvalError> {
        self.try_map(|f| {
            if f.is_zero() {
                Ok(Jet::zero())
            } else {
                f.evaluate(p, order)
            }
        })
    }

    /// Smallest jet budget over the non-zero coefficients.
    pub fn budget(&self) -> u8 {
        self.nonzero_masks()
            .map(|m| self.coeffs[m].budget())
            .min()
            .unwrap_or(2)
    }
}

impl Graded<Jet> {
    pub fn values(&self) -> Graded<f64> {
        self.map(|j| j.value)
    }
}

impl Graded<f64> {
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl<T: Scalar> Add for Graded<T> {
    type Output = Graded<T>;
    fn add(mut self, o: Graded<T>) -> Graded<T> {
        assert_eq!(self.kind, o.kind, "adding a form to a multivector");
        assert_eq!(self.frame, o.frame, "adding elements from different frames");
        for (c, d) in self.coeffs.iter_mut().zip(o.coeffs) {
            let cur = std::mem::replace(c, T::zero());
            *c = cur + d;
        }
        self
    }
}

impl<T: Scalar> Sub for Graded<T> {
    type Output = Graded<T>;
    fn sub(self, o: Graded<T>) -> Graded<T> {
        self + (-o)
    }
}

impl<T: Scalar> Neg for Graded<T> {
    type Output = Graded<T>;
    fn neg(self) -> Graded<T> {
        self.map(|c| -c.clone())
    }
}

/// Interior product `i_arg target` with `i_{X∧Y} = i_X ∘ i_Y`.
///
/// `arg` and `target` must be of opposite kinds and share a frame; the result has
/// the kind of `target`.
pub fn interior<T: Scalar>(arg: &Graded<T>, target: &Graded<T>) -> Result<Graded<T>, AlgebraError> {
    if arg.kind == target.kind {
        return Err(AlgebraError::KindMismatch);
    }
    if arg.frame != target.frame {
        return Err(AlgebraError::FrameMismatch);
    }
    if let (Some(da), Some(dt)) = (arg.min_degree(), target.max_degree()) {
        if da > dt {
            return Err(AlgebraError::DegreeUnderflow(da, dt));
        }
    }
    let mut out = Graded::zero(target.kind, target.frame);
    let tmasks: Vec<Mask> = target.nonzero_masks().collect();
    for a in arg.nonzero_masks() {
        for &b in &tmasks {
            let s = interior_sign(a, b);
            if s == 0.0 {
                continue;
            }
            let term = (arg.coeffs[a].clone() * target.coeffs[b].clone()).scale(s);
            out.add_to(b & !a, term);
        }
    }
    Ok(out)
}

fn det(m: &mut [Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        _ => {
            let mut total = 0.0;
            for col in 0..n {
                if m[0][col] == 0.0 {
                    continue;
                }
                let mut minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != col)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                total += parity(col as u32) * m[0][col] * det(&mut minor);
            }
            total
        }
    }
}

/// Evaluates a homogeneous element of degree `k` on `k` elements of the dual kind,
/// `A(α₁,…,α_k) = Σ_I A_I det(⟨α_r, e_{I_s}⟩)`.
pub fn evaluate_on(a: &Graded<f64>, args: &[Graded<f64>]) -> Result<f64, AlgebraError> {
    for arg in args {
        if arg.kind == a.kind {
            return Err(AlgebraError::KindMismatch);
        }
        if arg.frame != a.frame {
            return Err(AlgebraError::FrameMismatch);
        }
    }
    let k = args.len();
    let mut total = 0.0;
    for m in a.nonzero_masks() {
        if degree(m) != k {
            continue;
        }
        let idx = indices(m);
        let mut mat: Vec<Vec<f64>> = args
            .iter()
            .map(|arg| idx.iter().map(|&s| arg.coeffs[1 << s]).collect())
            .collect();
        total += a.coeffs[m] * det(&mut mat);
    }
    Ok(total)
}
