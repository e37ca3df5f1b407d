//! Bigraded forms and multivectors over the moving frame of a connection.
//!
//! Basis index `k` in `0..5` stands for `hor₁, hor₂, ∂y¹, ∂y², ∂y³` (dually
//! `dx¹, dx², η¹, η², η³`) in the moving frame, and for `∂x¹, ∂x², ∂y¹, ∂y², ∂y³`
//! in the coordinate frame.
//!
//! Interior products follow `i_{X∧Y} = i_X ∘ i_Y`. With that convention
//! `i_{∂y¹∧∂y²∧∂y³}(η¹∧η²∧η³) = −1`, so the normalized vertical trivector
//! satisfying `i_{Q_V}Ω^V = 1` is `Q_V = −∂y¹∧∂y²∧∂y³`.

mod calculus;
mod graded;

pub use calculus::*;
pub use graded::*;

/// Basis indices.
pub const X1: usize = 0;
pub const X2: usize = 1;
pub const Y1: usize = 2;
pub const Y2: usize = 3;
pub const Y3: usize = 4;

/// `ψ = ∂x¹∧∂x²` in the coordinate frame.
pub fn psi<T: Scalar>() -> Graded<T> {
    Graded::multivector(Frame::Coordinate, &[X1, X2], T::one())
}

/// `hor^γψ = hor₁∧hor₂` in the moving frame.
pub fn hor_psi<T: Scalar>() -> Graded<T> {
    Graded::multivector(Frame::Moving, &[X1, X2], T::one())
}

/// `ω = dx¹∧dx²`; identical in both coframes, returned in the coordinate one.
pub fn omega<T: Scalar>() -> Graded<T> {
    Graded::form(Frame::Coordinate, &[X1, X2], T::one())
}

/// `Ω^H = π*ω` in the moving coframe.
pub fn omega_h<T: Scalar>() -> Graded<T> {
    Graded::form(Frame::Moving, &[X1, X2], T::one())
}

/// `Ω^V = η¹∧η²∧η³`.
pub fn omega_v<T: Scalar>() -> Graded<T> {
    Graded::form(Frame::Moving, &[Y1, Y2, Y3], T::one())
}

/// `Q_V = −∂y¹∧∂y²∧∂y³`, normalized by `i_{Q_V}Ω^V = 1`.
pub fn q_v<T: Scalar>() -> Graded<T> {
    Graded::multivector(Frame::Moving, &[Y1, Y2, Y3], T::one().scale(-1.0))
}

/// `Q_H = −hor^γψ`, normalized by `i_{Q_H}Ω^H = 1`.
pub fn q_h<T: Scalar>() -> Graded<T> {
    Graded::multivector(Frame::Moving, &[X1, X2], T::one().scale(-1.0))
}

/// The scalar `c` with `α = c·vol`, read off the single monomial of `vol`.
pub fn ratio<T: Scalar>(alpha: &Graded<T>, vol_mask: usize) -> T {
    alpha.coeff(vol_mask).clone()
}

pub const MASK_OMEGA_H: usize = 0b00011;
pub const MASK_OMEGA_V: usize = 0b11100;

#[cfg(test)]
mod tests;
