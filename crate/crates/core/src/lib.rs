//! Almost-coupling Poisson tensors on the fibered chart `ℝ²ₓ × ℝ³ᵧ`.
#![allow(clippy::needless_range_loop, clippy::type_complexity, clippy::should_implement_trait)]

pub mod exprlang;
pub mod coframe;
pub mod commands;
pub mod connection;
pub mod flow;
pub mod gauge;
pub mod generators;
pub mod model;
pub mod modular;
pub mod report;
pub mod strata;
pub mod triple;
