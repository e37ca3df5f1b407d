//! Coordinate expressions on the chart `ℝ²ₓ × ℝ³ᵧ` and their exact 2-jets.

mod ast;
mod field;
mod jet;
mod parse;

pub use ast::{BinOp, Builtin, Constant, Expression, Var};
pub use field::{cutoff_derivatives, EvalError, Field};
pub use jet::{Jet, DIM};
pub use parse::{parse, ParseError};

use serde::{Deserialize, Serialize};

/// A point `(x1, x2, y1, y2, y3)` of the chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; DIM]);

impl Point {
    pub fn new(x1: f64, x2: f64, y1: f64, y2: f64, y3: f64) -> Point {
        Point::from_array([x1, x2, y1, y2, y3])
    }

    pub fn from_array(c: [f64; DIM]) -> Point {
        assert!(c.iter().all(|v| v.is_finite()), "non-finite chart point {c:?}");
        Point(c)
    }

    pub fn coords(&self) -> [f64; DIM] {
        self.0
    }

    pub fn get(&self, v: Var) -> f64 {
        self.0[v.index()]
    }

    pub fn x(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn y(&self, a: usize) -> f64 {
        self.0[2 + a]
    }

    pub fn fiber_norm(&self) -> f64 {
        (self.y(0).powi(2) + self.y(1).powi(2) + self.y(2).powi(2)).sqrt()
    }

    pub fn shifted(&self, k: usize, h: f64) -> Point {
        let mut c = self.0;
        c[k] += h;
        Point(c)
    }
}

/// Step used by [`finite_difference_check`].
pub const FD_STEP: f64 = 1e-4;

/// Largest relative gap between AD first partials and central differences.
pub fn finite_difference_check(f: &Field, p: &Point) -> Result<f64, EvalError> {
    let order = f.budget().min(1);
    if order == 0 {
        return Err(EvalError::OrderBudgetExceeded {
            requested: 1,
            budget: 0,
        });
    }
    let jet = f.evaluate(p, 1)?;
    let mut worst = 0.0f64;
    for k in 0..DIM {
        let fp = f.value(&p.shifted(k, FD_STEP))?;
        let fm = f.value(&p.shifted(k, -FD_STEP))?;
        let fd = (fp - fm) / (2.0 * FD_STEP);
        let ad = jet.grad[k];
        worst = worst.max((ad - fd).abs() / (1.0 + ad.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
