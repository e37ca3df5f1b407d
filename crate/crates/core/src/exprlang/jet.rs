use std::ops::{Add, Div, Mul, Neg, Sub};

use super::ast::Var;

pub const DIM: usize = 5;

/// Truncated second-order Taylor coefficients of a scalar at a chart point.
///
/// `order` says how many derivative levels are meaningful: 0 means only the
/// value, 1 adds the gradient, 2 adds the Hessian. Unused slots are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; DIM],
    pub hess: [[f64; DIM]; DIM],
    order: u8,
}

impl Jet {
    pub fn constant(value: f64) -> Jet {
        Jet {
            value,
            grad: [0.0; DIM],
            hess: [[0.0; DIM]; DIM],
            order: 2,
        }
    }

    pub fn zero() -> Jet {
        Jet::constant(0.0)
    }

    /// The coordinate function `v` seeded at `value`, truncated to `order`.
    pub fn variable(v: Var, value: f64, order: u8) -> Jet {
        let mut j = Jet::constant(value);
        j.order = order.min(2);
        if j.order >= 1 {
            j.grad[v.index()] = 1.0;
        }
        j
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Drops derivative information above `order`.
    pub fn truncate(mut self, order: u8) -> Jet {
        if order < self.order {
            self.order = order;
            if order < 2 {
                self.hess = [[0.0; DIM]; DIM];
            }
            if order < 1 {
                self.grad = [0.0; DIM];
            }
        }
        self
    }

    pub fn partial(&self, v: Var) -> Option<Jet> {
        if self.order == 0 {
            return None;
        }
        let k = v.index();
        let mut j = Jet::constant(self.grad[k]);
        j.order = self.order - 1;
        if j.order >= 1 {
            j.grad = self.hess[k];
        }
        Some(j)
    }

    /// Partial derivative; panics if the jet has no first-order data.
    pub fn d(&self, v: Var) -> Jet {
        self.partial(v)
            .expect("partial derivative of an order-0 jet")
    }

    pub fn d_index(&self, k: usize) -> Jet {
        self.d(Var::from_index(k))
    }

    /// Composition `f ∘ self` given `f`, `f'`, `f''` at `self.value`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        out.order = self.order;
        if self.order >= 1 {
            for i in 0..DIM {
                out.grad[i] = f1 * self.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..DIM {
                for j in i..DIM {
                    let h = f1 * self.hess[i][j] + f2 * self.grad[i] * self.grad[j];
                    out.hess[i][j] = h;
                    out.hess[j][i] = h;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let v = self.value;
        self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn powi(&self, n: i32) -> Jet {
        let v = self.value;
        match n {
            0 => Jet::constant(1.0).truncate(self.order),
            1 => *self,
            _ => {
                let nf = n as f64;
                let f2 = if n == 2 { 2.0 } else { nf * (nf - 1.0) * v.powi(n - 2) };
                self.compose(v.powi(n), nf * v.powi(n - 1), f2)
            }
        }
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().flatten().all(|h| h.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0.0
            && self.grad.iter().all(|g| *g == 0.0)
            && self.hess.iter().flatten().all(|h| *h == 0.0)
    }

    /// Largest absolute entry over value and gradient.
    pub fn magnitude(&self) -> f64 {
        self.grad
            .iter()
            .fold(self.value.abs(), |m, g| m.max(g.abs()))
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        out.value *= s;
        for i in 0..DIM {
            out.grad[i] *= s;
            for j in 0..DIM {
                out.hess[i][j] *= s;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut out = Jet::constant(self.value + o.value);
        out.order = order;
        if order >= 1 {
            for i in 0..DIM {
                out.grad[i] = self.grad[i] + o.grad[i];
            }
        }
        if order >= 2 {
            for i in 0..DIM {
                for j in 0..DIM {
                    out.hess[i][j] = self.hess[i][j] + o.hess[i][j];
                }
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let order = self.order.min(o.order);
        let (a, b) = (self.value, o.value);
        let mut out = Jet::constant(a * b);
        out.order = order;
        if order >= 1 {
            for i in 0..DIM {
                out.grad[i] = a * o.grad[i] + b * self.grad[i];
            }
        }
        if order >= 2 {
            for i in 0..DIM {
                for j in i..DIM {
                    let h = a * o.hess[i][j]
                        + b * self.hess[i][j]
                        + (self.grad[i] * o.grad[j] + self.grad[j] * o.grad[i]);
                    out.hess[i][j] = h;
                    out.hess[j][i] = h;
                }
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.value += o;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, o: f64) -> Jet {
        self.value -= o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::zero()
    }
}
