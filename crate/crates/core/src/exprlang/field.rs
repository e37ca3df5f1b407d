use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::ast::{BinOp, Builtin, Expression, Var};
use super::jet::Jet;
use super::parse::{parse, ParseError};
use super::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("requested a {requested}-jet but the field only supports order {budget}")]
    OrderBudgetExceeded { requested: u8, budget: u8 },
}

/// Arguments of `cutoff` within this distance of the branch point are moved off it.
const CUTOFF_BRANCH_BAND: f64 = 1e-9;
const CUTOFF_NUDGE: f64 = 1e-6;
static BRANCH_WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);

#[derive(Debug)]
enum Node {
    Expr(Expression),
    Const(f64),
    Neg(Field),
    Bin(BinOp, Field, Field),
    Powi(Field, i32),
    Apply(Builtin, Field),
    Partial(Var, Field),
}

/// Scalar function on the chart that can be evaluated to a truncated 2-jet.
///
/// Fields are cheap to clone and share structure. Each derivative extraction
/// lowers the remaining jet budget by one.
#[derive(Clone, Debug)]
pub struct Field {
    node: Arc<Node>,
    budget: u8,
    vars: u8,
}

impl Field {
    pub fn from_expr(e: Expression) -> Field {
        let vars = e.variables();
        Field {
            node: Arc::new(Node::Expr(e)),
            budget: 2,
            vars,
        }
    }

    pub fn parse(src: &str) -> Result<Field, ParseError> {
        parse(src).map(Field::from_expr)
    }

    pub fn constant(v: f64) -> Field {
        Field {
            node: Arc::new(Node::Const(v)),
            budget: 2,
            vars: 0,
        }
    }

    pub fn zero() -> Field {
        Field::constant(0.0)
    }

    pub fn one() -> Field {
        Field::constant(1.0)
    }

    pub fn var(v: Var) -> Field {
        Field::from_expr(Expression::Var(v))
    }

    /// Remaining jet order this field supports.
    pub fn budget(&self) -> u8 {
        self.budget
    }

    /// Bitmask of chart variables the field may depend on.
    pub fn variables(&self) -> u8 {
        self.vars
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.vars & (1 << v.index()) != 0
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.node {
            Node::Const(v) | Node::Expr(Expression::Num(v)) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// The parsed expression, if this field is one.
    pub fn expression(&self) -> Option<&Expression> {
        match &*self.node {
            Node::Expr(e) => Some(e),
            _ => None,
        }
    }

    fn make(node: Node, budget: u8, vars: u8) -> Field {
        Field {
            node: Arc::new(node),
            budget,
            vars,
        }
    }

    fn binary(op: BinOp, a: &Field, b: &Field) -> Field {
        if let (Some(x), Some(y)) = (a.as_constant(), b.as_constant()) {
            let v = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
            };
            if v.is_finite() {
                return Field::constant(v);
            }
        }
        match op {
            BinOp::Add if a.is_zero() => return b.clone(),
            BinOp::Add | BinOp::Sub if b.is_zero() => return a.clone(),
            BinOp::Sub if a.is_zero() => return -b,
            BinOp::Mul if a.is_zero() || b.is_zero() => return Field::zero(),
            BinOp::Mul if a.as_constant() == Some(1.0) => return b.clone(),
            BinOp::Mul | BinOp::Div if b.as_constant() == Some(1.0) => return a.clone(),
            _ => {}
        }
        Field::make(
            Node::Bin(op, a.clone(), b.clone()),
            a.budget.min(b.budget),
            a.vars | b.vars,
        )
    }

    pub fn apply(&self, f: Builtin) -> Field {
        Field::make(Node::Apply(f, self.clone()), self.budget, self.vars)
    }

    pub fn exp(&self) -> Field {
        self.apply(Builtin::Exp)
    }

    pub fn powi(&self, n: i32) -> Field {
        match n {
            0 => Field::one(),
            1 => self.clone(),
            _ => Field::make(Node::Powi(self.clone(), n), self.budget, self.vars),
        }
    }

    pub fn recip(&self) -> Field {
        Field::one() / self
    }

    /// First partial derivative by `v`, consuming one order of jet budget.
    pub fn partial(&self, v: Var) -> Result<Field, EvalError> {
        if !self.depends_on(v) {
            return Ok(Field::zero());
        }
        if self.budget == 0 {
            return Err(EvalError::OrderBudgetExceeded {
                requested: 1,
                budget: 0,
            });
        }
        Ok(Field::make(
            Node::Partial(v, self.clone()),
            self.budget - 1,
            self.vars,
        ))
    }

    /// Evaluates the field and its derivatives up to `order` at `p`.
    pub fn evaluate(&self, p: &Point, order: u8) -> Result<Jet, EvalError> {
        if order > self.budget {
            return Err(EvalError::OrderBudgetExceeded {
                requested: order,
                budget: self.budget,
            });
        }
        self.eval(p, order)
    }

    pub fn value(&self, p: &Point) -> Result<f64, EvalError> {
        Ok(self.evaluate(p, 0)?.value)
    }

    fn eval(&self, p: &Point, order: u8) -> Result<Jet, EvalError> {
        let out = match &*self.node {
            Node::Expr(e) => eval_expr(e, p, order)?,
            Node::Const(v) => Jet::constant(*v).truncate(order),
            Node::Neg(a) => -a.eval(p, order)?,
            Node::Bin(op, a, b) => {
                let x = a.eval(p, order)?;
                let y = b.eval(p, order)?;
                bin_jet(*op, x, y, || self.to_string())?
            }
            Node::Powi(a, n) => {
                let x = a.eval(p, order)?;
                if *n < 0 && x.value == 0.0 {
                    return Err(domain(self, "negative power of zero"));
                }
                x.powi(*n)
            }
            Node::Apply(f, a) => {
                let x = a.eval(p, order)?;
                builtin_jet(*f, x).map_err(|reason| domain(self, reason))?
            }
            Node::Partial(v, a) => a.eval(p, order + 1)?.d(*v),
        };
        if !out.is_finite() {
            return Err(domain(self, "non-finite result"));
        }
        Ok(out)
    }
}

fn domain(f: &impl fmt::Display, reason: &str) -> EvalError {
    EvalError::Domain {
        expr: f.to_string(),
        reason: reason.to_string(),
    }
}

fn bin_jet(
    op: BinOp,
    x: Jet,
    y: Jet,
    describe: impl Fn() -> String,
) -> Result<Jet, EvalError> {
    Ok(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => {
            if y.value == 0.0 {
                return Err(EvalError::Domain {
                    expr: describe(),
                    reason: "division by zero".into(),
                });
            }
            x / y
        }
    })
}

fn builtin_jet(f: Builtin, x: Jet) -> Result<Jet, &'static str> {
    let v = x.value;
    Ok(match f {
        Builtin::Sin => x.compose(v.sin(), v.cos(), -v.sin()),
        Builtin::Cos => x.compose(v.cos(), -v.sin(), -v.cos()),
        Builtin::Tan => {
            let t = v.tan();
            let s = 1.0 + t * t;
            x.compose(t, s, 2.0 * t * s)
        }
        Builtin::Exp => x.exp(),
        Builtin::Ln => {
            if v <= 0.0 {
                return Err("logarithm of a non-positive number");
            }
            x.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
        }
        Builtin::Sqrt => {
            if v < 0.0 || (v == 0.0 && x.order() > 0) {
                return Err("square root of a non-positive number");
            }
            let s = v.sqrt();
            x.compose(s, 0.5 / s, -0.25 / (s * s * s))
        }
        Builtin::Tanh => {
            let t = v.tanh();
            let s = 1.0 - t * t;
            x.compose(t, s, -2.0 * t * s)
        }
        Builtin::Cutoff => {
            let (f0, f1, f2) = cutoff_derivatives(v);
            x.compose(f0, f1, f2)
        }
    })
}

/// `exp(-t/(1-t))` on `t < 1`, zero beyond, with its first two derivatives.
pub fn cutoff_derivatives(t: f64) -> (f64, f64, f64) {
    let t = if (t - 1.0).abs() < CUTOFF_BRANCH_BAND {
        if !BRANCH_WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
            log::warn!("cutoff argument {t} lies on the branch point; evaluating at 1 + {CUTOFF_NUDGE} (reported once)");
        } else {
            log::debug!("cutoff argument {t} nudged off the branch point");
        }
        1.0 + CUTOFF_NUDGE
    } else {
        t
    };
    if t >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 / (1.0 - t);
    let chi = (-t * u).exp();
    if chi == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let d1 = -u * u;
    let d2 = -2.0 * u * u * u;
    (chi, chi * d1, chi * (d2 + d1 * d1))
}

fn eval_expr(e: &Expression, p: &Point, order: u8) -> Result<Jet, EvalError> {
    let out = match e {
        Expression::Num(v) => Jet::constant(*v).truncate(order),
        Expression::Const(c) => Jet::constant(c.value()).truncate(order),
        Expression::Var(v) => Jet::variable(*v, p.get(*v), order),
        Expression::Neg(a) => -eval_expr(a, p, order)?,
        Expression::Binary(op, a, b) => {
            let x = eval_expr(a, p, order)?;
            let y = eval_expr(b, p, order)?;
            bin_jet(*op, x, y, || e.to_string())?
        }
        Expression::Pow(a, n) => eval_expr(a, p, order)?.powi(*n as i32),
        Expression::Call(f, a) => {
            let x = eval_expr(a, p, order)?;
            builtin_jet(*f, x).map_err(|reason| domain(e, reason))?
        }
    };
    if !out.is_finite() {
        return Err(domain(e, "non-finite result"));
    }
    Ok(out)
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Expr(e) => write!(f, "{e}"),
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a}) {s} ({b})")
            }
            Node::Powi(a, n) => write!(f, "({a})^{n}"),
            Node::Apply(func, a) => write!(f, "{}({a})", func.name()),
            Node::Partial(v, a) => write!(f, "d/d{}[{a}]", v.name()),
        }
    }
}

macro_rules! field_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr<Field> for Field {
            type Output = Field;
            fn $method(self, o: Field) -> Field {
                Field::binary($op, &self, &o)
            }
        }
        impl $tr<&Field> for Field {
            type Output = Field;
            fn $method(self, o: &Field) -> Field {
                Field::binary($op, &self, o)
            }
        }
        impl $tr<Field> for &Field {
            type Output = Field;
            fn $method(self, o: Field) -> Field {
                Field::binary($op, self, &o)
            }
        }
        impl $tr<&Field> for &Field {
            type Output = Field;
            fn $method(self, o: &Field) -> Field {
                Field::binary($op, self, o)
            }
        }
        impl $tr<f64> for Field {
            type Output = Field;
            fn $method(self, o: f64) -> Field {
                Field::binary($op, &self, &Field::constant(o))
            }
        }
        impl $tr<f64> for &Field {
            type Output = Field;
            fn $method(self, o: f64) -> Field {
                Field::binary($op, self, &Field::constant(o))
            }
        }
    };
}

field_binop!(Add, add, BinOp::Add);
field_binop!(Sub, sub, BinOp::Sub);
field_binop!(Mul, mul, BinOp::Mul);
field_binop!(Div, div, BinOp::Div);

impl Neg for Field {
    type Output = Field;
    fn neg(self) -> Field {
        -&self
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        if let Some(v) = self.as_constant() {
            return Field::constant(-v);
        }
        Field::make(Node::Neg(self.clone()), self.budget, self.vars)
    }
}

impl Default for Field {
    fn default() -> Self {
        Field::zero()
    }
}

impl From<Expression> for Field {
    fn from(e: Expression) -> Self {
        Field::from_expr(e)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::constant(v)
    }
}
