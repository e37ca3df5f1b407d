use std::fmt;

/// Chart variables in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
    Y3,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::X1, Var::X2, Var::Y1, Var::Y2, Var::Y3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Var {
        Var::ALL[i]
    }

    /// Fiber coordinate `y{a+1}` for `a` in 0..3.
    pub fn fiber(a: usize) -> Var {
        Var::ALL[2 + a]
    }

    /// Base coordinate `x{i+1}` for `i` in 0..2.
    pub fn base(i: usize) -> Var {
        Var::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::Y1 => "y1",
            Var::Y2 => "y2",
            Var::Y3 => "y3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Cutoff,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Tan => "tan",
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
            Builtin::Sqrt => "sqrt",
            Builtin::Tanh => "tanh",
            Builtin::Cutoff => "cutoff",
        }
    }

    pub fn from_name(s: &str) -> Option<Builtin> {
        Some(match s {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "tan" => Builtin::Tan,
            "exp" => Builtin::Exp,
            "ln" => Builtin::Ln,
            "sqrt" => Builtin::Sqrt,
            "tanh" => Builtin::Tanh,
            "cutoff" => Builtin::Cutoff,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Parsed coordinate expression. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, u32),
    Call(Builtin, Box<Expression>),
}

impl Expression {
    pub fn num(v: f64) -> Self {
        Expression::Num(v)
    }

    pub fn var(v: Var) -> Self {
        Expression::Var(v)
    }

    pub fn binary(op: BinOp, a: Expression, b: Expression) -> Self {
        Expression::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(base: Expression, n: u32) -> Self {
        Expression::Pow(Box::new(base), n)
    }

    pub fn call(f: Builtin, arg: Expression) -> Self {
        Expression::Call(f, Box::new(arg))
    }

    pub fn neg(a: Expression) -> Self {
        Expression::Neg(Box::new(a))
    }

    /// Bitmask of chart variables occurring in the tree (bit i = `Var::from_index(i)`).
    pub fn variables(&self) -> u8 {
        match self {
            Expression::Num(_) | Expression::Const(_) => 0,
            Expression::Var(v) => 1 << v.index(),
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Call(_, a) => a.variables(),
            Expression::Binary(_, a, b) => a.variables() | b.variables(),
        }
    }

    /// Binding strength used by the printer: 1 sum, 2 product, 3 unary minus, 4 power, 5 atom.
    fn level(&self) -> u8 {
        match self {
            Expression::Binary(op, _, _) => op.precedence(),
            Expression::Neg(_) => 3,
            Expression::Pow(..) => 4,
            Expression::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expression, min_level: u8) -> fmt::Result {
    if e.level() < min_level {
        write!(f, "(")?;
        write!(f, "{e}")?;
        write!(f, ")")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{v:?}"),
            Expression::Var(v) => write!(f, "{}", v.name()),
            Expression::Const(Constant::Pi) => write!(f, "pi"),
            Expression::Const(Constant::E) => write!(f, "e"),
            Expression::Neg(a) => {
                write!(f, "-")?;
                write_at(f, a, 3)
            }
            Expression::Binary(op, a, b) => {
                let p = op.precedence();
                // Operators are left associative, so the right operand needs a
                // strictly tighter binding to print without parentheses.
                write_at(f, a, p)?;
                write!(f, " {} ", op.symbol())?;
                write_at(f, b, p + 1)
            }
            Expression::Pow(a, n) => {
                write_at(f, a, 5)?;
                write!(f, "^{n}")
            }
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
