//! Polarized expression trees for complex Finsler metrics.
//!
//! Conjugation is not a node: a metric is written over the `4n` independent
//! variables `(z, zbar, v, vbar)`, which turns Wirtinger derivatives into
//! ordinary partial derivatives. [`Expr::conj`] produces the polarized
//! conjugate of an expression by swapping slots.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::point::{Point, Polarized};
use crate::series::{Bound, Family, JetSpace, Series};

/// Magnitude below which division, logarithms and fractional powers refuse
/// to evaluate.
pub const SINGULAR_GUARD: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Z,
    Zbar,
    V,
    Vbar,
}

impl Slot {
    pub fn family(self) -> Family {
        match self {
            Slot::Z => Family::Z,
            Slot::Zbar => Family::Zbar,
            Slot::V => Family::V,
            Slot::Vbar => Family::Vbar,
        }
    }

    pub fn conj(self) -> Slot {
        match self {
            Slot::Z => Slot::Zbar,
            Slot::Zbar => Slot::Z,
            Slot::V => Slot::Vbar,
            Slot::Vbar => Slot::V,
        }
    }
}

/// Expression node. Variable indices are 1-based, matching the JSON format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Expr {
    Var {
        slot: Slot,
        index: usize,
    },
    Const {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Add {
        args: Vec<Expr>,
    },
    Mul {
        args: Vec<Expr>,
    },
    Div {
        args: Vec<Expr>,
    },
    /// Real power `args[0]^re`.
    Pow {
        args: Vec<Expr>,
        re: f64,
    },
    Sqrt {
        args: Vec<Expr>,
    },
    Exp {
        args: Vec<Expr>,
    },
    Log {
        args: Vec<Expr>,
    },
    Neg {
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn var(slot: Slot, index: usize) -> Expr {
        Expr::Var { slot, index }
    }

    pub fn z(index: usize) -> Expr {
        Expr::var(Slot::Z, index)
    }

    pub fn zbar(index: usize) -> Expr {
        Expr::var(Slot::Zbar, index)
    }

    pub fn v(index: usize) -> Expr {
        Expr::var(Slot::V, index)
    }

    pub fn vbar(index: usize) -> Expr {
        Expr::var(Slot::Vbar, index)
    }

    pub fn real(re: f64) -> Expr {
        Expr::Const { re, im: 0.0 }
    }

    pub fn complex(c: Complex64) -> Expr {
        Expr::Const { re: c.re, im: c.im }
    }

    pub fn sum(args: Vec<Expr>) -> Expr {
        match args.len() {
            0 => Expr::real(0.0),
            1 => args.into_iter().next().unwrap(),
            _ => Expr::Add { args },
        }
    }

    pub fn product(args: Vec<Expr>) -> Expr {
        match args.len() {
            0 => Expr::real(1.0),
            1 => args.into_iter().next().unwrap(),
            _ => Expr::Mul { args },
        }
    }

    pub fn pow(self, p: f64) -> Expr {
        Expr::Pow {
            args: vec![self],
            re: p,
        }
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt { args: vec![self] }
    }

    pub fn exp(self) -> Expr {
        Expr::Exp { args: vec![self] }
    }

    pub fn ln(self) -> Expr {
        Expr::Log { args: vec![self] }
    }

    fn args(&self) -> &[Expr] {
        match self {
            Expr::Var { .. } | Expr::Const { .. } => &[],
            Expr::Add { args }
            | Expr::Mul { args }
            | Expr::Div { args }
            | Expr::Pow { args, .. }
            | Expr::Sqrt { args }
            | Expr::Exp { args }
            | Expr::Log { args }
            | Expr::Neg { args } => args,
        }
    }

    /// Check arities and index ranges for dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let arity = |want: usize, got: usize, op: &str| {
            if want == got {
                Ok(())
            } else {
                Err(FinslerError::InvalidExpression(format!(
                    "`{op}` takes {want} argument(s), got {got}"
                )))
            }
        };
        match self {
            Expr::Var { index, .. } => {
                if *index == 0 || *index > n {
                    return Err(FinslerError::InvalidExpression(format!(
                        "variable index {index} outside 1..={n}"
                    )));
                }
            }
            Expr::Const { re, im } => {
                if !re.is_finite() || !im.is_finite() {
                    return Err(FinslerError::InvalidExpression("non-finite constant".into()));
                }
            }
            Expr::Add { args } | Expr::Mul { args } => {
                if args.is_empty() {
                    return Err(FinslerError::InvalidExpression("empty n-ary node".into()));
                }
            }
            Expr::Div { args } => arity(2, args.len(), "div")?,
            Expr::Pow { args, re } => {
                arity(1, args.len(), "pow")?;
                if !re.is_finite() {
                    return Err(FinslerError::InvalidExpression("non-finite exponent".into()));
                }
            }
            Expr::Sqrt { args } => arity(1, args.len(), "sqrt")?,
            Expr::Exp { args } => arity(1, args.len(), "exp")?,
            Expr::Log { args } => arity(1, args.len(), "log")?,
            Expr::Neg { args } => arity(1, args.len(), "neg")?,
        }
        self.args().iter().try_for_each(|a| a.validate(n))
    }

    /// Whether any variable of the given slot occurs.
    pub fn uses_slot(&self, slot: Slot) -> bool {
        match self {
            Expr::Var { slot: s, .. } => *s == slot,
            _ => self.args().iter().any(|a| a.uses_slot(slot)),
        }
    }

    /// Largest variable index referenced (0 for constants).
    pub fn max_index(&self) -> usize {
        match self {
            Expr::Var { index, .. } => *index,
            _ => self.args().iter().map(Expr::max_index).max().unwrap_or(0),
        }
    }

    /// Re-index variables of the given slots by `offset` (used when placing
    /// a factor metric into a product manifold).
    pub fn shift_indices(&self, offset: usize) -> Expr {
        self.map_vars(&|slot, index| Expr::var(slot, index + offset))
    }

    fn map_vars(&self, f: &dyn Fn(Slot, usize) -> Expr) -> Expr {
        let map_args = |args: &[Expr]| args.iter().map(|a| a.map_vars(f)).collect::<Vec<_>>();
        match self {
            Expr::Var { slot, index } => f(*slot, *index),
            Expr::Const { .. } => self.clone(),
            Expr::Add { args } => Expr::Add { args: map_args(args) },
            Expr::Mul { args } => Expr::Mul { args: map_args(args) },
            Expr::Div { args } => Expr::Div { args: map_args(args) },
            Expr::Pow { args, re } => Expr::Pow {
                args: map_args(args),
                re: *re,
            },
            Expr::Sqrt { args } => Expr::Sqrt { args: map_args(args) },
            Expr::Exp { args } => Expr::Exp { args: map_args(args) },
            Expr::Log { args } => Expr::Log { args: map_args(args) },
            Expr::Neg { args } => Expr::Neg { args: map_args(args) },
        }
    }

    /// Polarized conjugate: `conj(f(conj zbar, conj z, conj vbar, conj v))`.
    pub fn conj(&self) -> Expr {
        let swapped = self.map_vars(&|slot, index| Expr::var(slot.conj(), index));
        swapped.conj_constants()
    }

    fn conj_constants(&self) -> Expr {
        let map_args = |args: &[Expr]| args.iter().map(|a| a.conj_constants()).collect::<Vec<_>>();
        match self {
            Expr::Var { .. } => self.clone(),
            Expr::Const { re, im } => Expr::Const { re: *re, im: -im },
            Expr::Add { args } => Expr::Add { args: map_args(args) },
            Expr::Mul { args } => Expr::Mul { args: map_args(args) },
            Expr::Div { args } => Expr::Div { args: map_args(args) },
            Expr::Pow { args, re } => Expr::Pow {
                args: map_args(args),
                re: *re,
            },
            Expr::Sqrt { args } => Expr::Sqrt { args: map_args(args) },
            Expr::Exp { args } => Expr::Exp { args: map_args(args) },
            Expr::Log { args } => Expr::Log { args: map_args(args) },
            Expr::Neg { args } => Expr::Neg { args: map_args(args) },
        }
    }

    /// Plain complex evaluation at polarized values.
    pub fn eval(&self, x: &Polarized) -> Result<Complex64> {
        Ok(match self {
            Expr::Var { slot, index } => {
                let vals = match slot {
                    Slot::Z => &x.z,
                    Slot::Zbar => &x.zbar,
                    Slot::V => &x.v,
                    Slot::Vbar => &x.vbar,
                };
                *vals.get(index - 1).ok_or_else(|| {
                    FinslerError::DimensionMismatch(format!("index {index} for n = {}", x.n()))
                })?
            }
            Expr::Const { re, im } => Complex64::new(*re, *im),
            Expr::Add { args } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in args {
                    acc += a.eval(x)?;
                }
                acc
            }
            Expr::Mul { args } => {
                let mut acc = Complex64::new(1.0, 0.0);
                for a in args {
                    acc *= a.eval(x)?;
                }
                acc
            }
            Expr::Div { args } => {
                let den = args[1].eval(x)?;
                if den.norm() < SINGULAR_GUARD {
                    return Err(FinslerError::NearSingular(format!("division by {den}")));
                }
                args[0].eval(x)? / den
            }
            Expr::Pow { args, re } => {
                let b = args[0].eval(x)?;
                if re.fract() == 0.0 && *re >= 0.0 && *re <= 64.0 {
                    b.powu(*re as u32)
                } else {
                    if b.norm() < SINGULAR_GUARD {
                        return Err(FinslerError::NearSingular(format!("power {re} of {b}")));
                    }
                    b.powc(Complex64::new(*re, 0.0))
                }
            }
            Expr::Sqrt { args } => {
                let b = args[0].eval(x)?;
                if b.norm() < SINGULAR_GUARD {
                    return Err(FinslerError::NearSingular(format!("sqrt of {b}")));
                }
                b.powc(Complex64::new(0.5, 0.0))
            }
            Expr::Exp { args } => args[0].eval(x)?.exp(),
            Expr::Log { args } => {
                let b = args[0].eval(x)?;
                if b.norm() < SINGULAR_GUARD {
                    return Err(FinslerError::NearSingular(format!("log of {b}")));
                }
                b.ln()
            }
            Expr::Neg { args } => -args[0].eval(x)?,
        })
    }

    /// Truncated Taylor propagation through the tree.
    pub fn eval_series(&self, x: &Polarized, space: &Arc<JetSpace>, bound: Bound) -> Result<Series> {
        let rec = |e: &Expr| e.eval_series(x, space, bound);
        Ok(match self {
            Expr::Var { slot, index } => {
                let vals = match slot {
                    Slot::Z => &x.z,
                    Slot::Zbar => &x.zbar,
                    Slot::V => &x.v,
                    Slot::Vbar => &x.vbar,
                };
                let value = *vals.get(index - 1).ok_or_else(|| {
                    FinslerError::DimensionMismatch(format!("index {index} for n = {}", x.n()))
                })?;
                Series::variable(space, bound, slot.family(), index - 1, value)
            }
            Expr::Const { re, im } => Series::constant(space, bound, Complex64::new(*re, *im)),
            Expr::Add { args } => {
                let mut acc = rec(&args[0])?;
                for a in &args[1..] {
                    acc = acc.add(&rec(a)?);
                }
                acc
            }
            Expr::Mul { args } => {
                let mut acc = rec(&args[0])?;
                for a in &args[1..] {
                    acc = acc.mul(&rec(a)?);
                }
                acc
            }
            Expr::Div { args } => rec(&args[0])?.div(&rec(&args[1])?, SINGULAR_GUARD)?,
            Expr::Pow { args, re } => rec(&args[0])?.powf(*re, SINGULAR_GUARD)?,
            Expr::Sqrt { args } => rec(&args[0])?.sqrt(SINGULAR_GUARD)?,
            Expr::Exp { args } => rec(&args[0])?.exp(),
            Expr::Log { args } => rec(&args[0])?.ln(SINGULAR_GUARD)?,
            Expr::Neg { args } => rec(&args[0])?.neg(),
        })
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        let mut args = match self {
            Expr::Add { args } => args,
            e => vec![e],
        };
        match rhs {
            Expr::Add { args: more } => args.extend(more),
            e => args.push(e),
        }
        Expr::Add { args }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        let mut args = match self {
            Expr::Mul { args } => args,
            e => vec![e],
        };
        match rhs {
            Expr::Mul { args: more } => args.extend(more),
            e => args.push(e),
        }
        Expr::Mul { args }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg { args: vec![self] }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div {
            args: vec![self, rhs],
        }
    }
}

/// A complex Finsler metric `G = F^2` in polarized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricExpr {
    pub name: String,
    pub n: usize,
    pub expr: Expr,
    /// Expressions whose vanishing marks the non-smooth locus.
    #[serde(default)]
    pub singular: Vec<Expr>,
}

impl MetricExpr {
    pub fn new(name: impl Into<String>, n: usize, expr: Expr, singular: Vec<Expr>) -> Result<Self> {
        if n == 0 {
            return Err(FinslerError::DimensionMismatch("n must be positive".into()));
        }
        expr.validate(n)?;
        for s in &singular {
            s.validate(n)?;
        }
        Ok(MetricExpr {
            name: name.into(),
            n,
            expr,
            singular,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MetricExpr = serde_json::from_str(text)?;
        MetricExpr::new(m.name, m.n, m.expr, m.singular)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn eval(&self, p: &Point) -> Result<Complex64> {
        self.check_point(p)?;
        self.expr.eval(&p.polarized())
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.n() != self.n {
            return Err(FinslerError::DimensionMismatch(format!(
                "metric has n = {}, point has n = {}",
                self.n,
                p.n()
            )));
        }
        Ok(())
    }

    /// Smallest magnitude among the singular-locus predicates at `p`
    /// (`+inf` when none are declared).
    pub fn singular_clearance(&self, p: &Point) -> Result<f64> {
        let x = p.polarized();
        let mut best = f64::INFINITY;
        for s in &self.singular {
            best = best.min(s.eval(&x)?.norm());
        }
        Ok(best)
    }

    /// `|Im G| / |G|` at a consistent point.
    pub fn reality_defect(&self, p: &Point) -> Result<f64> {
        let g = self.eval(p)?;
        Ok(g.im.abs() / g.norm().max(f64::MIN_POSITIVE))
    }
}

/// A real scalar function of `(z, zbar)` in polarized form, such as a
/// conformal factor exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarExpr {
    pub name: String,
    pub expr: Expr,
}

impl ScalarExpr {
    pub fn new(name: impl Into<String>, expr: Expr) -> Result<Self> {
        if expr.uses_slot(Slot::V) || expr.uses_slot(Slot::Vbar) {
            return Err(FinslerError::InvalidExpression(
                "scalar function of z must not reference fiber slots".into(),
            ));
        }
        Ok(ScalarExpr {
            name: name.into(),
            expr,
        })
    }
}
