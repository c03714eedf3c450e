//! A small piecewise-smooth expression language.
//!
//! Expressions are built from constants, the variables `xi1..xip`, `x1..xn`,
//! `z1..znz`, the four arithmetic operations, non-negative integer powers,
//! unary minus and the kink-producing nodes `abs`, `min` and `max`.
//!
//! Besides evaluation, every expression exposes its *smooth selections* at a
//! point: one (value, gradient) pair for every combination of branches that is
//! active within [`ACTIVE_TOL`]. Each selection also carries the first-order
//! region on which it is the active branch, which is what the graph normal
//! cone computation in [`crate::geometry`] consumes.

mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::linalg;

/// Kink activity tolerance (scaled by `max(1, |operands|)`).
pub const ACTIVE_TOL: f64 = 1e-9;
/// Division denominators below this magnitude are rejected.
pub const EPS_DIV: f64 = 1e-12;
/// Upper bound on the number of simultaneously active selections.
pub const MAX_SELECTIONS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("index out of range in '{name}' at byte {offset} (declared dimension {limit})")]
    IndexOutOfRange {
        offset: usize,
        name: String,
        limit: usize,
    },
    #[error("division by near-zero value {value:e}")]
    DivisionByNearZero { value: f64 },
    #[error("point dimensions do not match declared dimensions {expected:?}")]
    DimensionMismatch { expected: Dims },
    #[error("more than {MAX_SELECTIONS} simultaneously active branches")]
    TooManySelections,
}

/// Declared dimensions of the three variable blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub p: usize,
    pub n: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(p: usize, n: usize, nz: usize) -> Self {
        Dims { p, n, nz }
    }

    pub fn total(&self) -> usize {
        self.p + self.n + self.nz
    }
}

/// Zero-based variable reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Xi(usize),
    X(usize),
    Z(usize),
}

impl Var {
    fn flat_index(&self, dims: Dims) -> usize {
        match *self {
            Var::Xi(i) => i,
            Var::X(j) => dims.p + j,
            Var::Z(k) => dims.p + dims.n + k,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Xi(i) => write!(f, "xi{}", i + 1),
            Var::X(j) => write!(f, "x{}", j + 1),
            Var::Z(k) => write!(f, "z{}", k + 1),
        }
    }
}

/// Which block of variables a derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Xi,
    X,
    Z,
    XiX,
    All,
}

impl Block {
    fn range(&self, dims: Dims) -> std::ops::Range<usize> {
        match self {
            Block::Xi => 0..dims.p,
            Block::X => dims.p..dims.p + dims.n,
            Block::Z => dims.p + dims.n..dims.total(),
            Block::XiX => 0..dims.p + dims.n,
            Block::All => 0..dims.total(),
        }
    }
}

/// Evaluation point `(ξ, x, z)`.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub xi: &'a [f64],
    pub x: &'a [f64],
    pub z: &'a [f64],
}

impl<'a> Point<'a> {
    pub fn new(xi: &'a [f64], x: &'a [f64], z: &'a [f64]) -> Self {
        Point { xi, x, z }
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::Xi(i) => self.xi[i],
            Var::X(j) => self.x[j],
            Var::Z(k) => self.z[k],
        }
    }

    fn check(&self, dims: Dims) -> Result<(), ExprError> {
        if self.xi.len() < dims.p || self.x.len() < dims.n || self.z.len() < dims.nz {
            return Err(ExprError::DimensionMismatch { expected: dims });
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        linalg::norm_inf(self.xi)
            .max(linalg::norm_inf(self.x))
            .max(linalg::norm_inf(self.z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Abs(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

/// One smooth branch active at the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub value: f64,
    /// Gradient over the flat `(ξ, x, z)` layout.
    pub grad: Vec<f64>,
    /// Linearized activity region: the branch is active for directions `h`
    /// with `⟨c, h⟩ ≥ 0` for every `c` listed here.
    pub conditions: Vec<Vec<f64>>,
}

/// Gradients of every smooth branch active at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradHull {
    pub generators: Vec<Vec<f64>>,
    pub active_tol: f64,
}

impl GradHull {
    pub fn is_smooth(&self) -> bool {
        self.generators.len() == 1
    }
}

pub fn parse(text: &str, dims: Dims) -> Result<Expr, ExprError> {
    parser::Parser::new(text, dims).parse_all()
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, pt: &Point) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => pt.get(*v),
            Expr::Neg(a) => -a.eval(pt)?,
            Expr::Add(a, b) => a.eval(pt)? + b.eval(pt)?,
            Expr::Sub(a, b) => a.eval(pt)? - b.eval(pt)?,
            Expr::Mul(a, b) => a.eval(pt)? * b.eval(pt)?,
            Expr::Div(a, b) => {
                let den = b.eval(pt)?;
                if den.abs() < EPS_DIV {
                    return Err(ExprError::DivisionByNearZero { value: den });
                }
                a.eval(pt)? / den
            }
            Expr::Pow(a, n) => a.eval(pt)?.powi(*n as i32),
            Expr::Abs(a) => a.eval(pt)?.abs(),
            Expr::Min(a, b) => a.eval(pt)?.min(b.eval(pt)?),
            Expr::Max(a, b) => a.eval(pt)?.max(b.eval(pt)?),
        })
    }

    /// Evaluate after checking the point against `dims`.
    pub fn eval_checked(&self, pt: &Point, dims: Dims) -> Result<f64, ExprError> {
        pt.check(dims)?;
        self.eval(pt)
    }

    /// All smooth branches active at `pt`, gradients over the flat layout of `dims`.
    pub fn selections(&self, pt: &Point, dims: Dims) -> Result<Vec<Selection>, ExprError> {
        pt.check(dims)?;
        let scale = pt.scale().max(1.0);
        self.sel(pt, dims, scale)
    }

    fn sel(&self, pt: &Point, dims: Dims, scale: f64) -> Result<Vec<Selection>, ExprError> {
        let d = dims.total();
        let leaf = |value: f64, grad: Vec<f64>| Selection {
            value,
            grad,
            conditions: Vec::new(),
        };
        let out = match self {
            Expr::Const(c) => vec![leaf(*c, vec![0.0; d])],
            Expr::Var(v) => {
                let mut g = vec![0.0; d];
                g[v.flat_index(dims)] = 1.0;
                vec![leaf(pt.get(*v), g)]
            }
            Expr::Neg(a) => a
                .sel(pt, dims, scale)?
                .into_iter()
                .map(|s| Selection {
                    value: -s.value,
                    grad: linalg::neg(&s.grad),
                    conditions: s.conditions,
                })
                .collect(),
            Expr::Add(a, b) => combine(a.sel(pt, dims, scale)?, b.sel(pt, dims, scale)?, |x, y| {
                (x.value + y.value, linalg::add(&x.grad, &y.grad))
            })?,
            Expr::Sub(a, b) => combine(a.sel(pt, dims, scale)?, b.sel(pt, dims, scale)?, |x, y| {
                (x.value - y.value, linalg::sub(&x.grad, &y.grad))
            })?,
            Expr::Mul(a, b) => combine(a.sel(pt, dims, scale)?, b.sel(pt, dims, scale)?, |x, y| {
                let mut g = linalg::scale(&x.grad, y.value);
                linalg::axpy(x.value, &y.grad, &mut g);
                (x.value * y.value, g)
            })?,
            Expr::Div(a, b) => {
                let bs = b.sel(pt, dims, scale)?;
                if let Some(s) = bs.iter().find(|s| s.value.abs() < EPS_DIV) {
                    return Err(ExprError::DivisionByNearZero { value: s.value });
                }
                combine(a.sel(pt, dims, scale)?, bs, |x, y| {
                    let q = x.value / y.value;
                    let mut g = linalg::scale(&x.grad, 1.0 / y.value);
                    linalg::axpy(-q / y.value, &y.grad, &mut g);
                    (q, g)
                })?
            }
            Expr::Pow(a, n) => a
                .sel(pt, dims, scale)?
                .into_iter()
                .map(|s| {
                    let (value, grad) = if *n == 0 {
                        (1.0, vec![0.0; d])
                    } else {
                        let k = *n as f64 * s.value.powi(*n as i32 - 1);
                        (s.value.powi(*n as i32), linalg::scale(&s.grad, k))
                    };
                    Selection {
                        value,
                        grad,
                        conditions: s.conditions,
                    }
                })
                .collect(),
            Expr::Abs(a) => {
                let mut out = Vec::new();
                for s in a.sel(pt, dims, scale)? {
                    let tol = ACTIVE_TOL * scale.max(s.value.abs());
                    if s.value.abs() <= tol {
                        let mut plus = s.clone();
                        plus.conditions.push(s.grad.clone());
                        let mut minus = Selection {
                            value: -s.value,
                            grad: linalg::neg(&s.grad),
                            conditions: s.conditions.clone(),
                        };
                        minus.conditions.push(linalg::neg(&s.grad));
                        out.push(plus);
                        out.push(minus);
                    } else if s.value > 0.0 {
                        out.push(s);
                    } else {
                        out.push(Selection {
                            value: -s.value,
                            grad: linalg::neg(&s.grad),
                            conditions: s.conditions,
                        });
                    }
                }
                out
            }
            Expr::Min(a, b) => minmax(a.sel(pt, dims, scale)?, b.sel(pt, dims, scale)?, scale, false)?,
            Expr::Max(a, b) => minmax(a.sel(pt, dims, scale)?, b.sel(pt, dims, scale)?, scale, true)?,
        };
        if out.len() > MAX_SELECTIONS {
            return Err(ExprError::TooManySelections);
        }
        Ok(out)
    }

    /// Generators of the branch hull of gradients with respect to `wrt`.
    ///
    /// At points where every kink node is strictly on one branch this is the
    /// classical gradient. At kinks the hull of the returned generators is the
    /// convex subdifferential for convex compositions and an over-estimate of
    /// the basic subdifferential otherwise.
    pub fn grad_hull(&self, pt: &Point, dims: Dims, wrt: Block) -> Result<GradHull, ExprError> {
        let range = wrt.range(dims);
        let gens: Vec<Vec<f64>> = self
            .selections(pt, dims)?
            .into_iter()
            .map(|s| s.grad[range.clone()].to_vec())
            .collect();
        Ok(GradHull {
            generators: linalg::dedup_points(gens, 1e-12),
            active_tol: ACTIVE_TOL,
        })
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut set = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                set.insert(*v);
            }
        });
        set
    }

    pub fn is_constant(&self) -> bool {
        self.variables().is_empty()
    }

    pub fn depends_on_z(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::Z(_)))
    }

    pub fn max_depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) => 1 + a.max_depth(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => 1 + a.max_depth().max(b.max_depth()),
        }
    }

    /// Polynomial degree in the `z` block, `None` when `z` enters through a
    /// kink, a denominator or otherwise non-polynomially.
    pub fn z_degree(&self) -> Option<u32> {
        match self {
            Expr::Const(_) => Some(0),
            Expr::Var(Var::Z(_)) => Some(1),
            Expr::Var(_) => Some(0),
            Expr::Neg(a) => a.z_degree(),
            Expr::Add(a, b) | Expr::Sub(a, b) => Some(a.z_degree()?.max(b.z_degree()?)),
            Expr::Mul(a, b) => Some(a.z_degree()? + b.z_degree()?),
            Expr::Div(a, b) => match b.z_degree()? {
                0 => a.z_degree(),
                _ => None,
            },
            Expr::Pow(a, n) => Some(a.z_degree()? * n),
            Expr::Abs(a) => (a.z_degree()? == 0).then_some(0),
            Expr::Min(a, b) | Expr::Max(a, b) => {
                (a.z_degree()? == 0 && b.z_degree()? == 0).then_some(0)
            }
        }
    }

    pub fn is_affine_in_z(&self) -> bool {
        matches!(self.z_degree(), Some(d) if d <= 1)
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) => a.walk(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 0,
            _ => 4,
        }
    }
}

fn combine(
    a: Vec<Selection>,
    b: Vec<Selection>,
    op: impl Fn(&Selection, &Selection) -> (f64, Vec<f64>),
) -> Result<Vec<Selection>, ExprError> {
    if a.len() * b.len() > MAX_SELECTIONS {
        return Err(ExprError::TooManySelections);
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            let (value, grad) = op(x, y);
            let mut conditions = x.conditions.clone();
            conditions.extend(y.conditions.iter().cloned());
            out.push(Selection {
                value,
                grad,
                conditions,
            });
        }
    }
    Ok(out)
}

fn minmax(
    a: Vec<Selection>,
    b: Vec<Selection>,
    scale: f64,
    is_max: bool,
) -> Result<Vec<Selection>, ExprError> {
    if a.len() * b.len() > MAX_SELECTIONS {
        return Err(ExprError::TooManySelections);
    }
    let sign = if is_max { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for x in &a {
        for y in &b {
            let tol = ACTIVE_TOL * scale.max(x.value.abs()).max(y.value.abs());
            let mut base = x.conditions.clone();
            base.extend(y.conditions.iter().cloned());
            let diff = sign * (x.value - y.value);
            let pick = |s: &Selection, cond: Option<Vec<f64>>| {
                let mut conditions = base.clone();
                conditions.extend(cond);
                Selection {
                    value: s.value,
                    grad: s.grad.clone(),
                    conditions,
                }
            };
            if diff.abs() <= tol {
                let dx = linalg::scale(&linalg::sub(&x.grad, &y.grad), sign);
                out.push(pick(x, Some(dx.clone())));
                out.push(pick(y, Some(linalg::neg(&dx))));
            } else if diff > 0.0 {
                out.push(pick(x, None));
            } else {
                out.push(pick(y, None));
            }
        }
    }
    Ok(out)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, needs: bool) -> fmt::Result {
            if needs {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, a.precedence() < 4)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (op, prec) = match self {
                    Expr::Add(..) => ("+", 1),
                    Expr::Sub(..) => ("-", 1),
                    Expr::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                wrap(f, a, a.precedence() < prec)?;
                write!(f, " {op} ")?;
                wrap(f, b, b.precedence() <= prec)
            }
            Expr::Pow(a, n) => {
                wrap(f, a, a.precedence() < 4)?;
                write!(f, "^{n}")
            }
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

/// A vector-valued map given componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFunc {
    pub components: Vec<Expr>,
    pub dims: Dims,
}

impl VectorFunc {
    pub fn parse(texts: &[String], dims: Dims) -> Result<Self, ExprError> {
        let components = texts
            .iter()
            .map(|t| parse(t, dims))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorFunc { components, dims })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, pt: &Point) -> Result<Vec<f64>, ExprError> {
        pt.check(self.dims)?;
        self.components.iter().map(|c| c.eval(pt)).collect()
    }

    /// Every Jacobian (rows = components, columns = `wrt` block) obtained by
    /// choosing one active branch per component.
    pub fn jacobians(&self, pt: &Point, wrt: Block) -> Result<Vec<Vec<Vec<f64>>>, ExprError> {
        let mut out: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
        for c in &self.components {
            let hull = c.grad_hull(pt, self.dims, wrt)?;
            if out.len() * hull.generators.len() > MAX_SELECTIONS {
                return Err(ExprError::TooManySelections);
            }
            let mut next = Vec::with_capacity(out.len() * hull.generators.len());
            for partial in &out {
                for g in &hull.generators {
                    let mut j = partial.clone();
                    j.push(g.clone());
                    next.push(j);
                }
            }
            out = next;
        }
        Ok(out)
    }

    pub fn is_affine_in_z(&self) -> bool {
        self.components.iter().all(Expr::is_affine_in_z)
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    const D: Dims = Dims { p: 2, n: 1, nz: 1 };

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (0.0f64..1e3).prop_map(Expr::Const),
            (0u32..20).prop_map(|k| Expr::Const(k as f64)),
            prop_oneof![Just(Var::Xi(0)), Just(Var::Xi(1)), Just(Var::X(0)), Just(Var::Z(0))].prop_map(Expr::Var),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(5, 48, 2, |inner| {
            let b = |a: Expr| Box::new(a);
            prop_oneof![
                inner.clone().prop_map(move |a| Expr::Neg(b(a))),
                inner.clone().prop_map(move |a| Expr::Abs(b(a))),
                (inner.clone(), 0u32..4).prop_map(move |(a, n)| Expr::Pow(b(a), n)),
                (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Add(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Sub(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Mul(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Div(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Min(b(a), b(c))),
                (inner.clone(), inner).prop_map(move |(a, c)| Expr::Max(b(a), b(c))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn display_parse_round_trip(e in tree()) {
            let printed = e.to_string();
            let back = parse(&printed, D).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
            prop_assert_eq!(back, e, "{}", printed);
        }
    }
}
