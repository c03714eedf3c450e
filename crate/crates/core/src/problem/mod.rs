//! Problem data model, file loading and the brute-force solution oracle.
//!
//! A problem is: find `(ξ, x)` minimizing `φ(ξ, x)` over `ξ ∈ Ω` and
//! `x ∈ E(ξ)`, where `E(ξ)` collects the `x ∈ K(ξ)` with
//! `f(ξ, x, z) ∈ C` for every `z ∈ K(ξ)`.

mod format;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{self, Block, Dims, Expr, ExprError, Point, Var, VectorFunc};
use crate::geometry::{dist_to_points, limiting_normal_graph, ConeRepr, ConvexSetRepr, GeometryError, PolyPiece, RayUnion};
use crate::linalg;

pub use format::EXAMPLE_PAPER;
use format::{RawExprOrNum, RawProblem, RawWindow};

/// Number of random ξ used for the nonempty-slice check at load time.
pub const SASS_SAMPLES: usize = 1000;
pub const DEFAULT_RESOLUTION: usize = 201;
pub const DEFAULT_TOL_C: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read problem file: {0}")]
    Io(String),
    #[error("problem file syntax: {0}")]
    Syntax(String),
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("{location}: {source}")]
    Expr {
        location: String,
        #[source]
        source: ExprError,
    },
    #[error("empty slice K(ξ) at ξ = {xi:?}")]
    EmptySlice { xi: Vec<f64> },
    #[error("K(ξ) is unbounded at ξ = {xi:?} and no x_window is given")]
    UnboundedSlice { xi: Vec<f64> },
    #[error("point ({xi:?}, {x:?}) is not on the graph of K")]
    NotOnGraph { xi: Vec<f64>, x: Vec<f64> },
    #[error("point ({xi:?}, {x:?}) is not on the graph of E (merit {merit:e})")]
    NotASolution { xi: Vec<f64>, x: Vec<f64>, merit: f64 },
    #[error("evaluation failed: {0}")]
    Eval(#[from] ExprError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

fn invalid(location: &str, message: impl Into<String>) -> ProblemError {
    ProblemError::Invalid {
        location: location.to_string(),
        message: message.into(),
    }
}

/// Axis-aligned window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Window { lo, hi }
    }

    pub fn cube(center: &[f64], radius: f64) -> Self {
        Window {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn diameter(&self) -> f64 {
        linalg::dist(&self.lo, &self.hi)
    }

    /// Largest per-axis grid spacing at the given resolution.
    pub fn step(&self, resolution: usize) -> f64 {
        let r = resolution.max(2) as f64 - 1.0;
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) / r)
            .fold(0.0, f64::max)
    }

    /// Tensor grid with `resolution` points per axis, endpoints exact.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| axis(*l, *h, resolution))
            .collect();
        let mut out = vec![Vec::new()];
        for ax in &axes {
            let mut next = Vec::with_capacity(out.len() * ax.len());
            for p in &out {
                for v in ax {
                    let mut q = p.clone();
                    q.push(*v);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if l == h { *l } else { rng.gen_range(*l..=*h) })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn intersect(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }
}

/// `n` equally spaced points on `[lo, hi]` with both endpoints exact.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![0.5 * (lo + hi)];
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * (i as f64) / ((n - 1) as f64))
        .collect();
    v[n - 1] = hi;
    v
}

/// Parametric constraint map `K(ξ)` with expression coefficients in `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSet {
    Box { lower: Vec<Expr>, upper: Vec<Expr> },
    /// `{x : A(ξ) x ≤ b(ξ)}`.
    Polytope { a: Vec<Vec<Expr>>, b: Vec<Expr> },
}

/// Declared kink location of a bound expression (informational).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kink {
    pub var: String,
    pub at: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Hypotheses {
    pub nu_convex: bool,
    pub mu_convex: bool,
    pub k_lsc: bool,
    pub nu_lipschitz: bool,
    pub f_smooth_concave: bool,
}

#[derive(Debug, Clone)]
pub struct VepProblem {
    pub name: String,
    /// `(p, n, n)`: the `z` block lives in the same space as `x`.
    pub dims: Dims,
    pub m: usize,
    pub f: VectorFunc,
    pub cone: ConeRepr,
    pub k: ParamSet,
    pub kinks: Vec<Kink>,
    pub objective: Expr,
    pub omega: ConvexSetRepr,
    pub xi_window: Window,
    pub x_window: Option<Window>,
    pub z_window: Option<Window>,
    pub tol_c: f64,
    pub hypotheses: Hypotheses,
    /// Text the problem was loaded from.
    pub source: String,
}

/// Resolution and tolerance of the brute-force solution oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleGrid {
    pub xi_center: Vec<f64>,
    pub xi_radius: f64,
    pub xi_resolution: usize,
    pub x_resolution: usize,
    pub z_resolution: usize,
    pub tol_c: f64,
}

impl OracleGrid {
    /// 201 points per axis in one dimension; for `n ≥ 2` the per-axis count
    /// is reduced so each block keeps roughly 201 nodes.
    pub fn for_problem(prob: &VepProblem) -> Self {
        let n = prob.dims.n;
        let per_axis = if n <= 1 {
            DEFAULT_RESOLUTION
        } else {
            ((DEFAULT_RESOLUTION as f64).powf(1.0 / n as f64).round() as usize).max(5)
        };
        OracleGrid {
            xi_center: prob.xi_window.center(),
            xi_radius: 0.5 * prob.xi_window.step(2),
            xi_resolution: 41,
            x_resolution: per_axis,
            z_resolution: per_axis,
            tol_c: prob.tol_c,
        }
    }
}

pub fn load(spec: &str) -> Result<VepProblem, ProblemError> {
    if spec == "example:paper" {
        return load_str(EXAMPLE_PAPER);
    }
    if let Some(name) = spec.strip_prefix("example:") {
        return Err(invalid("problem", format!("unknown builtin example '{name}'")));
    }
    load_path(Path::new(spec))
}

pub fn load_path(path: &Path) -> Result<VepProblem, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
    load_str(&text)
}

fn window(raw: &Option<RawWindow>, dim: usize, location: &str) -> Result<Option<Window>, ProblemError> {
    let Some(raw) = raw else { return Ok(None) };
    let pairs: Vec<[f64; 2]> = match raw {
        RawWindow::Uniform(p) => vec![*p; dim],
        RawWindow::PerAxis(v) => v.clone(),
    };
    if pairs.len() != dim {
        return Err(invalid(location, format!("expected {dim} [lo, hi] pairs")));
    }
    if pairs.iter().any(|[l, h]| !(l.is_finite() && h.is_finite() && l <= h)) {
        return Err(invalid(location, "window bounds must be finite with lo ≤ hi"));
    }
    Ok(Some(Window {
        lo: pairs.iter().map(|p| p[0]).collect(),
        hi: pairs.iter().map(|p| p[1]).collect(),
    }))
}

fn parse_at(text: &str, dims: Dims, location: String) -> Result<Expr, ProblemError> {
    expr::parse(text, dims).map_err(|source| ProblemError::Expr { location, source })
}

/// Bound expression; plain numbers and `±inf` become constants.
fn parse_bound(raw: &RawExprOrNum, dims: Dims, location: String) -> Result<Expr, ProblemError> {
    match raw.as_number() {
        Some(v) => Ok(Expr::constant(v)),
        None => parse_at(&raw.as_text(), dims, location),
    }
}

fn xi_only(e: &Expr, location: &str) -> Result<(), ProblemError> {
    if e.variables().iter().any(|v| !matches!(v, Var::Xi(_))) {
        return Err(invalid(location, "may only depend on xi variables"));
    }
    Ok(())
}

fn constant_bounds(raw: &Option<Vec<RawExprOrNum>>, dim: usize, default: f64, location: &str) -> Result<Vec<f64>, ProblemError> {
    match raw {
        None => Ok(vec![default; dim]),
        Some(v) => {
            if v.len() != dim {
                return Err(invalid(location, format!("expected {dim} entries")));
            }
            v.iter()
                .enumerate()
                .map(|(i, e)| {
                    e.as_number()
                        .ok_or_else(|| invalid(&format!("{location}[{i}]"), "expected a number or ±inf"))
                })
                .collect()
        }
    }
}

pub fn load_str(text: &str) -> Result<VepProblem, ProblemError> {
    let raw: RawProblem = toml::from_str(text).map_err(|e| ProblemError::Syntax(e.to_string()))?;
    let h = &raw.problem;
    if h.p == 0 || h.n == 0 || h.m == 0 {
        return Err(invalid("problem", "p, n and m must be positive"));
    }
    let dims = Dims::new(h.p, h.n, h.n);

    let cone = match raw.cone.kind.as_str() {
        "orthant" => ConeRepr::Orthant(h.m),
        "generators" => ConeRepr::Generators {
            dim: h.m,
            gens: raw.cone.rows.clone(),
        },
        "halfspaces" => ConeRepr::Halfspaces {
            dim: h.m,
            normals: raw.cone.rows.clone(),
        },
        other => return Err(invalid("cone.type", format!("unknown cone type '{other}'"))),
    };
    cone.validate().map_err(|e| invalid("cone.rows", e.to_string()))?;
    if cone.is_trivial() {
        return Err(invalid("cone", "ordering cone must be nontrivial"));
    }
    if !cone.is_pointed() {
        return Err(invalid("cone", "ordering cone must be pointed"));
    }

    if raw.f.components.len() != h.m {
        return Err(invalid("f.components", format!("expected {} components", h.m)));
    }
    let components = raw
        .f
        .components
        .iter()
        .enumerate()
        .map(|(i, t)| parse_at(t, dims, format!("f.components[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let f = VectorFunc { components, dims };

    let k = match raw.k.kind.as_str() {
        "box" => {
            let (Some(lo), Some(up)) = (&raw.k.lower, &raw.k.upper) else {
                return Err(invalid("K", "box form needs lower and upper"));
            };
            if lo.len() != h.n || up.len() != h.n {
                return Err(invalid("K", format!("lower and upper need {} entries", h.n)));
            }
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for i in 0..h.n {
                let l = parse_bound(&lo[i], dims, format!("K.lower[{i}]"))?;
                xi_only(&l, &format!("K.lower[{i}]"))?;
                let u = parse_bound(&up[i], dims, format!("K.upper[{i}]"))?;
                xi_only(&u, &format!("K.upper[{i}]"))?;
                lower.push(l);
                upper.push(u);
            }
            ParamSet::Box { lower, upper }
        }
        "polytope" => {
            let (Some(a_raw), Some(b_raw)) = (&raw.k.a, &raw.k.b) else {
                return Err(invalid("K", "polytope form needs A and b"));
            };
            if a_raw.len() != b_raw.len() || a_raw.is_empty() {
                return Err(invalid("K", "A and b need the same positive number of rows"));
            }
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (r, row) in a_raw.iter().enumerate() {
                if row.len() != h.n {
                    return Err(invalid(&format!("K.A[{r}]"), format!("expected {} entries", h.n)));
                }
                let mut out = Vec::new();
                for (c, e) in row.iter().enumerate() {
                    let loc = format!("K.A[{r}][{c}]");
                    let ex = parse_at(&e.as_text(), dims, loc.clone())?;
                    xi_only(&ex, &loc)?;
                    out.push(ex);
                }
                a.push(out);
                let loc = format!("K.b[{r}]");
                let ex = parse_at(&b_raw[r].as_text(), dims, loc.clone())?;
                xi_only(&ex, &loc)?;
                b.push(ex);
            }
            ParamSet::Polytope { a, b }
        }
        other => return Err(invalid("K.type", format!("unknown K type '{other}'"))),
    };

    let kinks = match &raw.k.kinks {
        None => Vec::new(),
        Some(s) => parse_kinks(s, dims)?,
    };

    let objective = parse_at(&raw.objective.expr, dims, "objective.expr".into())?;
    if objective.depends_on_z() {
        return Err(invalid("objective.expr", "objective may not depend on z"));
    }

    let omega = match &raw.omega {
        None => ConvexSetRepr::whole_space(h.p),
        Some(o) => match o.kind.as_str() {
            "box" => ConvexSetRepr::Box {
                lower: constant_bounds(&o.lower, h.p, f64::NEG_INFINITY, "Omega.lower")?,
                upper: constant_bounds(&o.upper, h.p, f64::INFINITY, "Omega.upper")?,
            },
            "halfspaces" => ConvexSetRepr::Halfspaces {
                a: o.a.clone().ok_or_else(|| invalid("Omega", "halfspaces need A"))?,
                b: o.b.clone().ok_or_else(|| invalid("Omega", "halfspaces need b"))?,
            },
            "polytope" => ConvexSetRepr::Polytope {
                vertices: o.vertices.clone().ok_or_else(|| invalid("Omega", "polytope needs vertices"))?,
            },
            other => return Err(invalid("Omega.type", format!("unknown Omega type '{other}'"))),
        },
    };
    omega.validate().map_err(|e| invalid("Omega", e.to_string()))?;
    if omega.dim() != h.p {
        return Err(invalid("Omega", format!("dimension must be p = {}", h.p)));
    }

    let xi_window = window(&h.xi_window, h.p, "problem.xi_window")?
        .unwrap_or_else(|| Window::cube(&vec![0.0; h.p], 1.0));
    let x_window = window(&h.x_window, h.n, "problem.x_window")?;
    let z_window = window(&h.z_window, h.n, "problem.z_window")?;
    let hy = &raw.hypotheses;
    let prob = VepProblem {
        name: h.name.clone().unwrap_or_else(|| "unnamed".into()),
        dims,
        m: h.m,
        f,
        cone,
        k,
        kinks,
        objective,
        omega,
        xi_window,
        x_window,
        z_window,
        tol_c: h.tol_c.unwrap_or(DEFAULT_TOL_C),
        hypotheses: Hypotheses {
            nu_convex: hy.nu_convex,
            mu_convex: hy.mu_convex,
            k_lsc: hy.k_lsc,
            nu_lipschitz: hy.nu_lipschitz,
            f_smooth_concave: hy.f_smooth_concave,
        },
        source: text.to_string(),
    };
    prob.check_nonempty_slices(SASS_SAMPLES, 0x5eed)?;
    Ok(prob)
}

fn parse_kinks(s: &str, dims: Dims) -> Result<Vec<Kink>, ProblemError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (var, at) = item
            .split_once('@')
            .ok_or_else(|| invalid("K.kinks", format!("expected 'var@value', got '{item}'")))?;
        let e = parse_at(var.trim(), dims, "K.kinks".into())?;
        if !matches!(e, Expr::Var(Var::Xi(_))) {
            return Err(invalid("K.kinks", format!("'{var}' is not a xi variable")));
        }
        let at: f64 = at
            .trim()
            .parse()
            .map_err(|_| invalid("K.kinks", format!("bad location '{at}'")))?;
        out.push(Kink {
            var: var.trim().to_string(),
            at,
        });
    }
    Ok(out)
}

impl VepProblem {
    pub fn p(&self) -> usize {
        self.dims.p
    }

    pub fn n(&self) -> usize {
        self.dims.n
    }

    fn xi_point<'a>(&self, xi: &'a [f64], zeros: &'a [f64]) -> Point<'a> {
        Point::new(xi, zeros, zeros)
    }

    /// The slice `K(ξ)`.
    pub fn slice(&self, xi: &[f64]) -> Result<ConvexSetRepr, ProblemError> {
        let zeros = vec![0.0; self.n()];
        let pt = self.xi_point(xi, &zeros);
        match &self.k {
            ParamSet::Box { lower, upper } => {
                let l = lower.iter().map(|e| e.eval(&pt)).collect::<Result<Vec<_>, _>>()?;
                let u = upper.iter().map(|e| e.eval(&pt)).collect::<Result<Vec<_>, _>>()?;
                if l.iter().zip(&u).any(|(a, b)| !(a <= b)) {
                    return Err(ProblemError::EmptySlice { xi: xi.to_vec() });
                }
                Ok(ConvexSetRepr::Box { lower: l, upper: u })
            }
            ParamSet::Polytope { a, b } => {
                let a = a
                    .iter()
                    .map(|row| row.iter().map(|e| e.eval(&pt)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                let b = b.iter().map(|e| e.eval(&pt)).collect::<Result<Vec<_>, _>>()?;
                let s = ConvexSetRepr::Halfspaces { a, b };
                match s.project(&zeros) {
                    Ok(_) => Ok(s),
                    Err(GeometryError::Infeasible) => Err(ProblemError::EmptySlice { xi: xi.to_vec() }),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    /// Nonempty, closed slices on `samples` random ξ of the window, plus the
    /// window center and the origin.
    pub fn check_nonempty_slices(&self, samples: usize, seed: u64) -> Result<(), ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![vec![0.0; self.p()], self.xi_window.center()];
        for _ in 0..samples {
            pts.push(self.xi_window.sample(&mut rng));
        }
        for xi in pts {
            self.slice(&xi)?;
        }
        Ok(())
    }

    /// Bounding window of `K(ξ)`, clipped by `window` when the slice is unbounded.
    pub fn slice_window(&self, xi: &[f64], window: Option<&Window>) -> Result<Window, ProblemError> {
        let s = self.slice(xi)?;
        match s.bounding_box() {
            Some((lo, hi)) => Ok(Window { lo, hi }),
            None => {
                let w = window.ok_or_else(|| ProblemError::UnboundedSlice { xi: xi.to_vec() })?;
                if let ConvexSetRepr::Box { lower, upper } = &s {
                    Ok(Window { lo: lower.clone(), hi: upper.clone() }.intersect(w))
                } else {
                    Ok(w.clone())
                }
            }
        }
    }

    pub fn objective_value(&self, xi: &[f64], x: &[f64]) -> Result<f64, ExprError> {
        let zeros = vec![0.0; self.n()];
        self.objective.eval(&Point::new(xi, x, &zeros))
    }

    pub fn eval_f(&self, xi: &[f64], x: &[f64], z: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.f.eval(&Point::new(xi, x, z))
    }

    /// `dist(f(ξ, x, z), C)`.
    pub fn dist_f_to_c(&self, xi: &[f64], x: &[f64], z: &[f64]) -> Result<f64, ExprError> {
        Ok(self.cone.dist(&self.eval_f(xi, x, z)?))
    }

    /// Constraint functions `g_j(ξ, x) ≤ 0` describing the graph of `K`.
    pub fn graph_constraints(&self) -> Vec<Expr> {
        let n = self.n();
        match &self.k {
            ParamSet::Box { lower, upper } => {
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let xi_var = Expr::var(Var::X(i));
                    out.push(Expr::sub(lower[i].clone(), xi_var.clone()));
                    out.push(Expr::sub(xi_var, upper[i].clone()));
                }
                out
            }
            ParamSet::Polytope { a, b } => a
                .iter()
                .zip(b)
                .map(|(row, bi)| {
                    let mut acc: Option<Expr> = None;
                    for (j, aij) in row.iter().enumerate() {
                        let term = Expr::mul(aij.clone(), Expr::var(Var::X(j)));
                        acc = Some(match acc {
                            None => term,
                            Some(prev) => Expr::add(prev, term),
                        });
                    }
                    Expr::sub(acc.unwrap_or(Expr::constant(0.0)), bi.clone())
                })
                .collect(),
        }
    }

    /// First-order pieces of `gph K` around `(ξ̄, x̄)` in `(ξ, x)` space: one
    /// polyhedral cone per choice of active smooth branch of each active
    /// constraint.
    pub fn graph_pieces(&self, xi: &[f64], x: &[f64]) -> Result<Vec<PolyPiece>, ProblemError> {
        let d = self.p() + self.n();
        let zeros = vec![0.0; self.n()];
        let pt = Point::new(xi, x, &zeros);
        let scale = linalg::norm_inf(xi).max(linalg::norm_inf(x)).max(1.0);
        let mut pieces = vec![PolyPiece { rows: Vec::new() }];
        for g in self.graph_constraints() {
            let v = g.eval(&pt)?;
            if v > 1e-9 * scale {
                return Err(ProblemError::NotOnGraph {
                    xi: xi.to_vec(),
                    x: x.to_vec(),
                });
            }
            if v < -1e-9 * scale {
                continue;
            }
            let sels = g.selections(&pt, self.dims)?;
            let mut next = Vec::with_capacity(pieces.len() * sels.len());
            for piece in &pieces {
                for s in &sels {
                    let mut rows = piece.rows.clone();
                    rows.push(s.grad[..d].to_vec());
                    rows.extend(s.conditions.iter().map(|c| linalg::neg(&c[..d])));
                    next.push(PolyPiece { rows });
                }
            }
            if next.len() > expr::MAX_SELECTIONS {
                return Err(ProblemError::Eval(ExprError::TooManySelections));
            }
            pieces = next;
        }
        Ok(pieces)
    }

    /// Limiting normal cone to `gph K` at `(ξ̄, x̄)`.
    pub fn graph_normal_cone(&self, xi: &[f64], x: &[f64]) -> Result<RayUnion, ProblemError> {
        let pieces = self.graph_pieces(xi, x)?;
        Ok(limiting_normal_graph(&pieces, self.p() + self.n()))
    }

    /// Gradients (w.r.t. `(ξ, x)`) of the objective's active branches.
    pub fn objective_grad_hull(&self, xi: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>, ExprError> {
        let zeros = vec![0.0; self.n()];
        Ok(self
            .objective
            .grad_hull(&Point::new(xi, x, &zeros), self.dims, Block::XiX)?
            .generators)
    }
}

/// Grid approximation of `E(ξ)`: grid points of `K(ξ)` at which
/// `dist(f(ξ, x, z), C) ≤ tol_C` for every grid point `z` of `K(ξ)`.
pub fn oracle_solutions(prob: &VepProblem, xi: &[f64], grid: &OracleGrid) -> Result<Vec<Vec<f64>>, ProblemError> {
    let slice = prob.slice(xi)?;
    let xw = prob.slice_window(xi, prob.x_window.as_ref())?;
    let zw = prob.slice_window(xi, prob.z_window.as_ref().or(prob.x_window.as_ref()))?;
    let scale = linalg::norm_inf(&xw.lo).max(linalg::norm_inf(&xw.hi)).max(1.0);
    let xs: Vec<Vec<f64>> = xw
        .grid(grid.x_resolution)
        .into_iter()
        .filter(|x| slice.contains(x, 1e-12 * scale))
        .collect();
    let zs: Vec<Vec<f64>> = zw
        .grid(grid.z_resolution)
        .into_iter()
        .filter(|z| slice.contains(z, 1e-12 * scale))
        .collect();
    let keep: Result<Vec<Option<Vec<f64>>>, ExprError> = xs
        .into_par_iter()
        .map(|x| {
            for z in &zs {
                if prob.dist_f_to_c(xi, &x, z)? > grid.tol_c {
                    return Ok(None);
                }
            }
            Ok(Some(x))
        })
        .collect();
    Ok(keep?.into_iter().flatten().collect())
}

/// `dist(x, E(ξ))` against the oracle set; `+∞` when it is empty.
pub fn oracle_dist_to_solutions(prob: &VepProblem, xi: &[f64], x: &[f64], grid: &OracleGrid) -> Result<f64, ProblemError> {
    Ok(dist_to_points(x, &oracle_solutions(prob, xi, grid)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> VepProblem {
        load("example:paper").unwrap()
    }

    #[test]
    fn builtin_loads() {
        let p = paper();
        assert_eq!((p.p(), p.n(), p.m), (1, 1, 2));
        assert_eq!(p.f.components[0].to_string(), "x1 - z1");
        assert_eq!(p.cone, ConeRepr::Orthant(2));
        assert_eq!(p.omega, ConvexSetRepr::interval(0.0, f64::INFINITY));
        assert_eq!(p.kinks, vec![Kink { var: "xi1".into(), at: 0.0 }]);
        assert!(p.hypotheses.nu_convex);
    }

    #[test]
    fn slices() {
        let p = paper();
        assert_eq!(p.slice(&[0.0]).unwrap(), ConvexSetRepr::interval(-1.0, 1.0));
        assert_eq!(p.slice(&[2.0]).unwrap(), ConvexSetRepr::interval(-3.0, 3.0));
    }

    #[test]
    fn lower_above_upper_is_rejected() {
        let text = EXAMPLE_PAPER.replace(r#"lower = ["-abs(xi1) - 1"]"#, r#"lower = ["2"]"#);
        assert!(matches!(load_str(&text), Err(ProblemError::EmptySlice { .. })));
    }

    #[test]
    fn omega_defaults_to_whole_space() {
        let start = EXAMPLE_PAPER.find("[Omega]").unwrap();
        let end = EXAMPLE_PAPER.find("[hypotheses]").unwrap();
        let text = format!("{}{}", &EXAMPLE_PAPER[..start], &EXAMPLE_PAPER[end..]);
        let p = load_str(&text).unwrap();
        assert_eq!(p.omega, ConvexSetRepr::whole_space(1));
    }

    #[test]
    fn bad_expression_reports_location() {
        let text = EXAMPLE_PAPER.replace("x1 - z1", "x1 - w1");
        match load_str(&text) {
            Err(ProblemError::Expr { location, .. }) => assert_eq!(location, "f.components[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_on_builtin_example() {
        let p = paper();
        let g = OracleGrid::for_problem(&p);
        let s = oracle_solutions(&p, &[0.0], &g).unwrap();
        assert_eq!(s, vec![vec![1.0]]);
        assert_eq!(oracle_dist_to_solutions(&p, &[0.0], &[0.0], &g).unwrap(), 1.0);
        assert_eq!(oracle_dist_to_solutions(&p, &[1.0], &[-3.0], &g).unwrap(), 5.0);
    }

    #[test]
    fn graph_normals_of_builtin_k() {
        let p = paper();
        let n = p.graph_normal_cone(&[0.0], &[1.0]).unwrap();
        assert!(n.contains(&[-1.0, 1.0], 1e-9) && n.contains(&[1.0, 1.0], 1e-9));
        let n = p.graph_normal_cone(&[0.5], &[1.5]).unwrap();
        assert!(n.contains(&[-1.0, 1.0], 1e-9));
        assert!(!n.contains(&[1.0, -1.0], 1e-6));
        assert!(p.graph_normal_cone(&[0.0], &[0.0]).unwrap().is_zero());
        assert!(matches!(p.graph_normal_cone(&[0.0], &[3.0]), Err(ProblemError::NotOnGraph { .. })));
    }
}
