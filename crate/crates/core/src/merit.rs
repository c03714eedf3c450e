//! The merit function `ν + μ` and its pieces.
//!
//! `ν(ξ, x) = sup_{z ∈ K(ξ)} dist(f(ξ, x, z), C)` measures how far the
//! vector inequality is from holding uniformly in `z`, and
//! `μ(ξ, x) = dist(x, K(ξ))` measures infeasibility. Their sum vanishes
//! exactly on the graph of the solution map.

use serde::Serialize;

use crate::expr::{Block, Point};
use crate::geometry::{halfspace_vertices, ConvexSetRepr};
use crate::linalg;
use crate::problem::{ParamSet, ProblemError, VepProblem, Window};

/// Maximizers within this gap of the supremum are reported in `argmax_z`.
pub const ARGMAX_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuMethod {
    VertexExact,
    Grid,
    Multistart,
}

impl NuMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            NuMethod::VertexExact => "vertex-exact",
            NuMethod::Grid => "grid",
            NuMethod::Multistart => "multistart",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuEval {
    pub value: f64,
    pub argmax_z: Vec<Vec<f64>>,
    pub method: NuMethod,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeritEval {
    pub nu: f64,
    pub mu: f64,
    pub merit: f64,
    pub argmax_z: Vec<Vec<f64>>,
    pub method: NuMethod,
    pub flags: Vec<String>,
}

/// `ν` over `K(ξ)` enlarged by `eps`.
pub fn eval_nu(prob: &VepProblem, xi: &[f64], x: &[f64], eps: f64) -> Result<NuEval, ProblemError> {
    let slice = prob.slice(xi)?.enlarged(eps);
    let mut flags = Vec::new();
    if eps > 0.0 && prob.n() > 1 {
        flags.push("enlargement-box-approximate".to_string());
    }
    let vertices = if prob.f.is_affine_in_z() {
        match &slice {
            ConvexSetRepr::Halfspaces { a, b } => halfspace_vertices(a, b),
            s => s.vertices(),
        }
    } else {
        None
    };
    if let Some(vs) = vertices {
        let vals = vs
            .iter()
            .map(|z| prob.dist_f_to_c(xi, x, z))
            .collect::<Result<Vec<_>, _>>()?;
        let value = vals.iter().copied().fold(0.0, f64::max);
        let argmax_z = vs
            .into_iter()
            .zip(&vals)
            .filter(|(_, v)| **v >= value - ARGMAX_TOL)
            .map(|(z, _)| z)
            .collect();
        return Ok(NuEval {
            value,
            argmax_z,
            method: NuMethod::VertexExact,
            flags,
        });
    }
    nu_by_search(prob, xi, x, &slice, flags)
}

fn nu_by_search(
    prob: &VepProblem,
    xi: &[f64],
    x: &[f64],
    slice: &ConvexSetRepr,
    mut flags: Vec<String>,
) -> Result<NuEval, ProblemError> {
    let window = match slice.bounding_box() {
        Some((lo, hi)) => Window::new(lo, hi),
        None => {
            let w = prob
                .z_window
                .as_ref()
                .or(prob.x_window.as_ref())
                .ok_or_else(|| ProblemError::UnboundedSlice { xi: xi.to_vec() })?;
            flags.push("unbounded-window".to_string());
            match slice {
                ConvexSetRepr::Box { lower, upper } => Window::new(lower.clone(), upper.clone()).intersect(w),
                _ => w.clone(),
            }
        }
    };
    let n = prob.n();
    let res = if n == 1 { 201 } else { ((201f64).powf(1.0 / n as f64).round() as usize).max(5) };
    let scale = linalg::norm_inf(&window.lo).max(linalg::norm_inf(&window.hi)).max(1.0);
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
    for z in window.grid(res) {
        if slice.contains(&z, 1e-12 * scale) {
            let v = prob.dist_f_to_c(xi, x, &z)?;
            pts.push((z, v));
        }
    }
    if pts.is_empty() {
        // Thin slice missed by the grid: fall back to projected grid points.
        for z in window.grid(res) {
            let zp = slice.project(&z)?;
            let v = prob.dist_f_to_c(xi, x, &zp)?;
            pts.push((zp, v));
        }
    }
    pts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let step0 = window.step(res).max(1e-12);
    let mut refined = Vec::new();
    for (z0, v0) in pts.iter().take(5) {
        let (z, v) = local_ascent(prob, xi, x, slice, z0.clone(), *v0, step0)?;
        refined.push((z, v));
    }
    let mut method = NuMethod::Grid;
    let grid_best = pts[0].1;
    pts.extend(refined);
    let value = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    if value > grid_best + ARGMAX_TOL {
        method = NuMethod::Multistart;
    }
    let argmax_z = linalg::dedup_points(
        pts.into_iter()
            .filter(|(_, v)| *v >= value - ARGMAX_TOL)
            .map(|(z, _)| z)
            .collect(),
        1e-9,
    );
    Ok(NuEval {
        value,
        argmax_z,
        method,
        flags,
    })
}

/// Projected coordinate pattern search maximizing `z ↦ dist(f, C)`.
fn local_ascent(
    prob: &VepProblem,
    xi: &[f64],
    x: &[f64],
    slice: &ConvexSetRepr,
    mut z: Vec<f64>,
    mut v: f64,
    mut step: f64,
) -> Result<(Vec<f64>, f64), ProblemError> {
    let n = z.len();
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut c = z.clone();
                c[i] += s * step;
                let c = slice.project(&c)?;
                let cv = prob.dist_f_to_c(xi, x, &c)?;
                if cv > v + 1e-15 {
                    z = c;
                    v = cv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((z, v))
}

/// `μ(ξ, x) = dist(x, K(ξ))`.
pub fn eval_mu(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<f64, ProblemError> {
    Ok(prob.slice(xi)?.dist(x)?)
}

pub fn eval_merit(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<MeritEval, ProblemError> {
    let nu = eval_nu(prob, xi, x, 0.0)?;
    let mu = eval_mu(prob, xi, x)?;
    Ok(MeritEval {
        nu: nu.value,
        mu,
        merit: nu.value + mu,
        argmax_z: nu.argmax_z,
        method: nu.method,
        flags: nu.flags,
    })
}

pub fn merit_value(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<f64, ProblemError> {
    Ok(eval_merit(prob, xi, x)?.merit)
}

/// Central-difference gradient over the `(ξ, x)` layout.
pub fn fd_gradient(
    xi: &[f64],
    x: &[f64],
    h: f64,
    mut f: impl FnMut(&[f64], &[f64]) -> Result<f64, ProblemError>,
) -> Result<Vec<f64>, ProblemError> {
    let p = xi.len();
    let mut g = Vec::with_capacity(p + x.len());
    for k in 0..p + x.len() {
        let (mut xp, mut xm) = ((xi.to_vec(), x.to_vec()), (xi.to_vec(), x.to_vec()));
        if k < p {
            xp.0[k] += h;
            xm.0[k] -= h;
        } else {
            xp.1[k - p] += h;
            xm.1[k - p] -= h;
        }
        g.push((f(&xp.0, &xp.1)? - f(&xm.0, &xm.1)?) / (2.0 * h));
    }
    Ok(g)
}

/// Gradient of `ν` over `(ξ, x)` at a point where it is differentiable:
/// chain rule through the unique maximizing vertex of a box slice, central
/// differences otherwise. `None` when the maximizer is not unique or a
/// kink is active (the point is not generic).
pub fn nu_gradient(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<Option<Vec<f64>>, ProblemError> {
    let p = prob.p();
    let n = prob.n();
    let ev = eval_nu(prob, xi, x, 0.0)?;
    if ev.value <= 1e-12 {
        return Ok(Some(vec![0.0; p + n]));
    }
    if ev.argmax_z.len() != 1 {
        return Ok(None);
    }
    let ParamSet::Box { lower, upper } = &prob.k else {
        return fd_gradient(xi, x, FD_STEP, |a, b| Ok(eval_nu(prob, a, b, 0.0)?.value)).map(Some);
    };
    if ev.method != NuMethod::VertexExact {
        return fd_gradient(xi, x, FD_STEP, |a, b| Ok(eval_nu(prob, a, b, 0.0)?.value)).map(Some);
    }
    let z = &ev.argmax_z[0];
    let slice = prob.slice(xi)?;
    let ConvexSetRepr::Box { lower: lv, upper: uv } = &slice else { unreachable!() };
    let zeros = vec![0.0; n];
    let xi_pt = Point::new(xi, &zeros, &zeros);
    // dz/dξ: row i is the ξ-gradient of the active bound of coordinate i.
    let mut dz = Vec::with_capacity(n);
    for i in 0..n {
        let e = if (z[i] - lv[i]).abs() <= (z[i] - uv[i]).abs() { &lower[i] } else { &upper[i] };
        if (lv[i] - uv[i]).abs() <= 1e-12 {
            return Ok(None);
        }
        let h = e.grad_hull(&xi_pt, prob.dims, Block::Xi)?;
        if !h.is_smooth() {
            return Ok(None);
        }
        dz.push(h.generators[0].clone());
    }
    let fz = prob.eval_f(xi, x, z)?;
    let proj = prob.cone.project(&fz);
    let u = linalg::scale(&linalg::sub(&fz, &proj), 1.0 / ev.value);
    let pt = Point::new(xi, x, z);
    let mut grad = vec![0.0; p + n];
    for (c, ui) in prob.f.components.iter().zip(&u) {
        if *ui == 0.0 {
            continue;
        }
        let h = c.grad_hull(&pt, prob.dims, Block::All)?;
        if !h.is_smooth() {
            return Ok(None);
        }
        let g = &h.generators[0];
        for k in 0..p + n {
            grad[k] += ui * g[k];
        }
        for i in 0..n {
            let gz = g[p + n + i];
            for k in 0..p {
                grad[k] += ui * gz * dz[i][k];
            }
        }
    }
    Ok(Some(grad))
}

/// Gradient of `μ` over `(ξ, x)` where it is differentiable (`None` at kinks).
pub fn mu_gradient(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<Option<Vec<f64>>, ProblemError> {
    let p = prob.p();
    let n = prob.n();
    let slice = prob.slice(xi)?;
    let proj = slice.project(x)?;
    let d = linalg::dist(x, &proj);
    if d <= 1e-12 {
        return Ok(Some(vec![0.0; p + n]));
    }
    let ParamSet::Box { lower, upper } = &prob.k else {
        return fd_gradient(xi, x, FD_STEP, |a, b| eval_mu(prob, a, b)).map(Some);
    };
    let u = linalg::scale(&linalg::sub(x, &proj), 1.0 / d);
    let zeros = vec![0.0; n];
    let xi_pt = Point::new(xi, &zeros, &zeros);
    let mut grad = vec![0.0; p + n];
    grad[p..].copy_from_slice(&u);
    for i in 0..n {
        if u[i] == 0.0 {
            continue;
        }
        let e = if u[i] < 0.0 { &lower[i] } else { &upper[i] };
        let h = e.grad_hull(&xi_pt, prob.dims, Block::Xi)?;
        if !h.is_smooth() {
            return Ok(None);
        }
        for k in 0..p {
            grad[k] -= u[i] * h.generators[0][k];
        }
    }
    Ok(Some(grad))
}

pub fn merit_gradient(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<Option<Vec<f64>>, ProblemError> {
    match (nu_gradient(prob, xi, x)?, mu_gradient(prob, xi, x)?) {
        (Some(a), Some(b)) => Ok(Some(linalg::add(&a, &b))),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::load;

    #[test]
    fn nu_examples() {
        let p = load("example:paper").unwrap();
        let e = eval_nu(&p, &[0.0], &[0.0], 0.0).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.method, NuMethod::VertexExact);
        // Farthest point of f(ξ, x, ·) from C sits at the upper end z = |ξ| + 1.
        assert_eq!(e.argmax_z, vec![vec![1.0]]);
        assert_eq!(eval_nu(&p, &[0.0], &[2.0], 0.0).unwrap().value, 0.0);
        let e = eval_nu(&p, &[1.0], &[0.0], 0.0).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.argmax_z, vec![vec![2.0]]);
    }

    #[test]
    fn mu_and_merit_examples() {
        let p = load("example:paper").unwrap();
        assert_eq!(eval_mu(&p, &[0.0], &[3.0]).unwrap(), 2.0);
        assert_eq!(eval_mu(&p, &[1.0], &[-5.0]).unwrap(), 3.0);
        assert_eq!(eval_mu(&p, &[0.3], &[0.1]).unwrap(), 0.0);
        assert_eq!(merit_value(&p, &[0.0], &[1.0]).unwrap(), 0.0);
        let m = eval_merit(&p, &[0.0], &[0.0]).unwrap();
        assert_eq!((m.nu, m.mu, m.merit), (1.0, 0.0, 1.0));
        let m = eval_merit(&p, &[0.0], &[3.0]).unwrap();
        assert_eq!((m.nu, m.mu, m.merit), (0.0, 2.0, 2.0));
    }

    #[test]
    fn enlargement_is_monotone() {
        let p = load("example:paper").unwrap();
        let a = eval_nu(&p, &[0.2], &[0.4], 0.0).unwrap().value;
        let b = eval_nu(&p, &[0.2], &[0.4], 0.1).unwrap().value;
        assert!(b >= a);
        assert!((b - a - 0.1).abs() < 1e-12);
    }

    #[test]
    fn search_path_agrees_with_vertices() {
        let text = crate::problem::EXAMPLE_PAPER.replace("\"x1 - z1\"", "\"x1 - z1 + 0*z1^2\"");
        let q = crate::problem::load_str(&text).unwrap();
        let e = eval_nu(&q, &[0.3], &[-0.2], 0.0).unwrap();
        assert_ne!(e.method, NuMethod::VertexExact);
        assert!((e.value - 1.5).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let p = load("example:paper").unwrap();
        for (xi, x) in [(0.4, -0.7), (-1.2, 0.3), (0.9, 3.5), (-0.5, -2.5)] {
            let g = merit_gradient(&p, &[xi], &[x]).unwrap().unwrap();
            let fd = fd_gradient(&[xi], &[x], 1e-6, |a, b| merit_value(&p, a, b)).unwrap();
            assert!(linalg::approx_eq(&g, &fd, 1e-6), "{g:?} vs {fd:?}");
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::problem::{load, load_str, oracle_solutions, OracleGrid};
    use proptest::prelude::*;

    fn problems() -> Vec<VepProblem> {
        vec![
            load("example:paper").unwrap(),
            load_str(include_str!("../../../problems/two_dim.toml")).unwrap(),
        ]
    }

    fn point(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (prop::collection::vec(-1.0f64..1.0, 1), prop::collection::vec(-3.0f64..3.0, n))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fd_matches_formula_at_smooth_points(which in 0usize..2, seed in point(2)) {
            let p = &problems()[which];
            let (xi, x) = (seed.0, seed.1[..p.n()].to_vec());
            for (formula, f) in [
                (nu_gradient(p, &xi, &x).unwrap(), (|p: &VepProblem, a: &[f64], b: &[f64]| Ok(eval_nu(p, a, b, 0.0)?.value)) as fn(&VepProblem, &[f64], &[f64]) -> Result<f64, ProblemError>),
                (merit_gradient(p, &xi, &x).unwrap(), |p, a, b| merit_value(p, a, b)),
            ] {
                let Some(g) = formula else { continue };
                let fd = fd_gradient(&xi, &x, 1e-6, |a, b| f(p, a, b)).unwrap();
                prop_assert!(linalg::approx_eq(&g, &fd, 1e-4), "{:?} vs {:?} at {:?},{:?}", g, fd, xi, x);
            }
        }

        #[test]
        fn nu_is_convex_along_segments(a in point(1), b in point(1), t in 0.0f64..1.0) {
            let p = &problems()[0];
            let mix = |u: &[f64], v: &[f64]| linalg::add(&linalg::scale(u, 1.0 - t), &linalg::scale(v, t));
            let nu = |xi: &[f64], x: &[f64]| eval_nu(p, xi, x, 0.0).unwrap().value;
            let mid = nu(&mix(&a.0, &b.0), &mix(&a.1, &b.1));
            prop_assert!(mid <= (1.0 - t) * nu(&a.0, &a.1) + t * nu(&b.0, &b.1) + 1e-9);
        }

        #[test]
        fn merit_is_convex_in_x_and_lsc(which in 0usize..2, a in point(2), y in prop::collection::vec(-3.0f64..3.0, 2), t in 0.0f64..1.0, h in prop::collection::vec(-1.0f64..1.0, 3)) {
            let p = &problems()[which];
            let n = p.n();
            let (xi, x, y) = (a.0, a.1[..n].to_vec(), y[..n].to_vec());
            let m = |xi: &[f64], x: &[f64]| merit_value(p, xi, x).unwrap();
            let mid = linalg::add(&linalg::scale(&x, 1.0 - t), &linalg::scale(&y, t));
            prop_assert!(m(&xi, &mid) <= (1.0 - t) * m(&xi, &x) + t * m(&xi, &y) + 1e-9);
            // lower semicontinuity along a shrinking perturbation
            let m0 = m(&xi, &x);
            let tail = (4..=6)
                .map(|k| {
                    let s = 10f64.powi(-2 * k);
                    m(&[xi[0] + s * h[0]], &linalg::add(&x, &linalg::scale(&h[1..=n], s)))
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(m0 <= tail + 1e-6, "merit {} vs tail {}", m0, tail);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn merit_zero_level_is_the_oracle_solution_set(which in 0usize..2, xi in -1.0f64..1.0) {
            let p = &problems()[which];
            let grid = OracleGrid::for_problem(p);
            let sols = oracle_solutions(p, &[xi], &grid).unwrap();
            let slice = p.slice(&[xi]).unwrap();
            let xw = p.slice_window(&[xi], p.x_window.as_ref()).unwrap();
            for x in xw.grid(grid.x_resolution).into_iter().filter(|x| slice.contains(x, 1e-12)) {
                let zero = merit_value(p, &[xi], &x).unwrap() <= 1e-9;
                let listed = sols.iter().any(|s| linalg::dist(s, &x) <= 1e-12);
                prop_assert_eq!(zero, listed, "x = {:?}", x);
            }
        }
    }
}
