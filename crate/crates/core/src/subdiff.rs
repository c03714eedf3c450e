//! Structured subgradient estimates for `ν`, `μ` and coderivatives of the
//! constraint and solution maps.

use serde::Serialize;

use crate::expr::{Block, Point};
use crate::geometry::{sampled_limiting_normals, sphere_directions, CapPart, ConvexBody, RayUnion};
use crate::linalg;
use crate::merit::{eval_merit, eval_nu, nu_gradient};
use crate::problem::{ProblemError, VepProblem, Window};

/// Radius of the circle on which limiting gradients of `ν` are sampled.
pub const LIMIT_SAMPLE_RADIUS: f64 = 1e-6;
/// Angular samples used for limiting gradients in the plane.
pub const LIMIT_SAMPLE_ANGLES: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    ExactConvex,
    OuterEstimate,
    BranchHullApprox,
}

impl Exactness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Exactness::ExactConvex => "exact-convex",
            Exactness::OuterEstimate => "outer-estimate",
            Exactness::BranchHullApprox => "branch-hull-approx",
        }
    }

    /// The less exact of the two.
    pub fn weakest(self, other: Exactness) -> Exactness {
        self.max(other)
    }
}

/// A (possibly nonconvex) union of convex bodies estimating a subdifferential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgradEstimate {
    pub branches: Vec<ConvexBody>,
    pub exactness: Exactness,
    pub qc_flags: Vec<String>,
    /// Locally Lipschitz source: the singular subdifferential is `{0}`.
    pub locally_lipschitz: bool,
    pub subgradient_model: String,
}

impl SubgradEstimate {
    pub fn single(body: ConvexBody, exactness: Exactness) -> Self {
        SubgradEstimate {
            branches: vec![body],
            exactness,
            qc_flags: Vec::new(),
            locally_lipschitz: true,
            subgradient_model: "branch-hull".into(),
        }
    }

    pub fn body(&self) -> &ConvexBody {
        &self.branches[0]
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.branches.iter().any(|b| b.contains(v, tol))
    }

    pub fn support(&self, d: &[f64]) -> f64 {
        self.branches.iter().map(|b| b.support(d)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `∂_x ν` from the supremum formula: the hull over farthest points `z` of
/// `∇_x f(ξ, x, z)ᵀ u` with `u` the unit projection residual of `f` onto
/// `C` (or `u ∈ N(f; C) ∩ B` when `f ∈ C`).
pub fn nu_partial_subgradient_smooth(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<SubgradEstimate, ProblemError> {
    let ev = eval_nu(prob, xi, x, 0.0)?;
    let mut exactness = if prob.hypotheses.nu_convex || prob.hypotheses.f_smooth_concave {
        Exactness::ExactConvex
    } else {
        Exactness::OuterEstimate
    };
    let mut points = Vec::new();
    for z in &ev.argmax_z {
        let jacs = prob.f.jacobians(&Point::new(xi, x, z), Block::X)?;
        if jacs.len() > 1 {
            exactness = exactness.weakest(Exactness::BranchHullApprox);
        }
        for u in dist_subgradients(prob, xi, x, z)? {
            for j in &jacs {
                points.push(transpose_apply(j, &u, prob.n()));
            }
        }
    }
    let body = ConvexBody::polytope(linalg::dedup_points(points, 1e-12))
        .pruned()
        .with_label("∂_x ν");
    let mut est = SubgradEstimate::single(body, exactness);
    est.subgradient_model = "supremum-formula".into();
    Ok(est)
}

/// Points generating `∂ dist(·, C)` at `f(ξ, x, z)`.
fn dist_subgradients(prob: &VepProblem, xi: &[f64], x: &[f64], z: &[f64]) -> Result<Vec<Vec<f64>>, ProblemError> {
    let fz = prob.eval_f(xi, x, z)?;
    let proj = prob.cone.project(&fz);
    let d = linalg::dist(&fz, &proj);
    if d > 1e-12 * linalg::norm(&fz).max(1.0) {
        return Ok(vec![linalg::scale(&linalg::sub(&fz, &proj), 1.0 / d)]);
    }
    let normals = prob.cone.normal_cone_at(&proj, 1e-9)?;
    if normals.is_empty() {
        return Ok(vec![vec![0.0; prob.m]]);
    }
    let cap = CapPart {
        cone: crate::geometry::ConeRepr::Generators { dim: prob.m, gens: normals },
        radius: 1.0,
    };
    Ok(cap.points())
}

fn transpose_apply(jac: &[Vec<f64>], u: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, ui) in jac.iter().zip(u) {
        linalg::axpy(*ui, row, &mut out);
    }
    out
}

/// Gradients of `ν` at generic points on a small sphere around `(ξ̄, x̄)`.
pub fn nu_limiting_gradients(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>, ProblemError> {
    let p = prob.p();
    let d = p + prob.n();
    let mut grads = Vec::new();
    if let Some(g) = nu_gradient(prob, xi, x)? {
        grads.push(g);
    }
    for dir in sphere_directions(d, LIMIT_SAMPLE_ANGLES) {
        // Offset the angle grid so samples avoid kink lines through the center.
        let dir = if d == 2 {
            let t = dir[1].atan2(dir[0]) + 0.5 * std::f64::consts::PI / LIMIT_SAMPLE_ANGLES as f64;
            vec![t.cos(), t.sin()]
        } else {
            dir
        };
        let w: Vec<f64> = linalg::concat(xi, x)
            .iter()
            .zip(&dir)
            .map(|(c, u)| c + LIMIT_SAMPLE_RADIUS * u)
            .collect();
        if let Some(g) = nu_gradient(prob, &w[..p], &w[p..])? {
            grads.push(g.iter().map(|v| round_to(*v, 1e-9)).collect());
        }
    }
    Ok(linalg::dedup_points(grads, 1e-7))
}

fn round_to(v: f64, q: f64) -> f64 {
    let r = (v / q).round() * q;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `∂ν(ξ̄, x̄)` over `(ξ, x)` as the convex hull of sampled limiting
/// gradients, pruned to its extreme points.
pub fn nu_subgradient_full(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<SubgradEstimate, ProblemError> {
    let grads = nu_limiting_gradients(prob, xi, x)?;
    let grads = if grads.is_empty() {
        vec![vec![0.0; prob.p() + prob.n()]]
    } else {
        grads
    };
    let body = ConvexBody::polytope(grads).pruned().with_label("∂ν");
    let exactness = if prob.hypotheses.nu_convex {
        Exactness::ExactConvex
    } else {
        Exactness::OuterEstimate
    };
    let mut est = SubgradEstimate::single(body, exactness);
    est.subgradient_model = "sampled-limiting-hull".into();
    est.locally_lipschitz = prob.hypotheses.nu_lipschitz;
    if !prob.hypotheses.nu_convex {
        est.qc_flags.push("nu-convexity-not-asserted".into());
    }
    Ok(est)
}

/// Per-ε outer estimate of `∂ν`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterEstimate {
    pub eps: Vec<f64>,
    pub bodies: Vec<ConvexBody>,
    pub directions: Vec<Vec<f64>>,
    /// `support_table[i][k]` is the support of `bodies[i]` in `directions[k]`.
    pub support_table: Vec<Vec<f64>>,
    pub lf: f64,
}

impl OuterEstimate {
    /// Body for the smallest ε.
    pub fn smallest(&self) -> &ConvexBody {
        let i = (0..self.eps.len())
            .min_by(|a, b| self.eps[*a].partial_cmp(&self.eps[*b]).unwrap())
            .unwrap();
        &self.bodies[i]
    }
}

/// For every ε: `conv ⋃_{z} ∇_{(ξ,x)} f(ξ̄, x̄, z)ᵀ (C° ∩ B) ⊕ ℓ_f B`, the union
/// over the farthest points `z` of the ε-enlarged slice.
pub fn nu_outer_estimate(prob: &VepProblem, xi: &[f64], x: &[f64], eps_list: &[f64], lf: f64) -> Result<OuterEstimate, ProblemError> {
    let d = prob.p() + prob.n();
    let dual = prob.cone.dual();
    let cap_points = CapPart { cone: dual, radius: 1.0 }.points();
    let directions = sphere_directions(d, 64);
    let mut bodies = Vec::new();
    let mut table = Vec::new();
    for &eps in eps_list {
        let ev = eval_nu(prob, xi, x, eps)?;
        if ev.argmax_z.is_empty() {
            return Err(ProblemError::Invalid {
                location: "nu_outer_estimate".into(),
                message: format!("no farthest point over the {eps}-enlarged slice"),
            });
        }
        let mut pts = Vec::new();
        for z in &ev.argmax_z {
            for j in prob.f.jacobians(&Point::new(xi, x, z), Block::XiX)? {
                for u in &cap_points {
                    pts.push(transpose_apply(&j, u, d));
                }
            }
        }
        let body = ConvexBody::polytope(linalg::dedup_points(pts, 1e-12))
            .pruned()
            .sum(&ConvexBody::ball(d, lf))
            .with_label(format!("outer ∂ν, ε = {eps}"));
        table.push(directions.iter().map(|u| body.support(u)).collect());
        bodies.push(body);
    }
    Ok(OuterEstimate {
        eps: eps_list.to_vec(),
        bodies,
        directions,
        support_table: table,
        lf,
    })
}

/// Image of `D*K(ξ̄|z̄)(v)` as a union of `conv(vertices) + cone(rays)` branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoderivativeImage {
    pub branches: Vec<ImageBranch>,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageBranch {
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
}

impl CoderivativeImage {
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// All vertices across branches, deduplicated.
    pub fn points(&self) -> Vec<Vec<f64>> {
        linalg::dedup_points(
            self.branches.iter().flat_map(|b| b.vertices.iter().cloned()).collect(),
            1e-9,
        )
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.branches.iter().any(|b| {
            let mut body = ConvexBody::polytope(b.vertices.clone());
            body.rays = b.rays.clone();
            body.contains(u, tol)
        })
    }
}

/// `{u : (u, −v) ∈ cone(gens)}` split into vertices and recession rays via
/// basic-solution enumeration. `p` is the length of the `u` block.
fn cone_slice(gens: &[Vec<f64>], p: usize, v: &[f64]) -> Option<ImageBranch> {
    let n = v.len();
    let target: Vec<f64> = v.iter().map(|c| -c).collect();
    let tn = linalg::norm(&target).max(1.0);
    let mut vertices = Vec::new();
    if linalg::norm(v) <= 1e-14 {
        vertices.push(vec![0.0; p]);
    }
    for k in 1..=gens.len().min(n) {
        for subset in linalg::combinations(gens.len(), k) {
            let rows: Vec<Vec<f64>> = (0..n).map(|r| subset.iter().map(|&i| gens[i][p + r]).collect()).collect();
            let lam = linalg::lstsq(&rows, k, &target);
            if lam.iter().any(|l| *l < -1e-12) {
                continue;
            }
            let mut fit = vec![0.0; n];
            let mut u = vec![0.0; p];
            for (t, &i) in subset.iter().enumerate() {
                linalg::axpy(lam[t], &gens[i][p..], &mut fit);
                linalg::axpy(lam[t], &gens[i][..p], &mut u);
            }
            if linalg::dist(&fit, &target) <= 1e-10 * tn {
                vertices.push(u);
            }
        }
    }
    if vertices.is_empty() {
        return None;
    }
    let mut rays = Vec::new();
    for k in 1..=gens.len().min(n + 1) {
        for subset in linalg::combinations(gens.len(), k) {
            let mut rows: Vec<Vec<f64>> = (0..n).map(|r| subset.iter().map(|&i| gens[i][p + r]).collect()).collect();
            rows.push(vec![1.0; k]);
            let mut rhs = vec![0.0; n];
            rhs.push(1.0);
            let lam = linalg::lstsq(&rows, k, &rhs);
            if lam.iter().any(|l| *l < -1e-12) {
                continue;
            }
            let mut fit = vec![0.0; n];
            let mut u = vec![0.0; p];
            for (t, &i) in subset.iter().enumerate() {
                linalg::axpy(lam[t], &gens[i][p..], &mut fit);
                linalg::axpy(lam[t], &gens[i][..p], &mut u);
            }
            if linalg::norm(&fit) <= 1e-10 && (lam.iter().sum::<f64>() - 1.0).abs() <= 1e-9 {
                if let Some(r) = linalg::normalized(&u) {
                    rays.push(r);
                }
            }
        }
    }
    Some(ImageBranch {
        vertices: linalg::dedup_points(vertices, 1e-12),
        rays: linalg::dedup_points(rays, 1e-9),
    })
}

fn image_from_normals(normals: &RayUnion, p: usize, v: &[f64]) -> CoderivativeImage {
    CoderivativeImage {
        branches: normals.branches.iter().filter_map(|g| cone_slice(g, p, v)).collect(),
        approximate: normals.approximate,
    }
}

/// `D*K(ξ̄|z̄)(v) = {u : (u, −v) ∈ N((ξ̄, z̄); gph K)}`.
pub fn coderivative_k(prob: &VepProblem, xi: &[f64], z: &[f64], v: &[f64]) -> Result<CoderivativeImage, ProblemError> {
    let normals = prob.graph_normal_cone(xi, z)?;
    Ok(image_from_normals(&normals, prob.p(), v))
}

/// `D*K(ξ̄|z̄)(B)`, one body per normal-cone branch. Exact for `n = 1`;
/// for larger `n` the ball of `v` is sampled (inner approximation).
pub fn coderivative_k_ball(prob: &VepProblem, xi: &[f64], z: &[f64]) -> Result<(Vec<ConvexBody>, bool), ProblemError> {
    let n = prob.n();
    let p = prob.p();
    let normals = prob.graph_normal_cone(xi, z)?;
    let mut vs = vec![vec![0.0; n]];
    vs.extend(sphere_directions(n, 180));
    let mut bodies = Vec::new();
    for g in &normals.branches {
        let mut pts = Vec::new();
        let mut rays = Vec::new();
        for v in &vs {
            if let Some(b) = cone_slice(g, p, v) {
                pts.extend(b.vertices);
                rays.extend(b.rays);
            }
        }
        let mut body = ConvexBody::polytope(linalg::dedup_points(pts, 1e-12)).with_label("D*K(B)");
        body.rays = linalg::dedup_points(rays, 1e-9);
        bodies.push(body);
    }
    Ok((bodies, n > 1))
}

/// `∂μ(ξ̄, x̄) ⊆ ⋃_{z̄ ∈ Proj} D*K(ξ̄|z̄)(B) × B`, one branch per normal-cone branch.
pub fn mu_subgradient_estimate(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<SubgradEstimate, ProblemError> {
    let n = prob.n();
    let zbar = prob.slice(xi)?.project(x)?;
    let (bodies, approx) = coderivative_k_ball(prob, xi, &zbar)?;
    let ball = ConvexBody::ball(n, 1.0);
    let branches = bodies.iter().map(|b| b.product(&ball).with_label("D*K(B) × B")).collect();
    let mut qc_flags = vec![if prob.hypotheses.k_lsc { "K-lsc-asserted" } else { "K-lsc-assumed" }.to_string()];
    if approx {
        qc_flags.push("coderivative-ball-sampled".into());
    }
    Ok(SubgradEstimate {
        branches,
        exactness: Exactness::OuterEstimate,
        qc_flags,
        locally_lipschitz: true,
        subgradient_model: "coderivative-estimate".into(),
    })
}

/// Sampling parameters for the graph of `E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSampling {
    pub radius: f64,
    pub resolution: usize,
}

impl Default for GraphSampling {
    fn default() -> Self {
        GraphSampling {
            radius: 0.05,
            resolution: 201,
        }
    }
}

/// Points of `gph E` near `(ξ̄, x̄)`: grid points whose merit is within the
/// grid-step band of zero.
pub fn sample_graph_e(prob: &VepProblem, xi: &[f64], x: &[f64], s: &GraphSampling) -> Result<Vec<Vec<f64>>, ProblemError> {
    let p = prob.p();
    let center = linalg::concat(xi, x);
    let w = Window::cube(&center, 2.0 * s.radius);
    let res = if center.len() <= 2 {
        s.resolution
    } else {
        ((s.resolution * s.resolution) as f64).powf(1.0 / center.len() as f64).round() as usize
    };
    let band = w.step(res);
    let mut out = Vec::new();
    for pt in w.grid(res) {
        if eval_merit(prob, &pt[..p], &pt[p..])?.merit <= band {
            out.push(pt);
        }
    }
    Ok(out)
}

/// Sampled limiting normal cone to `gph E` at `(ξ̄, x̄)` (approximate).
pub fn graph_e_normals(prob: &VepProblem, xi: &[f64], x: &[f64], s: &GraphSampling) -> Result<RayUnion, ProblemError> {
    let samples = sample_graph_e(prob, xi, x, s)?;
    let center = linalg::concat(xi, x);
    let step = Window::cube(&center, 2.0 * s.radius).step(s.resolution);
    Ok(sampled_limiting_normals(
        &samples,
        &center,
        &[0.5 * s.radius, 0.25 * s.radius],
        360,
        3.0 * step,
    ))
}

/// `D*E(ξ̄|x̄)(v)` from sampled normals; a ray `(r_ξ, r_x)` contributes when
/// `r_x` is parallel to `−v` within `ray_tol`.
pub fn coderivative_e_sampled(
    prob: &VepProblem,
    xi: &[f64],
    x: &[f64],
    v: &[f64],
    s: &GraphSampling,
    ray_tol: f64,
) -> Result<CoderivativeImage, ProblemError> {
    let p = prob.p();
    let normals = graph_e_normals(prob, xi, x, s)?;
    let mut branches = vec![];
    let vn = linalg::norm(v);
    for b in &normals.branches {
        for r in b {
            let (rxi, rx) = r.split_at(p);
            if vn <= 1e-14 {
                if linalg::norm(rx) <= ray_tol {
                    branches.push(ImageBranch {
                        vertices: vec![vec![0.0; p]],
                        rays: vec![linalg::normalized(rxi).unwrap_or_else(|| vec![0.0; p])],
                    });
                }
            } else {
                // r_x = −t v for some t > 0.
                let t = -linalg::dot(rx, v) / (vn * vn);
                if t > 0.0 && linalg::dist(rx, &linalg::scale(v, -t)) <= ray_tol * linalg::norm(rx).max(1e-300) {
                    branches.push(ImageBranch {
                        vertices: vec![linalg::scale(rxi, 1.0 / t)],
                        rays: vec![],
                    });
                }
            }
        }
    }
    if vn <= 1e-14 {
        branches.push(ImageBranch {
            vertices: vec![vec![0.0; p]],
            rays: vec![],
        });
    }
    Ok(CoderivativeImage {
        branches,
        approximate: true,
    })
}

/// `∂(ψ₁ + ψ₂) ⊆ ∂ψ₁ + ∂ψ₂`, branchwise Minkowski sums.
pub fn sum_rule(a: &SubgradEstimate, b: &SubgradEstimate) -> SubgradEstimate {
    let mut branches = Vec::new();
    for x in &a.branches {
        for y in &b.branches {
            branches.push(x.sum(y));
        }
    }
    let mut qc_flags: Vec<String> = a.qc_flags.iter().chain(&b.qc_flags).cloned().collect();
    if a.locally_lipschitz || b.locally_lipschitz {
        qc_flags.push("singular-qc-satisfied-lipschitz".into());
    } else {
        qc_flags.push("qc-assumed".into());
    }
    qc_flags.dedup();
    SubgradEstimate {
        branches,
        exactness: a.exactness.weakest(b.exactness),
        qc_flags,
        locally_lipschitz: a.locally_lipschitz && b.locally_lipschitz,
        subgradient_model: format!("{} + {}", a.subgradient_model, b.subgradient_model),
    }
}
