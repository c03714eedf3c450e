//! Penalty method for the outer problem and checkers for the necessary
//! optimality conditions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{least_norm_decomposition, sphere_directions, wolfe_min_norm, ConvexBody};
use crate::linalg;
use crate::merit::{fd_gradient, merit_gradient, merit_value};
use crate::problem::{ProblemError, VepProblem, Window};
use crate::subdiff::{mu_subgradient_estimate, nu_outer_estimate, nu_subgradient_full, Exactness};

/// Merit below this counts as being on the graph of `E`.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub lambda_initial: f64,
    pub lambda_growth: f64,
    pub lambda_max: f64,
    pub gamma: f64,
    /// Step caps `a/√k`; `None` calibrates `a` to the window diameter.
    pub step_scale: Option<f64>,
    pub max_iterations: usize,
    pub restarts: usize,
    pub tol_stat: f64,
    pub seed: u64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda_initial: 0.5,
            lambda_growth: 2.0,
            lambda_max: 64.0,
            gamma: 0.9,
            step_scale: None,
            max_iterations: 500,
            restarts: 2,
            tol_stat: 1e-6,
            seed: 0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: &str| ProblemError::Invalid {
            location: "solver config".into(),
            message: m.into(),
        };
        if !(self.lambda_initial > 0.0) {
            return Err(bad("lambda_initial must be positive"));
        }
        if !(self.lambda_growth > 1.0) {
            return Err(bad("lambda_growth must exceed 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(bad("gamma must be positive"));
        }
        if !(self.tol_stat > 0.0) {
            return Err(bad("tol_stat must be positive"));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let mut out = vec![self.lambda_initial];
        while *out.last().unwrap() * self.lambda_growth <= self.lambda_max * (1.0 + 1e-12) {
            out.push(out.last().unwrap() * self.lambda_growth);
        }
        out
    }
}

/// `φ(ξ, x) + λ dist(ξ, Ω) + (λ/γ) merit(ξ, x)`.
pub fn penalized_value(prob: &VepProblem, xi: &[f64], x: &[f64], lambda: f64, gamma: f64) -> Result<f64, ProblemError> {
    let phi = prob.objective_value(xi, x)?;
    let d_omega = prob.omega.dist(xi)?;
    let m = merit_value(prob, xi, x)?;
    Ok(phi + lambda * d_omega + (lambda / gamma) * m)
}

/// Gradient of the penalized function at a point where every piece is
/// differentiable; central differences elsewhere.
fn penalized_gradient(prob: &VepProblem, w: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>, ProblemError> {
    let p = prob.p();
    let (xi, x) = w.split_at(p);
    let hull = prob.objective_grad_hull(xi, x)?;
    let mg = merit_gradient(prob, xi, x)?;
    let proj = prob.omega.project(xi)?;
    let d = linalg::dist(xi, &proj);
    let omega_smooth = d > 1e-12 || prob.omega.contains(xi, -1e-12);
    match (hull.len(), mg, omega_smooth) {
        (1, Some(mg), true) => {
            let mut g = hull[0].clone();
            if d > 1e-12 {
                let u = linalg::scale(&linalg::sub(xi, &proj), lambda / d);
                for k in 0..p {
                    g[k] += u[k];
                }
            }
            linalg::axpy(lambda / gamma, &mg, &mut g);
            Ok(g)
        }
        _ => fd_gradient(xi, x, 1e-8, |a, b| penalized_value(prob, a, b, lambda, gamma)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub start: usize,
    pub stage: usize,
    /// 0 for the main descent of a stage, `k` for its `k`-th restart.
    pub run: usize,
    pub lambda: f64,
    pub iteration: usize,
    pub value: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    UnboundedBelow,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationCap => "iteration-cap",
            SolveStatus::UnboundedBelow => "unbounded-below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainResult {
    pub start: Vec<f64>,
    pub point: Vec<f64>,
    pub lambda: f64,
    pub stages: usize,
    pub value: f64,
    pub objective: f64,
    pub merit: f64,
    pub omega_dist: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub best: ChainResult,
    pub best_index: usize,
    pub chains: Vec<ChainResult>,
    pub trace: Vec<TraceEntry>,
    pub lambdas: Vec<f64>,
}

impl ChainResult {
    fn feasible(&self) -> bool {
        self.merit <= FEASIBILITY_TOL && self.omega_dist <= FEASIBILITY_TOL
    }
}

/// Gradient sampling descent on the penalized function for one `λ`.
/// Returns the final point and whether the value diverged.
#[allow(clippy::too_many_arguments)]
fn descend(
    prob: &VepProblem,
    w0: &[f64],
    lambda: f64,
    cfg: &PenaltyConfig,
    a: f64,
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<TraceEntry>,
    tag: (usize, usize, usize),
) -> Result<(Vec<f64>, bool), ProblemError> {
    let p = prob.p();
    let dim = w0.len();
    let f = |w: &[f64]| penalized_value(prob, &w[..p], &w[p..], lambda, cfg.gamma);
    let mut w = w0.to_vec();
    let mut fw = f(&w)?;
    let mut radius = 0.1 * a;
    let radius_min = 1e-9;
    let ball = Window::cube(&vec![0.0; dim], 1.0);
    for k in 1..=cfg.max_iterations {
        let mut grads = vec![penalized_gradient(prob, &w, lambda, cfg.gamma)?];
        for _ in 0..2 * (dim + 1) {
            let u = linalg::scale(&ball.sample(rng), radius);
            grads.push(penalized_gradient(prob, &linalg::add(&w, &u), lambda, cfg.gamma)?);
        }
        let (g, _) = wolfe_min_norm(&grads);
        let gn = linalg::norm(&g);
        if gn <= cfg.tol_stat {
            radius *= 0.1;
            if radius < radius_min {
                break;
            }
            continue;
        }
        let dir = linalg::scale(&g, -1.0 / gn);
        let mut t = (a / (k as f64).sqrt()).min(10.0 * radius.max(gn * 1e-3));
        let mut accepted = None;
        while t > 1e-14 {
            let cand: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let fc = f(&cand)?;
            if fc <= fw - 1e-6 * t * gn {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                w = cand;
                fw = fc;
                trace.push(TraceEntry {
                    start: tag.0,
                    stage: tag.1,
                    run: tag.2,
                    lambda,
                    iteration: k,
                    value: fw,
                    step: t,
                });
                if fw < -1e12 {
                    return Ok((w, true));
                }
                if t > 0.5 * radius {
                    radius = (2.0 * radius).min(0.1 * a);
                }
            }
            None => {
                radius *= 0.1;
                if radius < radius_min {
                    break;
                }
            }
        }
    }
    Ok((w, false))
}

fn chain(
    prob: &VepProblem,
    cfg: &PenaltyConfig,
    start: &[f64],
    index: usize,
    a: f64,
) -> Result<(ChainResult, Vec<TraceEntry>), ProblemError> {
    let p = prob.p();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let mut trace = Vec::new();
    let mut w = start.to_vec();
    let lambdas = cfg.lambdas();
    let mut status = SolveStatus::IterationCap;
    let mut stages = 0;
    let mut lambda = lambdas[0];
    for (s, &lam) in lambdas.iter().enumerate() {
        stages = s + 1;
        lambda = lam;
        let (mut best, diverged) = descend(prob, &w, lam, cfg, a, &mut rng, &mut trace, (index, s, 0))?;
        if diverged {
            status = SolveStatus::UnboundedBelow;
            w = best;
            break;
        }
        // Restarts from perturbed incumbents.
        let mut best_val = penalized_value(prob, &best[..p], &best[p..], lam, cfg.gamma)?;
        for run in 1..=cfg.restarts {
            let kick = Window::cube(&best, 1e-3 * a).sample(&mut rng);
            let (cand, _) = descend(prob, &kick, lam, cfg, a, &mut rng, &mut trace, (index, s, run))?;
            let v = penalized_value(prob, &cand[..p], &cand[p..], lam, cfg.gamma)?;
            if v < best_val - 1e-12 {
                best = cand;
                best_val = v;
            }
        }
        w = best;
        let m = merit_value(prob, &w[..p], &w[p..])?;
        if m <= FEASIBILITY_TOL && prob.omega.dist(&w[..p])? <= FEASIBILITY_TOL {
            status = SolveStatus::Converged;
            break;
        }
    }
    let (xi, x) = w.split_at(p);
    Ok((
        ChainResult {
            start: start.to_vec(),
            point: w.clone(),
            lambda,
            stages,
            value: penalized_value(prob, xi, x, lambda, cfg.gamma)?,
            objective: prob.objective_value(xi, x)?,
            merit: merit_value(prob, xi, x)?,
            omega_dist: prob.omega.dist(xi)?,
            status,
        },
        trace,
    ))
}

/// Multi-start penalty method: each start is a chain of gradient sampling
/// descents over the `λ` schedule, stopped once the incumbent is feasible.
/// The best chain is the feasible one with the lowest objective (lowest
/// start index on ties), else the one with the lowest merit.
pub fn solve_penalized(prob: &VepProblem, cfg: &PenaltyConfig, starts: &[Vec<f64>]) -> Result<SolveOutcome, ProblemError> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err(ProblemError::Invalid {
            location: "solve".into(),
            message: "no starting points".into(),
        });
    }
    let a = cfg.step_scale.unwrap_or_else(|| {
        let xw = prob.x_window.clone().unwrap_or_else(|| Window::cube(&vec![0.0; prob.n()], 1.0));
        0.1 * linalg::concat(&prob.xi_window.lo, &xw.lo)
            .iter()
            .zip(linalg::concat(&prob.xi_window.hi, &xw.hi))
            .map(|(l, h)| (h - l).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    let runs: Vec<(ChainResult, Vec<TraceEntry>)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| chain(prob, cfg, s, i, a))
        .collect::<Result<_, ProblemError>>()?;
    let mut chains = Vec::new();
    let mut trace = Vec::new();
    for (c, t) in runs {
        chains.push(c);
        trace.extend(t);
    }
    let key = |c: &ChainResult| if c.feasible() { (0, c.objective) } else { (1, c.merit + c.omega_dist) };
    let best_index = (0..chains.len())
        .min_by(|&i, &j| {
            let (a, b) = (key(&chains[i]), key(&chains[j]));
            a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(i.cmp(&j))
        })
        .unwrap();
    Ok(SolveOutcome {
        best: chains[best_index].clone(),
        best_index,
        chains,
        trace,
        lambdas: cfg.lambdas(),
    })
}

/// Random starts in a window.
pub fn random_starts(window: &Window, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| window.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StatVerdict {
    StationaryWithinTol,
    RefutedByDirection { direction: Vec<f64> },
    Inconclusive,
}

impl StatVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatVerdict::StationaryWithinTol => "stationary-within-tol",
            StatVerdict::RefutedByDirection { .. } => "refuted-by-direction",
            StatVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub lambda: f64,
    pub eps: Option<f64>,
    pub branch: usize,
    pub residual: f64,
}

/// `support(RHS, d) = c0 + λ c1` on one branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportRow {
    pub direction: Vec<f64>,
    pub eps: Option<f64>,
    pub branch: usize,
    pub c0: f64,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub residual: f64,
    pub branch_id: usize,
    pub verdict: StatVerdict,
    pub residual_table: Vec<ResidualRow>,
    pub support_table: Vec<SupportRow>,
    /// Labels and vectors of the decomposition `0 = Σ parts`.
    pub witness: Option<Vec<(String, Vec<f64>)>>,
    pub witness_violation: Option<f64>,
    pub tol_stat: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityOptions {
    pub tol_stat: f64,
    pub refutation_dirs: Vec<Vec<f64>>,
}

impl StationarityOptions {
    /// Coordinate directions and their negatives.
    pub fn coordinate(dim: usize) -> Self {
        let mut dirs = Vec::new();
        for i in 0..dim {
            dirs.push(linalg::neg(&linalg::unit(dim, i)));
            dirs.push(linalg::unit(dim, i));
        }
        StationarityOptions {
            tol_stat: 1e-6,
            refutation_dirs: dirs,
        }
    }
}

/// The pieces of the right-hand side with the λ scaling left out.
struct Pieces {
    phi: ConvexBody,
    omega: ConvexBody,
    /// One per ε for the smooth-concave variant, one otherwise.
    nu: Vec<(Option<f64>, ConvexBody)>,
    mu: Vec<ConvexBody>,
    flags: Vec<String>,
}

fn common_pieces(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<Pieces, ProblemError> {
    let merit = merit_value(prob, xi, x)?;
    if merit > FEASIBILITY_TOL {
        return Err(ProblemError::NotASolution {
            xi: xi.to_vec(),
            x: x.to_vec(),
            merit,
        });
    }
    let od = prob.omega.dist(xi)?;
    if od > FEASIBILITY_TOL {
        return Err(ProblemError::Invalid {
            location: "stationarity".into(),
            message: format!("xi is not in Omega (distance {od:e})"),
        });
    }
    let n = prob.n();
    let omega_normals = prob.omega.normal_cone(&prob.omega.project(xi)?)?;
    let omega = omega_normals
        .capped_bodies(1.0)
        .into_iter()
        .next()
        .unwrap_or_else(|| ConvexBody::zero(prob.p()))
        .product(&ConvexBody::zero(n))
        .with_label("N(Omega) cap x {0}");
    let mu_est = mu_subgradient_estimate(prob, xi, x)?;
    let mut flags = mu_est.qc_flags.clone();
    if omega_normals.approximate {
        flags.push("omega-normals-approximate".into());
    }
    Ok(Pieces {
        phi: ConvexBody::polytope(prob.objective_grad_hull(xi, x)?).with_label("d phi"),
        omega,
        nu: Vec::new(),
        mu: mu_est.branches,
        flags,
    })
}

fn assemble(
    pieces: &Pieces,
    xi: &[f64],
    x: &[f64],
    lambda_grid: &[f64],
    gamma: f64,
    opts: &StationarityOptions,
    mut flags: Vec<String>,
) -> Result<StationarityReport, ProblemError> {
    if !(gamma > 0.0) {
        return Err(ProblemError::Invalid {
            location: "stationarity".into(),
            message: "gamma must be positive".into(),
        });
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(ProblemError::Invalid {
            location: "stationarity".into(),
            message: "lambda grid must be nonempty and positive".into(),
        });
    }
    // Residual per (λ, ε, branch); the ε-intersection takes the worst ε.
    let mut table = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None; // residual, λ index, branch
    for (li, &lam) in lambda_grid.iter().enumerate() {
        let t = lam / gamma;
        let base = pieces.phi.sum(&pieces.omega.scaled(lam));
        let mut per_branch = vec![0.0f64; pieces.mu.len()];
        for (eps, nu) in &pieces.nu {
            let with_nu = base.sum(&nu.scaled(t));
            for (b, mu) in pieces.mu.iter().enumerate() {
                let r = with_nu.sum(&mu.scaled(t)).min_norm_point()?.dist;
                table.push(ResidualRow {
                    lambda: lam,
                    eps: *eps,
                    branch: b,
                    residual: r,
                });
                per_branch[b] = per_branch[b].max(r);
            }
        }
        for (b, r) in per_branch.into_iter().enumerate() {
            if best.is_none_or(|(br, _, _)| r < br) {
                best = Some((r, li, b));
            }
        }
    }
    let (residual, li, branch) = best.expect("at least one branch");
    let lambda = lambda_grid[li];

    // λ-affine sign test: refuted iff every branch (and, for the ε variant,
    // some single ε) has c0 < 0 and c1 ≤ 0.
    let mut support_table = Vec::new();
    let mut refuted = None;
    for d in &opts.refutation_dirs {
        let c0 = pieces.phi.support(d);
        let h1 = pieces.omega.support(d);
        for (eps, nu) in &pieces.nu {
            let mut all = true;
            for (b, mu) in pieces.mu.iter().enumerate() {
                let c1 = h1 + (nu.support(d) + mu.support(d)) / gamma;
                support_table.push(SupportRow {
                    direction: d.clone(),
                    eps: *eps,
                    branch: b,
                    c0,
                    c1,
                });
                all &= c0 < 0.0 && c1 <= 0.0;
            }
            if all && refuted.is_none() {
                refuted = Some(d.clone());
            }
        }
    }

    let mut witness = None;
    let mut witness_violation = None;
    let verdict = if let Some(d) = refuted {
        StatVerdict::RefutedByDirection { direction: d }
    } else if residual <= opts.tol_stat {
        let t = lambda / gamma;
        let nu = &pieces.nu[0].1;
        let bodies = vec![
            pieces.phi.clone(),
            pieces.omega.scaled(lambda),
            nu.scaled(t),
            pieces.mu[branch].scaled(t),
        ];
        let (parts, viol) = least_norm_decomposition(&bodies, &vec![0.0; xi.len() + x.len()], 20_000)?;
        let labels = ["d phi", "lambda N(Omega)", "lambda/gamma d nu", "lambda/gamma D*K(B) x B"];
        witness = Some(labels.iter().map(|s| s.to_string()).zip(parts).collect());
        witness_violation = Some(viol);
        StatVerdict::StationaryWithinTol
    } else {
        StatVerdict::Inconclusive
    };
    flags.extend(pieces.flags.iter().cloned());
    flags.sort();
    flags.dedup();
    Ok(StationarityReport {
        xi: xi.to_vec(),
        x: x.to_vec(),
        gamma,
        lambda,
        residual,
        branch_id: branch,
        verdict,
        residual_table: table,
        support_table,
        witness,
        witness_violation,
        tol_stat: opts.tol_stat,
        flags,
    })
}

/// `0 ∈ ∂φ + λ[(N(ξ̄; Ω) ∩ B) × {0}] + (λ/γ)[∂ν + (D*K(B) × B)]` over a λ grid.
pub fn check_stationarity_general(
    prob: &VepProblem,
    xi: &[f64],
    x: &[f64],
    lambda_grid: &[f64],
    gamma: f64,
    opts: &StationarityOptions,
) -> Result<StationarityReport, ProblemError> {
    let mut pieces = common_pieces(prob, xi, x)?;
    let dnu = nu_subgradient_full(prob, xi, x)?;
    let mut flags = dnu.qc_flags.clone();
    pieces.nu.push((None, dnu.body().clone()));
    let mut report = assemble(&pieces, xi, x, lambda_grid, gamma, opts, std::mem::take(&mut flags))?;
    if dnu.exactness != Exactness::ExactConvex && report.verdict == StatVerdict::StationaryWithinTol {
        report.verdict = StatVerdict::Inconclusive;
        report.flags.push("nu-subdifferential-not-exact".into());
    }
    Ok(report)
}

/// Variant with `∂ν` replaced by its per-ε outer estimates; stationarity
/// needs every ε, refutation a single one.
#[allow(clippy::too_many_arguments)]
pub fn check_stationarity_smooth_concave(
    prob: &VepProblem,
    xi: &[f64],
    x: &[f64],
    lambda_grid: &[f64],
    gamma: f64,
    eps_list: &[f64],
    lf: f64,
    opts: &StationarityOptions,
) -> Result<StationarityReport, ProblemError> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(ProblemError::Invalid {
            location: "stationarity".into(),
            message: "eps list must be nonempty and positive".into(),
        });
    }
    let mut pieces = common_pieces(prob, xi, x)?;
    let outer = nu_outer_estimate(prob, xi, x, eps_list, lf)?;
    for (e, b) in outer.eps.iter().zip(outer.bodies) {
        pieces.nu.push((Some(*e), b));
    }
    let mut flags = Vec::new();
    if !prob.hypotheses.f_smooth_concave {
        flags.push("hypotheses-not-asserted".into());
    }
    assemble(&pieces, xi, x, lambda_grid, gamma, opts, flags)
}

/// Sampled strong slope of the penalized function over `(ξ, x)`.
pub fn penalized_strong_slope(prob: &VepProblem, w: &[f64], lambda: f64, gamma: f64, r: f64) -> Result<f64, ProblemError> {
    let p = prob.p();
    let f0 = penalized_value(prob, &w[..p], &w[p..], lambda, gamma)?;
    let mut best: f64 = 0.0;
    for d in sphere_directions(w.len(), 64) {
        let y: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + r * b).collect();
        best = best.max((f0 - penalized_value(prob, &y[..p], &y[p..], lambda, gamma)?) / r);
    }
    Ok(best)
}
